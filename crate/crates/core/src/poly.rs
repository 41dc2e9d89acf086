//! Sparse polynomials in the two spectral variables `z`, `w`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;

use crate::scalar::{Field, Real};

/// Spectral variable selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Z,
    W,
}

/// Exponent pair `(deg_z, deg_w)`. Ordered lexicographically, `z` first.
pub type Exp = (u32, u32);

/// Sparse bivariate polynomial; no zero coefficients are stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly<F: Field> {
    terms: BTreeMap<Exp, F>,
}

impl<F: Field> Poly<F> {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn constant(c: F) -> Self {
        Self::monomial(c, (0, 0))
    }

    pub fn one() -> Self {
        Self::constant(F::one())
    }

    pub fn monomial(c: F, e: Exp) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        Poly { terms }
    }

    pub fn var(v: Var) -> Self {
        match v {
            Var::Z => Self::monomial(F::one(), (1, 0)),
            Var::W => Self::monomial(F::one(), (0, 1)),
        }
    }

    /// `v - c`.
    pub fn linear(v: Var, c: &F) -> Self {
        Self::var(v).sub(&Self::constant(c.clone()))
    }

    pub fn from_terms<I: IntoIterator<Item = (Exp, F)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in it {
            p.add_term(e, c);
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exp, &F)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| *e == (0, 0))
    }

    pub fn constant_term(&self) -> F {
        self.terms.get(&(0, 0)).cloned().unwrap_or_else(F::zero)
    }

    pub fn coeff(&self, e: Exp) -> F {
        self.terms.get(&e).cloned().unwrap_or_else(F::zero)
    }

    pub fn degree(&self, v: Var) -> u32 {
        self.terms
            .keys()
            .map(|&(a, b)| if v == Var::Z { a } else { b })
            .max()
            .unwrap_or(0)
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.degree(v) > 0
    }

    pub fn leading(&self) -> Option<(&Exp, &F)> {
        self.terms.iter().next_back()
    }

    pub fn add_term(&mut self, e: Exp, c: F) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(x) => {
                *x = x.add_r(&c);
                if x.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &other.terms {
            r.add_term(*e, c.clone());
        }
        r
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &other.terms {
            r.add_term(*e, c.neg_r());
        }
        r
    }

    pub fn neg(&self) -> Self {
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, c.neg_r())).collect(),
        }
    }

    pub fn scale(&self, s: &F) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(e, c)| (*e, c.mul_r(s))).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut r = Self::zero();
        for ((a1, b1), c1) in &self.terms {
            for ((a2, b2), c2) in &other.terms {
                r.add_term((a1 + a2, b1 + b2), c1.mul_r(c2));
            }
        }
        r
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self, v: Var) -> Self {
        let mut r = Self::zero();
        for (&(a, b), c) in &self.terms {
            match v {
                Var::Z if a > 0 => r.add_term((a - 1, b), c.mul_r(&F::from_i64(a as i64))),
                Var::W if b > 0 => r.add_term((a, b - 1), c.mul_r(&F::from_i64(b as i64))),
                _ => {}
            }
        }
        r
    }

    /// Split off the leading coefficient: `self = lc * monic`.
    pub fn monic(&self) -> (F, Self) {
        match self.leading() {
            None => (F::zero(), Self::zero()),
            Some((_, lc)) => {
                let lc = lc.clone();
                let inv = lc.inv_r();
                (lc, self.scale(&inv))
            }
        }
    }

    /// Exact quotient `self / divisor`, or `None` if the division leaves a remainder.
    pub fn exact_div(&self, divisor: &Self) -> Option<Self> {
        let (&(da, db), dc) = divisor.leading()?;
        let dinv = dc.inv_r();
        let mut rem = self.clone();
        let mut quo = Self::zero();
        while let Some((&(ra, rb), rc)) = rem.leading() {
            if ra < da || rb < db {
                return None;
            }
            let e = (ra - da, rb - db);
            let c = rc.mul_r(&dinv);
            let shifted = Poly {
                terms: divisor
                    .terms
                    .iter()
                    .map(|(&(a, b), x)| ((a + e.0, b + e.1), x.mul_r(&c)))
                    .collect(),
            };
            rem = rem.sub(&shifted);
            quo.add_term(e, c);
        }
        Some(quo)
    }

    /// Substitute `z -> zs`, `w -> ws`.
    pub fn compose(&self, zs: &Self, ws: &Self) -> Self {
        let mut zp: Vec<Self> = vec![Self::one()];
        let mut wp: Vec<Self> = vec![Self::one()];
        let mut r = Self::zero();
        for (&(a, b), c) in &self.terms {
            while zp.len() <= a as usize {
                let next = zp.last().unwrap().mul(zs);
                zp.push(next);
            }
            while wp.len() <= b as usize {
                let next = wp.last().unwrap().mul(ws);
                wp.push(next);
            }
            r = r.add(&zp[a as usize].mul(&wp[b as usize]).scale(c));
        }
        r
    }

    /// Substitute a value for one variable.
    pub fn subs(&self, v: Var, val: &F) -> Self {
        let mut r = Self::zero();
        for (&(a, b), c) in &self.terms {
            match v {
                Var::Z => r.add_term((0, b), c.mul_r(&val.pow_u(a))),
                Var::W => r.add_term((a, 0), c.mul_r(&val.pow_u(b))),
            }
        }
        r
    }

    pub fn eval(&self, z: &F, w: &F) -> F {
        self.terms.iter().fold(F::zero(), |acc, (&(a, b), c)| {
            acc.add_r(&c.mul_r(&z.pow_u(a)).mul_r(&w.pow_u(b)))
        })
    }

    pub fn eval_complex<R: Real>(&self, z: Complex<R>, w: Complex<R>) -> Complex<R> {
        let mut acc = Complex::new(R::zero(), R::zero());
        for (&(a, b), c) in &self.terms {
            let c = Complex::new(R::lit(c.to_f64()), R::zero());
            acc = acc + c * z.powu(a) * w.powu(b);
        }
        acc
    }
}

impl<F: Field> fmt::Debug for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<F: Field> fmt::Display for Poly<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mono = match (a, b) {
                (0, 0) => String::new(),
                _ => {
                    let mut s = String::new();
                    if a > 0 {
                        s.push_str(&if a == 1 { "z".into() } else { format!("z^{a}") });
                    }
                    if b > 0 {
                        if a > 0 {
                            s.push('*');
                        }
                        s.push_str(&if b == 1 { "w".into() } else { format!("w^{b}") });
                    }
                    s
                }
            };
            if mono.is_empty() {
                write!(f, "({c})")?;
            } else if c.is_one() {
                write!(f, "{mono}")?;
            } else {
                write!(f, "({c})*{mono}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type P = Poly<BigRational>;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn exact_division_detects_remainder() {
        let zmw = P::var(Var::Z).sub(&P::var(Var::W));
        let sq = zmw.mul(&zmw);
        assert_eq!(sq.exact_div(&zmw).unwrap(), zmw);
        assert!(sq.add(&P::one()).exact_div(&zmw).is_none());
    }

    #[test]
    fn compose_shift() {
        // (z - w) with z -> w + z becomes z
        let zmw = P::var(Var::Z).sub(&P::var(Var::W));
        let shifted = zmw.compose(&P::var(Var::W).add(&P::var(Var::Z)), &P::var(Var::W));
        assert_eq!(shifted, P::var(Var::Z));
    }

    #[test]
    fn subs_and_eval_agree() {
        let p = P::from_terms([((2, 1), q(3, 2)), ((0, 1), q(-1, 1)), ((1, 0), q(5, 1))]);
        let z = q(2, 3);
        let w = q(-7, 5);
        assert_eq!(p.subs(Var::Z, &z).eval(&q(0, 1), &w), p.eval(&z, &w));
    }
}

//! Exact rational functions in `z`, `w`, the twist function and twisted derivatives.
//!
//! Denominators are kept as a product of monic factors with multiplicities.
//! Every function built from poles `1/(z - c)`, `1/(w - c)`, `1/(z - w)` therefore
//! stays in lowest terms by trial division against its own factors, which is
//! all the cancellation the Gaudin states ever need.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::poly::{Poly, Var};
use crate::scalar::{Field, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RatFunError {
    #[error("division by the zero function")]
    DivisionByZero,
    #[error("substitution hits a pole")]
    Pole,
}

/// A rational function `num / prod(factor^exp)`, denominator factors monic.
#[derive(Clone)]
pub struct RatFun<F: Field> {
    num: Poly<F>,
    den: Vec<(Poly<F>, u32)>,
}

/// Structural key for grouping identical canonical forms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RatFunKey<F: Field> {
    num: Poly<F>,
    den: Vec<(Poly<F>, u32)>,
}

fn merge_lcm<F: Field>(
    a: &[(Poly<F>, u32)],
    b: &[(Poly<F>, u32)],
) -> (Vec<(Poly<F>, u32)>, Poly<F>, Poly<F>) {
    // returns lcm, multiplier for a's numerator, multiplier for b's numerator
    let mut lcm = Vec::with_capacity(a.len() + b.len());
    let mut ma = Poly::one();
    let mut mb = Poly::one();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => unreachable!(),
        };
        match ord {
            std::cmp::Ordering::Less => {
                let (f, e) = &a[i];
                mb = mb.mul(&f.pow(*e));
                lcm.push((f.clone(), *e));
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                let (f, e) = &b[j];
                ma = ma.mul(&f.pow(*e));
                lcm.push((f.clone(), *e));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let (f, ea) = &a[i];
                let eb = b[j].1;
                let e = (*ea).max(eb);
                if e > *ea {
                    ma = ma.mul(&f.pow(e - ea));
                }
                if e > eb {
                    mb = mb.mul(&f.pow(e - eb));
                }
                lcm.push((f.clone(), e));
                i += 1;
                j += 1;
            }
        }
    }
    (lcm, ma, mb)
}

impl<F: Field> RatFun<F> {
    pub fn zero() -> Self {
        RatFun { num: Poly::zero(), den: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(F::one())
    }

    pub fn constant(c: F) -> Self {
        RatFun { num: Poly::constant(c), den: Vec::new() }
    }

    pub fn from_poly(p: Poly<F>) -> Self {
        RatFun { num: p, den: Vec::new() }
    }

    pub fn var(v: Var) -> Self {
        Self::from_poly(Poly::var(v))
    }

    /// `1 / (v - c)^order`.
    pub fn pole(v: Var, c: &F, order: u32) -> Self {
        if order == 0 {
            return Self::one();
        }
        let (_, f) = Poly::linear(v, c).monic();
        RatFun { num: Poly::one(), den: vec![(f, order)] }
    }

    /// `1 / (z - w)^order`.
    pub fn diagonal_pole(order: u32) -> Self {
        if order == 0 {
            return Self::one();
        }
        let f = Poly::var(Var::Z).sub(&Poly::var(Var::W));
        RatFun { num: Poly::one(), den: vec![(f, order)] }
    }

    /// Build `num / den` for arbitrary polynomials.
    pub fn from_parts(num: Poly<F>, den: Poly<F>) -> Result<Self, RatFunError> {
        if den.is_zero() {
            return Err(RatFunError::DivisionByZero);
        }
        let (lc, monic) = den.monic();
        let num = num.scale(&lc.inv_r());
        let den = if monic.is_constant() { Vec::new() } else { vec![(monic, 1)] };
        Ok(RatFun { num, den }.cancelled())
    }

    pub fn numerator(&self) -> &Poly<F> {
        &self.num
    }

    pub fn denominator_factors(&self) -> &[(Poly<F>, u32)] {
        &self.den
    }

    pub fn denominator(&self) -> Poly<F> {
        self.den.iter().fold(Poly::one(), |acc, (f, e)| acc.mul(&f.pow(*e)))
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num == Poly::one()
    }

    /// `Some(c)` if the function is the constant `c`.
    pub fn as_constant(&self) -> Option<F> {
        if self.den.is_empty() && self.num.is_constant() {
            Some(self.num.constant_term())
        } else {
            None
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.num.depends_on(v) || self.den.iter().any(|(f, _)| f.depends_on(v))
    }

    pub fn key(&self) -> RatFunKey<F> {
        RatFunKey { num: self.num.clone(), den: self.den.clone() }
    }

    fn cancelled(mut self) -> Self {
        if self.num.is_zero() {
            self.den.clear();
            return self;
        }
        for (f, e) in self.den.iter_mut() {
            while *e > 0 {
                match self.num.exact_div(f) {
                    Some(q) => {
                        self.num = q;
                        *e -= 1;
                    }
                    None => break,
                }
            }
        }
        self.den.retain(|(_, e)| *e > 0);
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if self.den == other.den {
            return RatFun { num: self.num.add(&other.num), den: self.den.clone() }.cancelled();
        }
        let (den, ma, mb) = merge_lcm(&self.den, &other.den);
        let num = self.num.mul(&ma).add(&other.num.mul(&mb));
        RatFun { num, den }.cancelled()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        RatFun { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn scale(&self, s: &F) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        RatFun { num: self.num.scale(s), den: self.den.clone() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let num = self.num.mul(&other.num);
        let mut den: Vec<(Poly<F>, u32)> = Vec::with_capacity(self.den.len() + other.den.len());
        let (mut i, mut j) = (0, 0);
        while i < self.den.len() || j < other.den.len() {
            let ord = match (self.den.get(i), other.den.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => std::cmp::Ordering::Less,
                _ => std::cmp::Ordering::Greater,
            };
            match ord {
                std::cmp::Ordering::Less => {
                    den.push(self.den[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    den.push(other.den[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    den.push((self.den[i].0.clone(), self.den[i].1 + other.den[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        RatFun { num, den }.cancelled()
    }

    pub fn inv(&self) -> Result<Self, RatFunError> {
        if self.is_zero() {
            return Err(RatFunError::DivisionByZero);
        }
        let den_poly = self.denominator();
        let (lc, monic) = self.num.monic();
        let num = den_poly.scale(&lc.inv_r());
        let den = if monic.is_constant() { Vec::new() } else { vec![(monic, 1)] };
        Ok(RatFun { num, den }.cancelled())
    }

    pub fn div(&self, other: &Self) -> Result<Self, RatFunError> {
        if other.is_zero() {
            return Err(RatFunError::DivisionByZero);
        }
        // fast path: dividing by a product of our own kind of factors
        if other.num.is_constant() {
            let c = other.num.constant_term().inv_r();
            let mut num = self.num.scale(&c);
            for (f, e) in &other.den {
                num = num.mul(&f.pow(*e));
            }
            return Ok(RatFun { num, den: self.den.clone() }.cancelled());
        }
        if other.den.is_empty() && other.num.len() <= 2 {
            if let Some((_, lc)) = other.num.leading() {
                let lc = lc.clone();
                let (_, monic) = other.num.monic();
                let inv = RatFun { num: Poly::constant(lc.inv_r()), den: vec![(monic, 1)] };
                return Ok(self.mul(&inv));
            }
        }
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn derivative(&self, v: Var) -> Self {
        if self.den.is_empty() {
            return Self::from_poly(self.num.derivative(v));
        }
        // (N/D)' with D = prod f^e: [N' prod f - N sum e f' prod_{g!=f} g] / (D prod f)
        let prod: Poly<F> = self.den.iter().fold(Poly::one(), |acc, (f, _)| acc.mul(f));
        let mut num = self.num.derivative(v).mul(&prod);
        for (idx, (f, e)) in self.den.iter().enumerate() {
            let df = f.derivative(v);
            if df.is_zero() {
                continue;
            }
            let others = self
                .den
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .fold(Poly::one(), |acc, (_, (g, _))| acc.mul(g));
            num = num.sub(&self.num.mul(&df).mul(&others).scale(&F::from_i64(*e as i64)));
        }
        let den = self.den.iter().map(|(f, e)| (f.clone(), e + 1)).collect();
        RatFun { num, den }.cancelled()
    }

    pub fn nth_derivative(&self, v: Var, n: u32) -> Self {
        let mut r = self.clone();
        for _ in 0..n {
            r = r.derivative(v);
        }
        r
    }

    /// Substitute a value for one variable; factors stay separate.
    pub fn subs(&self, v: Var, val: &F) -> Result<Self, RatFunError> {
        let mut r = Self::from_poly(self.num.subs(v, val));
        for (f, e) in &self.den {
            let g = f.subs(v, val);
            if g.is_zero() {
                return Err(RatFunError::Pole);
            }
            let (lc, monic) = g.monic();
            r = r.scale(&lc.pow_u(*e).inv_r());
            if !monic.is_constant() {
                r = r.mul(&RatFun { num: Poly::one(), den: vec![(monic, *e)] });
            }
        }
        Ok(r)
    }

    /// Substitute `z -> zs`, `w -> ws` (polynomials); factors are re-normalized.
    pub fn compose(&self, zs: &Poly<F>, ws: &Poly<F>) -> Result<Self, RatFunError> {
        let mut r = Self::from_poly(self.num.compose(zs, ws));
        for (f, e) in &self.den {
            let g = f.compose(zs, ws);
            if g.is_zero() {
                return Err(RatFunError::DivisionByZero);
            }
            let (lc, monic) = g.monic();
            let scale = lc.pow_u(*e).inv_r();
            r = r.scale(&scale);
            if !monic.is_constant() {
                r = r.mul(&RatFun { num: Poly::one(), den: vec![(monic, *e)] });
            }
        }
        Ok(r)
    }

    /// Swap the roles of `z` and `w`.
    pub fn swap_vars(&self) -> Self {
        self.compose(&Poly::var(Var::W), &Poly::var(Var::Z))
            .expect("variable swap is invertible")
    }

    pub fn eval(&self, z: &F, w: &F) -> Result<F, RatFunError> {
        let d = self.den.iter().fold(F::one(), |acc, (f, e)| acc.mul_r(&f.eval(z, w).pow_u(*e)));
        if d.is_zero() {
            return Err(RatFunError::Pole);
        }
        Ok(self.num.eval(z, w).div_r(&d))
    }

    pub fn eval_complex<R: Real>(&self, z: Complex<R>, w: Complex<R>) -> Complex<R> {
        let mut d = Complex::new(R::one(), R::zero());
        for (f, e) in &self.den {
            d = d * f.eval_complex(z, w).powu(*e);
        }
        self.num.eval_complex(z, w) / d
    }

    /// Numerator of `self` over the denominator of `common`, which must be a multiple of ours.
    pub fn numerator_over(&self, common: &Self) -> Option<Poly<F>> {
        let (lcm, ma, _) = merge_lcm(&self.den, &common.den);
        (lcm == common.den).then(|| self.num.mul(&ma))
    }

    /// Factor out a scalar so that the numerator is monic: `self = s * normalized`.
    pub fn split_scalar(&self) -> (F, Self) {
        if self.is_zero() {
            return (F::zero(), Self::zero());
        }
        let (lc, monic) = self.num.monic();
        (lc, RatFun { num: monic, den: self.den.clone() })
    }

    /// Coefficients of the principal part in `z` at `z = 0`.
    ///
    /// Returns `c_m` for `m = 1..=order` such that
    /// `self = sum_m c_m(w) z^{-m} + (regular at z = 0)`.
    pub fn principal_part_at_z0(&self) -> Vec<(u32, Self)> {
        let zf = Poly::var(Var::Z);
        let order = self.den.iter().find(|(f, _)| *f == zf).map(|(_, e)| *e).unwrap_or(0);
        if order == 0 {
            return Vec::new();
        }
        let regular = RatFun {
            num: self.num.clone(),
            den: self.den.iter().filter(|(f, _)| *f != zf).cloned().collect(),
        };
        // Taylor coefficients of `regular` at z = 0, up to z^{order-1}
        let mut out = Vec::new();
        let mut deriv = regular;
        let mut fact = F::one();
        for r in 0..order {
            if r > 0 {
                deriv = deriv.derivative(Var::Z);
                fact = fact.mul_r(&F::from_i64(r as i64));
            }
            let c = deriv
                .subs(Var::Z, &F::zero())
                .expect("regular part has no pole at z = 0")
                .scale(&fact.inv_r());
            if !c.is_zero() {
                out.push((order - r, c));
            }
        }
        out
    }
}

/// Sum of many rational functions over one common factored denominator.
pub fn sum_all<F: Field>(fs: &[RatFun<F>]) -> RatFun<F> {
    match fs.len() {
        0 => return RatFun::zero(),
        1 => return fs[0].clone(),
        _ => {}
    }
    let mut den: Vec<(Poly<F>, u32)> = Vec::new();
    for f in fs {
        if !f.is_zero() {
            den = merge_lcm(&den, &f.den).0;
        }
    }
    let mut num = Poly::zero();
    for f in fs {
        if f.is_zero() {
            continue;
        }
        // den is a multiple of f.den, so `ma = den / f.den`
        let (_, ma, _) = merge_lcm(&f.den, &den);
        num = num.add(&f.num.mul(&ma));
    }
    RatFun { num, den }.cancelled()
}

/// `1 / lcm` of the denominators of `fs`, keeping the factored form.
pub fn common_denominator_inverse<'a, F: Field + 'a>(fs: impl IntoIterator<Item = &'a RatFun<F>>) -> RatFun<F> {
    let mut den: Vec<(Poly<F>, u32)> = Vec::new();
    for f in fs {
        den = merge_lcm(&den, &f.den).0;
    }
    RatFun { num: Poly::one(), den }
}

/// Least common multiple of the denominators of `fs`, as a monic-factored polynomial.
pub fn common_denominator<'a, F: Field + 'a>(fs: impl IntoIterator<Item = &'a RatFun<F>>) -> Poly<F> {
    let mut den: Vec<(Poly<F>, u32)> = Vec::new();
    for f in fs {
        den = merge_lcm(&den, &f.den).0;
    }
    den.iter().fold(Poly::one(), |acc, (f, e)| acc.mul(&f.pow(*e)))
}

/// Principal part at `z = w`: pairs `(m, c_m(z))` with
/// `f(z, w) = sum_m c_m(z) (z - w)^{-m} + (regular at w = z)`.
pub fn diagonal_principal_part<F: Field>(f: &RatFun<F>) -> Result<Vec<(u32, RatFun<F>)>, RatFunError> {
    // w = z - u, then read off the poles in u at u = 0
    let z = Poly::var(Var::Z);
    let shifted = f.compose(&z, &z.sub(&Poly::var(Var::W)))?;
    let swapped = shifted.swap_vars();
    Ok(swapped
        .principal_part_at_z0()
        .into_iter()
        .map(|(m, c)| (m, c.swap_vars()))
        .collect())
}

impl<F: Field> PartialEq for RatFun<F> {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        self.sub(other).is_zero()
    }
}

impl<F: Field> fmt::Debug for RatFun<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<F: Field> fmt::Display for RatFun<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_empty() {
            return write!(f, "{}", self.num);
        }
        write!(f, "({})/(", self.num)?;
        for (i, (p, e)) in self.den.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "({p})")?;
            } else {
                write!(f, "({p})^{e}")?;
            }
        }
        write!(f, ")")
    }
}

/// Levels `k_i` at marked points `z_i` for the `sl_M` Gaudin model.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistData<F: Field> {
    pub m: usize,
    pub levels: Vec<F>,
    pub points: Vec<F>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TwistDataError {
    #[error("levels and points have different lengths")]
    LengthMismatch,
    #[error("need at least one marked point")]
    Empty,
    #[error("level at site {0} is critical (k = -M)")]
    Critical(usize),
    #[error("marked points {0} and {1} coincide")]
    Coincident(usize, usize),
}

impl<F: Field> TwistData<F> {
    pub fn new(m: usize, levels: Vec<F>, points: Vec<F>) -> Result<Self, TwistDataError> {
        if levels.len() != points.len() {
            return Err(TwistDataError::LengthMismatch);
        }
        if levels.is_empty() {
            return Err(TwistDataError::Empty);
        }
        let crit = F::from_i64(-(m as i64));
        if let Some(i) = levels.iter().position(|k| *k == crit) {
            return Err(TwistDataError::Critical(i));
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if points[i] == points[j] {
                    return Err(TwistDataError::Coincident(i, j));
                }
            }
        }
        Ok(TwistData { m, levels, points })
    }

    pub fn sites(&self) -> usize {
        self.points.len()
    }

    /// `1 / (v - z_site)`.
    pub fn site_pole(&self, v: Var, site: usize, order: u32) -> RatFun<F> {
        RatFun::pole(v, &self.points[site], order)
    }

    /// The twist function `sum_i k_i / (v - z_i)`.
    pub fn phi(&self, v: Var) -> RatFun<F> {
        self.levels
            .iter()
            .enumerate()
            .fold(RatFun::zero(), |acc, (i, k)| acc.add(&self.site_pole(v, i, 1).scale(k)))
    }

    /// `d/dv f - (j/M) phi(v) f`.
    pub fn twisted_derivative(&self, f: &RatFun<F>, j: i64, v: Var) -> RatFun<F> {
        let d = f.derivative(v);
        if j == 0 {
            return d;
        }
        let c = F::from_frac(j, self.m as i64);
        d.sub(&self.phi(v).mul(f).scale(&c))
    }

    /// Nonzero non-critical levels `p/q` and distinct points, small numerators and denominators.
    pub fn random(rng: &mut impl rand::Rng, m: usize, sites: usize) -> Self {
        let crit = F::from_i64(-(m as i64));
        let mut levels = Vec::new();
        while levels.len() < sites {
            let k = F::from_frac(rng.gen_range(-9..=9), rng.gen_range(1..=7));
            if !k.is_zero() && k != crit {
                levels.push(k);
            }
        }
        let mut points: Vec<F> = Vec::new();
        while points.len() < sites {
            let z = F::from_frac(rng.gen_range(-9..=9), rng.gen_range(1..=5));
            if !points.contains(&z) {
                points.push(z);
            }
        }
        Self::new(m, levels, points).expect("valid random twist")
    }

    pub fn level_sum(&self) -> F {
        self.levels.iter().fold(F::zero(), |a, k| a.add_r(k))
    }
}

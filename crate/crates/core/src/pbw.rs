//! PBW-ordered states and the action of loop-algebra modes on them.
//!
//! A state is a finite sum of ordered monomials in creation modes applied to a
//! cyclic vector: the `N`-site vacuum `|0>` or a tensor product of highest-weight
//! vectors `|lambda>`. Modes act by straightening against the monomial, with
//! results memoized per `(mode, monomial)`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::ratfun::RatFun;
use crate::scalar::Field;
use crate::tensor::TensorTable;

/// A single mode `I_idx ⊗ t^mode` acting at one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub site: u8,
    pub mode: i16,
    pub idx: u16,
}

impl Letter {
    pub fn new(site: usize, mode: i64, idx: usize) -> Self {
        Letter { site: site as u8, mode: mode as i16, idx: idx as u16 }
    }

    pub fn with_mode(self, mode: i64) -> Self {
        Letter { mode: mode as i16, ..self }
    }
}

pub type Monomial = SmallVec<[Letter; 6]>;

/// Conformal weight `-sum(mode)` of a monomial of creation modes.
pub fn weight(m: &[Letter]) -> i64 {
    m.iter().map(|l| -(l.mode as i64)).sum()
}

/// Coefficients a state may carry: exact scalars or rational functions of them.
pub trait Coeff: Clone + fmt::Debug + fmt::Display + PartialEq {
    type Scalar: Field;
    fn c_zero() -> Self;
    fn c_is_zero(&self) -> bool;
    fn c_add(&self, o: &Self) -> Self;
    fn c_neg(&self) -> Self;
    fn c_mul(&self, o: &Self) -> Self;
    fn c_scale(&self, s: &Self::Scalar) -> Self;
    fn from_scalar(s: Self::Scalar) -> Self;
}

impl<F: Field> Coeff for F {
    type Scalar = F;
    fn c_zero() -> Self {
        F::zero()
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Self {
        self.add_r(o)
    }
    fn c_neg(&self) -> Self {
        self.neg_r()
    }
    fn c_mul(&self, o: &Self) -> Self {
        self.mul_r(o)
    }
    fn c_scale(&self, s: &F) -> Self {
        self.mul_r(s)
    }
    fn from_scalar(s: F) -> Self {
        s
    }
}

impl<F: Field> Coeff for RatFun<F> {
    type Scalar = F;
    fn c_zero() -> Self {
        RatFun::zero()
    }
    fn c_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn c_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn c_neg(&self) -> Self {
        self.neg()
    }
    fn c_mul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn c_scale(&self, s: &F) -> Self {
        self.scale(s)
    }
    fn from_scalar(s: F) -> Self {
        RatFun::constant(s)
    }
}

/// Finite linear combination of PBW monomials applied to the cyclic vector.
#[derive(Clone, PartialEq)]
pub struct PBWState<C: Coeff> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Default for PBWState<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> PBWState<C> {
    pub fn zero() -> Self {
        PBWState { terms: BTreeMap::new() }
    }

    /// `c` times the cyclic vector.
    pub fn vacuum(c: C) -> Self {
        Self::monomial(Monomial::new(), c)
    }

    pub fn monomial(m: Monomial, c: C) -> Self {
        let mut s = Self::zero();
        s.add_term(m, c);
        s
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &[Letter]) -> Option<&C> {
        self.terms.get(m)
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.c_is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(x) => {
                *x = x.c_add(&c);
                if x.c_is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    /// `self += s * o` for a scalar `s`.
    pub fn add_scaled(&mut self, o: &Self, s: &C::Scalar) {
        if num_traits::Zero::is_zero(s) {
            return;
        }
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.c_scale(s));
        }
    }

    /// `self += c * o` for a coefficient `c`.
    pub fn add_mul(&mut self, o: &Self, c: &C) {
        if c.c_is_zero() {
            return;
        }
        for (m, x) in &o.terms {
            self.add_term(m.clone(), x.c_mul(c));
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        r.add_assign(o);
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (m, c) in &o.terms {
            r.add_term(m.clone(), c.c_neg());
        }
        r
    }

    pub fn neg(&self) -> Self {
        PBWState { terms: self.terms.iter().map(|(m, c)| (m.clone(), c.c_neg())).collect() }
    }

    pub fn scale(&self, s: &C::Scalar) -> Self {
        let mut r = Self::zero();
        r.add_scaled(self, s);
        r
    }

    pub fn mul_coeff(&self, c: &C) -> Self {
        let mut r = Self::zero();
        r.add_mul(self, c);
        r
    }

    pub fn map_coeffs<D: Coeff>(&self, mut f: impl FnMut(&C) -> D) -> PBWState<D> {
        let mut r = PBWState::zero();
        for (m, c) in &self.terms {
            r.add_term(m.clone(), f(c));
        }
        r
    }

    /// Lift a scalar state to coefficient type `D`.
    pub fn lift<D: Coeff<Scalar = C::Scalar>>(&self) -> PBWState<D>
    where
        C: Coeff<Scalar = C>,
    {
        self.map_coeffs(|c| D::from_scalar(c.clone()))
    }

    pub fn max_weight(&self) -> i64 {
        self.terms.keys().map(|m| weight(m)).max().unwrap_or(0)
    }

    /// Split into homogeneous components by weight.
    pub fn by_weight(&self) -> BTreeMap<i64, PBWState<C>> {
        let mut out: BTreeMap<i64, PBWState<C>> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(weight(m)).or_default().add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<C: Coeff> fmt::Display for PBWState<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})")?;
            for l in m {
                write!(f, " I[{}]^({})_{}", l.idx, l.site + 1, l.mode)?;
            }
            write!(f, "|0>")?;
        }
        Ok(())
    }
}

impl<C: Coeff> fmt::Debug for PBWState<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// How modes act on the empty monomial.
#[derive(Clone, Debug)]
pub enum CyclicRule<F: Field> {
    /// Vacuum module: negative modes create, all others annihilate.
    Vacuum,
    /// Highest-weight module: principal grade `M*mode + height` below zero creates,
    /// above zero annihilates, and grade-zero (Cartan, mode 0) elements act by
    /// `eigen[site][idx]`.
    Verma { eigen: Vec<Vec<F>> },
}

type NprodKey = (Monomial, Monomial, i64);

/// Mode algebra of `N` copies of `sl_M`-hat at levels `k_i`, acting on a cyclic module.
pub struct ModeAlgebra<F: Field> {
    pub table: Arc<TensorTable<F>>,
    pub levels: Vec<F>,
    pub rule: CyclicRule<F>,
    heights: Vec<i64>,
    act_cache: RefCell<HashMap<(Letter, Monomial), Rc<PBWState<F>>>>,
    pub(crate) nprod_cache: RefCell<HashMap<NprodKey, Rc<PBWState<F>>>>,
    pub(crate) translate_cache: RefCell<HashMap<Monomial, Rc<PBWState<F>>>>,
}

impl<F: Field> ModeAlgebra<F> {
    pub fn vacuum(table: Arc<TensorTable<F>>, levels: Vec<F>) -> Self {
        Self::with_rule(table, levels, CyclicRule::Vacuum)
    }

    pub fn verma(table: Arc<TensorTable<F>>, levels: Vec<F>, eigen: Vec<Vec<F>>) -> Self {
        Self::with_rule(table, levels, CyclicRule::Verma { eigen })
    }

    fn with_rule(table: Arc<TensorTable<F>>, levels: Vec<F>, rule: CyclicRule<F>) -> Self {
        let heights = table.basis.labels.iter().map(|l| l.height()).collect();
        ModeAlgebra {
            table,
            levels,
            rule,
            heights,
            act_cache: RefCell::new(HashMap::new()),
            nprod_cache: RefCell::new(HashMap::new()),
            translate_cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn sites(&self) -> usize {
        self.levels.len()
    }

    pub fn m(&self) -> usize {
        self.table.m()
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    /// Principal grade `M * mode + height(idx)`.
    pub fn grade(&self, l: Letter) -> i64 {
        self.m() as i64 * l.mode as i64 + self.heights[l.idx as usize]
    }

    pub fn is_creation(&self, l: Letter) -> bool {
        match self.rule {
            CyclicRule::Vacuum => l.mode < 0,
            CyclicRule::Verma { .. } => self.grade(l) < 0,
        }
    }

    /// Number of cached mode actions (for diagnostics).
    pub fn cache_size(&self) -> usize {
        self.act_cache.borrow().len()
    }

    pub fn clear_caches(&self) {
        self.act_cache.borrow_mut().clear();
        self.nprod_cache.borrow_mut().clear();
        self.translate_cache.borrow_mut().clear();
    }

    /// `[x, y]` as a combination of letters plus a scalar (central) part.
    pub fn commutator(&self, x: Letter, y: Letter) -> (Vec<(Letter, F)>, F) {
        if x.site != y.site {
            return (Vec::new(), F::zero());
        }
        let mode = x.mode as i64 + y.mode as i64;
        let letters = self
            .table
            .bracket(x.idx as usize, y.idx as usize)
            .iter()
            .map(|(w, c)| (Letter::new(x.site as usize, mode, *w), c.clone()))
            .collect();
        let central = if mode == 0 {
            // [a_m, b_n] = [a,b]_{m+n} - n delta_{m+n,0} (a|b) k
            let g = self.table.basis.gram.get(x.idx as usize, y.idx as usize);
            g.mul_r(&self.levels[x.site as usize]).mul_r(&F::from_i64(-(y.mode as i64)))
        } else {
            F::zero()
        };
        (letters, central)
    }

    /// Action of one mode on the state `mono |cyclic>`.
    pub fn act(&self, l: Letter, mono: &[Letter]) -> Rc<PBWState<F>> {
        if self.is_creation(l) && mono.first().is_none_or(|x| l <= *x) {
            let mut m = Monomial::with_capacity(mono.len() + 1);
            m.push(l);
            m.extend_from_slice(mono);
            return Rc::new(PBWState::monomial(m, F::one()));
        }
        let key = (l, Monomial::from_slice(mono));
        if let Some(r) = self.act_cache.borrow().get(&key) {
            return r.clone();
        }
        let result = match mono.split_first() {
            None => match &self.rule {
                CyclicRule::Vacuum => PBWState::zero(),
                CyclicRule::Verma { eigen } => {
                    if self.grade(l) == 0 {
                        PBWState::vacuum(eigen[l.site as usize][l.idx as usize].clone())
                    } else {
                        PBWState::zero()
                    }
                }
            },
            Some((&x, rest)) => {
                // l x rest = x (l rest) + [l, x] rest
                let inner = self.act(l, rest);
                let mut r = self.apply(x, &inner);
                let (letters, central) = self.commutator(l, x);
                for (y, c) in letters {
                    r.add_scaled(&self.act(y, rest), &c);
                }
                if !central.is_zero() {
                    r.add_term(Monomial::from_slice(rest), central);
                }
                r
            }
        };
        let rc = Rc::new(result);
        self.act_cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    /// Action of one mode on a scalar state.
    pub fn apply(&self, l: Letter, s: &PBWState<F>) -> PBWState<F> {
        let mut r = PBWState::zero();
        for (m, c) in s.terms() {
            r.add_scaled(&self.act(l, m), c);
        }
        r
    }

    /// Action of one mode on a state with arbitrary coefficients.
    pub fn apply_coeff<C: Coeff<Scalar = F>>(&self, l: Letter, s: &PBWState<C>) -> PBWState<C> {
        let mut r = PBWState::zero();
        for (m, c) in s.terms() {
            for (m2, x) in self.act(l, m).terms() {
                r.add_term(m2.clone(), c.c_scale(x));
            }
        }
        r
    }

    /// `l_1 l_2 ... l_r |cyclic>`, applying the rightmost letter first.
    pub fn word(&self, letters: &[Letter]) -> PBWState<F> {
        let mut s = PBWState::vacuum(F::one());
        for l in letters.iter().rev() {
            s = self.apply(*l, &s);
        }
        s
    }
}

/// Generalized binomial coefficient `n (n-1) ... (n-k+1) / k!`.
pub fn binomial<F: Field>(n: i64, k: u32) -> F {
    let mut num = F::one();
    let mut den = F::one();
    for i in 0..k as i64 {
        num = num.mul_r(&F::from_i64(n - i));
        den = den.mul_r(&F::from_i64(i + 1));
    }
    num.div_r(&den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::BasisLabel;
    use num_rational::BigRational;

    type Q = BigRational;

    fn q(n: i64) -> Q {
        Q::from_integer(n.into())
    }

    fn algebra(levels: Vec<Q>) -> ModeAlgebra<Q> {
        ModeAlgebra::vacuum(Arc::new(TensorTable::for_rank(3).unwrap()), levels)
    }

    #[test]
    fn annihilators_kill_vacuum() {
        let alg = algebra(vec![q(2)]);
        assert!(alg.word(&[Letter::new(0, 0, 3)]).is_zero());
        assert!(alg.word(&[Letter::new(0, 2, 3)]).is_zero());
        assert_eq!(alg.word(&[Letter::new(0, -1, 3)]).len(), 1);
    }

    #[test]
    fn central_term_from_pairing() {
        // e_1 f_{-1} |0> = [e, f]_0 |0> + k (e|f) |0> = k |0>
        let alg = algebra(vec![q(5)]);
        let b = &alg.table.basis;
        let e = b.index_of(BasisLabel::E(0, 1)).unwrap();
        let f = b.index_of(BasisLabel::E(1, 0)).unwrap();
        let s = alg.word(&[Letter::new(0, 1, e), Letter::new(0, -1, f)]);
        assert_eq!(s, PBWState::vacuum(q(5)));
    }

    #[test]
    fn commutator_of_creation_modes_is_respected() {
        // a_{-1} b_{-2} - b_{-2} a_{-1} = [a, b]_{-3}
        let alg = algebra(vec![q(1), q(3)]);
        let b = &alg.table.basis;
        let e12 = b.index_of(BasisLabel::E(0, 1)).unwrap();
        let e23 = b.index_of(BasisLabel::E(1, 2)).unwrap();
        let e13 = b.index_of(BasisLabel::E(0, 2)).unwrap();
        let x = Letter::new(1, -1, e12);
        let y = Letter::new(1, -2, e23);
        let lhs = alg.word(&[x, y]).sub(&alg.word(&[y, x]));
        assert_eq!(lhs, alg.word(&[Letter::new(1, -3, e13)]));
        // different sites commute
        let z = Letter::new(0, -1, e23);
        assert_eq!(alg.word(&[x, z]), alg.word(&[z, x]));
    }

    #[test]
    fn generalized_binomials() {
        assert_eq!(binomial::<Q>(5, 2), q(10));
        assert_eq!(binomial::<Q>(-1, 3), q(-1));
        assert_eq!(binomial::<Q>(1, 3), q(0));
    }
}

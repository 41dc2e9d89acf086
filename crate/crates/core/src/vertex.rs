//! Vertex-algebra operations on the `N`-site vacuum module: translation `T`,
//! `n`-th products and membership in the image of `T`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::pbw::{binomial, weight, CyclicRule, Letter, ModeAlgebra, Monomial, PBWState};
use crate::poly::{Exp, Poly};
use crate::ratfun::{common_denominator_inverse, sum_all, RatFun, RatFunKey};
use crate::scalar::Field;

/// State with rational-function coefficients.
pub type FunState<F> = PBWState<RatFun<F>>;

impl<F: Field> ModeAlgebra<F> {
    fn assert_vacuum(&self) {
        assert!(matches!(self.rule, CyclicRule::Vacuum), "vertex operations need the vacuum module");
    }

    /// `T` on a single monomial; `[T, a_n] = -n a_{n-1}`.
    pub fn translate_monomial(&self, mono: &[Letter]) -> Rc<PBWState<F>> {
        let Some((&x, rest)) = mono.split_first() else {
            return Rc::new(PBWState::zero());
        };
        if let Some(r) = self.translate_cache.borrow().get(mono) {
            return r.clone();
        }
        let mut r = PBWState::zero();
        let k = -(x.mode as i64);
        r.add_scaled(&self.act(x.with_mode(x.mode as i64 - 1), rest), &F::from_i64(k));
        let tr = self.translate_monomial(rest);
        r.add_assign(&self.apply(x, &tr));
        let rc = Rc::new(r);
        self.translate_cache.borrow_mut().insert(Monomial::from_slice(mono), rc.clone());
        rc
    }

    pub fn translate(&self, s: &PBWState<F>) -> PBWState<F> {
        self.assert_vacuum();
        let mut r = PBWState::zero();
        for (m, c) in s.terms() {
            r.add_scaled(&self.translate_monomial(m), c);
        }
        r
    }

    pub fn translate_fun(&self, s: &FunState<F>) -> FunState<F> {
        self.assert_vacuum();
        let mut r = FunState::zero();
        for (m, c) in s.terms() {
            for (m2, x) in self.translate_monomial(m).terms() {
                r.add_term(m2.clone(), c.scale(x));
            }
        }
        r
    }

    /// `(a|0>)_(n) (b|0>)` for monomials `a`, `b`.
    pub fn nth_product_monomials(&self, a: &[Letter], b: &[Letter], n: i64) -> Rc<PBWState<F>> {
        let Some((&x, c)) = a.split_first() else {
            return Rc::new(if n == -1 {
                PBWState::monomial(Monomial::from_slice(b), F::one())
            } else {
                PBWState::zero()
            });
        };
        let wc = weight(c);
        let wv = weight(b);
        let wa = wc - x.mode as i64;
        if wa + wv - n - 1 < 0 {
            return Rc::new(PBWState::zero());
        }
        let key = (Monomial::from_slice(a), Monomial::from_slice(b), n);
        if let Some(r) = self.nprod_cache.borrow().get(&key) {
            return r.clone();
        }
        let k = -(x.mode as i64);
        let mut r = PBWState::zero();
        // creation part: sum_{m<0} X_(m) C_(n-m-1) V
        for m in (n - wc - wv)..0 {
            let coef: F = binomial(k - m - 2, (k - 1) as u32);
            if coef.is_zero() {
                continue;
            }
            let inner = self.nth_product_monomials(c, b, n - m - 1);
            if inner.is_zero() {
                continue;
            }
            r.add_scaled(&self.apply(x.with_mode(m - k + 1), &inner), &coef);
        }
        // annihilation part: sum_{m>=0} C_(n-m-1) X_(m) V
        for m in (k - 1).max(0)..=(wv + k - 1) {
            let coef: F = binomial(k - m - 2, (k - 1) as u32);
            if coef.is_zero() {
                continue;
            }
            let av = self.act(x.with_mode(m - k + 1), b);
            for (mono, cc) in av.terms() {
                let p = self.nth_product_monomials(c, mono, n - m - 1);
                r.add_scaled(&p, &coef.mul_r(cc));
            }
        }
        let rc = Rc::new(r);
        self.nprod_cache.borrow_mut().insert(key, rc.clone());
        rc
    }

    pub fn nth_product(&self, a: &PBWState<F>, b: &PBWState<F>, n: i64) -> PBWState<F> {
        self.assert_vacuum();
        let mut r = PBWState::zero();
        for (ma, ca) in a.terms() {
            for (mb, cb) in b.terms() {
                r.add_scaled(&self.nth_product_monomials(ma, mb, n), &ca.mul_r(cb));
            }
        }
        r
    }

    /// `n`-th product of states with rational-function coefficients.
    ///
    /// Both sides are grouped by coefficient (up to a scalar) so that the
    /// products themselves run over exact scalars.
    pub fn nth_product_fun(&self, a: &FunState<F>, b: &FunState<F>, n: i64) -> FunState<F> {
        self.nth_product_grouped(&group_by_coeff(a), &group_by_coeff(b), n)
    }

    pub fn nth_product_grouped(
        &self,
        a: &[(RatFun<F>, PBWState<F>)],
        b: &[(RatFun<F>, PBWState<F>)],
        n: i64,
    ) -> FunState<F> {
        self.assert_vacuum();
        let mut acc: Vec<(RatFun<F>, PBWState<F>)> = Vec::new();
        for (fa, sa) in a {
            for (fb, sb) in b {
                let p = self.nth_product(sa, sb, n);
                if !p.is_zero() {
                    acc.push((fa.mul(fb), p));
                }
            }
        }
        combine_groups(&acc)
    }
}

/// Split a state into `sum_g f_g * X_g` with scalar states `X_g` and
/// pairwise non-proportional coefficient functions `f_g`.
pub fn group_by_coeff<F: Field>(s: &FunState<F>) -> Vec<(RatFun<F>, PBWState<F>)> {
    let mut groups: HashMap<RatFunKey<F>, (RatFun<F>, PBWState<F>)> = HashMap::new();
    let mut order: Vec<RatFunKey<F>> = Vec::new();
    for (m, c) in s.terms() {
        let (scalar, normalized) = c.split_scalar();
        let key = normalized.key();
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (normalized, PBWState::zero())
        });
        entry.1.add_term(m.clone(), scalar);
    }
    order.into_iter().map(|k| groups.remove(&k).unwrap()).collect()
}

/// Inverse of [`group_by_coeff`]: `sum_g f_g * X_g`.
pub fn combine_groups<F: Field>(groups: &[(RatFun<F>, PBWState<F>)]) -> FunState<F> {
    // accumulate per monomial as a list first, then sum once
    let mut per_mono: BTreeMap<Monomial, Vec<RatFun<F>>> = BTreeMap::new();
    for (f, s) in groups {
        for (m, c) in s.terms() {
            per_mono.entry(m.clone()).or_default().push(f.scale(c));
        }
    }
    let mut r = FunState::zero();
    for (m, fs) in per_mono {
        r.add_term(m, sum_all(&fs));
    }
    r
}

/// Result of trying to write a state as `T Z`.
#[derive(Clone, Debug)]
pub struct TranslateResult<C: crate::pbw::Coeff> {
    /// `Some(Z)` with `T Z` equal to the input, verified exactly.
    pub preimage: Option<PBWState<C>>,
    /// Size of the linear systems that were solved.
    pub unknowns: usize,
}

/// Sparse row reduction for `sum_j c_j v_j = target`.
struct SparseSolver<F: Field> {
    // pivot monomial -> (reduced vector, combination of original columns)
    pivots: BTreeMap<Monomial, (BTreeMap<Monomial, F>, BTreeMap<usize, F>)>,
}

impl<F: Field> SparseSolver<F> {
    fn new() -> Self {
        SparseSolver { pivots: BTreeMap::new() }
    }

    /// Reduce `v` (with combination `combo`) against the pivots.
    fn reduce(&self, v: &mut BTreeMap<Monomial, F>, combo: &mut BTreeMap<usize, F>) {
        let mut cursor: Option<Monomial> = None;
        loop {
            let next = match &cursor {
                None => v.keys().next_back().cloned(),
                Some(c) => v.range(..c.clone()).next_back().map(|(k, _)| k.clone()),
            };
            let Some(k) = next else { break };
            if let Some((pv, pc)) = self.pivots.get(&k) {
                let f = v[&k].clone();
                for (m, x) in pv {
                    let e = v.entry(m.clone()).or_insert_with(F::zero);
                    *e = e.sub_r(&f.mul_r(x));
                    if e.is_zero() {
                        v.remove(m);
                    }
                }
                for (j, x) in pc {
                    let e = combo.entry(*j).or_insert_with(F::zero);
                    *e = e.sub_r(&f.mul_r(x));
                    if e.is_zero() {
                        combo.remove(j);
                    }
                }
            }
            cursor = Some(k);
        }
    }

    fn insert(&mut self, j: usize, mut v: BTreeMap<Monomial, F>) {
        let mut combo = BTreeMap::from([(j, F::one())]);
        self.reduce(&mut v, &mut combo);
        let Some((k, lead)) = v.iter().next_back().map(|(k, x)| (k.clone(), x.clone())) else {
            return;
        };
        let inv = lead.inv_r();
        for x in v.values_mut() {
            *x = x.mul_r(&inv);
        }
        for x in combo.values_mut() {
            *x = x.mul_r(&inv);
        }
        self.pivots.insert(k, (v, combo));
    }

    /// Coefficients `c_j` with `sum c_j v_j = target`, if any.
    fn solve(&self, target: &BTreeMap<Monomial, F>) -> Option<BTreeMap<usize, F>> {
        let mut v = target.clone();
        let mut combo = BTreeMap::new();
        self.reduce(&mut v, &mut combo);
        if v.is_empty() {
            Some(combo.into_iter().map(|(j, x)| (j, x.neg_r())).collect())
        } else {
            None
        }
    }
}

fn raise_one(mono: &Monomial) -> Vec<Monomial> {
    let mut out = Vec::new();
    for i in 0..mono.len() {
        if mono[i].mode <= -2 {
            let mut m = mono.clone();
            m[i].mode += 1;
            m.sort();
            out.push(m);
        }
    }
    out
}

const TRANSLATE_ROUNDS: usize = 4;

impl<F: Field> ModeAlgebra<F> {
    /// Find `Z` with `T Z = s` for a scalar state, searching preimages among
    /// monomials obtained by raising a single mode.
    pub fn translate_preimage(&self, s: &PBWState<F>) -> TranslateResult<F> {
        let (mut pre, unknowns) = self.translate_preimages(std::slice::from_ref(s));
        TranslateResult { preimage: pre.pop().flatten(), unknowns }
    }

    /// [`translate_preimage`](Self::translate_preimage) for several states,
    /// sharing one elimination per weight.
    pub fn translate_preimages(&self, states: &[PBWState<F>]) -> (Vec<Option<PBWState<F>>>, usize) {
        self.assert_vacuum();
        let mut totals: Vec<Option<PBWState<F>>> = vec![Some(PBWState::zero()); states.len()];
        let mut by_weight: BTreeMap<i64, Vec<(usize, BTreeMap<Monomial, F>)>> = BTreeMap::new();
        for (k, s) in states.iter().enumerate() {
            for (w, comp) in s.by_weight() {
                if w == 0 {
                    totals[k] = None;
                }
                by_weight.entry(w).or_default().push((k, comp.terms().map(|(m, c)| (m.clone(), c.clone())).collect()));
            }
        }
        let mut unknowns = 0;
        for (w, targets) in by_weight {
            if w == 0 {
                continue;
            }
            let mut pending: Vec<&(usize, BTreeMap<Monomial, F>)> =
                targets.iter().filter(|(k, _)| totals[*k].is_some()).collect();
            if pending.is_empty() {
                continue;
            }
            let all_keys: BTreeSet<Monomial> = pending.iter().flat_map(|(_, t)| t.keys().cloned()).collect();
            let mut solver = SparseSolver::new();
            let mut cands: Vec<Monomial> = Vec::new();
            let mut seen: BTreeSet<Monomial> = BTreeSet::new();
            let mut frontier = all_keys.clone();
            for _ in 0..TRANSLATE_ROUNDS {
                let mut next = BTreeSet::new();
                for t in &frontier {
                    for y in raise_one(t) {
                        if seen.insert(y.clone()) {
                            let image = self.translate_monomial(&y);
                            for (m, _) in image.terms() {
                                if !all_keys.contains(m) {
                                    next.insert(m.clone());
                                }
                            }
                            let v = image.terms().map(|(m, c)| (m.clone(), c.clone())).collect();
                            solver.insert(cands.len(), v);
                            cands.push(y);
                        }
                    }
                }
                pending.retain(|(k, target)| match solver.solve(target) {
                    Some(sol) => {
                        let total = totals[*k].as_mut().expect("pending target");
                        for (j, c) in sol {
                            total.add_term(cands[j].clone(), c);
                        }
                        false
                    }
                    None => true,
                });
                if pending.is_empty() || next.is_empty() {
                    break;
                }
                frontier = next;
            }
            unknowns += cands.len();
            for (k, _) in pending {
                totals[*k] = None;
            }
        }
        let verified = totals
            .into_iter()
            .zip(states)
            .map(|(t, s)| t.filter(|z| self.translate(z) == *s))
            .collect();
        (verified, unknowns)
    }

    /// `T`-preimage of a state with rational coefficients: denominators are
    /// cleared and each polynomial coefficient of `z^p w^q` is solved separately.
    pub fn translate_preimage_fun(&self, s: &FunState<F>) -> TranslateResult<RatFun<F>> {
        let coeffs: Vec<&RatFun<F>> = s.terms().map(|(_, c)| c).collect();
        let dinv = common_denominator_inverse(coeffs.iter().copied());
        let mut parts: BTreeMap<Exp, PBWState<F>> = BTreeMap::new();
        for (m, c) in s.terms() {
            let p = c.numerator_over(&dinv).expect("common denominator");
            for (e, x) in p.terms() {
                parts.entry(*e).or_default().add_term(m.clone(), x.clone());
            }
        }
        let (exps, states): (Vec<Exp>, Vec<PBWState<F>>) = parts.into_iter().unzip();
        let (pres, unknowns) = self.translate_preimages(&states);
        let mut nums: BTreeMap<Monomial, Poly<F>> = BTreeMap::new();
        for (e, pre) in exps.into_iter().zip(pres) {
            let Some(pre) = pre else {
                return TranslateResult { preimage: None, unknowns };
            };
            for (m, c) in pre.terms() {
                nums.entry(m.clone()).or_insert_with(Poly::zero).add_term(e, c.clone());
            }
        }
        let mut z = FunState::zero();
        for (m, p) in nums {
            z.add_term(m, dinv.mul(&RatFun::from_poly(p)));
        }
        let ok = self.translate_fun(&z) == *s;
        TranslateResult { preimage: ok.then_some(z), unknowns }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{BasisLabel, TensorTable};
    use num_rational::BigRational;
    use proptest::prelude::*;
    use std::sync::Arc;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    fn algebra() -> ModeAlgebra<Q> {
        ModeAlgebra::vacuum(Arc::new(TensorTable::for_rank(3).unwrap()), vec![q(3, 2), q(-1, 3)])
    }

    fn letter_strategy() -> impl Strategy<Value = Letter> {
        (0usize..2, 1i64..3, 0usize..8).prop_map(|(s, m, i)| Letter::new(s, -m, i))
    }

    fn state_strategy() -> impl Strategy<Value = Vec<Letter>> {
        proptest::collection::vec(letter_strategy(), 1..3)
    }

    #[test]
    fn first_order_products() {
        // a_(0) b = [a,b]_{-1}|0>, a_(1) b = k (a|b) |0>
        let alg = algebra();
        let b = &alg.table.basis;
        let e = b.index_of(BasisLabel::E(0, 1)).unwrap();
        let f = b.index_of(BasisLabel::E(1, 0)).unwrap();
        let a = alg.word(&[Letter::new(0, -1, e)]);
        let bb = alg.word(&[Letter::new(0, -1, f)]);
        let p0 = alg.nth_product(&a, &bb, 0);
        let mut expected = PBWState::zero();
        for (w, c) in alg.table.bracket(e, f) {
            expected.add_term(Monomial::from_slice(&[Letter::new(0, -1, *w)]), c.clone());
        }
        assert_eq!(p0, expected);
        assert_eq!(alg.nth_product(&a, &bb, 1), PBWState::vacuum(q(3, 2)));
        assert!(alg.nth_product(&a, &bb, 2).is_zero());
        assert_eq!(alg.nth_product(&a, &bb, -1), alg.word(&[Letter::new(0, -1, e), Letter::new(0, -1, f)]));
    }

    #[test]
    fn translate_preimage_recovers_state() {
        let alg = algebra();
        let z = alg.word(&[Letter::new(0, -1, 2), Letter::new(0, -2, 5), Letter::new(1, -1, 1)]);
        let tz = alg.translate(&z);
        assert_eq!(alg.translate_preimage(&tz).preimage.unwrap(), z);
        // a single a_{-1}|0> is not a translate
        assert!(alg.translate_preimage(&alg.word(&[Letter::new(0, -1, 2)])).preimage.is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn modes_represent_the_bracket(x in letter_strategy(), y in letter_strategy(), v in state_strategy(), shift in 0i64..3) {
            // x y v - y x v = [x, y] v, with one of them an annihilator
            let alg = algebra();
            let x = x.with_mode(x.mode as i64 + shift);
            let vs = alg.word(&v);
            let lhs = alg.apply(x, &alg.apply(y, &vs)).sub(&alg.apply(y, &alg.apply(x, &vs)));
            let (letters, central) = alg.commutator(x, y);
            let mut rhs = vs.scale(&central);
            for (l, c) in letters {
                rhs.add_scaled(&alg.apply(l, &vs), &c);
            }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn skew_symmetry_mod_translation(a in state_strategy(), b in state_strategy()) {
            // a_(0) b + b_(0) a lies in the image of T
            let alg = algebra();
            let (sa, sb) = (alg.word(&a), alg.word(&b));
            let sum = alg.nth_product(&sa, &sb, 0).add(&alg.nth_product(&sb, &sa, 0));
            if !sum.is_zero() {
                prop_assert!(alg.translate_preimage(&sum).preimage.is_some());
            }
        }

        #[test]
        fn translate_has_no_zero_mode(a in state_strategy(), b in state_strategy()) {
            // (T a)_(0) b = 0
            let alg = algebra();
            let ta = alg.translate(&alg.word(&a));
            prop_assert!(alg.nth_product(&ta, &alg.word(&b), 0).is_zero());
        }

        #[test]
        fn zero_mode_is_a_derivation_of_minus_one_product(a in state_strategy(), b in state_strategy(), c in state_strategy()) {
            // a_(0) (b_(-1) c) = (a_(0) b)_(-1) c + b_(-1) (a_(0) c)
            let alg = algebra();
            let (sa, sb, sc) = (alg.word(&a), alg.word(&b), alg.word(&c));
            let lhs = alg.nth_product(&sa, &alg.nth_product(&sb, &sc, -1), 0);
            let rhs = alg.nth_product(&alg.nth_product(&sa, &sb, 0), &sc, -1)
                .add(&alg.nth_product(&sb, &alg.nth_product(&sa, &sc, 0), -1));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn commutator_formula(a in state_strategy(), b in state_strategy(), c in state_strategy(), m in 0i64..2, n in -1i64..2) {
            // [a_(m), b_(n)] c = sum_j binom(m, j) (a_(j) b)_(m+n-j) c
            let alg = algebra();
            let (sa, sb, sc) = (alg.word(&a), alg.word(&b), alg.word(&c));
            let lhs = alg.nth_product(&sa, &alg.nth_product(&sb, &sc, n), m)
                .sub(&alg.nth_product(&sb, &alg.nth_product(&sa, &sc, m), n));
            let mut rhs = PBWState::zero();
            for j in 0..=m {
                let ab = alg.nth_product(&sa, &sb, j);
                rhs.add_scaled(&alg.nth_product(&ab, &sc, m + n - j), &binomial::<Q>(m, j as u32));
            }
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn translation_commutes_with_zero_mode(a in state_strategy(), b in state_strategy()) {
            // [T, a_(0)] = (T a)_(0) = 0
            let alg = algebra();
            let (sa, sb) = (alg.word(&a), alg.word(&b));
            prop_assert_eq!(alg.translate(&alg.nth_product(&sa, &sb, 0)), alg.nth_product(&sa, &alg.translate(&sb), 0));
        }
    }
}

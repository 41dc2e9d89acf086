//! Loop realization of affine `sl_M` with derivation, the principal
//! subalgebra, Miura opers and their quasi-canonical coefficients `v_j`.
//!
//! Chevalley generators: `e_i = E_{i,i+1}` (`i >= 1`), `e_0 = E_{M,1} t`,
//! `f_i` transposed and `f_0 = E_{1,M} t^{-1}`. The principal grade of
//! `E_ab t^s` is `M s + b - a`. The form is the residue-trace form with
//! `(K|d) = 1`, `(d|d) = 0`, so `(delta|rho) = M`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::linalg::Mat;
use crate::poly::{Poly, Var};
use crate::ratfun::{common_denominator_inverse, RatFun, TwistData, TwistDataError};
use crate::scalar::Field;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperError {
    #[error("rank {0} is below 3")]
    RankTooSmall(usize),
    #[error("grade {0} is a multiple of M and carries no principal element")]
    NotAnExponent(i64),
    #[error("kernel of ad p_-1 at grade {grade} has dimension {dim}, expected 1")]
    KernelDimension { grade: i64, dim: usize },
    #[error("gauge equation at grade {0} has no solution")]
    Inconsistent(i64),
    #[error("site {site}: pairings sum to {sum}, level is {level}")]
    LevelMismatch { site: usize, sum: String, level: String },
    #[error("site {0}: expected M pairings")]
    PairingCount(usize),
    #[error("Bethe root {0} coincides with a marked point")]
    RootAtMarkedPoint(usize),
    #[error("color {0} out of range")]
    BadColor(usize),
    #[error("Bethe equation is degenerate: pairings at the color sum to zero")]
    DegenerateBethe,
    #[error("closed-form Bethe root needs exactly two marked points")]
    NeedTwoPoints,
    #[error(transparent)]
    Twist(#[from] TwistDataError),
}

/// Coordinate of a loop element: `E_ab t^s`, the central `K` or the derivation `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LoopKey {
    Mat(usize, usize, i64),
    Central,
    Deriv,
}

/// Element of `L(gl_M) + C K + C d` with rational-function coefficients.
#[derive(Clone, PartialEq)]
pub struct LoopElement<F: Field> {
    m: usize,
    terms: BTreeMap<LoopKey, RatFun<F>>,
}

impl<F: Field> LoopElement<F> {
    pub fn zero(m: usize) -> Self {
        LoopElement { m, terms: BTreeMap::new() }
    }

    pub fn from_key(m: usize, key: LoopKey, c: RatFun<F>) -> Self {
        let mut r = Self::zero(m);
        r.add_term(key, c);
        r
    }

    /// `E_ab t^s`.
    pub fn unit(m: usize, a: usize, b: usize, s: i64) -> Self {
        Self::from_key(m, LoopKey::Mat(a, b, s), RatFun::one())
    }

    pub fn central(m: usize) -> Self {
        Self::from_key(m, LoopKey::Central, RatFun::one())
    }

    pub fn derivation(m: usize) -> Self {
        Self::from_key(m, LoopKey::Deriv, RatFun::one())
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    pub fn terms(&self) -> impl Iterator<Item = (&LoopKey, &RatFun<F>)> {
        self.terms.iter()
    }

    pub fn coeff(&self, k: LoopKey) -> RatFun<F> {
        self.terms.get(&k).cloned().unwrap_or_else(RatFun::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, k: LoopKey, c: RatFun<F>) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(x) => {
                *x = x.add(&c);
                if x.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (k, c) in &o.terms {
            r.add_term(*k, c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&F::from_i64(-1)))
    }

    pub fn scale(&self, s: &F) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn mul_fun(&self, f: &RatFun<F>) -> Self {
        self.map(|c| c.mul(f))
    }

    fn map(&self, mut h: impl FnMut(&RatFun<F>) -> RatFun<F>) -> Self {
        let mut r = Self::zero(self.m);
        for (k, c) in &self.terms {
            r.add_term(*k, h(c));
        }
        r
    }

    /// `z`-derivative of every coefficient.
    pub fn derivative(&self) -> Self {
        self.map(|c| c.derivative(Var::Z))
    }

    pub fn key_grade(m: usize, k: LoopKey) -> i64 {
        match k {
            LoopKey::Mat(a, b, s) => m as i64 * s + b as i64 - a as i64,
            _ => 0,
        }
    }

    /// Component of principal grade `g`.
    pub fn grade_part(&self, g: i64) -> Self {
        let mut r = Self::zero(self.m);
        for (k, c) in &self.terms {
            if Self::key_grade(self.m, *k) == g {
                r.terms.insert(*k, c.clone());
            }
        }
        r
    }

    /// Drop components of grade above `cap`.
    pub fn truncate(&self, cap: i64) -> Self {
        let mut r = Self::zero(self.m);
        for (k, c) in &self.terms {
            if Self::key_grade(self.m, *k) <= cap {
                r.terms.insert(*k, c.clone());
            }
        }
        r
    }

    pub fn min_grade(&self) -> Option<i64> {
        self.terms.keys().map(|k| Self::key_grade(self.m, *k)).min()
    }

    /// Lie bracket, keeping only results of grade at most `cap`.
    pub fn bracket_capped(&self, o: &Self, cap: i64) -> Self {
        let m = self.m;
        let mut r = Self::zero(m);
        for (ka, ca) in &self.terms {
            let ga = Self::key_grade(m, *ka);
            for (kb, cb) in &o.terms {
                if ga + Self::key_grade(m, *kb) > cap {
                    continue;
                }
                match (*ka, *kb) {
                    (LoopKey::Mat(i, j, s), LoopKey::Mat(k, l, t)) => {
                        let c = ca.mul(cb);
                        if j == k {
                            r.add_term(LoopKey::Mat(i, l, s + t), c.clone());
                        }
                        if l == i {
                            r.add_term(LoopKey::Mat(k, j, s + t), c.neg());
                        }
                        if s + t == 0 && j == k && i == l && s != 0 {
                            r.add_term(LoopKey::Central, c.scale(&F::from_i64(s)));
                        }
                    }
                    (LoopKey::Deriv, LoopKey::Mat(_, _, t)) if t != 0 => {
                        r.add_term(*kb, ca.mul(cb).scale(&F::from_i64(t)));
                    }
                    (LoopKey::Mat(_, _, s), LoopKey::Deriv) if s != 0 => {
                        r.add_term(*ka, ca.mul(cb).scale(&F::from_i64(-s)));
                    }
                    _ => {}
                }
            }
        }
        r
    }

    pub fn bracket(&self, o: &Self) -> Self {
        self.bracket_capped(o, i64::MAX)
    }

    /// Invariant form: `(E_ab t^s | E_cd t^r) = delta_{s+r,0} delta_bc delta_ad`, `(K|d) = 1`.
    pub fn form(&self, o: &Self) -> RatFun<F> {
        let mut acc = Vec::new();
        for (ka, ca) in &self.terms {
            match *ka {
                LoopKey::Mat(a, b, s) => {
                    if let Some(cb) = o.terms.get(&LoopKey::Mat(b, a, -s)) {
                        acc.push(ca.mul(cb));
                    }
                }
                LoopKey::Central => {
                    if let Some(cb) = o.terms.get(&LoopKey::Deriv) {
                        acc.push(ca.mul(cb));
                    }
                }
                LoopKey::Deriv => {
                    if let Some(cb) = o.terms.get(&LoopKey::Central) {
                        acc.push(ca.mul(cb));
                    }
                }
            }
        }
        crate::ratfun::sum_all(&acc)
    }

    /// Constant coefficients, if every coefficient is a constant.
    pub fn constant_terms(&self) -> Option<BTreeMap<LoopKey, F>> {
        self.terms.iter().map(|(k, c)| c.as_constant().map(|x| (*k, x))).collect()
    }
}

impl<F: Field> fmt::Debug for LoopElement<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| match k {
                LoopKey::Mat(a, b, s) => format!("({c}) E{}{} t^{s}", a + 1, b + 1),
                LoopKey::Central => format!("({c}) K"),
                LoopKey::Deriv => format!("({c}) d"),
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Chevalley generators, `rho`, `delta` and the principal elements `p_j`.
#[derive(Clone, Debug)]
pub struct PrincipalData<F: Field> {
    pub m: usize,
    pub e: Vec<LoopElement<F>>,
    pub f: Vec<LoopElement<F>>,
    /// `alpha_i = [e_i, f_i]`.
    pub alpha: Vec<LoopElement<F>>,
    pub rho: LoopElement<F>,
    pub delta: LoopElement<F>,
    pub p: BTreeMap<i64, LoopElement<F>>,
}

fn chevalley<F: Field>(m: usize) -> (Vec<LoopElement<F>>, Vec<LoopElement<F>>) {
    let mut e = vec![LoopElement::unit(m, m - 1, 0, 1)];
    let mut f = vec![LoopElement::unit(m, 0, m - 1, -1)];
    for i in 1..m {
        e.push(LoopElement::unit(m, i - 1, i, 0));
        f.push(LoopElement::unit(m, i, i - 1, 0));
    }
    (e, f)
}

/// Weyl-vector derivation `rho = M d + diag((M+1-2i)/2)`.
pub fn rho_element<F: Field>(m: usize) -> LoopElement<F> {
    let mut r = LoopElement::derivation(m).scale(&F::from_i64(m as i64));
    for i in 0..m {
        let v = F::from_frac(m as i64 - 1 - 2 * i as i64, 2);
        r.add_term(LoopKey::Mat(i, i, 0), RatFun::constant(v));
    }
    r
}

/// Basis of the grade-`g` piece of the loop algebra (`g != 0`).
fn graded_basis<F: Field>(m: usize, g: i64) -> Vec<LoopElement<F>> {
    let mi = m as i64;
    if g % mi == 0 {
        let s = g / mi;
        return (0..m - 1)
            .map(|a| LoopElement::unit(m, a, a, s).sub(&LoopElement::unit(m, a + 1, a + 1, s)))
            .collect();
    }
    let mut out = Vec::new();
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let rest = g - (b as i64 - a as i64);
            if rest % mi == 0 {
                out.push(LoopElement::unit(m, a, b, rest / mi));
            }
        }
    }
    out
}

/// Matrix of `x -> [x, y]` from `source` into raw coordinates, with the coordinate keys.
fn ad_matrix<F: Field>(source: &[LoopElement<F>], y: &LoopElement<F>) -> (Mat<F>, Vec<LoopKey>) {
    let images: Vec<BTreeMap<LoopKey, F>> = source
        .iter()
        .map(|x| x.bracket(y).constant_terms().expect("constant generators"))
        .collect();
    let mut keys: Vec<LoopKey> = images.iter().flat_map(|m| m.keys().copied()).collect();
    keys.sort();
    keys.dedup();
    let mut a = Mat::zeros(keys.len(), source.len());
    for (c, img) in images.iter().enumerate() {
        for (r, k) in keys.iter().enumerate() {
            if let Some(v) = img.get(k) {
                a.set(r, c, v.clone());
            }
        }
    }
    (a, keys)
}

impl<F: Field> PrincipalData<F> {
    /// Build `p_j` for `1 <= |j| <= max_grade`, `j` not in `M Z`, as the
    /// one-dimensional kernels of `ad p_{-1}` on each graded piece.
    pub fn new(m: usize, max_grade: i64) -> Result<Self, OperError> {
        if m < 3 {
            return Err(OperError::RankTooSmall(m));
        }
        let (e, f) = chevalley::<F>(m);
        let alpha: Vec<_> = e.iter().zip(&f).map(|(x, y)| x.bracket(y)).collect();
        let delta = alpha.iter().fold(LoopElement::zero(m), |acc, a| acc.add(a));
        let rho = rho_element(m);
        let pm1 = f.iter().fold(LoopElement::zero(m), |acc, x| acc.add(x));
        let mut p = BTreeMap::new();
        for j in (-max_grade..=max_grade).filter(|j| *j != 0 && j % m as i64 != 0) {
            if j == -1 {
                p.insert(j, pm1.clone());
                continue;
            }
            let basis = graded_basis::<F>(m, j);
            let (a, keys) = ad_matrix(&basis, &pm1);
            // the central direction only enters at j = 1 and must not be imposed there
            let rows: Vec<usize> = (0..keys.len()).filter(|&r| keys[r] != LoopKey::Central).collect();
            let mut a2 = Mat::zeros(rows.len(), basis.len());
            for (ri, &r) in rows.iter().enumerate() {
                for c in 0..basis.len() {
                    a2.set(ri, c, a.get(r, c).clone());
                }
            }
            let ker = a2.kernel();
            if ker.len() != 1 {
                return Err(OperError::KernelDimension { grade: j, dim: ker.len() });
            }
            let v = &ker[0];
            let lead = v.iter().find(|x| !x.is_zero()).expect("nonzero kernel vector").inv_r();
            let mut pj = LoopElement::zero(m);
            for (x, c) in basis.iter().zip(v) {
                pj = pj.add(&x.scale(&c.mul_r(&lead)));
            }
            p.insert(j, pj);
        }
        Ok(PrincipalData { m, e, f, alpha, rho, delta, p })
    }

    pub fn p(&self, j: i64) -> Result<&LoopElement<F>, OperError> {
        self.p.get(&j).ok_or(OperError::NotAnExponent(j))
    }

    /// Named structural checks: `[rho, p_j] = j p_j`, `[p_-1, p_j]`, `[p_m, p_n]`, the form.
    pub fn verify(&self) -> Vec<(String, bool)> {
        let m = self.m as i64;
        let mf = RatFun::constant(F::from_i64(m));
        let mut out = Vec::new();
        let pm1 = &self.p[&-1];
        for (&j, pj) in &self.p {
            out.push((format!("[rho,p_{j}] = {j} p_{j}"), self.rho.bracket(pj) == pj.scale(&F::from_i64(j))));
            let expected = if j == 1 { self.delta.scale(&F::from_i64(-1)) } else { LoopElement::zero(self.m) };
            out.push((format!("[p_-1,p_{j}]"), pm1.bracket(pj) == expected));
            for (&k, pk) in &self.p {
                let form = pj.form(pk);
                let want = if j + k == 0 { mf.clone() } else { RatFun::zero() };
                out.push((format!("(p_{j}|p_{k})"), form == want));
                if k > j {
                    let want = if j + k == 0 { self.delta.scale(&F::from_i64(j)) } else { LoopElement::zero(self.m) };
                    out.push((format!("[p_{j},p_{k}]"), pj.bracket(pk) == want));
                }
            }
        }
        out.push(("(delta|rho) = M".into(), self.delta.form(&self.rho) == mf));
        for (i, (e, f)) in self.e.iter().zip(&self.f).enumerate() {
            out.push((format!("[rho,e_{i}] = e_{i}"), self.rho.bracket(e) == *e));
            out.push((format!("[rho,f_{i}] = -f_{i}"), self.rho.bracket(f) == f.scale(&F::from_i64(-1))));
            out.push((format!("(e_{i}|f_{i}) = 1"), e.form(f) == RatFun::one()));
        }
        out
    }

    /// Affine Cartan matrix entry `a_ij` (indices mod `M`).
    pub fn cartan(&self, i: usize, j: usize) -> i64 {
        let m = self.m;
        if i == j {
            2
        } else if (i + 1) % m == j || (j + 1) % m == i {
            -1
        } else {
            0
        }
    }
}

/// Weights, twist data and Bethe roots defining a Miura oper.
#[derive(Clone, Debug)]
pub struct MiuraData<F: Field> {
    pub twist: TwistData<F>,
    /// `pairings[site][j] = <lambda_site, alpha^vee_j>`, `j = 0..M`.
    pub pairings: Vec<Vec<F>>,
    /// `(w, color)`.
    pub roots: Vec<(F, usize)>,
}

impl<F: Field> MiuraData<F> {
    pub fn new(twist: TwistData<F>, pairings: Vec<Vec<F>>, roots: Vec<(F, usize)>) -> Result<Self, OperError> {
        let m = twist.m;
        for (site, p) in pairings.iter().enumerate() {
            if p.len() != m {
                return Err(OperError::PairingCount(site));
            }
            let sum = p.iter().fold(F::zero(), |a, x| a.add_r(x));
            if sum != twist.levels[site] {
                return Err(OperError::LevelMismatch {
                    site,
                    sum: sum.to_string(),
                    level: twist.levels[site].to_string(),
                });
            }
        }
        if pairings.len() != twist.sites() {
            return Err(OperError::PairingCount(pairings.len()));
        }
        for (r, (w, n)) in roots.iter().enumerate() {
            if *n >= m {
                return Err(OperError::BadColor(*n));
            }
            if twist.points.contains(w) {
                return Err(OperError::RootAtMarkedPoint(r));
            }
        }
        Ok(MiuraData { twist, pairings, roots })
    }

    /// Levels are read off as the sums of the pairings.
    pub fn from_pairings(m: usize, points: Vec<F>, pairings: Vec<Vec<F>>, roots: Vec<(F, usize)>) -> Result<Self, OperError> {
        let levels = pairings.iter().map(|p| p.iter().fold(F::zero(), |a, x| a.add_r(x))).collect();
        Self::new(TwistData::new(m, levels, points)?, pairings, roots)
    }

    pub fn m(&self) -> usize {
        self.twist.m
    }

    pub fn without_roots(&self) -> Self {
        MiuraData { roots: Vec::new(), ..self.clone() }
    }

    pub fn with_root(&self, w: F, color: usize) -> Result<Self, OperError> {
        let mut roots = self.roots.clone();
        roots.push((w, color));
        Self::new(self.twist.clone(), self.pairings.clone(), roots)
    }

    /// `u_i(z) = -sum_j <lambda_j, eta_i>/(z - z_j) + sum_{roots of color i} 1/(z - w)`.
    pub fn u_functions(&self) -> Vec<RatFun<F>> {
        let m = self.m();
        let eta = coweights::<F>(m);
        (0..m)
            .map(|i| {
                let mut u = RatFun::zero();
                for (site, p) in self.pairings.iter().enumerate() {
                    let pair = eta[i].0.iter().zip(p).fold(F::zero(), |a, (c, x)| a.add_r(&c.mul_r(x)));
                    u = u.sub(&self.twist.site_pole(Var::Z, site, 1).scale(&pair));
                }
                for (w, n) in &self.roots {
                    if *n == i {
                        u = u.add(&RatFun::pole(Var::Z, w, 1));
                    }
                }
                u
            })
            .collect()
    }

    /// `p_-1 + sum_i u_i alpha_i - (phi/M) rho`.
    pub fn connection(&self, pd: &PrincipalData<F>) -> LoopElement<F> {
        let m = self.m();
        let mut l = pd.p[&-1].clone();
        for (u, a) in self.u_functions().iter().zip(&pd.alpha) {
            l = l.add(&a.mul_fun(u));
        }
        let phi = self.twist.phi(Var::Z).scale(&F::from_frac(-1, m as i64));
        l.add(&pd.rho.mul_fun(&phi))
    }

    /// Draw small non-negative integer pairings, distinct integer points and optionally one root.
    pub fn random(rng: &mut impl Rng, m: usize, sites: usize, with_root: bool) -> Self {
        let mut points: Vec<F> = Vec::new();
        while points.len() < sites {
            let p = F::from_frac(rng.gen_range(-6..=6), rng.gen_range(1..=3));
            if !points.contains(&p) {
                points.push(p);
            }
        }
        let pairings: Vec<Vec<F>> = (0..sites)
            .map(|_| (0..m).map(|_| F::from_i64(rng.gen_range(0..=2))).collect())
            .collect();
        let mut roots = Vec::new();
        if with_root {
            loop {
                let w = F::from_frac(rng.gen_range(-9..=9), rng.gen_range(2..=5));
                if !points.contains(&w) {
                    roots.push((w, rng.gen_range(0..m)));
                    break;
                }
            }
        }
        Self::from_pairings(m, points, pairings, roots).expect("valid random data")
    }
}

/// Coweights `eta_i = sum_k c_ik alpha^vee_k + c_i d`, dual to `{alpha_j, rho/M}`.
/// Returns `(c_i., c_i)` per `i`; `<lambda, d>` is taken to be 0 when pairing.
pub fn coweights<F: Field>(m: usize) -> Vec<(Vec<F>, F)> {
    let cartan = |i: usize, j: usize| -> i64 {
        if i == j {
            2
        } else if (i + 1) % m == j || (j + 1) % m == i {
            -1
        } else {
            0
        }
    };
    // unknowns (c_0..c_{M-1}, c_d); equations <alpha_r, eta> for r < M and <rho, eta> = 0
    let mut a = Mat::zeros(m + 1, m + 1);
    for r in 0..m {
        for k in 0..m {
            a.set(r, k, F::from_i64(cartan(k, r)));
        }
        if r == 0 {
            a.set(r, m, F::one());
        }
    }
    for k in 0..m {
        a.set(m, k, F::one());
    }
    let inv = a.inverse().expect("coweight system is regular");
    (0..m)
        .map(|i| {
            let col: Vec<F> = (0..=m).map(|r| inv.get(r, i).clone()).collect();
            (col[..m].to_vec(), col[m].clone())
        })
        .collect()
}

/// `v_1`, `v_2` in closed form (`f_2 = 0`).
pub fn v_closed<F: Field>(data: &MiuraData<F>) -> (RatFun<F>, RatFun<F>) {
    let m = data.m();
    let u = data.u_functions();
    let inv_m = F::from_frac(1, m as i64);
    let mut uu = Vec::new();
    for i in 0..m {
        for j in 0..m {
            let a = if i == j {
                2
            } else if (i + 1) % m == j || (j + 1) % m == i {
                -1
            } else {
                0
            };
            if a != 0 {
                uu.push(u[i].mul(&u[j]).scale(&F::from_i64(a)));
            }
        }
    }
    let uu = crate::ratfun::sum_all(&uu);
    let rho_u = crate::ratfun::sum_all(&u);
    let v1 = uu
        .scale(&F::from_frac(1, 2))
        .add(&data.twist.twisted_derivative(&rho_u, 1, Var::Z))
        .scale(&inv_m);
    let du: Vec<RatFun<F>> = u.iter().map(|x| x.derivative(Var::Z)).collect();
    let mut terms = Vec::new();
    for i in 0..m {
        let (nx, pv) = ((i + 1) % m, (i + m - 1) % m);
        terms.push(u[i].mul(&u[nx].mul(&u[nx]).sub(&u[pv].mul(&u[pv]))).neg());
        terms.push(u[i].mul(&du[nx].sub(&du[pv])).scale(&F::from_frac(-1, 2)));
    }
    let v2 = crate::ratfun::sum_all(&terms).scale(&inv_m);
    (v1, v2)
}

/// `e^{ad m} L - sum_k (ad m)^k m' / (k+1)!`, truncated at grade `cap`.
pub fn gauge_transform<F: Field>(l: &LoopElement<F>, m: &LoopElement<F>, cap: i64) -> LoopElement<F> {
    let mut out = l.truncate(cap);
    let mut term = l.truncate(cap + 1);
    let mut fact = F::one();
    let mut k = 1;
    loop {
        term = m.bracket_capped(&term, cap);
        if term.is_zero() {
            break;
        }
        fact = fact.mul_r(&F::from_i64(k));
        out = out.add(&term.scale(&fact.inv_r()));
        k += 1;
    }
    let mut dterm = m.derivative().truncate(cap);
    let mut fact = F::one();
    let mut k = 1;
    while !dterm.is_zero() {
        out = out.sub(&dterm.scale(&fact.inv_r()));
        k += 1;
        fact = fact.mul_r(&F::from_i64(k));
        dterm = m.bracket_capped(&dterm, cap);
    }
    out
}

/// Result of grade-by-grade gauge fixing.
#[derive(Clone, Debug)]
pub struct Canonical<F: Field> {
    /// `v_j` for exponents `1 <= j <= max_grade`.
    pub v: BTreeMap<i64, RatFun<F>>,
    /// Gauge parameters `m_1, m_2, ...`.
    pub m: Vec<LoopElement<F>>,
}

/// Bring `d + L dz` to quasi-canonical form up to grade `max_grade`, fixing
/// the freedom at exponent grades by `(p_{-j} | m_j) = 0` for `j >= 2`.
pub fn canonicalize<F: Field>(l: &LoopElement<F>, pd: &PrincipalData<F>, max_grade: i64) -> Result<Canonical<F>, OperError> {
    let mm = pd.m;
    let mi = mm as i64;
    let pm1 = &pd.p[&-1];
    let phi_rho = l.grade_part(0).coeff(LoopKey::Deriv).scale(&F::from_frac(1, mi));
    let target0 = pd.rho.mul_fun(&phi_rho);
    let mut gauge = LoopElement::zero(mm);
    let mut ms = Vec::new();
    let mut v = BTreeMap::new();
    for g in 0..=max_grade {
        let x = gauge_transform(l, &gauge, g).grade_part(g);
        let (rhs, vj) = if g == 0 {
            (target0.sub(&x), None)
        } else if g % mi == 0 {
            (x.scale(&F::from_i64(-1)), None)
        } else {
            let pj = pd.p(g)?;
            let vj = pd.p(-g)?.form(&x).scale(&F::from_frac(1, mi));
            (pj.mul_fun(&vj).sub(&x), Some(vj))
        };
        if let Some(vj) = vj {
            v.insert(g, vj);
        }
        if g == max_grade {
            break;
        }
        let mg = solve_ad(pd, pm1, g + 1, &rhs)?;
        gauge = gauge.add(&mg);
        ms.push(mg);
    }
    Ok(Canonical { v, m: ms })
}

/// Solve `[x, p_-1] = rhs` for `x` of grade `g`, with `(p_{-g}|x) = 0` at exponent grades `g >= 2`.
fn solve_ad<F: Field>(pd: &PrincipalData<F>, pm1: &LoopElement<F>, g: i64, rhs: &LoopElement<F>) -> Result<LoopElement<F>, OperError> {
    let m = pd.m;
    let basis = graded_basis::<F>(m, g);
    let (a, mut keys) = ad_matrix(&basis, pm1);
    for k in rhs.terms().map(|(k, _)| *k) {
        if !keys.contains(&k) {
            // a target direction outside the image: the system is inconsistent
            return Err(OperError::Inconsistent(g - 1));
        }
    }
    let mut rows: Vec<Vec<F>> = (0..a.rows()).map(|r| a.row(r).to_vec()).collect();
    let mut b: Vec<RatFun<F>> = keys.iter().map(|k| rhs.coeff(*k)).collect();
    if g >= 2 && g % m as i64 != 0 {
        let pneg = pd.p(-g)?;
        rows.push(basis.iter().map(|x| pneg.form(x).as_constant().expect("constant")).collect());
        b.push(RatFun::zero());
        keys.push(LoopKey::Deriv);
    }
    let a = Mat::from_rows(rows);
    let at = a.transpose();
    let normal = at.mul(&a).inverse().ok_or(OperError::Inconsistent(g - 1))?;
    let left = normal.mul(&at);
    let mut x = LoopElement::zero(m);
    for (c, el) in basis.iter().enumerate() {
        let parts: Vec<RatFun<F>> = (0..b.len())
            .filter(|&r| !left.get(c, r).is_zero() && !b[r].is_zero())
            .map(|r| b[r].scale(left.get(c, r)))
            .collect();
        let coef = crate::ratfun::sum_all(&parts);
        if !coef.is_zero() {
            x = x.add(&el.mul_fun(&coef));
        }
    }
    if x.bracket(pm1) != *rhs {
        return Err(OperError::Inconsistent(g - 1));
    }
    Ok(x)
}

/// Closed-form root of `a/(w - z_1) + b/(w - z_2) = 0` at color `n`.
pub fn bethe_root<F: Field>(data: &MiuraData<F>, n: usize) -> Result<F, OperError> {
    if data.twist.sites() != 2 {
        return Err(OperError::NeedTwoPoints);
    }
    if n >= data.m() {
        return Err(OperError::BadColor(n));
    }
    let a = &data.pairings[0][n];
    let b = &data.pairings[1][n];
    let s = a.add_r(b);
    if s.is_zero() {
        return Err(OperError::DegenerateBethe);
    }
    let (z1, z2) = (&data.twist.points[0], &data.twist.points[1]);
    Ok(a.mul_r(z2).add_r(&b.mul_r(z1)).div_r(&s))
}

/// `sum_j <lambda_j, alpha^vee_n>/(w - z_j)`.
pub fn bethe_residual<F: Field>(data: &MiuraData<F>, w: &F, n: usize) -> F {
    data.pairings
        .iter()
        .zip(&data.twist.points)
        .fold(F::zero(), |acc, (p, z)| acc.add_r(&p[n].div_r(&w.sub_r(z))))
}

/// Find rational `h` with `D^{(j)}_z h = r`, searching the span of
/// `1/(z - p)^k` (`p` in `poles`, `k <= max_order`) and `z^q` (`q <= max_degree`).
pub fn solve_exact<F: Field>(
    r: &RatFun<F>,
    j: i64,
    twist: &TwistData<F>,
    poles: &[F],
    max_order: u32,
    max_degree: u32,
) -> Option<RatFun<F>> {
    if r.is_zero() {
        return Some(RatFun::zero());
    }
    let mut basis = Vec::new();
    for p in poles {
        for k in 1..=max_order {
            basis.push(RatFun::pole(Var::Z, p, k));
        }
    }
    for q in 0..=max_degree {
        basis.push(RatFun::from_poly(Poly::var(Var::Z).pow(q)));
    }
    let images: Vec<RatFun<F>> = basis.iter().map(|b| twist.twisted_derivative(b, j, Var::Z)).collect();
    let dinv = common_denominator_inverse(images.iter().chain(std::iter::once(r)));
    let nums: Vec<Poly<F>> = images.iter().map(|f| f.numerator_over(&dinv).expect("common denominator")).collect();
    let rn = r.numerator_over(&dinv).expect("common denominator");
    let mut exps: Vec<(u32, u32)> = nums.iter().chain(std::iter::once(&rn)).flat_map(|p| p.terms().map(|(e, _)| *e)).collect();
    exps.sort();
    exps.dedup();
    let mut a = Mat::zeros(exps.len(), basis.len());
    for (c, p) in nums.iter().enumerate() {
        for (e, x) in p.terms() {
            let row = exps.binary_search(e).unwrap();
            a.set(row, c, x.clone());
        }
    }
    let rhs: Vec<F> = exps.iter().map(|e| rn.coeff(*e)).collect();
    let sol = a.solve(&rhs)?;
    let h = basis
        .iter()
        .zip(&sol)
        .filter(|(_, c)| !c.is_zero())
        .fold(RatFun::zero(), |acc, (b, c)| acc.add(&b.scale(c)));
    (twist.twisted_derivative(&h, j, Var::Z) == *r).then_some(h)
}

/// A random element of `n_+` with grades `1..=max_grade` and coefficients `c/(z - z_s)` or constants.
pub fn random_gauge<F: Field>(rng: &mut impl Rng, data: &MiuraData<F>, max_grade: i64) -> LoopElement<F> {
    let m = data.m();
    let mut n = LoopElement::zero(m);
    for g in 1..=max_grade {
        for el in graded_basis::<F>(m, g) {
            let c = F::from_frac(rng.gen_range(-3..=3), rng.gen_range(1..=3));
            if c.is_zero() {
                continue;
            }
            let site = rng.gen_range(0..=data.twist.sites());
            let f = if site == data.twist.sites() {
                RatFun::constant(c)
            } else {
                data.twist.site_pole(Var::Z, site, 1).scale(&c)
            };
            n = n.add(&el.mul_fun(&f));
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::Zero;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    #[test]
    fn principal_relations_hold() {
        for m in [3usize, 4] {
            let pd = PrincipalData::<Q>::new(m, 5).unwrap();
            for (name, ok) in pd.verify() {
                assert!(ok, "M={m}: {name}");
            }
        }
    }

    #[test]
    fn p_minus_two_matches_commutator_form() {
        let pd = PrincipalData::<Q>::new(3, 2).unwrap();
        let m = 3;
        let mut expected = LoopElement::zero(m);
        for i in 0..m {
            expected = expected.sub(&pd.f[i].bracket(&pd.f[(i + 1) % m]));
        }
        assert_eq!(pd.p[&-2], expected);
        assert_eq!(pd.rho.bracket(&pd.p[&2]), pd.p[&2].scale(&q(2, 1)));
    }

    #[test]
    fn coweights_are_dual() {
        let m = 4;
        let pd = PrincipalData::<Q>::new(m, 1).unwrap();
        for (i, (c, cd)) in coweights::<Q>(m).into_iter().enumerate() {
            let mut eta = LoopElement::derivation(m).scale(&cd);
            for (k, ck) in c.iter().enumerate() {
                eta = eta.add(&pd.alpha[k].scale(ck));
            }
            for j in 0..m {
                let want = if i == j { RatFun::one() } else { RatFun::zero() };
                assert_eq!(pd.alpha[j].form(&eta), want);
            }
            assert!(pd.rho.form(&eta).is_zero());
        }
    }

    #[test]
    fn zero_u_gives_zero_v() {
        let data = MiuraData::from_pairings(3, vec![q(0, 1)], vec![vec![q(0, 1); 3]], vec![]).unwrap();
        let (v1, v2) = v_closed(&data);
        assert!(v1.is_zero() && v2.is_zero());
    }

    #[test]
    fn bethe_roots_closed_form() {
        let d = MiuraData::from_pairings(3, vec![q(0, 1), q(1, 1)], vec![vec![q(1, 1), q(0, 1), q(0, 1)]; 2], vec![]).unwrap();
        let w = bethe_root(&d, 0).unwrap();
        assert_eq!(w, q(1, 2));
        assert!(bethe_residual(&d, &w, 0).is_zero());
        let d = MiuraData::from_pairings(
            3,
            vec![q(0, 1), q(1, 1)],
            vec![vec![q(2, 1), q(0, 1), q(0, 1)], vec![q(1, 1), q(0, 1), q(0, 1)]],
            vec![],
        )
        .unwrap();
        assert_eq!(bethe_root(&d, 0).unwrap(), q(2, 3));
        assert_eq!(bethe_root(&d, 1), Err(OperError::DegenerateBethe));
    }

    #[test]
    fn first_gauge_parameter() {
        // m_1 = -sum u_i e_i
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = MiuraData::<Q>::random(&mut rng, 3, 2, false);
        let pd = PrincipalData::new(3, 2).unwrap();
        let c = canonicalize(&data.connection(&pd), &pd, 2).unwrap();
        let mut expected = LoopElement::zero(3);
        for (u, e) in data.u_functions().iter().zip(&pd.e) {
            expected = expected.sub(&e.mul_fun(u));
        }
        assert_eq!(c.m[0], expected);
    }

    #[test]
    fn canonical_form_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [3usize, 4] {
            let pd = PrincipalData::new(m, 2).unwrap();
            for with_root in [false, true] {
                let data = MiuraData::<Q>::random(&mut rng, m, 2, with_root);
                let c = canonicalize(&data.connection(&pd), &pd, 2).unwrap();
                let (v1, v2) = v_closed(&data);
                assert_eq!(c.v[&1], v1, "M={m}");
                assert_eq!(c.v[&2], v2, "M={m}");
            }
        }
    }

    #[test]
    fn gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 3;
        let pd = PrincipalData::new(m, 2).unwrap();
        let data = MiuraData::<Q>::random(&mut rng, m, 2, false);
        let l = data.connection(&pd);
        let n = random_gauge(&mut rng, &data, 2);
        let l2 = gauge_transform(&l, &n, 3);
        let a = canonicalize(&l, &pd, 2).unwrap();
        let b = canonicalize(&l2, &pd, 2).unwrap();
        assert_eq!(a.v[&1], b.v[&1]);
        let diff = b.v[&2].sub(&a.v[&2]);
        assert!(solve_exact(&diff, 2, &data.twist, &data.twist.points, 4, 3).is_some(), "{diff}");
    }

    #[test]
    fn exactness_solver_recovers_derivative() {
        let twist = TwistData::new(3, vec![q(2, 1), q(-1, 2)], vec![q(0, 1), q(1, 1)]).unwrap();
        let h = RatFun::pole(Var::Z, &q(0, 1), 2).add(&RatFun::var(Var::Z).scale(&q(3, 1)));
        let r = twist.twisted_derivative(&h, 2, Var::Z);
        assert_eq!(solve_exact(&r, 2, &twist, &twist.points, 3, 2).unwrap(), h);
        // 1/(z - 5) has no primitive in the span
        assert!(solve_exact(&RatFun::pole(Var::Z, &q(5, 1), 1), 2, &twist, &twist.points, 3, 2).is_none());
    }
}

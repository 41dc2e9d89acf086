//! Exact matrix basis of `sl_M`, its trace form and the invariant tensors `f`, `t`.
//!
//! The basis is the off-diagonal matrix units `E_ij` followed by the diagonal
//! elements `H_k = diag(1, .., 1, -k, 0, ..)` (`k` ones), which are mutually
//! orthogonal. All tensors carry lower indices; repeated indices are
//! contracted through the inverse Gram matrix.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::linalg::Mat;
use crate::scalar::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("sl_M needs M >= 3 for a nonzero symmetric tensor, got M = {0}")]
    RankTooSmall(usize),
    #[error("expected {expected} basis scale factors, got {got}")]
    ScaleCount { expected: usize, got: usize },
    #[error("basis scale factor {0} is zero")]
    ZeroScale(usize),
    #[error("Gram matrix is singular")]
    SingularGram,
}

/// Which matrix a basis vector is (before rescaling). Indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisLabel {
    /// Matrix unit `E_ij`, `i != j`.
    E(usize, usize),
    /// `H_k = diag(1, .., 1, -k, 0, ..)`, `1 <= k < M`.
    H(usize),
}

impl BasisLabel {
    /// Principal height: `j - i` for `E_ij`, zero on the Cartan subalgebra.
    pub fn height(&self) -> i64 {
        match *self {
            BasisLabel::E(i, j) => j as i64 - i as i64,
            BasisLabel::H(_) => 0,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            BasisLabel::E(i, j) => format!("E{}{}", i + 1, j + 1),
            BasisLabel::H(k) => format!("H{k}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BasisData<F: Field> {
    pub m: usize,
    pub labels: Vec<BasisLabel>,
    pub elements: Vec<Mat<F>>,
    pub gram: Mat<F>,
    pub gram_inv: Mat<F>,
    inv_rows: Vec<Vec<(usize, F)>>,
}

fn base_labels(m: usize) -> Vec<BasisLabel> {
    let mut labels = Vec::with_capacity(m * m - 1);
    for i in 0..m {
        for j in 0..m {
            if i != j {
                labels.push(BasisLabel::E(i, j));
            }
        }
    }
    labels.extend((1..m).map(BasisLabel::H));
    labels
}

fn label_matrix<F: Field>(m: usize, l: BasisLabel) -> Mat<F> {
    match l {
        BasisLabel::E(i, j) => Mat::unit(m, i, j),
        BasisLabel::H(k) => {
            let mut d = vec![F::zero(); m];
            for x in d.iter_mut().take(k) {
                *x = F::one();
            }
            d[k] = F::from_i64(-(k as i64));
            Mat::diagonal(&d)
        }
    }
}

impl<F: Field> BasisData<F> {
    pub fn new(m: usize) -> Result<Self, TensorError> {
        if m < 3 {
            return Err(TensorError::RankTooSmall(m));
        }
        let n = m * m - 1;
        Self::scaled(m, &vec![F::one(); n])
    }

    /// Basis with element `a` multiplied by `scales[a]`.
    pub fn scaled(m: usize, scales: &[F]) -> Result<Self, TensorError> {
        if m < 3 {
            return Err(TensorError::RankTooSmall(m));
        }
        let labels = base_labels(m);
        if scales.len() != labels.len() {
            return Err(TensorError::ScaleCount { expected: labels.len(), got: scales.len() });
        }
        if let Some(i) = scales.iter().position(F::is_zero) {
            return Err(TensorError::ZeroScale(i));
        }
        let elements: Vec<Mat<F>> =
            labels.iter().zip(scales).map(|(l, s)| label_matrix::<F>(m, *l).scale(s)).collect();
        let n = elements.len();
        let mut gram = Mat::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let v = elements[a].trace_product(&elements[b]);
                gram.set(a, b, v.clone());
                gram.set(b, a, v);
            }
        }
        let gram_inv = gram.inverse().ok_or(TensorError::SingularGram)?;
        let inv_rows = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| !gram_inv.get(a, b).is_zero())
                    .map(|b| (b, gram_inv.get(a, b).clone()))
                    .collect()
            })
            .collect();
        Ok(BasisData { m, labels, elements, gram, gram_inv, inv_rows })
    }

    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    /// Nonzero entries `(b, G^{ab})` of row `a` of the inverse Gram matrix.
    pub fn inv_row(&self, a: usize) -> &[(usize, F)] {
        &self.inv_rows[a]
    }

    pub fn index_of(&self, l: BasisLabel) -> Option<usize> {
        self.labels.iter().position(|x| *x == l)
    }

    /// Coordinates of a traceless matrix in this basis.
    pub fn coords(&self, x: &Mat<F>) -> Vec<F> {
        let pairings: Vec<F> = self.elements.iter().map(|e| x.trace_product(e)).collect();
        self.gram_inv.mul_vec(&pairings)
    }

    pub fn matrix_of(&self, coords: &[F]) -> Mat<F> {
        coords
            .iter()
            .zip(&self.elements)
            .filter(|(c, _)| !c.is_zero())
            .fold(Mat::zeros(self.m, self.m), |acc, (c, e)| acc.add(&e.scale(c)))
    }

    /// Weyl vector as a diagonal matrix: `diag((M-1)/2 - i)`.
    pub fn rho_matrix(&self) -> Mat<F> {
        let d: Vec<F> = (0..self.m)
            .map(|i| F::from_frac(self.m as i64 - 1 - 2 * i as i64, 2))
            .collect();
        Mat::diagonal(&d)
    }
}

/// Dense rank-3 tensor with per-position nonzero indices.
#[derive(Clone, Debug)]
pub struct Tensor3<F: Field> {
    dim: usize,
    data: Vec<F>,
    by_pos: [Vec<Vec<[usize; 3]>>; 3],
    nonzero: Vec<[usize; 3]>,
}

impl<F: Field> Tensor3<F> {
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(dim * dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    data.push(f(a, b, c));
                }
            }
        }
        Self::from_data(dim, data)
    }

    fn from_data(dim: usize, data: Vec<F>) -> Self {
        let mut by_pos: [Vec<Vec<[usize; 3]>>; 3] =
            [vec![Vec::new(); dim], vec![Vec::new(); dim], vec![Vec::new(); dim]];
        let mut nonzero = Vec::new();
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    if !data[(a * dim + b) * dim + c].is_zero() {
                        let ix = [a, b, c];
                        nonzero.push(ix);
                        for (p, slot) in by_pos.iter_mut().enumerate() {
                            slot[ix[p]].push(ix);
                        }
                    }
                }
            }
        }
        Tensor3 { dim, data, by_pos, nonzero }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> &F {
        &self.data[(a * self.dim + b) * self.dim + c]
    }

    pub fn nonzero(&self) -> &[[usize; 3]] {
        &self.nonzero
    }

    /// Nonzero index triples with `ix[pos] == v`.
    pub fn with_index(&self, pos: usize, v: usize) -> &[[usize; 3]] {
        &self.by_pos[pos][v]
    }

    pub fn with_entry(&self, ix: [usize; 3], v: F) -> Self {
        let mut data = self.data.clone();
        data[(ix[0] * self.dim + ix[1]) * self.dim + ix[2]] = v;
        Self::from_data(self.dim, data)
    }

    /// All three indices raised with the inverse Gram matrix.
    pub fn raised(&self, basis: &BasisData<F>) -> Self {
        let dim = self.dim;
        let mut data = vec![F::zero(); dim * dim * dim];
        for &[a, b, c] in &self.nonzero {
            let v = self.get(a, b, c);
            for (x, gx) in basis.inv_row(a) {
                let vx = v.mul_r(gx);
                for (y, gy) in basis.inv_row(b) {
                    let vxy = vx.mul_r(gy);
                    for (z, gz) in basis.inv_row(c) {
                        let slot = &mut data[(x * dim + y) * dim + z];
                        *slot = slot.add_r(&vxy.mul_r(gz));
                    }
                }
            }
        }
        Self::from_data(dim, data)
    }
}

/// `sl_M` basis together with `f_abc = tr([I_a,I_b]I_c)` and `t_abc = tr(I_aI_bI_c + I_bI_aI_c)`.
#[derive(Clone, Debug)]
pub struct TensorTable<F: Field> {
    pub basis: BasisData<F>,
    pub f: Tensor3<F>,
    pub t: Tensor3<F>,
    structure: Vec<Vec<Vec<(usize, F)>>>,
}

impl<F: Field> TensorTable<F> {
    pub fn new(basis: BasisData<F>) -> Self {
        let n = basis.dim();
        let els = &basis.elements;
        let products: Vec<Vec<Mat<F>>> =
            (0..n).map(|a| (0..n).map(|b| els[a].mul(&els[b])).collect()).collect();
        let f = Tensor3::from_fn(n, |a, b, c| {
            products[a][b].trace_product(&els[c]).sub_r(&products[b][a].trace_product(&els[c]))
        });
        let t = Tensor3::from_fn(n, |a, b, c| {
            products[a][b].trace_product(&els[c]).add_r(&products[b][a].trace_product(&els[c]))
        });
        let structure = Self::structure_from(&basis, &f);
        TensorTable { basis, f, t, structure }
    }

    pub fn for_rank(m: usize) -> Result<Self, TensorError> {
        Ok(Self::new(BasisData::new(m)?))
    }

    fn structure_from(basis: &BasisData<F>, f: &Tensor3<F>) -> Vec<Vec<Vec<(usize, F)>>> {
        let n = basis.dim();
        let mut s = vec![vec![BTreeMap::<usize, F>::new(); n]; n];
        for &[a, b, c] in f.nonzero() {
            let v = f.get(a, b, c);
            for (w, g) in basis.inv_row(c) {
                let e = s[a][b].entry(*w).or_insert_with(F::zero);
                *e = e.add_r(&v.mul_r(g));
            }
        }
        s.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
                    .collect()
            })
            .collect()
    }

    pub fn m(&self) -> usize {
        self.basis.m
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `[I_a, I_b] = sum_c coeff * I_c` as sparse `(c, coeff)` pairs.
    pub fn bracket(&self, a: usize, b: usize) -> &[(usize, F)] {
        &self.structure[a][b]
    }

    /// Replace one entry of `t`, leaving `f` intact (for negative controls).
    pub fn with_t_entry(&self, ix: [usize; 3], v: F) -> Self {
        TensorTable {
            basis: self.basis.clone(),
            f: self.f.clone(),
            t: self.t.with_entry(ix, v),
            structure: self.structure.clone(),
        }
    }

    /// `t(x, y, z)` for arbitrary matrices.
    pub fn t_of(x: &Mat<F>, y: &Mat<F>, z: &Mat<F>) -> F {
        x.mul(y).trace_product(z).add_r(&y.mul(x).trace_product(z))
    }
}

/// Sparse tensor of arbitrary rank, indexed by single positions and position pairs.
#[derive(Clone, Debug)]
pub struct SparseTensor<F: Field> {
    rank: usize,
    entries: Vec<(Vec<usize>, F)>,
    single: Vec<HashMap<usize, Vec<u32>>>,
    pair: HashMap<(usize, usize), HashMap<(usize, usize), Vec<u32>>>,
}

impl<F: Field> SparseTensor<F> {
    pub fn from_entries(rank: usize, entries: impl IntoIterator<Item = (Vec<usize>, F)>) -> Self {
        let entries: Vec<(Vec<usize>, F)> = entries.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        let mut single = vec![HashMap::<usize, Vec<u32>>::new(); rank];
        let mut pair: HashMap<(usize, usize), HashMap<(usize, usize), Vec<u32>>> = HashMap::new();
        for (id, (ix, _)) in entries.iter().enumerate() {
            assert_eq!(ix.len(), rank);
            for p in 0..rank {
                single[p].entry(ix[p]).or_default().push(id as u32);
                for q in p + 1..rank {
                    pair.entry((p, q)).or_default().entry((ix[p], ix[q])).or_default().push(id as u32);
                }
            }
        }
        SparseTensor { rank, entries, single, pair }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn entries(&self) -> &[(Vec<usize>, F)] {
        &self.entries
    }

    pub fn to_map(&self) -> HashMap<Vec<usize>, F> {
        self.entries.iter().cloned().collect()
    }

    fn lookup1(&self, p: usize, v: usize) -> &[u32] {
        self.single[p].get(&v).map_or(&[], Vec::as_slice)
    }

    fn lookup2(&self, p: usize, vp: usize, q: usize, vq: usize) -> &[u32] {
        self.pair
            .get(&(p, q))
            .and_then(|m| m.get(&(vp, vq)))
            .map_or(&[], Vec::as_slice)
    }
}

impl<F: Field> From<&Tensor3<F>> for SparseTensor<F> {
    fn from(t: &Tensor3<F>) -> Self {
        SparseTensor::from_entries(
            3,
            t.nonzero().iter().map(|&[a, b, c]| (vec![a, b, c], t.get(a, b, c).clone())),
        )
    }
}

/// Sum over all index values of a product of sparse tensors.
///
/// `labels[k]` names the indices of `factors[k]`. A label occurring twice is
/// contracted through `G^{-1}`; labels listed in `free` stay open and give the
/// index order of the result.
pub fn contract<F: Field>(
    basis: &BasisData<F>,
    factors: &[(&SparseTensor<F>, &str)],
    free: &str,
) -> SparseTensor<F> {
    #[derive(Clone, Copy)]
    enum Slot {
        Bind(usize),
        Dual(usize),
    }
    let free: Vec<char> = free.chars().collect();
    let mut ids: Vec<char> = Vec::new();
    let mut count: HashMap<char, usize> = HashMap::new();
    let mut slots: Vec<Vec<Slot>> = Vec::new();
    for (t, ls) in factors {
        let ls: Vec<char> = ls.chars().collect();
        assert_eq!(ls.len(), t.rank(), "label count must match tensor rank");
        let mut row = Vec::new();
        for l in ls {
            let id = ids.iter().position(|x| *x == l).unwrap_or_else(|| {
                ids.push(l);
                ids.len() - 1
            });
            let c = count.entry(l).or_insert(0);
            *c += 1;
            row.push(if *c == 2 && !free.contains(&l) { Slot::Dual(id) } else { Slot::Bind(id) });
        }
        slots.push(row);
    }
    for (l, c) in &count {
        let expected = if free.contains(l) { 1 } else { 2 };
        assert_eq!(*c, expected, "label {l} has wrong multiplicity");
    }
    let free_ids: Vec<usize> = free.iter().map(|l| ids.iter().position(|x| x == l).unwrap()).collect();

    struct Ctx<'a, F: Field> {
        basis: &'a BasisData<F>,
        factors: &'a [(&'a SparseTensor<F>, &'a str)],
        slots: Vec<Vec<Slot>>,
        free_ids: Vec<usize>,
        out: HashMap<Vec<usize>, F>,
    }

    fn go<F: Field>(ctx: &mut Ctx<'_, F>, k: usize, bind: &mut [Option<usize>], w: &F) {
        if k == ctx.factors.len() {
            let key: Vec<usize> = ctx.free_ids.iter().map(|&i| bind[i].unwrap()).collect();
            let e = ctx.out.entry(key).or_insert_with(F::zero);
            *e = e.add_r(w);
            return;
        }
        let tensor = ctx.factors[k].0;
        let slots = ctx.slots[k].clone();
        // values each known position may take
        let mut known: Vec<(usize, Vec<usize>)> = Vec::new();
        for (p, s) in slots.iter().enumerate() {
            match *s {
                Slot::Bind(id) => {
                    if let Some(v) = bind[id] {
                        known.push((p, vec![v]));
                    }
                }
                Slot::Dual(id) => {
                    let x = bind[id].unwrap();
                    known.push((p, ctx.basis.inv_row(x).iter().map(|(y, _)| *y).collect()));
                }
            }
        }
        known.sort_by_key(|(_, vs)| vs.len());
        let mut lists: Vec<&[u32]> = Vec::new();
        let all: Vec<u32>;
        match known.len() {
            0 => {
                all = (0..tensor.entries.len() as u32).collect();
                lists.push(&all);
            }
            1 => {
                let (p, vs) = &known[0];
                for v in vs {
                    lists.push(tensor.lookup1(*p, *v));
                }
            }
            _ => {
                let (p, vp) = &known[0];
                let (q, vq) = &known[1];
                let (p, q, vp, vq) = if p < q { (*p, *q, vp, vq) } else { (*q, *p, vq, vp) };
                for a in vp {
                    for b in vq {
                        lists.push(tensor.lookup2(p, *a, q, *b));
                    }
                }
            }
        }
        let mut newly: Vec<usize> = Vec::with_capacity(slots.len());
        for list in lists {
            'entry: for &id in list {
                let (ix, val) = &tensor.entries[id as usize];
                let mut wk = w.mul_r(val);
                newly.clear();
                for (p, s) in slots.iter().enumerate() {
                    match *s {
                        Slot::Bind(lid) => match bind[lid] {
                            Some(v) if v != ix[p] => {
                                for &i in &newly {
                                    bind[i] = None;
                                }
                                continue 'entry;
                            }
                            Some(_) => {}
                            None => {
                                bind[lid] = Some(ix[p]);
                                newly.push(lid);
                            }
                        },
                        Slot::Dual(lid) => {
                            let g = ctx.basis.gram_inv.get(bind[lid].unwrap(), ix[p]);
                            if g.is_zero() {
                                for &i in &newly {
                                    bind[i] = None;
                                }
                                continue 'entry;
                            }
                            wk = wk.mul_r(g);
                        }
                    }
                }
                let mine = newly.clone();
                go(ctx, k + 1, bind, &wk);
                for i in mine {
                    bind[i] = None;
                }
            }
        }
    }

    let mut ctx = Ctx { basis, factors, slots, free_ids, out: HashMap::new() };
    let mut bind = vec![None; ids.len()];
    go(&mut ctx, 0, &mut bind, &F::one());
    SparseTensor::from_entries(free.len(), ctx.out)
}

/// Outcome of one exact identity check.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck<F: Field> {
    pub name: &'static str,
    /// Largest absolute entry of `lhs - rhs`.
    pub max_residual: F,
    /// Index tuple where the largest residual occurs.
    pub worst: Option<Vec<usize>>,
}

impl<F: Field> IdentityCheck<F> {
    pub fn passed(&self) -> bool {
        self.max_residual.is_zero()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport<F: Field> {
    pub m: usize,
    pub checks: Vec<IdentityCheck<F>>,
}

impl<F: Field> IdentityReport<F> {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(IdentityCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck<F>> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

fn abs<F: Field>(x: &F) -> F {
    if *x < F::zero() {
        x.neg_r()
    } else {
        x.clone()
    }
}

fn compare<F: Field>(
    name: &'static str,
    lhs: &HashMap<Vec<usize>, F>,
    rhs: &HashMap<Vec<usize>, F>,
) -> IdentityCheck<F> {
    let mut max = F::zero();
    let mut worst = None;
    let keys = lhs.keys().chain(rhs.keys());
    for k in keys {
        let zero = F::zero();
        let d = abs(&lhs.get(k).unwrap_or(&zero).sub_r(rhs.get(k).unwrap_or(&zero)));
        if d > max {
            max = d;
            worst = Some(k.clone());
        }
    }
    IdentityCheck { name, max_residual: max, worst }
}

fn scaled3<F: Field>(t: &Tensor3<F>, s: &F) -> HashMap<Vec<usize>, F> {
    t.nonzero()
        .iter()
        .map(|&[a, b, c]| (vec![a, b, c], t.get(a, b, c).mul_r(s)))
        .filter(|(_, v)| !v.is_zero())
        .collect()
}

fn scaled_gram<F: Field>(basis: &BasisData<F>, s: &F) -> HashMap<Vec<usize>, F> {
    let n = basis.dim();
    let mut out = HashMap::new();
    for a in 0..n {
        for b in 0..n {
            let v = basis.gram.get(a, b).mul_r(s);
            if !v.is_zero() {
                out.insert(vec![a, b], v);
            }
        }
    }
    out
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Symmetrize the positions listed in `positions` (normalized average).
fn symmetrize<F: Field>(x: &HashMap<Vec<usize>, F>, positions: &[usize]) -> HashMap<Vec<usize>, F> {
    let perms = permutations(positions.len());
    let w = F::from_frac(1, perms.len() as i64);
    let mut out: HashMap<Vec<usize>, F> = HashMap::new();
    for (k, v) in x {
        let vw = v.mul_r(&w);
        for p in &perms {
            let mut key = k.clone();
            for (i, &pi) in p.iter().enumerate() {
                key[positions[i]] = k[positions[pi]];
            }
            let e = out.entry(key).or_insert_with(F::zero);
            *e = e.add_r(&vw);
        }
    }
    out.retain(|_, v| !v.is_zero());
    out
}

/// Residual of `sum_w C_{a x}^w T(.., w, ..)` over all slots (invariance of `T` under `ad I_a`).
fn invariance_residual<F: Field>(table: &TensorTable<F>, tensor: &Tensor3<F>) -> (F, Option<Vec<usize>>) {
    let n = table.dim();
    let mut max = F::zero();
    let mut worst = None;
    for a in 0..n {
        let mut acc: HashMap<[usize; 3], F> = HashMap::new();
        for x in 0..n {
            for (w, c) in table.bracket(a, x) {
                for p in 0..3 {
                    for &ix in tensor.with_index(p, *w) {
                        let mut key = ix;
                        key[p] = x;
                        let e = acc.entry(key).or_insert_with(F::zero);
                        *e = e.add_r(&c.mul_r(tensor.get(ix[0], ix[1], ix[2])));
                    }
                }
            }
        }
        for (k, v) in acc {
            let d = abs(&v);
            if d > max {
                max = d;
                worst = Some(vec![a, k[0], k[1], k[2]]);
            }
        }
    }
    (max, worst)
}

/// Check every tensor identity of the cubic construction exactly.
pub fn verify_tensor_identities<F: Field>(table: &TensorTable<F>) -> IdentityReport<F> {
    let b = &table.basis;
    let f = SparseTensor::from(&table.f);
    let t = SparseTensor::from(&table.t);
    let m = F::from_i64(table.m() as i64);
    let mm4 = m.mul_r(&m).sub_r(&F::from_i64(4));
    let mut checks = Vec::new();

    let trace_res = b.elements.iter().map(|e| abs(&e.trace())).max().unwrap_or_else(F::zero);
    checks.push(IdentityCheck { name: "basis is traceless", max_residual: trace_res, worst: None });

    let lhs = contract(b, &[(&f, "ade"), (&f, "bdg"), (&t, "ceg")], "abc");
    checks.push(compare("f_ade f_bdg t_ceg = -M t_abc", &lhs.to_map(), &scaled3(&table.t, &m.neg_r())));

    let lhs = contract(b, &[(&t, "abc"), (&t, "dbc")], "ad");
    let rhs = scaled_gram(b, &F::from_i64(2).mul_r(&mm4).div_r(&m));
    checks.push(compare("t_abc t_dbc = 2(M^2-4)/M G_ad", &lhs.to_map(), &rhs));

    let lhs = contract(b, &[(&f, "abc"), (&f, "dbc")], "ad");
    let rhs = scaled_gram(b, &F::from_i64(-2).mul_r(&m));
    checks.push(compare("f_abc f_dbc = -2M G_ad", &lhs.to_map(), &rhs));

    let lhs = contract(b, &[(&f, "ade"), (&t, "bgd"), (&t, "ceg")], "abc");
    checks.push(compare("f_ade t_bgd t_ceg = (M^2-4)/M f_abc", &lhs.to_map(), &scaled3(&table.f, &mm4.div_r(&m))));

    // longer chains are contracted in two stages
    let empty = HashMap::new();
    let inner = contract(b, &[(&f, "dfg"), (&f, "ehi"), (&t, "bfh"), (&t, "cgi")], "debc");
    let lhs = contract(b, &[(&f, "ade"), (&inner, "debc")], "abc");
    checks.push(compare("f_ade f_dfg f_ehi t_bfh t_cgi = 0", &lhs.to_map(), &empty));

    let left = contract(b, &[(&f, "acd"), (&f, "def")], "acef");
    let right = contract(b, &[(&f, "egh"), (&f, "fij"), (&t, "bgi"), (&t, "chj")], "efbc");
    let lhs = contract(b, &[(&left, "acef"), (&right, "efbc")], "ab");
    checks.push(compare("f_acd f_def f_egh f_fij t_bgi t_chj = 0", &lhs.to_map(), &empty));

    let right = contract(b, &[(&f, "egh"), (&f, "fij"), (&t, "bhj"), (&t, "cgi")], "efbc");
    let lhs = contract(b, &[(&left, "acef"), (&right, "efbc")], "ab");
    checks.push(compare("f_acd f_def f_egh f_fij t_bhj t_cgi = 0", &lhs.to_map(), &empty));

    // t_{ea(b} t_{cd)e} = t_{e(ab} t_{cd)e}
    let tt = contract(b, &[(&t, "eab"), (&t, "cde")], "abcd").to_map();
    checks.push(compare(
        "t_ea(b t_cd)e = t_e(ab t_cd)e",
        &symmetrize(&tt, &[1, 2, 3]),
        &symmetrize(&tt, &[0, 1, 2, 3]),
    ));

    let (r, w) = invariance_residual(table, &table.f);
    checks.push(IdentityCheck { name: "f is ad-invariant", max_residual: r, worst: w });
    let (r, w) = invariance_residual(table, &table.t);
    checks.push(IdentityCheck { name: "t is ad-invariant", max_residual: r, worst: w });

    IdentityReport { m: table.m(), checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::Zero;
    use proptest::prelude::*;

    type Q = BigRational;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    #[test]
    fn basis_shape() {
        let b = BasisData::<Q>::new(3).unwrap();
        assert_eq!(b.dim(), 8);
        let e12 = b.index_of(BasisLabel::E(0, 1)).unwrap();
        let e21 = b.index_of(BasisLabel::E(1, 0)).unwrap();
        assert_eq!(b.gram.get(e12, e21), &q(1, 1));
        assert!(matches!(BasisData::<Q>::new(2), Err(TensorError::RankTooSmall(2))));
        let b4 = BasisData::<Q>::new(4).unwrap();
        assert!(!b4.gram.determinant().is_zero());
    }

    #[test]
    fn symmetric_tensor_on_diagonals() {
        let x = Mat::diagonal(&[q(1, 1), q(-1, 1), q(0, 1)]);
        assert_eq!(TensorTable::t_of(&x, &x, &x), q(0, 1));
        let y = Mat::diagonal(&[q(2, 1), q(-1, 1), q(-1, 1)]);
        // independent oracle: 2 tr(y^3)
        let direct: Q = [2i64, -1, -1].iter().map(|d| q(2 * d * d * d, 1)).sum();
        assert_eq!(TensorTable::t_of(&y, &y, &y), direct);
        assert_eq!(direct, q(12, 1));
        let table = TensorTable::<Q>::for_rank(3).unwrap();
        let h1 = table.basis.index_of(BasisLabel::H(1)).unwrap();
        let h2 = table.basis.index_of(BasisLabel::H(2)).unwrap();
        assert!((0..8).all(|c| table.f.get(h1, h2, c).is_zero()));
    }

    #[test]
    fn identities_hold_for_rank_three() {
        let table = TensorTable::<Q>::for_rank(3).unwrap();
        let report = verify_tensor_identities(&table);
        for c in &report.checks {
            assert!(c.passed(), "{} residual {}", c.name, c.max_residual);
        }
        let f = SparseTensor::from(&table.f);
        let t = SparseTensor::from(&table.t);
        let ff = contract(&table.basis, &[(&f, "abc"), (&f, "dbc")], "ad").to_map();
        let e12 = table.basis.index_of(BasisLabel::E(0, 1)).unwrap();
        let e21 = table.basis.index_of(BasisLabel::E(1, 0)).unwrap();
        assert_eq!(ff[&vec![e12, e21]], q(-6, 1));
        let tt = contract(&table.basis, &[(&t, "abc"), (&t, "dbc")], "ad").to_map();
        assert_eq!(tt[&vec![e12, e21]], q(10, 3));
    }

    #[test]
    fn broken_t_is_detected() {
        let table = TensorTable::<Q>::for_rank(3).unwrap();
        let ix = table.t.nonzero()[0];
        let bad = table.with_t_entry(ix, table.t.get(ix[0], ix[1], ix[2]).add_r(&q(1, 1)));
        let report = verify_tensor_identities(&bad);
        assert!(!report.all_passed());
        assert!(report.failures().any(|c| c.name == "t is ad-invariant"));
    }

    #[test]
    fn bracket_matches_matrices() {
        let table = TensorTable::<Q>::for_rank(4).unwrap();
        let b = &table.basis;
        for x in 0..b.dim() {
            for y in 0..b.dim() {
                let mut coords = vec![q(0, 1); b.dim()];
                for (c, v) in table.bracket(x, y) {
                    coords[*c] = v.clone();
                }
                assert_eq!(b.matrix_of(&coords), b.elements[x].commutator(&b.elements[y]));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]
        #[test]
        fn identities_survive_rescaling(scales in proptest::collection::vec((1i64..5, 1i64..4, any::<bool>()), 8)) {
            let scales: Vec<Q> = scales.into_iter().map(|(n, d, s)| q(if s { n } else { -n }, d)).collect();
            let basis = BasisData::scaled(3, &scales).unwrap();
            let report = verify_tensor_identities(&TensorTable::new(basis));
            prop_assert!(report.all_passed());
        }
    }
}

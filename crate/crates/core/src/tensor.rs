//! Dense tensors with named, oriented indices; pairwise and network
//! contraction; subspace algebra on orthonormal bases.

use std::collections::HashSet;

use ndarray::{s, Array1, Array2, ArrayD, IxDyn};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::la::{self, dagger};

/// Default cap on the number of entries of any intermediate tensor.
pub const DEFAULT_MAX_ENTRIES: usize = 1 << 27;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Ket,
    Bra,
}

impl Orientation {
    pub fn flip(self) -> Self {
        match self {
            Orientation::Ket => Orientation::Bra,
            Orientation::Bra => Orientation::Ket,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Index {
    pub label: String,
    pub dim: usize,
    pub orient: Orientation,
}

impl Index {
    pub fn ket(label: impl Into<String>, dim: usize) -> Self {
        Index {
            label: label.into(),
            dim,
            orient: Orientation::Ket,
        }
    }

    pub fn bra(label: impl Into<String>, dim: usize) -> Self {
        Index {
            label: label.into(),
            dim,
            orient: Orientation::Bra,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LabeledTensor {
    pub indices: Vec<Index>,
    pub data: ArrayD<C64>,
}

impl LabeledTensor {
    pub fn new(indices: Vec<Index>, data: ArrayD<C64>) -> Result<Self> {
        let dims: Vec<usize> = indices.iter().map(|i| i.dim).collect();
        if data.shape() != dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "data shape {:?} vs index dims {dims:?}",
                data.shape()
            )));
        }
        let mut seen = HashSet::new();
        for i in &indices {
            if !seen.insert(i.label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate label `{}`", i.label)));
            }
        }
        Ok(LabeledTensor { indices, data })
    }

    pub fn from_vec(indices: Vec<Index>, data: Vec<C64>) -> Result<Self> {
        let dims: Vec<usize> = indices.iter().map(|i| i.dim).collect();
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for dims {dims:?}",
                data.len()
            )));
        }
        let arr = ArrayD::from_shape_vec(IxDyn(&dims), data).expect("length checked");
        Self::new(indices, arr)
    }

    /// Matrix `m[row, col]` as a tensor with a ket row index and a bra column index.
    pub fn from_matrix(m: &Array2<C64>, row: &str, col: &str) -> Self {
        let (r, c) = m.dim();
        LabeledTensor {
            indices: vec![Index::ket(row, r), Index::bra(col, c)],
            data: m.clone().into_dyn(),
        }
    }

    pub fn scalar(z: C64) -> Self {
        LabeledTensor {
            indices: vec![],
            data: ArrayD::from_elem(IxDyn(&[]), z),
        }
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.indices.iter().map(|i| i.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.indices
            .iter()
            .position(|i| i.label == label)
            .ok_or_else(|| Error::LabelMismatch(label.to_string()))
    }

    pub fn has(&self, label: &str) -> bool {
        self.indices.iter().any(|i| i.label == label)
    }

    pub fn relabel(mut self, from: &str, to: &str) -> Result<Self> {
        let p = self.position(from)?;
        self.indices[p].label = to.to_string();
        Ok(self)
    }

    pub fn map_labels(mut self, f: impl Fn(&str) -> String) -> Self {
        for i in &mut self.indices {
            i.label = f(&i.label);
        }
        self
    }

    /// Complex conjugate with every orientation reversed (the bra layer).
    pub fn conj(&self) -> Self {
        LabeledTensor {
            indices: self
                .indices
                .iter()
                .map(|i| Index {
                    label: i.label.clone(),
                    dim: i.dim,
                    orient: i.orient.flip(),
                })
                .collect(),
            data: self.data.mapv(|x| x.conj()),
        }
    }

    pub fn scale(mut self, z: C64) -> Self {
        self.data.mapv_inplace(|x| x * z);
        self
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Reorders the axes to the given label order.
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "permutation of {} labels for a rank-{} tensor",
                order.len(),
                self.rank()
            )));
        }
        let axes: Vec<usize> = order.iter().map(|l| self.position(l)).collect::<Result<_>>()?;
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let data = self
            .data
            .view()
            .permuted_axes(IxDyn(&axes))
            .as_standard_layout()
            .into_owned();
        Ok(LabeledTensor {
            indices: axes.iter().map(|&a| self.indices[a].clone()).collect(),
            data,
        })
    }

    /// Flattens to a matrix with the given row labels (in order) and the
    /// remaining or given column labels.
    pub fn matricize(&self, rows: &[&str], cols: &[&str]) -> Result<Array2<C64>> {
        let order: Vec<&str> = rows.iter().chain(cols.iter()).cloned().collect();
        let p = self.permute(&order)?;
        let r: usize = rows.iter().map(|l| self.dim_of(l)).product();
        let c: usize = cols.iter().map(|l| self.dim_of(l)).product();
        let flat: Vec<C64> = p.data.iter().cloned().collect();
        Ok(Array2::from_shape_vec((r, c), flat).expect("sizes agree"))
    }

    pub fn dim_of(&self, label: &str) -> usize {
        self.indices
            .iter()
            .find(|i| i.label == label)
            .map(|i| i.dim)
            .unwrap_or(1)
    }

    pub fn to_vec(&self) -> Array1<C64> {
        Array1::from_iter(self.data.iter().cloned())
    }
}

/// Contracts `a` and `b` over the listed label pairs. Each pair must join a
/// ket with a bra of equal extent. Result axes: `a`'s remaining, then `b`'s.
pub fn contract(a: &LabeledTensor, b: &LabeledTensor, pairs: &[(&str, &str)]) -> Result<LabeledTensor> {
    for &(la_, lb) in pairs {
        let ia = &a.indices[a.position(la_)?];
        let ib = &b.indices[b.position(lb)?];
        if ia.orient == ib.orient {
            return Err(Error::OrientationMismatch(la_.into(), lb.into()));
        }
        if ia.dim != ib.dim {
            return Err(Error::ExtentMismatch(la_.into(), lb.into(), ia.dim, ib.dim));
        }
    }
    let pa: HashSet<&str> = pairs.iter().map(|p| p.0).collect();
    let pb: HashSet<&str> = pairs.iter().map(|p| p.1).collect();
    let rem_a: Vec<&str> = a.labels().into_iter().filter(|l| !pa.contains(l)).collect();
    let rem_b: Vec<&str> = b.labels().into_iter().filter(|l| !pb.contains(l)).collect();
    let ca: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let cb: Vec<&str> = pairs.iter().map(|p| p.1).collect();
    let ma = a.matricize(&rem_a, &ca)?;
    let mb = b.matricize(&cb, &rem_b)?;
    let prod = ma.dot(&mb);
    let mut indices: Vec<Index> = rem_a
        .iter()
        .map(|l| a.indices[a.position(l).unwrap()].clone())
        .collect();
    indices.extend(rem_b.iter().map(|l| b.indices[b.position(l).unwrap()].clone()));
    let dims: Vec<usize> = indices.iter().map(|i| i.dim).collect();
    let data = ArrayD::from_shape_vec(IxDyn(&dims), prod.into_raw_vec_and_offset().0)
        .expect("product size");
    LabeledTensor::new(indices, data)
}

/// Contracts over every label the two tensors share.
pub fn contract_shared(a: &LabeledTensor, b: &LabeledTensor) -> Result<LabeledTensor> {
    let shared: Vec<String> = a
        .indices
        .iter()
        .filter(|i| b.has(&i.label))
        .map(|i| i.label.clone())
        .collect();
    let pairs: Vec<(&str, &str)> = shared.iter().map(|l| (l.as_str(), l.as_str())).collect();
    contract(a, b, &pairs)
}

/// A collection of tensors joined over shared labels.
///
/// Contraction order is chosen greedily and deterministically: at each step
/// the connected pair with the smallest `size(result) - size(a) - size(b)` is
/// merged, ties broken by position.
#[derive(Clone, Debug, Default)]
pub struct Network {
    pub tensors: Vec<LabeledTensor>,
    pub max_entries: Option<usize>,
}

impl Network {
    pub fn new(tensors: Vec<LabeledTensor>) -> Self {
        Network {
            tensors,
            max_entries: None,
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.max_entries = Some(cap);
        self
    }

    pub fn push(&mut self, t: LabeledTensor) {
        self.tensors.push(t);
    }

    /// Contracts everything; the open labels are returned in `output` order.
    pub fn contract(self, output: &[&str]) -> Result<LabeledTensor> {
        let cap = self.max_entries.unwrap_or(DEFAULT_MAX_ENTRIES);
        let mut ts: Vec<LabeledTensor> = self.tensors;
        if ts.is_empty() {
            return Err(Error::InvalidInput("empty network".into()));
        }
        while ts.len() > 1 {
            let mut best: Option<(i128, usize, usize, usize)> = None;
            for i in 0..ts.len() {
                for j in i + 1..ts.len() {
                    let shared: usize = ts[i]
                        .indices
                        .iter()
                        .filter(|x| ts[j].has(&x.label))
                        .map(|x| x.dim)
                        .product();
                    let connected = ts[i].indices.iter().any(|x| ts[j].has(&x.label));
                    if !connected {
                        continue;
                    }
                    let out = ts[i].len() / shared * (ts[j].len() / shared);
                    let cost = out as i128 - ts[i].len() as i128 - ts[j].len() as i128;
                    if !best.is_some_and(|b| cost >= b.0) {
                        best = Some((cost, i, j, out));
                    }
                }
            }
            let (i, j, out) = match best {
                Some((_, i, j, out)) => (i, j, out),
                None => {
                    // disconnected components: outer product of the two smallest
                    let mut order: Vec<usize> = (0..ts.len()).collect();
                    order.sort_by_key(|&k| (ts[k].len(), k));
                    let (i, j) = (order[0].min(order[1]), order[0].max(order[1]));
                    (i, j, ts[i].len() * ts[j].len())
                }
            };
            if out > cap {
                return Err(Error::cap("intermediate tensor entries", out, cap));
            }
            let b = ts.remove(j);
            let a = ts.remove(i);
            ts.insert(i, contract_shared(&a, &b)?);
        }
        let t = ts.pop().expect("one tensor left");
        t.permute(output)
    }
}

/// Orthonormal basis (as columns) of a subspace of `C^ambient`.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub ambient: usize,
    pub basis: Array2<C64>,
}

impl SubspaceBasis {
    pub fn new(basis: Array2<C64>) -> Self {
        SubspaceBasis {
            ambient: basis.nrows(),
            basis,
        }
    }

    pub fn empty(ambient: usize) -> Self {
        SubspaceBasis {
            ambient,
            basis: Array2::zeros((ambient, 0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> Array2<C64> {
        self.basis.dot(&dagger(&self.basis))
    }

    /// `max_k ‖(1 − P) v_k‖ / ‖v_k‖` over the columns of `vs`.
    pub fn residual_of(&self, vs: &Array2<C64>) -> f64 {
        let coeff = dagger(&self.basis).dot(vs);
        let r = vs - &self.basis.dot(&coeff);
        (0..vs.ncols())
            .map(|k| {
                let n = la::norm(&vs.column(k).to_owned());
                if n == 0.0 {
                    0.0
                } else {
                    la::norm(&r.column(k).to_owned()) / n
                }
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation from orthonormality.
    pub fn gram_defect(&self) -> f64 {
        la::max_abs_diff(&dagger(&self.basis).dot(&self.basis), &la::identity(self.dim()))
    }
}

/// `q ⊗ 1` with `q` living on the sites at `pos` of a product space.
pub fn extend_subspace(q: &Array2<C64>, pos: &[usize], dims: &[usize]) -> Array2<C64> {
    let n: usize = dims.iter().product();
    let others: Vec<usize> = (0..dims.len()).filter(|i| !pos.contains(i)).collect();
    let n_other: usize = others.iter().map(|&i| dims[i]).product();
    let k = q.ncols();
    let mut out = Array2::zeros((n, k * n_other));
    let mut digits = vec![0usize; dims.len()];
    for i in 0..n {
        let mut rem = i;
        for d in (0..dims.len()).rev() {
            digits[d] = rem % dims[d];
            rem /= dims[d];
        }
        let sub = pos.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        let oth = others.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        for c in 0..k {
            out[[i, c * n_other + oth]] = q[[sub, c]];
        }
    }
    out
}

/// Orthonormal basis of `{v : ‖m v‖ ≤ tol ‖m‖}` using singular values relative
/// to the largest one.
pub fn nullspace(m: &Array2<C64>, tol: f64) -> Result<SubspaceBasis> {
    let (r, c) = m.dim();
    if c == 0 {
        return Ok(SubspaceBasis::empty(0));
    }
    if r == 0 {
        return Ok(SubspaceBasis::new(la::identity(c)));
    }
    let (_, s, vt) = m.svddc(JobSvd::All)?;
    let vt = vt.expect("vt requested");
    let rank = la::rank_of(s.as_slice().expect("contiguous"), tol);
    let basis = vt.slice(s![rank.., ..]).t().mapv(|x| x.conj());
    Ok(SubspaceBasis::new(basis))
}

/// Orthonormal basis of the span of the columns of `vectors`.
pub fn span_basis(vectors: &Array2<C64>, tol: f64) -> Result<SubspaceBasis> {
    if vectors.ncols() == 0 {
        return Ok(SubspaceBasis::empty(vectors.nrows()));
    }
    Ok(SubspaceBasis::new(la::orth(vectors, tol)?))
}

fn same_ambient(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<()> {
    if a.ambient != b.ambient {
        return Err(Error::DimensionMismatch(format!(
            "ambient dimensions {} and {}",
            a.ambient, b.ambient
        )));
    }
    Ok(())
}

/// Intersection of two subspaces: vectors `Q_a x` with `‖(1 − P_b) Q_a x‖ ≤ tol`.
pub fn subspace_intersection(a: &SubspaceBasis, b: &SubspaceBasis, tol: f64) -> Result<SubspaceBasis> {
    same_ambient(a, b)?;
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(SubspaceBasis::empty(a.ambient));
    }
    let resid = &a.basis - &b.basis.dot(&dagger(&b.basis).dot(&a.basis));
    let k = a.dim();
    let (_, s, vt) = resid.svddc(JobSvd::All)?;
    let vt = vt.expect("vt requested");
    let mut cols = Vec::new();
    for j in 0..k {
        let sj = if j < s.len() { s[j] } else { 0.0 };
        if sj <= tol {
            cols.push(j);
        }
    }
    let mut basis = Array2::zeros((a.ambient, cols.len()));
    for (n, &j) in cols.iter().enumerate() {
        let x = vt.row(j).mapv(|z| z.conj());
        basis.column_mut(n).assign(&a.basis.dot(&x));
    }
    Ok(SubspaceBasis::new(basis))
}

/// Spectral norm of `(1 − P_b) Q_a`; zero iff `a ⊆ b`.
pub fn containment_residual(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    same_ambient(a, b)?;
    if a.dim() == 0 {
        return Ok(0.0);
    }
    let resid = &a.basis - &b.basis.dot(&dagger(&b.basis).dot(&a.basis));
    Ok(la::singular_values(&resid)?.first().cloned().unwrap_or(0.0))
}

/// Largest of the two mutual containment residuals, or `f64::INFINITY` if the
/// dimensions differ.
pub fn subspace_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    same_ambient(a, b)?;
    if a.dim() != b.dim() {
        return Ok(f64::INFINITY);
    }
    Ok(containment_residual(a, b)?.max(containment_residual(b, a)?))
}

pub fn subspace_equal(a: &SubspaceBasis, b: &SubspaceBasis, tol: f64) -> Result<bool> {
    Ok(subspace_distance(a, b)? <= tol)
}

fn check_factorization(len: usize, dims: &[usize]) -> Result<()> {
    let n: usize = dims.iter().product();
    if n != len {
        return Err(Error::DimensionMismatch(format!(
            "state of length {len} does not factor as {dims:?}"
        )));
    }
    Ok(())
}

/// Moves the `sites` factors to the front and flattens to
/// `(prod dims[sites], rest)`.
fn split_sites(state: &Array1<C64>, dims: &[usize], sites: &[usize]) -> Result<(Array2<C64>, Vec<usize>)> {
    check_factorization(state.len(), dims)?;
    let mut seen = vec![false; dims.len()];
    for &s in sites {
        if s >= dims.len() || seen[s] {
            return Err(Error::InvalidInput(format!("bad site list {sites:?}")));
        }
        seen[s] = true;
    }
    let mut order: Vec<usize> = sites.to_vec();
    order.extend((0..dims.len()).filter(|s| !seen[*s]));
    let t = ArrayD::from_shape_vec(IxDyn(dims), state.to_vec()).expect("checked");
    let p = t.permuted_axes(IxDyn(&order)).as_standard_layout().into_owned();
    let dk: usize = sites.iter().map(|&s| dims[s]).product();
    let dr = state.len() / dk.max(1);
    let flat = p.into_raw_vec_and_offset().0;
    Ok((Array2::from_shape_vec((dk, dr), flat).expect("size"), order))
}

/// Unit-trace reduced density operator of a pure state on the kept sites.
pub fn partial_trace(state: &Array1<C64>, dims: &[usize], keep: &[usize]) -> Result<Array2<C64>> {
    let (m, _) = split_sites(state, dims, keep)?;
    let mut rho = m.dot(&dagger(&m));
    let tr: f64 = rho.diag().iter().map(|x| x.re).sum();
    if tr <= 0.0 {
        return Err(Error::Numerical("zero state".into()));
    }
    rho.mapv_inplace(|x| x / tr);
    Ok(rho)
}

/// Applies `op` (acting on the tensor product of `sites`, in that order) to
/// a state vector without forming the global operator.
pub fn apply_local_operator(
    state: &Array1<C64>,
    dims: &[usize],
    sites: &[usize],
    op: &Array2<C64>,
) -> Result<Array1<C64>> {
    apply_local_map(state, dims, sites, |m| {
        if op.dim() != (m.nrows(), m.nrows()) {
            return Err(Error::DimensionMismatch(format!(
                "operator {:?} on {} local states",
                op.dim(),
                m.nrows()
            )));
        }
        Ok(op.dot(m))
    })
}

/// Applies `f` to the state reshaped as (local states of `sites`) × (rest);
/// `f` must preserve the shape.
pub fn apply_local_map(
    state: &Array1<C64>,
    dims: &[usize],
    sites: &[usize],
    f: impl FnOnce(&Array2<C64>) -> Result<Array2<C64>>,
) -> Result<Array1<C64>> {
    let (m, order) = split_sites(state, dims, sites)?;
    let out = f(&m)?;
    if out.dim() != m.dim() {
        return Err(Error::DimensionMismatch("local map changed the shape".into()));
    }
    let pdims: Vec<usize> = order.iter().map(|&s| dims[s]).collect();
    let t = ArrayD::from_shape_vec(IxDyn(&pdims), out.into_raw_vec_and_offset().0).expect("size");
    let mut inv = vec![0; order.len()];
    for (k, &o) in order.iter().enumerate() {
        inv[o] = k;
    }
    let back = t.permuted_axes(IxDyn(&inv)).as_standard_layout().into_owned();
    Ok(Array1::from_vec(back.into_raw_vec_and_offset().0))
}

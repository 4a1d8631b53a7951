//! Translation-invariant MPS: the map `P(A)`, injectivity, blocking, the
//! subspaces `S_k`, parent Hamiltonians and closure states.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CharacterTable, Representation};
use crate::la::{self, dagger};
use crate::tensor::{self, extend_subspace, span_basis, SubspaceBasis};

pub const DEFAULT_STATE_CAP: usize = 1 << 20;
pub const RANK_TOL: f64 = 1e-9;
/// Largest dense basis (`rows × columns`) built by [`ground_space`].
pub const DENSE_ENTRY_CAP: usize = 1 << 26;

/// Matrices `A^i`, `i = 0..d`, each `D × D`.
#[derive(Clone, Debug)]
pub struct MpsTensor {
    pub mats: Vec<Array2<C64>>,
}

impl MpsTensor {
    pub fn new(mats: Vec<Array2<C64>>) -> Result<Self> {
        let first = mats
            .first()
            .ok_or_else(|| Error::InvalidInput("no physical levels".into()))?;
        let dd = first.nrows();
        if mats.iter().any(|m| m.dim() != (dd, dd)) {
            return Err(Error::DimensionMismatch("matrices must be square and equal-sized".into()));
        }
        Ok(MpsTensor { mats })
    }

    pub fn phys_dim(&self) -> usize {
        self.mats.len()
    }

    pub fn bond_dim(&self) -> usize {
        self.mats[0].nrows()
    }

    /// Random complex Gaussian matrices averaged over `U_g · U_g†`.
    pub fn random_twirled(rep: &Representation, d: usize, rng: &mut ChaCha8Rng) -> Self {
        let dd = rep.dim();
        let n = rep.mats.len() as f64;
        let mats = (0..d)
            .map(|_| {
                let x = la::gaussian_matrix(rng, dd, dd);
                let mut acc = Array2::zeros((dd, dd));
                for u in &rep.mats {
                    acc += &u.dot(&x).dot(&dagger(u));
                }
                acc.mapv(|z| z / n)
            })
            .collect();
        MpsTensor { mats }
    }

    pub fn random(d: usize, bond: usize, rng: &mut ChaCha8Rng) -> Self {
        MpsTensor {
            mats: (0..d).map(|_| la::gaussian_matrix(rng, bond, bond)).collect(),
        }
    }

    /// `d × D²` matrix whose row `i` is `A^i` flattened row-major.
    pub fn projector_map(&self) -> Array2<C64> {
        let dd = self.bond_dim();
        let mut p = Array2::zeros((self.phys_dim(), dd * dd));
        for (i, m) in self.mats.iter().enumerate() {
            p.row_mut(i)
                .assign(&Array1::from_iter(m.iter().cloned()));
        }
        p
    }

    pub fn rank(&self) -> Result<usize> {
        la::rank(&self.projector_map(), RANK_TOL)
    }

    pub fn is_injective(&self) -> Result<bool> {
        Ok(self.rank()? == self.bond_dim().pow(2))
    }

    /// Shrinks the physical space to the range of `P(A)`. Returns the new
    /// tensor and the isometry `W` (`d × r`) with `A^i = Σ_k W[i,k] A'^k`.
    pub fn reduce_to_range_with_isometry(&self) -> Result<(MpsTensor, Array2<C64>)> {
        let p = self.projector_map();
        let (u, s, _) = la::svd(&p)?;
        let r = la::rank_of(&s, RANK_TOL);
        if r == 0 {
            return Err(Error::InvalidInput("zero tensor".into()));
        }
        let w = u.slice(s![.., ..r]).to_owned();
        let reduced = dagger(&w).dot(&p);
        let dd = self.bond_dim();
        let mats = (0..r)
            .map(|k| Array2::from_shape_vec((dd, dd), reduced.row(k).to_vec()).expect("D x D"))
            .collect();
        Ok((MpsTensor { mats }, w))
    }

    pub fn reduce_to_range(&self) -> Result<MpsTensor> {
        Ok(self.reduce_to_range_with_isometry()?.0)
    }

    /// `B^{(i1..ik)} = A^{i1} ··· A^{ik}` with `i1` the most significant digit.
    pub fn block(&self, k: usize, cap: usize) -> Result<MpsTensor> {
        if k == 0 {
            return Err(Error::InvalidInput("block size must be at least 1".into()));
        }
        let d = self.phys_dim();
        let size = d
            .checked_pow(k as u32)
            .filter(|&n| n <= cap)
            .ok_or_else(|| Error::cap("blocked physical dimension", d.saturating_pow(k as u32), cap))?;
        let mut mats = self.mats.clone();
        for _ in 1..k {
            let mut next = Vec::with_capacity(mats.len() * d);
            for m in &mats {
                for a in &self.mats {
                    next.push(m.dot(a));
                }
            }
            mats = next;
        }
        debug_assert_eq!(mats.len(), size);
        Ok(MpsTensor { mats })
    }

    /// Largest `‖U_g A^i U_g† − A^i‖`.
    pub fn invariance_defect(&self, rep: &Representation) -> f64 {
        let mut worst: f64 = 0.0;
        for u in &rep.mats {
            for a in &self.mats {
                let b = u.dot(a).dot(&dagger(u));
                worst = worst.max(la::max_abs_diff(&b, a));
            }
        }
        worst
    }

    pub fn is_g_injective(&self, rep: &Representation) -> Result<bool> {
        if rep.dim() != self.bond_dim() {
            return Err(Error::DimensionMismatch(format!(
                "representation of dimension {} on bond {}",
                rep.dim(),
                self.bond_dim()
            )));
        }
        if self.invariance_defect(rep) > 1e-10 {
            return Ok(false);
        }
        Ok(self.rank()? == commutant_dim(rep))
    }

    /// Orthonormal basis of `S_k = {Σ tr[A^{i1}···A^{ik} X] |i1..ik⟩}`.
    pub fn s_subspace(&self, k: usize, cap: usize) -> Result<SubspaceBasis> {
        let b = self.block(k, cap)?;
        // tr[B X] = Σ B[a,b] X[b,a]: the columns of P(B) sweep X over E_ba.
        span_basis(&b.projector_map(), RANK_TOL)
    }

    /// `Σ tr[A^{i1}···A^{iL} K] |i1..iL⟩`.
    pub fn state(&self, l: usize, closure: &Array2<C64>, cap: usize) -> Result<Array1<C64>> {
        let dd = self.bond_dim();
        if closure.dim() != (dd, dd) {
            return Err(Error::DimensionMismatch("closure must be D x D".into()));
        }
        let b = self.block(l, cap)?;
        let kt = Array1::from_iter(closure.t().iter().cloned());
        Ok(b.projector_map().dot(&kt))
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = MpsDoc {
            d: self.phys_dim(),
            bond: self.bond_dim(),
            matrices: self
                .mats
                .iter()
                .map(|m| m.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: MpsDoc = serde_json::from_str(s)?;
        if doc.matrices.len() != doc.d {
            return Err(Error::DimensionMismatch("matrix count differs from d".into()));
        }
        let mats = doc
            .matrices
            .iter()
            .map(|m| {
                let v: Vec<C64> = m.iter().map(|p| C64::new(p[0], p[1])).collect();
                Array2::from_shape_vec((doc.bond, doc.bond), v)
                    .map_err(|_| Error::DimensionMismatch("matrix size differs from D^2".into()))
            })
            .collect::<Result<_>>()?;
        MpsTensor::new(mats)
    }
}

#[derive(Serialize, Deserialize)]
struct MpsDoc {
    d: usize,
    #[serde(rename = "D")]
    bond: usize,
    matrices: Vec<Vec<[f64; 2]>>,
}

/// Dimension of `{X : [X, U_g] = 0 ∀g}`, i.e. `(1/|G|) Σ_g |χ(g)|²`.
pub fn commutant_dim(rep: &Representation) -> usize {
    let n = rep.mats.len() as f64;
    let s: f64 = (0..rep.mats.len()).map(|g| rep.character(g).norm_sqr()).sum();
    (s / n).round() as usize
}

/// A projector-valued term acting on consecutive sites.
#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub sites: Vec<usize>,
    pub op: Array2<C64>,
}

/// Terms `1 − Π_{S_2}` on every pair `(i, i+1 mod L)`.
pub fn parent_hamiltonian_1d(a: &MpsTensor, l: usize) -> Result<Vec<LocalTerm>> {
    if l < 4 {
        return Err(Error::InvalidInput("need L >= 4".into()));
    }
    let s2 = a.s_subspace(2, DEFAULT_STATE_CAP)?;
    let h = la::identity(s2.ambient) - s2.projector();
    Ok((0..l)
        .map(|i| LocalTerm {
            sites: vec![i, (i + 1) % l],
            op: h.clone(),
        })
        .collect())
}

/// Common kernel of all terms, obtained by intersecting term kernels one at a
/// time (never forming the `d^L`-dimensional Hamiltonian). The running basis
/// starts as the first term's kernel; `cap` bounds the state dimension and
/// [`DENSE_ENTRY_CAP`] the number of basis entries.
pub fn ground_space(terms: &[LocalTerm], dims: &[usize], tol: f64, cap: usize) -> Result<SubspaceBasis> {
    let total: usize = dims.iter().product();
    if total > cap {
        return Err(Error::cap("state dimension", total, cap));
    }
    let Some((first, rest)) = terms.split_first() else {
        return Ok(SubspaceBasis::new(la::identity(total)));
    };
    let k0 = tensor::nullspace(&first.op, tol)?;
    let other: usize = total / first.sites.iter().map(|&i| dims[i]).product::<usize>();
    let entries = total.saturating_mul(k0.dim() * other);
    if entries > DENSE_ENTRY_CAP {
        return Err(Error::cap("dense kernel basis entries", entries, DENSE_ENTRY_CAP));
    }
    let mut q = extend_subspace(&k0.basis, &first.sites, dims);
    for t in rest {
        if q.ncols() == 0 {
            break;
        }
        let mut hq = Array2::zeros(q.dim());
        for k in 0..q.ncols() {
            let v = q.column(k).to_owned();
            let w = tensor::apply_local_operator(&v, dims, &t.sites, &t.op)?;
            hq.column_mut(k).assign(&w);
        }
        // ‖h q x‖ relative to ‖h‖ = 1 for projectors; q has orthonormal
        // columns, so rows ≥ columns and the thin factor is square
        let (_, s, vt) = la::svd(&hq)?;
        let keep: Vec<usize> = (0..q.ncols()).filter(|&j| s[j] <= tol).collect();
        let mut next = Array2::zeros((total, keep.len()));
        for (n, &j) in keep.iter().enumerate() {
            let x = vt.row(j).mapv(|z| z.conj());
            next.column_mut(n).assign(&q.dot(&x));
        }
        q = next;
    }
    Ok(SubspaceBasis::new(q))
}

/// `C^{(i1..ik)} = A_1^{i1} ··· A_k^{ik}` for a chain of different tensors.
pub fn chain(tensors: &[&MpsTensor], cap: usize) -> Result<MpsTensor> {
    let first = tensors
        .first()
        .ok_or_else(|| Error::InvalidInput("empty chain".into()))?;
    let total: usize = tensors.iter().map(|t| t.phys_dim()).product();
    if total > cap {
        return Err(Error::cap("chain physical dimension", total, cap));
    }
    let mut mats = first.mats.clone();
    for t in &tensors[1..] {
        if t.bond_dim() != first.bond_dim() {
            return Err(Error::DimensionMismatch("bond dimensions differ along the chain".into()));
        }
        mats = mats.iter().flat_map(|m| t.mats.iter().map(move |a| m.dot(a))).collect();
    }
    Ok(MpsTensor { mats })
}

/// `S(A_1, …, A_k) = span{Σ tr[A_1^{i1} ··· A_k^{ik} X] |i1..ik⟩}`.
pub fn chain_subspace(tensors: &[&MpsTensor], cap: usize) -> Result<SubspaceBasis> {
    span_basis(&chain(tensors, cap)?.projector_map(), RANK_TOL)
}

#[derive(Clone, Debug, Serialize)]
pub struct IntersectionReport {
    pub intersection_dim: usize,
    pub merged_dim: usize,
    /// Subspace distance between the intersection and the merged span.
    pub residual: f64,
}

/// `(S(A,B) ⊗ C^{d_C}) ∩ (C^{d_A} ⊗ S(B,C))` against `S(A,B,C)`.
pub fn intersection_property_1d(a: &MpsTensor, b: &MpsTensor, c: &MpsTensor) -> Result<IntersectionReport> {
    let cap = DEFAULT_STATE_CAP;
    let s12 = chain_subspace(&[a, b], cap)?;
    let s23 = chain_subspace(&[b, c], cap)?;
    let s123 = chain_subspace(&[a, b, c], cap)?;
    let left = SubspaceBasis::new(la::kron(&s12.basis, &la::identity(c.phys_dim())));
    let right = SubspaceBasis::new(la::kron(&la::identity(a.phys_dim()), &s23.basis));
    let inter = tensor::subspace_intersection(&left, &right, RANK_TOL)?;
    Ok(IntersectionReport {
        intersection_dim: inter.dim(),
        merged_dim: s123.dim(),
        residual: tensor::subspace_distance(&inter, &s123)?,
    })
}

/// Recovers the boundary of a closed chain with the pseudo-inverse of
/// `P(A^{⊗L})` and returns its coefficients `tr[U_g† X Δ]` for every `g`.
/// Only the `G`-invariant part of the boundary is visible.
pub fn closure_coefficients(
    a: &MpsTensor,
    rep: &Representation,
    table: &CharacterTable,
    l: usize,
    psi: &Array1<C64>,
) -> Result<Vec<C64>> {
    let b = a.block(l, DEFAULT_STATE_CAP)?;
    let p = b.projector_map();
    if psi.len() != p.nrows() {
        return Err(Error::DimensionMismatch("state vs blocked tensor".into()));
    }
    let x = la::pinv(&p, RANK_TOL)?.dot(psi);
    let dd = a.bond_dim();
    // columns of P(B) index X^T
    let xt = Array2::from_shape_vec((dd, dd), x.to_vec()).expect("D^2 entries");
    let xm = xt.t().to_owned();
    let delta = rep.delta_matrix(table)?;
    Ok(rep
        .mats
        .iter()
        .map(|u| dagger(u).dot(&xm).dot(&delta).diag().sum())
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundSpaceReport1d {
    pub dim: usize,
    pub predicted: usize,
    /// Subspace distance between the kernel and the span of `|M(A|Π_i)⟩`.
    pub irrep_closure_residual: f64,
    /// Subspace distance between the kernel and the span of `|M(A|U_g)⟩`.
    pub group_closure_residual: f64,
    /// Largest `‖h_i ψ‖` over kernel vectors and terms.
    pub frustration: f64,
}

pub fn ground_space_structure_1d(
    a: &MpsTensor,
    rep: &Representation,
    table: &CharacterTable,
    l: usize,
) -> Result<GroundSpaceReport1d> {
    let terms = parent_hamiltonian_1d(a, l)?;
    let dims = vec![a.phys_dim(); l];
    let gs = ground_space(&terms, &dims, RANK_TOL, DEFAULT_STATE_CAP)?;
    let mults = rep.multiplicities(table);
    let predicted = mults.iter().filter(|&&m| m > 0).count();
    let total = gs.ambient;

    let mut irrep_states = Vec::new();
    for (i, &m) in mults.iter().enumerate() {
        if m > 0 {
            irrep_states.push(a.state(l, &rep.irrep_projector(table, i), DEFAULT_STATE_CAP)?);
        }
    }
    let group_states: Vec<Array1<C64>> = rep
        .mats
        .iter()
        .map(|u| a.state(l, u, DEFAULT_STATE_CAP))
        .collect::<Result<_>>()?;
    let as_cols = |vs: &[Array1<C64>]| {
        let mut m = Array2::zeros((total, vs.len()));
        for (k, v) in vs.iter().enumerate() {
            m.column_mut(k).assign(v);
        }
        m
    };
    let irrep_span = span_basis(&as_cols(&irrep_states), RANK_TOL)?;
    let group_span = span_basis(&as_cols(&group_states), RANK_TOL)?;
    let mut frustration: f64 = 0.0;
    for t in &terms {
        for k in 0..gs.dim() {
            let w = tensor::apply_local_operator(&gs.basis.column(k).to_owned(), &dims, &t.sites, &t.op)?;
            frustration = frustration.max(la::norm(&w));
        }
    }
    Ok(GroundSpaceReport1d {
        dim: gs.dim(),
        predicted,
        irrep_closure_residual: tensor::subspace_distance(&gs, &irrep_span)?,
        group_closure_residual: tensor::subspace_distance(&gs, &group_span)?,
        frustration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::FiniteGroup;
    use crate::la::{c, rng, ONE, ZERO};

    fn pauli_x() -> Array2<C64> {
        Array2::from_shape_vec((2, 2), vec![ZERO, ONE, ONE, ZERO]).unwrap()
    }

    fn z2_tensor() -> MpsTensor {
        MpsTensor::new(vec![la::identity(2), pauli_x()]).unwrap()
    }

    #[test]
    fn z2_projector_rows() {
        let p = z2_tensor().projector_map();
        assert_eq!(p.row(1).to_vec(), vec![ZERO, ONE, ONE, ZERO]);
        assert_eq!(z2_tensor().rank().unwrap(), 2);
        assert!(!z2_tensor().is_injective().unwrap());
    }

    #[test]
    fn duplicated_rows_reduce() {
        let z = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, c(-1.0)]).unwrap();
        let a = MpsTensor::new(vec![la::identity(2), z.clone(), z.mapv(|x| x * 2.0)]).unwrap();
        let (r, w) = a.reduce_to_range_with_isometry().unwrap();
        assert_eq!(r.phys_dim(), 2);
        assert!(la::max_abs_diff(&w.dot(&r.projector_map()), &a.projector_map()) < 1e-12);
    }

    #[test]
    fn aklt_injective_after_blocking() {
        let h = 1.0 / 2f64.sqrt();
        let x = pauli_x().mapv(|v| v * h);
        let y = Array2::from_shape_vec((2, 2), vec![ZERO, -C64::i(), C64::i(), ZERO])
            .unwrap()
            .mapv(|v| v * h);
        let z = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, c(-1.0)])
            .unwrap()
            .mapv(|v| v * h);
        let a = MpsTensor::new(vec![x, y, z]).unwrap();
        assert!(!a.is_injective().unwrap());
        assert!(a.block(2, 1 << 10).unwrap().is_injective().unwrap());
    }

    #[test]
    fn g_injectivity_examples() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::new(&g, vec![la::identity(2), pauli_x()]).unwrap();
        assert!(z2_tensor().is_g_injective(&rep).unwrap());
        let z = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, c(-1.0)]).unwrap();
        let bad = MpsTensor::new(vec![la::identity(2), z]).unwrap();
        assert!(!bad.is_g_injective(&rep).unwrap());
    }

    #[test]
    fn s2_of_z2_tensor_is_parity_sectors() {
        let s2 = z2_tensor().s_subspace(2, 1 << 10).unwrap();
        assert_eq!(s2.dim(), 2);
    }

    #[test]
    fn blocking_preserves_state() {
        let a = MpsTensor::random(2, 2, &mut rng(4));
        let b = a.block(2, 1 << 10).unwrap();
        let k = la::identity(2);
        let v1 = a.state(4, &k, 1 << 10).unwrap();
        let v2 = b.state(2, &k, 1 << 10).unwrap();
        assert!(la::norm(&(&v1 - &v2)) < 1e-10 * la::norm(&v1));
    }

    #[test]
    fn json_round_trip() {
        let a = MpsTensor::random(3, 2, &mut rng(2));
        let b = MpsTensor::from_json(&a.to_json().unwrap()).unwrap();
        assert!(la::max_abs_diff(&a.projector_map(), &b.projector_map()) < 1e-14);
    }
}

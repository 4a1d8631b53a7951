//! PEPS site tensors `A[i, l, t, r, b]` (l, t kets; r, b bras), their
//! constructors, and single-tensor symmetry checks. Lattice contraction lives
//! in [`lattice`], parent Hamiltonians in [`hamiltonian`], ground spaces in
//! [`ground`].

pub mod ground;
pub mod hamiltonian;
pub mod intersection;
pub mod lattice;

use ndarray::{Array1, Array2, Array5, ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CharacterTable, FiniteGroup, Representation};
use crate::la::{self, c, dagger, ONE};

pub const INVARIANCE_TOL: f64 = 1e-10;
pub const DEFAULT_GROUP_CAP: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Leg {
    L,
    T,
    R,
    B,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::L, Leg::T, Leg::R, Leg::B];

    pub fn axis(self) -> usize {
        match self {
            Leg::L => 1,
            Leg::T => 2,
            Leg::R => 3,
            Leg::B => 4,
        }
    }

    pub fn is_ket(self) -> bool {
        matches!(self, Leg::L | Leg::T)
    }
}

#[derive(Clone, Debug)]
pub struct PepsTensor {
    pub data: Array5<C64>,
}

impl PepsTensor {
    pub fn new(data: Array5<C64>) -> Result<Self> {
        let s = data.shape();
        if s[1] != s[2] || s[1] != s[3] || s[1] != s[4] {
            return Err(Error::DimensionMismatch(format!("non-uniform bond dims {s:?}")));
        }
        if s[0] == 0 || s[1] == 0 {
            return Err(Error::InvalidInput("empty tensor".into()));
        }
        Ok(PepsTensor { data })
    }

    pub fn phys_dim(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn bond_dim(&self) -> usize {
        self.data.shape()[1]
    }

    /// `d × D⁴` matrix, row `i` = `A^i` flattened over `(l, t, r, b)`.
    pub fn projector_map(&self) -> Array2<C64> {
        let d = self.phys_dim();
        let flat: Vec<C64> = self.data.iter().cloned().collect();
        Array2::from_shape_vec((d, flat.len() / d), flat).expect("row-major")
    }

    pub fn from_projector_map(p: &Array2<C64>, bond: usize) -> Result<Self> {
        if p.ncols() != bond.pow(4) {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for bond dimension {bond}",
                p.ncols()
            )));
        }
        let flat: Vec<C64> = p.iter().cloned().collect();
        let data = Array5::from_shape_vec((p.nrows(), bond, bond, bond, bond), flat)
            .expect("sizes agree");
        PepsTensor::new(data)
    }

    pub fn rank(&self) -> Result<usize> {
        la::rank(&self.projector_map(), 1e-9)
    }

    pub fn scale(&self, s: f64) -> Self {
        PepsTensor {
            data: self.data.mapv(|x| x * s),
        }
    }

    /// `A' = Σ_j M[i, j] A^j` on the physical index.
    pub fn deform(&self, m: &Array2<C64>) -> Result<Self> {
        if m.ncols() != self.phys_dim() {
            return Err(Error::DimensionMismatch("deformation size".into()));
        }
        PepsTensor::from_projector_map(&m.dot(&self.projector_map()), self.bond_dim())
    }

    /// Replaces leg `leg` by `new[.., a, ..] = Σ_b m[a, b] A[.., b, ..]`.
    pub fn transform_leg(&self, leg: Leg, m: &Array2<C64>) -> Self {
        PepsTensor {
            data: transform_axis(&self.data.clone().into_dyn(), leg.axis(), m)
                .into_dimensionality()
                .expect("rank 5"),
        }
    }

    /// Applies `U_g` on ket legs and `Ū_g` on bra legs of the selected legs.
    pub fn act(&self, rep: &Representation, g: usize, legs: &[Leg]) -> Self {
        let u = rep.mat(g);
        let ub = u.mapv(|x| x.conj());
        let mut out = self.clone();
        for &leg in legs {
            out = out.transform_leg(leg, if leg.is_ket() { u } else { &ub });
        }
        out
    }

    /// Largest violation of `(U_g⊗U_g⊗Ū_g⊗Ū_g) vec(A^i) = vec(A^i)`.
    pub fn invariance_defect(&self, rep: &Representation) -> f64 {
        (0..rep.mats.len())
            .map(|g| max_abs_diff5(&self.act(rep, g, &Leg::ALL).data, &self.data))
            .fold(0.0, f64::max)
    }

    /// `P(A)† P(A)` as a `D⁴ × D⁴` matrix.
    pub fn gram(&self) -> Array2<C64> {
        let p = self.projector_map();
        dagger(&p).dot(&p)
    }

    pub fn is_g_injective_2d(&self, rep: &Representation, table: &CharacterTable) -> Result<bool> {
        if rep.dim() != self.bond_dim() {
            return Err(Error::DimensionMismatch("representation vs bond dimension".into()));
        }
        if !rep.is_semiregular(table) {
            return Err(Error::NotSemiRegular);
        }
        if self.invariance_defect(rep) > INVARIANCE_TOL {
            return Ok(false);
        }
        Ok(self.rank()? == four_leg_invariant_dim(rep))
    }

    /// Regular representation and `P(A)†P(A)` equal to the four-leg twirl.
    pub fn is_g_isometric(&self, rep: &Representation) -> bool {
        self.isometry_defect(rep).is_some_and(|d| d <= INVARIANCE_TOL)
    }

    /// `‖P(A)†P(A) − Tw‖_max`, or `None` if `rep` is not the regular representation.
    pub fn isometry_defect(&self, rep: &Representation) -> Option<f64> {
        if rep.dim() != self.bond_dim() || !is_regular(rep) {
            return None;
        }
        Some(la::max_abs_diff(&self.gram(), &rep.four_leg_twirl()))
    }

    /// Orthogonal projector onto the support `range(P(A)†)` of the virtual map.
    pub fn support_projector(&self) -> Result<Array2<C64>> {
        let q = la::orth(&dagger(&self.projector_map()), 1e-9)?;
        Ok(q.dot(&dagger(&q)))
    }

    /// Shrinks the physical space to the range of `P(A)`.
    pub fn reduce_to_range(&self) -> Result<Self> {
        let p = self.projector_map();
        let (u, s, _) = la::svd(&p)?;
        let r = la::rank_of(&s, 1e-9);
        if r == 0 {
            return Err(Error::InvalidInput("zero tensor".into()));
        }
        let w = u.slice(ndarray::s![.., ..r]).to_owned();
        PepsTensor::from_projector_map(&dagger(&w).dot(&p), self.bond_dim())
    }

    /// `‖(g on legs S) A − (g⁻¹ on the other legs) A‖_max`: the single-tensor
    /// string-move identity.
    pub fn local_move_defect(&self, rep: &Representation, g: usize, subset: &[Leg]) -> f64 {
        let rest: Vec<Leg> = Leg::ALL.iter().cloned().filter(|l| !subset.contains(l)).collect();
        let lhs = self.act(rep, g, subset);
        let rhs = self.act(rep, rep.group.inv(g), &rest);
        max_abs_diff5(&lhs.data, &rhs.data)
    }

    /// Largest local-move defect over every element and all 16 leg subsets.
    pub fn all_local_moves_defect(&self, rep: &Representation) -> f64 {
        let mut worst: f64 = 0.0;
        for g in 0..rep.mats.len() {
            for mask in 0..16u8 {
                let subset: Vec<Leg> = Leg::ALL
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, l)| *l)
                    .collect();
                worst = worst.max(self.local_move_defect(rep, g, &subset));
            }
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TensorDoc {
            dims: self.data.shape().to_vec(),
            data: self.data.iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: TensorDoc = serde_json::from_str(s)?;
        if doc.dims.len() != 5 {
            return Err(Error::DimensionMismatch("expected five dims".into()));
        }
        let n: usize = doc.dims.iter().product();
        if n != doc.data.len() || n == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for dims {:?}",
                doc.data.len(),
                doc.dims
            )));
        }
        let v: Vec<C64> = doc.data.iter().map(|p| C64::new(p[0], p[1])).collect();
        let d = &doc.dims;
        PepsTensor::new(Array5::from_shape_vec((d[0], d[1], d[2], d[3], d[4]), v).expect("checked"))
    }
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    dims: Vec<usize>,
    data: Vec<[f64; 2]>,
}

pub(crate) fn max_abs_diff5(a: &Array5<C64>, b: &Array5<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// `new[.., a, ..] = Σ_b m[a, b] t[.., b, ..]` along `axis`.
pub(crate) fn transform_axis(t: &ArrayD<C64>, axis: usize, m: &Array2<C64>) -> ArrayD<C64> {
    let nd = t.ndim();
    let mut perm: Vec<usize> = vec![axis];
    perm.extend((0..nd).filter(|&k| k != axis));
    let moved = t.view().permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned();
    let n = moved.shape()[0];
    let rest = moved.len() / n.max(1);
    let mat = Array2::from_shape_vec((n, rest), moved.into_raw_vec_and_offset().0).expect("size");
    let out = m.dot(&mat);
    let mut shape: Vec<usize> = perm.iter().map(|&k| t.shape()[k]).collect();
    shape[0] = m.nrows();
    let back = ArrayD::from_shape_vec(IxDyn(&shape), out.into_raw_vec_and_offset().0).expect("size");
    let mut inv = vec![0; nd];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    back.permuted_axes(IxDyn(&inv)).as_standard_layout().into_owned()
}

/// Dimension of the four-leg invariant subspace, `(1/|G|) Σ_g |χ(g)|⁴`.
pub fn four_leg_invariant_dim(rep: &Representation) -> usize {
    let n = rep.mats.len() as f64;
    let s: f64 = (0..rep.mats.len()).map(|g| rep.character(g).norm_sqr().powi(2)).sum();
    (s / n).round() as usize
}

/// True when `rep` coincides with the left-regular representation.
pub fn is_regular(rep: &Representation) -> bool {
    let reg = Representation::regular(&rep.group);
    rep.dim() == reg.dim()
        && rep
            .mats
            .iter()
            .zip(&reg.mats)
            .all(|(a, b)| la::max_abs_diff(a, b) < 1e-12)
}

/// Quantum-double tensor with bond colours `l = p, t = q, r = r, b = s` and
/// physical colour `(p⁻¹q, q⁻¹r, r⁻¹s)`, scaled so that `P(K)†P(K)` is the
/// four-leg twirl of the regular representation.
pub fn double_model_tensor(g: &FiniteGroup) -> Result<PepsTensor> {
    let n = g.order();
    if n > DEFAULT_GROUP_CAP {
        return Err(Error::cap("group order", n, DEFAULT_GROUP_CAP));
    }
    let d = n * n * n;
    let mut data = Array5::zeros((d, n, n, n, n));
    let w = c(1.0 / (n as f64).sqrt());
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let a = g.mul(g.inv(p), q);
                    let b = g.mul(g.inv(q), r);
                    let cc = g.mul(g.inv(r), s);
                    data[[a * n * n + b * n + cc, p, q, r, s]] = w;
                }
            }
        }
    }
    PepsTensor::new(data)
}

/// The two corner pairings of the qubit tensor `Σ |r+s⟩ |r,s⟩⟨r,s|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KitaevPairing {
    /// `l = b` and `t = r`: strings turn at the north-east and south-west corners.
    NeSw,
    /// `l = t` and `r = b`.
    NwSe,
}

pub fn kitaev_t_tensor(pairing: KitaevPairing) -> PepsTensor {
    let mut data = Array5::zeros((2, 2, 2, 2, 2));
    for x in 0..2 {
        for y in 0..2 {
            let i = (x + y) % 2;
            match pairing {
                KitaevPairing::NeSw => data[[i, x, y, y, x]] = ONE,
                KitaevPairing::NwSe => data[[i, x, x, y, y]] = ONE,
            }
        }
    }
    PepsTensor { data }
}

/// Random Gaussian tensor projected onto the four-leg invariant subspace.
pub fn random_twirled_tensor(rep: &Representation, d: usize, rng: &mut ChaCha8Rng) -> PepsTensor {
    let bond = rep.dim();
    let raw = la::gaussian_matrix(rng, d, bond.pow(4));
    let tw = rep.four_leg_twirl();
    // rows of raw · Tw^T keep the invariant part of every A^i
    let p = raw.dot(&tw.t());
    PepsTensor::from_projector_map(&p, bond).expect("shape")
}

/// `P(A) = R · P(reference)` with `R = P(A) · P(reference)⁺`.
#[derive(Clone, Debug)]
pub struct PhysicalGauge {
    pub r: Array2<C64>,
    /// `‖P(A) − R P(reference)‖_max`.
    pub residual: f64,
    /// `σ_min(R)/σ_max(R)`; zero when `R` is not invertible.
    pub conditioning: f64,
}

pub fn physical_gauge(a: &PepsTensor, reference: &PepsTensor) -> Result<PhysicalGauge> {
    if a.bond_dim() != reference.bond_dim() {
        return Err(Error::DimensionMismatch("bond dimensions differ".into()));
    }
    let pa = a.projector_map();
    let pk = reference.projector_map();
    let r = pa.dot(&la::pinv(&pk, 1e-10)?);
    let residual = la::max_abs_diff(&r.dot(&pk), &pa);
    let s = la::singular_values(&r)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let conditioning = if r.nrows() != r.ncols() || smax == 0.0 {
        0.0
    } else {
        s.iter().cloned().fold(f64::INFINITY, f64::min) / smax
    };
    Ok(PhysicalGauge { r, residual, conditioning })
}

/// Tensor built on the smallest semi-regular representation `V = ⊕ D^i` with
/// weights `Θ = ⊕ d_i^{1/4}`: `P(H)` is `Θ^{⊗4}·Tw_V` restricted to its range.
pub fn semiregular_double_tensor(g: &FiniteGroup) -> Result<(PepsTensor, Representation)> {
    let v = Representation::minimal_semiregular(g)?;
    let theta = theta_weights(g)?;
    let t4 = la::kron(&la::kron(&theta, &theta), &la::kron(&theta, &theta));
    let op = t4.dot(&v.four_leg_twirl());
    let (u, s, _) = la::svd(&op)?;
    let r = la::rank_of(&s, 1e-9);
    let mut p = Array2::zeros((r, op.ncols()));
    for k in 0..r {
        let row = u.column(k).mapv(|x| x.conj()).dot(&op);
        p.row_mut(k).assign(&row);
    }
    Ok((PepsTensor::from_projector_map(&p, v.dim())?, v))
}

/// `Θ = ⊕_i d_i^{1/4} 1_{d_i}` in the block order of the minimal semi-regular rep.
pub fn theta_weights(g: &FiniteGroup) -> Result<Array2<C64>> {
    let mut dims: Vec<usize> = g.irreps()?.iter().map(|ir| ir.dim).collect();
    dims.sort_unstable();
    let diag: Vec<C64> = dims
        .iter()
        .flat_map(|&d| vec![c((d as f64).powf(0.25)); d])
        .collect();
    Ok(Array2::from_diag(&Array1::from_vec(diag)))
}

/// Bond map between the semi-regular and the regular double model.
#[derive(Clone, Debug)]
pub struct BondReduction {
    /// Superoperator `vec(X) ↦ vec(⊕ d_i^{-1/2} X_ii ⊗ 1)`, `|G|² × D²`.
    pub w: Array2<C64>,
    /// Fourier unitary `|g⟩ ↦ ⊕ √(d_i/|G|) Σ D^i(g)_{kl} |i,k,l⟩`.
    pub fourier: Array2<C64>,
    pub semiregular_dim: usize,
    pub regular_dim: usize,
}

impl BondReduction {
    /// `max_{g,h} ‖W(Θ V_{gh⁻¹} Θ) − F L_{gh⁻¹} F†‖_max`.
    pub fn identity_defect(&self, g: &FiniteGroup) -> Result<f64> {
        let v = Representation::minimal_semiregular(g)?;
        let reg = Representation::regular(g);
        let theta = theta_weights(g)?;
        let dv = self.semiregular_dim;
        let n = self.regular_dim;
        let mut worst: f64 = 0.0;
        for a in 0..g.order() {
            for b in 0..g.order() {
                let x = g.mul(a, g.inv(b));
                let lhs_in = theta.dot(v.mat(x)).dot(&theta);
                let vec_in = Array1::from_iter(lhs_in.iter().cloned());
                let out = self.w.dot(&vec_in);
                let lhs = Array2::from_shape_vec((n, n), out.to_vec()).expect("n x n");
                let rhs = self.fourier.dot(reg.mat(x)).dot(&dagger(&self.fourier));
                worst = worst.max(la::max_abs_diff(&lhs, &rhs));
                debug_assert_eq!(lhs_in.nrows(), dv);
            }
        }
        Ok(worst)
    }

    /// `‖W†W − Π_blockdiag‖_max`: `W` is a Hilbert–Schmidt isometry on
    /// block-diagonal operators.
    pub fn isometry_defect(&self, g: &FiniteGroup) -> Result<f64> {
        let blocks = block_diag_projector(g)?;
        Ok(la::max_abs_diff(&dagger(&self.w).dot(&self.w), &blocks))
    }
}

fn sorted_irreps(g: &FiniteGroup) -> Result<Vec<crate::group::Irrep>> {
    let mut irs: Vec<_> = g.irreps()?.to_vec();
    irs.sort_by_key(|ir| ir.dim);
    Ok(irs)
}

fn block_diag_projector(g: &FiniteGroup) -> Result<Array2<C64>> {
    let irs = sorted_irreps(g)?;
    let dv: usize = irs.iter().map(|ir| ir.dim).sum();
    let mut p = Array2::zeros((dv * dv, dv * dv));
    let mut off = 0;
    for ir in &irs {
        for k in 0..ir.dim {
            for l in 0..ir.dim {
                let idx = (off + k) * dv + off + l;
                p[[idx, idx]] = ONE;
            }
        }
        off += ir.dim;
    }
    Ok(p)
}

pub fn bond_reduction_isometry(g: &FiniteGroup) -> Result<BondReduction> {
    let irs = sorted_irreps(g)?;
    let n = g.order();
    let dv: usize = irs.iter().map(|ir| ir.dim).sum();
    // regular-side basis |i, k, m⟩ laid out block by block
    let mut offsets = Vec::new();
    let mut off = 0;
    for ir in &irs {
        offsets.push(off);
        off += ir.dim * ir.dim;
    }
    if off != n {
        return Err(Error::Numerical("irrep dimensions do not sum to |G|".into()));
    }
    let reg_index = |i: usize, k: usize, m: usize| offsets[i] + k * irs[i].dim + m;
    let mut w = Array2::zeros((n * n, dv * dv));
    let mut voff = 0;
    for (i, ir) in irs.iter().enumerate() {
        let s = c(1.0 / (ir.dim as f64).sqrt());
        for k in 0..ir.dim {
            for l in 0..ir.dim {
                let col = (voff + k) * dv + voff + l;
                for m in 0..ir.dim {
                    let row = reg_index(i, k, m) * n + reg_index(i, l, m);
                    w[[row, col]] = s;
                }
            }
        }
        voff += ir.dim;
    }
    let mut fourier = Array2::zeros((n, n));
    for x in 0..n {
        for (i, ir) in irs.iter().enumerate() {
            let s = (ir.dim as f64 / n as f64).sqrt();
            for k in 0..ir.dim {
                for l in 0..ir.dim {
                    fourier[[reg_index(i, k, l), x]] = ir.mats[x][[k, l]] * s;
                }
            }
        }
    }
    Ok(BondReduction {
        w,
        fourier,
        semiregular_dim: dv,
        regular_dim: n,
    })
}

/// Physical operator `P(A) V P(A)⁺` induced by a virtual operator `V` on the
/// four legs (given as a `D⁴ × D⁴` matrix in the `W_g` convention).
pub fn induced_physical_operator(a: &PepsTensor, v: &Array2<C64>) -> Array2<C64> {
    // P(A) as a map virtual → physical is the d × D⁴ matrix conj(projector_map);
    // for the isometric tensors used here P(A)⁺ = P(A)†.
    let p = a.projector_map().mapv(|x| x.conj());
    p.dot(v).dot(&dagger(&p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_model_support_dims() {
        for (name, d) in [("Z2", 8), ("Z3", 27), ("S3", 216)] {
            let g = FiniteGroup::builtin(name).unwrap();
            let k = double_model_tensor(&g).unwrap();
            assert_eq!(k.phys_dim(), d);
            assert_eq!(k.rank().unwrap(), d, "{name}");
        }
    }

    #[test]
    fn z2_double_colours_are_differences() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let k = double_model_tensor(&g).unwrap();
        for ((i, p, q, r, s), z) in k.data.indexed_iter() {
            let want = ((p + q) % 2) * 4 + ((q + r) % 2) * 2 + (r + s) % 2;
            assert_eq!(z.norm() > 0.0, i == want);
        }
    }

    #[test]
    fn isometry_and_scaling() {
        for name in ["Z2", "S3"] {
            let g = FiniteGroup::builtin(name).unwrap();
            let rep = Representation::regular(&g);
            let k = double_model_tensor(&g).unwrap();
            assert!(k.is_g_isometric(&rep), "{name}");
            assert!(!k.scale(2.0).is_g_isometric(&rep));
        }
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::regular(&g);
        let t = g.character_table().unwrap();
        let k = double_model_tensor(&g).unwrap().scale(2.0);
        assert!(k.is_g_injective_2d(&rep, &t).unwrap());
    }

    #[test]
    fn kitaev_t_symmetries() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::regular(&g);
        let t = g.character_table().unwrap();
        let kt = kitaev_t_tensor(KitaevPairing::NeSw);
        assert!(kt.invariance_defect(&rep) < 1e-14);
        assert!(!kt.is_g_injective_2d(&rep, &t).unwrap());
        let z = Array2::from_shape_vec((2, 2), vec![ONE, c(0.0), c(0.0), c(-1.0)]).unwrap();
        let zz = kt.transform_leg(Leg::L, &z).transform_leg(Leg::B, &z);
        assert!(max_abs_diff5(&zz.data, &kt.data) < 1e-14);
    }

    #[test]
    fn semiregular_needs_semiregular_rep() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let t = g.character_table().unwrap();
        let triv = Representation::trivial(&g, 2);
        let k = random_twirled_tensor(&triv, 4, &mut la::rng(1));
        assert!(matches!(k.is_g_injective_2d(&triv, &t), Err(Error::NotSemiRegular)));
    }

    #[test]
    fn json_round_trip() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let k = double_model_tensor(&g).unwrap();
        let back = PepsTensor::from_json(&k.to_json().unwrap()).unwrap();
        assert!(max_abs_diff5(&back.data, &k.data) < 1e-15);
        assert!(PepsTensor::from_json(r#"{"dims":[2,2],"data":[]}"#).is_err());
    }
}

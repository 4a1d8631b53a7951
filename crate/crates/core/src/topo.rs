//! Entanglement of regions and the blocking (renormalisation) step.

use ndarray::{Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::group::{FiniteGroup, Representation};
use crate::la::{self, dagger, ONE};
use crate::peps::lattice::{Insertions, Region, Site, Torus};
use crate::peps::{is_regular, PepsTensor};
use crate::tensor::Network;

pub const RANK_TOL: f64 = 1e-9;
/// Largest block boundary dimension `D⁸` for [`rg_step`].
pub const RG_BOUNDARY_CAP: usize = 4096;

/// Normalised eigenvalues (descending) of a reduced density operator.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Number of bonds with exactly one end in the region.
    pub boundary_bonds: usize,
}

impl Spectrum {
    pub fn from_eigenvalues(mut ev: Vec<f64>, boundary_bonds: usize) -> Result<Self> {
        let tr: f64 = ev.iter().sum();
        if tr <= 0.0 {
            return Err(Error::Numerical("non-positive trace".into()));
        }
        for x in ev.iter_mut() {
            *x /= tr;
        }
        ev.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum {
            eigenvalues: ev,
            boundary_bonds,
        })
    }

    pub fn rank(&self) -> usize {
        la::rank_of(&self.eigenvalues, RANK_TOL)
    }

    pub fn nonzero(&self) -> &[f64] {
        &self.eigenvalues[..self.rank()]
    }

    /// `(λ_max − λ_min)/λ_mean` over the nonzero part.
    pub fn flatness(&self) -> f64 {
        let nz = self.nonzero();
        if nz.is_empty() {
            return 0.0;
        }
        let mean = nz.iter().sum::<f64>() / nz.len() as f64;
        (nz[0] - nz[nz.len() - 1]) / mean
    }

    pub fn von_neumann(&self) -> f64 {
        -self.nonzero().iter().map(|&x| x * x.ln()).sum::<f64>()
    }

    /// Rényi entropy; `alpha = 0` is the log-rank, `alpha = ∞` the min-entropy,
    /// `alpha = 1` the von Neumann entropy.
    pub fn renyi(&self, alpha: f64) -> f64 {
        let nz = self.nonzero();
        if alpha == 0.0 {
            (nz.len() as f64).ln()
        } else if alpha.is_infinite() {
            -nz.first().copied().unwrap_or(1.0).ln()
        } else if (alpha - 1.0).abs() < 1e-12 {
            self.von_neumann()
        } else {
            nz.iter().map(|x| x.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
        }
    }

    /// `index,eigenvalue` rows, descending.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (k, x) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{k},{x:.17e}\n"));
        }
        out
    }
}

/// Spectrum of `ρ_R = Φ M Φ†`, computed as that of `N^{1/2} M N^{1/2}` with
/// `N = Φ†Φ` the region Gram matrix and `M` the environment.
pub fn entanglement_spectrum(torus: &Torus, sites: &[Site], ins: &Insertions) -> Result<Spectrum> {
    let l = torus.size();
    let region = Region::from_sites(sites, l)?;
    let n = torus.region_gram(&region, ins, ins)?;
    let m = torus.environment(&region, ins, ins)?;
    let s = la::psd_sqrt(&n)?;
    let ev = la::eigvalsh(&s.dot(&m).dot(&s))?;
    Spectrum::from_eigenvalues(ev, region.boundary_bonds(l).len())
}

/// Rank of the reduced density operator (Rényi-0 entropy is its logarithm).
pub fn renyi0_rank(torus: &Torus, sites: &[Site], ins: &Insertions) -> Result<usize> {
    Ok(entanglement_spectrum(torus, sites, ins)?.rank())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TopologicalEntropy {
    pub entropy: f64,
    /// `S − ∂D·log|G|`.
    pub correction: f64,
}

pub fn topological_entropy(spec: &Spectrum, group_order: usize) -> TopologicalEntropy {
    let s = spec.von_neumann();
    TopologicalEntropy {
        entropy: s,
        correction: s - spec.boundary_bonds as f64 * (group_order as f64).ln(),
    }
}

/// `T|a, b⟩ = |a, ab⟩` on two regular-representation legs.
pub fn disentangler(g: &FiniteGroup) -> Array2<C64> {
    let n = g.order();
    let mut t = Array2::zeros((n * n, n * n));
    for a in 0..n {
        for b in 0..n {
            t[[a * n + g.mul(a, b), a * n + b]] = ONE;
        }
    }
    t
}

/// `max_g ‖T†(L_g ⊗ L_g)T − L_g ⊗ 1‖_max`.
pub fn disentangler_defect(g: &FiniteGroup) -> f64 {
    let t = disentangler(g);
    let reg = Representation::regular(g);
    let id = la::identity(g.order());
    reg.mats
        .iter()
        .map(|u| {
            let lhs = dagger(&t).dot(&la::kron(u, u)).dot(&t);
            la::max_abs_diff(&lhs, &la::kron(u, &id))
        })
        .fold(0.0, f64::max)
}

/// Outcome of one blocking step with explicit disentanglers.
#[derive(Clone, Debug)]
pub struct RgCertificate {
    /// Largest defect of `T†(L⊗L)T = L⊗1` and of the coarse Gram's invariance
    /// under `L_g` on the kept legs alone.
    pub symmetry_split_residual: f64,
    /// `‖N' − G_c ⊗ Y / tr N'‖ / ‖N'‖` for the disentangled block Gram `N'`.
    pub factorization_residual: f64,
    /// Discarded factor `Y`, unit trace, on the four discarded legs.
    pub discarded: Array2<C64>,
    pub discarded_rank: usize,
    /// Entropy of `Y` per coarse bond.
    pub discarded_entropy_per_bond: f64,
    /// `‖Y − 1/D⁴‖_max`: zero when every discarded pair is maximally entangled.
    pub maximally_entangled_residual: f64,
    /// Coarse tensor, normalised so that `P†P` is a projector.
    pub coarse: PepsTensor,
    /// `‖supp(G_c) − Tw‖_max` against the four-leg twirl of the representation.
    pub support_residual: f64,
}

impl RgCertificate {
    pub fn support_projector(&self) -> Result<Array2<C64>> {
        self.coarse.support_projector()
    }
}

/// One blocking step on a `G`-isometric tensor.
pub fn rg_step(a: &PepsTensor, rep: &Representation) -> Result<RgCertificate> {
    if !a.is_g_isometric(rep) {
        return Err(Error::NotIsometric);
    }
    rg_step_block([a, a, a, a], rep)
}

/// Blocking step for a `2 × 2` block `[NW, NE, SW, SE]` of possibly different
/// tensors whose legs carry the regular representation.
pub fn rg_step_block(block: [&PepsTensor; 4], rep: &Representation) -> Result<RgCertificate> {
    if !is_regular(rep) {
        return Err(Error::InvalidInput("blocking step needs the regular representation".into()));
    }
    let n = rep.dim();
    if block.iter().any(|t| t.bond_dim() != n) {
        return Err(Error::DimensionMismatch("bond dimension vs representation".into()));
    }
    let nb = n.pow(8);
    if nb > RG_BOUNDARY_CAP {
        return Err(Error::cap("block boundary dimension", nb, RG_BOUNDARY_CAP));
    }
    let g = &rep.group;
    let gram = block_gram(block)?;
    // one disentangler per merged pair of legs
    let t1 = disentangler(g);
    let t2 = la::kron(&t1, &t1);
    let t8 = la::kron(&t2, &t2);
    let np = dagger(&t8).dot(&gram).dot(&t8);

    let n4 = n.pow(4);
    let split = split_pairs(&np, n);
    let mut gc: Array2<C64> = Array2::zeros((n4, n4));
    let mut y: Array2<C64> = Array2::zeros((n4, n4));
    for a in 0..n4 {
        for a2 in 0..n4 {
            let mut s = C64::new(0.0, 0.0);
            for b in 0..n4 {
                s += split[[a, b, a2, b]];
            }
            gc[[a, a2]] = s;
        }
    }
    for b in 0..n4 {
        for b2 in 0..n4 {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..n4 {
                s += split[[a, b, a, b2]];
            }
            y[[b, b2]] = s;
        }
    }
    let tr: C64 = gc.diag().sum();
    if tr.re <= 0.0 {
        return Err(Error::Numerical("block Gram has zero trace".into()));
    }
    let mut diff2 = 0.0f64;
    let mut tot2 = 0.0f64;
    for ((a, b, a2, b2), &x) in split.indexed_iter() {
        let prod = gc[[a, a2]] * y[[b, b2]] / tr;
        diff2 += (x - prod).norm_sqr();
        tot2 += x.norm_sqr();
    }
    let factorization_residual = (diff2 / tot2).sqrt();

    let y_unit = y.mapv(|x| x / tr);
    let yw = la::eigvalsh(&y_unit)?;
    let ymax = yw.iter().cloned().fold(0.0, f64::max);
    let ynz: Vec<f64> = yw.into_iter().filter(|&x| x > RANK_TOL * ymax).collect();
    let discarded_rank = ynz.len();
    let yent = -ynz.iter().map(|&x| x * x.ln()).sum::<f64>();
    let flat = la::identity(n4).mapv(|x| x / n4 as f64);
    let maximally_entangled_residual = la::max_abs_diff(&y_unit, &flat);

    // invariance of the kept legs alone
    let mut sym = disentangler_defect(g);
    for u in &rep.mats {
        let u2 = la::kron(u, u);
        let w = la::kron(&u2, &u2);
        let lhs = gc.dot(&w);
        sym = sym.max(la::max_abs_diff(&lhs, &gc));
    }

    // coarse tensor from the kept Gram
    let (w, v) = la::eigh(&gc)?;
    let wmax = w.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..w.len()).filter(|&k| w[k] > RANK_TOL * wmax).collect();
    let r = keep.len();
    let scale = r as f64 / tr.re;
    let mut p = Array2::zeros((r, n4));
    for (row, &k) in keep.iter().enumerate() {
        let s = (w[k] * scale).sqrt();
        for beta in 0..n4 {
            p[[row, beta]] = v[[beta, k]].conj() * s;
        }
    }
    let coarse = PepsTensor::from_projector_map(&p, n)?;
    let supp = coarse.support_projector()?;
    let support_residual = la::max_abs_diff(&supp, &rep.four_leg_twirl());

    Ok(RgCertificate {
        symmetry_split_residual: sym,
        factorization_residual,
        discarded: y_unit,
        discarded_rank,
        discarded_entropy_per_bond: yent / 4.0,
        maximally_entangled_residual,
        coarse,
        support_residual,
    })
}

/// `Φ†Φ` of the open block with legs ordered in merged pairs
/// `[NW.l, SW.l, NW.t, NE.t, NE.r, SE.r, SW.b, SE.b]`.
fn block_gram(block: [&PepsTensor; 4]) -> Result<Array2<C64>> {
    let mut ts = vec![block[0].clone(); 9];
    ts[1] = block[1].clone();
    ts[3] = block[2].clone();
    ts[4] = block[3].clone();
    let torus = Torus::from_tensors(3, ts)?;
    let region = Region::from_sites(&[(0, 0), (0, 1), (1, 0), (1, 1)], 3)?;
    let none = Insertions::new();
    let mut net = torus.region_open_layer(&region, &none, false, "k");
    net.extend(torus.region_open_layer(&region, &none, true, "c"));
    let order = [0, 4, 1, 2, 3, 6, 5, 7];
    let rows: Vec<String> = order.iter().map(|k| format!("c{k}'")).collect();
    let cols: Vec<String> = order.iter().map(|k| format!("k{k}")).collect();
    let all: Vec<&str> = rows.iter().chain(&cols).map(|s| s.as_str()).collect();
    let out = Network::new(net).contract(&all)?;
    let r: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
    let c: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    out.matricize(&r, &c)
}

/// Reorders `[a1 b1 a2 b2 a3 b3 a4 b4] × [same]` into `X[A, B, A', B']`.
fn split_pairs(m: &Array2<C64>, n: usize) -> ndarray::Array4<C64> {
    let t = ArrayD::from_shape_vec(IxDyn(&[n; 16]), m.iter().cloned().collect()).expect("n^16 entries");
    let perm = [0, 2, 4, 6, 1, 3, 5, 7, 8, 10, 12, 14, 9, 11, 13, 15];
    let p = t.permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned();
    let n4 = n.pow(4);
    p.into_shape_with_order((n4, n4, n4, n4))
        .expect("reshape")
        .into_dimensionality()
        .expect("rank 4")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::peps::{double_model_tensor, kitaev_t_tensor, KitaevPairing};

    #[test]
    fn product_state_has_rank_one() {
        let mut data = ndarray::Array5::zeros((1, 1, 1, 1, 1));
        data[[0, 0, 0, 0, 0]] = ONE;
        let a = PepsTensor::new(data).unwrap();
        let t = Torus::uniform(&a, 3).unwrap();
        let s = entanglement_spectrum(&t, &[(0, 0)], &Insertions::new()).unwrap();
        assert_eq!(s.rank(), 1);
        assert!(s.von_neumann().abs() < 1e-12);
    }

    #[test]
    fn disentangler_splits_symmetry() {
        for name in ["Z2", "Z3", "S3"] {
            let g = FiniteGroup::builtin(name).unwrap();
            assert!(disentangler_defect(&g) < 1e-15, "{name}");
        }
    }

    #[test]
    fn double_model_is_a_fixed_point() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::regular(&g);
        let k = double_model_tensor(&g).unwrap();
        let c = rg_step(&k, &rep).unwrap();
        assert!(c.factorization_residual < 1e-12);
        assert!(c.support_residual < 1e-12);
        assert!(c.maximally_entangled_residual < 1e-12);
        assert!((c.discarded_entropy_per_bond - 2f64.ln()).abs() < 1e-12);
        assert!(c.coarse.is_g_isometric(&rep));
    }

    #[test]
    fn kitaev_block_flows_to_double() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::regular(&g);
        let a = kitaev_t_tensor(KitaevPairing::NeSw);
        let b = kitaev_t_tensor(KitaevPairing::NwSe);
        let c = rg_step_block([&a, &b, &b, &a], &rep).unwrap();
        assert!(c.factorization_residual < 1e-12);
        assert_eq!(c.discarded_rank, 1);
        assert!(c.support_residual < 1e-12);
        assert!(matches!(rg_step(&a, &rep), Err(Error::NotIsometric)));
    }
}

//! Plaquette parent Hamiltonians: `h = 1 − Π_{S_{2×2}}` on every `2 × 2`
//! square of the torus, applied matrix-free.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;

use super::lattice::{Insertions, Region, Site, Torus};
use super::PepsTensor;
use crate::error::{Error, Result};
use crate::la::{self, dagger};
use crate::tensor::{apply_local_map, SubspaceBasis};

/// Largest `d⁴ · rank` stored for a plaquette range basis.
pub const DEFAULT_TERM_CAP: usize = 1 << 24;

#[derive(Clone, Debug)]
pub struct PlaquetteTerm {
    pub anchor: Site,
    /// Sites in patch order NW, NE, SW, SE.
    pub sites: [Site; 4],
    /// Orthonormal basis of `S_{2×2}` on those sites.
    pub range: Array2<C64>,
}

impl PlaquetteTerm {
    pub fn local_dim(&self) -> usize {
        self.range.nrows()
    }

    /// `v − Q Q† v` on the term's four sites; `order` lists the sites of `v`.
    pub fn apply(&self, v: &Array1<C64>, order: &[Site], dims: &[usize]) -> Result<Array1<C64>> {
        let pos: Vec<usize> = self
            .sites
            .iter()
            .map(|s| {
                order
                    .iter()
                    .position(|o| o == s)
                    .ok_or_else(|| Error::OutOfBounds(format!("site {s:?} not in the support")))
            })
            .collect::<Result<_>>()?;
        let proj = apply_local_projector(v, dims, &pos, &self.range)?;
        Ok(v - &proj)
    }
}

/// `Q Q†` acting on `sites` of `v`, without forming `Q Q†`.
fn apply_local_projector(
    v: &Array1<C64>,
    dims: &[usize],
    sites: &[usize],
    q: &Array2<C64>,
) -> Result<Array1<C64>> {
    apply_local_map(v, dims, sites, |m| {
        if m.nrows() != q.nrows() {
            return Err(Error::DimensionMismatch("projector size".into()));
        }
        Ok(q.dot(&dagger(q).dot(m)))
    })
}

/// Orthonormal basis of the range of the open `2 × 2` block map of four tensors.
pub fn block_range(block: [&PepsTensor; 4], cap: usize) -> Result<Array2<C64>> {
    let d: usize = block.iter().map(|t| t.phys_dim()).product();
    let nb = block[0].bond_dim().pow(8);
    if d.saturating_mul(nb) > cap {
        return Err(Error::cap("plaquette map entries", d.saturating_mul(nb), cap));
    }
    let mut ts = vec![block[0].clone(); 9];
    ts[0] = block[0].clone();
    ts[1] = block[1].clone();
    ts[3] = block[2].clone();
    ts[4] = block[3].clone();
    let torus = Torus::from_tensors(3, ts)?;
    let region = Region::from_sites(&[(0, 0), (0, 1), (1, 0), (1, 1)], 3)?;
    let phi = torus.region_map(&region, &Insertions::new(), cap)?;
    la::orth(&phi, 1e-9)
}

fn patch_sites(anchor: Site, l: usize) -> [Site; 4] {
    let (r, c) = anchor;
    [
        (r, c),
        (r, (c + 1) % l),
        ((r + 1) % l, c),
        ((r + 1) % l, (c + 1) % l),
    ]
}

fn same_tensor(a: &PepsTensor, b: &PepsTensor) -> bool {
    a.data.shape() == b.data.shape() && super::max_abs_diff5(&a.data, &b.data) == 0.0
}

/// One term per site of the `L × L` torus, anchored at its north-west corner.
pub fn parent_hamiltonian_2d(torus: &Torus, cap: usize) -> Result<Vec<PlaquetteTerm>> {
    let l = torus.size();
    let mut terms: Vec<PlaquetteTerm> = Vec::with_capacity(l * l);
    for anchor in torus.sites() {
        let sites = patch_sites(anchor, l);
        let block = sites.map(|s| torus.tensor(s));
        let reuse = terms.iter().find(|t| {
            t.sites
                .iter()
                .zip(block.iter())
                .all(|(s, b)| same_tensor(torus.tensor(*s), b))
        });
        let range = match reuse {
            Some(t) => t.range.clone(),
            None => block_range(block, cap)?,
        };
        terms.push(PlaquetteTerm { anchor, sites, range });
    }
    Ok(terms)
}

/// `max_t ‖h_t ψ‖ / ‖ψ‖` over all terms for a global state on the torus.
pub fn energy_residual(terms: &[PlaquetteTerm], psi: &Array1<C64>, l: usize) -> Result<f64> {
    let order: Vec<Site> = (0..l).flat_map(|r| (0..l).map(move |c| (r, c))).collect();
    let d = terms
        .first()
        .map(|t| (t.local_dim() as f64).powf(0.25).round() as usize)
        .ok_or_else(|| Error::InvalidInput("no terms".into()))?;
    let dims = vec![d; l * l];
    let n = la::norm(psi);
    let mut worst: f64 = 0.0;
    for t in terms {
        worst = worst.max(la::norm(&t.apply(psi, &order, &dims)?) / n);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct CommutatorReport {
    /// `(anchor a, anchor b, max ‖[h_a, h_b] v‖/‖v‖)` per checked pair.
    pub pairs: Vec<(Site, Site, f64)>,
    pub max_residual: f64,
    pub trials: usize,
}

/// Matrix-free commutators of overlapping terms on their joint support.
///
/// For a translation-invariant torus one representative pair per relative
/// offset is enough; otherwise every overlapping pair is checked.
pub fn check_commuting_hamiltonian(
    torus: &Torus,
    terms: &[PlaquetteTerm],
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CommutatorReport> {
    let l = torus.size();
    let uniform = torus.is_uniform();
    let mut pairs = Vec::new();
    for (i, a) in terms.iter().enumerate() {
        for b in terms.iter().skip(i + 1) {
            if !a.sites.iter().any(|s| b.sites.contains(s)) {
                continue;
            }
            if uniform && a.anchor != (0, 0) {
                continue;
            }
            pairs.push((a, b));
        }
    }
    if uniform {
        // keep one pair per offset class up to swapping the two terms
        let mut seen: Vec<(usize, usize)> = Vec::new();
        pairs.retain(|(_, b)| {
            let (dr, dc) = b.anchor;
            let key = canonical_offset(dr, dc, l);
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
    }
    let mut out = Vec::new();
    let mut max_residual: f64 = 0.0;
    for (a, b) in pairs {
        let mut support: Vec<Site> = a.sites.to_vec();
        for s in b.sites {
            if !support.contains(&s) {
                support.push(s);
            }
        }
        let dims: Vec<usize> = support.iter().map(|&s| torus.tensor(s).phys_dim()).collect();
        let n: usize = dims.iter().product();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let v = la::gaussian_vector(rng, n);
            let ab = a.apply(&b.apply(&v, &support, &dims)?, &support, &dims)?;
            let ba = b.apply(&a.apply(&v, &support, &dims)?, &support, &dims)?;
            worst = worst.max(la::norm(&(&ab - &ba)) / la::norm(&v));
        }
        max_residual = max_residual.max(worst);
        out.push((a.anchor, b.anchor, worst));
    }
    Ok(CommutatorReport {
        pairs: out,
        max_residual,
        trials,
    })
}

fn canonical_offset(dr: usize, dc: usize, l: usize) -> (usize, usize) {
    let neg = ((l - dr) % l, (l - dc) % l);
    (dr, dc).min(neg)
}

/// `⟨h⟩ = 1 − ⟨ψ|Π|ψ⟩/⟨ψ|ψ⟩` for the square anchored at `anchor`, evaluated
/// through the region Gram matrices and the environment (needs `L ≥ 3`).
pub fn plaquette_energy(torus: &Torus, anchor: Site, ins: &Insertions) -> Result<f64> {
    let l = torus.size();
    let region = Region::from_sites(&patch_sites(anchor, l), l)?;
    let plain = Insertions::new();
    let env = torus.environment(&region, ins, ins)?;
    let n_state = torus.region_gram(&region, ins, ins)?;
    let n_plain = torus.region_gram(&region, &plain, &plain)?;
    let cross = torus.region_gram(&region, ins, &plain)?;
    let w = la::whitener(&n_plain, 1e-10)?;
    let y = dagger(&w).dot(&cross);
    let inside: C64 = dagger(&y).dot(&y).dot(&env).diag().sum();
    let total: C64 = n_state.dot(&env).diag().sum();
    if total.re <= 0.0 {
        return Err(Error::Numerical("state has zero norm".into()));
    }
    Ok(1.0 - inside.re / total.re)
}

/// Trace distance `½‖ρ − σ‖₁` of two density operators.
pub fn trace_distance(rho: &Array2<C64>, sigma: &Array2<C64>) -> Result<f64> {
    let w = la::eigvalsh(&(rho - sigma))?;
    Ok(0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
}

#[derive(Clone, Debug)]
pub struct IndistinguishabilityReport {
    pub region: Vec<Site>,
    pub max_trace_distance: f64,
}

/// Largest pairwise trace distance between the reduced operators on `region`
/// of the states given by insertion patterns on one torus.
pub fn check_local_indistinguishability(
    torus: &Torus,
    states: &[Insertions],
    region: &[Site],
    cap: usize,
) -> Result<IndistinguishabilityReport> {
    let l = torus.size();
    let reg = Region::from_sites(region, l)?;
    if !reg.is_topologically_trivial(l) {
        return Err(Error::NonTrivialRegion(format!("{region:?}")));
    }
    let rhos: Vec<Array2<C64>> = states
        .iter()
        .map(|ins| torus.reduced_density(&reg, ins, cap))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..rhos.len() {
        for j in i + 1..rhos.len() {
            worst = worst.max(trace_distance(&rhos[i], &rhos[j])?);
        }
    }
    Ok(IndistinguishabilityReport {
        region: region.to_vec(),
        max_trace_distance: worst,
    })
}

/// Basis of a plaquette range as a subspace, for intersection checks.
pub fn block_subspace(block: [&PepsTensor; 4], cap: usize) -> Result<SubspaceBasis> {
    Ok(SubspaceBasis::new(block_range(block, cap)?))
}

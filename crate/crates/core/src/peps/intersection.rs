//! Intersection property of open patches: the span of a merged three-site
//! patch equals the intersection of the spans of its two overlapping pairs,
//! each extended by the free third site.

use ndarray::{Array1, Array2, ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;

use super::ground::selector;
use super::lattice::{Insertions, Region, Site, Torus};
use super::PepsTensor;
use crate::error::{Error, Result};
use crate::la::{self, dagger};
use crate::tensor::{self, apply_local_map, extend_subspace, Index, LabeledTensor, Network, SubspaceBasis};

const TOL: f64 = 1e-9;
const HOST_L: usize = 4;
const MAP_CAP: usize = 1 << 24;

/// Three-site patches built from two overlapping pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Merge {
    /// `(0,0) (0,1) (0,2)`: pairs `{0,1}` and `{1,2}`.
    Strip,
    /// `(0,0) (0,1) (1,0)`: pairs `{0,1}` and `{0,2}`.
    LShape,
}

impl Merge {
    pub fn sites(self) -> [Site; 3] {
        match self {
            Merge::Strip => [(0, 0), (0, 1), (0, 2)],
            Merge::LShape => [(0, 0), (0, 1), (1, 0)],
        }
    }

    /// Positions of the two pairs within [`Merge::sites`].
    pub fn pairs(self) -> ([usize; 2], [usize; 2]) {
        match self {
            Merge::Strip => ([0, 1], [1, 2]),
            Merge::LShape => ([0, 1], [0, 2]),
        }
    }
}

#[derive(Clone, Debug)]
pub struct IntersectionReport2d {
    pub intersection_dim: usize,
    pub merged_dim: usize,
    pub residual: f64,
}

/// Places the three tensors on an `L = 4` torus (the rest filled with the first).
fn host(tensors: [&PepsTensor; 3], merge: Merge) -> Result<Torus> {
    let mut ts = vec![tensors[0].clone(); HOST_L * HOST_L];
    for (t, s) in tensors.iter().zip(merge.sites()) {
        ts[s.0 * HOST_L + s.1] = (*t).clone();
    }
    Torus::from_tensors(HOST_L, ts)
}

fn span_of(torus: &Torus, sites: &[Site]) -> Result<SubspaceBasis> {
    let region = Region::from_sites(sites, HOST_L)?;
    let phi = torus.region_map(&region, &Insertions::new(), MAP_CAP)?;
    Ok(SubspaceBasis::new(la::orth(&phi, TOL)?))
}

/// Dense check for three arbitrary tensors.
pub fn intersection_property_2d(tensors: [&PepsTensor; 3], merge: Merge) -> Result<IntersectionReport2d> {
    let torus = host(tensors, merge)?;
    let sites = merge.sites();
    let dims: Vec<usize> = tensors.iter().map(|t| t.phys_dim()).collect();
    let (p1, p2) = merge.pairs();
    let s1 = span_of(&torus, &[sites[p1[0]], sites[p1[1]]])?;
    let s2 = span_of(&torus, &[sites[p2[0]], sites[p2[1]]])?;
    let merged = span_of(&torus, &sites)?;
    let u = SubspaceBasis::new(extend_subspace(&s1.basis, &p1, &dims));
    let w = SubspaceBasis::new(extend_subspace(&s2.basis, &p2, &dims));
    let inter = tensor::subspace_intersection(&u, &w, TOL)?;
    Ok(IntersectionReport2d {
        intersection_dim: inter.dim(),
        merged_dim: merged.dim(),
        residual: tensor::subspace_distance(&inter, &merged)?,
    })
}

#[derive(Clone, Debug)]
pub struct CommutingIntersectionReport {
    /// `max ‖[P_U, P_W] v‖/‖v‖` over random vectors.
    pub commutator_residual: f64,
    /// `tr(P_U P_W)`, the dimension of `U ∩ W` when the projectors commute.
    pub intersection_dim: f64,
    /// Rank of the merged patch map.
    pub merged_dim: usize,
    /// `max ‖P_U P_W Φ β − Φ β‖/‖Φ β‖` over random boundary vectors `β`.
    pub containment_residual: f64,
}

/// Matrix-free variant for one tensor with regular bonds, for patches whose
/// three-site space is too large for dense intersections.
pub fn commuting_intersection_2d(
    a: &PepsTensor,
    group_order: usize,
    merge: Merge,
    trials: usize,
    rng: &mut ChaCha8Rng,
) -> Result<CommutingIntersectionReport> {
    let torus = Torus::uniform(a, HOST_L)?;
    let sites = merge.sites();
    let d = a.phys_dim();
    let dims = vec![d; 3];
    let (p1, p2) = merge.pairs();
    let q1 = span_of(&torus, &[sites[p1[0]], sites[p1[1]]])?.basis;
    let q2 = span_of(&torus, &[sites[p2[0]], sites[p2[1]]])?.basis;
    let pu = |v: &Array1<C64>| apply_local_map(v, &dims, &p1, |m| Ok(q1.dot(&dagger(&q1).dot(m))));
    let pw = |v: &Array1<C64>| apply_local_map(v, &dims, &p2, |m| Ok(q2.dot(&dagger(&q2).dot(m))));

    let n = d * d * d;
    let mut commutator_residual: f64 = 0.0;
    for _ in 0..trials {
        let v = la::gaussian_vector(rng, n);
        let a1 = pu(&pw(&v)?)?;
        let a2 = pw(&pu(&v)?)?;
        commutator_residual = commutator_residual.max(la::norm(&(&a1 - &a2)) / la::norm(&v));
    }

    // the shared site is the one position common to both pairs
    let shared = *p1.iter().find(|p| p2.contains(p)).expect("pairs overlap");
    let r1 = reduce_to_site(&q1, &p1, shared, d);
    let r2 = reduce_to_site(&q2, &p2, shared, d);
    let intersection_dim = r1.dot(&r2).diag().sum().re;

    let region = Region::from_sites(&sites, HOST_L)?;
    let merged_dim = orbit_rank(&torus, &region, group_order)?;

    let mut containment_residual: f64 = 0.0;
    for _ in 0..trials {
        let phi_b = apply_region_to_random_boundary(&torus, &region, rng)?;
        let back = pu(&pw(&phi_b)?)?;
        containment_residual = containment_residual.max(la::norm(&(&back - &phi_b)) / la::norm(&phi_b));
    }
    Ok(CommutingIntersectionReport {
        commutator_residual,
        intersection_dim,
        merged_dim,
        containment_residual,
    })
}

/// `tr_other(Q Q†)` on the shared site of a pair.
fn reduce_to_site(q: &Array2<C64>, pair: &[usize; 2], shared: usize, d: usize) -> Array2<C64> {
    let first = pair[0] == shared;
    let mut r = Array2::zeros((d, d));
    let k = q.ncols();
    for s in 0..d {
        for s2 in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..d {
                let (i, j) = if first { (s * d + t, s2 * d + t) } else { (t * d + s, t * d + s2) };
                for c in 0..k {
                    acc += q[[i, c]] * q[[j, c]].conj();
                }
            }
            r[[s, s2]] = acc;
        }
    }
    r
}

/// Rank of the region map, from the Gram matrix with the first boundary leg
/// fixed on both layers (one representative per orbit of the regular action).
fn orbit_rank(torus: &Torus, region: &Region, group_order: usize) -> Result<usize> {
    let none = Insertions::new();
    let nopen = region.open_legs(torus.size()).len();
    let mut ts = torus.region_open_layer(region, &none, false, "k");
    ts.extend(torus.region_open_layer(region, &none, true, "c"));
    let sk = selector(&ts, "k0", 0)?;
    let sc = selector(&ts, "c0'", 0)?;
    ts.push(sk);
    ts.push(sc);
    let rows: Vec<String> = (1..nopen).map(|k| format!("c{k}'")).collect();
    let cols: Vec<String> = (1..nopen).map(|k| format!("k{k}")).collect();
    let all: Vec<&str> = rows.iter().chain(&cols).map(|s| s.as_str()).collect();
    let out = Network::new(ts).contract(&all)?;
    let r: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
    let c: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let gram = out.matricize(&r, &c)?.mapv(|z| z * group_order as f64);
    let w = la::eigvalsh(&la::hermitize(&gram))?;
    Ok(la::rank_of(&w, TOL))
}

/// `Φ β` for a Gaussian boundary vector `β`, physical legs in region order.
fn apply_region_to_random_boundary(torus: &Torus, region: &Region, rng: &mut ChaCha8Rng) -> Result<Array1<C64>> {
    let none = Insertions::new();
    let mut ts = torus.region_open_layer(region, &none, false, "k");
    let nopen = region.open_legs(torus.size()).len();
    let labels: Vec<String> = (0..nopen).map(|k| format!("k{k}")).collect();
    let mut indices = Vec::with_capacity(nopen);
    for lab in &labels {
        let ix = ts
            .iter()
            .flat_map(|t| t.indices.iter())
            .find(|i| &i.label == lab)
            .ok_or_else(|| Error::LabelMismatch(lab.clone()))?;
        indices.push(Index {
            label: lab.clone(),
            dim: ix.dim,
            orient: ix.orient.flip(),
        });
    }
    let shape: Vec<usize> = indices.iter().map(|i| i.dim).collect();
    let n: usize = shape.iter().product();
    let data = ArrayD::from_shape_vec(IxDyn(&shape), la::gaussian_vector(rng, n).to_vec()).expect("size");
    ts.push(LabeledTensor { indices, data });
    let phys: Vec<String> = region.sites.iter().map(|&s| super::lattice::phys_label(s)).collect();
    let out = Network::new(ts).contract(&phys.iter().map(|s| s.as_str()).collect::<Vec<_>>())?;
    Ok(out.to_vec())
}

//! Periodic `L × L` lattices of PEPS tensors and the single- and double-layer
//! networks built on them.
//!
//! Bonds: `H(r, c)` joins leg `r` of site `(r, c)` to leg `l` of `(r, c+1)`;
//! `V(r, c)` joins leg `b` of `(r, c)` to leg `t` of `(r+1, c)`. An insertion
//! `X[r, l]` sits on a bond and is absorbed into the source site unless the
//! bond is marked for absorption at its target.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::{Leg, PepsTensor};
use crate::error::{Error, Result};
use crate::group::Representation;
use crate::tensor::{Index, LabeledTensor, Network, DEFAULT_MAX_ENTRIES};

pub type Site = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    H,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bond {
    pub dir: Dir,
    pub r: usize,
    pub c: usize,
}

impl Bond {
    pub fn h(r: usize, c: usize) -> Self {
        Bond { dir: Dir::H, r, c }
    }

    pub fn v(r: usize, c: usize) -> Self {
        Bond { dir: Dir::V, r, c }
    }

    pub fn source(&self) -> Site {
        (self.r, self.c)
    }

    pub fn target(&self, l: usize) -> Site {
        match self.dir {
            Dir::H => (self.r, (self.c + 1) % l),
            Dir::V => ((self.r + 1) % l, self.c),
        }
    }

    pub fn label(&self) -> String {
        match self.dir {
            Dir::H => format!("h{}_{}", self.r, self.c),
            Dir::V => format!("v{}_{}", self.r, self.c),
        }
    }
}

/// The bond attached to `leg` of `site`.
pub fn bond_at(site: Site, leg: Leg, l: usize) -> Bond {
    let (r, c) = site;
    match leg {
        Leg::L => Bond::h(r, (c + l - 1) % l),
        Leg::T => Bond::v((r + l - 1) % l, c),
        Leg::R => Bond::h(r, c),
        Leg::B => Bond::v(r, c),
    }
}

pub fn phys_label(s: Site) -> String {
    format!("p{}_{}", s.0, s.1)
}

#[derive(Clone, Debug)]
pub struct Torus {
    l: usize,
    tensors: Vec<PepsTensor>,
}

impl Torus {
    pub fn uniform(a: &PepsTensor, l: usize) -> Result<Self> {
        Self::from_tensors(l, vec![a.clone(); l * l])
    }

    /// One tensor per site, row-major.
    pub fn from_tensors(l: usize, tensors: Vec<PepsTensor>) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidInput(format!("lattice size {l} below 2")));
        }
        if tensors.len() != l * l {
            return Err(Error::DimensionMismatch(format!(
                "{} tensors for {} sites",
                tensors.len(),
                l * l
            )));
        }
        let dim = tensors[0].bond_dim();
        if tensors.iter().any(|t| t.bond_dim() != dim) {
            return Err(Error::DimensionMismatch("bond dimensions differ between sites".into()));
        }
        Ok(Torus { l, tensors })
    }

    pub fn size(&self) -> usize {
        self.l
    }

    pub fn bond_dim(&self) -> usize {
        self.tensors[0].bond_dim()
    }

    pub fn tensor(&self, s: Site) -> &PepsTensor {
        &self.tensors[s.0 * self.l + s.1]
    }

    /// Same tensor on every site.
    pub fn is_uniform(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.data.shape() == self.tensors[0].data.shape() && t.data == self.tensors[0].data)
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.l).flat_map(|r| (0..self.l).map(move |c| (r, c))).collect()
    }

    pub fn bonds(&self) -> Vec<Bond> {
        let mut out = Vec::with_capacity(2 * self.l * self.l);
        for (r, c) in self.sites() {
            out.push(Bond::h(r, c));
            out.push(Bond::v(r, c));
        }
        out
    }

    /// Tensor at `site` with the insertions assigned to it absorbed.
    pub fn dressed_tensor(&self, site: Site, ins: &Insertions) -> PepsTensor {
        let mut a = self.tensor(site).clone();
        for leg in Leg::ALL {
            let bond = bond_at(site, leg, self.l);
            if let Some(x) = ins.get(&bond) {
                let at_target = ins.at_target.contains(&bond);
                if !leg.is_ket() && !at_target {
                    a = a.transform_leg(leg, &x.t().to_owned());
                } else if leg.is_ket() && at_target {
                    a = a.transform_leg(leg, x);
                }
            }
        }
        a
    }

    fn site_tensor(
        &self,
        site: Site,
        ins: &Insertions,
        label: &dyn Fn(Site, Leg) -> String,
        bra: bool,
    ) -> LabeledTensor {
        let a = self.dressed_tensor(site, ins);
        let dd = a.bond_dim();
        let names: Vec<String> = Leg::ALL.iter().map(|&g| label(site, g)).collect();
        let t = LabeledTensor {
            indices: vec![
                Index::ket(phys_label(site), a.phys_dim()),
                Index::ket(names[0].clone(), dd),
                Index::ket(names[1].clone(), dd),
                Index::bra(names[2].clone(), dd),
                Index::bra(names[3].clone(), dd),
            ],
            data: a.data.into_dyn(),
        };
        if bra {
            t.conj()
        } else {
            t
        }
    }

    /// Site tensors of `sites` with leg labels from `label`; the bra layer is
    /// conjugated and its virtual labels are primed.
    pub fn layer(
        &self,
        sites: &[Site],
        ins: &Insertions,
        label: &dyn Fn(Site, Leg) -> String,
        bra: bool,
    ) -> Vec<LabeledTensor> {
        let primed = |s: Site, g: Leg| {
            let base = label(s, g);
            if bra {
                format!("{base}'")
            } else {
                base
            }
        };
        sites
            .iter()
            .map(|&s| self.site_tensor(s, ins, &primed, bra))
            .collect()
    }

    fn bond_labeller(&self) -> impl Fn(Site, Leg) -> String + '_ {
        move |s, g| bond_at(s, g, self.l).label()
    }

    /// `⟨ψ_bra|ψ_ket⟩` for two insertion patterns on the same tensors.
    pub fn overlap(&self, ket: &Insertions, bra: &Insertions) -> Result<C64> {
        let sites = self.sites();
        let lab = self.bond_labeller();
        let mut ts = self.layer(&sites, ket, &lab, false);
        ts.extend(self.layer(&sites, bra, &lab, true));
        let out = Network::new(ts).contract(&[])?;
        Ok(out.data.iter().next().cloned().unwrap_or_default())
    }

    pub fn norm_sq(&self, ins: &Insertions) -> Result<f64> {
        Ok(self.overlap(ins, ins)?.re)
    }

    /// Global state vector, sites row-major; refused above `cap` amplitudes.
    pub fn contract(&self, ins: &Insertions, cap: usize) -> Result<Array1<C64>> {
        let d = self.tensors[0].phys_dim();
        let mut total: usize = 1;
        for t in &self.tensors {
            total = total
                .checked_mul(t.phys_dim())
                .filter(|&n| n <= cap)
                .ok_or_else(|| Error::cap("state amplitudes", d.saturating_pow((self.l * self.l) as u32), cap))?;
        }
        let sites = self.sites();
        let lab = self.bond_labeller();
        let ts = self.layer(&sites, ins, &lab, false);
        let names: Vec<String> = sites.iter().map(|&s| phys_label(s)).collect();
        let order: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let out = Network::new(ts).with_cap(cap.max(DEFAULT_MAX_ENTRIES)).contract(&order)?;
        Ok(out.to_vec())
    }

    /// Open-boundary map of `region` with its open legs labelled
    /// `{prefix}{k}` in [`Region::open_legs`] order.
    pub fn region_open_layer(
        &self,
        region: &Region,
        ins: &Insertions,
        bra: bool,
        prefix: &str,
    ) -> Vec<LabeledTensor> {
        let open = region.open_legs(self.l);
        let l = self.l;
        let lab = move |s: Site, g: Leg| {
            if let Some(k) = open.iter().position(|&(os, og)| os == s && og == g) {
                format!("{prefix}{k}")
            } else {
                bond_at(s, g, l).label()
            }
        };
        self.layer(&region.sites, ins, &lab, bra)
    }

    /// Double-layer environment of the complement of `region`:
    /// `M[β_ket, β_bra]` over [`Region::boundary_bonds`].
    pub fn environment(&self, region: &Region, ket: &Insertions, bra: &Insertions) -> Result<Array2<C64>> {
        region.require_simple_boundary(self.l)?;
        let rest = region.complement(self.l);
        if rest.is_empty() {
            return Err(Error::InvalidInput("region covers the whole lattice".into()));
        }
        let lab = self.bond_labeller();
        let mut ts = self.layer(&rest, ket, &lab, false);
        ts.extend(self.layer(&rest, bra, &lab, true));
        let (kl, bl) = boundary_labels(region, self.l);
        let out = Network::new(ts).contract(&all_refs(&kl, &bl))?;
        out.matricize(&refs(&kl), &refs(&bl))
    }

    /// `N = Φ_bra† Φ_ket` of `region`: `N[β_bra, β_ket]`.
    pub fn region_gram(&self, region: &Region, ket: &Insertions, bra: &Insertions) -> Result<Array2<C64>> {
        region.require_simple_boundary(self.l)?;
        let lab = self.bond_labeller();
        let mut ts = self.layer(&region.sites, ket, &lab, false);
        ts.extend(self.layer(&region.sites, bra, &lab, true));
        let (kl, bl) = boundary_labels(region, self.l);
        let out = Network::new(ts).contract(&all_refs(&bl, &kl))?;
        out.matricize(&refs(&bl), &refs(&kl))
    }

    /// `Φ[phys, β]`: physical legs in region order, boundary bonds as columns.
    pub fn region_map(&self, region: &Region, ins: &Insertions, cap: usize) -> Result<Array2<C64>> {
        region.require_simple_boundary(self.l)?;
        let d: usize = region.sites.iter().map(|&s| self.tensor(s).phys_dim()).product();
        let nb = region.boundary_bonds(self.l).len();
        let entries = d.saturating_mul(self.bond_dim().saturating_pow(nb as u32));
        if entries > cap {
            return Err(Error::cap("region map entries", entries, cap));
        }
        let lab = self.bond_labeller();
        let ts = self.layer(&region.sites, ins, &lab, false);
        let (kl, _) = boundary_labels(region, self.l);
        let pl: Vec<String> = region.sites.iter().map(|&s| phys_label(s)).collect();
        let out = Network::new(ts).contract(&all_refs(&pl, &kl))?;
        out.matricize(&refs(&pl), &refs(&kl))
    }

    /// Reduced density operator of `region` in the normalised state.
    pub fn reduced_density(&self, region: &Region, ins: &Insertions, cap: usize) -> Result<Array2<C64>> {
        let phi = self.region_map(region, ins, cap)?;
        let m = self.environment(region, ins, ins)?;
        let mut rho = phi.dot(&m).dot(&crate::la::dagger(&phi));
        let tr: f64 = rho.diag().iter().map(|x| x.re).sum();
        if tr.abs() < 1e-300 {
            return Err(Error::Numerical("state has zero norm".into()));
        }
        rho.mapv_inplace(|x| x / tr);
        Ok(crate::la::hermitize(&rho))
    }
}

fn boundary_labels(region: &Region, l: usize) -> (Vec<String>, Vec<String>) {
    let kl: Vec<String> = region.boundary_bonds(l).iter().map(|b| b.label()).collect();
    let bl = kl.iter().map(|s| format!("{s}'")).collect();
    (kl, bl)
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

fn all_refs<'a>(a: &'a [String], b: &'a [String]) -> Vec<&'a str> {
    a.iter().chain(b).map(|s| s.as_str()).collect()
}

/// Closed torus with `U_g` on the vertical bonds of row 0 and `U_h` on the
/// horizontal bonds of column 0.
pub fn twist_insertions(rep: &Representation, l: usize, g: usize, h: usize) -> Result<Insertions> {
    if !rep.group.commutes(g, h) {
        return Err(Error::InvalidInput(format!(
            "twist elements {} and {} do not commute",
            rep.group.label(g),
            rep.group.label(h)
        )));
    }
    let mut ins = Insertions::default();
    for k in 0..l {
        ins.set(Bond::v(0, k), rep.mat(g).clone());
        ins.set(Bond::h(k, 0), rep.mat(h).clone());
    }
    Ok(ins)
}

/// `|ψ(g, h)⟩`: the uniform torus of `a` closed with commuting twists.
pub fn closure_state(
    a: &PepsTensor,
    rep: &Representation,
    l: usize,
    g: usize,
    h: usize,
    cap: usize,
) -> Result<Array1<C64>> {
    let ins = twist_insertions(rep, l, g, h)?;
    Torus::uniform(a, l)?.contract(&ins, cap)
}

/// Matrices on bonds, plus the set of bonds absorbed at their target site.
#[derive(Clone, Debug, Default)]
pub struct Insertions {
    mats: BTreeMap<Bond, Array2<C64>>,
    at_target: BTreeSet<Bond>,
}

impl Insertions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, b: Bond, m: Array2<C64>) {
        self.mats.insert(b, m);
    }

    /// Composes on the right: `X_b ← X_b · m`.
    pub fn push(&mut self, b: Bond, m: &Array2<C64>) {
        let next = match self.mats.get(&b) {
            Some(x) => x.dot(m),
            None => m.clone(),
        };
        self.mats.insert(b, next);
    }

    pub fn get(&self, b: &Bond) -> Option<&Array2<C64>> {
        self.mats.get(b)
    }

    pub fn absorb_at_target(&mut self, b: Bond) {
        self.at_target.insert(b);
    }

    pub fn bonds(&self) -> impl Iterator<Item = &Bond> {
        self.mats.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }
}

/// A set of sites with the bonds treated as contracted inside it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub sites: Vec<Site>,
    internal: BTreeSet<Bond>,
}

impl Region {
    /// All bonds with both ends in the set are internal.
    pub fn from_sites(sites: &[Site], l: usize) -> Result<Self> {
        let mut uniq: Vec<Site> = Vec::new();
        for &s in sites {
            if s.0 >= l || s.1 >= l {
                return Err(Error::OutOfBounds(format!("site {s:?} on an {l}x{l} lattice")));
            }
            if !uniq.contains(&s) {
                uniq.push(s);
            }
        }
        if uniq.is_empty() {
            return Err(Error::InvalidInput("empty region".into()));
        }
        let mut internal = BTreeSet::new();
        for &s in &uniq {
            for leg in [Leg::R, Leg::B] {
                let b = bond_at(s, leg, l);
                if uniq.contains(&b.target(l)) {
                    internal.insert(b);
                }
            }
        }
        Ok(Region { sites: uniq, internal })
    }

    /// `h × w` patch anchored at its north-west site; only bonds between
    /// neighbouring patch cells are internal, even when the patch wraps.
    pub fn rect(anchor: Site, h: usize, w: usize, l: usize) -> Result<Self> {
        if h == 0 || w == 0 || h > l || w > l {
            return Err(Error::InvalidInput(format!("{h}x{w} patch on an {l}x{l} lattice")));
        }
        let at = |i: usize, j: usize| ((anchor.0 + i) % l, (anchor.1 + j) % l);
        let mut sites = Vec::new();
        let mut internal = BTreeSet::new();
        for i in 0..h {
            for j in 0..w {
                sites.push(at(i, j));
                if j + 1 < w {
                    internal.insert(bond_at(at(i, j), Leg::R, l));
                }
                if i + 1 < h {
                    internal.insert(bond_at(at(i, j), Leg::B, l));
                }
            }
        }
        Ok(Region { sites, internal })
    }

    pub fn contains(&self, s: Site) -> bool {
        self.sites.contains(&s)
    }

    pub fn internal_bonds(&self) -> &BTreeSet<Bond> {
        &self.internal
    }

    /// Uncontracted legs, by site (region order) then leg (l, t, r, b).
    pub fn open_legs(&self, l: usize) -> Vec<(Site, Leg)> {
        let mut out = Vec::new();
        for &s in &self.sites {
            for leg in Leg::ALL {
                if !self.internal.contains(&bond_at(s, leg, l)) {
                    out.push((s, leg));
                }
            }
        }
        out
    }

    /// Bonds carrying open legs, sorted.
    pub fn boundary_bonds(&self, l: usize) -> Vec<Bond> {
        let set: BTreeSet<Bond> = self.open_legs(l).iter().map(|&(s, g)| bond_at(s, g, l)).collect();
        set.into_iter().collect()
    }

    pub fn complement(&self, l: usize) -> Vec<Site> {
        (0..l)
            .flat_map(|r| (0..l).map(move |c| (r, c)))
            .filter(|s| !self.contains(*s))
            .collect()
    }

    /// Every boundary bond has exactly one end inside the region.
    pub fn has_simple_boundary(&self, l: usize) -> bool {
        self.boundary_bonds(l)
            .iter()
            .all(|b| self.contains(b.source()) != self.contains(b.target(l)))
    }

    fn require_simple_boundary(&self, l: usize) -> Result<()> {
        if self.has_simple_boundary(l) {
            Ok(())
        } else {
            Err(Error::InvalidInput(
                "region meets itself across a boundary bond".into(),
            ))
        }
    }

    /// Connected, with connected complement, and not winding: some row and
    /// some column of the torus avoid it.
    pub fn is_topologically_trivial(&self, l: usize) -> bool {
        let free_row = (0..l).any(|r| self.sites.iter().all(|s| s.0 != r));
        let free_col = (0..l).any(|c| self.sites.iter().all(|s| s.1 != c));
        free_row && free_col && connected(&self.sites, l) && connected(&self.complement(l), l)
    }
}

fn connected(sites: &[Site], l: usize) -> bool {
    if sites.is_empty() {
        return true;
    }
    let mut seen = vec![sites[0]];
    let mut queue = VecDeque::from([sites[0]]);
    while let Some((r, c)) = queue.pop_front() {
        let nbrs = [
            ((r + 1) % l, c),
            ((r + l - 1) % l, c),
            (r, (c + 1) % l),
            (r, (c + l - 1) % l),
        ];
        for n in nbrs {
            if sites.contains(&n) && !seen.contains(&n) {
                seen.push(n);
                queue.push_back(n);
            }
        }
    }
    seen.len() == sites.len()
}

//! Anyons on the virtual level: strings of group elements along dual paths
//! (fluxons at their ends) and diagonal character defects on bonds (chargeons).
//!
//! Faces are indexed by their north-west corner: face `(i, j)` is bounded by
//! `H(i, j)` (top), `H(i+1, j)` (bottom), `V(i, j)` (left) and `V(i, j+1)`
//! (right). A dual step crosses one bond; crossing from the left of the bond
//! arrow inserts `g`, from the right `g⁻¹`, composed as `x_e ← x_e · elem`.
//! Bond arrows point east (`H`) and south (`V`).

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{CharacterTable, FiniteGroup, Representation};
use crate::la::{self, dagger};
use crate::peps::lattice::{Bond, Dir, Insertions, Region, Site, Torus};
use crate::peps::{hamiltonian, max_abs_diff5};

pub type Face = (usize, usize);

/// Largest `D^{4L}` for which a deformation is checked on the global state.
pub const GLOBAL_ENV_CAP: usize = 1 << 20;
const REGION_MAP_CAP: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Step {
    North,
    South,
    East,
    West,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::North, Step::South, Step::East, Step::West];

    pub fn reverse(self) -> Step {
        match self {
            Step::North => Step::South,
            Step::South => Step::North,
            Step::East => Step::West,
            Step::West => Step::East,
        }
    }

    /// Parses a word over `N`, `S`, `E`, `W`.
    pub fn parse_word(s: &str) -> Result<Vec<Step>> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c.to_ascii_uppercase() {
                'N' => Ok(Step::North),
                'S' => Ok(Step::South),
                'E' => Ok(Step::East),
                'W' => Ok(Step::West),
                other => Err(Error::InvalidInput(format!("unknown step '{other}'"))),
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Crossing {
    pub bond: Bond,
    pub side: Side,
}

/// `[top, bottom, left, right]` bonds of a face.
pub fn face_bonds(f: Face, l: usize) -> [Bond; 4] {
    let (i, j) = f;
    [Bond::h(i, j), Bond::h((i + 1) % l, j), Bond::v(i, j), Bond::v(i, (j + 1) % l)]
}

fn cross(f: Face, step: Step, l: usize) -> (Crossing, Face) {
    let (i, j) = f;
    match step {
        Step::East => (
            Crossing {
                bond: Bond::v(i, (j + 1) % l),
                side: Side::Right,
            },
            (i, (j + 1) % l),
        ),
        Step::West => (
            Crossing {
                bond: Bond::v(i, j),
                side: Side::Left,
            },
            (i, (j + l - 1) % l),
        ),
        Step::South => (
            Crossing {
                bond: Bond::h((i + 1) % l, j),
                side: Side::Left,
            },
            ((i + 1) % l, j),
        ),
        Step::North => (
            Crossing {
                bond: Bond::h(i, j),
                side: Side::Right,
            },
            ((i + l - 1) % l, j),
        ),
    }
}

/// A walk on the dual lattice, recorded by its start face and steps.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualPath {
    start: Face,
    steps: Vec<Step>,
    l: usize,
}

impl DualPath {
    pub fn new(start: Face, steps: Vec<Step>, l: usize) -> Result<Self> {
        if start.0 >= l || start.1 >= l {
            return Err(Error::OutOfBounds(format!("face {start:?} on an {l}x{l} lattice")));
        }
        Ok(DualPath { start, steps, l })
    }

    pub fn from_word(start: Face, word: &str, l: usize) -> Result<Self> {
        Self::new(start, Step::parse_word(word)?, l)
    }

    /// Rebuilds a path from its crossings, checking that each crossing lies on
    /// the current face and is taken from the side facing it.
    pub fn from_crossings(start: Face, crossings: &[Crossing], l: usize) -> Result<Self> {
        let mut path = Self::new(start, Vec::new(), l)?;
        let mut f = start;
        for c in crossings {
            let step = Step::ALL
                .into_iter()
                .find(|&s| cross(f, s, l).0 == *c)
                .ok_or_else(|| Error::InvalidInput(format!("crossing {c:?} does not leave face {f:?}")))?;
            path.steps.push(step);
            f = cross(f, step, l).1;
        }
        Ok(path)
    }

    pub fn lattice_size(&self) -> usize {
        self.l
    }

    pub fn start(&self) -> Face {
        self.start
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn faces(&self) -> Vec<Face> {
        let mut out = vec![self.start];
        let mut f = self.start;
        for &s in &self.steps {
            f = cross(f, s, self.l).1;
            out.push(f);
        }
        out
    }

    pub fn end(&self) -> Face {
        *self.faces().last().expect("at least the start face")
    }

    pub fn crossings(&self) -> Vec<Crossing> {
        let mut f = self.start;
        self.steps
            .iter()
            .map(|&s| {
                let (c, next) = cross(f, s, self.l);
                f = next;
                c
            })
            .collect()
    }

    pub fn is_closed(&self) -> bool {
        !self.steps.is_empty() && self.end() == self.start
    }

    /// Start and end faces of an open path.
    pub fn endpoints(&self) -> Option<(Face, Face)> {
        if self.is_closed() || self.steps.is_empty() {
            None
        } else {
            Some((self.start, self.end()))
        }
    }

    pub fn reversed(&self) -> Self {
        DualPath {
            start: self.end(),
            steps: self.steps.iter().rev().map(|s| s.reverse()).collect(),
            l: self.l,
        }
    }

    pub fn then(&self, other: &DualPath) -> Result<Self> {
        if other.l != self.l || other.start != self.end() {
            return Err(Error::InvalidInput("paths do not join".into()));
        }
        let mut steps = self.steps.clone();
        steps.extend_from_slice(&other.steps);
        Ok(DualPath {
            start: self.start,
            steps,
            l: self.l,
        })
    }

    /// Removes immediate back-and-forth steps.
    pub fn simplified(&self) -> Self {
        let mut steps: Vec<Step> = Vec::new();
        for &s in &self.steps {
            if steps.last() == Some(&s.reverse()) {
                steps.pop();
            } else {
                steps.push(s);
            }
        }
        DualPath {
            start: self.start,
            steps,
            l: self.l,
        }
    }

    /// Net eastward crossings of column 0 and net southward crossings of row 0.
    pub fn winding(&self) -> (i64, i64) {
        let (mut wx, mut wy) = (0i64, 0i64);
        let l = self.l;
        for (f, &s) in self.faces().iter().zip(&self.steps) {
            match s {
                Step::East if (f.1 + 1) % l == 0 => wx += 1,
                Step::West if f.1 == 0 => wx -= 1,
                Step::South if (f.0 + 1) % l == 0 => wy += 1,
                Step::North if f.0 == 0 => wy -= 1,
                _ => {}
            }
        }
        (wx, wy)
    }
}

/// A string of `g` along a dual path. An open string carries a fluxon pair:
/// `g` at its start face and `g⁻¹` at its end face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluxonPair {
    pub g: usize,
    pub path: DualPath,
}

impl FluxonPair {
    pub fn endpoints(&self) -> Option<(Face, Face)> {
        self.path.endpoints()
    }
}

/// The edge operator `Σ_g χ_c(p g)|g⟩⟨g|` replacing the identity on a bond.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChargeonDefect {
    pub bond: Bond,
    pub irrep: usize,
    pub p: usize,
}

#[derive(Clone, Debug)]
pub struct AnyonConfig {
    pub rep: Representation,
    pub l: usize,
    /// Twist `(g, h)` closing the torus.
    pub twist: (usize, usize),
    /// Strings in application order.
    pub strings: Vec<FluxonPair>,
    pub chargeons: Vec<ChargeonDefect>,
}

impl AnyonConfig {
    pub fn new(rep: &Representation, l: usize) -> Result<Self> {
        if l < 2 {
            return Err(Error::InvalidInput(format!("lattice size {l} below 2")));
        }
        let e = rep.group.identity();
        Ok(AnyonConfig {
            rep: rep.clone(),
            l,
            twist: (e, e),
            strings: Vec::new(),
            chargeons: Vec::new(),
        })
    }

    pub fn with_twist(mut self, g: usize, h: usize) -> Result<Self> {
        if !self.rep.group.commutes(g, h) {
            return Err(Error::InvalidInput("twist elements do not commute".into()));
        }
        self.twist = (g, h);
        Ok(self)
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.rep.group
    }

    /// Open strings, i.e. fluxon pairs.
    pub fn fluxons(&self) -> impl Iterator<Item = &FluxonPair> {
        self.strings.iter().filter(|s| s.endpoints().is_some())
    }

    /// Group element on every bond carrying a non-identity string element.
    pub fn bond_elements(&self) -> BTreeMap<Bond, usize> {
        let g = self.group();
        let e = g.identity();
        let mut x: BTreeMap<Bond, usize> = BTreeMap::new();
        for k in 0..self.l {
            x.insert(Bond::v(0, k), self.twist.0);
            x.insert(Bond::h(k, 0), self.twist.1);
        }
        for s in &self.strings {
            for c in s.path.crossings() {
                let elem = match c.side {
                    Side::Left => s.g,
                    Side::Right => g.inv(s.g),
                };
                let cur = x.get(&c.bond).copied().unwrap_or(e);
                x.insert(c.bond, g.mul(cur, elem));
            }
        }
        x.retain(|_, v| *v != e);
        x
    }

    /// Bond insertions: string elements, then chargeon edge operators.
    pub fn insertions(&self, table: Option<&CharacterTable>) -> Result<Insertions> {
        let mut ins = Insertions::new();
        for (b, x) in self.bond_elements() {
            ins.set(b, self.rep.mat(x).clone());
        }
        if !self.chargeons.is_empty() {
            let table = table.ok_or(Error::IrrepsUnavailable)?;
            for ch in &self.chargeons {
                ins.push(ch.bond, &chargeon_edge_operator(&self.rep, table, ch.irrep, ch.p)?);
            }
        }
        Ok(ins)
    }

    /// `x_{V(i,j)} x_{H(i+1,j)} x_{V(i,j+1)}⁻¹ x_{H(i,j)}⁻¹`, read from the
    /// north-west corner.
    pub fn face_holonomy(&self, f: Face) -> usize {
        face_holonomy_of(self.group(), &self.bond_elements(), f, self.l)
    }

    /// Holonomy of face `f` transported to `base` along the walk that goes
    /// down column `base.1` and then right along the face's top row.
    pub fn based_holonomy(&self, f: Face, base: Site) -> usize {
        let g = self.group();
        let x = self.bond_elements();
        let w = walk(base, f, self.l)
            .into_iter()
            .fold(g.identity(), |acc, b| g.mul(acc, x.get(&b).copied().unwrap_or(g.identity())));
        g.conj(w, face_holonomy_of(g, &x, f, self.l))
    }

    /// Same as [`Self::based_holonomy`], computed from the insertion matrices
    /// and identified against the representation.
    pub fn based_holonomy_from_matrices(&self, f: Face, base: Site) -> Result<usize> {
        let ins = self.insertions(None)?;
        let d = self.rep.dim();
        let get = |b: &Bond| ins.get(b).cloned().unwrap_or_else(|| la::identity(d));
        let mut w = la::identity(d);
        for b in walk(base, f, self.l) {
            w = w.dot(&get(&b));
        }
        let [top, bottom, left, right] = face_bonds(f, self.l);
        let hol = get(&left).dot(&get(&bottom)).dot(&dagger(&get(&right))).dot(&dagger(&get(&top)));
        let m = w.dot(&hol).dot(&dagger(&w));
        identify_element(&self.rep, &m)
            .ok_or_else(|| Error::Numerical("holonomy is not a representation matrix".into()))
    }
}

fn face_holonomy_of(g: &FiniteGroup, x: &BTreeMap<Bond, usize>, f: Face, l: usize) -> usize {
    let e = g.identity();
    let get = |b: &Bond| x.get(b).copied().unwrap_or(e);
    let [top, bottom, left, right] = face_bonds(f, l);
    let a = g.mul(get(&left), get(&bottom));
    let b = g.mul(a, g.inv(get(&right)));
    g.mul(b, g.inv(get(&top)))
}

/// Primal walk from `base` to the north-west corner of `f`.
fn walk(base: Site, f: Face, l: usize) -> Vec<Bond> {
    let mut out = Vec::new();
    let (mut r, mut c) = base;
    while r != f.0 {
        out.push(Bond::v(r, c));
        r = (r + 1) % l;
    }
    while c != f.1 {
        out.push(Bond::h(r, c));
        c = (c + 1) % l;
    }
    out
}

/// The group element whose representation matrix equals `m`, if any.
pub fn identify_element(rep: &Representation, m: &Array2<C64>) -> Option<usize> {
    (0..rep.group.order()).find(|&g| la::max_abs_diff(rep.mat(g), m) < 1e-10)
}

/// Adds a string of `g` along `path`.
pub fn apply_string(config: &AnyonConfig, path: &DualPath, g: usize) -> Result<AnyonConfig> {
    if path.lattice_size() != config.l {
        return Err(Error::OutOfBounds("path lives on a different lattice".into()));
    }
    if g >= config.group().order() {
        return Err(Error::InvalidInput(format!("no group element {g}")));
    }
    let mut out = config.clone();
    out.strings.push(FluxonPair {
        g,
        path: path.clone(),
    });
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeformationMethod {
    /// `‖ψ₁ − ψ₂‖/‖ψ₁‖` on the global state.
    Global,
    /// Largest single-site tensor difference with the insertions absorbed.
    LocalMoves,
}

#[derive(Clone, Debug)]
pub struct DeformationReport {
    pub residual: f64,
    pub method: DeformationMethod,
    /// Sites carrying the bonds on which the two configurations differ.
    pub sites: Vec<Site>,
}

/// Compares the states with a string of `g` along `path1` or along `path2`.
///
/// The differing bonds are all absorbed into a small vertex cover `R`. When
/// the environment of `R` is contractible the difference is measured on the
/// global state as `tr(Δ M Δ†)` with `Δ = Φ¹_R − Φ²_R`; otherwise each site of
/// `R` must carry identical dressed tensors, which is the chain of local moves.
pub fn deformation_check(
    torus: &Torus,
    config: &AnyonConfig,
    path1: &DualPath,
    path2: &DualPath,
    g: usize,
) -> Result<DeformationReport> {
    if torus.size() != config.l {
        return Err(Error::DimensionMismatch("torus vs configuration size".into()));
    }
    if path1.start() != path2.start() || path1.end() != path2.end() {
        return Err(Error::NonHomotopic("endpoints differ".into()));
    }
    let w = path1.then(&path2.reversed())?.winding();
    if w != (0, 0) {
        return Err(Error::NonHomotopic(format!("relative winding {w:?}")));
    }
    let mut ins1 = apply_string(config, path1, g)?.insertions(None)?;
    let mut ins2 = apply_string(config, path2, g)?.insertions(None)?;
    let l = config.l;
    let d = torus.bond_dim();
    let id = la::identity(d);
    let keys: BTreeSet<Bond> = ins1.bonds().chain(ins2.bonds()).copied().collect();
    let differing: Vec<Bond> = keys
        .into_iter()
        .filter(|b| {
            let a = ins1.get(b).unwrap_or(&id);
            let c = ins2.get(b).unwrap_or(&id);
            la::max_abs_diff(a, c) > 0.0
        })
        .collect();
    if differing.is_empty() {
        return Ok(DeformationReport {
            residual: 0.0,
            method: DeformationMethod::LocalMoves,
            sites: Vec::new(),
        });
    }
    let cover = vertex_cover(&differing, l);
    for b in &differing {
        if !cover.contains(&b.source()) {
            ins1.absorb_at_target(*b);
            ins2.absorb_at_target(*b);
        }
    }
    let global = d.checked_pow(4 * l as u32).is_some_and(|n| n <= GLOBAL_ENV_CAP);
    if global {
        let region = Region::from_sites(&cover, l)?;
        let phi1 = torus.region_map(&region, &ins1, REGION_MAP_CAP)?;
        let phi2 = torus.region_map(&region, &ins2, REGION_MAP_CAP)?;
        let m = torus.environment(&region, &ins1, &ins1)?;
        let delta = &phi1 - &phi2;
        let num = delta.dot(&m).dot(&dagger(&delta)).diag().sum().re.max(0.0);
        let den = phi1.dot(&m).dot(&dagger(&phi1)).diag().sum().re;
        if den <= 0.0 {
            return Err(Error::Numerical("state has zero norm".into()));
        }
        Ok(DeformationReport {
            residual: (num / den).sqrt(),
            method: DeformationMethod::Global,
            sites: cover,
        })
    } else {
        let residual = cover
            .iter()
            .map(|&s| {
                let a = torus.dressed_tensor(s, &ins1);
                let b = torus.dressed_tensor(s, &ins2);
                max_abs_diff5(&a.data, &b.data)
            })
            .fold(0.0, f64::max);
        Ok(DeformationReport {
            residual,
            method: DeformationMethod::LocalMoves,
            sites: cover,
        })
    }
}

/// Greedy vertex cover of the given bonds.
fn vertex_cover(bonds: &[Bond], l: usize) -> Vec<Site> {
    let mut left: Vec<Bond> = bonds.to_vec();
    let mut cover = Vec::new();
    while !left.is_empty() {
        let mut count: BTreeMap<Site, usize> = BTreeMap::new();
        for b in &left {
            *count.entry(b.source()).or_default() += 1;
            *count.entry(b.target(l)).or_default() += 1;
        }
        let best = count
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(s, _)| *s)
            .expect("non-empty");
        cover.push(best);
        left.retain(|b| b.source() != best && b.target(l) != best);
    }
    cover.sort_unstable();
    cover
}

/// `⟨h_p⟩` for every plaquette term in the normalised anyon state; entry
/// `[i, j]` belongs to face `(i, j)`.
pub fn fluxon_energy_profile(
    torus: &Torus,
    config: &AnyonConfig,
    table: Option<&CharacterTable>,
) -> Result<Array2<f64>> {
    let l = config.l;
    if torus.size() != l {
        return Err(Error::DimensionMismatch("torus vs configuration size".into()));
    }
    let ins = config.insertions(table)?;
    let mut out = Array2::zeros((l, l));
    for i in 0..l {
        for j in 0..l {
            out[[i, j]] = hamiltonian::plaquette_energy(torus, (i, j), &ins)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct FluxonDetection {
    /// Probability of each raw outcome `x h x⁻¹` over a uniform hidden `x`.
    pub outcomes: Vec<f64>,
    /// Conjugacy class of the outcomes.
    pub class: usize,
    pub class_probability: f64,
}

/// Exact measurement statistics of the flux through face `f`.
pub fn detect_fluxon(config: &AnyonConfig, f: Face) -> Result<FluxonDetection> {
    if f.0 >= config.l || f.1 >= config.l {
        return Err(Error::OutOfBounds(format!("face {f:?}")));
    }
    Ok(flux_statistics(config.group(), config.face_holonomy(f)))
}

/// Outcome distribution of a flux measurement on holonomy `h`.
pub fn flux_statistics(g: &FiniteGroup, h: usize) -> FluxonDetection {
    let n = g.order();
    let mut outcomes = vec![0.0; n];
    for x in 0..n {
        outcomes[g.conj(x, h)] += 1.0 / n as f64;
    }
    let classes = g.conjugacy_classes();
    let class = classes.class_of[h];
    let class_probability = classes.classes[class].iter().map(|&k| outcomes[k]).sum();
    FluxonDetection {
        outcomes,
        class,
        class_probability,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathEnd {
    Start,
    End,
}

/// Moves one end of string `index` to the adjacent face `target`.
pub fn move_fluxon(config: &AnyonConfig, index: usize, end: PathEnd, target: Face) -> Result<AnyonConfig> {
    let l = config.l;
    let s = config
        .strings
        .get(index)
        .ok_or_else(|| Error::OutOfBounds(format!("string {index}")))?;
    let from = match end {
        PathEnd::Start => s.path.start(),
        PathEnd::End => s.path.end(),
    };
    let step = Step::ALL
        .into_iter()
        .find(|&st| cross(from, st, l).1 == target)
        .ok_or(Error::NotAdjacent)?;
    let path = match end {
        PathEnd::End => s.path.then(&DualPath::new(from, vec![step], l)?)?,
        PathEnd::Start => DualPath::new(target, vec![step.reverse()], l)?.then(&s.path)?,
    };
    let mut out = config.clone();
    out.strings[index].path = path.simplified();
    Ok(out)
}

/// Equal-weight superposition `Σ_z |(z g z⁻¹, z g⁻¹ z⁻¹)⟩` of strings along
/// one path; each conjugate appears once with amplitude `1/√|C[g]|`.
#[derive(Clone, Debug)]
pub struct ClassSuperposition {
    pub class: usize,
    pub members: Vec<AnyonConfig>,
    pub amplitude: f64,
}

impl ClassSuperposition {
    /// `‖Σ_k a |ψ_k⟩‖²` by exact overlaps.
    pub fn norm_sq(&self, torus: &Torus) -> Result<f64> {
        let ins: Vec<Insertions> = self.members.iter().map(|m| m.insertions(None)).collect::<Result<_>>()?;
        let mut s = 0.0;
        for a in &ins {
            for b in &ins {
                s += torus.overlap(a, b)?.re;
            }
        }
        Ok(s * self.amplitude * self.amplitude)
    }
}

pub fn create_fluxon_pair(config: &AnyonConfig, path: &DualPath, g: usize) -> Result<ClassSuperposition> {
    let classes = config.group().conjugacy_classes();
    let class = classes.class_of[g];
    let members = classes.classes[class]
        .iter()
        .map(|&m| apply_string(config, path, m))
        .collect::<Result<Vec<_>>>()?;
    let amplitude = 1.0 / (members.len() as f64).sqrt();
    Ok(ClassSuperposition {
        class,
        members,
        amplitude,
    })
}

#[derive(Clone, Debug)]
pub struct FluxBraidReport {
    /// Label of the braided endpoint before, seen from the base site.
    pub before: usize,
    /// `g h g⁻¹` by group arithmetic.
    pub predicted: usize,
    /// Label after the braid, from the bond elements.
    pub after: usize,
    /// Label after the braid, transported with the insertion matrices.
    pub after_from_matrices: usize,
    /// Conjugacy class of `after · h⁻¹`.
    pub joint_flux_class: usize,
    pub class_preserved: bool,
    /// Configuration after the braid.
    pub config: AnyonConfig,
}

/// Drags the end of a `g` string counter-clockwise around the start of an `h`
/// string. On an `L × L` torus (`L ≥ 4`) the `h` string runs west from face
/// `(1, 1)` to `(1, L−1)`; the `g` string starts at `(3, 0)`, enters the ring
/// of faces around `(1, 1)` at `(2, 0)` and goes once around it.
pub fn braid_flux_flux(rep: &Representation, l: usize, g: usize, h: usize) -> Result<FluxBraidReport> {
    if l < 4 {
        return Err(Error::InvalidInput("braiding needs L >= 4".into()));
    }
    let grp = &rep.group;
    let base: Site = (0, 0);
    let b1: Face = (1, 1);
    let config = AnyonConfig::new(rep, l)?;
    let config = apply_string(&config, &DualPath::from_word(b1, "WW", l)?, h)?;
    let before = config.based_holonomy(b1, base);
    let a = DualPath::from_word((3, 0), "N", l)?;
    let ring = DualPath::from_word((2, 0), "EENNWWSS", l)?;
    let braided = apply_string(&config, &a.then(&ring)?, g)?;
    let after = braided.based_holonomy(b1, base);
    let after_from_matrices = braided.based_holonomy_from_matrices(b1, base)?;
    let classes = grp.conjugacy_classes();
    Ok(FluxBraidReport {
        before,
        predicted: grp.conj(g, before),
        after,
        after_from_matrices,
        joint_flux_class: classes.class_of[grp.mul(after, grp.inv(before))],
        class_preserved: classes.class_of[after] == classes.class_of[before],
        config: braided,
    })
}

/// `Σ_g χ_c(p g)|g⟩⟨g|` in the regular basis.
pub fn chargeon_edge_operator(rep: &Representation, table: &CharacterTable, c: usize, p: usize) -> Result<Array2<C64>> {
    check_regular_basis(rep)?;
    if c >= table.len() {
        return Err(Error::UnknownIrrep(c.to_string()));
    }
    let g = &rep.group;
    Ok(Array2::from_diag(&Array1::from_iter(
        (0..g.order()).map(|x| table.chi(c, g.mul(p, x))),
    )))
}

/// `Π_{c,p} = Σ_{g,h} χ_c(p h⁻¹ g)|g,h⟩⟨g,h|` on the two bonds of a pair.
pub fn chargeon_pair_operator(g: &FiniteGroup, table: &CharacterTable, c: usize, p: usize) -> Result<Array2<C64>> {
    if c >= table.len() {
        return Err(Error::UnknownIrrep(c.to_string()));
    }
    let n = g.order();
    let diag = (0..n * n).map(|k| {
        let (a, b) = (k / n, k % n);
        table.chi(c, g.mul(g.mul(p, g.inv(b)), a))
    });
    Ok(Array2::from_diag(&Array1::from_iter(diag)))
}

/// `max_x ‖(U_x⊗U_x) Π (U_x⊗U_x)† − Π‖` for the regular representation.
pub fn chargeon_pair_invariance_defect(g: &FiniteGroup, pi: &Array2<C64>) -> f64 {
    let reg = Representation::regular(g);
    reg.mats
        .iter()
        .map(|u| {
            let uu = la::kron(u, u);
            la::max_abs_diff(&uu.dot(pi).dot(&dagger(&uu)), pi)
        })
        .fold(0.0, f64::max)
}

fn check_regular_basis(rep: &Representation) -> Result<()> {
    if crate::peps::is_regular(rep) {
        Ok(())
    } else {
        Err(Error::InvalidInput("chargeons need the regular representation".into()))
    }
}

/// `v_h^c = Σ_k χ_c(h k)|k⟩`.
pub fn charge_detector(g: &FiniteGroup, table: &CharacterTable, c: usize, h: usize) -> Array1<C64> {
    Array1::from_iter((0..g.order()).map(|k| table.chi(c, g.mul(h, k))))
}

#[derive(Clone, Debug)]
pub struct ChargeDetection {
    pub irrep: usize,
    /// `Σ_h |⟨v_h^c, w⟩|²` per irrep, normalised to sum 1.
    pub weights: Vec<f64>,
}

/// Identifies the irrep of an edge operator's diagonal `w`.
pub fn detect_chargeon(g: &FiniteGroup, table: &CharacterTable, w: &Array1<C64>) -> Result<ChargeDetection> {
    if w.len() != g.order() {
        return Err(Error::DimensionMismatch("edge operator vs group order".into()));
    }
    let mut weights: Vec<f64> = (0..table.len())
        .map(|c| {
            (0..g.order())
                .map(|h| {
                    let v = charge_detector(g, table, c, h);
                    v.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<C64>().norm_sqr()
                })
                .sum()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical("edge operator carries no charge".into()));
    }
    for x in weights.iter_mut() {
        *x /= total;
    }
    let irrep = (0..weights.len())
        .max_by(|&a, &b| weights[a].total_cmp(&weights[b]))
        .expect("non-empty table");
    Ok(ChargeDetection { irrep, weights })
}

/// Largest overlap `|⟨v_h^c, v_{h'}^{c'}⟩|` between detectors of different irreps.
pub fn charge_detector_orthogonality_defect(g: &FiniteGroup, table: &CharacterTable) -> f64 {
    let vs: Vec<(usize, Array1<C64>)> = (0..table.len())
        .flat_map(|c| (0..g.order()).map(move |h| (c, h)))
        .map(|(c, h)| (c, charge_detector(g, table, c, h)))
        .collect();
    let mut worst: f64 = 0.0;
    for (c1, v1) in &vs {
        for (c2, v2) in &vs {
            if c1 != c2 {
                let ip: C64 = v1.iter().zip(v2).map(|(a, b)| a.conj() * b).sum();
                worst = worst.max(ip.norm());
            }
        }
    }
    worst
}

#[derive(Clone, Debug)]
pub struct FluxChargeBraid {
    /// `p k⁻¹`.
    pub new_p: usize,
    /// `|χ_c(k)/d_c|²` from the character table.
    pub probability: f64,
    /// `|⟨Π_{c,p}|Π_{c,pk⁻¹}⟩|²/‖Π_{c,p}‖⁴` from explicit state vectors.
    pub probability_from_overlap: f64,
    /// `‖L_k D_{c,p} L_k† − D_{c,pk⁻¹}‖`.
    pub covariance_residual: f64,
}

/// Takes flux `k` around one member of a `(c, p)` chargeon pair.
pub fn braid_flux_charge(g: &FiniteGroup, table: &CharacterTable, c: usize, p: usize, k: usize) -> Result<FluxChargeBraid> {
    let new_p = g.mul(p, g.inv(k));
    let d = table.dims[c] as f64;
    let probability = (table.chi(c, k) / d).norm_sqr();
    let before = chargeon_pair_operator(g, table, c, p)?.diag().to_owned();
    let after = chargeon_pair_operator(g, table, c, new_p)?.diag().to_owned();
    let ip: C64 = before.iter().zip(&after).map(|(a, b)| a.conj() * b).sum();
    let nb = la::norm(&before).powi(2);
    let probability_from_overlap = ip.norm_sqr() / (nb * nb);
    let reg = Representation::regular(g);
    let lk = reg.mat(k);
    let dp = chargeon_edge_operator(&reg, table, c, p)?;
    let dn = chargeon_edge_operator(&reg, table, c, new_p)?;
    let covariance_residual = la::max_abs_diff(&lk.dot(&dp).dot(&dagger(lk)), &dn);
    Ok(FluxChargeBraid {
        new_p,
        probability,
        probability_from_overlap,
        covariance_residual,
    })
}

/// Scenario document: `{"L", "twist", "fluxons": [{"g", "start", "steps"}],
/// "chargeons": [{"bond", "c", "p"}]}` with group elements and irreps given by
/// label and bonds as `h{r}_{c}` / `v{r}_{c}`.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct AnyonScenario {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub twist: Option<(String, String)>,
    #[serde(default)]
    pub fluxons: Vec<StringSpec>,
    #[serde(default)]
    pub chargeons: Vec<ChargeonSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StringSpec {
    pub g: String,
    pub start: (usize, usize),
    pub steps: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ChargeonSpec {
    pub bond: String,
    pub c: String,
    pub p: String,
}

impl AnyonScenario {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_config(&self, rep: &Representation, table: Option<&CharacterTable>) -> Result<AnyonConfig> {
        let g = &rep.group;
        let mut cfg = AnyonConfig::new(rep, self.l)?;
        if let Some((a, b)) = &self.twist {
            cfg = cfg.with_twist(g.parse_element(a)?, g.parse_element(b)?)?;
        }
        for f in &self.fluxons {
            let path = DualPath::from_word(f.start, &f.steps, self.l)?;
            cfg = apply_string(&cfg, &path, g.parse_element(&f.g)?)?;
        }
        for ch in &self.chargeons {
            let table = table.ok_or(Error::IrrepsUnavailable)?;
            let bond = parse_bond(&ch.bond, self.l)?;
            cfg.chargeons.push(ChargeonDefect {
                bond,
                irrep: table.find(&ch.c)?,
                p: g.parse_element(&ch.p)?,
            });
        }
        Ok(cfg)
    }
}

/// Parses `h{r}_{c}` or `v{r}_{c}`.
pub fn parse_bond(s: &str, l: usize) -> Result<Bond> {
    let bad = || Error::InvalidInput(format!("bad bond '{s}'"));
    let t = s.trim();
    let dir = match t.chars().next() {
        Some('h') | Some('H') => Dir::H,
        Some('v') | Some('V') => Dir::V,
        _ => return Err(bad()),
    };
    let (r, c) = t[1..].split_once('_').ok_or_else(bad)?;
    let r: usize = r.parse().map_err(|_| bad())?;
    let c: usize = c.parse().map_err(|_| bad())?;
    if r >= l || c >= l {
        return Err(Error::OutOfBounds(format!("bond {s}")));
    }
    Ok(Bond { dir, r, c })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s3() -> (FiniteGroup, CharacterTable) {
        let g = FiniteGroup::builtin("S3").unwrap();
        let t = g.character_table().unwrap();
        (g, t)
    }

    #[test]
    fn open_string_has_flux_only_at_ends() {
        let g = FiniteGroup::builtin("Z3").unwrap();
        let rep = Representation::regular(&g);
        let c = AnyonConfig::new(&rep, 4).unwrap();
        let c = apply_string(&c, &DualPath::from_word((0, 0), "EES", 4).unwrap(), 1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let h = c.face_holonomy((i, j));
                match (i, j) {
                    (0, 0) => assert_eq!(h, 1),
                    (1, 2) => assert_eq!(h, g.inv(1)),
                    _ => assert_eq!(h, 0),
                }
            }
        }
    }

    #[test]
    fn crossings_round_trip() {
        let p = DualPath::from_word((1, 2), "NNWSEE", 3).unwrap();
        let q = DualPath::from_crossings((1, 2), &p.crossings(), 3).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.reversed().reversed(), p);
        assert_eq!(DualPath::from_word((0, 0), "EEE", 3).unwrap().winding(), (1, 0));
        assert!(DualPath::from_word((0, 0), "ENWS", 3).unwrap().is_closed());
    }

    #[test]
    fn move_and_back_restores() {
        let g = FiniteGroup::builtin("Z2").unwrap();
        let rep = Representation::regular(&g);
        let c = AnyonConfig::new(&rep, 3).unwrap();
        let c = apply_string(&c, &DualPath::from_word((0, 0), "E", 3).unwrap(), 1).unwrap();
        let m = move_fluxon(&c, 0, PathEnd::End, (1, 1)).unwrap();
        let back = move_fluxon(&m, 0, PathEnd::End, (0, 1)).unwrap();
        assert_eq!(back.bond_elements(), c.bond_elements());
        assert!(matches!(move_fluxon(&c, 0, PathEnd::End, (2, 2)), Err(Error::NotAdjacent)));
    }

    #[test]
    fn s3_braid_conjugates_label() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let rep = Representation::regular(&g);
        let a = g.parse_element("(12)").unwrap();
        let b = g.parse_element("(13)").unwrap();
        let r = braid_flux_flux(&rep, 4, a, b).unwrap();
        assert_eq!(r.before, b);
        assert_eq!(r.after, g.parse_element("(23)").unwrap());
        assert_eq!(r.after, r.predicted);
        assert_eq!(r.after_from_matrices, r.after);
        assert!(r.class_preserved);
    }

    #[test]
    fn flux_charge_probabilities() {
        let (g, t) = s3();
        let c = t.find("2dim").unwrap();
        let tr = g.parse_element("(12)").unwrap();
        let cyc = g.parse_element("(123)").unwrap();
        let a = braid_flux_charge(&g, &t, c, 0, tr).unwrap();
        let b = braid_flux_charge(&g, &t, c, 0, cyc).unwrap();
        assert!(a.probability.abs() < 1e-12 && a.probability_from_overlap.abs() < 1e-12);
        assert!((b.probability - 0.25).abs() < 1e-12);
        assert!((b.probability_from_overlap - 0.25).abs() < 1e-12);
        assert!(b.covariance_residual < 1e-12);
    }

    #[test]
    fn chargeon_detection_ignores_p() {
        let (g, t) = s3();
        let rep = Representation::regular(&g);
        assert!(charge_detector_orthogonality_defect(&g, &t) < 1e-12);
        for c in 0..t.len() {
            let pi = chargeon_pair_operator(&g, &t, c, 1).unwrap();
            assert!(chargeon_pair_invariance_defect(&g, &pi) < 1e-12);
            for p in 0..g.order() {
                let w = chargeon_edge_operator(&rep, &t, c, p).unwrap().diag().to_owned();
                assert_eq!(detect_chargeon(&g, &t, &w).unwrap().irrep, c);
            }
        }
    }

    #[test]
    fn scenario_parses() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let t = g.character_table().unwrap();
        let rep = Representation::regular(&g);
        let doc = r#"{"L": 3, "fluxons": [{"g": "(12)", "start": [0, 0], "steps": "E"}],
                      "chargeons": [{"bond": "h2_1", "c": "sign", "p": "e"}]}"#;
        let cfg = AnyonScenario::from_json(doc).unwrap().to_config(&rep, Some(&t)).unwrap();
        assert_eq!(cfg.strings.len(), 1);
        assert_eq!(cfg.chargeons[0].bond, Bond::h(2, 1));
        assert!(parse_bond("x1_1", 3).is_err());
    }
}

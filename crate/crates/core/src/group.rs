//! Finite groups from multiplication tables or permutation generators, with
//! conjugacy classes, commuting-pair classes, Burnside character tables and
//! unitary representations.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::PI;

use ndarray::Array2;
use ndarray_linalg::Eig;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::la::{self, c, dagger, identity, ONE, ZERO};

pub const DEFAULT_MAX_ORDER: usize = 24;
const ROUND_TOL: f64 = 1e-8;

/// Explicit unitary irrep, indexed by group element.
#[derive(Clone, Debug)]
pub struct Irrep {
    pub label: String,
    pub dim: usize,
    pub mats: Vec<Array2<C64>>,
}

#[derive(Clone, Debug)]
pub struct FiniteGroup {
    name: String,
    mult: Vec<Vec<usize>>,
    inv: Vec<usize>,
    labels: Vec<String>,
    irreps: Option<Vec<Irrep>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjClassSet {
    pub classes: Vec<Vec<usize>>,
    pub representatives: Vec<usize>,
    /// `class_of[g]` is the index of the class containing `g`.
    pub class_of: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PairClassSet {
    pub pairs: Vec<(usize, usize)>,
    pub classes: Vec<Vec<(usize, usize)>>,
    pub representatives: Vec<(usize, usize)>,
}

impl PairClassSet {
    pub fn count(&self) -> usize {
        self.classes.len()
    }
}

#[derive(Clone, Debug)]
pub struct CharacterTable {
    pub classes: ConjClassSet,
    /// `rows[i][k]` is the character of irrep `i` on class `k`.
    pub rows: Vec<Vec<C64>>,
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
}

impl CharacterTable {
    pub fn chi(&self, irrep: usize, g: usize) -> C64 {
        self.rows[irrep][self.classes.class_of[g]]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Resolves a label, an alias (`trivial`, `sign`, `2dim`) or a row index.
    pub fn find(&self, key: &str) -> Result<usize> {
        let k = key.trim();
        if let Some(i) = self.labels.iter().position(|l| l == k) {
            return Ok(i);
        }
        match k {
            "trivial" => return Ok(0),
            "sign" => {
                let ones: Vec<usize> = (0..self.len()).filter(|&i| self.dims[i] == 1).collect();
                if ones.len() == 2 {
                    return Ok(ones[1]);
                }
            }
            _ => {}
        }
        if let Some(d) = k.strip_suffix("dim").and_then(|d| d.parse::<usize>().ok()) {
            let hits: Vec<usize> = (0..self.len()).filter(|&i| self.dims[i] == d).collect();
            if hits.len() == 1 {
                return Ok(hits[0]);
            }
        }
        if let Ok(i) = k.parse::<usize>() {
            if i < self.len() {
                return Ok(i);
            }
        }
        Err(Error::UnknownIrrep(key.to_string()))
    }
}

#[derive(Deserialize)]
struct GroupSpecDoc {
    name: Option<String>,
    table: Option<Vec<Vec<usize>>>,
    permutation_generators: Option<Vec<Vec<Vec<usize>>>>,
}

impl FiniteGroup {
    /// Validates a multiplication table. If the identity is not element 0 the
    /// elements are relabelled so that it is.
    pub fn from_table(name: &str, table: Vec<Vec<usize>>) -> Result<Self> {
        Self::from_table_capped(name, table, DEFAULT_MAX_ORDER)
    }

    pub fn from_table_capped(name: &str, table: Vec<Vec<usize>>, cap: usize) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty table".into()));
        }
        if n > cap {
            return Err(Error::cap("group order", n, cap));
        }
        for row in &table {
            if row.len() != n {
                return Err(Error::InvalidGroup("table is not square".into()));
            }
            if row.iter().any(|&x| x >= n) {
                return Err(Error::InvalidGroup("entry out of range".into()));
            }
        }
        for i in 0..n {
            let mut seen_row = vec![false; n];
            let mut seen_col = vec![false; n];
            for j in 0..n {
                seen_row[table[i][j]] = true;
                seen_col[table[j][i]] = true;
            }
            if seen_row.iter().chain(seen_col.iter()).any(|s| !s) {
                return Err(Error::InvalidGroup("table is not a Latin square".into()));
            }
        }
        let e = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::InvalidGroup("identity missing".into()))?;
        for a in 0..n {
            for b in 0..n {
                for cc in 0..n {
                    if table[table[a][b]][cc] != table[a][table[b][cc]] {
                        return Err(Error::InvalidGroup(format!(
                            "not associative at ({a},{b},{cc})"
                        )));
                    }
                }
            }
        }
        // swap e <-> 0
        let relabel: Vec<usize> = (0..n)
            .map(|g| if g == e { 0 } else if g == 0 { e } else { g })
            .collect();
        let mut mult = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                mult[relabel[a]][relabel[b]] = relabel[table[a][b]];
            }
        }
        let inv = (0..n)
            .map(|g| (0..n).find(|&h| mult[g][h] == 0).expect("Latin square"))
            .collect();
        Ok(FiniteGroup {
            name: name.to_string(),
            mult,
            inv,
            labels: (0..n).map(|g| g.to_string()).collect(),
            irreps: None,
        })
    }

    /// Closure of permutation generators given in cycle notation on points
    /// `1..=m`. Products compose right to left: `(gh)(x) = g(h(x))`.
    pub fn from_permutations(name: &str, generators: &[Vec<Vec<usize>>]) -> Result<Self> {
        let degree = generators
            .iter()
            .flatten()
            .flatten()
            .cloned()
            .max()
            .unwrap_or(1);
        let mut gens = Vec::new();
        for cycles in generators {
            let mut p: Vec<usize> = (0..degree).collect();
            let mut used = vec![false; degree];
            for cyc in cycles {
                for (k, &x) in cyc.iter().enumerate() {
                    if x == 0 || used[x - 1] {
                        return Err(Error::InvalidGroup(format!("bad cycle {cyc:?}")));
                    }
                    used[x - 1] = true;
                    p[x - 1] = cyc[(k + 1) % cyc.len()] - 1;
                }
            }
            gens.push(p);
        }
        let compose = |g: &[usize], h: &[usize]| -> Vec<usize> { h.iter().map(|&x| g[x]).collect() };
        let id: Vec<usize> = (0..degree).collect();
        let elems = bfs_closure(id, &gens, |a, b| compose(a, b), DEFAULT_MAX_ORDER)?;
        let index: HashMap<Vec<usize>, usize> =
            elems.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let n = elems.len();
        let mult = (0..n)
            .map(|a| (0..n).map(|b| index[&compose(&elems[a], &elems[b])]).collect())
            .collect();
        let mut g = Self::from_table(name, mult)?;
        g.labels = elems.iter().map(|p| cycle_label(p)).collect();
        Ok(g)
    }

    /// Parses a group-spec JSON document or a built-in name.
    pub fn load(spec: &str) -> Result<Self> {
        let t = spec.trim();
        if !t.starts_with('{') {
            return Self::builtin(t);
        }
        let doc: GroupSpecDoc = serde_json::from_str(t)?;
        let name = doc.name.unwrap_or_else(|| "custom".into());
        match (doc.table, doc.permutation_generators) {
            (Some(table), None) => Self::from_table(&name, table),
            (None, Some(gens)) => Self::from_permutations(&name, &gens),
            _ => Err(Error::InvalidGroup(
                "spec needs exactly one of `table` or `permutation_generators`".into(),
            )),
        }
    }

    /// Built-in groups carrying explicit irrep matrices:
    /// `Z<n>`, `S3`, `D4`, `Q8`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "S3" => Ok(s3()),
            "D4" => Ok(d4()),
            "Q8" => Ok(q8()),
            _ => {
                let n = name
                    .strip_prefix('Z')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&n| (1..=DEFAULT_MAX_ORDER).contains(&n))
                    .ok_or_else(|| Error::InvalidGroup(format!("unknown group `{name}`")))?;
                Ok(cyclic(n))
            }
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.mult.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mult[g][h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inv[g]
    }

    pub fn table(&self) -> &[Vec<usize>] {
        &self.mult
    }

    /// `x g x⁻¹`
    pub fn conj(&self, x: usize, g: usize) -> usize {
        self.mul(self.mul(x, g), self.inv(x))
    }

    pub fn commutes(&self, g: usize, h: usize) -> bool {
        self.mul(g, h) == self.mul(h, g)
    }

    pub fn label(&self, g: usize) -> &str {
        &self.labels[g]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_abelian(&self) -> bool {
        let n = self.order();
        (0..n).all(|g| (0..n).all(|h| self.commutes(g, h)))
    }

    /// Looks an element up by label (whitespace-insensitive) or index.
    pub fn parse_element(&self, s: &str) -> Result<usize> {
        let key: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Some(i) = self
            .labels
            .iter()
            .position(|l| l.chars().filter(|c| !c.is_whitespace()).collect::<String>() == key)
        {
            return Ok(i);
        }
        if self.order() == 2 && key == "-1" {
            return Ok(1);
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.order() => Ok(i),
            _ => Err(Error::InvalidInput(format!(
                "no element `{s}` in {}",
                self.name
            ))),
        }
    }

    pub fn irreps(&self) -> Result<&[Irrep]> {
        self.irreps.as_deref().ok_or(Error::IrrepsUnavailable)
    }

    pub fn conjugacy_classes(&self) -> ConjClassSet {
        let n = self.order();
        let mut class_of = vec![usize::MAX; n];
        let mut classes = Vec::new();
        for g in 0..n {
            if class_of[g] != usize::MAX {
                continue;
            }
            let k = classes.len();
            let mut cls: Vec<usize> = (0..n).map(|x| self.conj(x, g)).collect();
            cls.sort_unstable();
            cls.dedup();
            for &h in &cls {
                class_of[h] = k;
            }
            classes.push(cls);
        }
        let representatives = classes.iter().map(|c| c[0]).collect();
        ConjClassSet {
            classes,
            representatives,
            class_of,
        }
    }

    pub fn centralizer(&self, h: usize) -> Vec<usize> {
        (0..self.order()).filter(|&x| self.commutes(x, h)).collect()
    }

    /// Number of conjugacy classes of the subgroup `sub` (conjugation by
    /// elements of `sub` only).
    pub fn subgroup_class_count(&self, sub: &[usize]) -> usize {
        let mut seen = vec![false; self.order()];
        let mut count = 0;
        for &g in sub {
            if seen[g] {
                continue;
            }
            count += 1;
            for &x in sub {
                seen[self.conj(x, g)] = true;
            }
        }
        count
    }

    /// Commuting pairs partitioned into orbits of simultaneous conjugation.
    pub fn commuting_pair_classes(&self) -> PairClassSet {
        let n = self.order();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|g| (0..n).map(move |h| (g, h)))
            .filter(|&(g, h)| self.commutes(g, h))
            .collect();
        let mut seen = vec![vec![false; n]; n];
        let mut classes = Vec::new();
        for &(g, h) in &pairs {
            if seen[g][h] {
                continue;
            }
            let mut orbit: Vec<(usize, usize)> =
                (0..n).map(|x| (self.conj(x, g), self.conj(x, h))).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &(a, b) in &orbit {
                seen[a][b] = true;
            }
            classes.push(orbit);
        }
        let representatives = classes.iter().map(|c| c[0]).collect();
        PairClassSet {
            pairs,
            classes,
            representatives,
        }
    }

    /// Σ over class representatives `h` of the class count of `N[h]`.
    pub fn pair_class_count_by_centralizers(&self) -> usize {
        self.conjugacy_classes()
            .representatives
            .iter()
            .map(|&h| self.subgroup_class_count(&self.centralizer(h)))
            .sum()
    }

    /// Character table by simultaneous diagonalization of the class-sum
    /// multiplication matrices (Burnside).
    pub fn character_table(&self) -> Result<CharacterTable> {
        let n = self.order();
        let cls = self.conjugacy_classes();
        let k = cls.classes.len();
        // coef[i][j][l] = #{(x∈C_i, y∈C_j) : xy = rep_l}
        let mut coef = vec![vec![vec![0.0f64; k]; k]; k];
        for (i, class) in cls.classes.iter().enumerate() {
            for &x in class {
                for (l, &z) in cls.representatives.iter().enumerate() {
                    let y = self.mul(self.inv(x), z);
                    coef[i][cls.class_of[y]][l] += 1.0;
                }
            }
        }
        let sizes: Vec<f64> = cls.classes.iter().map(|c| c.len() as f64).collect();
        let mut rng = la::rng(0x5eed);
        for _attempt in 0..8 {
            let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = Array2::from_shape_fn((k, k), |(j, l)| {
                c((0..k).map(|i| weights[i] * coef[i][j][l]).sum())
            });
            let (vals, vecs) = a.eig()?;
            let sep = (0..k)
                .flat_map(|p| (0..p).map(move |q| (p, q)))
                .map(|(p, q)| (vals[p] - vals[q]).norm())
                .fold(f64::INFINITY, f64::min);
            if sep < 1e-6 {
                continue;
            }
            let mut rows = Vec::with_capacity(k);
            let mut dims = Vec::with_capacity(k);
            for col in 0..k {
                let v = vecs.column(col);
                if v[0].norm() < 1e-12 {
                    return Err(Error::Numerical("class-sum eigenvector vanishes at identity".into()));
                }
                let omega: Vec<C64> = v.iter().map(|&x| x / v[0]).collect();
                let s: f64 = (0..k).map(|l| omega[l].norm_sqr() / sizes[l]).sum();
                let d = (n as f64 / s).sqrt();
                let row: Vec<C64> = (0..k).map(|l| round_gauss(omega[l] * d / sizes[l])).collect();
                dims.push(d.round() as usize);
                rows.push(row);
            }
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&p, &q| {
                let key = |r: usize| -> Vec<i64> {
                    rows[r]
                        .iter()
                        .flat_map(|z| [-(z.re * 1e6).round() as i64, -(z.im * 1e6).round() as i64])
                        .collect()
                };
                (dims[p], key(p)).cmp(&(dims[q], key(q)))
            });
            let rows: Vec<Vec<C64>> = order.iter().map(|&i| rows[i].clone()).collect();
            let dims: Vec<usize> = order.iter().map(|&i| dims[i]).collect();
            let table = CharacterTable {
                labels: self.row_labels(&rows, &cls),
                classes: cls,
                rows,
                dims,
            };
            if self.orthonormality_defect(&table) > 1e-8 {
                return Err(Error::Numerical("character rows are not orthonormal".into()));
            }
            return Ok(table);
        }
        Err(Error::Numerical("could not separate class-sum eigenspaces".into()))
    }

    fn row_labels(&self, rows: &[Vec<C64>], cls: &ConjClassSet) -> Vec<String> {
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let by_irrep = self.irreps.as_ref().and_then(|irs| {
                    irs.iter().find(|ir| {
                        cls.representatives.iter().enumerate().all(|(l, &g)| {
                            (trace(&ir.mats[g]) - row[l]).norm() < 1e-8
                        })
                    })
                });
                match by_irrep {
                    Some(ir) => ir.label.clone(),
                    None if i == 0 => "trivial".into(),
                    None => format!("chi{i}"),
                }
            })
            .collect()
    }

    /// max |⟨χ_i, χ_j⟩ − δ_ij| under the class-weighted inner product.
    pub fn orthonormality_defect(&self, t: &CharacterTable) -> f64 {
        let n = self.order() as f64;
        let mut worst: f64 = 0.0;
        for i in 0..t.len() {
            for j in 0..t.len() {
                let ip: C64 = t
                    .classes
                    .classes
                    .iter()
                    .enumerate()
                    .map(|(l, cl)| t.rows[i][l].conj() * t.rows[j][l] * cl.len() as f64)
                    .sum::<C64>()
                    / n;
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).norm());
            }
        }
        worst
    }
}

fn round_gauss(z: C64) -> C64 {
    let r = |x: f64| {
        if (x - x.round()).abs() < ROUND_TOL {
            x.round()
        } else {
            x
        }
    };
    C64::new(r(z.re), r(z.im))
}

fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

fn cycle_label(p: &[usize]) -> String {
    let mut seen = vec![false; p.len()];
    let mut out = String::new();
    for s in 0..p.len() {
        if seen[s] || p[s] == s {
            continue;
        }
        let mut cyc = vec![];
        let mut x = s;
        while !seen[x] {
            seen[x] = true;
            cyc.push((x + 1).to_string());
            x = p[x];
        }
        out.push_str(&format!("({})", cyc.join(" ")));
    }
    if out.is_empty() {
        "e".into()
    } else {
        out
    }
}

fn bfs_closure<T: Clone + Eq + std::hash::Hash>(
    id: T,
    gens: &[T],
    mul: impl Fn(&T, &T) -> T,
    cap: usize,
) -> Result<Vec<T>> {
    let mut elems = vec![id.clone()];
    let mut index: HashMap<T, usize> = HashMap::from([(id, 0)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for s in gens {
            let p = mul(&elems[i], s);
            if !index.contains_key(&p) {
                if elems.len() >= cap {
                    return Err(Error::cap("group order", elems.len() + 1, cap));
                }
                index.insert(p.clone(), elems.len());
                queue.push_back(elems.len());
                elems.push(p);
            }
        }
    }
    Ok(elems)
}

/// Builds a group from generator images under a list of representations.
/// `reps[0]` must be faithful; it is used to identify elements.
fn from_matrix_generators(
    name: &str,
    reps: Vec<(String, Vec<Array2<C64>>)>,
    label_of: impl Fn(&[Array2<C64>]) -> String,
    keep_first: bool,
) -> FiniteGroup {
    let ngen = reps[0].1.len();
    let key = |m: &Array2<C64>| -> Vec<i64> {
        m.iter()
            .flat_map(|z| [(z.re * 1e6).round() as i64, (z.im * 1e6).round() as i64])
            .collect()
    };
    let mut elems: Vec<Vec<Array2<C64>>> = vec![reps.iter().map(|(_, g)| identity(g[0].nrows())).collect()];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::from([(key(&elems[0][0]), 0)]);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        for s in 0..ngen {
            let p: Vec<Array2<C64>> = (0..reps.len())
                .map(|r| elems[i][r].dot(&reps[r].1[s]))
                .collect();
            let k = key(&p[0]);
            if let std::collections::hash_map::Entry::Vacant(e) = index.entry(k) {
                e.insert(elems.len());
                queue.push_back(elems.len());
                elems.push(p);
            }
        }
    }
    let n = elems.len();
    let mult: Vec<Vec<usize>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| index[&key(&elems[a][0].dot(&elems[b][0]))])
                .collect()
        })
        .collect();
    let inv = (0..n)
        .map(|g| (0..n).find(|&h| mult[g][h] == 0).expect("closed group"))
        .collect();
    let labels = elems.iter().map(|e| label_of(e)).collect();
    let skip = usize::from(!keep_first);
    let irreps = reps
        .iter()
        .enumerate()
        .skip(skip)
        .map(|(r, (label, g))| Irrep {
            label: label.clone(),
            dim: g[0].nrows(),
            mats: elems.iter().map(|e| e[r].clone()).collect(),
        })
        .collect();
    FiniteGroup {
        name: name.to_string(),
        mult,
        inv,
        labels,
        irreps: Some(irreps),
    }
}

fn scalar(z: C64) -> Array2<C64> {
    Array2::from_elem((1, 1), z)
}

fn perm_matrix(images: &[usize]) -> Array2<C64> {
    let n = images.len();
    let mut m = Array2::zeros((n, n));
    for (x, &y) in images.iter().enumerate() {
        m[[y, x]] = ONE;
    }
    m
}

fn perm_label(mats: &[Array2<C64>]) -> String {
    let p = &mats[0];
    let images: Vec<usize> = (0..p.ncols())
        .map(|x| (0..p.nrows()).find(|&y| p[[y, x]].re > 0.5).expect("permutation"))
        .collect();
    cycle_label(&images)
}

fn cyclic(n: usize) -> FiniteGroup {
    let reps = (0..n)
        .map(|k| {
            let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            (format!("chi{k}"), vec![scalar(w)])
        })
        .collect::<Vec<_>>();
    // chi1 is faithful; rotate it to the front for element identification.
    let mut ordered = reps.clone();
    if n > 1 {
        ordered.swap(0, 1);
    }
    let mut g = from_matrix_generators(&format!("Z{n}"), ordered, |_| String::new(), true);
    if let Some(irs) = g.irreps.as_mut() {
        irs.sort_by_key(|ir| ir.label[3..].parse::<usize>().unwrap_or(0));
        if n == 2 {
            irs[0].label = "trivial".into();
            irs[1].label = "sign".into();
        }
    }
    g.labels = (0..n).map(|k| k.to_string()).collect();
    g
}

fn s3() -> FiniteGroup {
    let s = perm_matrix(&[1, 0, 2]);
    let r = perm_matrix(&[1, 2, 0]);
    let (cs, sn) = ((2.0 * PI / 3.0).cos(), (2.0 * PI / 3.0).sin());
    let rot = Array2::from_shape_vec((2, 2), vec![c(cs), c(-sn), c(sn), c(cs)]).unwrap();
    let refl = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, c(-1.0)]).unwrap();
    from_matrix_generators(
        "S3",
        vec![
            ("perm".into(), vec![s, r]),
            ("trivial".into(), vec![scalar(ONE), scalar(ONE)]),
            ("sign".into(), vec![scalar(c(-1.0)), scalar(ONE)]),
            ("2dim".into(), vec![refl, rot]),
        ],
        perm_label,
        false,
    )
}

fn d4() -> FiniteGroup {
    let r = perm_matrix(&[1, 2, 3, 0]);
    let s = perm_matrix(&[0, 3, 2, 1]);
    let rot = Array2::from_shape_vec((2, 2), vec![ZERO, c(-1.0), ONE, ZERO]).unwrap();
    let refl = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, c(-1.0)]).unwrap();
    let one = |a: f64, b: f64| vec![scalar(c(a)), scalar(c(b))];
    from_matrix_generators(
        "D4",
        vec![
            ("perm".into(), vec![r, s]),
            ("trivial".into(), one(1.0, 1.0)),
            ("1b".into(), one(1.0, -1.0)),
            ("1c".into(), one(-1.0, 1.0)),
            ("1d".into(), one(-1.0, -1.0)),
            ("2dim".into(), vec![rot, refl]),
        ],
        perm_label,
        false,
    )
}

fn q8() -> FiniteGroup {
    let i = Array2::from_shape_vec((2, 2), vec![C64::i(), ZERO, ZERO, -C64::i()]).unwrap();
    let j = Array2::from_shape_vec((2, 2), vec![ZERO, ONE, c(-1.0), ZERO]).unwrap();
    let one = |a: f64, b: f64| vec![scalar(c(a)), scalar(c(b))];
    let names: BTreeMap<&str, Array2<C64>> = {
        let k = i.dot(&j);
        let mut m = BTreeMap::new();
        m.insert("1", identity(2));
        m.insert("-1", identity(2).mapv(|x| -x));
        m.insert("i", i.clone());
        m.insert("-i", i.mapv(|x| -x));
        m.insert("j", j.clone());
        m.insert("-j", j.mapv(|x| -x));
        m.insert("k", k.clone());
        m.insert("-k", k.mapv(|x| -x));
        m
    };
    from_matrix_generators(
        "Q8",
        vec![
            ("2dim".into(), vec![i.clone(), j.clone()]),
            ("trivial".into(), one(1.0, 1.0)),
            ("1b".into(), one(1.0, -1.0)),
            ("1c".into(), one(-1.0, 1.0)),
            ("1d".into(), one(-1.0, -1.0)),
        ],
        move |mats| {
            names
                .iter()
                .find(|(_, m)| la::max_abs_diff(m, &mats[0]) < 1e-9)
                .map(|(n, _)| n.to_string())
                .expect("Q8 element")
        },
        true,
    )
}

/// Unitary representation `g ↦ U_g`, one matrix per element index.
#[derive(Clone, Debug)]
pub struct Representation {
    pub group: FiniteGroup,
    pub mats: Vec<Array2<C64>>,
}

impl Representation {
    pub fn new(group: &FiniteGroup, mats: Vec<Array2<C64>>) -> Result<Self> {
        if mats.len() != group.order() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrices for a group of order {}",
                mats.len(),
                group.order()
            )));
        }
        let rep = Representation {
            group: group.clone(),
            mats,
        };
        let d = rep.dim();
        if rep.mats.iter().any(|m| m.dim() != (d, d)) {
            return Err(Error::DimensionMismatch("matrices of unequal size".into()));
        }
        if rep.homomorphism_defect() > 1e-10 {
            return Err(Error::InvalidInput("matrices do not form a representation".into()));
        }
        Ok(rep)
    }

    /// Left-regular representation `L_g|h⟩ = |gh⟩`.
    pub fn regular(group: &FiniteGroup) -> Self {
        let n = group.order();
        let mats = (0..n)
            .map(|g| {
                let mut m = Array2::zeros((n, n));
                for h in 0..n {
                    m[[group.mul(g, h), h]] = ONE;
                }
                m
            })
            .collect();
        Representation {
            group: group.clone(),
            mats,
        }
    }

    pub fn trivial(group: &FiniteGroup, dim: usize) -> Self {
        Representation {
            group: group.clone(),
            mats: vec![identity(dim); group.order()],
        }
    }

    /// Direct sum of the listed irreps (by label), block-diagonal in that order.
    pub fn from_irreps(group: &FiniteGroup, labels: &[&str]) -> Result<Self> {
        let irs = group.irreps()?;
        let chosen: Vec<&Irrep> = labels
            .iter()
            .map(|l| {
                irs.iter()
                    .find(|ir| ir.label == *l)
                    .ok_or_else(|| Error::UnknownIrrep(l.to_string()))
            })
            .collect::<Result<_>>()?;
        Ok(Self::direct_sum_of(group, &chosen))
    }

    /// Each irrep exactly once: the smallest semi-regular representation.
    pub fn minimal_semiregular(group: &FiniteGroup) -> Result<Self> {
        let irs = group.irreps()?;
        let mut sorted: Vec<&Irrep> = irs.iter().collect();
        sorted.sort_by_key(|ir| ir.dim);
        Ok(Self::direct_sum_of(group, &sorted))
    }

    fn direct_sum_of(group: &FiniteGroup, irs: &[&Irrep]) -> Self {
        let dim: usize = irs.iter().map(|ir| ir.dim).sum();
        let mats = (0..group.order())
            .map(|g| {
                let mut m = Array2::zeros((dim, dim));
                let mut off = 0;
                for ir in irs {
                    m.slice_mut(ndarray::s![off..off + ir.dim, off..off + ir.dim])
                        .assign(&ir.mats[g]);
                    off += ir.dim;
                }
                m
            })
            .collect();
        Representation {
            group: group.clone(),
            mats,
        }
    }

    pub fn dim(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn mat(&self, g: usize) -> &Array2<C64> {
        &self.mats[g]
    }

    pub fn character(&self, g: usize) -> C64 {
        trace(&self.mats[g])
    }

    /// Largest violation of `U_g U_h = U_{gh}` and unitarity.
    pub fn homomorphism_defect(&self) -> f64 {
        let g = &self.group;
        let n = g.order();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            let ua = &self.mats[a];
            worst = worst.max(la::max_abs_diff(&ua.dot(&dagger(ua)), &identity(self.dim())));
            for b in 0..n {
                let lhs = ua.dot(&self.mats[b]);
                worst = worst.max(la::max_abs_diff(&lhs, &self.mats[g.mul(a, b)]));
            }
        }
        worst
    }

    pub fn multiplicities(&self, table: &CharacterTable) -> Vec<usize> {
        let n = self.group.order() as f64;
        (0..table.len())
            .map(|i| {
                let m: C64 = (0..self.group.order())
                    .map(|g| table.chi(i, g).conj() * self.character(g))
                    .sum::<C64>()
                    / n;
                m.re.round().max(0.0) as usize
            })
            .collect()
    }

    pub fn is_semiregular(&self, table: &CharacterTable) -> bool {
        self.multiplicities(table).iter().all(|&m| m >= 1)
    }

    /// `Π_i = (d_i/|G|) Σ_g χ_i(g⁻¹) U_g`.
    pub fn irrep_projector(&self, table: &CharacterTable, i: usize) -> Array2<C64> {
        let g = &self.group;
        let scale = table.dims[i] as f64 / g.order() as f64;
        let mut p = Array2::zeros((self.dim(), self.dim()));
        for x in 0..g.order() {
            let w = table.chi(i, g.inv(x)) * scale;
            p.scaled_add(w, &self.mats[x]);
        }
        p
    }

    /// `Δ = (1/|G|) Σ_i (d_i/m_i) Π_i` over irreps present in the representation.
    pub fn delta_matrix(&self, table: &CharacterTable) -> Result<Array2<C64>> {
        let mults = self.multiplicities(table);
        let total: usize = mults.iter().zip(&table.dims).map(|(m, d)| m * d).sum();
        if total != self.dim() {
            return Err(Error::Numerical(format!(
                "decomposition covers dimension {total}, representation has {}",
                self.dim()
            )));
        }
        let n = self.group.order() as f64;
        let mut delta = Array2::zeros((self.dim(), self.dim()));
        for (i, &m) in mults.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let w = c(table.dims[i] as f64 / (m as f64 * n));
            delta.scaled_add(w, &self.irrep_projector(table, i));
        }
        Ok(delta)
    }

    /// `max_g ‖Σ_h tr[U_{gh⁻¹} Δ] U_h − U_g‖_max`.
    pub fn delta_reconstruction_defect(&self, table: &CharacterTable) -> Result<f64> {
        let delta = self.delta_matrix(table)?;
        let g = &self.group;
        let mut worst: f64 = 0.0;
        for x in 0..g.order() {
            let mut acc: Array2<C64> = Array2::zeros((self.dim(), self.dim()));
            for h in 0..g.order() {
                let w = self.mats[g.mul(x, g.inv(h))].dot(&delta).diag().sum();
                acc.scaled_add(w, &self.mats[h]);
            }
            worst = worst.max(la::max_abs_diff(&acc, &self.mats[x]));
        }
        Ok(worst)
    }

    /// `max_{g,h} |tr[U_g† U_h Δ] − δ_{g,h}|`.
    pub fn delta_orthogonality_defect(&self, table: &CharacterTable) -> Result<f64> {
        let delta = self.delta_matrix(table)?;
        let n = self.group.order();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            let ad = dagger(&self.mats[a]);
            for b in 0..n {
                let t: C64 = ad.dot(&self.mats[b]).dot(&delta).diag().sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((t - want).norm());
            }
        }
        Ok(worst)
    }

    /// `(1/|G|) Σ_g U_g ⊗ U_g ⊗ Ū_g ⊗ Ū_g`, the projector onto four-leg invariant
    /// vectors (legs ordered l, t, r, b).
    pub fn four_leg_twirl(&self) -> Array2<C64> {
        let d = self.dim();
        let mut p = Array2::zeros((d.pow(4), d.pow(4)));
        for u in &self.mats {
            let ub = u.mapv(|x| x.conj());
            let w = la::kron(&la::kron(u, u), &la::kron(&ub, &ub));
            p += &w;
        }
        p.mapv_inplace(|x| x / self.group.order() as f64);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_square_violation_rejected() {
        let err = FiniteGroup::from_table("bad", vec![vec![0, 1], vec![1, 1]]);
        assert!(matches!(err, Err(Error::InvalidGroup(_))));
    }

    #[test]
    fn non_associative_rejected() {
        // A Latin square with identity 0 that is not a group table.
        let t = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(FiniteGroup::from_table("loop", t).is_err());
    }

    #[test]
    fn identity_relabelled_to_zero() {
        let g = FiniteGroup::from_table("z2", vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(g.mul(0, 1), 1);
        assert_eq!(g.mul(1, 1), 0);
    }

    #[test]
    fn s3_from_generators() {
        let g = FiniteGroup::load(r#"{"permutation_generators": [[[1,2]], [[1,2,3]]]}"#).unwrap();
        assert_eq!(g.order(), 6);
        let sizes: Vec<usize> = g.conjugacy_classes().classes.iter().map(|c| c.len()).collect();
        assert_eq!(sizes, vec![1, 3, 2]);
    }

    #[test]
    fn builtin_irreps_are_homomorphisms() {
        for name in ["Z2", "Z3", "Z4", "S3", "D4", "Q8"] {
            let g = FiniteGroup::builtin(name).unwrap();
            let irs = g.irreps().unwrap();
            let sum: usize = irs.iter().map(|ir| ir.dim * ir.dim).sum();
            assert_eq!(sum, g.order(), "{name}");
            for ir in irs {
                let rep = Representation {
                    group: g.clone(),
                    mats: ir.mats.clone(),
                };
                assert!(rep.homomorphism_defect() < 1e-12, "{name} {}", ir.label);
            }
        }
    }

    #[test]
    fn element_parsing() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let a = g.parse_element("(123)").unwrap();
        let b = g.parse_element("(1 2 3)").unwrap();
        assert_eq!(a, b);
        assert!(g.parse_element("(1 4)").is_err());
        let z2 = FiniteGroup::builtin("Z2").unwrap();
        assert_eq!(z2.parse_element("-1").unwrap(), 1);
    }

    #[test]
    fn regular_character() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let r = Representation::regular(&g);
        for x in 0..6 {
            let expect = if x == 0 { 6.0 } else { 0.0 };
            assert!((r.character(x) - c(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn table_labels_match_irreps() {
        let g = FiniteGroup::builtin("S3").unwrap();
        let t = g.character_table().unwrap();
        assert_eq!(t.labels, vec!["trivial", "sign", "2dim"]);
        assert_eq!(t.find("2dim").unwrap(), 2);
        assert_eq!(t.find("sign").unwrap(), 1);
        assert!(t.find("nope").is_err());
    }
}

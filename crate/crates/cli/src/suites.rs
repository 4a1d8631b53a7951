use std::time::Instant;

use clap::ValueEnum;
use topopeps_core::anyon::{braid_flux_charge, braid_flux_flux};
use topopeps_core::group::{FiniteGroup, Representation};
use topopeps_core::la;
use topopeps_core::mps::{self, MpsTensor};
use topopeps_core::peps::ground::GroundSpace2d;
use topopeps_core::peps::hamiltonian::{check_commuting_hamiltonian, check_local_indistinguishability, parent_hamiltonian_2d};
use topopeps_core::peps::lattice::{twist_insertions, Insertions, Site, Torus};
use topopeps_core::peps::{
    bond_reduction_isometry, double_model_tensor, four_leg_invariant_dim, is_regular, kitaev_t_tensor,
    random_twirled_tensor, semiregular_double_tensor, KitaevPairing, PepsTensor,
};
use topopeps_core::topo::{entanglement_spectrum, rg_step, rg_step_block, topological_entropy};
use topopeps_core::{Error, Result};

use crate::report::{stamp, CheckReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Injectivity,
    #[value(name = "gs-degeneracy-1d")]
    GsDegeneracy1d,
    #[value(name = "gs-degeneracy-2d")]
    GsDegeneracy2d,
    Indistinguishability,
    Entropy,
    Commuting,
    Rg,
    AnyonBraid,
    Semiregular,
    All,
}

impl Suite {
    pub const EACH: [Suite; 9] = [
        Suite::Injectivity,
        Suite::GsDegeneracy1d,
        Suite::GsDegeneracy2d,
        Suite::Indistinguishability,
        Suite::Entropy,
        Suite::Commuting,
        Suite::Rg,
        Suite::AnyonBraid,
        Suite::Semiregular,
    ];

    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Clone, Debug)]
pub struct Ctx {
    pub group: FiniteGroup,
    pub l: Option<usize>,
    pub model: String,
    pub region: Option<Vec<Site>>,
    pub charge: Option<String>,
    pub flux: Vec<String>,
    pub tol: Option<f64>,
    pub seed: u64,
    pub max_state_dim: usize,
}

impl Ctx {
    fn tol(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }

    fn size(&self, default: usize) -> usize {
        self.l.unwrap_or(default)
    }

    fn region_or(&self, default: &[Site]) -> Vec<Site> {
        self.region.clone().unwrap_or_else(|| default.to_vec())
    }

    fn require_cap(&self, what: &str, needed: Option<usize>) -> Result<()> {
        match needed {
            Some(n) if n <= self.max_state_dim => Ok(()),
            n => Err(Error::cap(what, n.unwrap_or(usize::MAX), self.max_state_dim)),
        }
    }

    /// The PEPS tensor and bond representation named by `--model`.
    pub fn model_2d(&self) -> Result<(PepsTensor, Representation)> {
        let g = &self.group;
        match self.model.as_str() {
            "double" => Ok((double_model_tensor(g)?, Representation::regular(g))),
            "semiregular" => semiregular_double_tensor(g),
            "random" => {
                let rep = Representation::regular(g);
                let d = four_leg_invariant_dim(&rep);
                let a = random_twirled_tensor(&rep, d, &mut la::rng(self.seed));
                Ok((a, rep))
            }
            "" => Err(Error::InvalidInput("empty model name".into())),
            m => Err(Error::InvalidInput(format!(
                "unknown model `{m}` (expected double, semiregular, random or kitaev)"
            ))),
        }
    }
}

/// Parses `r,c;r,c;...`.
pub fn parse_region(s: &str) -> std::result::Result<Vec<Site>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let xs: Vec<&str> = p.split(',').map(str::trim).collect();
            match xs.as_slice() {
                [r, c] => Ok((
                    r.parse().map_err(|_| format!("bad row `{r}`"))?,
                    c.parse().map_err(|_| format!("bad column `{c}`"))?,
                )),
                _ => Err(format!("site `{p}` is not `row,col`")),
            }
        })
        .collect::<std::result::Result<Vec<Site>, String>>()
        .and_then(|v| if v.is_empty() { Err("empty region".into()) } else { Ok(v) })
}

pub fn run(suite: Suite, ctx: &Ctx) -> Result<Vec<CheckReport>> {
    match suite {
        Suite::Injectivity => injectivity(ctx),
        Suite::GsDegeneracy1d => gs_degeneracy_1d(ctx),
        Suite::GsDegeneracy2d => gs_degeneracy_2d(ctx),
        Suite::Indistinguishability => indistinguishability(ctx),
        Suite::Entropy => entropy(ctx),
        Suite::Commuting => commuting(ctx),
        Suite::Rg => rg(ctx),
        Suite::AnyonBraid => anyon_braid(ctx),
        Suite::Semiregular => semiregular(ctx),
        Suite::All => Err(Error::InvalidInput("`all` is expanded by the caller".into())),
    }
}

fn injectivity(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let t0 = Instant::now();
    let (a, rep) = ctx.model_2d()?;
    let table = ctx.group.character_table()?;
    let mut out = vec![
        CheckReport::zero(
            "virtual invariance defect",
            a.invariance_defect(&rep),
            ctx.tol(1e-10),
            "G-invariance of the tensor",
        )
        .timed(t0),
    ];
    let t0 = Instant::now();
    let inj = a.is_g_injective_2d(&rep, &table)?;
    out.push(CheckReport::label("G-injective (2D)", "true", &inj.to_string(), "G-injectivity definition").timed(t0));
    if ctx.model == "double" {
        let t0 = Instant::now();
        let iso = a.isometry_defect(&rep).unwrap_or(f64::INFINITY);
        out.push(CheckReport::zero("G-isometry defect", iso, ctx.tol(1e-10), "G-isometric double model").timed(t0));
    }
    let t0 = Instant::now();
    let m = MpsTensor::random_twirled(&rep, mps::commutant_dim(&rep) + 1, &mut la::rng(ctx.seed));
    let inj1 = m.is_g_injective(&rep)?;
    out.push(
        CheckReport::label("random twirled MPS is G-injective", "true", &inj1.to_string(), "G-injectivity definition")
            .timed(t0),
    );
    Ok(out)
}

fn gs_degeneracy_1d(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let l = ctx.size(6);
    let rep = Representation::regular(&ctx.group);
    let table = ctx.group.character_table()?;
    let d = mps::commutant_dim(&rep) + 1;
    ctx.require_cap("1D state dimension", d.checked_pow(l as u32))?;
    let t0 = Instant::now();
    let a = MpsTensor::random_twirled(&rep, d, &mut la::rng(ctx.seed));
    let r = mps::ground_space_structure_1d(&a, &rep, &table, l)?;
    let tol = ctx.tol(1e-9);
    let prov = "1D ground-space degeneracy equals the number of irreps in the bond representation";
    let mut out = vec![
        CheckReport::count("ground-space dimension", r.predicted, r.dim, prov),
        CheckReport::zero(
            "kernel equals span of group closures",
            r.group_closure_residual,
            tol,
            "closure states span the 1D ground space",
        ),
        CheckReport::zero(
            "kernel equals span of irrep closures",
            r.irrep_closure_residual,
            tol,
            "closure states span the 1D ground space",
        ),
        CheckReport::zero("frustration", r.frustration, tol, "frustration-free parent Hamiltonian"),
    ];
    stamp(&mut out, t0);
    Ok(out)
}

fn gs_degeneracy_2d(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let l = ctx.size(2);
    let (a, rep) = ctx.model_2d()?;
    let t0 = Instant::now();
    let torus = Torus::uniform(&a, l)?;
    let gs = GroundSpace2d::solve(&torus, &rep)?;
    let classes = ctx.group.commuting_pair_classes().count();
    let largest_null = gs.spectrum[..gs.dim].iter().cloned().fold(0.0, f64::max);
    let mut out = vec![
        CheckReport::count(
            "ground-space dimension",
            classes,
            gs.dim,
            "2D ground-space degeneracy equals the number of commuting-pair classes",
        )
        .with_note("gap", gs.gap),
        CheckReport::zero(
            "largest null eigenvalue",
            largest_null,
            ctx.tol(1e-9),
            "exact nullspace of the parent Hamiltonian",
        ),
    ];
    stamp(&mut out, t0);
    let t0 = Instant::now();
    let span = gs.closure_span(&torus, &rep)?;
    let mut more = vec![
        CheckReport::count("twist-state span rank", gs.dim, span.rank, "twist states span the 2D ground space"),
        CheckReport::zero(
            "twist-state span residual",
            span.residual,
            ctx.tol(1e-9),
            "twist states span the 2D ground space",
        ),
    ];
    stamp(&mut more, t0);
    out.extend(more);
    Ok(out)
}

fn twist_states(rep: &Representation, l: usize) -> Result<Vec<Insertions>> {
    rep.group
        .commuting_pair_classes()
        .representatives
        .iter()
        .map(|&(g, h)| twist_insertions(rep, l, g, h))
        .collect()
}

fn indistinguishability(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let l = ctx.size(3);
    let (a, rep) = ctx.model_2d()?;
    let torus = Torus::uniform(&a, l)?;
    let states = twist_states(&rep, l)?;
    let regions: Vec<Vec<Site>> = match &ctx.region {
        Some(r) => vec![r.clone()],
        None => vec![vec![(1, 1)], vec![(1, 1), (1, 2)], vec![(1, 1), (2, 1)]],
    };
    let mut out = Vec::new();
    for reg in regions {
        let t0 = Instant::now();
        let r = check_local_indistinguishability(&torus, &states, &reg, ctx.max_state_dim)?;
        out.push(
            CheckReport::zero(
                &format!("max trace distance on {reg:?}"),
                r.max_trace_distance,
                ctx.tol(1e-9),
                "local indistinguishability of ground states",
            )
            .timed(t0),
        );
    }
    Ok(out)
}

fn entropy(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let l = ctx.size(3);
    let (a, rep) = ctx.model_2d()?;
    let sites = ctx.region_or(&[(1, 1)]);
    let t0 = Instant::now();
    let spec = entanglement_spectrum(&Torus::uniform(&a, l)?, &sites, &Insertions::new())?;
    let n = ctx.group.order();
    let mut out = Vec::new();
    if is_regular(&rep) {
        let predicted = (spec.boundary_bonds as u32)
            .checked_sub(1)
            .and_then(|e| n.checked_pow(e))
            .unwrap_or(usize::MAX);
        out.push(
            CheckReport::count("spectrum rank", predicted, spec.rank(), "rank |G|^(|∂D|-1) of the reduced state"),
        );
    }
    if ctx.model == "double" {
        let te = topological_entropy(&spec, n);
        out.push(CheckReport::zero(
            "spectrum relative spread",
            spec.flatness(),
            ctx.tol(1e-8),
            "flat entanglement spectrum of G-isometric PEPS",
        ));
        out.push(
            CheckReport::value(
                "topological correction",
                -(n as f64).ln(),
                te.correction,
                ctx.tol(1e-9),
                "topological entropy correction -log|G|",
            )
            .with_note("entropy", te.entropy),
        );
    }
    stamp(&mut out, t0);
    Ok(out)
}

fn commuting(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let l = ctx.size(3);
    let (a, _) = ctx.model_2d()?;
    let t0 = Instant::now();
    let torus = Torus::uniform(&a, l)?;
    let terms = parent_hamiltonian_2d(&torus, ctx.max_state_dim)?;
    let r = check_commuting_hamiltonian(&torus, &terms, 20, &mut la::rng(ctx.seed))?;
    Ok(vec![CheckReport::zero(
        "max commutator residual",
        r.max_residual,
        ctx.tol(1e-9),
        "commuting parent Hamiltonian of G-isometric PEPS",
    )
    .with_note("pairs", r.pairs.len())
    .timed(t0)])
}

fn rg(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let t0 = Instant::now();
    let cert = if ctx.model == "kitaev" {
        if ctx.group.order() != 2 {
            return Err(Error::InvalidInput("the kitaev model needs --group Z2".into()));
        }
        let rep = Representation::regular(&ctx.group);
        let a = kitaev_t_tensor(KitaevPairing::NeSw);
        let b = kitaev_t_tensor(KitaevPairing::NwSe);
        rg_step_block([&a, &b, &b, &a], &rep)?
    } else {
        let (a, rep) = ctx.model_2d()?;
        rg_step(&a, &rep)?
    };
    let tol = ctx.tol(1e-9);
    let prov = "RG fixed point of G-isometric PEPS";
    let mut out = vec![
        CheckReport::zero("coarse support equals fine support", cert.support_residual, tol, prov),
        CheckReport::zero("symmetry split", cert.symmetry_split_residual, tol, prov),
        CheckReport::zero("factorization", cert.factorization_residual, tol, prov),
        CheckReport::zero("maximally entangled pair factor", cert.maximally_entangled_residual, tol, prov)
            .with_note("discarded_rank", cert.discarded_rank),
    ];
    stamp(&mut out, t0);
    Ok(out)
}

fn anyon_braid(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let g = &ctx.group;
    let table = g.character_table()?;
    let mut fluxes: Vec<usize> = ctx.flux.iter().map(|f| g.parse_element(f)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let flux_flux = ctx.charge.is_none() && (fluxes.len() == 2 || (fluxes.is_empty() && !g.is_abelian()));
    if flux_flux {
        let (a, b) = if fluxes.len() == 2 {
            (fluxes[0], fluxes[1])
        } else {
            (0..g.order())
                .flat_map(|a| (0..g.order()).map(move |b| (a, b)))
                .find(|&(a, b)| !g.commutes(a, b))
                .expect("non-abelian group")
        };
        let t0 = Instant::now();
        let rep = Representation::regular(g);
        let r = braid_flux_flux(&rep, ctx.size(4), a, b)?;
        let prov = "flux-flux braiding conjugates the flux label";
        let name = format!("flux {} around {}", g.label(a), g.label(b));
        out.push(CheckReport::label(&format!("{name}: string holonomy"), g.label(r.predicted), g.label(r.after), prov));
        out.push(CheckReport::label(
            &format!("{name}: tensor chain"),
            g.label(r.predicted),
            g.label(r.after_from_matrices),
            prov,
        ));
        out.push(CheckReport::label(
            &format!("{name}: joint class preserved"),
            "true",
            &r.class_preserved.to_string(),
            prov,
        ));
        stamp(&mut out, t0);
        if fluxes.len() == 2 {
            return Ok(out);
        }
    }
    let charges: Vec<usize> = match &ctx.charge {
        Some(c) => vec![table.find(c)?],
        None => (0..table.len()).collect(),
    };
    if fluxes.is_empty() {
        fluxes = (0..g.order()).collect();
    }
    let tol = ctx.tol(1e-10);
    for &c in &charges {
        let d = table.dims[c] as f64;
        for &k in &fluxes {
            let t0 = Instant::now();
            let r = braid_flux_charge(g, &table, c, g.identity(), k)?;
            let predicted = (table.chi(c, k) / d).norm_sqr();
            let mut rep = CheckReport::value(
                &format!("charge {} around flux {}", table.labels[c], g.label(k)),
                predicted,
                r.probability_from_overlap,
                tol,
                "flux-charge braiding probability |chi_c(k)/d_c|^2",
            );
            let formula = (r.probability - predicted).abs();
            rep.residual = rep.residual.max(formula);
            rep.pass = rep.residual <= tol;
            out.push(rep.timed(t0));
        }
    }
    Ok(out)
}

fn semiregular(ctx: &Ctx) -> Result<Vec<CheckReport>> {
    let g = &ctx.group;
    let table = g.character_table()?;
    let tol = ctx.tol(1e-12);
    let mut out = Vec::new();
    for (name, rep) in [
        ("regular", Representation::regular(g)),
        ("minimal semi-regular", Representation::minimal_semiregular(g)?),
    ] {
        let t0 = Instant::now();
        out.push(
            CheckReport::zero(
                &format!("{name}: Delta reconstruction"),
                rep.delta_reconstruction_defect(&table)?,
                tol,
                "Delta-matrix reconstruction of U_g",
            )
            .timed(t0),
        );
        let t0 = Instant::now();
        out.push(
            CheckReport::zero(
                &format!("{name}: tr[U_g^dag U_h Delta] = delta_gh"),
                rep.delta_orthogonality_defect(&table)?,
                tol,
                "Delta-matrix orthogonality",
            )
            .timed(t0),
        );
    }
    let t0 = Instant::now();
    let b = bond_reduction_isometry(g)?;
    let prov = "semi-regular bond reduction";
    let mut dims = vec![
        CheckReport::count("semi-regular bond dimension", table.dims.iter().sum(), b.semiregular_dim, prov),
        CheckReport::count("regular bond dimension", g.order(), b.regular_dim, prov),
    ];
    stamp(&mut dims, t0);
    let t0 = Instant::now();
    out.push(CheckReport::zero("bond isometry identity (all g,h)", b.identity_defect(g)?, tol, prov).timed(t0));
    let t0 = Instant::now();
    out.push(CheckReport::zero("Hilbert-Schmidt isometry", b.isometry_defect(g)?, tol, prov).timed(t0));
    out.extend(dims);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_parsing() {
        assert_eq!(parse_region("1,1").unwrap(), vec![(1, 1)]);
        assert_eq!(parse_region("1,1; 1,2").unwrap(), vec![(1, 1), (1, 2)]);
        assert!(parse_region("1").is_err());
        assert!(parse_region("").is_err());
    }

    #[test]
    fn suite_names_are_kebab() {
        assert_eq!(Suite::GsDegeneracy2d.name(), "gs-degeneracy-2d");
        assert_eq!(Suite::AnyonBraid.name(), "anyon-braid");
    }
}

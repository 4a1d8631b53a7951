//! Acceptance criteria 1-16. Runs as a plain binary (`harness = false`) so every
//! criterion prints its PASS/FAIL line under `cargo test`.

use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use topopeps_core::anyon::{
    braid_flux_charge, braid_flux_flux, deformation_check, fluxon_energy_profile, apply_string, AnyonConfig,
    DualPath,
};
use topopeps_core::group::{FiniteGroup, Representation};
use topopeps_core::la;
use topopeps_core::mps::{self, MpsTensor};
use topopeps_core::peps::ground::GroundSpace2d;
use topopeps_core::peps::hamiltonian::{
    check_commuting_hamiltonian, check_local_indistinguishability, parent_hamiltonian_2d, DEFAULT_TERM_CAP,
};
use topopeps_core::peps::intersection::{commuting_intersection_2d, intersection_property_2d, Merge};
use topopeps_core::peps::lattice::{twist_insertions, Insertions, Torus};
use topopeps_core::peps::{
    bond_reduction_isometry, double_model_tensor, kitaev_t_tensor, physical_gauge, random_twirled_tensor,
    KitaevPairing, PepsTensor,
};
use topopeps_core::tensor::{containment_residual, span_basis};
use topopeps_core::topo::{entanglement_spectrum, rg_step, rg_step_block, topological_entropy};
use topopeps_core::{Result, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn group(name: &str) -> FiniteGroup {
    FiniteGroup::builtin(name).expect("builtin group")
}

fn double(name: &str) -> (FiniteGroup, Representation, PepsTensor) {
    let g = group(name);
    let rep = Representation::regular(&g);
    let k = double_model_tensor(&g).expect("double model tensor");
    (g, rep, k)
}

fn commuting_pairs(g: &FiniteGroup) -> Vec<(usize, usize)> {
    let n = g.order();
    (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .filter(|&(a, b)| g.commutes(a, b))
        .collect()
}

fn c1_degeneracy_2d() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expected) in [("Z2", 4), ("Z3", 9)] {
        let (g, rep, k) = double(name);
        let t0 = Instant::now();
        let gs = GroundSpace2d::solve(&Torus::uniform(&k, 2)?, &rep)?;
        let secs = t0.elapsed().as_secs_f64();
        let classes = g.commuting_pair_classes().count();
        let largest_null = gs.spectrum[..gs.dim].iter().cloned().fold(0.0, f64::max);
        let ok = gs.dim == expected && classes == expected && gs.gap > 1e-9 && largest_null <= 1e-9;
        // the 60 s budget is stated for Z2
        let ok = ok && (name != "Z2" || secs < 60.0);
        pass &= ok;
        parts.push(format!(
            "{name}: dim {} (classes {classes}), gap {:.3e}, {secs:.1}s",
            gs.dim, gs.gap
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c2_closure_span() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expected) in [("Z2", 4), ("Z3", 9)] {
        let (g, rep, k) = double(name);
        let torus = Torus::uniform(&k, 2)?;
        let gs = GroundSpace2d::solve(&torus, &rep)?;
        let states: Vec<Insertions> = commuting_pairs(&g)
            .into_iter()
            .map(|(a, b)| twist_insertions(&rep, 2, a, b))
            .collect::<Result<_>>()?;
        let n = states.len();
        let mut gram = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                gram[[i, j]] = torus.overlap(&states[i], &states[j])?;
            }
        }
        let gram_rank = la::rank(&gram, 1e-9)?;
        let mut z = Array2::<C64>::zeros((gs.basis.ambient, n));
        let mut outside: f64 = 0.0;
        for (j, ins) in states.iter().enumerate() {
            let (zj, out) = gs.coordinates(&torus, ins)?;
            let nz = la::norm(&zj);
            z.column_mut(j).assign(&zj.mapv(|x| x / nz));
            outside = outside.max(out.abs());
        }
        let span = span_basis(&z, 1e-9)?;
        let into_null = gs.basis.residual_of(&z);
        let covers = containment_residual(&gs.basis, &span)?;
        let residual = outside.max(into_null).max(covers);
        let ok = gram_rank == expected && span.dim() == gs.dim && residual <= 1e-9;
        pass &= ok;
        parts.push(format!("{name}: Gram rank {gram_rank}, span residual {residual:.2e}"));
    }
    outcome(pass, parts.join("; "))
}

fn c3_degeneracy_1d() -> Result<Outcome> {
    let g = group("Z2");
    let table = g.character_table()?;
    let x = Array2::from_shape_vec((2, 2), vec![la::ZERO, la::ONE, la::ONE, la::ZERO]).expect("2x2");
    let rep = Representation::new(&g, vec![la::identity(2), x.clone()])?;
    let a = MpsTensor::new(vec![la::identity(2), x])?;
    let r = mps::ground_space_structure_1d(&a, &rep, &table, 6)?;
    let z2_ok = r.dim == 2 && r.group_closure_residual <= 1e-9 && r.frustration <= 1e-9;

    let b = MpsTensor::random(4, 2, &mut la::rng(11));
    let terms = mps::parent_hamiltonian_1d(&b, 5)?;
    let gs = mps::ground_space(&terms, &[4; 5], mps::RANK_TOL, mps::DEFAULT_STATE_CAP)?;
    let injective_ok = b.is_injective()? && gs.dim() == 1;
    outcome(
        z2_ok && injective_ok,
        format!(
            "Z2 (1,X) L=6: dim {}, basis residual {:.2e}; injective D=2 L=5: dim {}",
            r.dim,
            r.group_closure_residual,
            gs.dim()
        ),
    )
}

fn c4_pair_classes() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, expected) in [("Z2", 4), ("Z4", 16), ("S3", 8), ("D4", 22)] {
        let g = group(name);
        let orbits = g.commuting_pair_classes().count();
        let centralizers = g.pair_class_count_by_centralizers();
        pass &= orbits == expected && centralizers == expected;
        parts.push(format!("{name} {orbits}/{centralizers}"));
    }
    outcome(pass, parts.join(", "))
}

fn c5_topological_entropy() -> Result<Outcome> {
    let (_, _, k) = double("Z2");
    let none = Insertions::new();
    let t3 = Torus::uniform(&k, 3)?;
    let one = entanglement_spectrum(&t3, &[(1, 1)], &none)?;
    let te = topological_entropy(&one, 2);
    let corr_err = (te.correction + 2f64.ln()).abs();
    let one_ok = one.rank() == 8 && one.boundary_bonds == 4 && one.flatness() <= 1e-8 && corr_err <= 1e-9;
    let two = entanglement_spectrum(&t3, &[(1, 1), (1, 2)], &none)?;
    let t0 = Instant::now();
    let t4 = Torus::uniform(&k, 4)?;
    let four = entanglement_spectrum(&t4, &[(1, 1), (1, 2), (2, 1), (2, 2)], &none)?;
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        one_ok && two.rank() == 32 && four.rank() == 128 && secs < 600.0,
        format!(
            "1-site rank {} spread {:.1e} correction error {corr_err:.1e}; 1x2 rank {}; L=4 2x2 rank {} ({secs:.2}s)",
            one.rank(),
            one.flatness(),
            two.rank(),
            four.rank()
        ),
    )
}

fn c6_renyi0_robustness() -> Result<Outcome> {
    let (_, _, k) = double("Z2");
    let m = la::gaussian_matrix(&mut la::rng(7), k.phys_dim(), k.phys_dim());
    let s = la::singular_values(&m)?;
    let invertible = s.last().cloned().unwrap_or(0.0) > 1e-6;
    let unitary_defect = la::max_abs_diff(&la::dagger(&m).dot(&m), &la::identity(m.ncols()));
    let kd = k.deform(&m)?;
    let spec = entanglement_spectrum(&Torus::uniform(&kd, 3)?, &[(1, 1)], &Insertions::new())?;
    outcome(
        invertible && unitary_defect > 1e-3 && spec.rank() == 8 && spec.flatness() > 1e-6,
        format!("rank {}, spread {:.3}", spec.rank(), spec.flatness()),
    )
}

fn c7_commuting() -> Result<Outcome> {
    let (_, _, k) = double("Z2");
    let t3 = Torus::uniform(&k, 3)?;
    let terms = parent_hamiltonian_2d(&t3, DEFAULT_TERM_CAP)?;
    let rep = check_commuting_hamiltonian(&t3, &terms, 20, &mut la::rng(2024))?;
    outcome(
        rep.max_residual <= 1e-9,
        format!(
            "{} terms, {} offset classes x {} vectors, max residual {:.2e}",
            terms.len(),
            rep.pairs.len(),
            rep.trials,
            rep.max_residual
        ),
    )
}

fn c8_indistinguishability() -> Result<Outcome> {
    let (g, rep, k) = double("Z2");
    let l = 3;
    let t3 = Torus::uniform(&k, l)?;
    let states: Vec<Insertions> = commuting_pairs(&g)
        .into_iter()
        .map(|(a, b)| twist_insertions(&rep, l, a, b))
        .collect::<Result<_>>()?;
    let mut regions: Vec<Vec<(usize, usize)>> = Vec::new();
    for r in 0..l {
        for c in 0..l {
            regions.push(vec![(r, c)]);
            regions.push(vec![(r, c), (r, (c + 1) % l)]);
            regions.push(vec![(r, c), ((r + 1) % l, c)]);
        }
    }
    let mut worst: f64 = 0.0;
    for reg in &regions {
        worst = worst.max(check_local_indistinguishability(&t3, &states, reg, 1 << 24)?.max_trace_distance);
    }
    outcome(
        worst <= 1e-9,
        format!("{} regions, max trace distance {worst:.2e}", regions.len()),
    )
}

fn c9_delta_identities() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for name in ["Z2", "Z3", "Z4", "S3"] {
        let g = group(name);
        let table = g.character_table()?;
        for rep in [Representation::regular(&g), Representation::minimal_semiregular(&g)?] {
            worst = worst
                .max(rep.delta_reconstruction_defect(&table)?)
                .max(rep.delta_orthogonality_defect(&table)?);
        }
    }
    outcome(worst <= 1e-12, format!("max defect {worst:.2e} over Z2, Z3, Z4, S3"))
}

fn c10_string_deformation() -> Result<Outcome> {
    let l = 3;
    let homotopic = [("ES", "SE"), ("EES", "SEE"), ("ESE", "EES")];
    let mut worst: f64 = 0.0;
    for name in ["Z2", "Z3"] {
        let (_, rep, k) = double(name);
        let torus = Torus::uniform(&k, l)?;
        let cfg = AnyonConfig::new(&rep, l)?;
        for (a, b) in homotopic {
            let p1 = DualPath::from_word((0, 0), a, l)?;
            let p2 = DualPath::from_word((0, 0), b, l)?;
            worst = worst.max(deformation_check(&torus, &cfg, &p1, &p2, 1)?.residual);
        }
    }
    let (_, rep, k) = double("S3");
    let moves = k.all_local_moves_defect(&rep);
    outcome(
        worst <= 1e-12 && moves <= 1e-12,
        format!("Z2/Z3 global residual {worst:.2e}; S3 local moves {moves:.2e}"),
    )
}

fn c11_fluxon_locality() -> Result<Outcome> {
    let (_, rep, k) = double("Z2");
    let l = 3;
    let torus = Torus::uniform(&k, l)?;
    let cfg = AnyonConfig::new(&rep, l)?;
    let path = DualPath::from_word((0, 0), "E", l)?;
    let (f1, f2) = path.endpoints().expect("open path");
    let flux = apply_string(&cfg, &path, 1)?;
    let prof = fluxon_energy_profile(&torus, &flux, None)?;
    let mut worst: f64 = 0.0;
    for ((i, j), &e) in prof.indexed_iter() {
        let target = if (i, j) == f1 || (i, j) == f2 { 1.0 } else { 0.0 };
        worst = worst.max((e - target).abs());
    }
    outcome(worst <= 1e-9, format!("endpoints {f1:?} {f2:?}, max deviation {worst:.2e}"))
}

fn c12_flux_flux_braid() -> Result<Outcome> {
    let (g, rep, _) = double("S3");
    let a = g.parse_element("(12)")?;
    let b = g.parse_element("(13)")?;
    let expected = g.parse_element("(23)")?;
    let r = braid_flux_flux(&rep, 4, a, b)?;
    outcome(
        r.predicted == expected && r.after == expected && r.after_from_matrices == expected && r.class_preserved,
        format!(
            "arithmetic {}, string holonomy {}, tensor chain {}",
            g.label(r.predicted),
            g.label(r.after),
            g.label(r.after_from_matrices)
        ),
    )
}

fn c13_flux_charge_braid() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for name in ["Z2", "Z3", "S3"] {
        let g = group(name);
        let table = g.character_table()?;
        for c in 0..table.len() {
            let d = table.chi(c, g.identity()).re;
            for k in 0..g.order() {
                let r = braid_flux_charge(&g, &table, c, g.identity(), k)?;
                let expected = (table.chi(c, k) / d).norm_sqr();
                worst = worst
                    .max((r.probability - expected).abs())
                    .max((r.probability_from_overlap - expected).abs());
                cases += 1;
            }
        }
    }
    let g = group("S3");
    let table = g.character_table()?;
    let two = (0..table.len())
        .find(|&c| (table.chi(c, g.identity()).re - 2.0).abs() < 1e-9)
        .expect("S3 has a 2-dim irrep");
    let tr = braid_flux_charge(&g, &table, two, g.identity(), g.parse_element("(12)")?)?;
    let cyc = braid_flux_charge(&g, &table, two, g.identity(), g.parse_element("(123)")?)?;
    let special = tr.probability_from_overlap.abs() <= 1e-10 && (cyc.probability_from_overlap - 0.25).abs() <= 1e-10;
    outcome(
        worst <= 1e-10 && special,
        format!(
            "{cases} (c,k) cases, max deviation {worst:.2e}; S3 2-dim: transposition {:.3}, 3-cycle {:.3}",
            tr.probability_from_overlap, cyc.probability_from_overlap
        ),
    )
}

fn c14_rg_fixed_point() -> Result<Outcome> {
    let (_, rep, k) = double("Z2");
    let c = rg_step(&k, &rep)?;
    let k_ok = c.support_residual <= 1e-9 && c.maximally_entangled_residual <= 1e-9 && c.factorization_residual <= 1e-9;
    let a = kitaev_t_tensor(KitaevPairing::NeSw);
    let b = kitaev_t_tensor(KitaevPairing::NwSe);
    let t = rg_step_block([&a, &b, &b, &a], &rep)?;
    let t_ok = t.support_residual <= 1e-9 && t.factorization_residual <= 1e-9;
    outcome(
        k_ok && t_ok,
        format!(
            "K: support {:.2e}, pair factor {:.2e}; Kitaev T block: support {:.2e}",
            c.support_residual, c.maximally_entangled_residual, t.support_residual
        ),
    )
}

fn c15_semiregular_reduction() -> Result<Outcome> {
    let g = group("S3");
    let b = bond_reduction_isometry(&g)?;
    let id = b.identity_defect(&g)?;
    let iso = b.isometry_defect(&g)?;
    outcome(
        id <= 1e-12 && iso <= 1e-12 && b.semiregular_dim == 4 && b.regular_dim == 6,
        format!(
            "36 pairs, identity defect {id:.2e}, isometry defect {iso:.2e}, D {} vs {}",
            b.semiregular_dim, b.regular_dim
        ),
    )
}

fn c16_intersection_closure() -> Result<Outcome> {
    const SEEDS: u64 = 20;
    let mut pass = true;
    let mut parts = Vec::new();

    // 1D: three-site intersection and ring closure
    for name in ["Z2", "Z3"] {
        let g = group(name);
        let table = g.character_table()?;
        let rep = Representation::regular(&g);
        // one more physical dimension than the invariant space, so P(A) is not square
        let d = mps::commutant_dim(&rep) + 1;
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for seed in 0..SEEDS {
            let mut r = la::rng(100 + seed);
            let a = MpsTensor::random_twirled(&rep, d, &mut r);
            let b = MpsTensor::random_twirled(&rep, d, &mut r);
            ok &= a.is_g_injective(&rep)? && b.is_g_injective(&rep)?;
            let ir = mps::intersection_property_1d(&a, &b, &a)?;
            ok &= ir.intersection_dim == ir.merged_dim;
            worst = worst.max(ir.residual);
            let gs = mps::ground_space_structure_1d(&a, &rep, &table, 4)?;
            ok &= gs.dim == gs.predicted;
            worst = worst.max(gs.irrep_closure_residual);
        }
        ok &= worst <= 1e-9;
        pass &= ok;
        parts.push(format!("1D {name} {worst:.1e}"));
    }

    // 2D Z2: dense intersections and the L=2 closure on four distinct tensors
    {
        let (g, rep, _) = double("Z2");
        let d = 8;
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for seed in 0..SEEDS {
            let mut r = la::rng(200 + seed);
            let ts: Vec<PepsTensor> = (0..4).map(|_| random_twirled_tensor(&rep, d, &mut r)).collect();
            for merge in [Merge::Strip, Merge::LShape] {
                let ir = intersection_property_2d([&ts[0], &ts[1], &ts[2]], merge)?;
                ok &= ir.intersection_dim == ir.merged_dim;
                worst = worst.max(ir.residual);
            }
            let torus = Torus::from_tensors(2, ts.clone())?;
            let gs = GroundSpace2d::solve(&torus, &rep)?;
            ok &= gs.dim == g.commuting_pair_classes().count();
            for (a, b) in commuting_pairs(&g) {
                let (z, outside) = gs.coordinates(&torus, &twist_insertions(&rep, 2, a, b)?)?;
                let nz = la::norm(&z);
                let col = z.mapv(|x| x / nz).insert_axis(ndarray::Axis(1));
                worst = worst.max(outside.abs()).max(gs.basis.residual_of(&col));
            }
        }
        ok &= worst <= 1e-9;
        pass &= ok;
        parts.push(format!("2D Z2 {worst:.1e}"));
    }

    // 2D Z3: A = R P(K) with R invertible, so A's intersections are K's
    {
        let (g, rep, k) = double("Z3");
        let d = k.phys_dim();
        let mut worst: f64 = 0.0;
        let mut min_cond = f64::INFINITY;
        for seed in 0..SEEDS {
            let a = random_twirled_tensor(&rep, d, &mut la::rng(300 + seed));
            let pg = physical_gauge(&a, &k)?;
            worst = worst.max(pg.residual);
            min_cond = min_cond.min(pg.conditioning);
        }
        let mut r = la::rng(399);
        let mut ok = worst <= 1e-9 && min_cond > 1e-8;
        for merge in [Merge::Strip, Merge::LShape] {
            let c = commuting_intersection_2d(&k, g.order(), merge, 3, &mut r)?;
            ok &= c.commutator_residual <= 1e-9
                && (c.intersection_dim - c.merged_dim as f64).abs() <= 1e-6
                && c.containment_residual <= 1e-9;
            worst = worst.max(c.commutator_residual).max(c.containment_residual);
        }
        pass &= ok;
        parts.push(format!("2D Z3 {worst:.1e} (gauge conditioning >= {min_cond:.1e})"));
    }
    outcome(pass, format!("{SEEDS} seeds/group: {}", parts.join(", ")))
}

type Criterion = (usize, &'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    // e.g. ACCEPTANCE_ONLY=5,16 runs a subset
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [Criterion; 16] = [
        (1, "2D ground-space degeneracy", c1_degeneracy_2d),
        (2, "twist states span the ground space", c2_closure_span),
        (3, "1D ground-space degeneracy", c3_degeneracy_1d),
        (4, "commuting-pair class counts", c4_pair_classes),
        (5, "topological entanglement entropy", c5_topological_entropy),
        (6, "Renyi-0 robustness under deformation", c6_renyi0_robustness),
        (7, "commuting parent Hamiltonian", c7_commuting),
        (8, "local indistinguishability", c8_indistinguishability),
        (9, "Delta and semi-regular identities", c9_delta_identities),
        (10, "string deformation", c10_string_deformation),
        (11, "fluxon locality", c11_fluxon_locality),
        (12, "flux-flux braiding", c12_flux_flux_braid),
        (13, "flux-charge braiding", c13_flux_charge_braid),
        (14, "RG fixed point", c14_rg_fixed_point),
        (15, "semi-regular bond reduction", c15_semiregular_reduction),
        (16, "intersection and closure properties", c16_intersection_closure),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (n, name, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} criterion {n:2} ({name}): {detail} [{:.1}s]",
            t0.elapsed().as_secs_f64()
        );
        failed += usize::from(!pass);
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

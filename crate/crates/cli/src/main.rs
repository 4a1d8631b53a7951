mod report;
mod suites;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use topopeps_core::group::FiniteGroup;
use topopeps_core::la;
use topopeps_core::peps::lattice::{Insertions, Site, Torus};
use topopeps_core::peps::{kitaev_t_tensor, KitaevPairing};
use topopeps_core::topo::entanglement_spectrum;

use report::{Skipped, SuiteReport};
use suites::{Ctx, Suite};

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CAP: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "topopeps", version, about = "Exact desk-scale checks for G-injective MPS and PEPS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Order, conjugacy classes, commuting-pair classes and character table.
    GroupInfo(Common),
    /// Run a named check suite and print a JSON report.
    Check {
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Write a model tensor (JSON), an entanglement spectrum (CSV) or a group report.
    Export {
        what: Export,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Export {
    Tensor,
    Spectrum,
    Group,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Built-in name (Z<n>, S3, D4, Q8), inline group JSON, or a path to a group JSON file.
    #[arg(long, default_value = "Z2")]
    group: String,
    /// Linear lattice size (torus side or chain length); suites pick a default.
    #[arg(long = "L")]
    l: Option<usize>,
    /// double, semiregular, random, or kitaev (Z2 RG only).
    #[arg(long, default_value = "double")]
    model: String,
    /// Sites as `row,col;row,col`.
    #[arg(long, value_parser = parse_region_arg)]
    region: Option<RegionArg>,
    /// Irrep label, index, or alias (trivial, sign, 2dim).
    #[arg(long)]
    charge: Option<String>,
    /// Flux element, e.g. `(123)`; repeat for flux-flux braiding.
    #[arg(long)]
    flux: Vec<String>,
    /// Overrides every check tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1234)]
    seed: u64,
    /// Cap on dense state and term dimensions.
    #[arg(long, default_value_t = 1 << 24)]
    max_state_dim: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct RegionArg(Vec<Site>);

fn parse_region_arg(s: &str) -> Result<RegionArg, String> {
    suites::parse_region(s).map(RegionArg)
}

impl Common {
    fn sites(&self) -> Option<Vec<Site>> {
        self.region.as_ref().map(|r| r.0.clone())
    }

    fn load_group(&self) -> anyhow::Result<FiniteGroup> {
        let spec = if std::path::Path::new(&self.group).is_file() {
            std::fs::read_to_string(&self.group).with_context(|| format!("reading {}", self.group))?
        } else {
            self.group.clone()
        };
        Ok(FiniteGroup::load(&spec)?)
    }

    fn ctx(&self) -> anyhow::Result<Ctx> {
        if self.tol.is_some_and(|t| t.is_nan() || t < 0.0) {
            bail!(topopeps_core::Error::InvalidInput("--tol must be non-negative".into()));
        }
        Ok(Ctx {
            group: self.load_group()?,
            l: self.l,
            model: self.model.clone(),
            region: self.sites(),
            charge: self.charge.clone(),
            flux: self.flux.clone(),
            tol: self.tol,
            seed: self.seed,
            max_state_dim: self.max_state_dim,
        })
    }

    fn inputs(&self) -> serde_json::Value {
        json!({
            "group": self.group,
            "L": self.l,
            "model": self.model,
            "region": self.sites(),
            "charge": self.charge,
            "flux": self.flux,
            "tol": self.tol,
            "seed": self.seed,
            "max_state_dim": self.max_state_dim,
        })
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut out = std::io::stdout().lock();
                match writeln!(out, "{text}") {
                    Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                    r => r.context("writing stdout"),
                }
            }
        }
    }
}

fn is_cap(e: &anyhow::Error) -> bool {
    matches!(
        e.downcast_ref::<topopeps_core::Error>(),
        Some(topopeps_core::Error::ResourceCap { .. })
    )
}

fn group_info(g: &FiniteGroup) -> anyhow::Result<serde_json::Value> {
    let classes = g.conjugacy_classes();
    let pairs = g.commuting_pair_classes();
    let table = g.character_table()?;
    let label = |x: &usize| g.label(*x).to_string();
    Ok(json!({
        "group": g.name(),
        "order": g.order(),
        "abelian": g.is_abelian(),
        "elements": g.labels(),
        "conjugacy_classes": classes.classes.iter().map(|c| c.iter().map(label).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "class_count": classes.classes.len(),
        "pair_class_count": pairs.count(),
        "pair_class_count_by_centralizers": g.pair_class_count_by_centralizers(),
        "character_table": {
            "irreps": table.labels,
            "dims": table.dims,
            "class_representatives": classes.representatives.iter().map(label).collect::<Vec<_>>(),
            "rows": table.rows.iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        },
    }))
}

fn check(suite: Suite, common: &Common) -> anyhow::Result<u8> {
    let t0 = Instant::now();
    let ctx = common.ctx()?;
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    if suite == Suite::All {
        // every suite at its own default size and region
        let base = Ctx {
            l: None,
            region: None,
            ..ctx.clone()
        };
        for s in Suite::EACH {
            match suites::run(s, &base) {
                Ok(cs) => checks.extend(cs.into_iter().map(|mut c| {
                    c.check = format!("{}/{}", s.name(), c.check);
                    c
                })),
                Err(e @ topopeps_core::Error::ResourceCap { .. }) => skipped.push(Skipped {
                    suite: s.name(),
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    } else {
        checks = suites::run(suite, &ctx)?;
    }
    let report = SuiteReport::new(&suite.name(), common.inputs(), checks, skipped, t0);
    common.emit(&serde_json::to_string_pretty(&report)?)?;
    Ok(if !report.pass {
        EXIT_FAIL
    } else if !report.skipped.is_empty() {
        EXIT_CAP
    } else {
        0
    })
}

fn export(what: Export, common: &Common) -> anyhow::Result<u8> {
    let ctx = common.ctx()?;
    let text = match what {
        Export::Tensor => {
            let a = if common.model == "kitaev" {
                kitaev_t_tensor(KitaevPairing::NeSw)
            } else {
                ctx.model_2d()?.0
            };
            a.to_json()?
        }
        Export::Spectrum => {
            let (a, _) = ctx.model_2d()?;
            let l = common.l.unwrap_or(3);
            let sites = common.sites().unwrap_or_else(|| vec![(1, 1)]);
            entanglement_spectrum(&Torus::uniform(&a, l)?, &sites, &Insertions::new())?.to_csv()
        }
        Export::Group => serde_json::to_string_pretty(&group_info(&ctx.group)?)?,
    };
    common.emit(text.trim_end())?;
    Ok(0)
}

fn apply_thread_cap() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TOPOPEPS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| topopeps_core::Error::InvalidInput(format!("TOPOPEPS_THREADS=`{v}`")))?;
        la::set_blas_threads(n);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = apply_thread_cap().and_then(|_| match &cli.command {
        Command::GroupInfo(common) => {
            let g = common.load_group()?;
            common.emit(&serde_json::to_string_pretty(&group_info(&g)?)?)?;
            Ok(0)
        }
        Command::Check { suite, common } => check(*suite, common),
        Command::Export { what, common } => export(*what, common),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_cap(&e) { EXIT_CAP } else { EXIT_INPUT })
        }
    }
}

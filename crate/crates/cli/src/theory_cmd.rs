use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use rankaudit::theory::{
    aaa_check, anti_monotone_world, decomposition_check, identity_world, pareto_check, random_world,
    running_example_world, theorem_check, threshold_decision, AaaResult, Basis, Decision, Decomposition, FairWorld,
    ParetoResult, TheoremCheck, DEFAULT_GRID,
};
use serde::Serialize;

use crate::error::{CliError, CliResult, InModule};
use crate::output::Sink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WorldKind {
    /// Protected score is 0.9 times the fair probability.
    Example,
    /// Protected score falls as the fair probability rises.
    AntiMonotone,
    /// Score equals the fair probability in both groups.
    Identity,
    /// Seeded random grid.
    Random,
}

#[derive(Debug, Clone, Args)]
pub struct WorldArgs {
    #[arg(long, value_enum, default_value = "example")]
    pub world: WorldKind,
    /// Read the world from a CSV `x,a,weight,fair_p,score_s` instead.
    #[arg(long, conflicts_with = "world")]
    pub world_csv: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    /// Random worlds keep score and fair probability in the same order within each group.
    #[arg(long)]
    pub comonotone: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum TheoryCommand {
    /// Running example: comonotonicity, decomposition at several cut-offs, Pareto claims.
    Example {
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9])]
        tau: Vec<f64>,
    },
    /// Within-group comonotonicity of score and fair probability.
    Aaa {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 0.0)]
        tolerance: f64,
        /// Also sweep every cut-off and report whether both sides agree.
        #[arg(long)]
        theorem: bool,
    },
    /// Whether a score threshold is maximal among decisions on the chosen basis.
    Pareto {
        #[command(flatten)]
        world: WorldArgs,
        /// Threshold applied to the score.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Basis for the rates; both when omitted.
        #[arg(long, value_enum)]
        basis: Option<BasisArg>,
    },
    /// Per-group score thresholds reproducing the fair decision at each cut-off.
    Decompose {
        #[command(flatten)]
        world: WorldArgs,
        /// Cut-offs on the fair probability; every distinct grid value when omitted.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Fair,
    Unfair,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Fair => Basis::Fair,
            BasisArg::Unfair => Basis::Unfair,
        }
    }
}

fn build_world(a: &WorldArgs, seed: u64) -> CliResult<FairWorld<f64>> {
    if let Some(p) = &a.world_csv {
        let f = std::fs::File::open(p).map_err(|e| CliError::io(p, e))?;
        return FairWorld::read_csv(f).in_module("theory");
    }
    match a.world {
        WorldKind::Example => running_example_world(a.grid),
        WorldKind::AntiMonotone => anti_monotone_world(a.grid),
        WorldKind::Identity => identity_world(a.grid),
        WorldKind::Random => random_world(seed, a.grid, a.comonotone),
    }
    .in_module("theory")
}

#[derive(Serialize)]
struct DecompositionEntry {
    #[serde(flatten)]
    result: Decomposition<f64>,
    /// The per-group score thresholds label every point like the fair cut-off.
    same_labels: Option<bool>,
}

fn decompose(w: &FairWorld<f64>, tau: f64) -> DecompositionEntry {
    let result = decomposition_check(w, tau);
    let same_labels = result.thresholds.map(|th| {
        threshold_decision(w, Basis::Unfair, 0.0, Some(th)) == threshold_decision(w, Basis::Fair, tau, None)
    });
    DecompositionEntry { result, same_labels }
}

#[derive(Serialize)]
struct ParetoEntry {
    basis: Basis,
    tau: f64,
    positives: usize,
    #[serde(flatten)]
    result: ParetoResult<f64>,
}

fn pareto(w: &FairWorld<f64>, dec: &Decision, tau: f64, basis: Basis) -> CliResult<ParetoEntry> {
    Ok(ParetoEntry {
        basis,
        tau,
        positives: dec.positives(),
        result: pareto_check(w, dec, basis).in_module("theory")?,
    })
}

#[derive(Serialize)]
struct ExampleReport {
    grid_size: usize,
    aaa: AaaResult<f64>,
    decompositions: Vec<DecompositionEntry>,
    pareto: Vec<ParetoEntry>,
}

#[derive(Serialize)]
struct AaaReport {
    #[serde(flatten)]
    aaa: AaaResult<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theorem: Option<TheoremCheck<f64>>,
}

#[derive(Serialize)]
struct DecomposeReport {
    grid_size: usize,
    all_decomposable: bool,
    failing_tau: Option<f64>,
    decompositions: Vec<DecompositionEntry>,
}

fn write_world(sink: &mut Sink, w: &FairWorld<f64>) -> CliResult<PathBuf> {
    sink.write_with("world.csv", |buf| w.write_csv(buf), "theory")
}

/// Run one theory subcommand, writing `theory_<name>.json` and `world.csv`
/// under `out`. Returns the JSON path.
pub fn run(cmd: &TheoryCommand, out: &Path, seed: u64) -> CliResult<PathBuf> {
    let mut sink = Sink::new(out)?;
    let path = match cmd {
        TheoryCommand::Example { grid, tau } => {
            let w = running_example_world::<f64>(*grid).in_module("theory")?;
            let cut = threshold_decision(&w, Basis::Unfair, 0.5, None);
            let report = ExampleReport {
                grid_size: w.len(),
                aaa: aaa_check(&w, 0.0),
                decompositions: tau.iter().map(|&t| decompose(&w, t)).collect(),
                pareto: vec![
                    pareto(&w, &cut, 0.5, Basis::Unfair)?,
                    pareto(&w, &cut, 0.5, Basis::Fair)?,
                ],
            };
            write_world(&mut sink, &w)?;
            sink.write_json("theory_example.json", &report)?
        }
        TheoryCommand::Aaa {
            world,
            tolerance,
            theorem,
        } => {
            if !(*tolerance >= 0.0) {
                return Err(CliError::Config(format!("tolerance {tolerance} must be nonnegative")));
            }
            let w = build_world(world, seed)?;
            let report = AaaReport {
                aaa: aaa_check(&w, *tolerance),
                theorem: theorem.then(|| theorem_check(&w)),
            };
            write_world(&mut sink, &w)?;
            sink.write_json("theory_aaa.json", &report)?
        }
        TheoryCommand::Pareto { world, tau, basis } => {
            let w = build_world(world, seed)?;
            let dec = threshold_decision(&w, Basis::Unfair, *tau, None);
            let bases = match basis {
                Some(b) => vec![Basis::from(*b)],
                None => vec![Basis::Unfair, Basis::Fair],
            };
            let entries = bases
                .into_iter()
                .map(|b| pareto(&w, &dec, *tau, b))
                .collect::<CliResult<Vec<_>>>()?;
            write_world(&mut sink, &w)?;
            sink.write_json("theory_pareto.json", &entries)?
        }
        TheoryCommand::Decompose { world, tau } => {
            let w = build_world(world, seed)?;
            let taus = if tau.is_empty() {
                let mut t: Vec<f64> = w.points().iter().map(|p| p.fair_p).collect();
                t.sort_by(f64::total_cmp);
                t.dedup();
                t
            } else {
                tau.clone()
            };
            let decompositions: Vec<DecompositionEntry> = taus.iter().map(|&t| decompose(&w, t)).collect();
            let failing_tau = decompositions.iter().find(|d| !d.result.decomposable).map(|d| d.result.tau);
            let report = DecomposeReport {
                grid_size: w.len(),
                all_decomposable: failing_tau.is_none(),
                failing_tau,
                decompositions,
            };
            write_world(&mut sink, &w)?;
            sink.write_json("theory_decompose.json", &report)?
        }
    };
    Ok(path)
}

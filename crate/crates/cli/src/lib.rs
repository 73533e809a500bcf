//! Command-line front end: run the audit pipeline from a TOML config,
//! compare stored reports, and explore theory worlds.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod theory_cmd;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{Format, Overrides, RunConfig};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION};
use crate::output::Sink;
use crate::pipeline::Stage;
use crate::theory_cmd::TheoryCommand;

#[derive(Debug, Parser)]
#[command(name = "rankaudit", version, about = "Audit bias mitigation for between-group fairness and within-group ranking")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report format; overrides `output.formats`.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and split every dataset, write summaries.
    Ingest,
    /// Ingest, then fit the baseline scorer and score the test partition.
    Train,
    /// Train, then apply every configured mitigation method.
    Mitigate,
    /// Mitigate, then turn scores into decisions under every policy.
    Decide,
    /// Decide, then write audit reports.
    Audit,
    /// The whole pipeline.
    Run,
    /// Theory worlds and checks.
    Theory {
        #[command(subcommand)]
        command: TheoryCommand,
    },
    /// Side-by-side table of reports made under the same policy.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Tabulate even when realized positive decision rates differ.
        #[arg(long)]
        allow_uncontrolled: bool,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    RunConfig::load(path)?.resolve(&Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        format: cli.format,
    })
}

fn report_chain(e: &CliError) -> String {
    let mut msg = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(s) = src {
        let text = s.to_string();
        if !msg.contains(&text) {
            msg.push_str(": ");
            msg.push_str(&text);
        }
        src = s.source();
    }
    msg
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let stage = match &cli.command {
        Command::Ingest => Some(Stage::Ingest),
        Command::Train => Some(Stage::Train),
        Command::Mitigate => Some(Stage::Mitigate),
        Command::Decide => Some(Stage::Decide),
        Command::Audit | Command::Run => Some(Stage::Audit),
        _ => None,
    };
    if let Some(stage) = stage {
        let cfg = load_config(cli)?;
        let summary = pipeline::execute(&cfg, stage)?;
        println!("{}", summary.out_dir.display());
        for (_, reports) in &summary.reports {
            for r in reports {
                println!("{}", r.display());
            }
        }
        return Ok(());
    }
    match &cli.command {
        Command::Theory { command } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let path = theory_cmd::run(command, &out, cli.seed.unwrap_or(0))?;
            println!("{}", path.display());
        }
        Command::Compare {
            reports,
            allow_uncontrolled,
        } => {
            let loaded = reports
                .iter()
                .map(|p| Ok((p.display().to_string(), compare::load_report(p)?)))
                .collect::<CliResult<Vec<_>>>()?;
            let table = compare::compare(&loaded, *allow_uncontrolled)?;
            if let Some(c) = &table.caveat {
                eprintln!("warning: {c}");
            }
            let format = cli.format.unwrap_or(Format::Csv);
            let (name, text) = match format {
                Format::Csv => ("comparison.csv", table.to_csv()?),
                Format::Json => (
                    "comparison.json",
                    serde_json::to_string_pretty(&table).map_err(|e| CliError::Serialize(e.to_string()))? + "\n",
                ),
            };
            match &cli.out {
                Some(dir) => {
                    let path = Sink::new(dir)?.write_text(name, &text)?;
                    println!("{}", path.display());
                }
                None => print!("{text}"),
            }
        }
        _ => unreachable!("pipeline stages handled above"),
    }
    Ok(())
}

/// Parse `args`, run, and return the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", report_chain(&e));
            e.exit_code()
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;

use cagegen::backbone::BackboneMode;
use cagegen::catalog::{filter, parse_rational, run, Predicate, RunConfig};
use cagegen::indices::Rational;
use cagegen::Error;

/// Enumerate saturated planar maps built from a motif base.
#[derive(Parser, Debug)]
#[command(name = "cagegen", version)]
struct Cli {
    /// Motif base file.
    #[arg(long)]
    base: PathBuf,
    /// Number of motifs in the backbone (metamotifs with --metamotif).
    #[arg(long)]
    size: usize,
    /// Backbone shape.
    #[arg(long, default_value = "tree", value_parser = ["tree", "path", "cycle"])]
    backbone: String,
    /// Only enumerate backbones whose motif multiset can saturate.
    #[arg(long)]
    almost_foldable: bool,
    /// Generate over the base with degree-2 motifs eliminated, then expand.
    #[arg(long)]
    metamotif: bool,
    /// Drop maps whose minimum sparsity is below P/Q.
    #[arg(long, value_name = "P/Q", value_parser = parse_ratio)]
    min_sparsity: Option<Rational>,
    /// Extra filter, e.g. `class_count<=2,chiral=false`.
    #[arg(long, value_name = "EXPR")]
    filter: Option<String>,
    /// Skip index computation.
    #[arg(long)]
    no_indices: bool,
    /// Catalog output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Time budget in seconds; 0 disables it.
    #[arg(long, default_value_t = 300)]
    budget: u64,
    /// Print a summary table to standard error.
    #[arg(long)]
    summary: bool,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_ratio(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    let text = std::fs::read_to_string(&cli.base)?;
    let mode: BackboneMode = cli.backbone.parse()?;
    let mut config = RunConfig::new(&text, cli.size, mode)?;
    config.almost_foldable = cli.almost_foldable;
    config.metamotif = cli.metamotif;
    config.min_sparsity = cli.min_sparsity;
    config.indices = !cli.no_indices;
    config.workers = cli.workers;
    config.budget = (cli.budget > 0).then(|| Duration::from_secs(cli.budget));
    let predicate: Option<Predicate> = cli.filter.as_deref().map(str::parse).transpose()?;

    let (mut catalog, summary) = run(&config)?;
    if let Some(p) = &predicate {
        catalog = filter(&catalog, p);
    }
    let out = catalog.format();
    match &cli.out {
        Some(path) => std::fs::write(path, out)?,
        None => print!("{out}"),
    }
    if cli.summary {
        eprint!("{}", summary.render(&config));
    } else {
        for w in &summary.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(summary.complete)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

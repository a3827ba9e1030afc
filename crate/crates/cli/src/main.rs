use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nsul::experiment;
use nsul::ladder::convergence_ladder;
use nsul::snapshot::Snapshot;
use nsul::table::format_f64;
use nsul::ExperimentConfig;

#[derive(Parser)]
#[command(name = "nsul", version, about = "2D Navier-Stokes bound-monitoring laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override `ic.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run seeded random members and fit a constant per monitor.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Defaults to `ic.ensemble_size`.
        #[arg(long)]
        count: Option<usize>,
        /// Defaults to `ic.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Refinement study selected by `scheme.ladder_study`.
    Ladder {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Print the header and field ranges of a snapshot.
    InspectSnapshot { path: PathBuf },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("config {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = load(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with("ic.seed", &s.to_string())?;
            }
            let outcome = experiment::run(&cfg, &out)?;
            println!("wrote {} rows to {}", outcome.table.rows.len(), out.join(&cfg.csv).display());
            for f in &outcome.fits {
                println!("fit {} = {}", f.name, format_f64(f.value));
            }
        }
        Command::Ensemble { config, out, count, seed } => {
            let cfg = load(&config)?;
            let count = count.unwrap_or(cfg.ensemble_size);
            let seed = match seed {
                Some(s) => s,
                None => cfg.get("ic.seed").unwrap_or("0").parse()?,
            };
            let outcome = experiment::ensemble(&cfg, count, seed, &out)?;
            for f in &outcome.fits {
                println!("fit {} = {} over {} members ({})", f.name, format_f64(f.value), f.members, f.resolution);
            }
        }
        Command::Ladder { config, out, levels } => {
            let cfg = load(&config)?;
            let report = convergence_ladder(&cfg, levels)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("ladder.csv"), report.table().to_bytes())?;
            for (p, e) in report.parameters.iter().zip(&report.errors) {
                println!("{} {:>10} error {}", report.study, format_f64(*p), format_f64(*e));
            }
            println!("fitted order {}", format_f64(report.order));
        }
        Command::InspectSnapshot { path } => {
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            let s = Snapshot::from_bytes(&bytes)?;
            let h = &s.header;
            println!("version {} grid {}x{} cell {}x{} t {}", h.version, h.n1, h.n2, h.l1, h.l2, format_f64(h.t));
            for (name, f) in h.names.iter().zip(&s.fields) {
                let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mean = f.iter().sum::<f64>() / f.len().max(1) as f64;
                println!("{name:<8} min {} max {} mean {}", format_f64(lo), format_f64(hi), format_f64(mean));
            }
        }
    }
    Ok(())
}

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use reconc_cli::demo::{run_demo, DemoName};
use reconc_cli::{io, run_reconcile, run_score, synthetic, ExperimentConfig, SEED_ENV};
use reconc_core::Hierarchy;

#[derive(Parser)]
#[command(
    name = "reconc",
    version,
    about = "Probabilistic reconciliation of hierarchical count forecasts"
)]
struct Cli {
    /// Suppress tables; only check lines, warnings and errors are printed.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconcile base forecasts and write summaries and joints.
    Reconcile {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score methods on held-out observations.
    Score {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a worked example: minimal_table2, poisson_table3 or hierarchy421.
    Demo {
        name: DemoName,
        /// Output directory; defaults to demo_out/<name>.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the summing matrix of a temporal hierarchy.
    Hierarchy {
        #[arg(long)]
        bottom: usize,
        #[arg(long, value_delimiter = ',')]
        factors: Vec<usize>,
    },
    /// Write seeded intermittent series and a matching score config.
    Synthetic {
        #[arg(long, default_value_t = 20)]
        series: usize,
        /// Cycles per series, the last one held out.
        #[arg(long, default_value_t = 6)]
        cycles: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Reconcile { config } => {
            let cfg = ExperimentConfig::load(&config, env_seed().as_deref())?;
            let outputs = run_reconcile(&cfg)?;
            for out in &outputs {
                for w in &out.warnings {
                    eprintln!("warning: {w}");
                }
                if !cli.quiet {
                    println!("series {}", out.series);
                    println!(
                        "  {:<10} {:>10} {:>10} {:>8} {:>8} {:>8}",
                        "node", "mean", "var", "median", "lower", "upper"
                    );
                    for s in &out.summaries {
                        println!(
                            "  {:<10} {:>10.4} {:>10.4} {:>8} {:>8.2} {:>8.2}",
                            s.label, s.mean, s.variance, s.median, s.lower, s.upper
                        );
                    }
                }
                for f in &out.files {
                    println!("wrote {}", f.display());
                }
            }
        }
        Command::Score { config } => {
            let cfg = ExperimentConfig::load(&config, env_seed().as_deref())?;
            let run = run_score(&cfg)?;
            for w in &run.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                println!(
                    "{:<6} {:<10} {:<20} {:>10}",
                    "metric", "level", "method", "skill"
                );
                for s in &run.report.skills {
                    println!(
                        "{:<6} {:<10} {:<20} {:>10.4}",
                        s.metric, s.level, s.method, s.value
                    );
                }
            }
            for f in &run.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Demo { name, out, seed } => {
            let seed = match env_seed() {
                Some(s) => s
                    .trim()
                    .parse()
                    .with_context(|| format!("{SEED_ENV}={s} is not a u64"))?,
                None => seed,
            };
            let report = run_demo(name, seed)?;
            if !cli.quiet {
                println!("{}", report.tables);
            }
            print!("{}", report.check_lines());
            let dir = out.unwrap_or_else(|| PathBuf::from("demo_out").join(name.name()));
            for f in report.write(&dir)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Hierarchy { bottom, factors } => {
            let h = Hierarchy::temporal(bottom, &factors)?;
            let s = h.s_matrix();
            let width = h.labels().iter().map(String::len).max().unwrap_or(0);
            for (i, label) in h.labels().iter().enumerate() {
                let row: Vec<String> = (0..h.m()).map(|j| format!("{}", s[(i, j)] as u8)).collect();
                println!("{label:<width$}  {}", row.join(" "));
            }
        }
        Command::Synthetic {
            series,
            cycles,
            seed,
            out,
        } => {
            if cycles < 2 {
                bail!("need at least two cycles: one for training, one held out");
            }
            let obs = synthetic::generate(series, cycles, 12, seed);
            io::write_file(&out.join("observations.csv"), &io::observations_csv(&obs)?)?;
            let cfg = serde_json::json!({
                "hierarchy": {"bottom": 12, "factors": [2, 3, 4, 6, 12]},
                "methods": ["probCount_mcmc", "normal", "structural_scaling", "truncated", "base"],
                "baseline": "normal",
                "sampler": {"chains": 4, "draws": 2000, "seed": seed},
                "observations": "observations.csv",
                "output_dir": "scores",
            });
            io::write_file(
                &out.join("config.json"),
                &(serde_json::to_string_pretty(&cfg)? + "\n"),
            )?;
            println!("wrote {} series to {}", obs.len(), out.display());
        }
    }
    Ok(())
}

use std::path::PathBuf;
use std::process::ExitCode;

use capgm::commands::{self, SimulateArgs, Study};
use capgm::{CliError, CliResult, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "capgm",
    version,
    about = "Predictor-informed nested clustering with a pyramid tree"
)]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its true labels.
    Simulate {
        /// sim1 or sim2.
        #[arg(long, default_value = "sim1")]
        study: Study,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, default_value_t = 4.0)]
        delta: f64,
        /// Also write an independent test set of this size.
        #[arg(long, default_value_t = 0)]
        test_n: usize,
    },
    /// Run the configured sampler and write traces and summaries.
    Fit,
    /// Score a CSV file against a fitted run.
    Predict {
        /// Output directory of a previous `fit`.
        run_dir: PathBuf,
        test: PathBuf,
    },
    /// Tabulate fitted runs (mean and standard error per method and dataset).
    Summarize {
        run_dirs: Vec<PathBuf>,
        /// Truth labels used for ARI; defaults to truth.csv beside the training file.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.sampler.seed = s;
    }
    if let Some(c) = cli.chains {
        cfg.sampler.chains = c;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate {
            study,
            n,
            p,
            delta,
            test_n,
        } => {
            let args = SimulateArgs {
                study: *study,
                n: *n,
                p: *p,
                delta: *delta,
                seed: cli.seed.unwrap_or(1),
                test_n: *test_n,
                out: cli.out.clone().unwrap_or_else(|| PathBuf::from(".")),
            };
            for path in commands::simulate(&args)? {
                println!("{}", path.display());
            }
        }
        Command::Fit => {
            let cfg = load_config(&cli)?;
            let outcome = commands::fit(&cfg)?;
            let s = &outcome.summary;
            println!(
                "{} on {}: {} draws, {} observational clusters ({} of at least {} observations), RMSPE {:.4}",
                s.method,
                s.dataset,
                s.draws,
                s.dahl.oc.clusters,
                s.dahl.oc.meaningful,
                s.meaningful_threshold,
                s.within_sample.rmspe
            );
            println!("{}", outcome.out.display());
        }
        Command::Predict { run_dir, test } => {
            let o = commands::predict(run_dir, test, cli.out.as_deref())?;
            println!("{}", o.predictions_path.display());
            if let (Some(s), Some(p)) = (&o.scores, &o.scores_path) {
                match s.lpds {
                    Some(l) => println!("RMSPE {:.4}  LPDS {:.2}", s.rmspe, l),
                    None => println!("RMSPE {:.4}  LPDS -inf", s.rmspe),
                }
                println!("{}", p.display());
            }
        }
        Command::Summarize { run_dirs, truth } => {
            let table = commands::summarize(run_dirs, truth.as_deref())?;
            match &cli.out {
                Some(path) => {
                    std::fs::write(path, &table).map_err(|e| CliError::io(path, e))?;
                    println!("{}", path.display());
                }
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capgm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

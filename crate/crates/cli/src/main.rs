use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridcast::dynamics::SystemId;
use hybridcast::eval::EmbeddingGrid;
use hybridcast::takens::Weighting;
use hybridcast::Result;
use hybridcast_cli::{
    cmd_generate, cmd_gridsearch, cmd_ingest, cmd_run, exit_code, GenerateArgs, GridArgs, RunArgs, Scale, Schema,
};

#[derive(Parser)]
#[command(name = "hybridcast", version, about = "Parametric, nonparametric and hybrid forecasting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write truth and noisy observations of one synthetic realization.
    Generate {
        /// lorenz63, hr_network or lpa; selects the bundled config when --config is absent.
        #[arg(long)]
        system: Option<SystemId>,
        /// Config file or bundled config name.
        #[arg(long)]
        config: Option<String>,
        /// Sampling intervals; files hold one more row.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        noise_variance: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0)]
        realization: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a Monte Carlo forecasting experiment.
    Run {
        /// Config file or bundled name (lorenz_fig2, hr_fig3, beetle_fig5).
        #[arg(long, required_unless_present = "manifest")]
        config: Option<String>,
        /// Replay the resolved config recorded by an earlier run.
        #[arg(long, conflicts_with = "config")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        jobs: Option<usize>,
        /// desk or paper realization count.
        #[arg(long, default_value = "desk")]
        scale: Scale,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Validate a measured CSV and split it into training and evaluation files.
    Ingest {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "t")]
        time_column: String,
        /// Comma-separated variable columns.
        #[arg(long, value_delimiter = ',', required = true)]
        columns: Vec<String>,
        /// Leading samples kept for training; the rest form the evaluation set.
        #[arg(long)]
        train: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Choose delay-embedding hyperparameters by held-out forecast error.
    Gridsearch {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value = "t")]
        time_column: String,
        #[arg(long)]
        column: String,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9")]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        tau: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20")]
        kappa: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        horizon: usize,
        /// Held-out samples at the end of the series.
        #[arg(long, default_value_t = 100)]
        tail: usize,
        #[arg(long, default_value = "uniform")]
        weighting: Weighting,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate {
            system,
            config,
            samples,
            h,
            noise_variance,
            seed,
            realization,
            out,
        } => {
            let m = cmd_generate(&GenerateArgs {
                system,
                config,
                samples,
                h,
                noise_variance,
                seed,
                realization,
                out,
            })?;
            println!("wrote {} rows to {}", m.config.experiment.training_samples + 1, m.output_dir);
        }
        Command::Run {
            config,
            manifest,
            seed,
            jobs,
            scale,
            out,
        } => {
            let m = cmd_run(&RunArgs {
                config,
                manifest,
                seed,
                jobs,
                scale,
                out,
            })?;
            println!(
                "{} realizations with seed {} written to {}",
                m.config.experiment.realizations, m.master_seed, m.output_dir
            );
        }
        Command::Ingest {
            csv,
            time_column,
            columns,
            train,
            out,
        } => {
            let ds = cmd_ingest(&csv, &Schema { time_column, columns }, train, &out)?;
            let eval = ds.eval.as_ref().map_or(0, |e| e.len());
            println!("training {} rows, evaluation {eval} rows in {}", ds.train.len(), out.display());
        }
        Command::Gridsearch {
            csv,
            time_column,
            column,
            d,
            tau,
            kappa,
            horizon,
            tail,
            weighting,
            out,
        } => {
            let r = cmd_gridsearch(&GridArgs {
                csv,
                time_column,
                column,
                grid: EmbeddingGrid { d, tau, kappa },
                horizon,
                tail,
                weighting,
                out,
            })?;
            println!(
                "best d={} tau={} kappa={} score={:.4} ({} cells, {} skipped)",
                r.best.d,
                r.best.tau,
                r.best.kappa,
                r.best.score,
                r.evaluated.len(),
                r.skipped
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

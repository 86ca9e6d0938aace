use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlmc_cftp::cftp::DEFAULT_MAX_BACK;
use vlmc_cftp::dsl::print_model;
use vlmc_cftp::experiment::{load_model, run_plan, ExperimentError, ExperimentPlan, PlanKind};

#[derive(Parser)]
#[command(name = "vlmc-cftp", version, about = "Perfect sampling for context tree models with a reference string")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file, then print its canonical form.
    Validate {
        #[arg(long)]
        model: PathBuf,
    },
    /// Sample a window once per seed.
    Sample(Common),
    /// Histogram of m - θ[m,n] over seeds.
    ThetaDist(Common),
    /// Mean |θ[0,0]| as p(w|v) = ε varies.
    EpsSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ε grid.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
        grid: Vec<f64>,
    },
    /// Visible regeneration anchors of a saved or freshly sampled window.
    Regen {
        #[command(flatten)]
        common: Common,
        /// File holding a sample in time order.
        #[arg(long)]
        sample: Option<PathBuf>,
    },
    /// Spontaneous trace, block trace and dominating process for one seed.
    AuxTrace(Common),
    /// Empirical window law against the enumerated law.
    OracleCompare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, num_args = 2, value_names = ["M", "N"], allow_negative_numbers = true)]
    window: Option<Vec<i64>>,
    #[arg(long, default_value_t = 1)]
    iterations: u64,
    #[arg(long, default_value_t = 50)]
    horizon: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_BACK)]
    max_back: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn plan(self, kind: PlanKind) -> ExperimentPlan {
        let mut p = ExperimentPlan::new(kind, self.model, self.out);
        p.seed = self.seed;
        p.iterations = self.iterations;
        p.horizon = self.horizon;
        p.max_back = self.max_back;
        if let Some(w) = self.window {
            p.window = (w[0], w[1]);
        }
        p
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let plan = match cli.command {
        Command::Validate { model } => {
            return match load_model(&model) {
                Ok((m, _)) => {
                    print!("{}", print_model(&m));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            };
        }
        Command::Sample(c) => c.plan(PlanKind::Sample),
        Command::ThetaDist(c) => c.plan(PlanKind::ThetaDistribution),
        Command::EpsSweep { common, grid } => {
            let mut p = common.plan(PlanKind::EpsilonSweep);
            p.eps_grid = grid;
            p
        }
        Command::Regen { common, sample } => {
            let mut p = common.plan(PlanKind::RegenerationReport);
            p.sample_path = sample;
            p
        }
        Command::AuxTrace(c) => c.plan(PlanKind::AuxiliaryTrace),
        Command::OracleCompare(c) => c.plan(PlanKind::OracleCompare),
    };
    match run_plan(&plan) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            if summary.aborted > 0 {
                eprintln!("{} of {} runs aborted", summary.aborted, summary.total);
            }
            if summary.aborted_dominated() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail(e),
    }
}

fn fail(e: ExperimentError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        ExperimentError::Parse { .. } | ExperimentError::Model(_) => ExitCode::from(2),
        _ => ExitCode::FAILURE,
    }
}

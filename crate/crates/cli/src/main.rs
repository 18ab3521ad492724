//! `mixval` command-line front end.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

use mixval::ErrorKind;

const LONG_VERSION: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    "\nlibrary: mixval ",
    env!("CARGO_PKG_VERSION"),
    "\nprofile: ",
    env!("MIXVAL_BUILD_PROFILE"),
    "\ntarget: ",
    env!("MIXVAL_BUILD_TARGET")
);

const THREADS_HELP: &str = "Set MIXVAL_THREADS to bound the worker thread count.";

#[derive(Parser)]
#[command(name = "mixval", version, long_version = LONG_VERSION, about = "Long-tail scaling curves and retraining-free data valuation", after_help = THREADS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Directory with one `<id>.csv` sample file per contributor.
    #[arg(long)]
    contributors: PathBuf,
    /// Test sample file.
    #[arg(long)]
    test: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum WeightingKind {
    Shapley,
    Loo,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScoreColumn {
    Total,
    LossTerm,
    DiscrepancyTerm,
    NtkTerm,
    CompositionTerm,
}

#[derive(Subcommand)]
enum Command {
    /// Exact expected test error over a sample-size grid for each π.
    #[command(
        after_long_help = "Outputs:\n  curves.csv     pi,n,error,irreducible,unseen_rho,unseen_gamma,reducible,phase\n  simulate.json  per-π predicted and detected breakpoints, plateau slopes, monotonicity"
    )]
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Synthetic contributor directory and test set.
    #[command(
        after_long_help = "Outputs:\n  contributors/S01.csv ...  id,knowledge_index,is_real,label,x0,...\n  test.csv                  same columns"
    )]
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Multi-kernel MMD between two sample files.
    #[command(after_long_help = "Outputs:\n  discrepancy.json  value, squared, estimator, kernel bank")]
    Discrepancy {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Empirical NTK Gram matrix at initialisation.
    #[command(
        after_long_help = "Outputs:\n  gram.csv   n×n matrix, row i = Θ[i][0..n], no header\n  gram.json  trace, eigenvalue range, gradient norm bound, ridge, bound term"
    )]
    Gram {
        #[command(flatten)]
        common: Common,
        /// Sample file; the bound term uses its labels.
        #[arg(long)]
        samples: PathBuf,
    },
    /// Valuation scores for every contributor.
    #[command(
        after_long_help = "Outputs:\n  scores.csv  contributor_id,loss_term,discrepancy_term,ntk_term,composition_term,total,gradient_norm_bound,sample_count,pi\n  value.json  weights used, weight fit, kernel bank, failures"
    )]
    Value {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Ground-truth CSV; when given, weight fitting targets its metric.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Shapley or leave-one-out values on pooled coalitions.
    #[command(
        after_long_help = "Outputs:\n  marginal.csv   contributor_id,value,std_error\n  marginal.json  weighting, grand coalition value"
    )]
    Marginal {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Overrides the configured weighting kind.
        #[arg(long, value_enum)]
        weighting: Option<WeightingKind>,
        /// Sampled-Shapley permutation budget (exact enumeration otherwise).
        #[arg(long)]
        permutations: Option<usize>,
    },
    /// Retrain one model per contributor and record its test metric.
    #[command(
        after_long_help = "Outputs:\n  groundtruth.csv  contributor_id,test_metric,train_loss,epochs,converged,diverged,learning_rate,config_digest"
    )]
    Groundtruth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Correlate scores with ground truth.
    #[command(
        after_long_help = "Outputs:\n  evaluation.json  pearson/spearman/kendall for scores and negated scores, best orientation, excluded ids"
    )]
    Evaluate {
        /// Scores CSV from `value`.
        #[arg(long)]
        scores: PathBuf,
        /// Ground-truth CSV from `groundtruth`.
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, value_enum, default_value = "total")]
        column: ScoreColumn,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wall-clock time of valuation versus retraining.
    #[command(after_long_help = "Outputs:\n  bench.json  valuation and retraining runtime reports, speedup")]
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Parse | ErrorKind::Io => 2,
        ErrorKind::Domain => 3,
        ErrorKind::Numerical => 4,
    }
}

fn configure_threads() -> Result<(), String> {
    if let Ok(v) = std::env::var("MIXVAL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| format!("MIXVAL_THREADS must be a positive integer, got `{v}`"))?;
        if n == 0 {
            return Err("MIXVAL_THREADS must be ≥ 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error[config]: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let tag = match kind {
                ErrorKind::Parse => "parse",
                ErrorKind::Io => "io",
                ErrorKind::Domain => "domain",
                ErrorKind::Numerical => "numerical",
            };
            eprintln!("error[{tag}]: {e}");
            ExitCode::from(exit_code(kind))
        }
    }
}

mod commands;
mod input;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use input::UsageError;
use output::Format;

#[derive(Parser)]
#[command(name = "uptail", version, about = "Upper-tail rates for subgraph counts in random graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Worker threads for sampling and multi-start solves (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, env = "UPTAIL_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Er,
    Uniform,
    Regular,
    Block,
}

/// Parameters of the random graph model.
#[derive(Args, Debug, Clone)]
pub struct EnsembleArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Block fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Block kernel as an inline JSON matrix.
    #[arg(long)]
    pub kernel: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TargetArgs {
    /// Pattern graph: named spec, edge list, or @file. Repeat for joint events.
    #[arg(long = "graph", required = true)]
    pub graphs: Vec<String>,
    /// Target normalized count, one per --graph.
    #[arg(long = "t", required = true)]
    pub ts: Vec<f64>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Homomorphism count of a pattern in a host graph.
    Hom {
        #[arg(long)]
        pattern: String,
        #[arg(long, conflicts_with = "graph_file", required_unless_present = "graph_file")]
        graph: Option<String>,
        #[arg(long)]
        graph_file: Option<String>,
        /// Also report the count normalized by n^v p^e.
        #[arg(long)]
        p: Option<f64>,
    },
    /// Closed-form rate constant for one pattern.
    Rate {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = Model::Er)]
        model: Model,
        /// With --p (or --d), attach the scale a_{n,p}.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Joint rate constant for several patterns with a common maximum degree.
    JointRate {
        #[arg(long = "graph", required = true)]
        graphs: Vec<String>,
        #[arg(long = "delta", required = true)]
        deltas: Vec<f64>,
    },
    /// Build an explicit block-matrix optimizer.
    Construct {
        #[arg(long, value_enum)]
        kind: commands::ConstructKind,
        #[arg(long)]
        graph: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        m: Option<u64>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long)]
        y: Option<f64>,
    },
    /// Numerically minimize the entropy subject to count constraints.
    Solve {
        #[command(flatten)]
        targets: TargetArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long, default_value_t = uptail::solver::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Draw one graph from the model.
    Sample {
        #[command(flatten)]
        ensemble: EnsembleArgs,
        /// Stream index within the seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Use this many switching moves instead of rejection (regular model; approximate).
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Direct Monte Carlo estimate of the upper tail.
    TailMc {
        #[command(flatten)]
        targets: TargetArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        samples: usize,
        /// Threshold against the sample mean instead of n^v p^e.
        #[arg(long)]
        two_pass: bool,
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Importance-sampled estimate of the upper tail.
    TailIs {
        #[command(flatten)]
        targets: TargetArgs,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[arg(long)]
        samples: usize,
        /// Tilt as a CSV matrix or JSON block spec, inline or @file. Defaults
        /// to the clique/hub construction at the joint-rate witness (ER only).
        #[arg(long)]
        tilt: Option<String>,
        /// Mix the tilt toward the base: (1 − eta)·tilt + eta·p. Defaults to
        /// 0.85 for the built-in tilt and 0 otherwise.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Advisory check of p against the regime where the asymptotics apply.
    Check {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<uptail::Error>() {
        Some(uptail::Error::Parse { .. }) => 2,
        Some(uptail::Error::Resource(_) | uptail::Error::Infeasible { .. } | uptail::Error::Sampling(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let result = pool.install(|| commands::run(cli.command, cli.seed, cli.format));
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(out.render(cli.format).as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

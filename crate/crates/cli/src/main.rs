mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "spreadguard", version, about = "Resource allocation against SIS spreading on weighted digraphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural and spectral report of a network.
    Analyze {
        #[arg(long)]
        graph: PathBuf,
        /// Also write the per-node table and summary into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cheapest allocation reaching a target decay rate.
    AllocateRate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        eps_bar: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fastest decay rate affordable with a budget.
    AllocateBudget {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean-field, linearised and optional Monte-Carlo trajectories.
    Simulate(SimulateArgs),
    /// Budget-constrained optimum over a list of budgets.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated absolute budgets.
        #[arg(long, value_delimiter = ',', conflicts_with = "factors", required_unless_present = "factors")]
        budgets: Vec<f64>,
        /// Comma-separated multiples of the rate-constrained optimal cost at `--eps-bar`.
        #[arg(long, value_delimiter = ',', requires = "eps_bar")]
        factors: Vec<f64>,
        #[arg(long)]
        eps_bar: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Node bounds `label,beta_lo,beta_hi,delta_lo,delta_hi`.
    #[arg(long)]
    params: PathBuf,
    /// Sampled cost overrides `label,kind,x,cost`.
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    tol_opt: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Setting {
    Cheapest,
    Strongest,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Rates from an allocation table (`label,beta,delta,...`).
    #[arg(long, conflicts_with = "params", required_unless_present = "params")]
    allocation: Option<PathBuf>,
    /// Rates from node bounds at one end of each box.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cheapest")]
    setting: Setting,
    /// Initial infection probability for every node, or a file `label,p`.
    #[arg(long, default_value = "1")]
    p0: String,
    #[arg(long, default_value_t = 50.0)]
    t_end: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// Local error tolerance of the integrators.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Monte-Carlo trials; 0 disables the stochastic overlay.
    #[arg(long, default_value_t = 0)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::Analyze { graph, out } => commands::analyze(&graph, out.as_deref(), &args),
        Command::AllocateRate { problem, eps_bar, out } => {
            commands::allocate(&problem, commands::Target::Rate(eps_bar), &out, &args)
        }
        Command::AllocateBudget { problem, budget, out } => {
            commands::allocate(&problem, commands::Target::Budget(budget), &out, &args)
        }
        Command::Simulate(sim) => commands::simulate(&sim, &args),
        Command::Sweep { problem, budgets, factors, eps_bar, out } => {
            let spec = match eps_bar.filter(|_| !factors.is_empty()) {
                Some(eps) => commands::SweepSpec::Factors { eps_bar: eps, factors },
                None => commands::SweepSpec::Budgets(budgets),
            };
            commands::sweep(&problem, spec, &out, &args)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use need_replay::harness::{resolve, run_experiment, ConfigOverlay};
use need_replay::Error;

/// Need-based prioritized replay benchmarks.
///
/// Each subcommand runs one experiment and writes raw plus aggregate CSV
/// under --out. A JSON config file may supply any value; flags override
/// the file, and experiment defaults fill the rest.
#[derive(Parser)]
#[command(name = "need-replay", version, about)]
struct Cli {
    /// JSON config file with flat keys (experiment, trials, gamma, ...).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Experiment name when no subcommand is given (maze, cliffwalk,
    /// sr-heatmap, toy-persr).
    #[arg(long)]
    experiment: Option<String>,

    #[command(flatten)]
    overrides: CommonArgs,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Dyna maze: prioritized sweeping with and without the need term.
    Maze(CommonArgs),
    /// Blind Cliffwalk: six replay schemes, Q-updates to convergence.
    Cliffwalk(CommonArgs),
    /// Successor-representation heatmaps of the maze start state.
    SrHeatmap(CommonArgs),
    /// PER versus need-modulated PER on a noisy toy chain.
    ToyPersr(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Maze(_) => "maze",
            Command::Cliffwalk(_) => "cliffwalk",
            Command::SrHeatmap(_) => "sr-heatmap",
            Command::ToyPersr(_) => "toy-persr",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Maze(a)
            | Command::Cliffwalk(a)
            | Command::SrHeatmap(a)
            | Command::ToyPersr(a) => a,
        }
    }
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Algorithms or schemes to run (comma separated).
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<String>>,

    /// Independent trials (or seeds per cell).
    #[arg(long)]
    trials: Option<usize>,

    /// Episodes per trial.
    #[arg(long)]
    episodes: Option<usize>,

    /// Base seed; trial i derives seed base+i.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory for CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Discount factor.
    #[arg(long)]
    gamma: Option<f64>,

    /// Eligibility-trace decay for SR learning.
    #[arg(long)]
    lambda: Option<f64>,

    /// Prioritization exponent alpha.
    #[arg(long = "alpha-exp")]
    alpha_exp: Option<f64>,

    /// Importance-sampling exponent beta.
    #[arg(long)]
    beta: Option<f64>,

    /// Exploration rate.
    #[arg(long)]
    epsilon: Option<f64>,

    /// Q step size.
    #[arg(long = "q-step")]
    q_step: Option<f64>,

    /// SR step size.
    #[arg(long = "sr-step")]
    sr_step: Option<f64>,

    /// Planning backups per real step (maze).
    #[arg(long = "plan-steps")]
    plan_steps: Option<usize>,

    /// Chain sizes for the cliffwalk (comma separated).
    #[arg(long = "n-states", value_delimiter = ',')]
    n_states: Option<Vec<usize>>,

    /// Q-update budget before a run is censored.
    #[arg(long = "update-budget")]
    update_budget: Option<u64>,

    /// Convergence threshold on MSE to the ground-truth Q.
    #[arg(long = "mse-threshold")]
    mse_threshold: Option<f64>,

    /// Terminal-reward noise standard deviation (toy-persr).
    #[arg(long = "noise-sd")]
    noise_sd: Option<f64>,

    /// Cliffwalk fall handling: terminate or restart.
    #[arg(long = "fall-convention")]
    fall_convention: Option<String>,

    /// Plain-text maze layout file overriding the standard board.
    #[arg(long = "maze-file")]
    maze_file: Option<PathBuf>,
}

impl CommonArgs {
    fn overlay(&self, experiment: Option<&str>) -> ConfigOverlay {
        ConfigOverlay {
            experiment: experiment.map(str::to_owned),
            algorithms: self.algo.clone(),
            trials: self.trials,
            episodes: self.episodes,
            update_budget: self.update_budget,
            seed: self.seed,
            out: self.out.as_ref().map(|p| p.display().to_string()),
            gamma: self.gamma,
            lambda: self.lambda,
            alpha_exp: self.alpha_exp,
            beta: self.beta,
            epsilon: self.epsilon,
            q_step: self.q_step,
            sr_step: self.sr_step,
            plan_steps: self.plan_steps,
            queue_threshold: None,
            minibatch: None,
            replay_period: None,
            capacity: None,
            n_states: self.n_states.clone(),
            mse_threshold: self.mse_threshold,
            noise_sd: self.noise_sd,
            fall_convention: self.fall_convention.clone(),
            maze_file: self.maze_file.as_ref().map(|p| p.display().to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut overlay = ConfigOverlay::default();
    if let Some(path) = &cli.config {
        overlay = overlay.merge(ConfigOverlay::from_json(&std::fs::read_to_string(path)?)?);
    }
    // flags override the file; the subcommand (or --experiment) decides
    // which experiment runs
    let flag_overlay = match &cli.command {
        Some(cmd) => cmd.args().overlay(Some(cmd.name())),
        None => cli.overrides.overlay(cli.experiment.as_deref()),
    };
    overlay = overlay.merge(flag_overlay);

    let cfg = resolve(&overlay)?;
    let summary = run_experiment(&cfg)?;
    println!(
        "{}: {} raw rows, {} aggregate rows",
        cfg.experiment.name(),
        summary.raw_rows,
        summary.aggregate_rows
    );
    for file in summary.files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ Error::InvalidConfig { .. }) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::agents::{CliffwalkConfig, CliffwalkScheme, PerSrConfig, SweepingConfig};
use crate::envs::FallConvention;
use crate::error::{Error, Result};

/// Which benchmark to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Maze,
    Cliffwalk,
    SrHeatmap,
    ToyPersr,
}

impl ExperimentKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "maze" => Ok(ExperimentKind::Maze),
            "cliffwalk" => Ok(ExperimentKind::Cliffwalk),
            "sr-heatmap" => Ok(ExperimentKind::SrHeatmap),
            "toy-persr" => Ok(ExperimentKind::ToyPersr),
            other => Err(Error::config(
                "experiment",
                format!("unknown experiment `{other}`"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Maze => "maze",
            ExperimentKind::Cliffwalk => "cliffwalk",
            ExperimentKind::SrHeatmap => "sr-heatmap",
            ExperimentKind::ToyPersr => "toy-persr",
        }
    }
}

/// Partial configuration: every field optional so a JSON file and CLI
/// flags can be layered over the experiment defaults (flags win).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigOverlay {
    pub experiment: Option<String>,
    pub algorithms: Option<Vec<String>>,
    pub trials: Option<usize>,
    pub episodes: Option<usize>,
    pub update_budget: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub alpha_exp: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub q_step: Option<f64>,
    pub sr_step: Option<f64>,
    pub plan_steps: Option<usize>,
    pub queue_threshold: Option<f64>,
    pub minibatch: Option<usize>,
    pub replay_period: Option<usize>,
    pub capacity: Option<usize>,
    pub n_states: Option<Vec<usize>>,
    pub mse_threshold: Option<f64>,
    pub noise_sd: Option<f64>,
    pub fall_convention: Option<String>,
    pub maze_file: Option<String>,
}

impl ConfigOverlay {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Layer `over` on top of `self`; `over`'s set fields win.
    pub fn merge(mut self, over: ConfigOverlay) -> ConfigOverlay {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if over.$field.is_some() { self.$field = over.$field; })*
            };
        }
        take!(
            experiment, algorithms, trials, episodes, update_budget, seed, out, gamma,
            lambda, alpha_exp, beta, epsilon, q_step, sr_step, plan_steps,
            queue_threshold, minibatch, replay_period, capacity, n_states,
            mse_threshold, noise_sd, fall_convention, maze_file
        );
        self
    }
}

/// A fully resolved experiment description; identical configs produce
/// byte-identical CSV output.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub algorithms: Vec<String>,
    pub trials: usize,
    pub episodes: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub n_states: Vec<usize>,
    pub sweeping: SweepingConfig,
    pub cliffwalk: CliffwalkConfig,
    pub per_sr: PerSrConfig,
    pub mse_threshold: f64,
    pub update_budget: u64,
    pub noise_sd: f64,
    pub maze_file: Option<PathBuf>,
}

fn positive(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must be positive, got {value}")))
    }
}

fn unit_open(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(Error::config(
            field,
            format!("must lie strictly inside (0, 1), got {value}"),
        ))
    }
}

fn unit_closed(field: &str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::config(field, format!("must lie in [0, 1], got {value}")))
    }
}

/// Resolve an overlay against the chosen experiment's defaults,
/// validating every field.
pub fn resolve(overlay: &ConfigOverlay) -> Result<ExperimentConfig> {
    let experiment = ExperimentKind::parse(
        overlay
            .experiment
            .as_deref()
            .ok_or_else(|| Error::config("experiment", "missing (flag or config file)"))?,
    )?;

    let fall_convention = match overlay.fall_convention.as_deref() {
        None | Some("terminate") => FallConvention::Terminate,
        Some("restart") => FallConvention::RestartNonterminal,
        Some(other) => {
            return Err(Error::config(
                "fall_convention",
                format!("expected `terminate` or `restart`, got `{other}`"),
            ))
        }
    };

    let algorithms = match (&overlay.algorithms, experiment) {
        (Some(a), _) => a.clone(),
        (None, ExperimentKind::Maze) => vec!["ps".into(), "ps-sr".into()],
        (None, ExperimentKind::Cliffwalk) => CliffwalkScheme::ALL
            .iter()
            .map(|s| s.name().to_string())
            .collect(),
        (None, ExperimentKind::SrHeatmap) => vec!["ps-sr".into()],
        (None, ExperimentKind::ToyPersr) => vec!["per".into(), "per-sr".into()],
    };
    for name in &algorithms {
        let known = match experiment {
            ExperimentKind::Maze | ExperimentKind::SrHeatmap => {
                matches!(name.as_str(), "ps" | "ps-sr")
            }
            ExperimentKind::Cliffwalk => CliffwalkScheme::parse(name).is_ok(),
            ExperimentKind::ToyPersr => matches!(name.as_str(), "per" | "per-sr"),
        };
        if !known {
            return Err(Error::config(
                "algorithms",
                format!("`{name}` is not valid for the {} experiment", experiment.name()),
            ));
        }
    }

    let trials = overlay.trials.unwrap_or(match experiment {
        ExperimentKind::Maze => 50,
        ExperimentKind::Cliffwalk => 10,
        ExperimentKind::SrHeatmap => 1,
        ExperimentKind::ToyPersr => 20,
    });
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let episodes = overlay.episodes.unwrap_or(match experiment {
        ExperimentKind::SrHeatmap => 100,
        _ => 50,
    });
    if episodes == 0 {
        return Err(Error::config("episodes", "must be at least 1"));
    }

    let n_states = overlay.n_states.clone().unwrap_or_else(|| match experiment {
        ExperimentKind::ToyPersr => vec![5],
        _ => (3..=13).collect(),
    });
    for &n in &n_states {
        if !(2..=20).contains(&n) {
            return Err(Error::config(
                "n_states",
                format!("chain sizes must lie in 2..=20, got {n}"),
            ));
        }
    }

    let default_gamma = match experiment {
        ExperimentKind::Maze | ExperimentKind::SrHeatmap => 0.95,
        _ => 0.9,
    };
    let gamma = unit_open("gamma", overlay.gamma.unwrap_or(default_gamma))?;
    let default_lambda = match experiment {
        ExperimentKind::Cliffwalk => 0.95,
        _ => 0.5,
    };
    let lambda = unit_closed("lambda", overlay.lambda.unwrap_or(default_lambda))?;
    let alpha_exp = unit_closed("alpha_exp", overlay.alpha_exp.unwrap_or(0.6))?;
    let beta = unit_closed("beta", overlay.beta.unwrap_or(0.0))?;
    let default_epsilon = match experiment {
        ExperimentKind::Maze | ExperimentKind::SrHeatmap => 0.05,
        ExperimentKind::Cliffwalk => 0.1,
        ExperimentKind::ToyPersr => 0.3,
    };
    let epsilon = unit_closed("epsilon", overlay.epsilon.unwrap_or(default_epsilon))?;
    let default_q_step = match experiment {
        ExperimentKind::Maze | ExperimentKind::SrHeatmap => 0.1,
        _ => 0.25,
    };
    let q_step = positive("q_step", overlay.q_step.unwrap_or(default_q_step))?;
    let sr_step = positive("sr_step", overlay.sr_step.unwrap_or(0.1))?;
    let plan_steps = overlay.plan_steps.unwrap_or(5);
    let queue_threshold = overlay.queue_threshold.unwrap_or(1e-4);
    if queue_threshold < 0.0 {
        return Err(Error::config("queue_threshold", "must be nonnegative"));
    }
    let minibatch = overlay.minibatch.unwrap_or(8);
    if minibatch == 0 {
        return Err(Error::config("minibatch", "must be at least 1"));
    }
    let replay_period = overlay.replay_period.unwrap_or(1).max(1);
    let capacity = overlay.capacity.unwrap_or(512);
    if capacity == 0 {
        return Err(Error::config("capacity", "must be at least 1"));
    }
    let mse_threshold = positive("mse_threshold", overlay.mse_threshold.unwrap_or(1e-3))?;
    let update_budget = overlay.update_budget.unwrap_or(10_000_000);
    if update_budget == 0 {
        return Err(Error::config("update_budget", "must be at least 1"));
    }
    let noise_sd = overlay.noise_sd.unwrap_or(0.1);
    if noise_sd < 0.0 {
        return Err(Error::config("noise_sd", "must be nonnegative"));
    }

    let sweeping = SweepingConfig {
        gamma,
        q_step,
        epsilon,
        plan_steps,
        queue_threshold,
        lambda,
        sr_step,
        tie_break: crate::agents::TieBreak::Random,
    };
    let cliffwalk = CliffwalkConfig {
        gamma,
        q_step,
        alpha: alpha_exp,
        lambda,
        sr_step,
        epsilon,
        mse_threshold,
        update_budget,
        convention: fall_convention,
    };
    let per_sr = PerSrConfig {
        gamma,
        q_step,
        sr_step,
        alpha: alpha_exp,
        beta,
        epsilon,
        minibatch,
        replay_period,
        capacity,
        use_need: true,
    };

    Ok(ExperimentConfig {
        experiment,
        algorithms,
        trials,
        episodes,
        seed: overlay.seed.unwrap_or(0),
        out_dir: PathBuf::from(overlay.out.clone().unwrap_or_else(|| "out".into())),
        n_states,
        sweeping,
        cliffwalk,
        per_sr,
        mse_threshold,
        update_budget,
        noise_sd,
        maze_file: overlay.maze_file.clone().map(PathBuf::from),
    })
}

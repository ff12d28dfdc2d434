use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::agents::{
    cliffwalk_run, toy_chain_run, CliffwalkScheme, PerSrConfig, SweepingAgent, SweepingConfig,
};
use crate::envs::{DynaMaze, Environment};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::csv::{write_csv, write_text};
use crate::sr::SrMatrix;
use crate::stats::{mean, median, stderr};

/// Aggregate numbers produced by one experiment run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Raw record count across all cells.
    pub raw_rows: usize,
    /// Aggregate record count.
    pub aggregate_rows: usize,
    /// Every file written, in write order.
    pub files: Vec<PathBuf>,
}

/// Number of worker threads: NEED_REPLAY_THREADS when set, otherwise the
/// available parallelism, never more than the job count.
fn thread_cap(jobs: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("NEED_REPLAY_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(hw);
    cap.min(jobs).max(1)
}

/// Run `jobs` closures on a bounded pool and return outputs in job order
/// regardless of completion order.
fn run_jobs<T, F>(job_count: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let threads = thread_cap(job_count);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<T>>>> =
        Mutex::new((0..job_count).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let id = next.fetch_add(1, Ordering::Relaxed);
                if id >= job_count {
                    break;
                }
                let out = job(id);
                slots.lock().unwrap()[id] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every job ran"))
        .collect()
}

/// Execute the experiment described by `cfg`, writing raw and aggregate
/// CSV files under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    match cfg.experiment {
        ExperimentKind::Maze => run_maze(cfg),
        ExperimentKind::Cliffwalk => run_cliffwalk(cfg),
        ExperimentKind::ToyPersr => run_toy_persr(cfg),
        ExperimentKind::SrHeatmap => run_sr_heatmap(cfg),
    }
}

fn build_maze(cfg: &ExperimentConfig) -> Result<DynaMaze> {
    match &cfg.maze_file {
        Some(path) => DynaMaze::from_grid_file(path),
        None => Ok(DynaMaze::standard()),
    }
}

struct MazeCell {
    algorithm: usize,
    trial: usize,
    steps: Vec<u64>,
}

fn run_maze(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let algos = &cfg.algorithms;
    let jobs = algos.len() * cfg.trials;
    let cells = run_jobs(jobs, |id| -> Result<MazeCell> {
        let algorithm = id / cfg.trials;
        let trial = id % cfg.trials;
        let mut env = build_maze(cfg)?;
        let mut rng = crate::seeded_rng(cfg.seed + trial as u64);
        let mut agent = match algos[algorithm].as_str() {
            "ps" => SweepingAgent::prioritized_sweeping(
                env.state_count(),
                env.action_count(),
                cfg.sweeping,
            ),
            _ => SweepingAgent::with_need(&env, cfg.sweeping)?,
        };
        let mut steps = Vec::with_capacity(cfg.episodes);
        for _ in 0..cfg.episodes {
            let rec = agent.run_episode(&mut env, &mut rng)?;
            steps.push(rec.steps);
        }
        Ok(MazeCell {
            algorithm,
            trial,
            steps,
        })
    })?;

    let raw_path = cfg.out_dir.join("maze_raw.csv");
    let mut raw_rows = Vec::new();
    for cell in &cells {
        for (ep, &steps) in cell.steps.iter().enumerate() {
            raw_rows.push(format!(
                "{},{},{},{}",
                cell.trial,
                ep + 1,
                algos[cell.algorithm],
                steps
            ));
        }
    }
    // trial-major ordering for readability, deterministic either way
    raw_rows.sort();
    write_csv(&raw_path, "trial,episode,algorithm,steps", raw_rows.iter().cloned())?;

    let agg_path = cfg.out_dir.join("maze_agg.csv");
    let mut agg_rows = Vec::new();
    for (ai, name) in algos.iter().enumerate() {
        for ep in 0..cfg.episodes {
            let xs: Vec<f64> = cells
                .iter()
                .filter(|c| c.algorithm == ai)
                .map(|c| c.steps[ep] as f64)
                .collect();
            agg_rows.push(format!(
                "{},{},{},{},{}",
                name,
                ep + 1,
                mean(&xs),
                median(&xs),
                stderr(&xs)
            ));
        }
    }
    write_csv(
        &agg_path,
        "algorithm,episode,mean,median,stderr",
        agg_rows.iter().cloned(),
    )?;

    Ok(RunSummary {
        raw_rows: raw_rows.len(),
        aggregate_rows: agg_rows.len(),
        files: vec![raw_path, agg_path],
    })
}

struct CliffCell {
    scheme: usize,
    n_index: usize,
    seed_index: usize,
    q_updates: u64,
    converged: bool,
}

fn run_cliffwalk(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let schemes: Vec<CliffwalkScheme> = cfg
        .algorithms
        .iter()
        .map(|name| CliffwalkScheme::parse(name))
        .collect::<Result<_>>()?;
    let cells_per_scheme = cfg.n_states.len() * cfg.trials;
    let jobs = schemes.len() * cells_per_scheme;
    let cells = run_jobs(jobs, |id| -> Result<CliffCell> {
        let scheme = id / cells_per_scheme;
        let rest = id % cells_per_scheme;
        let n_index = rest / cfg.trials;
        let seed_index = rest % cfg.trials;
        let out = cliffwalk_run(
            schemes[scheme],
            cfg.n_states[n_index],
            cfg.seed + seed_index as u64,
            &cfg.cliffwalk,
        )?;
        Ok(CliffCell {
            scheme,
            n_index,
            seed_index,
            q_updates: out.q_updates,
            converged: out.converged,
        })
    })?;

    let raw_path = cfg.out_dir.join("cliffwalk_raw.csv");
    let raw_rows: Vec<String> = cells
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{}",
                schemes[c.scheme].name(),
                cfg.n_states[c.n_index],
                cfg.seed + c.seed_index as u64,
                c.q_updates,
                c.converged
            )
        })
        .collect();
    write_csv(
        &raw_path,
        "scheme,n,seed,q_updates,converged",
        raw_rows.iter().cloned(),
    )?;

    let agg_path = cfg.out_dir.join("cliffwalk_agg.csv");
    let mut agg_rows = Vec::new();
    for (si, scheme) in schemes.iter().enumerate() {
        for (ni, &n) in cfg.n_states.iter().enumerate() {
            let xs: Vec<f64> = cells
                .iter()
                .filter(|c| c.scheme == si && c.n_index == ni)
                .map(|c| c.q_updates as f64)
                .collect();
            agg_rows.push(format!(
                "{},{},{},{},{}",
                scheme.name(),
                n,
                mean(&xs),
                median(&xs),
                stderr(&xs)
            ));
        }
    }
    write_csv(
        &agg_path,
        "scheme,n,mean,median,stderr",
        agg_rows.iter().cloned(),
    )?;

    Ok(RunSummary {
        raw_rows: raw_rows.len(),
        aggregate_rows: agg_rows.len(),
        files: vec![raw_path, agg_path],
    })
}

fn run_toy_persr(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let n = *cfg.n_states.first().unwrap_or(&5);
    let jobs = cfg.algorithms.len() * cfg.trials;
    let outcomes = run_jobs(jobs, |id| {
        let algorithm = id / cfg.trials;
        let trial = id % cfg.trials;
        let per_cfg = PerSrConfig {
            use_need: cfg.algorithms[algorithm] == "per-sr",
            ..cfg.per_sr
        };
        toy_chain_run(
            n,
            cfg.seed + trial as u64,
            &per_cfg,
            cfg.noise_sd,
            cfg.mse_threshold,
            cfg.update_budget,
        )
    })?;

    let raw_path = cfg.out_dir.join("toy_persr_raw.csv");
    let mut raw_rows = Vec::new();
    for (id, out) in outcomes.iter().enumerate() {
        let algorithm = id / cfg.trials;
        let trial = id % cfg.trials;
        raw_rows.push(format!(
            "{},{},{},{}",
            cfg.algorithms[algorithm],
            cfg.seed + trial as u64,
            out.q_updates,
            out.converged
        ));
    }
    write_csv(
        &raw_path,
        "algorithm,seed,q_updates,converged",
        raw_rows.iter().cloned(),
    )?;

    let agg_path = cfg.out_dir.join("toy_persr_agg.csv");
    let mut agg_rows = Vec::new();
    for (ai, name) in cfg.algorithms.iter().enumerate() {
        let xs: Vec<f64> = outcomes
            .iter()
            .enumerate()
            .filter(|(id, _)| id / cfg.trials == ai)
            .map(|(_, o)| o.q_updates as f64)
            .collect();
        agg_rows.push(format!(
            "{},{},{},{}",
            name,
            mean(&xs),
            median(&xs),
            stderr(&xs)
        ));
    }
    write_csv(
        &agg_path,
        "algorithm,mean,median,stderr",
        agg_rows.iter().cloned(),
    )?;

    Ok(RunSummary {
        raw_rows: raw_rows.len(),
        aggregate_rows: agg_rows.len(),
        files: vec![raw_path, agg_path],
    })
}

/// Heatmap checkpoints: the start-state SR row after this many episodes.
pub const HEATMAP_CHECKPOINTS: [usize; 4] = [1, 10, 30, 100];

fn run_sr_heatmap(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let lambdas = [0.0, 1.0];
    let jobs = lambdas.len();
    let outputs = run_jobs(jobs, |id| -> Result<Vec<(String, String)>> {
        let lambda = lambdas[id];
        let mut env = build_maze(cfg)?;
        let rows = env.rows();
        let cols = env.cols();
        let start = env.start_state();
        let sweeping = SweepingConfig {
            lambda,
            ..cfg.sweeping
        };
        let mut agent = SweepingAgent::with_need(&env, sweeping)?;
        let mut rng = crate::seeded_rng(cfg.seed);
        let mut files = Vec::new();
        let tag = if lambda == 0.0 { "0" } else { "1" };
        let grid = |sr: &SrMatrix| sr.grid_csv(start, rows, cols);
        files.push((format!("heatmap_lambda{tag}_ep0.csv"), grid(agent.sr().unwrap())));
        let last = *HEATMAP_CHECKPOINTS.iter().max().unwrap();
        for episode in 1..=last.min(cfg.episodes) {
            agent.run_episode(&mut env, &mut rng)?;
            if HEATMAP_CHECKPOINTS.contains(&episode) {
                files.push((
                    format!("heatmap_lambda{tag}_ep{episode}.csv"),
                    grid(agent.sr().unwrap()),
                ));
            }
        }
        Ok(files)
    })?;

    let mut files = Vec::new();
    let mut rows = 0;
    for group in outputs {
        for (name, text) in group {
            let path = cfg.out_dir.join(name);
            rows += text.lines().count();
            write_text(&path, &text)?;
            files.push(path);
        }
    }
    Ok(RunSummary {
        raw_rows: rows,
        aggregate_rows: 0,
        files,
    })
}

/// Convenience: resolve, run, and describe one experiment.
pub fn run_from_overlay(overlay: &crate::harness::ConfigOverlay) -> Result<RunSummary> {
    let cfg = crate::harness::resolve(overlay)?;
    run_experiment(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ConfigOverlay;
    use crate::sr::SrMatrix;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("need_replay_harness_{tag}"));
        let _ = std::fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn tiny_maze_run_writes_consistent_counts() {
        let out = tmp_dir("maze");
        let overlay = ConfigOverlay::from_json(&format!(
            r#"{{"experiment": "maze", "trials": 3, "episodes": 4, "out": "{}"}}"#,
            out.display()
        ))
        .unwrap();
        let summary = run_from_overlay(&overlay).unwrap();
        // trials x episodes x algorithms
        assert_eq!(summary.raw_rows, 3 * 4 * 2);
        assert_eq!(summary.aggregate_rows, 4 * 2);
        for f in &summary.files {
            assert!(f.exists());
        }
    }

    #[test]
    fn double_run_is_byte_identical() {
        let out_a = tmp_dir("det_a");
        let out_b = tmp_dir("det_b");
        for (out, _) in [(&out_a, 0), (&out_b, 1)] {
            let overlay = ConfigOverlay::from_json(&format!(
                r#"{{"experiment": "cliffwalk", "trials": 2, "n_states": [3, 4],
                     "algorithms": ["per", "need"], "out": "{}"}}"#,
                out.display()
            ))
            .unwrap();
            run_from_overlay(&overlay).unwrap();
        }
        for name in ["cliffwalk_raw.csv", "cliffwalk_agg.csv"] {
            let a = std::fs::read(out_a.join(name)).unwrap();
            let b = std::fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn heatmap_emits_expected_files() {
        let out = tmp_dir("heat");
        let overlay = ConfigOverlay::from_json(&format!(
            r#"{{"experiment": "sr-heatmap", "episodes": 12, "out": "{}"}}"#,
            out.display()
        ))
        .unwrap();
        let summary = run_from_overlay(&overlay).unwrap();
        // ep0 + checkpoints 1 and 10 for each lambda
        assert_eq!(summary.files.len(), 6);
        let text = std::fs::read_to_string(out.join("heatmap_lambda1_ep10.csv")).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text
            .lines()
            .all(|l| l.split(',').all(|v| v.parse::<f64>().unwrap() >= 0.0)));

        // the episode-0 grid is the uniform-policy closed form
        let ep0 = std::fs::read_to_string(out.join("heatmap_lambda0_ep0.csv")).unwrap();
        let maze = DynaMaze::standard();
        let init = SrMatrix::init_uniform(&maze, 0.95, 0.0, 0.1).unwrap();
        let expect = init.grid_csv(maze.start_state(), 6, 9);
        assert_eq!(ep0, expect);
    }

    #[test]
    fn higher_lambda_paints_the_corridor_faster() {
        let out = tmp_dir("heat_corridor");
        let overlay = ConfigOverlay::from_json(&format!(
            r#"{{"experiment": "sr-heatmap", "episodes": 30, "out": "{}"}}"#,
            out.display()
        ))
        .unwrap();
        run_from_overlay(&overlay).unwrap();

        // corridor = the BFS-optimal path from start to goal
        let maze = DynaMaze::standard();
        let policy = maze.optimal_actions();
        let mut corridor = Vec::new();
        let mut s = maze.start_state();
        while s != maze.goal_state() {
            corridor.push(s);
            s = maze.transition(s, policy[s]).0;
        }
        // reference: the optimal deterministic policy's SR start row
        let t_opt = crate::sr::transition_matrix(&maze, |s, a| {
            if policy[s] == a {
                1.0
            } else {
                0.0
            }
        });
        let target = SrMatrix::from_transition_matrix(&t_opt, 0.95, 0.0, 0.0).unwrap();
        let start = maze.start_state();

        let corridor_error = |name: &str| -> f64 {
            let text = std::fs::read_to_string(out.join(name)).unwrap();
            let values: Vec<f64> = text
                .lines()
                .flat_map(|l| l.split(','))
                .map(|v| v.parse().unwrap())
                .collect();
            corridor
                .iter()
                .map(|&c| (values[c] - target.matrix()[(start, c)]).abs())
                .sum()
        };
        let slow = corridor_error("heatmap_lambda0_ep30.csv");
        let fast = corridor_error("heatmap_lambda1_ep30.csv");
        assert!(
            fast < slow,
            "lambda=1 corridor error {fast} should undercut lambda=0 error {slow}"
        );
    }

    #[test]
    fn thread_cap_respects_env_var() {
        std::env::set_var("NEED_REPLAY_THREADS", "2");
        assert_eq!(thread_cap(100), 2);
        std::env::set_var("NEED_REPLAY_THREADS", "0");
        assert!(thread_cap(100) >= 1);
        std::env::remove_var("NEED_REPLAY_THREADS");
        assert!(thread_cap(1) == 1);
    }
}

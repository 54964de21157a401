//! Monte-Carlo experiments: per-cell trial batches, bounds and CSV output.

mod config;
mod report;

use std::f64::consts::E;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bipartite::{algorithm3, g_bipartite, kesselheim_baseline, BipartiteParams};
use crate::error::{Error, Result};
use crate::graphic::{algorithm4, algorithm5, g_graphic, GraphicParams};
use crate::instances::{
    bipartite_targets, complete_bipartite, connected_random_graph, graphic_targets, random_bipartite, random_secretary,
    sample_arrival_order, ErrorModel,
};
use crate::oracles::{max_weight_forest, max_weight_matching, secretary_opt};
use crate::rng::{trial_rng, TrialRng};
use crate::secretary::{algorithm1, classical_secretary, g_secretary, naive_randomized, naive_randomized_bound, SecretaryParams};
use crate::stats::MeanEstimate;
use crate::truthful::{random_unit_demand, run_mechanism, TruthfulParams};

pub use config::{Algorithm, Cell, ExperimentConfig, Grid, InstanceSpec, Problem};
pub use report::{compare_with_bound, emit_csv, parse_csv, write_csv, CsvRow, Verdict, CSV_HEADER};

/// Largest admissible ratio; an online value above OPT is a bug.
pub const RATIO_CEILING: f64 = 1.0 + 1e-9;

/// Statistics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBatch {
    pub problem: Problem,
    pub algorithm: Algorithm,
    pub n: usize,
    pub cell: Cell,
    pub trials: u64,
    pub mean_ratio: f64,
    pub std_dev: f64,
    pub stderr: f64,
    pub bound: f64,
    pub seed: u64,
    /// Trials in which lambda was lowered to the smallest prediction.
    pub clamped_trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub cell: Cell,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub batches: Vec<TrialBatch>,
    pub skipped: Vec<SkippedCell>,
}

/// Guarantee for `algorithm` at the cell's relative parameters: with
/// lambda and eta measured in the per-trial scale, each g-function depends
/// on the cell alone.
pub fn cell_bound(algorithm: Algorithm, cell: &Cell, gamma: f64) -> Result<f64> {
    let Cell { c, d, lambda, eta, .. } = *cell;
    Ok(match algorithm {
        Algorithm::Classical => 1.0 / E,
        Algorithm::Algorithm1 => g_secretary(eta, &SecretaryParams::new(c, lambda, 1.0)?, 1.0),
        Algorithm::Naive => naive_randomized_bound(gamma, lambda, eta, 1.0),
        Algorithm::Kesselheim => (c / d).ln() / c,
        Algorithm::Algorithm3 | Algorithm::Mechanism => g_bipartite(eta, c, d, lambda, 1.0, 1),
        Algorithm::Algorithm4 => (c - 1.0) / (c * c),
        Algorithm::Algorithm5 => g_graphic(eta, c, d, lambda, 1.0, 1),
    })
}

#[derive(Debug, Clone, Copy)]
struct TrialOutcome {
    ratio: f64,
    clamped: bool,
}

fn ratio(value: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        value / opt
    } else {
        1.0
    }
}

/// Lowers `lambda` to `floor` when it exceeds it.
fn clamp_lambda(lambda: f64, floor: f64) -> (f64, bool) {
    if lambda > floor {
        (floor.max(0.0), true)
    } else {
        (lambda, false)
    }
}

fn run_trial(config: &ExperimentConfig, cell: &Cell, rng: &mut TrialRng) -> Result<TrialOutcome> {
    let spec = &config.instance;
    let algorithm = config.algorithm();
    let kind = config.grid.error;
    let outcome = match config.problem {
        Problem::Secretary => {
            let inst = random_secretary(spec.n, &spec.weights, rng);
            let opt = secretary_opt(&inst).0;
            let order = sample_arrival_order(inst.len(), rng);
            let preds = ErrorModel::new(kind, cell.eta * opt, rng.random()).apply(&[opt])?;
            let p_star = preds.values[0];
            let (lambda, clamped) = clamp_lambda(cell.lambda * opt, p_star);
            let picked = match algorithm {
                Algorithm::Classical => classical_secretary(&inst, &order, 1.0 / E)?,
                Algorithm::Naive => naive_randomized(&inst, &order, config.grid.gamma, p_star, lambda, rng)?,
                _ => algorithm1(&inst, &order, &SecretaryParams::new(cell.c, lambda, p_star)?),
            };
            if let Some(id) = picked.selected {
                if inst.value(id) != picked.value {
                    return Err(Error::Validation(format!("selected value differs from element {id}")));
                }
            }
            TrialOutcome {
                ratio: ratio(picked.value, opt),
                clamped: clamped && algorithm != Algorithm::Classical,
            }
        }
        Problem::Bipartite => {
            let (n, m) = (spec.n, spec.right_count());
            let mut inst = if spec.density >= 1.0 {
                complete_bipartite(n, m, &spec.weights, rng)
            } else {
                random_bipartite(n, m, spec.density, &spec.weights, rng)
            };
            if spec.augment {
                inst = inst.augment_perfect();
            }
            let all: Vec<usize> = (0..n).collect();
            let psi = max_weight_matching(&inst, &all);
            let opt = psi.total_weight;
            let order = sample_arrival_order(n, rng);
            let (state, clamped) = if algorithm == Algorithm::Kesselheim {
                (kesselheim_baseline(&inst, &order, cell.c, cell.d)?, false)
            } else {
                let card = psi.pairs.iter().filter(|&&(_, r)| !inst.is_dummy(r)).count();
                let scale = if card > 0 { opt / card as f64 } else { 0.0 };
                let preds = ErrorModel::new(kind, cell.eta * scale, rng.random()).apply(&bipartite_targets(&inst, &psi))?;
                let (lambda, clamped) = clamp_lambda(cell.lambda * scale, preds.min_value());
                let params = BipartiteParams::new(cell.c, cell.d, lambda, preds)?;
                (algorithm3(&inst, &order, &params)?, clamped)
            };
            state.matching.validate(&inst)?;
            TrialOutcome {
                ratio: ratio(state.matching.total_weight, opt),
                clamped,
            }
        }
        Problem::Graphic => {
            let graph = connected_random_graph(spec.n, spec.density, &spec.weights, rng);
            let opt = max_weight_forest(&graph).total_weight;
            let order = sample_arrival_order(graph.edge_count(), rng);
            let (selection, clamped) = if algorithm == Algorithm::Algorithm4 {
                (algorithm4(&graph, &order, cell.c)?, false)
            } else {
                let scale = opt / graph.vertex_count() as f64;
                let preds = ErrorModel::new(kind, cell.eta * scale, rng.random()).apply(&graphic_targets(&graph))?;
                let (lambda, clamped) = clamp_lambda(cell.lambda * scale, preds.min_value());
                let params = GraphicParams::new(cell.c, cell.d, lambda, preds)?;
                (algorithm5(&graph, &order, &params)?, clamped)
            };
            selection.validate(&graph)?;
            TrialOutcome {
                ratio: ratio(selection.total_weight, opt),
                clamped,
            }
        }
        Problem::Truthful => {
            let inst = random_unit_demand(spec.n, spec.right_count(), spec.max_value, spec.preference, rng);
            let all: Vec<usize> = (0..inst.agent_count()).collect();
            let psi = max_weight_matching(&inst.bipartite(inst.values()), &all);
            let opt = psi.total_weight;
            let scale = if psi.pairs.is_empty() { 0.0 } else { opt / psi.pairs.len() as f64 };
            let exact: Vec<f64> = inst.exact_predictions().iter().map(|&p| p as f64).collect();
            let noisy = ErrorModel::new(kind, cell.eta * scale, rng.random()).apply(&exact)?;
            let predictions: Vec<u64> = noisy.values.iter().map(|p| p.round() as u64).collect();
            let floor = predictions.iter().copied().min().unwrap_or(0);
            let wanted = (cell.lambda * scale).floor() as u64;
            let lambda = wanted.min(floor);
            let params = TruthfulParams::new(cell.c, cell.d, lambda, predictions)?;
            let order = sample_arrival_order(inst.agent_count(), rng);
            let outcome = run_mechanism(&inst, inst.values(), &order, &params)?;
            outcome.validate(&inst, inst.values())?;
            TrialOutcome {
                ratio: ratio(outcome.welfare(&inst) as f64, opt),
                clamped: wanted > floor,
            }
        }
    };
    if !(0.0..=RATIO_CEILING).contains(&outcome.ratio) {
        return Err(Error::Validation(format!(
            "trial ratio {} outside [0, {RATIO_CEILING}] in cell {}",
            outcome.ratio, cell.index
        )));
    }
    Ok(outcome)
}

fn run_cell(config: &ExperimentConfig, cell: &Cell) -> Result<TrialBatch> {
    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|trial| run_trial(config, cell, &mut trial_rng(config.seed, cell.index as u64, trial)))
        .collect::<Result<_>>()?;
    // Sequential fold in trial order keeps the result independent of scheduling.
    let stats: MeanEstimate = outcomes.iter().map(|o| o.ratio).collect();
    Ok(TrialBatch {
        problem: config.problem,
        algorithm: config.algorithm(),
        n: config.instance.n,
        cell: *cell,
        trials: config.trials,
        mean_ratio: stats.mean(),
        std_dev: stats.std_dev(),
        stderr: stats.std_err(),
        bound: cell_bound(config.algorithm(), cell, config.grid.gamma)?,
        seed: config.seed,
        clamped_trials: outcomes.iter().filter(|o| o.clamped).count() as u64,
    })
}

fn run_cells(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut result = ExperimentResult::default();
    for cell in config.cells() {
        match cell.infeasibility(config.algorithm()) {
            Some(reason) => result.skipped.push(SkippedCell { cell, reason }),
            None => result.batches.push(run_cell(config, &cell)?),
        }
    }
    Ok(result)
}

/// Runs every feasible cell of the grid. Output depends only on the config,
/// not on the number of worker threads.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_cells(config)),
        None => run_cells(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::ErrorKind;

    fn small(problem: Problem, algorithm: Algorithm) -> ExperimentConfig {
        let mut config = ExperimentConfig::new(problem);
        config.algorithm = Some(algorithm);
        config.trials = 40;
        config.seed = 5;
        config.instance.n = match problem {
            Problem::Truthful => 5,
            Problem::Graphic => 8,
            _ => 12,
        };
        config.instance.density = if problem == Problem::Graphic { 0.5 } else { 1.0 };
        config.grid.c = vec![4.0];
        config.grid.d = vec![2.0];
        config
    }

    #[test]
    fn every_algorithm_runs_within_ratio_bounds() {
        for algorithm in Algorithm::ALL {
            let config = small(algorithm.problem(), algorithm);
            let result = run_experiment(&config).unwrap();
            assert!(result.skipped.is_empty(), "{algorithm}");
            let batch = &result.batches[0];
            assert!(batch.mean_ratio > 0.0 && batch.mean_ratio <= RATIO_CEILING, "{algorithm}: {batch:?}");
            assert!((batch.stderr - batch.std_dev / (batch.trials as f64).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut config = small(Problem::Bipartite, Algorithm::Algorithm3);
        config.grid.lambda = vec![0.0, 0.1];
        config.grid.error = ErrorKind::UniformNoise;
        config.grid.eta = vec![0.0, 0.05];
        let csv_for = |threads| {
            let mut config = config.clone();
            config.threads = Some(threads);
            let mut out = Vec::new();
            emit_csv(&run_experiment(&config).unwrap().batches, &mut out).unwrap();
            out
        };
        let one = csv_for(1);
        assert_eq!(one, csv_for(3));
        assert_eq!(one, csv_for(1));
    }

    #[test]
    fn infeasible_cells_are_skipped() {
        let mut config = small(Problem::Graphic, Algorithm::Algorithm5);
        config.grid.d = vec![1.0, 4.0];
        let result = run_experiment(&config).unwrap();
        assert_eq!(result.batches.len(), 1);
        assert_eq!(result.skipped.len(), 1);
        assert_eq!(result.skipped[0].cell.d, 4.0);
        assert!(result.skipped[0].reason.contains("c > d"));
    }

    #[test]
    fn single_trial_is_reproducible() {
        let mut config = small(Problem::Secretary, Algorithm::Algorithm1);
        config.trials = 1;
        let a = run_experiment(&config).unwrap();
        assert_eq!(a, run_experiment(&config).unwrap());
        config.seed += 1;
        assert_ne!(a, run_experiment(&config).unwrap());
    }

    #[test]
    fn exact_predictions_have_zero_declared_error() {
        let mut rng = trial_rng(3, 0, 0);
        let graph = connected_random_graph(6, 0.7, &Default::default(), &mut rng);
        let preds = ErrorModel::new(ErrorKind::Exact, 0.0, 1).apply(&graphic_targets(&graph)).unwrap();
        assert_eq!(preds.declared_eta, 0.0);
    }

    #[test]
    fn bounds_match_g_functions() {
        let cell = Cell { index: 0, c: 20.0, d: 10.0, lambda: 0.02, eta: 0.0 };
        assert_eq!(cell_bound(Algorithm::Algorithm3, &cell, 0.5).unwrap(), 9.0 / 40.0 * 0.98);
        let worst = Cell { eta: 0.05, ..cell };
        assert_eq!(cell_bound(Algorithm::Algorithm3, &worst, 0.5).unwrap(), 2f64.ln() / 20.0);
        assert_eq!(cell_bound(Algorithm::Algorithm5, &worst, 0.5).unwrap(), 9.0 / 400.0);
        let k = Cell { c: E, d: 1.0, ..cell };
        assert!((cell_bound(Algorithm::Kesselheim, &k, 0.5).unwrap() - 1.0 / E).abs() < 1e-15);
    }
}

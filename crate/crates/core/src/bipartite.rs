//! Online bipartite matching with left nodes arriving in random order: the
//! two-phase baseline without predictions, threshold greedy, the
//! three-phase prediction algorithm, a reduction to vertex-weighted
//! matching and Monte-Carlo helpers for the phase analysis.

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{sample_arrival_order, ArrivalOrder, BipartiteInstance, PredictionVector};
use crate::oracles::{IncrementalAssignment, Matching};
use crate::stats::Frequency;

/// Largest left side for exhaustive order enumeration.
pub const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteParams {
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
    /// One prediction per original right node.
    pub predictions: PredictionVector,
}

impl BipartiteParams {
    /// Requires `c > d >= 1` and `0 <= lambda <= min_r p*_r`.
    pub fn new(c: f64, d: f64, lambda: f64, predictions: PredictionVector) -> Result<Self> {
        check_phases(c, d, true)?;
        let floor = predictions.min_value();
        if !lambda.is_finite() || lambda < 0.0 || lambda > floor {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} must lie in [0, min p* = {floor}]"
            )));
        }
        Ok(BipartiteParams {
            c,
            d,
            lambda,
            predictions,
        })
    }

    /// `p*_r - lambda` for original right nodes, `+inf` for dummies.
    pub fn thresholds(&self, instance: &BipartiteInstance) -> Result<Vec<f64>> {
        if self.predictions.values.len() != instance.original_right_count() {
            return Err(Error::Validation(format!(
                "{} predictions for {} right nodes",
                self.predictions.values.len(),
                instance.original_right_count()
            )));
        }
        Ok((0..instance.right_count())
            .map(|r| {
                if instance.is_dummy(r) {
                    f64::INFINITY
                } else {
                    self.predictions.values[r] - self.lambda
                }
            })
            .collect())
    }
}

pub(crate) fn check_phases(c: f64, d: f64, strict: bool) -> Result<()> {
    let ordered = if strict { c > d } else { c >= d };
    if !(c.is_finite() && d.is_finite() && d >= 1.0 && ordered) {
        let relation = if strict { ">" } else { ">=" };
        return Err(Error::InvalidParameter(format!(
            "need c {relation} d >= 1, got c = {c}, d = {d}"
        )));
    }
    Ok(())
}

/// `(floor(count/c), floor(count/d))`: arrivals before Phase II and before Phase III.
pub fn phase_boundaries(count: usize, c: f64, d: f64) -> (usize, usize) {
    let cut = |x: f64| ((count as f64 / x).floor() as usize).min(count);
    (cut(c), cut(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchPhase {
    Two,
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commit {
    pub left: usize,
    pub right: usize,
    pub weight: f64,
    pub phase: MatchPhase,
}

/// The committed online matching; it only ever grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineMatchState {
    pub matching: Matching,
    /// Commits in the order they were made.
    pub commits: Vec<Commit>,
    right_used: Vec<bool>,
}

impl OnlineMatchState {
    pub fn new(right_count: usize) -> Self {
        OnlineMatchState {
            matching: Matching::default(),
            commits: Vec::new(),
            right_used: vec![false; right_count],
        }
    }

    pub fn is_right_free(&self, r: usize) -> bool {
        !self.right_used[r]
    }

    fn commit(&mut self, left: usize, right: usize, weight: f64, phase: MatchPhase) {
        debug_assert!(!self.right_used[right]);
        self.right_used[right] = true;
        self.matching.pairs.push((left, right));
        self.matching.total_weight += weight;
        self.commits.push(Commit {
            left,
            right,
            weight,
            phase,
        });
    }

    /// Whether right node `r` was taken during `phase`.
    pub fn matched_in_phase(&self, r: usize, phase: MatchPhase) -> bool {
        self.commits.iter().any(|c| c.right == r && c.phase == phase)
    }
}

/// Phases I and II shared by the baseline and the prediction algorithm.
///
/// The optimal matching on the arrived nodes is maintained incrementally,
/// rows entering in arrival order.
fn observe_then_commit(instance: &BipartiteInstance, order: &[usize], k1: usize, k2: usize, state: &mut OnlineMatchState) {
    let mut solver = IncrementalAssignment::new(instance.right_count());
    for (pos, &l) in order[..k2].iter().enumerate() {
        solver.add_row(instance.neighbors(l).to_vec());
        if pos < k1 {
            continue;
        }
        if let Some((r, w)) = newcomer_edge(instance, l, solver.assigned(pos)) {
            if state.is_right_free(r) {
                state.commit(l, r, w, MatchPhase::Two);
            }
        }
    }
}

/// The edge of `l` in the current optimum. The solver may leave `l` on its
/// own zero-weight slot; on augmented instances that is the same as the
/// private dummy edge, which is returned instead.
fn newcomer_edge(instance: &BipartiteInstance, l: usize, assigned: Option<usize>) -> Option<(usize, f64)> {
    match assigned {
        Some(r) => Some((r, instance.weight(l, r).expect("solver only uses instance edges"))),
        None if instance.is_augmented() => Some((instance.original_right_count() + l, 0.0)),
        None => None,
    }
}

fn check_order(instance: &BipartiteInstance, order: &ArrivalOrder) -> Result<()> {
    if order.len() != instance.left_count() {
        return Err(Error::Validation(format!(
            "order over {} nodes for {} left nodes",
            order.len(),
            instance.left_count()
        )));
    }
    Ok(())
}

/// Two-phase algorithm without predictions: observe the first `floor(n/c)`
/// arrivals, then up to `floor(n/d)` commit the newcomer's edge in the
/// optimum of the arrived subgraph whenever its right node is still free.
pub fn kesselheim_baseline(instance: &BipartiteInstance, order: &ArrivalOrder, c: f64, d: f64) -> Result<OnlineMatchState> {
    check_phases(c, d, false)?;
    check_order(instance, order)?;
    let (k1, k2) = phase_boundaries(order.len(), c, d);
    let mut state = OnlineMatchState::new(instance.right_count());
    observe_then_commit(instance, order.as_slice(), k1, k2, &mut state);
    Ok(state)
}

/// Heaviest free neighbor of `l` whose weight reaches its threshold; ties go
/// to the smaller right id.
fn greedy_choice(instance: &BipartiteInstance, l: usize, thresholds: &[f64], state: &OnlineMatchState) -> Option<(usize, f64)> {
    instance
        .neighbors(l)
        .iter()
        .filter(|&&(r, w)| state.is_right_free(r) && w >= thresholds[r])
        .fold(None, |best: Option<(usize, f64)>, &(r, w)| match best {
            Some((_, bw)) if bw >= w => best,
            _ => Some((r, w)),
        })
}

/// Threshold greedy over `left_sequence` with one threshold per right node.
pub fn threshold_greedy(instance: &BipartiteInstance, left_sequence: &[usize], thresholds: &[f64]) -> Matching {
    assert_eq!(thresholds.len(), instance.right_count(), "one threshold per right node");
    let mut state = OnlineMatchState::new(instance.right_count());
    for &l in left_sequence {
        if let Some((r, w)) = greedy_choice(instance, l, thresholds, &state) {
            state.commit(l, r, w, MatchPhase::Three);
        }
    }
    state.matching
}

/// Three-phase prediction algorithm: the baseline's Phases I and II up to
/// `floor(n/d)`, then threshold greedy with thresholds `p*_r - lambda` on the
/// remaining arrivals.
pub fn algorithm3(instance: &BipartiteInstance, order: &ArrivalOrder, params: &BipartiteParams) -> Result<OnlineMatchState> {
    check_order(instance, order)?;
    let thresholds = params.thresholds(instance)?;
    let (k1, k2) = phase_boundaries(order.len(), params.c, params.d);
    let mut state = OnlineMatchState::new(instance.right_count());
    observe_then_commit(instance, order.as_slice(), k1, k2, &mut state);
    for &l in &order.as_slice()[k2..] {
        if let Some((r, w)) = greedy_choice(instance, l, &thresholds, &state) {
            state.commit(l, r, w, MatchPhase::Three);
        }
    }
    Ok(state)
}

/// Competitive ratio `g_{c,d,lambda}(eta)` of [`algorithm3`];
/// `psi_cardinality` is the size of the optimal matching the predictions
/// refer to.
pub fn g_bipartite(eta: f64, c: f64, d: f64, lambda: f64, opt: f64, psi_cardinality: usize) -> f64 {
    let worst = (c / d).ln() / c;
    if eta >= lambda {
        return worst;
    }
    let inner = if opt > 0.0 {
        (1.0 - (lambda + eta) * psi_cardinality as f64 / opt).max(0.0)
    } else {
        0.0
    };
    worst.max((d - 1.0) / (2.0 * c) * inner)
}

/// An online algorithm for vertex-weighted matching: every edge into right
/// node `r` is worth `vertex_weights[r]`.
pub trait VertexWeightedAlgorithm {
    fn run(&self, instance: &BipartiteInstance, vertex_weights: &[f64], order: &ArrivalOrder) -> Matching;
}

/// Matches each arrival to its free neighbor of largest vertex weight
/// (smaller id on ties).
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyVertexWeighted;

impl VertexWeightedAlgorithm for GreedyVertexWeighted {
    fn run(&self, instance: &BipartiteInstance, vertex_weights: &[f64], order: &ArrivalOrder) -> Matching {
        let mut used = vec![false; instance.right_count()];
        let mut matching = Matching::default();
        for l in order.iter() {
            let choice = instance
                .neighbors(l)
                .iter()
                .map(|&(r, _)| r)
                .filter(|&r| !used[r])
                .fold(None, |best: Option<usize>, r| match best {
                    Some(b) if vertex_weights[b] >= vertex_weights[r] => best,
                    _ => Some(r),
                });
            if let Some(r) = choice {
                used[r] = true;
                matching.pairs.push((l, r));
                matching.total_weight += vertex_weights[r];
            }
        }
        matching
    }
}

/// Result of the vertex-weighted reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatching {
    /// The selected pairs with their true weights.
    pub matching: Matching,
    /// Weight as seen by the plug-in, i.e. the sum of `p*_r`.
    pub assumed_weight: f64,
}

/// Keeps the edges `(l, r)` with `w(l, r)` in `[p*_r - lambda, p*_r + lambda]`,
/// reweighted to `p*_r`. Dummy right nodes carry no prediction and drop out.
pub fn band_instance(instance: &BipartiteInstance, predictions: &PredictionVector, lambda: f64) -> Result<BipartiteInstance> {
    if predictions.values.len() != instance.original_right_count() {
        return Err(Error::Validation("one prediction per original right node required".into()));
    }
    let edges: Vec<(usize, usize, f64)> = instance
        .edges()
        .filter(|&(_, r, w)| !instance.is_dummy(r) && (w - predictions.values[r]).abs() <= lambda)
        .map(|(l, r, _)| (l, r, predictions.values[r]))
        .collect();
    BipartiteInstance::new(instance.left_count(), instance.original_right_count(), &edges)
}

/// Runs a vertex-weighted algorithm on the in-band edges and reports the
/// true weight of what it picked.
pub fn reduce_to_vertex_weighted(
    instance: &BipartiteInstance,
    predictions: &PredictionVector,
    lambda: f64,
    order: &ArrivalOrder,
    plug_in: &dyn VertexWeightedAlgorithm,
) -> Result<ReducedMatching> {
    check_order(instance, order)?;
    let band = band_instance(instance, predictions, lambda)?;
    let picked = plug_in.run(&band, &predictions.values, order);
    let mut matching = Matching::default();
    let mut assumed = 0.0;
    for &(l, r) in &picked.pairs {
        if band.weight(l, r).is_none() {
            return Err(Error::Validation(format!("plug-in used out-of-band edge ({l}, {r})")));
        }
        matching.pairs.push((l, r));
        matching.total_weight += instance.weight(l, r).expect("band edges come from the instance");
        assumed += predictions.values[r];
    }
    matching.validate(instance)?;
    Ok(ReducedMatching {
        matching,
        assumed_weight: assumed,
    })
}

/// Whether `r` stays unmatched through Phase II of the baseline on `order`.
pub fn unmatched_after_phase_two(instance: &BipartiteInstance, order: &ArrivalOrder, r: usize, c: f64, d: f64) -> Result<bool> {
    Ok(!kesselheim_baseline(instance, order, c, d)?.matched_in_phase(r, MatchPhase::Two))
}

/// Monte-Carlo frequency of right node `r` staying unmatched in Phase II.
pub fn phase2_unmatched_probability<R: Rng + ?Sized>(
    instance: &BipartiteInstance,
    r: usize,
    c: f64,
    d: f64,
    trials: u64,
    rng: &mut R,
) -> Result<Frequency> {
    let mut freq = Frequency::default();
    for _ in 0..trials {
        let order = sample_arrival_order(instance.left_count(), rng);
        freq.record(unmatched_after_phase_two(instance, &order, r, c, d)?);
    }
    Ok(freq)
}

/// Exact frequency over all arrival orders (left side at most [`EXACT_LIMIT`]).
pub fn phase2_unmatched_exact(instance: &BipartiteInstance, r: usize, c: f64, d: f64) -> Result<Frequency> {
    let n = instance.left_count();
    if n > EXACT_LIMIT {
        return Err(Error::TooLarge { n, limit: EXACT_LIMIT });
    }
    let mut freq = Frequency::default();
    for perm in (0..n).permutations(n) {
        freq.record(unmatched_after_phase_two(instance, &ArrivalOrder::new(perm)?, r, c, d)?);
    }
    Ok(freq)
}

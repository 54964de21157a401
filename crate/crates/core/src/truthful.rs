//! Truthful online mechanism for single-value unit-demand agents: agents
//! arrive in random order, each with one private value for any item in its
//! preferred set, and report a value. The mechanism allocates at most one
//! item per agent and charges a price.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{check_phases, phase_boundaries};
use crate::error::{Error, Result};
use crate::instances::{ArrivalOrder, BipartiteInstance};
use crate::oracles::{critical_value, lex_max_matching, max_weight_matching, CriticalValue};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDemandInstance {
    values: Vec<u64>,
    preferred: Vec<Vec<usize>>,
    item_count: usize,
}

impl UnitDemandInstance {
    /// Preferred sets are sorted and deduplicated; empty sets are allowed.
    pub fn new(values: Vec<u64>, mut preferred: Vec<Vec<usize>>, item_count: usize) -> Result<Self> {
        if values.len() != preferred.len() {
            return Err(Error::Validation(format!(
                "{} values for {} preferred sets",
                values.len(),
                preferred.len()
            )));
        }
        for (i, set) in preferred.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if let Some(&r) = set.iter().find(|&&r| r >= item_count) {
                return Err(Error::Validation(format!("agent {i} prefers unknown item {r}")));
            }
        }
        Ok(UnitDemandInstance {
            values,
            preferred,
            item_count,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.values.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn value(&self, agent: usize) -> u64 {
        self.values[agent]
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn preferred(&self, agent: usize) -> &[usize] {
        &self.preferred[agent]
    }

    pub fn max_value(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// Bipartite encoding: edge `(i, r)` for `r` in `R_i` with weight `reports[i]`.
    pub fn bipartite(&self, reports: &[u64]) -> BipartiteInstance {
        let edges: Vec<(usize, usize, f64)> = self
            .preferred
            .iter()
            .enumerate()
            .flat_map(|(i, set)| set.iter().map(move |&r| (i, r, reports[i] as f64)))
            .collect();
        BipartiteInstance::new(self.values.len(), self.item_count, &edges).expect("reports are finite")
    }

    /// Optimal welfare under true values.
    pub fn optimal_welfare(&self) -> u64 {
        let all: Vec<usize> = (0..self.agent_count()).collect();
        max_weight_matching(&self.bipartite(&self.values), &all).total_weight.round() as u64
    }

    /// Per-item weight of its partner in an optimal matching (0 if unmatched).
    pub fn exact_predictions(&self) -> Vec<u64> {
        let all: Vec<usize> = (0..self.agent_count()).collect();
        let m = max_weight_matching(&self.bipartite(&self.values), &all);
        let mut p = vec![0; self.item_count];
        for &(l, r) in &m.pairs {
            p[r] = self.values[l];
        }
        p
    }
}

/// Each agent gets a value in `0..=max_value` and prefers each item
/// independently with probability `preference`.
pub fn random_unit_demand<R: Rng + ?Sized>(
    agents: usize,
    items: usize,
    max_value: u64,
    preference: f64,
    rng: &mut R,
) -> UnitDemandInstance {
    let values = (0..agents).map(|_| rng.random_range(0..=max_value)).collect();
    let preferred = (0..agents)
        .map(|_| (0..items).filter(|_| rng.random::<f64>() < preference).collect())
        .collect();
    UnitDemandInstance::new(values, preferred, items).expect("generated items are in range")
}

/// Converts reports to integers, rejecting negative or fractional values.
pub fn integer_reports(reports: &[f64]) -> Result<Vec<u64>> {
    reports
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if x.is_finite() && x >= 0.0 && x.fract() == 0.0 {
                Ok(x as u64)
            } else {
                Err(Error::Validation(format!("report {x} of agent {i} is not a nonnegative integer")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthfulParams {
    pub c: f64,
    pub d: f64,
    pub lambda: u64,
    /// Integer prediction per item.
    pub predictions: Vec<u64>,
}

impl TruthfulParams {
    /// Requires `c > d >= 1` and `lambda <= min_r p*_r`, so every posted
    /// price `p*_r - lambda` is a nonnegative integer.
    pub fn new(c: f64, d: f64, lambda: u64, predictions: Vec<u64>) -> Result<Self> {
        check_phases(c, d, true)?;
        if let Some(&floor) = predictions.iter().min() {
            if lambda > floor {
                return Err(Error::InvalidParameter(format!(
                    "lambda = {lambda} exceeds min p* = {floor}"
                )));
            }
        }
        Ok(TruthfulParams {
            c,
            d,
            lambda,
            predictions,
        })
    }

    pub fn posted_price(&self, item: usize) -> u64 {
        self.predictions[item] - self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MechanismPhase {
    One,
    Two,
    Three,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MechanismOutcome {
    pub allocation: Vec<Option<usize>>,
    pub prices: Vec<u64>,
    /// Phase in which each agent arrived (`None` before arrival).
    pub phases: Vec<Option<MechanismPhase>>,
}

impl MechanismOutcome {
    fn new(agents: usize) -> Self {
        MechanismOutcome {
            allocation: vec![None; agents],
            prices: vec![0; agents],
            phases: vec![None; agents],
        }
    }

    /// True values of allocated agents.
    pub fn welfare(&self, instance: &UnitDemandInstance) -> u64 {
        self.allocation
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_some())
            .map(|(i, _)| instance.value(i))
            .sum()
    }

    pub fn revenue(&self) -> u64 {
        self.prices.iter().sum()
    }

    /// Checks that items are used once and only preferred items are given,
    /// prices are zero for unallocated agents and at most the report otherwise.
    pub fn validate(&self, instance: &UnitDemandInstance, reports: &[u64]) -> Result<()> {
        let mut taken = vec![false; instance.item_count()];
        for (i, a) in self.allocation.iter().enumerate() {
            match *a {
                Some(r) => {
                    if !instance.preferred(i).contains(&r) {
                        return Err(Error::Validation(format!("agent {i} got non-preferred item {r}")));
                    }
                    if std::mem::replace(&mut taken[r], true) {
                        return Err(Error::Validation(format!("item {r} allocated twice")));
                    }
                    if self.prices[i] > reports[i] {
                        return Err(Error::Validation(format!(
                            "agent {i} pays {} above its report {}",
                            self.prices[i], reports[i]
                        )));
                    }
                }
                None if self.prices[i] != 0 => {
                    return Err(Error::Validation(format!("unallocated agent {i} pays {}", self.prices[i])));
                }
                None => {}
            }
        }
        Ok(())
    }
}

/// `v_i [allocated] - rho_i`, signed.
pub fn utility(instance: &UnitDemandInstance, agent: usize, outcome: &MechanismOutcome) -> i64 {
    let gain = if outcome.allocation[agent].is_some() {
        instance.value(agent) as i64
    } else {
        0
    };
    gain - outcome.prices[agent] as i64
}

/// Mechanism state between arrivals.
#[derive(Debug, Clone)]
pub struct MechanismState {
    pub outcome: MechanismOutcome,
    arrived: Vec<usize>,
    item_taken: Vec<bool>,
}

/// Result of one arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepResult {
    pub item: Option<usize>,
    pub price: u64,
    pub phase: MechanismPhase,
}

/// Stepwise mechanism for a fixed instance, parameters and agent count.
pub struct Mechanism<'a> {
    instance: &'a UnitDemandInstance,
    params: &'a TruthfulParams,
    k1: usize,
    k2: usize,
}

impl<'a> Mechanism<'a> {
    pub fn new(instance: &'a UnitDemandInstance, params: &'a TruthfulParams) -> Result<Self> {
        if params.predictions.len() != instance.item_count() {
            return Err(Error::Validation(format!(
                "{} predictions for {} items",
                params.predictions.len(),
                instance.item_count()
            )));
        }
        let (k1, k2) = phase_boundaries(instance.agent_count(), params.c, params.d);
        Ok(Mechanism {
            instance,
            params,
            k1,
            k2,
        })
    }

    pub fn start(&self) -> MechanismState {
        MechanismState {
            outcome: MechanismOutcome::new(self.instance.agent_count()),
            arrived: Vec::new(),
            item_taken: vec![false; self.instance.item_count()],
        }
    }

    pub fn phase_at(&self, position: usize) -> MechanismPhase {
        if position < self.k1 {
            MechanismPhase::One
        } else if position < self.k2 {
            MechanismPhase::Two
        } else {
            MechanismPhase::Three
        }
    }

    /// Phase II price of `agent` on the arrived sub-instance; it ignores
    /// the agent's own report.
    pub fn phase_two_price(&self, state: &MechanismState, agent: usize, reports: &[u64]) -> Result<Option<CriticalValue>> {
        let mut subset = state.arrived.clone();
        subset.push(agent);
        critical_value(&self.instance.bipartite(reports), &subset, agent)
    }

    /// Processes the arrival of `agent` with the given reports.
    pub fn step(&self, state: &mut MechanismState, agent: usize, reports: &[u64]) -> Result<StepResult> {
        self.step_with(state, agent, reports, &mut None)
    }

    /// As [`Mechanism::step`], reusing a cached Phase II price for this
    /// state and agent.
    fn step_with(
        &self,
        state: &mut MechanismState,
        agent: usize,
        reports: &[u64],
        price_cache: &mut Option<Option<CriticalValue>>,
    ) -> Result<StepResult> {
        let phase = self.phase_at(state.arrived.len());
        let (mut item, mut price) = (None, 0);
        match phase {
            MechanismPhase::One => {}
            MechanismPhase::Two => {
                let mut subset = state.arrived.clone();
                subset.push(agent);
                let m = lex_max_matching(&self.instance.bipartite(reports), &subset);
                if let Some(r) = m.partner_of_left(agent) {
                    if !state.item_taken[r] {
                        let tau = match price_cache {
                            Some(cached) => *cached,
                            None => *price_cache.insert(self.phase_two_price(state, agent, reports)?),
                        };
                        let tau = tau.expect("a matched agent has a critical value");
                        item = Some(r);
                        price = tau.tau;
                    }
                }
            }
            MechanismPhase::Three => {
                // Cheapest affordable free item; smallest id among equal prices.
                item = self
                    .instance
                    .preferred(agent)
                    .iter()
                    .copied()
                    .filter(|&r| !state.item_taken[r] && reports[agent] >= self.params.posted_price(r))
                    .min_by_key(|&r| (self.params.posted_price(r), r));
                if let Some(r) = item {
                    price = self.params.posted_price(r);
                }
            }
        }
        if let Some(r) = item {
            state.item_taken[r] = true;
        }
        state.arrived.push(agent);
        state.outcome.allocation[agent] = item;
        state.outcome.prices[agent] = price;
        state.outcome.phases[agent] = Some(phase);
        Ok(StepResult { item, price, phase })
    }
}

fn check_reports(instance: &UnitDemandInstance, order: &ArrivalOrder, reports: &[u64]) -> Result<()> {
    if reports.len() != instance.agent_count() || order.len() != instance.agent_count() {
        return Err(Error::Validation(format!(
            "{} reports and {} arrivals for {} agents",
            reports.len(),
            order.len(),
            instance.agent_count()
        )));
    }
    Ok(())
}

/// Runs the mechanism over `order` with the given (integer) reports.
pub fn run_mechanism(
    instance: &UnitDemandInstance,
    reports: &[u64],
    order: &ArrivalOrder,
    params: &TruthfulParams,
) -> Result<MechanismOutcome> {
    check_reports(instance, order, reports)?;
    let mech = Mechanism::new(instance, params)?;
    let mut state = mech.start();
    for agent in order.iter() {
        mech.step(&mut state, agent, reports)?;
    }
    Ok(state.outcome)
}

/// A unilateral report that strictly raises the agent's utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub agent: usize,
    pub position: usize,
    pub report: u64,
    pub truthful_utility: i64,
    pub deviating_utility: i64,
}

/// Allocation over increasing reports that is not a step to a fixed item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub agent: usize,
    pub position: usize,
    pub report: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
    /// Agent arrivals audited.
    pub arrivals: u64,
    /// Deviating reports evaluated.
    pub deviations: u64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.monotonicity_violations.is_empty()
    }

    pub fn merge(&mut self, other: AuditReport) {
        self.violations.extend(other.violations);
        self.monotonicity_violations.extend(other.monotonicity_violations);
        self.arrivals += other.arrivals;
        self.deviations += other.deviations;
    }
}

/// Audits every agent of `order` against every report in
/// `0..=max_value + margin`, others reporting truthfully.
///
/// Earlier arrivals do not see an agent's report, so each deviation only
/// replays that agent's own arrival from the truthful prefix state.
pub fn audit_truthfulness(
    instance: &UnitDemandInstance,
    order: &ArrivalOrder,
    params: &TruthfulParams,
    margin: u64,
) -> Result<AuditReport> {
    let truthful = instance.values().to_vec();
    check_reports(instance, order, &truthful)?;
    let mech = Mechanism::new(instance, params)?;
    let top = instance.max_value() + margin;
    let mut report = AuditReport::default();
    let mut state = mech.start();
    let mut reports = truthful.clone();
    for (position, agent) in order.iter().enumerate() {
        let mut cache = None;
        let mut sweep = Vec::with_capacity(top as usize + 1);
        // Item at the lowest allocating report; every higher report must
        // receive the same item.
        let mut step_item = None;
        for x in 0..=top {
            reports[agent] = x;
            let mut trial = state.clone();
            let step = mech.step_with(&mut trial, agent, &reports, &mut cache)?;
            sweep.push(utility(instance, agent, &trial.outcome));
            report.deviations += 1;
            match (step_item, step.item) {
                (None, Some(r)) => step_item = Some(r),
                (Some(r), item) if item != Some(r) => report.monotonicity_violations.push(MonotonicityViolation {
                    agent,
                    position,
                    report: x,
                }),
                _ => {}
            }
        }
        reports[agent] = truthful[agent];
        let honest = sweep[truthful[agent] as usize];
        for (x, &u) in sweep.iter().enumerate() {
            if u > honest {
                report.violations.push(Violation {
                    agent,
                    position,
                    report: x as u64,
                    truthful_utility: honest,
                    deviating_utility: u,
                });
            }
        }
        mech.step_with(&mut state, agent, &reports, &mut cache)?;
        report.arrivals += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::sample_arrival_order;
    use crate::rng::trial_rng;
    use itertools::Itertools;

    fn single_item(values: Vec<u64>) -> UnitDemandInstance {
        let n = values.len();
        UnitDemandInstance::new(values, vec![vec![0]; n], 1).unwrap()
    }

    /// Smallest report in `0..=limit` at which `agent` is matched by the
    /// lexicographic optimum on `subset`, scanning upward.
    fn scanned_critical_value(instance: &UnitDemandInstance, reports: &[u64], subset: &[usize], agent: usize, limit: u64) -> Option<u64> {
        let mut probe = reports.to_vec();
        (0..=limit).find(|&x| {
            probe[agent] = x;
            lex_max_matching(&instance.bipartite(&probe), subset).partner_of_left(agent).is_some()
        })
    }

    #[test]
    fn utility_examples() {
        let inst = UnitDemandInstance::new(vec![5, 4], vec![vec![0], vec![0, 1]], 2).unwrap();
        let mut outcome = MechanismOutcome::new(2);
        assert_eq!(utility(&inst, 0, &outcome), 0);
        outcome.allocation[0] = Some(0);
        outcome.prices[0] = 3;
        assert_eq!(utility(&inst, 0, &outcome), 2);
        outcome.allocation[1] = Some(1);
        outcome.prices[1] = 4;
        assert_eq!(utility(&inst, 1, &outcome), 0);
        outcome.validate(&inst, &[5, 4]).unwrap();
        assert!(outcome.validate(&inst, &[2, 4]).is_err());
    }

    #[test]
    fn two_agents_one_item_meet_in_phase_two() {
        let inst = single_item(vec![5, 3]);
        // Two agents, c = 3, d = 1: both arrive in Phase II.
        let params = TruthfulParams::new(3.0, 1.0, 0, vec![5]).unwrap();
        for perm in (0..2).permutations(2) {
            let order = ArrivalOrder::new(perm.clone()).unwrap();
            for a in 0..10 {
                for b in 0..10 {
                    let reports = [a, b];
                    let out = run_mechanism(&inst, &reports, &order, &params).unwrap();
                    out.validate(&inst, &reports).unwrap();
                    let (first, second) = (perm[0], perm[1]);
                    // The first arrival is alone and takes the item at
                    // critical value 0; the second finds it taken.
                    assert_eq!(out.allocation[first], Some(0));
                    assert_eq!(out.prices[first], scanned_critical_value(&inst, &reports, &[first], first, 9).unwrap());
                    assert_eq!(out.allocation[second], None);
                    assert_eq!(out.prices[second], 0);
                }
            }
        }
    }

    #[test]
    fn taken_item_blocks_later_phase_two_agents() {
        // Two items; agent 0 prefers only item 0, agent 1 prefers both.
        // Agent 1 arrives first alone and gets item 0, the smallest pair.
        let inst = UnitDemandInstance::new(vec![5, 3, 4], vec![vec![0], vec![0, 1], vec![0]], 2).unwrap();
        let params = TruthfulParams::new(4.0, 1.0, 0, vec![5, 3]).unwrap();
        let order = ArrivalOrder::new(vec![1, 0, 2]).unwrap();
        let out = run_mechanism(&inst, inst.values(), &order, &params).unwrap();
        out.validate(&inst, inst.values()).unwrap();
        assert_eq!(out.allocation[1], Some(0));
        assert_eq!(out.prices[1], 0);
        // Agent 0 arrives: the optimum gives item 0 to agent 0 and item 1 to
        // agent 1, but item 0 is taken.
        assert_eq!(out.allocation[0], None);
        assert_eq!(out.allocation[2], None);
    }

    #[test]
    fn phase_one_agents_get_nothing() {
        let inst = single_item(vec![9, 1, 1, 1]);
        let params = TruthfulParams::new(2.0, 1.5, 0, vec![9]).unwrap();
        let order = ArrivalOrder::identity(4);
        let out = run_mechanism(&inst, inst.values(), &order, &params).unwrap();
        assert_eq!(out.phases[0], Some(MechanismPhase::One));
        assert_eq!(out.phases[1], Some(MechanismPhase::One));
        assert_eq!((out.allocation[0], out.prices[0]), (None, 0));
    }

    #[test]
    fn phase_three_posted_prices() {
        // c = 3, d = 2 with three agents: one in Phase I, an empty Phase II,
        // the last two in Phase III.
        let inst = UnitDemandInstance::new(vec![1, 6, 6], vec![vec![0], vec![0, 1, 2], vec![1, 2]], 3).unwrap();
        let params = TruthfulParams::new(3.0, 2.0, 1, vec![8, 5, 5]).unwrap();
        let order = ArrivalOrder::identity(3);
        let out = run_mechanism(&inst, inst.values(), &order, &params).unwrap();
        assert_eq!(out.phases[1], Some(MechanismPhase::Three));
        // Prices are 7, 4, 4: the cheapest tie goes to item 1.
        assert_eq!((out.allocation[1], out.prices[1]), (Some(1), 4));
        assert_eq!((out.allocation[2], out.prices[2]), (Some(2), 4));
        let low = run_mechanism(&inst, &[1, 3, 3], &order, &params).unwrap();
        assert_eq!(low.allocation, vec![None; 3]);
        assert_eq!(low.revenue(), 0);
    }

    #[test]
    fn phase_two_prices_are_critical_values() {
        let mut rng = trial_rng(41, 0, 0);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=4);
            let inst = random_unit_demand(n, m, 12, 0.6, &mut rng);
            let params = TruthfulParams::new(4.0, 1.0, 0, vec![0; m]).unwrap();
            let order = sample_arrival_order(n, &mut rng);
            let mech = Mechanism::new(&inst, &params).unwrap();
            let mut state = mech.start();
            for agent in order.iter() {
                let before = state.arrived.clone();
                let step = mech.step(&mut state, agent, inst.values()).unwrap();
                if step.phase == MechanismPhase::Two && step.item.is_some() {
                    let mut subset = before;
                    subset.push(agent);
                    let limit = inst.values().iter().sum::<u64>() + 1;
                    assert_eq!(Some(step.price), scanned_critical_value(&inst, inst.values(), &subset, agent, limit));
                }
            }
            state.outcome.validate(&inst, inst.values()).unwrap();
            for i in 0..n {
                assert!(utility(&inst, i, &state.outcome) >= 0);
            }
        }
    }

    #[test]
    fn exhaustive_audit_small_corpus() {
        let mut rng = trial_rng(42, 0, 0);
        let mut arrivals = 0;
        for _ in 0..25 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=4);
            let inst = random_unit_demand(n, m, 10, 0.5, &mut rng);
            let predictions: Vec<u64> = (0..m).map(|_| rng.random_range(0..=10)).collect();
            let lambda = rng.random_range(0..=*predictions.iter().min().unwrap());
            let params = TruthfulParams::new(3.0, 1.5, lambda, predictions).unwrap();
            for perm in (0..n).permutations(n) {
                let report = audit_truthfulness(&inst, &ArrivalOrder::new(perm).unwrap(), &params, 3).unwrap();
                assert!(report.is_clean(), "{report:?} on {inst:?}");
                arrivals += report.arrivals;
            }
        }
        assert!(arrivals > 100);
    }

    #[test]
    fn exact_predictions_and_welfare() {
        let inst = UnitDemandInstance::new(vec![5, 3, 4], vec![vec![0], vec![0, 1], vec![1]], 2).unwrap();
        assert_eq!(inst.optimal_welfare(), 9);
        assert_eq!(inst.exact_predictions(), vec![5, 4]);
        let params = TruthfulParams::new(3.0, 1.5, 2, inst.exact_predictions()).unwrap();
        for perm in (0..3).permutations(3) {
            let out = run_mechanism(&inst, inst.values(), &ArrivalOrder::new(perm).unwrap(), &params).unwrap();
            assert!(out.welfare(&inst) <= inst.optimal_welfare());
        }
    }

    #[test]
    fn validation_errors() {
        assert!(integer_reports(&[1.0, 2.5]).is_err());
        assert!(integer_reports(&[-1.0]).is_err());
        assert_eq!(integer_reports(&[0.0, 7.0]).unwrap(), vec![0, 7]);
        assert!(TruthfulParams::new(2.0, 1.0, 3, vec![2, 5]).is_err());
        assert!(TruthfulParams::new(1.0, 1.0, 0, vec![2]).is_err());
        assert!(UnitDemandInstance::new(vec![1], vec![vec![3]], 2).is_err());
        let inst = single_item(vec![1, 2]);
        let params = TruthfulParams::new(2.0, 1.0, 0, vec![1, 1]).unwrap();
        assert!(run_mechanism(&inst, &[1, 2], &ArrivalOrder::identity(2), &params).is_err());
    }
}

//! Value-maximization secretary algorithms: the classical `1/e` rule, the
//! three-phase algorithm that exploits a prediction of the maximum, its
//! randomized-confidence and naive randomized variants, the matching
//! competitive-ratio bounds, and an exhaustive expected-value oracle.

use std::f64::consts::E;

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::instances::{ArrivalOrder, SecretaryInstance};
use crate::numerics::{f_of_c, phase_fractions, PhaseFractions};

/// Largest instance for [`exact_expected_value`] (8! orders).
pub const EXACT_LIMIT: usize = 8;

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Parameters of the prediction-based algorithm, with its phase fractions
/// precomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSecretaryParams", into = "RawSecretaryParams")]
pub struct SecretaryParams {
    c: f64,
    lambda: f64,
    p_star: f64,
    fractions: PhaseFractions,
    f: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSecretaryParams {
    c: f64,
    lambda: f64,
    p_star: f64,
}

impl TryFrom<RawSecretaryParams> for SecretaryParams {
    type Error = Error;

    fn try_from(raw: RawSecretaryParams) -> Result<Self> {
        SecretaryParams::new(raw.c, raw.lambda, raw.p_star)
    }
}

impl From<SecretaryParams> for RawSecretaryParams {
    fn from(p: SecretaryParams) -> Self {
        RawSecretaryParams {
            c: p.c,
            lambda: p.lambda,
            p_star: p.p_star,
        }
    }
}

impl SecretaryParams {
    /// Requires `c >= 1` and `0 <= lambda <= p_star`.
    pub fn new(c: f64, lambda: f64, p_star: f64) -> Result<Self> {
        if !p_star.is_finite() || p_star < 0.0 {
            return Err(Error::InvalidParameter(format!("prediction {p_star} must be >= 0")));
        }
        if !lambda.is_finite() || lambda < 0.0 || lambda > p_star {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} must lie in [0, {p_star}]"
            )));
        }
        let fractions = phase_fractions(c)?;
        Ok(SecretaryParams {
            c,
            lambda,
            p_star,
            fractions,
            f: fractions.high - fractions.low,
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn fractions(&self) -> PhaseFractions {
        self.fractions
    }

    /// Number of arrivals in the observation phase and in the first two phases.
    pub fn boundaries(&self, n: usize) -> (usize, usize) {
        let cut = |x: f64| ((x * n as f64).floor() as usize).min(n);
        (cut(self.fractions.low), cut(self.fractions.high))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionPhase {
    /// Selected against the prediction-based threshold.
    Two,
    /// Selected against the best element observed so far.
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub selected: Option<usize>,
    /// Value of the selected element, 0 when nothing is selected.
    pub value: f64,
    pub phase: Option<SelectionPhase>,
}

impl SelectionOutcome {
    pub const NONE: SelectionOutcome = SelectionOutcome {
        selected: None,
        value: 0.0,
        phase: None,
    };

    fn pick(instance: &SecretaryInstance, id: usize, phase: SelectionPhase) -> Self {
        SelectionOutcome {
            selected: Some(id),
            value: instance.value(id),
            phase: Some(phase),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Threshold {
    /// Nothing observed yet: every element clears it.
    Open,
    /// Beaten by elements ranking above this one under the id tie-break.
    Element(usize),
    /// Beaten by strictly larger values.
    Value(f64),
}

impl Threshold {
    fn cleared_by(self, instance: &SecretaryInstance, id: usize) -> bool {
        match self {
            Threshold::Open => true,
            Threshold::Element(best) => instance.beats(id, best),
            Threshold::Value(t) => instance.value(id) > t,
        }
    }

    fn best_of(instance: &SecretaryInstance, ids: &[usize]) -> Threshold {
        ids.iter()
            .copied()
            .reduce(|best, id| if instance.beats(id, best) { id } else { best })
            .map_or(Threshold::Open, Threshold::Element)
    }
}

fn first_clearing(
    instance: &SecretaryInstance,
    ids: &[usize],
    threshold: Threshold,
    phase: SelectionPhase,
) -> Option<SelectionOutcome> {
    ids.iter()
        .find(|&&id| threshold.cleared_by(instance, id))
        .map(|&id| SelectionOutcome::pick(instance, id, phase))
}

fn check_order(instance: &SecretaryInstance, order: &ArrivalOrder) {
    assert_eq!(instance.len(), order.len(), "order length must match the instance");
}

/// Observe the first `floor(sample_fraction * n)` arrivals, then select the
/// first element ranking above all of them.
pub fn classical_secretary(
    instance: &SecretaryInstance,
    order: &ArrivalOrder,
    sample_fraction: f64,
) -> Result<SelectionOutcome> {
    if !(0.0..1.0).contains(&sample_fraction) {
        return Err(Error::InvalidParameter(format!(
            "sample fraction {sample_fraction} must lie in [0, 1)"
        )));
    }
    check_order(instance, order);
    let ids = order.as_slice();
    let k = (sample_fraction * ids.len() as f64).floor() as usize;
    let threshold = Threshold::best_of(instance, &ids[..k]);
    Ok(first_clearing(instance, &ids[k..], threshold, SelectionPhase::Three).unwrap_or(SelectionOutcome::NONE))
}

/// The three-phase prediction algorithm.
///
/// Phase I records the best value `v'` among the first `floor(low * n)`
/// arrivals. Phase II, up to `floor(high * n)`, selects the first value
/// strictly above `max(v', p* - lambda)`. Phase III selects the first
/// element ranking above everything seen in Phases I and II.
pub fn algorithm1(instance: &SecretaryInstance, order: &ArrivalOrder, params: &SecretaryParams) -> SelectionOutcome {
    check_order(instance, order);
    let ids = order.as_slice();
    let (k1, k2) = params.boundaries(ids.len());
    let predicted = params.p_star - params.lambda;

    let threshold = match Threshold::best_of(instance, &ids[..k1]) {
        Threshold::Element(best) if instance.value(best) > predicted => Threshold::Element(best),
        _ => Threshold::Value(predicted),
    };
    if let Some(outcome) = first_clearing(instance, &ids[k1..k2], threshold, SelectionPhase::Two) {
        return outcome;
    }
    let threshold = Threshold::best_of(instance, &ids[..k2]);
    first_clearing(instance, &ids[k2..], threshold, SelectionPhase::Three).unwrap_or(SelectionOutcome::NONE)
}

/// Competitive ratio `g_{c,lambda}(eta)` guaranteed for [`algorithm1`].
pub fn g_secretary(eta: f64, params: &SecretaryParams, opt: f64) -> f64 {
    let worst = 1.0 / (params.c * E);
    if eta < params.lambda {
        let good = params.f * (1.0 - (params.lambda + eta) / opt).max(0.0);
        worst.max(good)
    } else {
        worst
    }
}

/// Distribution of the confidence parameter, supported on `[0, p*]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaDistribution {
    Point { value: f64 },
    Uniform { low: f64, high: f64 },
    /// Normal law conditioned on `[0, p*]`.
    TruncatedNormal { mean: f64, variance: f64 },
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

impl LambdaDistribution {
    pub fn validate(&self, p_star: f64) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            LambdaDistribution::Point { value } => {
                if !(0.0..=p_star).contains(&value) {
                    return bad(format!("point mass {value} outside [0, {p_star}]"));
                }
            }
            LambdaDistribution::Uniform { low, high } => {
                if !(0.0 <= low && low < high && high <= p_star) {
                    return bad(format!("uniform({low}, {high}) must satisfy 0 <= low < high <= {p_star}"));
                }
            }
            LambdaDistribution::TruncatedNormal { mean, variance } => {
                if !mean.is_finite() || !(variance > 0.0 && variance.is_finite()) {
                    return bad(format!("normal({mean}, {variance}) needs a finite mean and positive variance"));
                }
                if self.normal_mass(p_star) < 1e-9 {
                    return bad(format!("normal({mean}, {variance}) puts no mass on [0, {p_star}]"));
                }
            }
        }
        Ok(())
    }

    fn normal_mass(&self, p_star: f64) -> f64 {
        match *self {
            LambdaDistribution::TruncatedNormal { mean, variance } => {
                let sd = variance.sqrt();
                normal_cdf((p_star - mean) / sd) - normal_cdf(-mean / sd)
            }
            _ => 1.0,
        }
    }

    /// Density on `[0, p*]`; `None` for the point mass.
    pub fn density(&self, x: f64, p_star: f64) -> Option<f64> {
        let inside = (0.0..=p_star).contains(&x);
        match *self {
            LambdaDistribution::Point { .. } => None,
            LambdaDistribution::Uniform { low, high } => {
                Some(if (low..=high).contains(&x) { 1.0 / (high - low) } else { 0.0 })
            }
            LambdaDistribution::TruncatedNormal { mean, variance } => {
                if !inside {
                    return Some(0.0);
                }
                let z = (x - mean) / variance.sqrt();
                let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt();
                Some(pdf / self.normal_mass(p_star))
            }
        }
    }

    /// Points where the density may be discontinuous.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            LambdaDistribution::Uniform { low, high } => vec![low, high],
            LambdaDistribution::TruncatedNormal { mean, .. } => vec![mean],
            LambdaDistribution::Point { value } => vec![value],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, p_star: f64, rng: &mut R) -> Result<f64> {
        self.validate(p_star)?;
        Ok(match *self {
            LambdaDistribution::Point { value } => value,
            LambdaDistribution::Uniform { low, high } => rng.random_range(low..high),
            LambdaDistribution::TruncatedNormal { mean, variance } => {
                let normal = Normal::new(mean, variance.sqrt())
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                loop {
                    let x = normal.sample(rng);
                    if (0.0..=p_star).contains(&x) {
                        break x;
                    }
                }
            }
        })
    }
}

/// Draws the confidence parameter once, then runs [`algorithm1`].
pub fn algorithm1_random_lambda<R: Rng + ?Sized>(
    instance: &SecretaryInstance,
    order: &ArrivalOrder,
    c: f64,
    p_star: f64,
    distribution: &LambdaDistribution,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    let lambda = distribution.sample(p_star, rng)?;
    let params = SecretaryParams::new(c, lambda, p_star)?;
    Ok(algorithm1(instance, order, &params))
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`, split at `breaks`.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut knots = vec![a, b];
    knots.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    knots.sort_by(f64::total_cmp);
    knots
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(f, lo, hi, fa, fm, fb, whole, 1e-13, 40)
        })
        .sum()
}

/// Expected bound `Pr[lambda < eta]/(ce) + f(c) * int_eta^{p*} h(x)(1 - (x+eta)/OPT) dx`
/// for an arbitrary density `h` on `[0, p*]`.
///
/// `breaks` lists points where `h` may jump. Fails when `h` does not
/// integrate to 1.
pub fn expected_ratio_for_density(
    eta: f64,
    c: f64,
    p_star: f64,
    opt: f64,
    density: &dyn Fn(f64) -> f64,
    breaks: &[f64],
) -> Result<f64> {
    let f = f_of_c(c)?;
    let mut breaks = breaks.to_vec();
    breaks.push(eta);
    let mass = integrate(density, 0.0, p_star, &breaks);
    if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Validation(format!("density integrates to {mass}, not 1")));
    }
    let below = integrate(density, 0.0, eta.min(p_star), &breaks);
    let weighted = |x: f64| density(x) * (1.0 - (x + eta) / opt);
    let above = integrate(&weighted, eta.max(0.0), p_star, &breaks);
    Ok(below / (c * E) + f * above)
}

/// Expected bound of [`algorithm1_random_lambda`] for one of the built-in
/// distributions.
pub fn expected_ratio_random_lambda(
    eta: f64,
    c: f64,
    p_star: f64,
    opt: f64,
    distribution: &LambdaDistribution,
) -> Result<f64> {
    distribution.validate(p_star)?;
    if let LambdaDistribution::Point { value } = *distribution {
        let f = f_of_c(c)?;
        return Ok(if eta < value {
            f * (1.0 - (value + eta) / opt)
        } else {
            1.0 / (c * E)
        });
    }
    let density = |x: f64| distribution.density(x, p_star).unwrap_or(0.0);
    expected_ratio_for_density(eta, c, p_star, opt, &density, &distribution.breakpoints())
}

/// With probability `gamma` run the classical rule at `1/e`; otherwise pick
/// the first element of value at least `p* - lambda`.
pub fn naive_randomized<R: Rng + ?Sized>(
    instance: &SecretaryInstance,
    order: &ArrivalOrder,
    gamma: f64,
    p_star: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<SelectionOutcome> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in [0, 1]")));
    }
    if rng.random_bool(gamma) {
        return classical_secretary(instance, order, 1.0 / E);
    }
    check_order(instance, order);
    let threshold = p_star - lambda;
    Ok(order
        .iter()
        .find(|&id| instance.value(id) >= threshold)
        .map_or(SelectionOutcome::NONE, |id| {
            SelectionOutcome::pick(instance, id, SelectionPhase::Two)
        }))
}

/// Lower bound `gamma/e + (1 - gamma) max(1 - (lambda + eta)/OPT, 0)` on the
/// naive randomization.
pub fn naive_randomized_bound(gamma: f64, lambda: f64, eta: f64, opt: f64) -> f64 {
    gamma / E + (1.0 - gamma) * (1.0 - (lambda + eta) / opt).max(0.0)
}

/// Deterministic algorithms accepted by [`exact_expected_value`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecretaryAlgorithm {
    Classical { sample_fraction: f64 },
    Algorithm1(SecretaryParams),
}

impl SecretaryAlgorithm {
    pub fn run(&self, instance: &SecretaryInstance, order: &ArrivalOrder) -> Result<SelectionOutcome> {
        match self {
            SecretaryAlgorithm::Classical { sample_fraction } => classical_secretary(instance, order, *sample_fraction),
            SecretaryAlgorithm::Algorithm1(params) => Ok(algorithm1(instance, order, params)),
        }
    }
}

/// Mean selected value over all `n!` arrival orders.
pub fn exact_expected_value(instance: &SecretaryInstance, algorithm: &SecretaryAlgorithm) -> Result<f64> {
    let n = instance.len();
    if n > EXACT_LIMIT {
        return Err(Error::TooLarge { n, limit: EXACT_LIMIT });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for perm in (0..n).permutations(n) {
        let order = ArrivalOrder::new(perm)?;
        total += algorithm.run(instance, &order)?.value;
        count += 1;
    }
    Ok(total / count as f64)
}

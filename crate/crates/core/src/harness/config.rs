use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{ErrorKind, WeightDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Secretary,
    Bipartite,
    Graphic,
    Truthful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Observe `n/e`, then take the first element beating the sample.
    Classical,
    Algorithm1,
    /// Coin flip between the classical rule and greedy at `p* - lambda`.
    Naive,
    Kesselheim,
    Algorithm3,
    Algorithm4,
    Algorithm5,
    Mechanism,
}

impl Algorithm {
    pub fn problem(self) -> Problem {
        match self {
            Algorithm::Classical | Algorithm::Algorithm1 | Algorithm::Naive => Problem::Secretary,
            Algorithm::Kesselheim | Algorithm::Algorithm3 => Problem::Bipartite,
            Algorithm::Algorithm4 | Algorithm::Algorithm5 => Problem::Graphic,
            Algorithm::Mechanism => Problem::Truthful,
        }
    }

    pub fn default_for(problem: Problem) -> Self {
        match problem {
            Problem::Secretary => Algorithm::Algorithm1,
            Problem::Bipartite => Algorithm::Algorithm3,
            Problem::Graphic => Algorithm::Algorithm5,
            Problem::Truthful => Algorithm::Mechanism,
        }
    }
}

impl Problem {
    pub const ALL: [Problem; 4] = [Problem::Secretary, Problem::Bipartite, Problem::Graphic, Problem::Truthful];

    pub fn name(self) -> &'static str {
        match self {
            Problem::Secretary => "secretary",
            Problem::Bipartite => "bipartite",
            Problem::Graphic => "graphic",
            Problem::Truthful => "truthful",
        }
    }
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Classical,
        Algorithm::Algorithm1,
        Algorithm::Naive,
        Algorithm::Kesselheim,
        Algorithm::Algorithm3,
        Algorithm::Algorithm4,
        Algorithm::Algorithm5,
        Algorithm::Mechanism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Classical => "classical",
            Algorithm::Algorithm1 => "algorithm1",
            Algorithm::Naive => "naive",
            Algorithm::Kesselheim => "kesselheim",
            Algorithm::Algorithm3 => "algorithm3",
            Algorithm::Algorithm4 => "algorithm4",
            Algorithm::Algorithm5 => "algorithm5",
            Algorithm::Mechanism => "mechanism",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Problem::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown problem {s:?}")))
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

impl Problem {
    /// Finite-size slack used by verdicts unless configured.
    pub fn default_slack(self) -> f64 {
        match self {
            Problem::Secretary => 0.01,
            Problem::Bipartite | Problem::Truthful => 0.02,
            Problem::Graphic => 0.03,
        }
    }
}

/// Random instance drawn fresh for every trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceSpec {
    /// Secretary elements, left nodes, graph vertices or agents.
    pub n: usize,
    /// Right nodes or items; defaults to `n`.
    pub m: Option<usize>,
    /// Bipartite edge density (1 = complete) or graph edge probability.
    pub density: f64,
    pub weights: WeightDistribution,
    /// Add a zero-weight dummy right node per left node.
    pub augment: bool,
    /// Truthful values are drawn from `0..=max_value`.
    pub max_value: u64,
    /// Truthful probability that an agent prefers a given item.
    pub preference: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec {
            n: 100,
            m: None,
            density: 1.0,
            weights: WeightDistribution::default(),
            augment: true,
            max_value: 20,
            preference: 0.5,
        }
    }
}

impl InstanceSpec {
    pub fn right_count(&self) -> usize {
        self.m.unwrap_or(self.n)
    }
}

/// Parameter grid. `lambda` and `eta` are relative to a per-trial scale:
/// OPT for secretary, OPT/|psi| for bipartite and truthful, OPT/|V| for
/// graphic, where psi is the optimal matching on original right nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: Vec<f64>,
    /// How predictions are perturbed by `eta`.
    pub error: ErrorKind,
    /// Naive randomization probability of running the classical rule.
    pub gamma: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            c: vec![std::f64::consts::E],
            d: vec![1.0],
            lambda: vec![0.05],
            eta: vec![0.0],
            error: ErrorKind::Exact,
            gamma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub algorithm: Option<Algorithm>,
    #[serde(default)]
    pub instance: InstanceSpec,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub slack: Option<f64>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

fn default_trials() -> u64 {
    1000
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl ExperimentConfig {
    pub fn new(problem: Problem) -> Self {
        ExperimentConfig {
            problem,
            algorithm: None,
            instance: InstanceSpec::default(),
            grid: Grid::default(),
            trials: default_trials(),
            seed: 0,
            out: None,
            slack: None,
            threads: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm.unwrap_or_else(|| Algorithm::default_for(self.problem))
    }

    pub fn slack(&self) -> f64 {
        self.slack.unwrap_or_else(|| self.problem.default_slack())
    }

    /// Checks settings shared by every cell; per-cell preconditions are
    /// checked by [`Cell::infeasibility`].
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let algorithm = self.algorithm();
        if algorithm.problem() != self.problem {
            return fail(format!("algorithm {algorithm} does not solve {}", self.problem));
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        let g = &self.grid;
        if g.c.is_empty() || g.d.is_empty() || g.lambda.is_empty() || g.eta.is_empty() {
            return fail("every grid axis needs at least one value".into());
        }
        let all = g.c.iter().chain(&g.d).chain(&g.lambda).chain(&g.eta);
        if all.clone().any(|x| !x.is_finite()) || g.lambda.iter().chain(&g.eta).any(|&x| x < 0.0) {
            return fail("grid values must be finite, lambda and eta nonnegative".into());
        }
        if !(0.0..=1.0).contains(&g.gamma) {
            return fail(format!("gamma = {} must lie in [0, 1]", g.gamma));
        }
        let spec = &self.instance;
        if spec.n == 0 || spec.right_count() == 0 {
            return fail("instance sizes must be positive".into());
        }
        if !(spec.density > 0.0 && spec.density <= 1.0) {
            return fail(format!("density = {} must lie in (0, 1]", spec.density));
        }
        if !(0.0..=1.0).contains(&spec.preference) {
            return fail(format!("preference = {} must lie in [0, 1]", spec.preference));
        }
        if let WeightDistribution::Uniform { low, high } = spec.weights {
            if !(low >= 0.0 && high >= low) {
                return fail(format!("weights need 0 <= low <= high, got [{low}, {high})"));
            }
        }
        if let WeightDistribution::PowerLaw { alpha, scale } = spec.weights {
            if !(alpha > 0.0 && scale > 0.0) {
                return fail(format!("power law needs alpha, scale > 0, got {alpha}, {scale}"));
            }
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if self.slack.is_some_and(|s| !s.is_finite() || s < 0.0) {
            return fail("slack must be finite and nonnegative".into());
        }
        Ok(())
    }

    /// Grid cells in row order: `c`, then `d`, `lambda`, `eta`.
    pub fn cells(&self) -> Vec<Cell> {
        let g = &self.grid;
        let mut cells = Vec::new();
        for &c in &g.c {
            for &d in &g.d {
                for &lambda in &g.lambda {
                    for &eta in &g.eta {
                        cells.push(Cell {
                            index: cells.len(),
                            c,
                            d,
                            lambda,
                            eta,
                        });
                    }
                }
            }
        }
        cells
    }
}

impl Cell {
    /// Why `algorithm` cannot run on this cell, if it cannot.
    pub fn infeasibility(&self, algorithm: Algorithm) -> Option<String> {
        let (c, d) = (self.c, self.d);
        match algorithm {
            Algorithm::Classical | Algorithm::Naive => None,
            Algorithm::Algorithm1 if c < 1.0 => Some(format!("need c >= 1, got {c}")),
            Algorithm::Algorithm1 if self.lambda > 1.0 => Some(format!("relative lambda {} exceeds 1", self.lambda)),
            Algorithm::Algorithm1 => None,
            Algorithm::Kesselheim if !(d >= 1.0 && c >= d) => Some(format!("need c >= d >= 1, got c = {c}, d = {d}")),
            Algorithm::Algorithm4 if c <= 1.0 => Some(format!("need c > 1, got {c}")),
            Algorithm::Algorithm3 | Algorithm::Algorithm5 | Algorithm::Mechanism if !(d >= 1.0 && c > d) => {
                Some(format!("need c > d >= 1, got c = {c}, d = {d}"))
            }
            _ => None,
        }
    }
}

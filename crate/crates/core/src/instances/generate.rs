use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use super::{BipartiteInstance, GraphEdge, GraphInstance, SecretaryInstance};

/// Distribution of generated values and edge weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDistribution {
    /// Uniform on `[low, high)`.
    Uniform { low: f64, high: f64 },
    /// Pareto with minimum `scale` and tail index `alpha`.
    PowerLaw { alpha: f64, scale: f64 },
}

impl Default for WeightDistribution {
    fn default() -> Self {
        WeightDistribution::Uniform { low: 0.0, high: 1.0 }
    }
}

impl WeightDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDistribution::Uniform { low, high } => {
                if high > low {
                    rng.random_range(low..high)
                } else {
                    low
                }
            }
            WeightDistribution::PowerLaw { alpha, scale } => Pareto::new(scale, alpha)
                .expect("power law needs alpha, scale > 0")
                .sample(rng),
        }
    }
}

pub fn random_secretary<R: Rng + ?Sized>(
    n: usize,
    dist: &WeightDistribution,
    rng: &mut R,
) -> SecretaryInstance {
    let values = (0..n).map(|_| dist.sample(rng)).collect();
    SecretaryInstance::new(values).expect("sampled values are nonnegative")
}

/// Every left node is joined to every right node.
pub fn complete_bipartite<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    dist: &WeightDistribution,
    rng: &mut R,
) -> BipartiteInstance {
    random_bipartite(n, m, 1.0, dist, rng)
}

/// Each of the `n * m` possible edges is present with probability `density`.
pub fn random_bipartite<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    density: f64,
    dist: &WeightDistribution,
    rng: &mut R,
) -> BipartiteInstance {
    let mut edges = Vec::new();
    for l in 0..n {
        for r in 0..m {
            if density >= 1.0 || rng.random::<f64>() < density {
                edges.push((l, r, dist.sample(rng)));
            }
        }
    }
    BipartiteInstance::new(n, m, &edges).expect("generated edges are valid")
}

/// Erdős–Rényi graph `G(n, p)` with sampled weights, redrawn until connected.
pub fn connected_random_graph<R: Rng + ?Sized>(
    vertex_count: usize,
    edge_probability: f64,
    dist: &WeightDistribution,
    rng: &mut R,
) -> GraphInstance {
    assert!(
        vertex_count <= 1 || edge_probability > 0.0,
        "a graph with edge probability 0 is never connected"
    );
    loop {
        let mut edges = Vec::new();
        for u in 0..vertex_count {
            for v in (u + 1)..vertex_count {
                if rng.random::<f64>() < edge_probability {
                    edges.push(GraphEdge {
                        u,
                        v,
                        weight: dist.sample(rng),
                    });
                }
            }
        }
        let graph = GraphInstance::new(vertex_count, edges).expect("generated edges are valid");
        if graph.is_connected() {
            return graph;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trial_rng;

    #[test]
    fn generators_respect_invariants() {
        let mut rng = trial_rng(11, 0, 0);
        let pareto = WeightDistribution::PowerLaw { alpha: 2.0, scale: 1.0 };
        for dist in [WeightDistribution::default(), pareto] {
            let sec = random_secretary(50, &dist, &mut rng);
            assert!(sec.values().iter().all(|v| v.is_finite() && *v >= 0.0));
            let bip = complete_bipartite(4, 3, &dist, &mut rng);
            assert_eq!(bip.edge_count(), 12);
            let graph = connected_random_graph(12, 0.3, &dist, &mut rng);
            assert!(graph.is_connected());
            assert!(graph.edges().iter().all(|e| e.u < e.v && e.weight >= 0.0));
        }
        let sparse = random_bipartite(10, 10, 0.0, &WeightDistribution::default(), &mut rng);
        assert_eq!(sparse.edge_count(), 0);
    }

    #[test]
    fn power_law_respects_scale() {
        let mut rng = trial_rng(3, 0, 0);
        let dist = WeightDistribution::PowerLaw { alpha: 1.5, scale: 2.0 };
        assert!((0..1000).all(|_| dist.sample(&mut rng) >= 2.0));
    }
}

//! Exact offline optima: maximum-weight and lexicographically maximal
//! bipartite matchings, critical values, maximum-weight forests and the
//! secretary optimum.

mod assignment;

use serde::{Deserialize, Serialize};

pub use assignment::IncrementalAssignment;

use crate::error::{Error, Result};
use crate::instances::{BipartiteInstance, GraphInstance, SecretaryInstance};
use crate::union_find::UnionFind;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A set of `(left, right)` pairs in which no node appears twice.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

impl Matching {
    pub fn partner_of_left(&self, l: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == l).map(|p| p.1)
    }

    pub fn contains(&self, l: usize, r: usize) -> bool {
        self.pairs.contains(&(l, r))
    }

    /// Checks the matching invariants against `instance`.
    pub fn validate(&self, instance: &BipartiteInstance) -> Result<()> {
        let mut left = vec![false; instance.left_count()];
        let mut right = vec![false; instance.right_count()];
        let mut total = 0.0;
        for &(l, r) in &self.pairs {
            let w = instance
                .weight(l, r)
                .ok_or_else(|| Error::Validation(format!("({l}, {r}) is not an edge")))?;
            if std::mem::replace(&mut left[l], true) || std::mem::replace(&mut right[r], true) {
                return Err(Error::Validation(format!("node reused by pair ({l}, {r})")));
            }
            total += w;
        }
        if (total - self.total_weight).abs() > WEIGHT_TOLERANCE * total.abs().max(1.0) {
            return Err(Error::Validation(format!(
                "recorded weight {} differs from edge sum {total}",
                self.total_weight
            )));
        }
        Ok(())
    }
}

/// Edge ids of a graph instance that form a forest.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForestSelection {
    pub edges: Vec<usize>,
    pub total_weight: f64,
}

impl ForestSelection {
    pub fn is_acyclic(&self, graph: &GraphInstance) -> bool {
        crate::union_find::is_forest(
            graph.vertex_count(),
            self.edges.iter().map(|&id| (graph.edge(id).u, graph.edge(id).v)),
        )
    }
}

/// Smallest report at which an agent is matched by the lexicographic
/// maximum-weight matching, and the item it then receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalValue {
    pub agent: usize,
    pub tau: u64,
    pub matched_item: usize,
}

/// Incremental solver over the rows of `instance`, filled in the order
/// given by `left_sequence`. Online algorithms keep this alive between
/// arrivals instead of re-solving from scratch.
pub fn assignment_for(instance: &BipartiteInstance, left_sequence: &[usize]) -> IncrementalAssignment {
    let mut solver = IncrementalAssignment::new(instance.right_count());
    for &l in left_sequence {
        solver.add_row(instance.neighbors(l).to_vec());
    }
    solver
}

fn to_matching(solver: &IncrementalAssignment, rows: &[usize]) -> Matching {
    let mut pairs: Vec<(usize, usize)> = solver
        .pairs()
        .into_iter()
        .map(|(row, col, _)| (rows[row], col))
        .collect();
    pairs.sort_unstable();
    Matching {
        pairs,
        total_weight: solver.total_weight(),
    }
}

/// Maximum-weight matching of the subgraph induced by `left_sequence` and
/// all right nodes, with left nodes inserted in the given order.
pub fn max_weight_matching_in_order(instance: &BipartiteInstance, left_sequence: &[usize]) -> Matching {
    to_matching(&assignment_for(instance, left_sequence), left_sequence)
}

/// Maximum-weight matching on `G[subset ∪ R]`. The result depends only on
/// the subset as a set: rows are inserted by increasing left id.
pub fn max_weight_matching(instance: &BipartiteInstance, subset: &[usize]) -> Matching {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    max_weight_matching_in_order(instance, &sorted)
}

/// Lexicographically largest among the maximum-weight matchings of
/// `G[subset ∪ R]`.
///
/// Edges are visited from the `≻`-largest down, where `(l, r) ≻ (l', r')`
/// iff `(l, r)` is lexicographically smaller. Each edge is either fixed
/// (some optimum of the remaining graph uses it) or discarded, and the edge
/// set only ever shrinks.
pub fn lex_max_matching(instance: &BipartiteInstance, subset: &[usize]) -> Matching {
    let mut rows = subset.to_vec();
    rows.sort_unstable();
    rows.dedup();

    let mut candidates: Vec<(usize, usize, f64)> = rows
        .iter()
        .flat_map(|&l| instance.neighbors(l).iter().map(move |&(r, w)| (l, r, w)))
        .collect();
    candidates.sort_by_key(|a| (a.0, a.1));

    let mut alive = vec![true; candidates.len()];
    let mut left_used = vec![false; instance.left_count()];
    let mut right_used = vec![false; instance.right_count()];

    let value_of = |alive: &[bool], left_used: &[bool], right_used: &[bool]| -> f64 {
        let mut solver = IncrementalAssignment::new(instance.right_count());
        for &l in &rows {
            if left_used[l] {
                continue;
            }
            let edges: Vec<(usize, f64)> = candidates
                .iter()
                .zip(alive)
                .filter(|&(&(el, er, _), &ok)| ok && el == l && !right_used[er])
                .map(|(&(_, r, w), _)| (r, w))
                .collect();
            solver.add_row(edges);
        }
        solver.total_weight()
    };

    let mut remaining = value_of(&alive, &left_used, &right_used);
    let mut matching = Matching::default();
    for idx in 0..candidates.len() {
        let (l, r, w) = candidates[idx];
        if !alive[idx] || left_used[l] || right_used[r] {
            continue;
        }
        left_used[l] = true;
        right_used[r] = true;
        let rest = value_of(&alive, &left_used, &right_used);
        let tolerance = WEIGHT_TOLERANCE * remaining.abs().max(1.0);
        if rest + w >= remaining - tolerance {
            matching.pairs.push((l, r));
            matching.total_weight += w;
            remaining = rest;
        } else {
            left_used[l] = false;
            right_used[r] = false;
            alive[idx] = false;
        }
    }
    matching
}

fn require_integer_weights(instance: &BipartiteInstance, subset: &[usize]) -> Result<()> {
    for &l in subset {
        for &(r, w) in instance.neighbors(l) {
            if w.fract() != 0.0 {
                return Err(Error::Validation(format!(
                    "critical values need integer weights; edge ({l}, {r}) has {w}"
                )));
            }
        }
    }
    Ok(())
}

/// Critical value of `agent` on `G[subset ∪ R]` when all of its edges carry
/// its (uniform) report and every other weight is fixed.
///
/// Binary search over `[0, W]` with `W` one more than the total weight of
/// all other edges. Returns `Ok(None)` when the agent is unmatched even at
/// `W`, which happens exactly when it has no edges.
pub fn critical_value(
    instance: &BipartiteInstance,
    subset: &[usize],
    agent: usize,
) -> Result<Option<CriticalValue>> {
    if !subset.contains(&agent) {
        return Err(Error::InvalidParameter(format!("agent {agent} is not in the subset")));
    }
    require_integer_weights(instance, subset)?;
    let others: f64 = subset
        .iter()
        .filter(|&&l| l != agent)
        .flat_map(|&l| instance.neighbors(l).iter().map(|&(_, w)| w))
        .sum();
    let ceiling = others as u64 + 1;

    let matched_at = |report: u64| -> Option<usize> {
        let probe = instance.with_uniform_left_weight(agent, report as f64);
        lex_max_matching(&probe, subset).partner_of_left(agent)
    };

    if matched_at(ceiling).is_none() {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u64, ceiling);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if matched_at(mid).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let matched_item = matched_at(lo).expect("search ends on a matched report");
    Ok(Some(CriticalValue {
        agent,
        tau: lo,
        matched_item,
    }))
}

/// Maximum-weight forest: Kruskal over edges by decreasing weight, equal
/// weights by increasing edge id.
pub fn max_weight_forest(graph: &GraphInstance) -> ForestSelection {
    let mut order: Vec<usize> = (0..graph.edge_count()).collect();
    order.sort_by(|&a, &b| {
        graph
            .edge(b)
            .weight
            .total_cmp(&graph.edge(a).weight)
            .then(a.cmp(&b))
    });
    let mut sets = UnionFind::new(graph.vertex_count());
    let mut forest = ForestSelection::default();
    for id in order {
        let e = graph.edge(id);
        if sets.union(e.u, e.v) {
            forest.edges.push(id);
            forest.total_weight += e.weight;
        }
    }
    forest.edges.sort_unstable();
    forest
}

/// `(max_i v_i, argmax)` with the smallest id winning ties.
pub fn secretary_opt(instance: &SecretaryInstance) -> (f64, usize) {
    let best = (0..instance.len())
        .reduce(|best, id| if instance.beats(id, best) { id } else { best })
        .expect("instances are nonempty");
    (instance.value(best), best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{connected_random_graph, random_bipartite, GraphEdge, WeightDistribution};
    use crate::rng::trial_rng;
    use rand::Rng;

    /// Every matching of `G[subset ∪ R]`, as sorted pair lists.
    fn all_matchings(instance: &BipartiteInstance, subset: &[usize]) -> Vec<Vec<(usize, usize)>> {
        fn go(
            inst: &BipartiteInstance,
            subset: &[usize],
            idx: usize,
            used: &mut Vec<bool>,
            current: &mut Vec<(usize, usize)>,
            out: &mut Vec<Vec<(usize, usize)>>,
        ) {
            if idx == subset.len() {
                out.push(current.clone());
                return;
            }
            go(inst, subset, idx + 1, used, current, out);
            let l = subset[idx];
            for &(r, _) in inst.neighbors(l) {
                if !used[r] {
                    used[r] = true;
                    current.push((l, r));
                    go(inst, subset, idx + 1, used, current, out);
                    current.pop();
                    used[r] = false;
                }
            }
        }
        let mut out = Vec::new();
        let mut sorted = subset.to_vec();
        sorted.sort_unstable();
        go(instance, &sorted, 0, &mut vec![false; instance.right_count()], &mut Vec::new(), &mut out);
        out
    }

    fn weight_of(instance: &BipartiteInstance, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(l, r)| instance.weight(l, r).unwrap()).sum()
    }

    fn integer_instance(rng: &mut impl Rng, n: usize, m: usize, max_w: u32, density: f64) -> BipartiteInstance {
        let mut edges = Vec::new();
        for l in 0..n {
            for r in 0..m {
                if rng.random::<f64>() < density {
                    edges.push((l, r, rng.random_range(0..=max_w) as f64));
                }
            }
        }
        BipartiteInstance::new(n, m, &edges).unwrap()
    }

    #[test]
    fn diagonal_dominance() {
        let inst = BipartiteInstance::new(2, 2, &[(0, 0, 3.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]).unwrap();
        let m = max_weight_matching(&inst, &[0, 1]);
        assert_eq!(m.total_weight, 6.0);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        m.validate(&inst).unwrap();
    }

    #[test]
    fn single_edge() {
        let inst = BipartiteInstance::new(1, 1, &[(0, 0, 4.0)]).unwrap();
        let m = max_weight_matching(&inst, &[0]);
        assert_eq!(m.pairs, vec![(0, 0)]);
        assert_eq!(m.total_weight, 4.0);
    }

    #[test]
    fn dense_five_by_five_against_permutations() {
        use itertools::Itertools;
        let mut rng = trial_rng(55, 0, 0);
        for _ in 0..20 {
            let inst = random_bipartite(5, 5, 1.0, &WeightDistribution::default(), &mut rng);
            let best = (0..5)
                .permutations(5)
                .map(|perm| perm.iter().enumerate().map(|(l, &r)| inst.weight(l, r).unwrap()).sum::<f64>())
                .fold(f64::MIN, f64::max);
            let got = max_weight_matching(&inst, &[0, 1, 2, 3, 4]).total_weight;
            assert!((got - best).abs() < 1e-9, "{got} vs {best}");
        }
    }

    #[test]
    fn matches_enumeration_on_small_instances() {
        let mut rng = trial_rng(77, 0, 0);
        for _ in 0..1000 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=6);
            let inst = integer_instance(&mut rng, n, m, 9, 0.6);
            let subset: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.8).collect();
            let best = all_matchings(&inst, &subset)
                .iter()
                .map(|pairs| weight_of(&inst, pairs))
                .fold(0.0, f64::max);
            let got = max_weight_matching(&inst, &subset);
            got.validate(&inst).unwrap();
            assert_eq!(got.total_weight, best);
            assert!(got.pairs.iter().all(|p| subset.contains(&p.0)));
        }
    }

    #[test]
    fn lex_breaks_ties_toward_smaller_pairs() {
        // Two disjoint perfect matchings of weight 5.
        let inst = BipartiteInstance::new(2, 2, &[(0, 0, 2.0), (1, 1, 3.0), (0, 1, 3.0), (1, 0, 2.0)]).unwrap();
        let lex = lex_max_matching(&inst, &[0, 1]);
        assert_eq!(lex.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(lex.total_weight, 5.0);

        let zero = BipartiteInstance::new(2, 2, &[(0, 0, 0.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 0.0)]).unwrap();
        assert_eq!(lex_max_matching(&zero, &[0, 1]).pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn lex_equals_plain_solver_on_unique_optimum() {
        let inst = BipartiteInstance::new(2, 2, &[(0, 0, 1.0), (0, 1, 5.0), (1, 0, 4.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(lex_max_matching(&inst, &[0, 1]), max_weight_matching(&inst, &[0, 1]));
    }

    /// `a ≻_lex b` for matchings listed from the `≻`-largest pair down.
    fn lex_greater(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
        for (x, y) in a.iter().zip(b) {
            if x != y {
                return x < y;
            }
        }
        a.len() > b.len()
    }

    #[test]
    fn lex_is_maximal_among_enumerated_optima() {
        let mut rng = trial_rng(78, 0, 0);
        for _ in 0..300 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(1..=4);
            let inst = integer_instance(&mut rng, n, m, 3, 0.7);
            let subset: Vec<usize> = (0..n).collect();
            let lex = lex_max_matching(&inst, &subset);
            let optimum = max_weight_matching(&inst, &subset).total_weight;
            assert_eq!(lex.total_weight, optimum);
            lex.validate(&inst).unwrap();
            for other in all_matchings(&inst, &subset) {
                if weight_of(&inst, &other) == optimum && other != lex.pairs {
                    assert!(lex_greater(&lex.pairs, &other), "{:?} vs {other:?}", lex.pairs);
                }
            }
        }
    }

    #[test]
    fn critical_value_single_item() {
        let inst = BipartiteInstance::new(2, 1, &[(0, 0, 5.0), (1, 0, 3.0)]).unwrap();
        let cv = critical_value(&inst, &[0, 1], 0).unwrap().unwrap();
        assert_eq!(cv, CriticalValue { agent: 0, tau: 3, matched_item: 0 });
        // Sweep oracle: matched exactly from the critical value on.
        for report in 0..10 {
            let probe = inst.with_uniform_left_weight(0, report as f64);
            let matched = lex_max_matching(&probe, &[0, 1]).partner_of_left(0).is_some();
            assert_eq!(matched, report >= 3, "report {report}");
        }
        let other = critical_value(&inst, &[0, 1], 1).unwrap().unwrap();
        assert_eq!(other.tau, 6);
    }

    #[test]
    fn critical_value_without_edges() {
        let inst = BipartiteInstance::new(2, 1, &[(0, 0, 5.0)]).unwrap();
        assert_eq!(critical_value(&inst, &[0, 1], 1).unwrap(), None);
        let fractional = BipartiteInstance::new(1, 1, &[(0, 0, 1.5)]).unwrap();
        assert!(critical_value(&fractional, &[0], 0).is_err());
        assert!(critical_value(&inst, &[0], 1).is_err());
    }

    #[test]
    fn critical_value_on_free_item_is_zero() {
        let inst = BipartiteInstance::new(1, 1, &[(0, 0, 7.0)]).unwrap();
        assert_eq!(critical_value(&inst, &[0], 0).unwrap().unwrap().tau, 0);
    }

    #[test]
    fn allocation_is_a_monotone_step() {
        let mut rng = trial_rng(79, 0, 0);
        for _ in 0..100 {
            let n = rng.random_range(1..=3);
            let m = rng.random_range(1..=3);
            // Uniform weights per agent, as in the unit-demand mechanism.
            let mut edges = Vec::new();
            for l in 0..n {
                let w = rng.random_range(0..=6) as f64;
                for r in 0..m {
                    if rng.random::<f64>() < 0.7 {
                        edges.push((l, r, w));
                    }
                }
            }
            let inst = BipartiteInstance::new(n, m, &edges).unwrap();
            let subset: Vec<usize> = (0..n).collect();
            for agent in 0..n {
                let cv = critical_value(&inst, &subset, agent).unwrap();
                let total: f64 = inst.edges().map(|e| e.2).sum();
                for report in 0..=(total as u64 + 2) {
                    let probe = inst.with_uniform_left_weight(agent, report as f64);
                    let item = lex_max_matching(&probe, &subset).partner_of_left(agent);
                    match cv {
                        None => assert_eq!(item, None),
                        Some(cv) if report < cv.tau => assert_eq!(item, None),
                        Some(cv) => assert_eq!(item, Some(cv.matched_item)),
                    }
                }
            }
        }
    }

    fn triangle() -> GraphInstance {
        GraphInstance::new(
            3,
            vec![
                GraphEdge { u: 0, v: 1, weight: 3.0 },
                GraphEdge { u: 1, v: 2, weight: 2.0 },
                GraphEdge { u: 0, v: 2, weight: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn forest_examples() {
        let forest = max_weight_forest(&triangle());
        assert_eq!(forest.total_weight, 5.0);
        assert_eq!(forest.edges, vec![0, 1]);

        let tree = GraphInstance::new(
            4,
            vec![
                GraphEdge { u: 0, v: 1, weight: 1.0 },
                GraphEdge { u: 0, v: 2, weight: 2.0 },
                GraphEdge { u: 0, v: 3, weight: 0.5 },
            ],
        )
        .unwrap();
        assert_eq!(max_weight_forest(&tree).edges, vec![0, 1, 2]);
    }

    #[test]
    fn forest_matches_subset_enumeration() {
        let mut rng = trial_rng(80, 0, 0);
        for _ in 0..40 {
            let vertices = rng.random_range(2..=7);
            let graph = connected_random_graph(vertices, 0.45, &WeightDistribution::default(), &mut rng);
            let m = graph.edge_count();
            if m > 16 {
                continue;
            }
            let mut best = 0.0_f64;
            for mask in 0u32..(1 << m) {
                let chosen: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
                let acyclic = crate::union_find::is_forest(
                    vertices,
                    chosen.iter().map(|&i| (graph.edge(i).u, graph.edge(i).v)),
                );
                if acyclic {
                    best = best.max(chosen.iter().map(|&i| graph.edge(i).weight).sum());
                }
            }
            let forest = max_weight_forest(&graph);
            assert!(forest.is_acyclic(&graph));
            assert!((forest.total_weight - best).abs() < 1e-9);
        }
    }

    #[test]
    fn secretary_opt_examples() {
        let inst = SecretaryInstance::new(vec![3.0, 7.0, 2.0]).unwrap();
        assert_eq!(secretary_opt(&inst), (7.0, 1));
        assert_eq!(secretary_opt(&SecretaryInstance::new(vec![5.0, 5.0]).unwrap()), (5.0, 0));
        assert_eq!(secretary_opt(&SecretaryInstance::new(vec![0.0]).unwrap()), (0.0, 0));
    }
}

//! Graphic matroid secretary: edges of a graph arrive in random order and a
//! forest is selected online. Selections are matchings in the
//! element–vertex graph `B_G`, where each element (edge `{u, v}` of `G`) is
//! linked to `u` and `v` with its own weight.

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bipartite::{check_phases, phase_boundaries};
use crate::error::{Error, Result};
use crate::instances::{sample_arrival_order, ArrivalOrder, BipartiteInstance, GraphInstance, PredictionVector};
use crate::oracles::{ForestSelection, IncrementalAssignment};
use crate::stats::Frequency;
use crate::union_find::{is_forest, UnionFind};

/// Largest edge count for exhaustive order enumeration.
pub const EXACT_LIMIT: usize = 8;

/// `B_G`: elements on one side, vertices on the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementVertexGraph {
    vertex_count: usize,
    /// Endpoints and weight of every element.
    elements: Vec<(usize, usize, f64)>,
}

impl ElementVertexGraph {
    pub fn new(graph: &GraphInstance) -> Self {
        ElementVertexGraph {
            vertex_count: graph.vertex_count(),
            elements: graph.edges().iter().map(|e| (e.u, e.v, e.weight)).collect(),
        }
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// The two `(vertex, weight)` links of element `e`.
    pub fn links(&self, e: usize) -> [(usize, f64); 2] {
        let (u, v, w) = self.elements[e];
        [(u, w), (v, w)]
    }

    pub fn link_count(&self) -> usize {
        2 * self.elements.len()
    }

    /// Elements as left nodes, vertices as right nodes.
    pub fn as_bipartite(&self) -> BipartiteInstance {
        let edges: Vec<(usize, usize, f64)> = (0..self.elements.len())
            .flat_map(|e| self.links(e).map(|(x, w)| (e, x, w)))
            .collect();
        BipartiteInstance::new(self.elements.len(), self.vertex_count, &edges)
            .expect("graph instances are validated")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphicPhase {
    Two,
    Three,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphicCommit {
    pub element: usize,
    pub vertex: usize,
    pub weight: f64,
    pub phase: GraphicPhase,
}

/// Committed `(element, vertex)` pairs of `B_G`. Orienting each element
/// `{u, v}` matched at `v` as `u -> v` gives `D_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedSelection {
    pub commits: Vec<GraphicCommit>,
    pub total_weight: f64,
    vertex_used: Vec<bool>,
}

impl OrientedSelection {
    pub fn new(vertex_count: usize) -> Self {
        OrientedSelection {
            commits: Vec::new(),
            total_weight: 0.0,
            vertex_used: vec![false; vertex_count],
        }
    }

    pub fn is_vertex_free(&self, x: usize) -> bool {
        !self.vertex_used[x]
    }

    fn commit(&mut self, element: usize, vertex: usize, weight: f64, phase: GraphicPhase) {
        debug_assert!(!self.vertex_used[vertex]);
        self.vertex_used[vertex] = true;
        self.total_weight += weight;
        self.commits.push(GraphicCommit {
            element,
            vertex,
            weight,
            phase,
        });
    }

    /// `E[M]`: the selected elements.
    pub fn elements(&self) -> Vec<usize> {
        self.commits.iter().map(|c| c.element).collect()
    }

    pub fn forest(&self) -> ForestSelection {
        let mut edges = self.elements();
        edges.sort_unstable();
        ForestSelection {
            edges,
            total_weight: self.total_weight,
        }
    }

    /// In-degree of every vertex in `D_M`.
    pub fn in_degrees(&self, vertex_count: usize) -> Vec<usize> {
        let mut deg = vec![0; vertex_count];
        for c in &self.commits {
            deg[c.vertex] += 1;
        }
        deg
    }

    /// Whether `x` was matched during `phase`.
    pub fn matched_in_phase(&self, x: usize, phase: GraphicPhase) -> bool {
        self.commits.iter().any(|c| c.vertex == x && c.phase == phase)
    }

    /// Checks, for `graph`: each pair is a link of `B_G`, no element or vertex
    /// repeats, every in-degree is at most one, `E[M]` is a forest and the
    /// recorded weight matches.
    pub fn validate(&self, graph: &GraphInstance) -> Result<()> {
        let mut element_seen = vec![false; graph.edge_count()];
        let mut total = 0.0;
        for c in &self.commits {
            let edge = graph.edge(c.element);
            if c.vertex != edge.u && c.vertex != edge.v {
                return Err(Error::Validation(format!("vertex {} is not an endpoint of element {}", c.vertex, c.element)));
            }
            if std::mem::replace(&mut element_seen[c.element], true) {
                return Err(Error::Validation(format!("element {} selected twice", c.element)));
            }
            total += edge.weight;
        }
        if self.in_degrees(graph.vertex_count()).iter().any(|&d| d > 1) {
            return Err(Error::Validation("vertex with in-degree above one".into()));
        }
        let edges = self.commits.iter().map(|c| (graph.edge(c.element).u, graph.edge(c.element).v));
        if !is_forest(graph.vertex_count(), edges) {
            return Err(Error::Validation("selected elements contain a cycle".into()));
        }
        if (total - self.total_weight).abs() > 1e-9 * total.max(1.0) {
            return Err(Error::Validation(format!("recorded weight {} differs from {total}", self.total_weight)));
        }
        Ok(())
    }
}

/// Fail-safe thresholds: the heaviest Phase I element seen at each vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub t: Vec<f64>,
}

impl ThresholdState {
    pub fn new(vertex_count: usize) -> Self {
        ThresholdState {
            t: vec![0.0; vertex_count],
        }
    }

    pub fn observe(&mut self, u: usize, v: usize, w: f64) {
        self.t[u] = self.t[u].max(w);
        self.t[v] = self.t[v].max(w);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphicParams {
    pub c: f64,
    pub d: f64,
    pub lambda: f64,
    /// One prediction of `w_max(v)` per vertex.
    pub predictions: PredictionVector,
}

impl GraphicParams {
    /// Requires `c > d >= 1` and `0 <= lambda <= min_v p*_v`.
    pub fn new(c: f64, d: f64, lambda: f64, predictions: PredictionVector) -> Result<Self> {
        check_phases(c, d, true)?;
        let floor = predictions.min_value();
        if !lambda.is_finite() || lambda < 0.0 || lambda > floor {
            return Err(Error::InvalidParameter(format!(
                "lambda = {lambda} must lie in [0, min p* = {floor}]"
            )));
        }
        Ok(GraphicParams {
            c,
            d,
            lambda,
            predictions,
        })
    }
}

fn check_order(graph: &GraphInstance, order: &ArrivalOrder) -> Result<()> {
    if order.len() != graph.edge_count() {
        return Err(Error::Validation(format!(
            "order over {} elements for {} edges",
            order.len(),
            graph.edge_count()
        )));
    }
    Ok(())
}

/// Commits each arrival's link in the optimum of `B_G` over all elements
/// arrived so far, provided both endpoints are still unmatched. Rows for
/// positions before `from` are only inserted.
fn matching_phase(
    bg: &ElementVertexGraph,
    ids: &[usize],
    from: usize,
    phase: GraphicPhase,
    selection: &mut OrientedSelection,
) {
    let mut solver = IncrementalAssignment::new(bg.vertex_count());
    for (pos, &e) in ids.iter().enumerate() {
        solver.add_row(bg.links(e).to_vec());
        if pos < from {
            continue;
        }
        let Some(x) = solver.assigned(pos) else { continue };
        let [(u, w), (v, _)] = bg.links(e);
        if selection.is_vertex_free(u) && selection.is_vertex_free(v) {
            selection.commit(e, x, w, phase);
        }
    }
}

/// Deterministic algorithm: observe `floor(m/c)` elements, then commit the
/// newcomer's link in the current optimum of `B_G` whenever both of its
/// endpoints are unmatched.
pub fn algorithm4(graph: &GraphInstance, order: &ArrivalOrder, c: f64) -> Result<OrientedSelection> {
    if !(c.is_finite() && c > 1.0) {
        return Err(Error::InvalidParameter(format!("need c > 1, got {c}")));
    }
    check_order(graph, order)?;
    let bg = ElementVertexGraph::new(graph);
    let (k1, _) = phase_boundaries(order.len(), c, 1.0);
    let mut selection = OrientedSelection::new(graph.vertex_count());
    matching_phase(&bg, order.as_slice(), k1, GraphicPhase::Three, &mut selection);
    Ok(selection)
}

/// Phases I and II of [`algorithm5`]; returns the selection and the
/// fail-safe thresholds.
fn algorithm5_first_phases(
    graph: &GraphInstance,
    ids: &[usize],
    params: &GraphicParams,
    k1: usize,
    k2: usize,
) -> (OrientedSelection, ThresholdState) {
    let mut thresholds = ThresholdState::new(graph.vertex_count());
    for &e in &ids[..k1] {
        let edge = graph.edge(e);
        thresholds.observe(edge.u, edge.v, edge.weight);
    }
    let p = &params.predictions.values;
    let mut selection = OrientedSelection::new(graph.vertex_count());
    let mut forest = UnionFind::new(graph.vertex_count());
    for &e in &ids[k1..k2] {
        let edge = graph.edge(e);
        let eligible = |x: usize| {
            selection.is_vertex_free(x) && edge.weight >= thresholds.t[x].max(p[x] - params.lambda)
        };
        // Larger p*_x - lambda first, then the smaller vertex id.
        let mut candidates = [edge.u.min(edge.v), edge.u.max(edge.v)];
        if p[candidates[1]] > p[candidates[0]] {
            candidates.swap(0, 1);
        }
        let Some(y) = candidates.into_iter().find(|&x| eligible(x)) else { continue };
        if forest.union(edge.u, edge.v) {
            selection.commit(e, y, edge.weight, GraphicPhase::Two);
        }
    }
    (selection, thresholds)
}

/// Prediction algorithm. Phase I (first `floor(m/c)` elements) records
/// fail-safe thresholds `t_x`. Phase II (up to `floor(m/d)`) commits an
/// element at the eligible endpoint of largest `p*_x - lambda`, where `x` is
/// eligible if unmatched and `w >= max(t_x, p*_x - lambda)`, unless the
/// element closes a cycle. Phase III applies the deterministic algorithm's
/// rule with the optimum of `B_G` over every arrived element.
pub fn algorithm5(graph: &GraphInstance, order: &ArrivalOrder, params: &GraphicParams) -> Result<OrientedSelection> {
    check_order(graph, order)?;
    if params.predictions.values.len() != graph.vertex_count() {
        return Err(Error::Validation(format!(
            "{} predictions for {} vertices",
            params.predictions.values.len(),
            graph.vertex_count()
        )));
    }
    let ids = order.as_slice();
    let (k1, k2) = phase_boundaries(ids.len(), params.c, params.d);
    let (mut selection, _) = algorithm5_first_phases(graph, ids, params, k1, k2);
    if k2 < ids.len() {
        let bg = ElementVertexGraph::new(graph);
        matching_phase(&bg, ids, k2, GraphicPhase::Three, &mut selection);
    }
    Ok(selection)
}

/// Competitive ratio `g_{c,d,lambda}(eta)` of [`algorithm5`].
pub fn g_graphic(eta: f64, c: f64, d: f64, lambda: f64, opt: f64, vertex_count: usize) -> f64 {
    let worst = (d - 1.0) / (c * c);
    if eta >= lambda {
        return worst;
    }
    let inner = if opt > 0.0 {
        (1.0 - 2.0 * (lambda + eta) * vertex_count as f64 / opt).max(0.0)
    } else {
        0.0
    };
    worst.max(0.5 * (1.0 / d - 1.0 / c) * inner)
}

/// Whether neither `u` nor `v` is matched in Phase II of [`algorithm5`].
pub fn pair_unmatched_after_phase_two(
    graph: &GraphInstance,
    order: &ArrivalOrder,
    u: usize,
    v: usize,
    params: &GraphicParams,
) -> Result<bool> {
    check_order(graph, order)?;
    let ids = order.as_slice();
    let (k1, k2) = phase_boundaries(ids.len(), params.c, params.d);
    let (selection, _) = algorithm5_first_phases(graph, ids, params, k1, k2);
    Ok(selection.is_vertex_free(u) && selection.is_vertex_free(v))
}

fn check_pair(graph: &GraphInstance, u: usize, v: usize) -> Result<()> {
    if u == v || u >= graph.vertex_count() || v >= graph.vertex_count() {
        return Err(Error::InvalidParameter(format!("need two distinct vertices, got {u} and {v}")));
    }
    Ok(())
}

/// Monte-Carlo frequency of the pair staying unmatched through Phase II.
pub fn pair_unmatched_probability<R: Rng + ?Sized>(
    graph: &GraphInstance,
    u: usize,
    v: usize,
    params: &GraphicParams,
    trials: u64,
    rng: &mut R,
) -> Result<Frequency> {
    check_pair(graph, u, v)?;
    let mut freq = Frequency::default();
    for _ in 0..trials {
        let order = sample_arrival_order(graph.edge_count(), rng);
        freq.record(pair_unmatched_after_phase_two(graph, &order, u, v, params)?);
    }
    Ok(freq)
}

/// Exact frequency over all `m!` orders (`m` at most [`EXACT_LIMIT`]).
pub fn pair_unmatched_exact(graph: &GraphInstance, u: usize, v: usize, params: &GraphicParams) -> Result<Frequency> {
    check_pair(graph, u, v)?;
    let m = graph.edge_count();
    if m > EXACT_LIMIT {
        return Err(Error::TooLarge { n: m, limit: EXACT_LIMIT });
    }
    let mut freq = Frequency::default();
    for perm in (0..m).permutations(m) {
        freq.record(pair_unmatched_after_phase_two(graph, &ArrivalOrder::new(perm)?, u, v, params)?);
    }
    Ok(freq)
}

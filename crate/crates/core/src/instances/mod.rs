//! Weighted inputs whose elements arrive online, arrival orders, and
//! predictions with a controlled error.

mod generate;
mod io;
mod predictions;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

pub use generate::{
    complete_bipartite, connected_random_graph, random_bipartite, random_secretary,
    WeightDistribution,
};
pub use io::{parse_instance, write_instance, AnyInstance, InstanceKind};
pub use predictions::{
    bipartite_targets, graphic_targets, make_predictions, ErrorKind, ErrorModel, PredictionTarget,
    PredictionVector,
};

fn check_weight(w: f64, what: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(Error::Validation(format!("{what} {w} must be a finite nonnegative number")));
    }
    Ok(())
}

/// Values `v_i >= 0` of secretaries `0..n`.
///
/// Equal values are ordered by id: the smaller id counts as the larger
/// element, so effective values are always totally ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecretaryInstance {
    values: Vec<f64>,
}

impl SecretaryInstance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("secretary instance needs at least one value".into()));
        }
        for &v in &values {
            check_weight(v, "value")?;
        }
        Ok(SecretaryInstance { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Whether element `a` ranks above element `b` under the id tie-break.
    pub fn beats(&self, a: usize, b: usize) -> bool {
        let (va, vb) = (self.values[a], self.values[b]);
        va > vb || (va == vb && a < b)
    }
}

/// Weighted bipartite graph with left nodes `0..n` (arriving online) and
/// right nodes `0..m` (offline).
///
/// After [`BipartiteInstance::augment_perfect`] right nodes
/// `original_right..original_right + n` are private zero-weight dummies, one
/// per left node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteInstance {
    left_count: usize,
    right_count: usize,
    original_right: usize,
    // Per left node, sorted by right id.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl BipartiteInstance {
    /// Builds an instance from `(left, right, weight)` triples.
    pub fn new(left_count: usize, right_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); left_count];
        for &(l, r, w) in edges {
            if l >= left_count || r >= right_count {
                return Err(Error::Validation(format!(
                    "edge ({l}, {r}) outside a {left_count} x {right_count} instance"
                )));
            }
            check_weight(w, "weight")?;
            adjacency[l].push((r, w));
        }
        for (l, adj) in adjacency.iter_mut().enumerate() {
            adj.sort_by_key(|&(r, _)| r);
            if adj.windows(2).any(|p| p[0].0 == p[1].0) {
                return Err(Error::Validation(format!("duplicate edge at left node {l}")));
            }
        }
        Ok(BipartiteInstance {
            left_count,
            right_count,
            original_right: right_count,
            adjacency,
        })
    }

    pub fn left_count(&self) -> usize {
        self.left_count
    }

    pub fn right_count(&self) -> usize {
        self.right_count
    }

    /// Right nodes that existed before augmentation.
    pub fn original_right_count(&self) -> usize {
        self.original_right
    }

    pub fn is_augmented(&self) -> bool {
        self.right_count > self.original_right
    }

    pub fn is_dummy(&self, r: usize) -> bool {
        r >= self.original_right
    }

    pub fn neighbors(&self, l: usize) -> &[(usize, f64)] {
        &self.adjacency[l]
    }

    pub fn weight(&self, l: usize, r: usize) -> Option<f64> {
        let adj = &self.adjacency[l];
        adj.binary_search_by_key(&r, |&(x, _)| x).ok().map(|i| adj[i].1)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(l, adj)| adj.iter().map(move |&(r, w)| (l, r, w)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Adds a private zero-weight dummy right node for every left node, so
    /// that every subset of left nodes can be matched completely. The
    /// optimal matching weight is unchanged.
    pub fn augment_perfect(&self) -> BipartiteInstance {
        if self.is_augmented() {
            return self.clone();
        }
        let mut augmented = self.clone();
        for (l, adj) in augmented.adjacency.iter_mut().enumerate() {
            adj.push((self.right_count + l, 0.0));
        }
        augmented.right_count = self.right_count + self.left_count;
        augmented
    }

    /// Copy in which every edge of left node `l` carries weight `w`.
    pub fn with_uniform_left_weight(&self, l: usize, w: f64) -> BipartiteInstance {
        let mut copy = self.clone();
        for edge in &mut copy.adjacency[l] {
            edge.1 = w;
        }
        copy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl GraphEdge {
    pub fn other(&self, x: usize) -> usize {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected weighted graph whose edges arrive online. Edge ids are the
/// positions in [`GraphInstance::edges`] and double as the global tie-break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphInstance {
    vertex_count: usize,
    edges: Vec<GraphEdge>,
    connected: bool,
}

impl GraphInstance {
    pub fn new(vertex_count: usize, edges: Vec<GraphEdge>) -> Result<Self> {
        for (id, e) in edges.iter().enumerate() {
            if e.u >= vertex_count || e.v >= vertex_count {
                return Err(Error::Validation(format!(
                    "edge {id} ({}, {}) outside {vertex_count} vertices",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::Validation(format!("edge {id} is a self-loop at {}", e.u)));
            }
            check_weight(e.weight, "weight")?;
        }
        let connected = is_connected(vertex_count, &edges);
        Ok(GraphInstance {
            vertex_count,
            edges,
            connected,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> GraphEdge {
        self.edges[id]
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Maximum incident edge weight per vertex (0 for isolated vertices).
    pub fn max_incident_weights(&self) -> Vec<f64> {
        let mut best = vec![0.0_f64; self.vertex_count];
        for e in &self.edges {
            best[e.u] = best[e.u].max(e.weight);
            best[e.v] = best[e.v].max(e.weight);
        }
        best
    }
}

fn is_connected(vertex_count: usize, edges: &[GraphEdge]) -> bool {
    if vertex_count <= 1 {
        return true;
    }
    let mut sets = UnionFind::new(vertex_count);
    let mut components = vertex_count;
    for e in edges {
        if sets.union(e.u, e.v) {
            components -= 1;
        }
    }
    components == 1
}

/// A permutation of element ids `0..count`; position `i` holds the id of
/// the `i`-th arrival.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrivalOrder(Vec<usize>);

impl ArrivalOrder {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &id in &order {
            if id >= order.len() || std::mem::replace(&mut seen[id], true) {
                return Err(Error::Validation(format!(
                    "arrival order is not a permutation of 0..{}",
                    order.len()
                )));
            }
        }
        Ok(ArrivalOrder(order))
    }

    pub fn identity(count: usize) -> Self {
        ArrivalOrder((0..count).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

impl std::ops::Index<usize> for ArrivalOrder {
    type Output = usize;

    fn index(&self, pos: usize) -> &usize {
        &self.0[pos]
    }
}

/// Uniformly random arrival order, fully determined by the rng state.
pub fn sample_arrival_order<R: Rng + ?Sized>(count: usize, rng: &mut R) -> ArrivalOrder {
    let mut ids: Vec<usize> = (0..count).collect();
    ids.shuffle(rng);
    ArrivalOrder(ids)
}

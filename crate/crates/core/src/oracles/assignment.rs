//! Exact maximum-weight bipartite matching by successive shortest paths.
//!
//! Rows are inserted one at a time; every insertion runs one Dijkstra search
//! over reduced costs and keeps the current matching optimal for the rows
//! inserted so far. Each row owns a private zero-weight "unmatched" column,
//! so any row can always be placed and rows never need to outnumber columns.
//!
//! Ties are resolved deterministically: the heap orders by distance and then
//! by column index, and a tentative distance is only replaced by a strictly
//! smaller one. Two solvers fed the same row sequence therefore produce
//! bit-identical matchings.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    dist: f64,
    col: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    // Reversed so that `BinaryHeap` pops the smallest distance, then the smallest column.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.col.cmp(&self.col))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub struct IncrementalAssignment {
    cols: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    row_pot: Vec<f64>,
    // Real columns first, then one private dummy column per row.
    col_pot: Vec<f64>,
    col_owner: Vec<Option<usize>>,
    row_col: Vec<usize>,
    total: f64,
    // Dijkstra scratch, reset lazily through `touched`.
    dist: Vec<f64>,
    prev: Vec<usize>,
    done: Vec<bool>,
    touched: Vec<usize>,
}

impl IncrementalAssignment {
    /// Solver over `cols` real columns and no rows yet.
    pub fn new(cols: usize) -> Self {
        IncrementalAssignment {
            cols,
            adjacency: Vec::new(),
            row_pot: Vec::new(),
            col_pot: vec![0.0; cols],
            col_owner: vec![None; cols],
            row_col: Vec::new(),
            total: 0.0,
            dist: vec![f64::INFINITY; cols],
            prev: vec![usize::MAX; cols],
            done: vec![false; cols],
            touched: Vec::new(),
        }
    }

    pub fn row_count(&self) -> usize {
        self.adjacency.len()
    }

    fn dummy(&self, row: usize) -> usize {
        self.cols + row
    }

    fn reduced(&self, row: usize, col: usize, weight: f64) -> f64 {
        (-weight - self.row_pot[row] - self.col_pot[col]).max(0.0)
    }

    fn touch(&mut self, col: usize) {
        if self.dist[col].is_infinite() && !self.done[col] {
            self.touched.push(col);
        }
    }

    fn relax_from(&mut self, row: usize, base: f64, heap: &mut BinaryHeap<HeapEntry>) {
        let dummy = self.dummy(row);
        for idx in 0..=self.adjacency[row].len() {
            let (col, weight) = if idx < self.adjacency[row].len() {
                self.adjacency[row][idx]
            } else {
                (dummy, 0.0)
            };
            if self.done[col] {
                continue;
            }
            let candidate = base + self.reduced(row, col, weight);
            if candidate < self.dist[col] {
                self.touch(col);
                self.dist[col] = candidate;
                self.prev[col] = row;
                heap.push(HeapEntry {
                    dist: candidate,
                    col,
                });
            }
        }
    }

    /// Inserts a row with edges `(column, weight)` and re-optimizes.
    ///
    /// Weights may be any finite reals; a row whose best option is negative
    /// stays on its private dummy column.
    pub fn add_row(&mut self, mut edges: Vec<(usize, f64)>) {
        edges.sort_by_key(|&(col, _)| col);
        edges.dedup_by_key(|&mut (col, _)| col);
        debug_assert!(edges.iter().all(|&(col, w)| col < self.cols && w.is_finite()));

        let row = self.adjacency.len();
        let dummy = self.cols + row;
        self.adjacency.push(edges);
        self.col_pot.push(0.0);
        self.col_owner.push(None);
        self.dist.push(f64::INFINITY);
        self.prev.push(usize::MAX);
        self.done.push(false);
        self.row_col.push(dummy);

        let start = self.adjacency[row]
            .iter()
            .map(|&(col, w)| -w - self.col_pot[col])
            .fold(0.0 - self.col_pot[dummy], f64::min);
        self.row_pot.push(start);

        let mut heap = BinaryHeap::new();
        let mut finalized: Vec<usize> = Vec::new();
        self.relax_from(row, 0.0, &mut heap);
        let target = loop {
            let HeapEntry { dist, col } = heap
                .pop()
                .expect("private dummy column keeps every row placeable");
            if self.done[col] || dist > self.dist[col] {
                continue;
            }
            self.done[col] = true;
            finalized.push(col);
            match self.col_owner[col] {
                None => break col,
                Some(owner) => self.relax_from(owner, dist, &mut heap),
            }
        };

        let reach = self.dist[target];
        self.row_pot[row] += reach;
        for &col in &finalized {
            let delta = reach - self.dist[col];
            self.col_pot[col] -= delta;
            if let Some(owner) = self.col_owner[col] {
                self.row_pot[owner] += delta;
            }
        }

        let mut col = target;
        loop {
            let owner = self.prev[col];
            let previous = self.row_col[owner];
            self.col_owner[col] = Some(owner);
            self.row_col[owner] = col;
            if owner == row {
                break;
            }
            col = previous;
        }

        for col in self.touched.drain(..) {
            self.dist[col] = f64::INFINITY;
            self.done[col] = false;
        }
        for &col in &finalized {
            self.dist[col] = f64::INFINITY;
            self.done[col] = false;
        }

        self.total = (0..self.adjacency.len())
            .filter_map(|r| self.weight_of(r))
            .sum();
    }

    fn weight_of(&self, row: usize) -> Option<f64> {
        let col = self.row_col[row];
        if col >= self.cols {
            return None;
        }
        let adj = &self.adjacency[row];
        let idx = adj.binary_search_by_key(&col, |&(c, _)| c).ok()?;
        Some(adj[idx].1)
    }

    /// Real column assigned to `row`, or `None` when it sits on its dummy.
    pub fn assigned(&self, row: usize) -> Option<usize> {
        let col = self.row_col[row];
        (col < self.cols).then_some(col)
    }

    /// `(row, column, weight)` for every row placed on a real column.
    pub fn pairs(&self) -> Vec<(usize, usize, f64)> {
        (0..self.adjacency.len())
            .filter_map(|row| {
                let col = self.assigned(row)?;
                Some((row, col, self.weight_of(row)?))
            })
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(rows: &[Vec<(usize, f64)>], cols: usize) -> f64 {
        fn go(rows: &[Vec<(usize, f64)>], used: &mut Vec<bool>, idx: usize) -> f64 {
            if idx == rows.len() {
                return 0.0;
            }
            let mut best = go(rows, used, idx + 1);
            for &(col, w) in &rows[idx] {
                if !used[col] {
                    used[col] = true;
                    best = best.max(w + go(rows, used, idx + 1));
                    used[col] = false;
                }
            }
            best
        }
        go(rows, &mut vec![false; cols], 0)
    }

    #[test]
    fn diagonal_instance() {
        let mut solver = IncrementalAssignment::new(2);
        solver.add_row(vec![(0, 3.0), (1, 1.0)]);
        solver.add_row(vec![(0, 1.0), (1, 3.0)]);
        assert_eq!(solver.total_weight(), 6.0);
        assert_eq!(solver.assigned(0), Some(0));
        assert_eq!(solver.assigned(1), Some(1));
    }

    #[test]
    fn more_rows_than_columns() {
        let mut solver = IncrementalAssignment::new(1);
        solver.add_row(vec![(0, 2.0)]);
        solver.add_row(vec![(0, 5.0)]);
        solver.add_row(vec![(0, 1.0)]);
        assert_eq!(solver.total_weight(), 5.0);
        assert_eq!(solver.assigned(0), None);
        assert_eq!(solver.assigned(1), Some(0));
    }

    #[test]
    fn negative_edges_stay_unmatched() {
        let mut solver = IncrementalAssignment::new(1);
        solver.add_row(vec![(0, -1.0)]);
        assert_eq!(solver.assigned(0), None);
        assert_eq!(solver.total_weight(), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn every_prefix_is_optimal(
            cols in 1usize..6,
            raw in proptest::collection::vec(proptest::collection::vec((0usize..6, 0u32..20), 0..6), 1..7),
        ) {
            let rows: Vec<Vec<(usize, f64)>> = raw
                .into_iter()
                .map(|r| {
                    let mut r: Vec<(usize, f64)> = r.into_iter().map(|(c, w)| (c % cols, w as f64)).collect();
                    r.sort_by_key(|e| e.0);
                    r.dedup_by_key(|e| e.0);
                    r
                })
                .collect();
            let mut solver = IncrementalAssignment::new(cols);
            for (k, row) in rows.iter().enumerate() {
                solver.add_row(row.clone());
                proptest::prop_assert_eq!(solver.total_weight(), brute_force(&rows[..=k], cols));
                let pairs = solver.pairs();
                let mut seen = vec![false; cols];
                for (_, col, _) in pairs {
                    proptest::prop_assert!(!seen[col]);
                    seen[col] = true;
                }
            }
        }
    }
}

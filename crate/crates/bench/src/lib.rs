//! Criterion benchmarks for `selection-core`; see `benches/`.

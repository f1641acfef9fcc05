//! Criterion benchmarks for holeburn-core live in `benches/`.

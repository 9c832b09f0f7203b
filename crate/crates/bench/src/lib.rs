//! Criterion benchmarks for hazgate live in `benches/`.

//! Criterion benchmarks for the planner; see `benches/planner.rs`.

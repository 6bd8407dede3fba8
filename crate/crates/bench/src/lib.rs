//! Benchmark helpers; see the `benches/` targets.

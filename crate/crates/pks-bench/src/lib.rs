//! Benchmark-only crate; the benchmarks live in `benches/solver.rs`.

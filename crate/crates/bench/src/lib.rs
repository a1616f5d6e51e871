//! Criterion benchmarks for the vortonlab crates; see `benches/`.

//! Criterion benchmarks for `hhmat`; see `benches/`. Run with
//! `cargo bench -p hhmat-bench`.

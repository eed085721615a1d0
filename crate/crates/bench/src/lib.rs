//! Benchmark-only crate; see benches/bench_main.rs.

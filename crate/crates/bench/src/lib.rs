//! Benchmark harness crate; see `benches/core.rs`.

//! Criterion benchmarks for the `synpg` crate; see `benches/`.

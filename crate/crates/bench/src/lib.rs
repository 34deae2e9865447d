//! Benchmark fixtures; see `benches/kernels.rs`.

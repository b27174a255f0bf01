//! Criterion benchmarks for the numerical kernels of `advmanifold`; see `benches/kernels.rs`.

//! Criterion benchmarks for the hot paths of `morphogen`: network
//! evaluation, the growth step and its passes, and canopy rasterization.
//! Run with `cargo bench -p morphogen-bench`.

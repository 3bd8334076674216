//! Benchmark-only crate; the measurements live in `benches/kernels.rs`.
//! Kept as a separate workspace member so the library crate's build does
//! not pull in criterion.

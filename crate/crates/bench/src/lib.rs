//! Criterion benchmarks for `twinbeam-core`; see `benches/`.

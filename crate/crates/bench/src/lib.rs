//! Criterion benchmarks for the ABC parser and validators; see `benches/`.

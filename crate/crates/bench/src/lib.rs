//! Criterion benchmarks for `wavepacket-core` live under `benches/`.

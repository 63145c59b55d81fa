//! Criterion benchmarks for the darcylab solvers; see `benches/solvers.rs`.

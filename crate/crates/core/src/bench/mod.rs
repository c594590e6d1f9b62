//! Benchmark orchestration.

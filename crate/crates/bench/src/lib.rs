//! Placeholder library; the crate exists for its benchmarks.

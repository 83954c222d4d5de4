//! Criterion benches for the core routines live under benches/; this
//! crate carries no library code.

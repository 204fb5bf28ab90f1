//! Acceptance suite for the `lrbas` crate; the checks live in
//! `tests/acceptance.rs` and run with `cargo test -p lrbas-acceptance`.

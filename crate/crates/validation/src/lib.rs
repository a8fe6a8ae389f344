//! Acceptance checks for `capprop` live in `tests/acceptance.rs`.

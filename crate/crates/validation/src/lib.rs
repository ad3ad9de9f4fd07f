//! Acceptance suite for `ais-anomaly`; see `tests/acceptance.rs`.

//! Truncated Smoluchowski coagulation models and their assumption audit.
//!
//! Pairs whose combined size exceeds the truncation level do not interact, so
//! collisions only move mass inside `1..=K`.

mod audit;
mod kernel;
mod model;

pub use audit::{audit_assumptions, AuditReport, CheckResult, Witness, AUDIT_SLACK, CHECK_NAMES};
pub use kernel::{KernelFamily, KernelSpec, RateTable};
pub use model::{
    default_envelopes, raw_delta, CollisionModel, DefaultEnvelopes, Envelope, Lambda1Choice,
    ModelSpec, DELTA_SLACK,
};

//! Prompt optimization for black-box chat models that holds up under
//! distribution shift.
//!
//! The central problem: a prompt tuned on data from one distribution is often
//! deployed on inputs from another (different wording, different label
//! balance), and its quality quietly degrades. This crate provides, end to
//! end:
//!
//! - dataset handling with deterministic splits, sampling, and label
//!   corruption ([`data`]);
//! - diagnostics that quantify how far two datasets are apart ([`shift`]);
//! - string normalization and task scoring ([`task_metrics`]);
//! - interchangeable chat-model backends — live HTTP, scripted, or replayed
//!   from a cache ([`backend`]);
//! - prompt search from demonstrations with ensemble voting ([`optimizer`]);
//! - the shift-robust pipeline that pseudo-labels unlabeled deployment inputs
//!   and re-optimizes on the mixture ([`gpo`]);
//! - a harness that turns all of the above into repeated, seeded experiments
//!   with stable reports ([`harness`], [`report`]).
//!
//! Every random choice flows from explicit seeds, so a scripted or cached run
//! is reproducible byte for byte.

pub mod backend;
pub mod data;
pub mod error;
pub mod gpo;
pub mod harness;
pub mod optimizer;
pub mod report;
pub mod shift;
pub mod task_metrics;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};

//! Desk-scale weak-to-strong generalization laboratory.
//!
//! Weak supervisors label held-out data for stronger students, four student
//! training regimes transfer capability, a debate layer scores explanations,
//! and a metrics stack measures how much of the weak-to-strong gap is
//! recovered.
//!
//! Module map:
//! - [`taskgen`]: synthetic task suites, the tic-tac-toe best-move task and
//!   leakage-free grouped splitting.
//! - [`modelkit`]: soft classifiers with a capacity ladder, losses, training,
//!   gradient checks, activations and linear probes.
//! - [`w2s`]: weak supervisors, weak labels and the student regimes.
//! - [`facilitation`]: distillation into the weak architecture, explanations,
//!   debates and the alignment loop.
//! - [`metrics`]: PGR, agreement, paired t-tests, saliency, error taxonomy and
//!   ablation tables.
//! - [`runner`]: sweep configuration, orchestration, persistence and reports.

pub mod error;
pub mod facilitation;
pub mod metrics;
pub mod modelkit;
pub mod rng;
pub mod runner;
pub mod taskgen;
pub mod w2s;

pub use error::{LabError, Result};

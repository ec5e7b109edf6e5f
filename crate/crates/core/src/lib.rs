//! Translation of allocated quantitative safety objectives (QSOs) into
//! safety-related performance requirements for a machine-learnt detection
//! component.
//!
//! The library covers the full derivation pipeline:
//!
//! * [`safety_model`] — fault trees, QSO units, exposure normalization and
//!   budget allocation;
//! * [`detection`] — the binomial abstraction of k-of-n detection
//!   confirmation, threshold solving and detection-vector sizing;
//! * [`generalization`] — empirical/population risk, FNR/TPR and
//!   Hoeffding-based sample-size bounds;
//! * [`requirements`] — traceable requirement derivation, rendering and
//!   compliance checking;
//! * [`simulation`] — a Monte Carlo oracle for the confirmation model,
//!   including a correlated (Markov) sensitivity mode.
//!
//! With the default `parallel` feature, grid evaluation and simulation run
//! on rayon; results are identical to the sequential fallback.

pub mod detection;
pub mod error;
pub mod generalization;
pub mod probability;
pub mod requirements;
pub mod safety_model;
pub mod simulation;

pub use error::Error;

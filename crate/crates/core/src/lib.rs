//! Probability flux of an electron wave packet driven by a deterministic
//! electric field plus Gaussian white noise, computed along three
//! mutually cross-validating routes:
//!
//! * [`analytic`] — closed-form flux expressions for Gaussian packets and
//!   plane waves, including the noise-averaged form;
//! * [`stochastic`] — Monte Carlo averaging of per-realization fluxes over
//!   sampled noise paths;
//! * [`tdse`] — a split-operator spectral solver for the dimensionless
//!   Schrödinger equation, used as the ground-truth oracle.
//!
//! [`fields`] supplies the deterministic field models and unit handling,
//! [`classical`] the stochastic-trajectory counterpart, and [`runner`] the
//! experiment pipelines behind the command-line interface.

pub mod analytic;
pub mod stochastic;
pub mod tdse;
pub mod classical;
pub mod error;
pub mod fields;
mod quad;

pub use error::{Error, Result};

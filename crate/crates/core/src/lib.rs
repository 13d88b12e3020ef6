//! Numerical laboratory for stopping theorems at random times that are not
//! stopping times.
//!
//! * [`laguerre`] / [`quadrature`]: Laguerre basis, Gauss rules, hat transform.
//! * [`tree`]: exact dyadic filtrations, the brute-force oracle.
//! * [`brownian`]: path samplers, local time and the `λ` process.
//! * [`gamma`]: closed forms around the last zero before time 1.
//! * [`phi`]: the martingales `E[φ(A_∞) | F_t]` and their identities.
//! * [`stats`]: Monte Carlo summaries and goodness-of-fit tests.
//! * [`harness`]: the experiment registry, reports and the `lab` runner.
pub mod brownian;
pub mod error;
pub mod gamma;
pub mod harness;
pub mod laguerre;
pub mod phi;
pub mod quadrature;
pub mod stats;
pub mod tree;

pub use error::{LabError, Result};

//! Approximately Gaussian replicator flows.
//!
//! A Gaussian `N(m, C)` is evolved by the replicator-derived mean/covariance
//! ODE, with the required expectations `E[f]`, `E[x_i f]`, `E[x_i x_j f]`
//! computed in closed form for polynomial-plus-sinusoid objectives, and the
//! ODE integrated with an adaptive Bogacki-Shampine 3(2) pair.

pub mod error;
pub mod flow;
pub mod linalg;
pub mod moments;
pub mod objective;
pub mod ode;
pub mod trace;

pub use error::{AgrfError, Result};

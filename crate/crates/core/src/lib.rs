//! Simulation and estimation laboratory for off-policy value estimation
//! from adaptively collected contextual-bandit data.
//!
//! The crate is organized around five layers:
//!
//! - [`instance`] — finite problem instances (context distribution, outcome
//!   kernel), evaluation functionals, behavior policies, and the adaptive
//!   data-generation procedure.
//! - [`estimators`] — the perturbed-IPW family, the oracle estimator, and
//!   the doubly-robust (AIPW) meta-estimator driven by an online learner.
//! - [`learners`] — online regression subroutines producing the outcome-model
//!   sequence, with regret accounting against best-fixed-in-hindsight
//!   comparators: projected OGD (tabular and linear), an aggregating
//!   forecaster for finite classes, and a relaxation-based generic forecaster.
//! - [`exactmath`] — exact enumeration of trajectory laws on finite
//!   instances, exact moments, weighted norms, divergences, and the
//!   TV-conditioning inequality.
//! - [`lowerbound`] — Le Cam two-point constructions certifying local
//!   minimax lower bounds: tilted context measures and perturbed Gaussian
//!   outcome kernels.
//!
//! The [`harness`] module ties everything together: experiment configs,
//! Monte Carlo replication with per-replication random streams, exact
//! bound checks, and JSON/CSV reporting. The [`checks`] module holds the
//! individual identity and bound verifications the harness can run.

pub mod checks;
pub mod error;
pub mod estimators;
pub mod exactmath;
pub mod harness;
pub mod instance;
pub mod learners;
pub mod lowerbound;
pub mod rng;
pub mod table;
pub mod tol;

pub use error::{Error, Result};
pub use table::Table;

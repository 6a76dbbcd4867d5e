//! Optimal parameter estimation for qubit and generalized Pauli channels.
//!
//! The crate is organised bottom-up:
//!
//! - [`basis`]: orthonormal Hermitian operator bases, coefficient vectors for
//!   states and two-outcome POVM effects, subalgebra decompositions.
//! - [`channel`]: qubit Pauli channels with rotated axes and generalized Pauli
//!   channels acting blockwise on complementary subalgebras.
//! - [`fisher`]: Fisher information for measurement configurations, the
//!   closed-form optima and a finite-difference oracle.
//! - [`optimizer`]: multi-start projected gradient ascent over the l1 ball of
//!   configuration vectors.
//! - [`estimator`]: frequency-based estimators for contractions and axes.
//! - [`simulator`]: seeded Monte Carlo harness with MSE reporting and sweeps.

pub mod basis;
pub mod channel;
pub mod error;
pub mod estimator;
pub mod fisher;
pub mod linalg;
pub mod optimizer;
pub mod simulator;

pub use error::{Error, Result};

//! Nonlocal viscous non-isothermal Cahn-Hilliard relaxation and its
//! isothermal non-viscous limit on rectangular Neumann domains.
//!
//! The crate is layered bottom-up: [`domain`] (grid, cosine basis, Neumann
//! Laplacian, norms), [`kernel`] (interaction kernel and fast truncated
//! convolution), [`potential`] (double-well family and hypothesis checkers),
//! [`dynamics`] (time steppers, lift, trajectory differences),
//! [`diagnostics`] (energies, residuals, Lyapunov functional) and
//! [`harness`] (configuration, persistence and the experiment campaigns
//! behind the `nlch` binary).

pub mod diagnostics;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod harness;
pub mod kernel;
pub mod par;
pub mod potential;

pub use domain::{Domain, Field};
pub use dynamics::{Params, State, Trajectory};
pub use error::{Error, Hypothesis, Result};
pub use kernel::{KernelData, KernelShape};
pub use par::Execution;
pub use potential::PotentialSpec;

//! Cost-optimal protection of weighted directed networks against SIS-type
//! spreading.
//!
//! Preventive resources lower a node's infection rate, corrective resources
//! raise its recovery rate. Both allocation problems (reach a target decay
//! rate at minimum cost, or maximise the decay rate under a budget) are cast
//! as geometric programs whose constraints encode the Perron-Frobenius
//! characterisation of the dominant eigenvalue of `diag(beta) A - diag(delta)`.
//!
//! Modules:
//! - [`netgraph`]: weighted digraphs, SCCs, dominant-eigenvector support, centralities.
//! - [`spectral`]: power iteration, effective epidemic eigenvalue, sensitivity.
//! - [`gp`]: posynomials, log-space convexification and an interior-point GP solver.
//! - [`allocate`]: rate- and budget-constrained allocation programs.
//! - [`dynamics`]: mean-field ODE, exact Markov marginals and stochastic simulation.
//! - [`io`]: parameter, cost-curve, allocation and trajectory files.

pub mod allocate;
pub mod dynamics;
pub mod error;
pub mod gp;
pub mod io;
pub mod netgraph;
pub mod spectral;

pub use error::{Error, Result};

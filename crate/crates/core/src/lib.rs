//! Finite-volume solvers for the obstacle-penalized nonlocal conservation law
//!
//! ```text
//! ∂t q + ∂x( V_ε(o - q) q U(W[q]) ) = 0,    W[q](x) = ∫_x^∞ γ(y - x) q(y) dy,
//! ```
//!
//! its local variant (`U(q)` in place of `U(W[q])`), and a viscous
//! reference solver, together with diagnostics for mass, total variation,
//! obstacle clearance, one-sided Lipschitz slopes and the coincidence set.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod flux;
pub mod grid;
pub mod hyperbolic;
pub mod io;
pub mod model;
pub mod nonlocal;
pub mod viscous;

pub use error::{Error, Result};
pub use grid::{sample_function, Grid1D, SampleMode, ScalarField};
pub use hyperbolic::{run, ObstacleSampling, RunResult, Scheme, SolverConfig};
pub use model::{validate, InitialDatum, KernelSpec, Locality, ModelSpec, ObstacleSpec, Penalization, VelocitySpec};
pub use nonlocal::{build_weights, eval_nonlocal, Extension, KernelWeights};
pub use viscous::{viscous_run, ViscousConfig, ViscousFlux, ViscousResult, ViscousScheme};

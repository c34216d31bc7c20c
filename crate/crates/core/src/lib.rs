//! Synthesis of forecast-driven ordering controllers that minimize the
//! worst-case peak order fluctuation of a single supply-chain vendor.
//!
//! The crate is layered bottom-up:
//!
//! - [`linalg`]: dense matrices, Jacobi eigensolver, Cholesky solves.
//! - [`sdp`]: a small log-det barrier solver for LMI-constrained programs.
//! - [`model`]: vendor parameters, steady state, stability and the shifted plant.
//! - [`synthesis`]: invariant-ellipsoid and peak-gain LMIs, the scalar
//!   search over the S-procedure multiplier, and controller extraction.
//! - [`simulate`]: closed-loop simulation under bounded disturbances and
//!   the peak and energy metrics.

pub mod linalg;
pub mod model;
pub mod sdp;
pub mod simulate;
pub mod synthesis;

pub use linalg::Matrix;
pub use model::{PlantMatrices, SteadyState, VendorParams};
pub use sdp::{SdpProblem, SdpSolution, SolveStatus, SolverOptions};

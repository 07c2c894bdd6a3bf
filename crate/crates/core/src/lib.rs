//! Simulation, exact moments and limit-theorem checks for a two-alternative
//! adoption process with random trend labels.
//!
//! Each step one newcomer picks A with probability `a + b * Y_n * N_n / T_n`,
//! where `Y_n` is +1, -1 or 0 with probabilities `alpha`, `beta` and the rest.
//! The effective reinforcement `theta = b (alpha - beta)` splits the long-run
//! behaviour into three regimes around `theta = 1/2`.
//!
//! ```
//! use odl::{ModelParams, moments};
//!
//! let p = ModelParams::with_theta(0.3, 0.2, 1, 1).unwrap();
//! assert!((moments::mean_n(&p, 1) - 1.4).abs() < 1e-12);
//! ```

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod io;
pub mod martingale;
pub mod model;
pub mod moments;
pub mod oracle;
pub mod params;
pub mod special;
pub mod stats;
pub mod theory;

pub use error::{OdlError, Result};
pub use model::{simulate_trajectory, Mode, Sample, StrideSpec, Trajectory, Walker};
pub use params::{validate_params, ModelParams, RawParams, Regime};

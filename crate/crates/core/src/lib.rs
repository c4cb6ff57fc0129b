//! Closed-form generalized Bayes shrinkage estimators for the mean matrix
//! and covariance matrix of a matrix-variate normal model, together with
//! unbiased risk estimates, dominance-condition checks, a Monte Carlo
//! posterior oracle and a risk-simulation harness.
//!
//! The model is `X ~ N_{m×p}(Θ, I_m ⊗ Σ)` independent of `S ~ W_p(n, Σ)`.

pub mod cli;
pub mod conditions;
pub mod decomp;
pub mod error;
pub mod estimators;
pub mod io;
pub mod linalg;
pub mod model;
pub mod posterior;
pub mod risk;
pub mod shrinkage;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{DataPair, ModelDims, Parameters, RngStream};
pub use shrinkage::ShrinkageFunction;

//! Optimal causal (Wiener) filters and their finite-sample approximations for
//! short- and long-memory stationary processes, with numerical checks of the
//! uniform Baxter inequalities and of the L1 and MSPE convergence rates.

pub mod error;
pub mod quadrature;
pub mod special;
pub mod process;
pub mod toeplitz;
pub mod predictor;
pub mod lm_expansion;
pub mod filter;
pub mod mspe;
pub mod experiment;

pub use error::{Error, Result};
pub use process::{
    ar_inf_coeffs, autocovariance, autocovariance_by_convolution, ma_inf_coeffs, weighted_norm, AutocovMethod,
    AutocovSeq, CoeffSeq, Memory, ProcessKind, ProcessSpec, TailModel,
};
pub use experiment::{
    baxter_grid_check, evaluate, parse_grid, rate_fit, run_experiment, ExperimentConfig, FitMode, RateFit, RateReport,
    ReportRow, Stages, Tolerances,
};
pub use filter::{
    bandpass_filter, explicit_filter, hhat_finite, hhat_infinite, identity_filter, polydecay_filter, shift_filter,
    FilterSpec, Summability,
};
pub use lm_expansion::{estimate_constants, LmConstants, SeriesExpansion};
pub use mspe::{mspe_bounds, sigma, sigma_tilde};
pub use predictor::{finite_predictor_coeffs, infinite_predictor_coeffs, PredictorCoeffs};

//! Priors, likelihood tables, the optimal linear estimator and its Bayesian
//! mean squared error, detection noise, and the Wineland squeezing parameter.

mod likelihood;
mod noise;
mod prior;
mod squeezing;

pub use likelihood::{
    bmse, bmse_with_estimator, build_likelihood, evaluate, mse_profile, optimal_linear_gain,
    profile_grid, BmseReport, LikelihoodTable, LinearEstimator, DEGENERATE_GAIN_THRESHOLD,
};
pub use noise::detection_noise_convolve;
pub use prior::{gaussian_prior, Prior, PriorKind, DEFAULT_NODES};
pub use squeezing::wineland;

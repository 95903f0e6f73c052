//! Derivative-free optimization of squeezing times against the BMSE, and the
//! prior-width and sequence-order sweeps built on it.

mod simplex;
mod squeezing;
mod sweep;
mod template;

pub use simplex::{best_trace, multistart, nelder_mead, OptimizerConfig, SearchSpace, StartTrace};
pub use squeezing::{squeezing_scan, squeezing_trace, SqueezingTrace};
pub use sweep::{
    minimize_bmse, minimize_objective, sweep_order, Evaluator, sweep_prior, FrontierCurve, FrontierPoint, FrontierTable, OptResult,
    OrderRow,
};
pub use template::{default_time_bound, Template, REFERENCE_TIME_BOUND};

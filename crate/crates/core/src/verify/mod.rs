//! Residuals, reference solutions, error norms and convergence rates.

pub mod checks;
pub mod l2;
pub mod maslov;
pub mod rate;
pub mod reference;
pub mod residual;
pub mod sweep;

pub use l2::{l2_error_curve, l2_on_cross_section};
pub use rate::{fit_rate, RateFit};
pub use reference::{reference_solve, solve_initial_value_problem, ReferenceParams};
pub use residual::{residual_sup, tube_samples, Sample, SampleParams};
pub use sweep::{run_sweep, Rate, SweepEntry, SweepParams, SweepResult};

//! Observable accumulation, reference values and convergence fitting.

mod histogram;
mod oracle;
mod sampling;
mod slope;

pub use histogram::Histogram;
pub use oracle::ReferenceOracle;
pub use sampling::{
    default_burn_in, ensemble, ensemble_observable, standard_error, step_count, time_average,
    time_average_observable, Accumulator, EnsembleRun, Estimate, RunConfig, TimeAverageRun, WeightedMoments,
    DIVERGENCE_CHECK_INTERVAL,
};
pub use slope::{fit_slope, ConvergenceRecord, SlopeFit};

/// `(1/M) Σᵢ |ωᵢ − ω̂ᵢ|` between reference bin masses and a histogram.
pub fn l1_bin_error(est: &Histogram, masses: &[f64]) -> crate::Result<f64> {
    est.l1_error(masses)
}

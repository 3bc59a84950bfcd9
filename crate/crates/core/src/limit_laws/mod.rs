//! Limiting laws of the symmetry statistics and the analytic power of the
//! chi-square test.

mod chisq;
mod drift;
mod omega_limit;
mod quadrature;

pub use chisq::{
    asymptotic_power, chisq_cdf, chisq_quantile, noncentral_chisq_cdf, noncentral_chisq_quantile,
    NoncentralSpec,
};
pub use drift::{
    cell_probs, delta_cells, delta_shift, drift_delta, expected_shifted_cdf, noncentrality,
    robustness_bound, ChiSqAnalysisInput, DriftSpec,
};
pub use omega_limit::{
    omega_limit_quantile, omega_limit_sample, CriticalValueCache, LimitSimConfig, CACHE_DIR_ENV,
    OMEGA_CRITICAL_SEED,
};
pub use quadrature::gauss_legendre;

pub(crate) use omega_limit::upper_quantile;

//! Least-squares fitting, residuals and the residual EDF.

use nalgebra::{DMatrix, DVector};

use crate::ar_process::Series;
use crate::error::{Error, Result};

const SINGULARITY_TOL: f64 = 1e-12;

/// Residuals `ε̂₁..ε̂ₙ` with a cached ascending copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    values: Vec<f64>,
    sorted: Vec<f64>,
}

impl ResidualSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSize("residual set must be non-empty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite residual {v}")));
        }
        let mut sorted = values.clone();
        // stable, so tied values keep their time order
        sorted.sort_by(f64::total_cmp);
        Ok(ResidualSet { values, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `#{t : ε̂_t <= x}`.
    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|v| *v <= x)
    }

    /// `#{t : ε̂_t < x}`.
    pub fn count_lt(&self, x: f64) -> usize {
        self.sorted.partition_point(|v| *v < x)
    }

    /// Residual EDF `Ĝₙ(x) = n⁻¹ #{t : ε̂_t <= x}`.
    pub fn edf(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.len() as f64
    }

    pub fn negated(&self) -> ResidualSet {
        ResidualSet::new(self.values.iter().map(|v| -v).collect())
            .expect("negation keeps values finite")
    }
}

pub fn edf_eval(res: &ResidualSet, x: f64) -> f64 {
    res.edf(x)
}

/// A rule mapping an observed path to AR coefficient estimates.
pub trait Estimator: Sync {
    fn estimate(&self, series: &Series) -> Result<Vec<f64>>;

    fn name(&self) -> &'static str;
}

/// Ordinary least squares on the lagged design.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ols;

impl Estimator for Ols {
    fn estimate(&self, series: &Series) -> Result<Vec<f64>> {
        ols_estimate(series, series.order())
    }

    fn name(&self) -> &'static str {
        "ols"
    }
}

/// Minimizes `Σ_t (u_t - β₁u_{t-1} - … - β_p u_{t-p})²` over `t = 1..n`.
///
/// Solved by Householder QR of the `n × p` lag matrix, which yields the
/// normal-equations solution without forming `XᵀX`.
pub fn ols_estimate(series: &Series, p: usize) -> Result<Vec<f64>> {
    if p != series.order() {
        return Err(Error::InvalidParameter(format!(
            "order {p} does not match presample length {}",
            series.order()
        )));
    }
    let n = series.n();
    let u = series.values();
    let design = DMatrix::from_fn(n, p, |i, j| u[i + p - 1 - j]);
    let response = DVector::from_iterator(n, u[p..].iter().copied());

    let scale = (0..p)
        .map(|j| design.column(j).norm_squared())
        .fold(0.0, f64::max);
    let qr = design.qr();
    let r = qr.r();
    let min_pivot = (0..p)
        .map(|j| r[(j, j)] * r[(j, j)])
        .fold(f64::INFINITY, f64::min);
    let ratio = if scale > 0.0 { min_pivot / scale } else { 0.0 };
    if !(ratio > SINGULARITY_TOL) {
        return Err(Error::DegenerateDesign { ratio });
    }

    let mut qty = response;
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let beta = r
        .solve_upper_triangular(&head)
        .ok_or(Error::DegenerateDesign { ratio })?;
    Ok(beta.iter().copied().collect())
}

/// `ε̂_t = u_t - Σ_j β_j u_{t-j}` for `t = 1..n`.
pub fn residuals(series: &Series, coeffs: &[f64]) -> Result<ResidualSet> {
    let p = series.order();
    if coeffs.len() != p {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for a series with presample length {p}",
            coeffs.len()
        )));
    }
    let u = series.values();
    let values = (p..u.len())
        .map(|t| {
            u[t] - coeffs
                .iter()
                .enumerate()
                .map(|(j, b)| b * u[t - 1 - j])
                .sum::<f64>()
        })
        .collect();
    ResidualSet::new(values)
}

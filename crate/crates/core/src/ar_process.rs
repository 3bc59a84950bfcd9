//! Stationary AR(p) paths and the gross-error contamination scheme.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::innovation::{effective_weight, DistModel, InnovationSampler};

/// Spectral radius must stay below `1 - STATIONARITY_MARGIN`.
pub const STATIONARITY_MARGIN: f64 = 1e-8;

pub fn default_burn_in(p: usize) -> usize {
    1000.max(50 * p)
}

/// Coefficients `β₁..β_p` of a stationary autoregression.
#[derive(Debug, Clone, PartialEq)]
pub struct ArParams {
    coeffs: Vec<f64>,
}

impl ArParams {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if !is_stationary(&coeffs)? {
            return Err(Error::InvalidParameter(format!(
                "coefficients {coeffs:?} are not stationary (spectral radius {:.12})",
                spectral_radius(&coeffs)
            )));
        }
        Ok(ArParams { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

fn check_coeffs(coeffs: &[f64]) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("AR order must be >= 1".into()));
    }
    if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite AR coefficient {c}"
        )));
    }
    Ok(())
}

// Schur-Cohn step-down: every root of x^p - Σ a_j x^(p-j) lies strictly
// inside the unit circle iff each reflection coefficient has |κ| < 1.
fn roots_inside_unit_circle(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let m = a.len() - 1;
        let d = 1.0 - k * k;
        a = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / d).collect();
    }
    true
}

// roots of the companion polynomial all have modulus < r
fn radius_below(coeffs: &[f64], r: f64) -> bool {
    let mut scale = 1.0;
    let scaled: Vec<f64> = coeffs
        .iter()
        .map(|&b| {
            scale /= r;
            b * scale
        })
        .collect();
    scaled.iter().all(|x| x.is_finite()) && roots_inside_unit_circle(&scaled)
}

/// Spectral radius of the companion matrix of `coeffs`, by bisection on the
/// step-down stability test.
pub fn spectral_radius(coeffs: &[f64]) -> f64 {
    match coeffs.len() {
        0 => return 0.0,
        1 => return coeffs[0].abs(),
        _ => {}
    }
    if coeffs.iter().all(|&b| b == 0.0) {
        return 0.0;
    }
    // Cauchy bound
    let mut hi = 1.0 + coeffs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radius_below(coeffs, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn is_stationary(coeffs: &[f64]) -> Result<bool> {
    check_coeffs(coeffs)?;
    Ok(radius_below(coeffs, 1.0 - STATIONARITY_MARGIN))
}

/// An observed path `u_{1-p}, …, u_n`: `p` presample values then `n` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    p: usize,
}

impl Series {
    pub fn new(presample: Vec<f64>, obs: Vec<f64>) -> Result<Self> {
        let p = presample.len();
        let mut values = presample;
        values.extend(obs);
        Self::from_values(values, p)
    }

    /// Splits a flat path whose first `p` entries are the presample.
    pub fn from_values(values: Vec<f64>, p: usize) -> Result<Self> {
        if values.len() < p {
            return Err(Error::InvalidSize(format!(
                "path of length {} is shorter than p = {p}",
                values.len()
            )));
        }
        let n = values.len() - p;
        if n < p + 1 {
            return Err(Error::InvalidSize(format!(
                "need n >= p + 1 = {} observations, got {n}",
                p + 1
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite path value {v}"
            )));
        }
        Ok(Series { values, p })
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn presample(&self) -> &[f64] {
        &self.values[..self.p]
    }

    pub fn obs(&self) -> &[f64] {
        &self.values[self.p..]
    }

    pub fn n(&self) -> usize {
        self.values.len() - self.p
    }

    /// The whole path in time order, presample first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Iterates the recursion from a zero state, discards `burn_in` values and
/// keeps the next `p + n` as presample and observations.
pub fn simulate_stationary<S: InnovationSampler>(
    params: &ArParams,
    innov: &S,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Series> {
    let p = params.order();
    if n < p + 1 {
        return Err(Error::InvalidSize(format!(
            "need n >= p + 1 = {}, got {n}",
            p + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = params.coeffs();
    let total = burn_in + p + n;
    let mut path = vec![0.0; p + total];
    for t in p..p + total {
        let ar: f64 = beta
            .iter()
            .enumerate()
            .map(|(j, b)| b * path[t - 1 - j])
            .sum();
        path[t] = ar + innov.draw(&mut rng);
    }
    Series::from_values(path.split_off(p + burn_in), p)
}

/// Outlier intensity `gamma` and outlier law `Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationModel {
    gamma: f64,
    outlier_dist: DistModel,
}

impl ContaminationModel {
    pub fn new(gamma: f64, outlier_dist: DistModel) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        outlier_dist.validate()?;
        Ok(ContaminationModel {
            gamma,
            outlier_dist,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn outlier_dist(&self) -> &DistModel {
        &self.outlier_dist
    }

    /// Per-point contamination probability `min{1, gamma/sqrt(n)}`.
    pub fn probability(&self, n: usize) -> Result<f64> {
        effective_weight(self.gamma, n)
    }
}

/// Adds an independent outlier to each of the `p + n` points with
/// probability `min{1, gamma/sqrt(n)}`.
pub fn contaminate(series: &Series, model: &ContaminationModel, seed: u64) -> Result<Series> {
    let prob = model.probability(series.n())?;
    let mut values = series.values().to_vec();
    if prob > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in values.iter_mut() {
            let flag: f64 = rng.random();
            if flag < prob {
                *v += model.outlier_dist.draw(&mut rng);
            }
        }
    }
    Series::from_values(values, series.order())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn normal() -> DistModel {
        DistModel::normal(1.0).unwrap()
    }

    fn var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        (m, v)
    }

    #[test]
    fn stationarity_examples() {
        assert!(is_stationary(&[0.5]).unwrap());
        assert!(!is_stationary(&[1.0]).unwrap());
        assert!(!is_stationary(&[0.5, 0.5]).unwrap());
        assert!(is_stationary(&[0.5, -0.3]).unwrap());
        assert!(!is_stationary(&[1.0 - 1e-9]).unwrap());
        assert!(matches!(
            is_stationary(&[]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(is_stationary(&[f64::NAN]).is_err());
        assert!(ArParams::new(vec![1.2]).is_err());
    }

    #[test]
    fn spectral_radius_matches_known_roots() {
        // x^2 - 0.5x - 0.5 = (x - 1)(x + 0.5)
        assert!((spectral_radius(&[0.5, 0.5]) - 1.0).abs() < 1e-10);
        // complex pair with modulus sqrt(0.81)
        assert!((spectral_radius(&[0.0, -0.81]) - 0.9).abs() < 1e-10);
        // (x - 0.9)(x - 0.5)(x + 0.2) = x^3 - 1.2x^2 + 0.17x + 0.09
        assert!((spectral_radius(&[1.2, -0.17, -0.09]) - 0.9).abs() < 1e-10);
        // p = 20, single nonzero lag: x^20 = 0.5 has all roots of modulus 0.5^(1/20)
        let mut c = vec![0.0; 20];
        c[19] = 0.5;
        let r = 0.5f64.powf(1.0 / 20.0);
        assert!((spectral_radius(&c) - r).abs() / r < 1e-10);
    }

    proptest! {
        #[test]
        fn radius_matches_quadratic_roots(b1 in -2.5f64..2.5, b2 in -1.5f64..1.5) {
            // x^2 - b1 x - b2
            let disc = b1 * b1 + 4.0 * b2;
            let r = if disc >= 0.0 {
                ((b1 + disc.sqrt()) / 2.0).abs().max(((b1 - disc.sqrt()) / 2.0).abs())
            } else {
                (-b2).sqrt()
            };
            prop_assert!((spectral_radius(&[b1, b2]) - r).abs() <= 1e-9 * r.max(1.0));
            if (r - 1.0).abs() > 1e-6 {
                prop_assert_eq!(is_stationary(&[b1, b2]).unwrap(), r < 1.0);
            }
        }
    }

    #[test]
    fn zero_innovations_give_zero_path() {
        let params = ArParams::new(vec![0.5]).unwrap();
        let zero = DistModel::point_mass(0.0).unwrap();
        let s = simulate_stationary(&params, &zero, 50, 10, 3).unwrap();
        assert!(s.values().iter().all(|v| *v == 0.0));
        assert_eq!(s.presample().len(), 1);
        assert_eq!(s.n(), 50);
    }

    #[test]
    fn white_noise_variance() {
        let params = ArParams::new(vec![0.0]).unwrap();
        let s = simulate_stationary(&params, &normal(), 100_000, 1000, 1).unwrap();
        let (_, v) = var(s.obs());
        // sd of the sample variance of normals: sqrt(2/n)
        assert!((v - 1.0).abs() <= 3.0 * (2.0 / 1e5f64).sqrt(), "{v}");
    }

    #[test]
    fn ar1_stationary_variance_and_autocorrelation() {
        let params = ArParams::new(vec![0.9]).unwrap();
        let n = 100_000;
        let s = simulate_stationary(&params, &normal(), n, default_burn_in(1), 2).unwrap();
        let (_, v) = var(s.obs());
        let target = 1.0 / (1.0 - 0.81);
        // serial dependence inflates the sample-variance sd to
        // sigma_u^2 * sqrt(2 (1 + b^2) / ((1 - b^2) n))
        let se = target * (2.0 * 1.81 / (0.19 * n as f64)).sqrt();
        assert!((v - target).abs() <= 3.0 * se, "{v} vs {target}");

        let params = ArParams::new(vec![0.5]).unwrap();
        let s = simulate_stationary(&params, &normal(), n, default_burn_in(1), 3).unwrap();
        let x = s.obs();
        let (m, v) = var(x);
        let r1 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (n as f64 * v);
        // Bartlett: var(r1) ~ (1 - b^2) / n
        assert!((r1 - 0.5).abs() <= 3.0 * (0.75 / n as f64).sqrt(), "{r1}");
    }

    #[test]
    fn simulation_is_reproducible() {
        let params = ArParams::new(vec![0.3, -0.2]).unwrap();
        let a = simulate_stationary(&params, &normal(), 500, 100, 42).unwrap();
        let b = simulate_stationary(&params, &normal(), 500, 100, 42).unwrap();
        let c = simulate_stationary(&params, &normal(), 500, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn simulation_size_errors() {
        let params = ArParams::new(vec![0.3, 0.1]).unwrap();
        assert!(matches!(
            simulate_stationary(&params, &normal(), 2, 0, 1),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn white_noise_path_matches_innovation_law() {
        // two-sample KS between the beta = 0 path and direct draws
        let params = ArParams::new(vec![0.0]).unwrap();
        let n = 20_000;
        let s = simulate_stationary(&params, &normal(), n, 0, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut a = s.obs().to_vec();
        let mut b: Vec<f64> = (0..n).map(|_| normal().draw(&mut rng)).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 - j as f64).abs() / n as f64);
        }
        // 0.1% critical value of the two-sample KS law
        let crit = 1.95 * (2.0 / n as f64).sqrt();
        assert!(d < crit, "{d} >= {crit}");
    }

    #[test]
    fn contamination_examples() {
        let params = ArParams::new(vec![0.5]).unwrap();
        let s = simulate_stationary(&params, &normal(), 1000, 100, 1).unwrap();
        let none = ContaminationModel::new(0.0, DistModel::point_mass(10.0).unwrap()).unwrap();
        assert_eq!(contaminate(&s, &none, 7).unwrap(), s);

        let small = Series::new(vec![0.0], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let all = ContaminationModel::new(2.0, DistModel::point_mass(10.0).unwrap()).unwrap();
        assert_eq!(all.probability(4).unwrap(), 1.0);
        let y = contaminate(&small, &all, 1).unwrap();
        assert_eq!(y.values(), &[10.0, 11.0, 12.0, 13.0, 14.0]);

        assert!(ContaminationModel::new(-1.0, DistModel::point_mass(1.0).unwrap()).is_err());
    }

    #[test]
    fn contamination_count_is_binomial() {
        let n = 10_000;
        let zero = Series::from_values(vec![0.0; n + 1], 1).unwrap();
        let model = ContaminationModel::new(5.0, DistModel::point_mass(10.0).unwrap()).unwrap();
        let prob = model.probability(n).unwrap();
        assert!((prob - 0.05).abs() < 1e-15);
        let y = contaminate(&zero, &model, 99).unwrap();
        let hits = y.obs().iter().filter(|v| **v != 0.0).count() as f64;
        let mean = n as f64 * prob;
        let sd = (n as f64 * prob * (1.0 - prob)).sqrt();
        assert!((hits - mean).abs() <= 3.0 * sd, "{hits}");
    }
}

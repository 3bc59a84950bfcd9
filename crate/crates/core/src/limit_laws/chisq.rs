use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Poisson mass left out of the noncentral mixture.
const POISSON_TAIL: f64 = 1e-12;

/// Degrees of freedom and noncentrality of a noncentral chi-square law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralSpec {
    pub m: usize,
    pub lambda2: f64,
}

impl NoncentralSpec {
    pub fn new(m: usize, lambda2: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "degrees of freedom must be >= 1".into(),
            ));
        }
        if !(lambda2.is_finite() && lambda2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noncentrality must be finite and >= 0, got {lambda2}"
            )));
        }
        Ok(NoncentralSpec { m, lambda2 })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        ncx2_cdf(self.m, self.lambda2, x)
    }
}

/// Central chi-square CDF, `P(m/2, x/2)`.
pub fn chisq_cdf(m: usize, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        0.0
    } else if x == f64::INFINITY {
        1.0
    } else {
        gamma_lr(0.5 * m as f64, 0.5 * x)
    }
}

fn ln_poisson(mu: f64, i: usize) -> f64 {
    -mu + i as f64 * mu.ln() - ln_gamma(i as f64 + 1.0)
}

// Poisson(λ²/2) mixture of central laws with m + 2i degrees of freedom,
// summed outward from the Poisson mode.
fn ncx2_cdf(m: usize, lambda2: f64, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if lambda2 == 0.0 {
        return chisq_cdf(m, x);
    }
    let mu = 0.5 * lambda2;
    let mode = mu.floor() as usize;

    let mut total = 0.0;
    // downward from the mode; w_{i-1}/w_i = i/mu
    let mut i = mode;
    loop {
        let w = ln_poisson(mu, i).exp();
        total += w * chisq_cdf(m + 2 * i, x);
        if i == 0 {
            break;
        }
        let r = i as f64 / mu;
        if r < 1.0 && w * r / (1.0 - r) < POISSON_TAIL {
            break;
        }
        i -= 1;
    }
    // upward; w_{i+1}/w_i = mu/(i+1), and the central CDF falls with df
    let mut i = mode + 1;
    loop {
        let w = ln_poisson(mu, i).exp();
        let c = chisq_cdf(m + 2 * i, x);
        total += w * c;
        let r = mu / (i as f64 + 2.0);
        if r < 1.0 && w * c * r / (1.0 - r) < POISSON_TAIL {
            break;
        }
        if w == 0.0 && i > mode + 10 {
            break;
        }
        i += 1;
    }
    total.clamp(0.0, 1.0)
}

/// Noncentral chi-square CDF `F_m(x, λ²)`.
pub fn noncentral_chisq_cdf(spec: NoncentralSpec, x: f64) -> Result<f64> {
    let spec = NoncentralSpec::new(spec.m, spec.lambda2)?;
    Ok(spec.cdf(x))
}

fn check_prob(prob: f64) -> Result<()> {
    if prob > 0.0 && prob < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "probability must lie in (0, 1), got {prob}"
        )))
    }
}

// Bisection on a continuous increasing CDF supported on (0, ∞).
fn invert_cdf(cdf: impl Fn(f64) -> f64, prob: f64, start: f64) -> f64 {
    let mut hi = start.max(1.0);
    while cdf(hi) < prob {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) < prob {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Central chi-square quantile with `m` degrees of freedom.
pub fn chisq_quantile(m: usize, prob: f64) -> Result<f64> {
    NoncentralSpec::new(m, 0.0)?;
    check_prob(prob)?;
    Ok(invert_cdf(|x| chisq_cdf(m, x), prob, m as f64))
}

pub fn noncentral_chisq_quantile(spec: NoncentralSpec, prob: f64) -> Result<f64> {
    let spec = NoncentralSpec::new(spec.m, spec.lambda2)?;
    check_prob(prob)?;
    Ok(invert_cdf(
        |x| spec.cdf(x),
        prob,
        spec.m as f64 + spec.lambda2,
    ))
}

/// Asymptotic power `1 - F_m(χ²_{1-α}(m), λ²)` of the chi-square test.
pub fn asymptotic_power(m: usize, alpha: f64, lambda2: f64) -> Result<f64> {
    check_prob(alpha)?;
    let spec = NoncentralSpec::new(m, lambda2)?;
    let crit = chisq_quantile(m, 1.0 - alpha)?;
    Ok(1.0 - spec.cdf(crit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // erf(x) = 2/√π e^{-x²} Σ 2ⁿ x^{2n+1} / (2n+1)!!, a series with positive terms
    fn erf(x: f64) -> f64 {
        if x < 0.0 {
            return -erf(-x);
        }
        if x > 26.0 {
            return 1.0;
        }
        let (mut term, mut sum) = (x, x);
        let mut n = 0.0;
        while term > 1e-17 * sum {
            n += 1.0;
            term *= 2.0 * x * x / (2.0 * n + 1.0);
            sum += term;
        }
        2.0 / PI.sqrt() * (-x * x).exp() * sum
    }
    use std::f64::consts::PI;

    // closed forms for small df, independent of the incomplete gamma routine
    fn chisq_cdf_closed(m: usize, x: f64) -> f64 {
        let s = (0.5 * x).sqrt();
        match m {
            1 => erf(s),
            2 => 1.0 - (-0.5 * x).exp(),
            3 => erf(s) - (2.0 * x / PI).sqrt() * (-0.5 * x).exp(),
            4 => 1.0 - (-0.5 * x).exp() * (1.0 + 0.5 * x),
            _ => unreachable!(),
        }
    }

    #[test]
    fn central_cdf_matches_closed_forms() {
        for m in 1..=4 {
            for i in 1..400 {
                let x = i as f64 * 0.05;
                let (a, b) = (chisq_cdf(m, x), chisq_cdf_closed(m, x));
                assert!(
                    (a - b).abs() <= 1e-10 * b.max(1e-300) + 1e-15,
                    "m={m} x={x}: {a} vs {b}"
                );
            }
        }
        assert!((chisq_cdf(1, 3.841459) - 0.95).abs() < 1e-6);
        assert_eq!(chisq_cdf(3, 0.0), 0.0);
        assert_eq!(chisq_cdf(3, -1.0), 0.0);
    }

    #[test]
    fn noncentral_cdf_zero_at_origin_and_central_at_zero_lambda() {
        let s = NoncentralSpec::new(2, 3.0).unwrap();
        assert_eq!(s.cdf(0.0), 0.0);
        assert_eq!(s.cdf(-4.0), 0.0);
        for x in [0.1, 1.0, 5.0, 20.0] {
            assert_eq!(NoncentralSpec::new(3, 0.0).unwrap().cdf(x), chisq_cdf(3, x));
        }
    }

    #[test]
    fn noncentral_cdf_one_df_closed_form() {
        // (Z + a)² <= x  <=>  -sqrt(x) - a <= Z <= sqrt(x) - a
        let phi = |z: f64| 0.5 * (1.0 + erf(z / 2f64.sqrt()));
        for &l2 in &[0.25, 1.0, 4.0, 30.0, 200.0] {
            let a = f64::sqrt(l2);
            let s = NoncentralSpec::new(1, l2).unwrap();
            for i in 1..100 {
                let x = i as f64 * (l2 + 10.0) / 50.0;
                let exact = phi(x.sqrt() - a) - phi(-x.sqrt() - a);
                assert!((s.cdf(x) - exact).abs() < 1e-10, "l2={l2} x={x}");
            }
        }
    }

    #[test]
    fn quantile_examples() {
        let q = chisq_quantile(1, 0.5).unwrap();
        // root of erf(sqrt(x/2)) = 0.5
        assert!((erf((0.5 * q).sqrt()) - 0.5).abs() < 1e-12);
        assert!((q - 0.454936).abs() < 1e-6);
        let q = chisq_quantile(3, 0.95).unwrap();
        assert!((chisq_cdf_closed(3, q) - 0.95).abs() < 1e-12);
        assert!((q - 7.814728).abs() < 1e-6);
        for m in 1..=4 {
            for p in [0.01, 0.5, 0.95, 0.99] {
                let q = chisq_quantile(m, p).unwrap();
                assert!((chisq_cdf(m, q) - p).abs() <= 1e-9);
            }
        }
        assert!(matches!(chisq_quantile(2, 1.0), Err(Error::Domain(_))));
        assert!(matches!(chisq_quantile(2, 0.0), Err(Error::Domain(_))));
        assert!(chisq_quantile(0, 0.5).is_err());
    }

    #[test]
    fn power_at_zero_noncentrality_is_alpha() {
        for m in 1..=6 {
            for alpha in [0.01, 0.05, 0.1] {
                assert!((asymptotic_power(m, alpha, 0.0).unwrap() - alpha).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn power_is_monotone_in_noncentrality() {
        let mut prev = 0.0;
        for i in 0..=200 {
            let w = asymptotic_power(3, 0.05, i as f64 * 0.1).unwrap();
            assert!(w >= prev - 1e-15);
            prev = w;
        }
        assert!(prev > 0.9);
    }

    #[test]
    fn power_for_one_cell_example() {
        // P(|Z + λ| > z_{0.975}) with λ² = (2/e - 1)²
        let l2 = (2.0 * (-1.0f64).exp() - 1.0).powi(2);
        let phi = |z: f64| 0.5 * (1.0 + erf(z / 2f64.sqrt()));
        let z = 1.959_963_984_540_054;
        let exact = 1.0 - (phi(z - l2.sqrt()) - phi(-z - l2.sqrt()));
        assert!((asymptotic_power(1, 0.05, l2).unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn large_noncentrality_does_not_underflow() {
        let s = NoncentralSpec::new(4, 3000.0).unwrap();
        assert!((s.cdf(3004.0) - 0.5).abs() < 0.05);
        assert!(s.cdf(2000.0) < 1e-6);
        assert!(s.cdf(4500.0) > 1.0 - 1e-6);
    }

    #[test]
    fn noncentral_quantile_inverts() {
        let s = NoncentralSpec::new(3, 2.5).unwrap();
        for p in [0.05, 0.5, 0.999] {
            let q = noncentral_chisq_quantile(s, p).unwrap();
            assert!((s.cdf(q) - p).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn lipschitz_in_lambda(m in 1usize..=10, x in 0.0f64..40.0, l1 in 0.0f64..5.0, l2 in 0.0f64..5.0) {
            let f1 = NoncentralSpec::new(m, l1 * l1).unwrap().cdf(x);
            let f2 = NoncentralSpec::new(m, l2 * l2).unwrap().cdf(x);
            prop_assert!((f1 - f2).abs() <= (2.0 / PI).sqrt() * (l1 - l2).abs() + 1e-8);
        }

        #[test]
        fn monotone_in_x_and_lambda(m in 1usize..=8, l in 0.0f64..20.0, x in 0.01f64..60.0, dx in 0.0f64..5.0, dl in 0.0f64..5.0) {
            let s = NoncentralSpec::new(m, l).unwrap();
            prop_assert!(s.cdf(x + dx) >= s.cdf(x) - 1e-14);
            let t = NoncentralSpec::new(m, l + dl).unwrap();
            prop_assert!(t.cdf(x) <= s.cdf(x) + 1e-14);
        }
    }
}

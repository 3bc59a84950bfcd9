//! Drift terms of the limiting laws: the local-alternative shift `δ(t)` of the
//! omega-square limit, the contamination shift `Δ(x, Π)` of the residual EDF,
//! and the resulting chi-square noncentrality.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::ar_process::ArParams;
use crate::error::{Error, Result};
use crate::innovation::DistModel;
use crate::symmetry_stats::CellPartition;

use super::quadrature::{gauss_legendre, integrate_unit};

const QUAD_NODES: usize = 256;

fn quad_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(QUAD_NODES))
}

/// Drift `δ(t) = ρ [Q(P⁻¹(t)) - t]` of the omega-square limit under a local
/// alternative.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub rho: f64,
    pub p_dist: DistModel,
    pub q_dist: DistModel,
}

impl DriftSpec {
    pub fn new(rho: f64, p_dist: DistModel, q_dist: DistModel) -> Result<Self> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho must be finite and >= 0, got {rho}"
            )));
        }
        p_dist.validate()?;
        q_dist.validate()?;
        if !p_dist.is_continuous() {
            return Err(Error::InvalidParameter(format!(
                "P must be continuous, got {}",
                p_dist
            )));
        }
        Ok(DriftSpec {
            rho,
            p_dist,
            q_dist,
        })
    }

    /// `δ(t)` on `[0, 1]`, using the one-sided limits at the endpoints.
    pub fn value(&self, t: f64) -> f64 {
        if self.rho == 0.0 {
            return 0.0;
        }
        if t <= 0.0 {
            let (lo, _) = self.p_dist.support();
            return self.rho * self.q_dist.cdf(lo);
        }
        if t >= 1.0 {
            let (_, hi) = self.p_dist.support();
            return self.rho * (self.q_dist.cdf(hi) - 1.0);
        }
        self.rho * (self.q_dist.cdf(self.p_dist.quantile_unchecked(t)) - t)
    }

    /// `δ(t) + δ(1 - t)` at the points `i / (grid - 1)`.
    pub fn symmetrized_on_grid(&self, grid: usize) -> Vec<f64> {
        let step = 1.0 / (grid - 1) as f64;
        let d: Vec<f64> = (0..grid).map(|i| self.value(i as f64 * step)).collect();
        (0..grid).map(|i| d[i] + d[grid - 1 - i]).collect()
    }
}

pub fn delta_shift(spec: &DriftSpec, t: f64) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("t must lie in (0, 1), got {t}")));
    }
    Ok(spec.value(t))
}

/// `E P(x + b ξ)` with `ξ ~ Π`: a finite sum for atoms, Gauss–Legendre on
/// the quantile scale for continuous parts.
pub fn expected_shifted_cdf(
    p_dist: &DistModel,
    x: f64,
    b: f64,
    pi_dist: &DistModel,
) -> Result<f64> {
    let value = match pi_dist {
        DistModel::PointMass { value } => p_dist.cdf(x + b * value),
        DistModel::TwoPoint { v1, w1, v2, w2 } => {
            w1 * p_dist.cdf(x + b * v1) + w2 * p_dist.cdf(x + b * v2)
        }
        DistModel::Mixture { components } => {
            let mut acc = 0.0;
            for c in components.iter().filter(|c| c.weight > 0.0) {
                acc += c.weight * expected_shifted_cdf(p_dist, x, b, &c.dist)?;
            }
            acc
        }
        _ => {
            let (nodes, weights) = quad_rule();
            integrate_unit(
                |u| p_dist.cdf(x + b * pi_dist.quantile_unchecked(u)),
                nodes,
                weights,
            )
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NumericIntegration(format!(
            "E P({x} + {b} ξ) is not finite for ξ ~ {pi_dist}"
        )))
    }
}

/// `Δ(x, Π) = Σ_{j=0}^{p} [E P(x + β_j ξ) - P(x)]` with `β₀ = -1`.
pub fn drift_delta(
    x: f64,
    coeffs: &ArParams,
    p_dist: &DistModel,
    pi_dist: &DistModel,
) -> Result<f64> {
    if x.is_infinite() {
        return Ok(0.0);
    }
    if !p_dist.is_continuous() {
        return Err(Error::InvalidParameter(format!(
            "P must be continuous, got {p_dist}"
        )));
    }
    let base = p_dist.cdf(x);
    let mut total = 0.0;
    for b in std::iter::once(-1.0).chain(coeffs.coeffs().iter().copied()) {
        total += expected_shifted_cdf(p_dist, x, b, pi_dist)? - base;
    }
    Ok(total)
}

/// Probabilities of `B_j⁺ = (x_{j-1}, x_j]` and `B_j⁻ = (-x_j, -x_{j-1}]`.
pub fn cell_probs(cells: &CellPartition, dist: &DistModel) -> (Vec<f64>, Vec<f64>) {
    (0..cells.m())
        .map(|j| {
            let (lo, hi) = cells.bounds(j);
            (dist.cdf(hi) - dist.cdf(lo), dist.cdf(-lo) - dist.cdf(-hi))
        })
        .unzip()
}

/// Everything the chi-square power formula depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSqAnalysisInput {
    pub cells: CellPartition,
    pub coeffs: ArParams,
    pub p_dist: DistModel,
    pub q_dist: DistModel,
    pub pi_dist: DistModel,
    pub rho: f64,
    pub gamma: f64,
}

impl ChiSqAnalysisInput {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho", self.rho), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        self.p_dist.validate()?;
        self.q_dist.validate()?;
        self.pi_dist.validate()?;
        let (plus, _) = cell_probs(&self.cells, &self.p_dist);
        if let Some((j, p)) = plus.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
            return Err(Error::InvalidPartition(format!(
                "null probability of positive cell {} is {p}; every cell needs p_j > 0",
                j + 1
            )));
        }
        Ok(())
    }

    /// Null probabilities `p_j⁺`; the diagonal of `𝒫` is twice these.
    pub fn null_probs(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(cell_probs(&self.cells, &self.p_dist).0)
    }
}

/// `δ_j(Π) = Δ(x_j) - Δ(x_{j-1}) - [Δ(-x_{j-1}) - Δ(-x_j)]`, `j = 1..m`.
pub fn delta_cells(input: &ChiSqAnalysisInput) -> Result<Vec<f64>> {
    input.validate()?;
    let delta = |x: f64| drift_delta(x, &input.coeffs, &input.p_dist, &input.pi_dist);
    (0..input.cells.m())
        .map(|j| {
            let (lo, hi) = input.cells.bounds(j);
            Ok(delta(hi)? - delta(lo)? - (delta(-lo)? - delta(-hi)?))
        })
        .collect()
}

/// `λ² = Σ_j [ρ(q_j⁺ - q_j⁻) + γ δ_j(Π)]² / (2 p_j⁺)`.
pub fn noncentrality(input: &ChiSqAnalysisInput) -> Result<f64> {
    let p_plus = input.null_probs()?;
    let (q_plus, q_minus) = cell_probs(&input.cells, &input.q_dist);
    let delta = if input.gamma > 0.0 {
        delta_cells(input)?
    } else {
        vec![0.0; input.cells.m()]
    };
    Ok((0..input.cells.m())
        .map(|j| {
            let shift = input.rho * (q_plus[j] - q_minus[j]) + input.gamma * delta[j];
            shift * shift / (2.0 * p_plus[j])
        })
        .sum())
}

/// `sqrt(2/π) · γ · |𝒫^{-1/2} δ(Π)|`, the bound on how far contamination can
/// move the asymptotic power.
pub fn robustness_bound(input: &ChiSqAnalysisInput) -> Result<f64> {
    let p_plus = input.null_probs()?;
    let delta = delta_cells(input)?;
    let norm2: f64 = delta
        .iter()
        .zip(&p_plus)
        .map(|(d, p)| d * d / (2.0 * p))
        .sum();
    Ok((2.0 / PI).sqrt() * input.gamma * norm2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit_laws::asymptotic_power;

    fn uniform() -> DistModel {
        DistModel::uniform(-1.0, 1.0).unwrap()
    }

    fn normal() -> DistModel {
        DistModel::normal(1.0).unwrap()
    }

    fn cexp() -> DistModel {
        DistModel::centered_exponential(1.0).unwrap()
    }

    fn ar(c: &[f64]) -> ArParams {
        ArParams::new(c.to_vec()).unwrap()
    }

    fn input(
        cuts: &[f64],
        coeffs: &[f64],
        p: DistModel,
        q: DistModel,
        pi: DistModel,
        rho: f64,
        gamma: f64,
    ) -> ChiSqAnalysisInput {
        ChiSqAnalysisInput {
            cells: CellPartition::new(cuts.to_vec()).unwrap(),
            coeffs: ar(coeffs),
            p_dist: p,
            q_dist: q,
            pi_dist: pi,
            rho,
            gamma,
        }
    }

    #[test]
    fn delta_shift_examples() {
        let s = DriftSpec::new(0.0, normal(), cexp()).unwrap();
        assert_eq!(delta_shift(&s, 0.3).unwrap(), 0.0);
        let s = DriftSpec::new(5.0, normal(), normal()).unwrap();
        assert!(delta_shift(&s, 0.7).unwrap().abs() < 1e-12);
        let s = DriftSpec::new(1.0, normal(), cexp()).unwrap();
        let v = delta_shift(&s, 0.5).unwrap();
        assert!((v - (0.5 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 0.132121).abs() < 1e-6);
        assert!(matches!(delta_shift(&s, 1.0), Err(Error::Domain(_))));
        // endpoint limits are finite and vanish for unbounded P
        assert_eq!(s.value(0.0), 0.0);
        assert_eq!(s.value(1.0), 0.0);
        let bounded = DriftSpec::new(1.0, uniform(), cexp()).unwrap();
        assert_eq!(bounded.value(0.0), 0.0);
        assert!((bounded.value(1.0) - (-(-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn drift_delta_examples() {
        let pm0 = DistModel::point_mass(0.0).unwrap();
        for x in [-2.0, -0.3, 0.0, 0.8] {
            assert_eq!(drift_delta(x, &ar(&[0.5]), &normal(), &pm0).unwrap(), 0.0);
        }
        let pm10 = DistModel::point_mass(10.0).unwrap();
        assert_eq!(
            drift_delta(0.0, &ar(&[0.5]), &uniform(), &pm10).unwrap(),
            0.0
        );
        assert_eq!(
            drift_delta(0.5, &ar(&[0.5]), &uniform(), &pm10).unwrap(),
            -0.5
        );
        assert_eq!(
            drift_delta(-0.5, &ar(&[0.5]), &uniform(), &pm10).unwrap(),
            0.5
        );
    }

    #[test]
    fn drift_delta_vanishes_at_infinity() {
        let pis = [
            DistModel::point_mass(10.0).unwrap(),
            DistModel::two_point(-5.0, 0.3, 2.0, 0.7).unwrap(),
            DistModel::normal(3.0).unwrap(),
            cexp(),
        ];
        for pi in &pis {
            for x in [1e6, -1e6] {
                let d = drift_delta(x, &ar(&[0.5, -0.2]), &normal(), pi).unwrap();
                assert!(d.abs() < 1e-8, "{pi} at {x}: {d}");
            }
            assert_eq!(
                drift_delta(f64::INFINITY, &ar(&[0.5]), &normal(), pi).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn quadrature_matches_closed_form_for_normal_outliers() {
        // E Φ(x + bξ) with ξ ~ N(0, s²) is Φ(x / sqrt(1 + b² s²))
        let pi = DistModel::normal(2.0).unwrap();
        for &(x, b) in &[(0.3, -1.0), (-1.1, 0.5), (2.0, 0.8)] {
            let got = expected_shifted_cdf(&normal(), x, b, &pi).unwrap();
            let exact = normal().cdf(x / (1.0f64 + b * b * 4.0).sqrt());
            assert!((got - exact).abs() < 1e-6, "x={x} b={b}: {got} vs {exact}");
        }
    }

    #[test]
    fn delta_cells_examples() {
        let pm0 = DistModel::point_mass(0.0).unwrap();
        let d = delta_cells(&input(
            &[0.0, 0.5],
            &[0.5],
            uniform(),
            cexp(),
            pm0,
            1.0,
            1.0,
        ))
        .unwrap();
        assert_eq!(d, vec![0.0, 0.0]);

        // chained from Δ(0) = 0, Δ(±0.5) = ∓0.5 and Δ(±∞) = 0
        let pm10 = DistModel::point_mass(10.0).unwrap();
        let d = delta_cells(&input(
            &[0.0, 0.5],
            &[0.5],
            uniform(),
            cexp(),
            pm10,
            1.0,
            1.0,
        ))
        .unwrap();
        let expect = [-0.5 - 0.0 - (0.0 - 0.5), 0.0 - (-0.5) - (0.5 - 0.0)];
        assert_eq!(d, expect.to_vec());
    }

    #[test]
    fn symmetric_outliers_give_zero_delta() {
        let pis = [
            DistModel::two_point(-5.0, 0.5, 5.0, 0.5).unwrap(),
            DistModel::two_point(-0.7, 0.5, 0.7, 0.5).unwrap(),
            DistModel::normal(4.0).unwrap(),
            uniform(),
        ];
        for pi in pis {
            for p in [normal(), uniform()] {
                let inp = input(
                    &[0.0, 0.3, 0.9],
                    &[0.5, -0.2],
                    p,
                    cexp(),
                    pi.clone(),
                    1.0,
                    2.0,
                );
                for d in delta_cells(&inp).unwrap() {
                    assert!(d.abs() <= 1e-10, "{pi}: {d}");
                }
                assert!(robustness_bound(&inp).unwrap() <= 1e-8);
            }
        }
    }

    #[test]
    fn cell_prob_examples() {
        let cells = CellPartition::new(vec![0.0, 0.5]).unwrap();
        assert_eq!(
            cell_probs(&cells, &uniform()),
            (vec![0.25, 0.25], vec![0.25, 0.25])
        );
        let one = CellPartition::new(vec![0.0]).unwrap();
        let (plus, minus) = cell_probs(&one, &cexp());
        let e = (-1.0f64).exp();
        assert!((plus[0] - e).abs() < 1e-15 && (minus[0] - (1.0 - e)).abs() < 1e-15);
        for d in [normal(), cexp(), uniform()] {
            let cells = CellPartition::new(vec![0.0, 0.2, 0.7, 1.5]).unwrap();
            let (p, m) = cell_probs(&cells, &d);
            assert!((p.iter().sum::<f64>() + m.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn noncentrality_examples() {
        let pm = DistModel::point_mass(3.0).unwrap();
        assert_eq!(
            noncentrality(&input(&[0.0, 0.4], &[0.5], normal(), cexp(), pm, 0.0, 0.0)).unwrap(),
            0.0
        );

        let l2 = noncentrality(&input(
            &[0.0],
            &[0.5],
            uniform(),
            cexp(),
            DistModel::point_mass(0.0).unwrap(),
            1.0,
            0.0,
        ))
        .unwrap();
        let e = (-1.0f64).exp();
        assert!((l2 - (2.0 * e - 1.0).powi(2)).abs() < 1e-15);
        assert!((l2 - 0.069_823_368).abs() < 1e-8);

        let sym = DistModel::two_point(-5.0, 0.5, 5.0, 0.5).unwrap();
        let l2 =
            noncentrality(&input(&[0.0, 0.5], &[0.5], normal(), cexp(), sym, 0.0, 3.0)).unwrap();
        assert!(l2 < 1e-18);
    }

    #[test]
    fn partition_with_empty_null_cell_is_rejected() {
        let bad = input(
            &[0.0, 2.0],
            &[0.5],
            uniform(),
            cexp(),
            DistModel::point_mass(1.0).unwrap(),
            1.0,
            1.0,
        );
        assert!(matches!(
            noncentrality(&bad),
            Err(Error::InvalidPartition(_))
        ));
    }

    #[test]
    fn power_shift_is_within_robustness_bound() {
        let pis = [
            DistModel::point_mass(10.0).unwrap(),
            DistModel::point_mass(1.0).unwrap(),
            DistModel::two_point(-1.0, 0.2, 0.25, 0.8).unwrap(),
            DistModel::two_point(-5.0, 0.5, 5.0, 0.5).unwrap(),
            cexp(),
            DistModel::normal(2.0).unwrap(),
        ];
        let cells = [0.0, 0.4307272992954576, 0.9674215661017008];
        for pi in &pis {
            for rho in [0.0, 0.5, 1.0, 2.0, 4.0] {
                for gamma in [0.0, 0.1, 0.5, 1.0, 2.0] {
                    let with = input(&cells, &[0.5], normal(), cexp(), pi.clone(), rho, gamma);
                    let without = ChiSqAnalysisInput {
                        gamma: 0.0,
                        ..with.clone()
                    };
                    let w1 = asymptotic_power(3, 0.05, noncentrality(&with).unwrap()).unwrap();
                    let w0 = asymptotic_power(3, 0.05, noncentrality(&without).unwrap()).unwrap();
                    let bound = robustness_bound(&with).unwrap();
                    assert!(
                        (w1 - w0).abs() <= bound + 1e-6,
                        "{pi} rho={rho} gamma={gamma}"
                    );
                }
            }
        }
    }
}

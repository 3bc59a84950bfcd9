//! Innovation, alternative and outlier laws.
//!
//! [`DistModel`] covers the concrete laws used for the symmetric null `P`,
//! the asymmetric alternative component `Q` and the outlier law `Π` of the
//! contamination scheme. Every continuous kind is sampled by inversion of its
//! closed-form quantile so that draws are reproducible across platforms.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const WEIGHT_TOL: f64 = 1e-12;

/// A univariate law with closed-form CDF and quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistModel {
    /// `N(0, sigma²)`.
    Normal {
        sigma: f64,
    },
    /// Uniform on `[a, b]`.
    Uniform {
        a: f64,
        b: f64,
    },
    /// Law of `E - 1/rate` with `E ~ Exp(rate)`: zero mean, right-skewed.
    CenteredExponential {
        rate: f64,
    },
    /// Atoms `v1`, `v2` with probabilities `w1`, `w2`.
    TwoPoint {
        v1: f64,
        w1: f64,
        v2: f64,
        w2: f64,
    },
    PointMass {
        value: f64,
    },
    /// Finite mixture; the weights must sum to one.
    Mixture {
        components: Vec<MixtureComponent>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub dist: DistModel,
}

/// Anything that can produce one innovation per call.
pub trait InnovationSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn std_normal_quantile(t: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * t)
}

fn positive_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

impl DistModel {
    pub fn normal(sigma: f64) -> Result<Self> {
        let d = DistModel::Normal { sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        let d = DistModel::Uniform { a, b };
        d.validate()?;
        Ok(d)
    }

    pub fn centered_exponential(rate: f64) -> Result<Self> {
        let d = DistModel::CenteredExponential { rate };
        d.validate()?;
        Ok(d)
    }

    pub fn two_point(v1: f64, w1: f64, v2: f64, w2: f64) -> Result<Self> {
        let d = DistModel::TwoPoint { v1, w1, v2, w2 };
        d.validate()?;
        Ok(d)
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        let d = DistModel::PointMass { value };
        d.validate()?;
        Ok(d)
    }

    pub fn mixture(components: Vec<(f64, DistModel)>) -> Result<Self> {
        let d = DistModel::Mixture {
            components: components
                .into_iter()
                .map(|(weight, dist)| MixtureComponent { weight, dist })
                .collect(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistModel::Normal { sigma } => positive_finite("sigma", *sigma),
            DistModel::Uniform { a, b } => {
                finite("a", *a)?;
                finite("b", *b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "uniform needs a < b, got a={a}, b={b}"
                    )))
                }
            }
            DistModel::CenteredExponential { rate } => positive_finite("rate", *rate),
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                finite("v1", *v1)?;
                finite("v2", *v2)?;
                check_weights(&[*w1, *w2])
            }
            DistModel::PointMass { value } => finite("value", *value),
            DistModel::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("mixture has no components".into()));
                }
                let w: Vec<f64> = components.iter().map(|c| c.weight).collect();
                check_weights(&w)?;
                components.iter().try_for_each(|c| c.dist.validate())
            }
        }
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        match self {
            DistModel::Normal { sigma } => std_normal_cdf(x / sigma),
            DistModel::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            DistModel::CenteredExponential { rate } => {
                let z = rate * x + 1.0;
                if z <= 0.0 {
                    0.0
                } else {
                    -(-z).exp_m1()
                }
            }
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                let mut c = 0.0;
                if x >= *v1 {
                    c += w1;
                }
                if x >= *v2 {
                    c += w2;
                }
                c.min(1.0)
            }
            DistModel::PointMass { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistModel::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.cdf(x))
                .sum::<f64>()
                .clamp(0.0, 1.0),
        }
    }

    /// `P(X < x)`; differs from [`cdf`](Self::cdf) only at atoms.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                let mut c = 0.0;
                if x > *v1 {
                    c += w1;
                }
                if x > *v2 {
                    c += w2;
                }
                c.min(1.0)
            }
            DistModel::PointMass { value } => {
                if x > *value {
                    1.0
                } else {
                    0.0
                }
            }
            DistModel::Mixture { components } => components
                .iter()
                .map(|c| c.weight * c.dist.cdf_left(x))
                .sum::<f64>()
                .clamp(0.0, 1.0),
            _ => self.cdf(x),
        }
    }

    /// Generalized inverse `inf{x : cdf(x) >= t}` for `0 < t < 1`.
    pub fn quantile(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0, 1), got {t}"
            )));
        }
        Ok(self.quantile_unchecked(t))
    }

    pub(crate) fn quantile_unchecked(&self, t: f64) -> f64 {
        match self {
            DistModel::Normal { sigma } => sigma * std_normal_quantile(t),
            DistModel::Uniform { a, b } => a + t * (b - a),
            DistModel::CenteredExponential { rate } => (-(-t).ln_1p() - 1.0) / rate,
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                let ((lo, wlo), (hi, _)) = if v1 <= v2 {
                    ((*v1, *w1), (*v2, *w2))
                } else {
                    ((*v2, *w2), (*v1, *w1))
                };
                if t <= wlo {
                    lo
                } else {
                    hi
                }
            }
            DistModel::PointMass { value } => *value,
            DistModel::Mixture { components } => {
                let qs = components
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| c.dist.quantile_unchecked(t));
                let (lo, hi) = qs.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), q| {
                    (l.min(q), h.max(q))
                });
                self.bisect_quantile(t, lo, hi)
            }
        }
    }

    // Smallest x in [lo, hi] with cdf(x) >= t, given cdf(hi) >= t.
    fn bisect_quantile(&self, t: f64, lo: f64, hi: f64) -> f64 {
        if self.cdf(lo) >= t {
            return lo;
        }
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..2000 {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) >= t {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub fn mean(&self) -> f64 {
        match self {
            DistModel::Normal { .. } | DistModel::CenteredExponential { .. } => 0.0,
            DistModel::Uniform { a, b } => 0.5 * (a + b),
            DistModel::TwoPoint { v1, w1, v2, w2 } => v1 * w1 + v2 * w2,
            DistModel::PointMass { value } => *value,
            DistModel::Mixture { components } => {
                components.iter().map(|c| c.weight * c.dist.mean()).sum()
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            DistModel::Normal { sigma } => sigma * sigma,
            DistModel::Uniform { a, b } => (b - a).powi(2) / 12.0,
            DistModel::CenteredExponential { rate } => 1.0 / (rate * rate),
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                let m = self.mean();
                w1 * (v1 - m).powi(2) + w2 * (v2 - m).powi(2)
            }
            DistModel::PointMass { .. } => 0.0,
            DistModel::Mixture { components } => {
                let m = self.mean();
                components
                    .iter()
                    .map(|c| c.weight * (c.dist.variance() + (c.dist.mean() - m).powi(2)))
                    .sum()
            }
        }
    }

    /// True when the law has no atoms.
    pub fn is_continuous(&self) -> bool {
        match self {
            DistModel::Normal { .. }
            | DistModel::Uniform { .. }
            | DistModel::CenteredExponential { .. } => true,
            DistModel::TwoPoint { w1, w2, .. } => *w1 == 0.0 && *w2 == 0.0,
            DistModel::PointMass { .. } => false,
            DistModel::Mixture { components } => components
                .iter()
                .all(|c| c.weight == 0.0 || c.dist.is_continuous()),
        }
    }

    /// Closed support interval `(inf, sup)`; infinite ends allowed.
    pub fn support(&self) -> (f64, f64) {
        match self {
            DistModel::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DistModel::Uniform { a, b } => (*a, *b),
            DistModel::CenteredExponential { rate } => (-1.0 / rate, f64::INFINITY),
            DistModel::TwoPoint { v1, w1, v2, w2 } => {
                let atoms = [(*v1, *w1), (*v2, *w2)];
                let live = atoms.iter().filter(|(_, w)| *w > 0.0).map(|(v, _)| *v);
                live.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                    (l.min(v), h.max(v))
                })
            }
            DistModel::PointMass { value } => (*value, *value),
            DistModel::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| c.dist.support())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (a, b)| {
                    (l.min(a), h.max(b))
                }),
        }
    }

    /// Symmetry about zero: `cdf(-x) = 1 - cdf_left(x)` for every x.
    pub fn is_symmetric(&self) -> bool {
        match self {
            DistModel::Normal { .. } => true,
            DistModel::Uniform { a, b } => *a == -*b,
            DistModel::CenteredExponential { .. } => false,
            DistModel::PointMass { value } => *value == 0.0,
            DistModel::TwoPoint { .. } | DistModel::Mixture { .. } => self.symmetric_on_grid(),
        }
    }

    fn symmetric_on_grid(&self) -> bool {
        let mut probe = self.atoms();
        let lo = self.quantile_unchecked(1e-9).abs();
        let hi = self.quantile_unchecked(1.0 - 1e-9).abs();
        let span = lo.max(hi).max(1.0);
        probe.extend((0..=2000).map(|i| -span + 2.0 * span * i as f64 / 2000.0));
        probe
            .iter()
            .all(|&x| (self.cdf(-x) - (1.0 - self.cdf_left(x))).abs() <= 1e-12)
    }

    /// Atoms with positive mass, unordered.
    pub fn atoms(&self) -> Vec<f64> {
        match self {
            DistModel::TwoPoint { v1, w1, v2, w2 } => [(*v1, *w1), (*v2, *w2)]
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(v, _)| *v)
                .collect(),
            DistModel::PointMass { value } => vec![*value],
            DistModel::Mixture { components } => components
                .iter()
                .filter(|c| c.weight > 0.0)
                .flat_map(|c| c.dist.atoms())
                .collect(),
            _ => Vec::new(),
        }
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weights must be finite and >= 0, got {w:?}"
        )));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::InvalidParameter(format!(
            "weights must sum to 1, got {s}"
        )));
    }
    Ok(())
}

impl InnovationSampler for DistModel {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            DistModel::PointMass { value } => *value,
            DistModel::Mixture { components } => {
                let u: f64 = rng.sample(Open01);
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.dist.draw(rng);
                    }
                }
                // rounding in the weight sum
                components
                    .iter()
                    .rev()
                    .find(|c| c.weight > 0.0)
                    .map(|c| c.dist.draw(rng))
                    .unwrap_or(f64::NAN)
            }
            _ => {
                let u: f64 = rng.sample(Open01);
                self.quantile_unchecked(u)
            }
        }
    }
}

/// Draw one variate from `dist`.
pub fn draw<R: Rng + ?Sized>(dist: &DistModel, rng: &mut R) -> f64 {
    dist.draw(rng)
}

/// `min{1, scale / sqrt(n)}`, the weight of a local alternative or the
/// per-point contamination probability.
pub fn effective_weight(scale: f64, n: usize) -> Result<f64> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Domain(format!(
            "weight scale must be finite and >= 0, got {scale}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidSize("n must be >= 1".into()));
    }
    Ok((scale / (n as f64).sqrt()).min(1.0))
}

/// Local alternative `(1 - rho_n) P + rho_n Q` with `rho_n = min{1, rho/sqrt(n)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureAlternative {
    p_dist: DistModel,
    q_dist: DistModel,
    rho: f64,
}

impl MixtureAlternative {
    pub fn new(p_dist: DistModel, q_dist: DistModel, rho: f64) -> Result<Self> {
        p_dist.validate()?;
        q_dist.validate()?;
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho must be finite and >= 0, got {rho}"
            )));
        }
        if !p_dist.is_symmetric() {
            return Err(Error::InvalidParameter(format!(
                "null law P must be symmetric about 0, got {p_dist}"
            )));
        }
        for (name, d) in [("P", &p_dist), ("Q", &q_dist)] {
            let scale = d.variance().sqrt().max(1.0);
            if d.mean().abs() > 1e-12 * scale {
                return Err(Error::InvalidParameter(format!(
                    "{name} must have zero mean, got {}",
                    d.mean()
                )));
            }
        }
        Ok(MixtureAlternative {
            p_dist,
            q_dist,
            rho,
        })
    }

    pub fn p_dist(&self) -> &DistModel {
        &self.p_dist
    }

    pub fn q_dist(&self) -> &DistModel {
        &self.q_dist
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Sampler for sample size `n`.
    pub fn at(&self, n: usize) -> Result<MixtureSampler<'_>> {
        Ok(MixtureSampler {
            mix: self,
            weight: effective_weight(self.rho, n)?,
        })
    }

    /// The mixture CDF `A_n(x)`.
    pub fn cdf(&self, n: usize, x: f64) -> Result<f64> {
        let w = effective_weight(self.rho, n)?;
        Ok((1.0 - w) * self.p_dist.cdf(x) + w * self.q_dist.cdf(x))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MixtureSampler<'a> {
    mix: &'a MixtureAlternative,
    weight: f64,
}

impl MixtureSampler<'_> {
    pub fn weight(&self) -> f64 {
        self.weight
    }
}

impl InnovationSampler for MixtureSampler<'_> {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // component flag first, then the component draw
        let flag: f64 = rng.random();
        if flag < self.weight {
            self.mix.q_dist.draw(rng)
        } else {
            self.mix.p_dist.draw(rng)
        }
    }
}

/// One draw from the local alternative at sample size `n`.
pub fn draw_mixture<R: Rng + ?Sized>(
    mix: &MixtureAlternative,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(mix.at(n)?.draw(rng))
}

impl fmt::Display for DistModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistModel::Normal { sigma } => write!(f, "normal:{sigma}"),
            DistModel::Uniform { a, b } => write!(f, "uniform:{a},{b}"),
            DistModel::CenteredExponential { rate } => write!(f, "centered_exponential:{rate}"),
            DistModel::TwoPoint { v1, w1, v2, w2 } => write!(f, "two_point:{v1},{w1},{v2},{w2}"),
            DistModel::PointMass { value } => write!(f, "point_mass:{value}"),
            DistModel::Mixture { components } => {
                write!(f, "mixture(")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{}*{}", c.weight, c.dist)?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses the compact `kind:param,param,...` form used on the command line,
/// e.g. `normal:1`, `uniform:-1,1`, `two_point:-5,0.5,5,0.5`.
impl FromStr for DistModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let params: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| {
                    a.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidParameter(format!("bad number `{a}` in distribution `{s}`"))
                    })
                })
                .collect::<Result<_>>()?
        };
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "distribution `{kind}` takes {k} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match kind.trim() {
            "normal" => {
                want(1)?;
                DistModel::normal(params[0])
            }
            "uniform" => {
                want(2)?;
                DistModel::uniform(params[0], params[1])
            }
            "centered_exponential" | "cexp" => {
                want(1)?;
                DistModel::centered_exponential(params[0])
            }
            "two_point" => {
                want(4)?;
                DistModel::two_point(params[0], params[1], params[2], params[3])
            }
            "point_mass" | "point" => {
                want(1)?;
                DistModel::point_mass(params[0])
            }
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution kind `{other}`"
            ))),
        }
    }
}

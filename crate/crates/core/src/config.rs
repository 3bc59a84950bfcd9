//! Experiment configuration files.
//!
//! TOML with a mandatory first line `#! arsym-experiment v1`. Keys are
//! documented in the README.

use serde::{Deserialize, Serialize};

use crate::ar_process::ArParams;
use crate::error::{Error, Result};
use crate::innovation::DistModel;
use crate::limit_laws::{LimitSimConfig, OMEGA_CRITICAL_SEED};
use crate::symmetry_stats::CellPartition;

pub const CONFIG_HEADER: &str = "#! arsym-experiment v1";

/// Equal-probability positive cells used when a chi-square scenario gives none.
pub const DEFAULT_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LevelOmega,
    PowerOmega,
    LevelChisq,
    PowerChisq,
    Robustness,
    Consistency,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::LevelOmega => "level_omega",
            Scenario::PowerOmega => "power_omega",
            Scenario::LevelChisq => "level_chisq",
            Scenario::PowerChisq => "power_chisq",
            Scenario::Robustness => "robustness",
            Scenario::Consistency => "consistency",
        }
    }

    pub fn uses_omega(self) -> bool {
        matches!(
            self,
            Scenario::LevelOmega | Scenario::PowerOmega | Scenario::Consistency
        )
    }

    pub fn uses_chisq(self) -> bool {
        !matches!(self, Scenario::LevelOmega | Scenario::PowerOmega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Ols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

/// Either explicit cuts `0 = x₀ < … < x_{m-1}` or a count `m` of
/// equal-probability cells under `p_dist`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub paths: usize,
    pub grid: usize,
    pub seed: u64,
    /// Paths of the drifted limit used as the power_omega prediction.
    pub prediction_paths: usize,
}

impl Default for LimitSection {
    fn default() -> Self {
        let d = LimitSimConfig::default();
        LimitSection {
            paths: d.paths,
            grid: d.grid,
            seed: OMEGA_CRITICAL_SEED,
            prediction_paths: 100_000,
        }
    }
}

impl LimitSection {
    pub fn sim(&self) -> LimitSimConfig {
        LimitSimConfig {
            paths: self.paths,
            grid: self.grid,
            seed: self.seed,
        }
    }
}

/// Lists that expand one file into a grid of experiments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

fn default_n() -> usize {
    500
}

fn default_replications() -> usize {
    2000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_p_dist() -> DistModel {
    DistModel::Normal { sigma: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(default)]
    pub gamma: f64,
    pub master_seed: u64,
    #[serde(default)]
    pub estimator: EstimatorKind,
    /// Worker threads; absent means the rayon default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub model: ModelSection,
    #[serde(default = "default_p_dist")]
    pub p_dist: DistModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_dist: Option<DistModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_dist: Option<DistModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<CellsSection>,
    #[serde(default)]
    pub limit: LimitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl ExperimentConfig {
    /// A single-point config with defaults for everything optional.
    pub fn new(scenario: Scenario, coeffs: Vec<f64>, master_seed: u64) -> Self {
        ExperimentConfig {
            scenario,
            n: default_n(),
            replications: default_replications(),
            alpha: default_alpha(),
            rho: 0.0,
            gamma: 0.0,
            master_seed,
            estimator: EstimatorKind::Ols,
            workers: None,
            model: ModelSection {
                coeffs,
                burn_in: None,
            },
            p_dist: default_p_dist(),
            q_dist: None,
            pi_dist: None,
            cells: None,
            limit: LimitSection::default(),
            sweep: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let first = text.lines().map(str::trim).find(|l| !l.is_empty());
        if first != Some(CONFIG_HEADER) {
            return Err(Error::config(
                "header",
                format!("first line must be `{CONFIG_HEADER}`"),
            ));
        }
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("file", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let body = toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))?;
        Ok(format!("{CONFIG_HEADER}\n{body}"))
    }

    pub fn params(&self) -> Result<ArParams> {
        ArParams::new(self.model.coeffs.clone())
            .map_err(|e| Error::config("model.coeffs", e.to_string()))
    }

    pub fn burn_in(&self) -> usize {
        self.model
            .burn_in
            .unwrap_or_else(|| crate::ar_process::default_burn_in(self.model.coeffs.len()))
    }

    pub fn order(&self) -> usize {
        self.model.coeffs.len()
    }

    /// The alternative law; `p_dist` when no `q_dist` is given.
    pub fn q_or_p(&self) -> &DistModel {
        self.q_dist.as_ref().unwrap_or(&self.p_dist)
    }

    pub fn pi_or_zero(&self) -> DistModel {
        self.pi_dist
            .clone()
            .unwrap_or(DistModel::PointMass { value: 0.0 })
    }

    pub fn cell_partition(&self) -> Result<CellPartition> {
        let sec = self.cells.clone().unwrap_or_default();
        match (sec.m, sec.cuts) {
            (Some(_), Some(_)) => Err(Error::config(
                "cells",
                "give either `m` or `cuts`, not both",
            )),
            (_, Some(cuts)) => {
                CellPartition::new(cuts).map_err(|e| Error::config("cells.cuts", e.to_string()))
            }
            (m, None) => CellPartition::equiprobable(&self.p_dist, m.unwrap_or(DEFAULT_CELLS))
                .map_err(|e| Error::config("cells.m", e.to_string())),
        }
    }

    /// The grid points described by `sweep`, each a full single-point config.
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let ns = sweep.n.unwrap_or_else(|| vec![self.n]);
        let rhos = sweep.rho.unwrap_or_else(|| vec![self.rho]);
        let gammas = sweep.gamma.unwrap_or_else(|| vec![self.gamma]);
        let mut out = Vec::new();
        for &n in &ns {
            for &rho in &rhos {
                for &gamma in &gammas {
                    let mut c = self.clone();
                    c.n = n;
                    c.rho = rho;
                    c.gamma = gamma;
                    c.sweep = None;
                    out.push(c);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers", "must be >= 1"));
        }
        self.params()?;
        for (name, d) in [
            ("p_dist", Some(&self.p_dist)),
            ("q_dist", self.q_dist.as_ref()),
            ("pi_dist", self.pi_dist.as_ref()),
        ] {
            if let Some(d) = d {
                d.validate()
                    .map_err(|e| Error::config(name, e.to_string()))?;
            }
        }
        if self.limit.paths < 1 || self.limit.prediction_paths < 1 {
            return Err(Error::config("limit.paths", "must be >= 1"));
        }
        if self.limit.grid < 2 {
            return Err(Error::config("limit.grid", "must be >= 2"));
        }
        let points = self.expand();
        for c in &points {
            c.validate_point()?;
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        let p = self.order();
        if self.n < p + 1 {
            return Err(Error::config(
                "n",
                format!("must be >= p + 1 = {}, got {}", p + 1, self.n),
            ));
        }
        for (name, v) in [("rho", self.rho), ("gamma", self.gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        use Scenario::*;
        match self.scenario {
            LevelOmega | LevelChisq if self.rho != 0.0 || self.gamma != 0.0 => {
                return Err(Error::config(
                    "rho",
                    "level scenarios need rho = 0 and gamma = 0",
                ));
            }
            LevelOmega | PowerOmega | Consistency if self.gamma != 0.0 => {
                return Err(Error::config(
                    "gamma",
                    "omega scenarios use the clean scheme; set gamma = 0",
                ));
            }
            _ => {}
        }
        if matches!(self.scenario, PowerOmega | PowerChisq | Robustness)
            && self.rho > 0.0
            && self.q_dist.is_none()
        {
            return Err(Error::config("q_dist", "required when rho > 0"));
        }
        if self.scenario == Consistency && self.q_dist.is_none() {
            return Err(Error::config(
                "q_dist",
                "the consistency scenario draws innovations from q_dist",
            ));
        }
        if self.gamma > 0.0 && self.pi_dist.is_none() {
            return Err(Error::config("pi_dist", "required when gamma > 0"));
        }
        if self.scenario == Robustness && self.pi_dist.is_none() {
            return Err(Error::config(
                "pi_dist",
                "required by the robustness scenario",
            ));
        }
        if self.scenario != Consistency {
            crate::innovation::MixtureAlternative::new(
                self.p_dist.clone(),
                self.q_or_p().clone(),
                self.rho,
            )
            .map_err(|e| Error::config("p_dist", e.to_string()))?;
        }
        if self.scenario == PowerOmega && !self.p_dist.is_continuous() {
            return Err(Error::config(
                "p_dist",
                "the drifted omega limit needs a continuous p_dist",
            ));
        }
        if self.scenario.uses_chisq() {
            let cells = self.cell_partition()?;
            let (plus, _) = crate::limit_laws::cell_probs(&cells, &self.p_dist);
            if let Some(j) = plus.iter().position(|&q| q <= 0.0) {
                return Err(Error::config(
                    "cells",
                    format!("cell {} has zero null probability", j + 1),
                ));
            }
        }
        Ok(())
    }
}

// Names the offending key from the span toml reports.
fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().trim().to_string();
    let at = err.span().and_then(|span| key_at(text, span.start));
    let field = match message.strip_prefix("missing field `") {
        Some(rest) => {
            let name = rest.split('`').next().unwrap_or_default();
            // the span of a missing key covers its enclosing table
            match at.filter(|a| !a.starts_with('#') && !a.contains('=')) {
                Some(table) if text.contains(&format!("[{table}]")) => format!("{table}.{name}"),
                _ => name.to_string(),
            }
        }
        None => at.unwrap_or_else(|| "config".to_string()),
    };
    Error::config(field, message)
}

fn key_at(text: &str, offset: usize) -> Option<String> {
    let offset = offset.min(text.len());
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[offset..].find('\n').map_or(text.len(), |i| offset + i);
    let line = text[line_start..line_end].trim();
    let mut section = None;
    for l in text[..line_start].lines().rev() {
        let l = l.trim();
        if l.starts_with('[') && l.ends_with(']') {
            section = Some(l.trim_matches(|c| c == '[' || c == ']').trim().to_string());
            break;
        }
    }
    let key = if line.starts_with('[') {
        return Some(
            line.trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string(),
        );
    } else {
        line.split('=').next()?.trim().trim_matches('"').to_string()
    };
    if key.is_empty() {
        return None;
    }
    Some(match section {
        Some(s) => format!("{s}.{key}"),
        None => key,
    })
}

//! Monte Carlo experiments: level, power, robustness and consistency of the
//! omega-square and chi-square symmetry tests.
//!
//! Replication `i` simulates with seed `derive_seed(master, 2i)` and
//! contaminates with `derive_seed(master, 2i + 1)`. Results are collected in
//! replication order, so nothing depends on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ar_process::{contaminate, simulate_stationary, ArParams, ContaminationModel, Series};
use crate::config::{EstimatorKind, ExperimentConfig, Scenario};
use crate::error::{Error, Result};
use crate::estimation::{residuals, Estimator, Ols, ResidualSet};
use crate::innovation::{InnovationSampler, MixtureAlternative};
use crate::limit_laws::{
    asymptotic_power, chisq_quantile, noncentrality, omega_limit_quantile, omega_limit_sample,
    robustness_bound, upper_quantile, ChiSqAnalysisInput, DriftSpec, NoncentralSpec,
};
use crate::seed::derive_seed;
use crate::symmetry_stats::{cell_counts, chi_sq, omega_sq, CellPartition};

/// Points in the grid for the sup-distance between CDFs.
pub const CDF_GRID_POINTS: usize = 512;

/// Largest tolerated share of replications with an empty positive cell.
pub const MAX_EMPTY_CELL_SHARE: f64 = 0.01;

// stream offset for the drifted-limit prediction sample
const PREDICTION_STREAM: u64 = 0x5052_4544;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Omega,
    Chisq,
}

impl Statistic {
    pub fn as_str(self) -> &'static str {
        match self {
            Statistic::Omega => "omega",
            Statistic::Chisq => "chisq",
        }
    }
}

/// Mean and type-1 quantiles of a statistic over valid replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Some(Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            q05: upper_quantile(&s, 0.05),
            q25: upper_quantile(&s, 0.25),
            median: upper_quantile(&s, 0.5),
            q75: upper_quantile(&s, 0.75),
            q95: upper_quantile(&s, 0.95),
        })
    }
}

/// Same-seed comparison against the uncontaminated pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub baseline_rate: f64,
    pub difference: f64,
    /// `√(2/π)·γ·|𝒫^{-1/2}δ(Π)|`.
    pub analytic_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub statistic: Statistic,
    pub n: usize,
    pub rho: f64,
    pub gamma: f64,
    pub alpha: f64,
    /// Positive cells; chi-square only.
    pub m: Option<usize>,
    pub replications: usize,
    pub valid_replications: usize,
    /// Replications dropped because a positive cell was empty.
    pub excluded_replications: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Binomial standard error of `rejection_rate`.
    pub stderr: f64,
    pub critical_value: f64,
    pub summary: Option<Summary>,
    /// Analytic or limit-simulation rejection probability.
    pub predicted: Option<f64>,
    /// Monte Carlo error of `predicted`; zero for closed forms.
    pub predicted_stderr: Option<f64>,
    pub noncentrality: Option<f64>,
    pub cdf_distance: Option<f64>,
    pub robustness: Option<Robustness>,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    /// Statistic per valid replication, in replication order.
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

fn binomial_stderr(rate: f64, trials: usize) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

fn estimator(kind: EstimatorKind) -> impl Estimator {
    match kind {
        EstimatorKind::Ols => Ols,
    }
}

/// Runs `f` on a pool with the configured number of workers.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::config("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

struct Pipeline<'a> {
    cfg: &'a ExperimentConfig,
    params: ArParams,
    alternative: Option<MixtureAlternative>,
    contamination: Option<ContaminationModel>,
    burn_in: usize,
}

impl<'a> Pipeline<'a> {
    fn new(cfg: &'a ExperimentConfig, gamma: f64) -> Result<Self> {
        let alternative = match cfg.scenario {
            Scenario::Consistency => None,
            _ => Some(MixtureAlternative::new(
                cfg.p_dist.clone(),
                cfg.q_or_p().clone(),
                cfg.rho,
            )?),
        };
        let contamination = if gamma > 0.0 {
            Some(ContaminationModel::new(gamma, cfg.pi_or_zero())?)
        } else {
            None
        };
        Ok(Pipeline {
            cfg,
            params: cfg.params()?,
            alternative,
            contamination,
            burn_in: cfg.burn_in(),
        })
    }

    fn observed(&self, rep: u64) -> Result<Series> {
        let cfg = self.cfg;
        let sim_seed = derive_seed(cfg.master_seed, 2 * rep);
        let series = match &self.alternative {
            Some(alt) => simulate(&self.params, &alt.at(cfg.n)?, cfg.n, self.burn_in, sim_seed)?,
            // fixed alternative: every innovation from q_dist
            None => simulate(&self.params, cfg.q_or_p(), cfg.n, self.burn_in, sim_seed)?,
        };
        match &self.contamination {
            Some(model) => contaminate(&series, model, derive_seed(cfg.master_seed, 2 * rep + 1)),
            None => Ok(series),
        }
    }

    fn residuals(&self, rep: u64) -> Result<ResidualSet> {
        let series = self.observed(rep)?;
        let beta = estimator(self.cfg.estimator).estimate(&series)?;
        residuals(&series, &beta)
    }
}

fn simulate<S: InnovationSampler>(
    params: &ArParams,
    s: &S,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Series> {
    simulate_stationary(params, s, n, burn_in, seed)
}

// Per-replication outcome: Some(statistic), or None for an empty positive cell.
fn replicate<F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<Option<f64>>>
where
    F: Fn(u64) -> Result<Option<f64>> + Sync,
{
    let reps = cfg.replications as u64;
    with_workers(cfg.workers, || {
        (0..reps)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<_>>>()
    })?
}

fn omega_statistics(cfg: &ExperimentConfig) -> Result<Vec<Option<f64>>> {
    let pipe = Pipeline::new(cfg, 0.0)?;
    replicate(cfg, |rep| Ok(Some(omega_sq(&pipe.residuals(rep)?))))
}

fn chisq_statistics(
    cfg: &ExperimentConfig,
    gamma: f64,
    cells: &CellPartition,
) -> Result<Vec<Option<f64>>> {
    let pipe = Pipeline::new(cfg, gamma)?;
    replicate(cfg, |rep| {
        let res = pipe.residuals(rep)?;
        match chi_sq(&cell_counts(&res, cells)) {
            Ok(v) => Ok(Some(v)),
            Err(Error::EmptyPositiveCell { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    })
}

struct Tally {
    statistics: Vec<f64>,
    excluded: usize,
    rejections: usize,
    rate: f64,
}

fn tally(outcomes: &[Option<f64>], critical: f64) -> Tally {
    let statistics: Vec<f64> = outcomes.iter().flatten().copied().collect();
    let excluded = outcomes.len() - statistics.len();
    let rejections = statistics.iter().filter(|&&s| s > critical).count();
    let rate = if statistics.is_empty() {
        0.0
    } else {
        rejections as f64 / statistics.len() as f64
    };
    Tally {
        statistics,
        excluded,
        rejections,
        rate,
    }
}

fn check_exclusions(excluded: usize, replications: usize) -> Result<()> {
    if excluded as f64 > MAX_EMPTY_CELL_SHARE * replications as f64 {
        return Err(Error::ExcessiveEmptyCells {
            excluded,
            replications,
        });
    }
    Ok(())
}

fn base_result(
    cfg: &ExperimentConfig,
    statistic: Statistic,
    t: Tally,
    critical: f64,
) -> ExperimentResult {
    let valid = t.statistics.len();
    ExperimentResult {
        scenario: cfg.scenario,
        statistic,
        n: cfg.n,
        rho: cfg.rho,
        gamma: cfg.gamma,
        alpha: cfg.alpha,
        m: None,
        replications: cfg.replications,
        valid_replications: valid,
        excluded_replications: t.excluded,
        rejections: t.rejections,
        rejection_rate: t.rate,
        stderr: binomial_stderr(t.rate, valid),
        critical_value: critical,
        summary: Summary::of(&t.statistics),
        predicted: None,
        predicted_stderr: None,
        noncentrality: None,
        cdf_distance: None,
        robustness: None,
        master_seed: cfg.master_seed,
        config: cfg.clone(),
        statistics: t.statistics,
    }
}

fn single_point(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.sweep.is_some() {
        return Err(Error::config(
            "sweep",
            "expand the sweep before running a single experiment",
        ));
    }
    Ok(())
}

/// Omega-square test at level `alpha` against the simulated limit quantile.
pub fn run_omega_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    single_point(cfg)?;
    if !cfg.scenario.uses_omega() {
        return Err(Error::config(
            "scenario",
            format!("{} is not an omega scenario", cfg.scenario.as_str()),
        ));
    }
    let sim = cfg.limit.sim();
    let critical = with_workers(cfg.workers, || omega_limit_quantile(cfg.alpha, &sim))??;
    let outcomes = omega_statistics(cfg)?;
    let mut r = base_result(cfg, Statistic::Omega, tally(&outcomes, critical), critical);
    match cfg.scenario {
        Scenario::LevelOmega => {
            r.predicted = Some(cfg.alpha);
            r.predicted_stderr = Some(0.0);
        }
        Scenario::PowerOmega => {
            let drift = DriftSpec::new(cfg.rho, cfg.p_dist.clone(), cfg.q_or_p().clone())?;
            let paths = cfg.limit.prediction_paths;
            let seed = derive_seed(cfg.limit.seed, PREDICTION_STREAM);
            let sample = with_workers(cfg.workers, || {
                omega_limit_sample(Some(&drift), cfg.limit.grid, paths, seed)
            })??;
            let w = sample.iter().filter(|&&s| s > critical).count() as f64 / paths as f64;
            r.predicted = Some(w);
            r.predicted_stderr = Some(binomial_stderr(w, paths));
        }
        _ => {}
    }
    Ok(r)
}

fn analysis_input(
    cfg: &ExperimentConfig,
    cells: &CellPartition,
    gamma: f64,
) -> Result<ChiSqAnalysisInput> {
    Ok(ChiSqAnalysisInput {
        cells: cells.clone(),
        coeffs: cfg.params()?,
        p_dist: cfg.p_dist.clone(),
        q_dist: cfg.q_or_p().clone(),
        pi_dist: cfg.pi_or_zero(),
        rho: cfg.rho,
        gamma,
    })
}

/// Chi-square test over `cells` at level `alpha`, with the analytic power
/// `1 - F_m(χ²_{1-α}(m), λ²)` as prediction.
pub fn run_chisq_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    single_point(cfg)?;
    if !cfg.scenario.uses_chisq() {
        return Err(Error::config(
            "scenario",
            format!("{} is not a chi-square scenario", cfg.scenario.as_str()),
        ));
    }
    let cells = cfg.cell_partition()?;
    let m = cells.m();
    let critical = chisq_quantile(m, 1.0 - cfg.alpha)?;
    let outcomes = chisq_statistics(cfg, cfg.gamma, &cells)?;
    let t = tally(&outcomes, critical);
    check_exclusions(t.excluded, cfg.replications)?;
    let mut r = base_result(cfg, Statistic::Chisq, t, critical);
    r.m = Some(m);
    if cfg.scenario != Scenario::Consistency {
        let input = analysis_input(cfg, &cells, cfg.gamma)?;
        let lambda2 = noncentrality(&input)?;
        r.noncentrality = Some(lambda2);
        r.predicted = Some(asymptotic_power(m, cfg.alpha, lambda2)?);
        r.predicted_stderr = Some(0.0);
        r.cdf_distance = Some(cdf_distance(
            &r.statistics,
            NoncentralSpec::new(m, lambda2)?,
        )?);
    }
    if cfg.scenario == Scenario::Robustness {
        let base = chisq_statistics(cfg, 0.0, &cells)?;
        let bt = tally(&base, critical);
        check_exclusions(bt.excluded, cfg.replications)?;
        r.robustness = Some(Robustness {
            baseline_rate: bt.rate,
            difference: r.rejection_rate - bt.rate,
            analytic_bound: robustness_bound(&analysis_input(cfg, &cells, cfg.gamma)?)?,
        });
    }
    Ok(r)
}

/// `sup_x |F̂(x) - F_m(x, λ²)|` over 512 equally spaced points in
/// `(0, F_m^{-1}(0.999)]`.
pub fn cdf_distance(statistics: &[f64], law: NoncentralSpec) -> Result<f64> {
    if statistics.is_empty() {
        return Err(Error::InvalidSize("no statistics to compare".into()));
    }
    let mut s = statistics.to_vec();
    s.sort_by(f64::total_cmp);
    let top = crate::limit_laws::noncentral_chisq_quantile(law, 0.999)?;
    let n = s.len() as f64;
    Ok((1..=CDF_GRID_POINTS)
        .map(|i| {
            let x = top * i as f64 / CDF_GRID_POINTS as f64;
            let emp = s.partition_point(|&v| v <= x) as f64 / n;
            (emp - law.cdf(x)).abs()
        })
        .fold(0.0, f64::max))
}

/// Chi-square experiment reduced to its CDF sup-distance.
pub fn run_cdf_distance(cfg: &ExperimentConfig) -> Result<f64> {
    let mut c = cfg.clone();
    if c.scenario == Scenario::Consistency {
        return Err(Error::config(
            "scenario",
            "the consistency scenario has no limiting law",
        ));
    }
    c.sweep = None;
    run_chisq_experiment(&c)?
        .cdf_distance
        .ok_or_else(|| Error::config("scenario", "no limiting law for this scenario"))
}

/// Every experiment described by `cfg`: one per sweep point and statistic.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for point in cfg.expand() {
        if point.scenario.uses_omega() {
            out.push(run_omega_experiment(&point)?);
        }
        if point.scenario.uses_chisq() {
            out.push(run_chisq_experiment(&point)?);
        }
    }
    Ok(out)
}

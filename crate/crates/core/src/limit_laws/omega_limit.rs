//! Monte Carlo law of `∫₀¹ [v(t) + v(1-t) + δ(t) + δ(1-t)]² dt` for a
//! Brownian bridge `v`, and its upper quantiles.
//!
//! Critical values are versioned by `(paths, grid, seed)`. They are memoized
//! in-process and, when `ARSYM_CACHE_DIR` is set, persisted to a plain-text
//! table in that directory.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Fixed seed behind the published critical values.
pub const OMEGA_CRITICAL_SEED: u64 = 0x0A5E_ED00_2024_0001;

/// Directory for the persisted critical-value table.
pub const CACHE_DIR_ENV: &str = "ARSYM_CACHE_DIR";

const CACHE_FILE: &str = "omega_critical_values.txt";
const CACHE_HEADER: &str = "# arsym omega-square critical values v1";
const CACHE_COLUMNS: &str = "# alpha paths grid seed value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LimitSimConfig {
    pub paths: usize,
    pub grid: usize,
    pub seed: u64,
}

impl Default for LimitSimConfig {
    fn default() -> Self {
        LimitSimConfig {
            paths: 200_000,
            grid: 4096,
            seed: OMEGA_CRITICAL_SEED,
        }
    }
}

impl LimitSimConfig {
    fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must be >= 2, got {}",
                self.grid
            )));
        }
        if self.paths < 1 {
            return Err(Error::InvalidParameter("paths must be >= 1".into()));
        }
        Ok(())
    }
}

fn integrate_path(
    rng: &mut ChaCha8Rng,
    drift: Option<&[f64]>,
    w: &mut Vec<f64>,
    v: &mut [f64],
) -> f64 {
    let grid = v.len();
    let dt = 1.0 / (grid - 1) as f64;
    let sd = dt.sqrt();
    v[0] = 0.0;
    for i in 1..grid {
        let z: f64 = StandardNormal.sample(rng);
        v[i] = v[i - 1] + sd * z;
    }
    let end = v[grid - 1];
    for (i, x) in v.iter_mut().enumerate() {
        *x -= i as f64 * dt * end;
    }
    w.clear();
    w.extend((0..grid).map(|i| v[i] + v[grid - 1 - i]));
    if let Some(d) = drift {
        for (x, s) in w.iter_mut().zip(d) {
            *x += s;
        }
    }
    let sum: f64 = w.iter().map(|x| x * x).sum();
    dt * (sum - 0.5 * (w[0] * w[0] + w[grid - 1] * w[grid - 1]))
}

/// One trapezoidal integral per simulated bridge path. Path `k` draws from
/// its own stream derived from `(seed, k)`, so the output does not depend
/// on the number of worker threads.
pub fn omega_limit_sample(
    drift: Option<&DriftSpec>,
    grid_size: usize,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    LimitSimConfig {
        paths,
        grid: grid_size,
        seed,
    }
    .validate()?;
    let shift = drift.map(|d| d.symmetrized_on_grid(grid_size));
    let shift = shift.as_deref();
    Ok((0..paths as u64)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(grid_size), vec![0.0; grid_size]),
            |(w, v), k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
                integrate_path(&mut rng, shift, w, v)
            },
        )
        .collect())
}

/// Order statistic `⌈p N⌉` of an ascending sample.
pub(crate) fn upper_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let k = ((prob * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn null_sample(sim: LimitSimConfig) -> Result<Arc<Vec<f64>>> {
    static SAMPLES: OnceLock<Mutex<HashMap<LimitSimConfig, Arc<Vec<f64>>>>> = OnceLock::new();
    let map = SAMPLES.get_or_init(Default::default);
    // held during simulation so concurrent callers do not duplicate the work
    let mut guard = map.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(s) = guard.get(&sim) {
        return Ok(Arc::clone(s));
    }
    let mut sample = omega_limit_sample(None, sim.grid, sim.paths, sim.seed)?;
    sample.sort_by(f64::total_cmp);
    let sample = Arc::new(sample);
    guard.insert(sim, Arc::clone(&sample));
    Ok(sample)
}

/// Upper `alpha` critical value `c_{1-α}` of the null omega-square limit.
pub fn omega_limit_quantile(alpha: f64, sim: &LimitSimConfig) -> Result<f64> {
    CriticalValueCache::from_env().quantile(alpha, sim)
}

/// Critical values backed by the in-process memo and an optional on-disk table.
#[derive(Debug, Clone, Default)]
pub struct CriticalValueCache {
    dir: Option<PathBuf>,
}

impl CriticalValueCache {
    pub fn from_env() -> Self {
        CriticalValueCache {
            dir: std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from),
        }
    }

    pub fn in_dir(dir: impl Into<PathBuf>) -> Self {
        CriticalValueCache {
            dir: Some(dir.into()),
        }
    }

    pub fn memory_only() -> Self {
        CriticalValueCache { dir: None }
    }

    pub fn path(&self) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(CACHE_FILE))
    }

    pub fn quantile(&self, alpha: f64, sim: &LimitSimConfig) -> Result<f64> {
        self.lookup_or_compute(alpha, sim, false)
    }

    /// Recomputes from simulation and overwrites any stored row.
    pub fn recompute(&self, alpha: f64, sim: &LimitSimConfig) -> Result<f64> {
        self.lookup_or_compute(alpha, sim, true)
    }

    fn lookup_or_compute(&self, alpha: f64, sim: &LimitSimConfig, force: bool) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        sim.validate()?;
        let path = self.path();
        let mut rows = match &path {
            Some(p) => read_table(p)?,
            None => Vec::new(),
        };
        let key = |r: &CacheRow| r.alpha == alpha && r.sim == *sim;
        if !force {
            if let Some(r) = rows.iter().find(|r| key(r)) {
                return Ok(r.value);
            }
        }
        let value = upper_quantile(&null_sample(*sim)?, 1.0 - alpha);
        if let Some(p) = &path {
            rows.retain(|r| !key(r));
            rows.push(CacheRow {
                alpha,
                sim: *sim,
                value,
            });
            write_table(p, &rows)?;
        }
        Ok(value)
    }

    /// Every stored row, in file order.
    pub fn entries(&self) -> Result<Vec<(f64, LimitSimConfig, f64)>> {
        match self.path() {
            Some(p) => Ok(read_table(&p)?
                .into_iter()
                .map(|r| (r.alpha, r.sim, r.value))
                .collect()),
            None => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CacheRow {
    alpha: f64,
    sim: LimitSimConfig,
    value: f64,
}

fn cache_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Cache {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn read_table(path: &Path) -> Result<Vec<CacheRow>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CACHE_HEADER) {
        return Err(cache_err(
            path,
            format!("missing or unsupported header (expected `{CACHE_HEADER}`)"),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || cache_err(path, format!("malformed row {}: `{line}`", i + 2));
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push(CacheRow {
            alpha: f[0].parse().map_err(|_| bad())?,
            sim: LimitSimConfig {
                paths: f[1].parse().map_err(|_| bad())?,
                grid: f[2].parse().map_err(|_| bad())?,
                seed: f[3].parse().map_err(|_| bad())?,
            },
            value: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

fn write_table(path: &Path, rows: &[CacheRow]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        writeln!(f, "{CACHE_HEADER}")?;
        writeln!(f, "{CACHE_COLUMNS}")?;
        for r in rows {
            writeln!(
                f,
                "{:?} {} {} {} {:?}",
                r.alpha, r.sim.paths, r.sim.grid, r.sim.seed, r.value
            )?;
        }
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

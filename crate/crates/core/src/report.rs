//! CSV and JSON emitters for experiment results.
//!
//! The summary CSV has one row per experiment with the columns in
//! [`CSV_COLUMNS`]; absent values are empty fields. The power CSV is long
//! format with `rho, gamma, empirical, analytic, stderr`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::ExperimentResult;

pub const CSV_COLUMNS: [&str; 25] = [
    "scenario",
    "statistic",
    "n",
    "rho",
    "gamma",
    "alpha",
    "m",
    "replications",
    "valid_replications",
    "excluded_replications",
    "rejections",
    "rejection_rate",
    "stderr",
    "critical_value",
    "statistic_mean",
    "statistic_median",
    "statistic_q95",
    "predicted",
    "predicted_stderr",
    "noncentrality",
    "cdf_distance",
    "robustness_baseline_rate",
    "robustness_difference",
    "robustness_bound",
    "master_seed",
];

#[derive(Serialize)]
struct Row<'a> {
    scenario: &'a str,
    statistic: &'a str,
    n: usize,
    rho: f64,
    gamma: f64,
    alpha: f64,
    m: Option<usize>,
    replications: usize,
    valid_replications: usize,
    excluded_replications: usize,
    rejections: usize,
    rejection_rate: f64,
    stderr: f64,
    critical_value: f64,
    statistic_mean: Option<f64>,
    statistic_median: Option<f64>,
    statistic_q95: Option<f64>,
    predicted: Option<f64>,
    predicted_stderr: Option<f64>,
    noncentrality: Option<f64>,
    cdf_distance: Option<f64>,
    robustness_baseline_rate: Option<f64>,
    robustness_difference: Option<f64>,
    robustness_bound: Option<f64>,
    master_seed: u64,
}

impl<'a> From<&'a ExperimentResult> for Row<'a> {
    fn from(r: &'a ExperimentResult) -> Self {
        let s = r.summary.as_ref();
        let rob = r.robustness.as_ref();
        Row {
            scenario: r.scenario.as_str(),
            statistic: r.statistic.as_str(),
            n: r.n,
            rho: r.rho,
            gamma: r.gamma,
            alpha: r.alpha,
            m: r.m,
            replications: r.replications,
            valid_replications: r.valid_replications,
            excluded_replications: r.excluded_replications,
            rejections: r.rejections,
            rejection_rate: r.rejection_rate,
            stderr: r.stderr,
            critical_value: r.critical_value,
            statistic_mean: s.map(|s| s.mean),
            statistic_median: s.map(|s| s.median),
            statistic_q95: s.map(|s| s.q95),
            predicted: r.predicted,
            predicted_stderr: r.predicted_stderr,
            noncentrality: r.noncentrality,
            cdf_distance: r.cdf_distance,
            robustness_baseline_rate: rob.map(|x| x.baseline_rate),
            robustness_difference: rob.map(|x| x.difference),
            robustness_bound: rob.map(|x| x.analytic_bound),
            master_seed: r.master_seed,
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn results_csv(results: &[ExperimentResult]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in results {
        w.serialize(Row::from(r)).map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Serialize)]
struct PowerRow {
    rho: f64,
    gamma: f64,
    empirical: f64,
    analytic: Option<f64>,
    stderr: f64,
}

/// Long-format power curve: one row per result.
pub fn power_csv(results: &[ExperimentResult]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(PowerRow {
            rho: r.rho,
            gamma: r.gamma,
            empirical: r.rejection_rate,
            analytic: r.predicted,
            stderr: r.stderr,
        })
        .map_err(csv_err)?;
    }
    if results.is_empty() {
        w.write_record(["rho", "gamma", "empirical", "analytic", "stderr"])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn results_json(results: &[ExperimentResult]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(results).map_err(csv_err)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExperimentConfig, Scenario};
    use crate::harness::{Statistic, Summary};

    fn result() -> ExperimentResult {
        ExperimentResult {
            scenario: Scenario::LevelChisq,
            statistic: Statistic::Chisq,
            n: 100,
            rho: 0.0,
            gamma: 0.0,
            alpha: 0.05,
            m: Some(3),
            replications: 10,
            valid_replications: 10,
            excluded_replications: 0,
            rejections: 1,
            rejection_rate: 0.1,
            stderr: 0.09486832980505137,
            critical_value: 7.814727903251178,
            summary: Summary::of(&[1.0, 2.0, 3.0]),
            predicted: Some(0.05),
            predicted_stderr: Some(0.0),
            noncentrality: Some(0.0),
            cdf_distance: None,
            robustness: None,
            master_seed: 5,
            config: ExperimentConfig::new(Scenario::LevelChisq, vec![0.5], 5),
            statistics: vec![1.0, 2.0, 3.0],
        }
    }

    #[test]
    fn csv_has_stable_header_and_empty_missing_fields() {
        let text = results_csv(&[result()]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), CSV_COLUMNS.len());
        assert_eq!(row[0], "level_chisq");
        assert_eq!(row[6], "3");
        assert_eq!(row[20], "");
        assert_eq!(row[24], "5");
    }

    #[test]
    fn power_csv_is_long_format() {
        let text = power_csv(&[result(), result()]).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rho,gamma,empirical,analytic,stderr");
        assert_eq!(lines.len(), 3);
        assert_eq!(power_csv(&[]).unwrap().trim(), lines[0]);
    }

    #[test]
    fn json_round_trips_without_raw_statistics() {
        let text = results_json(&[result()]).unwrap();
        let back: Vec<ExperimentResult> = serde_json::from_str(&text).unwrap();
        let mut want = result();
        want.statistics.clear();
        assert_eq!(back, vec![want]);
    }
}

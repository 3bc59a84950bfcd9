//! `arsym`: symmetry tests for AR(p) innovations from the command line.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 for
//! numerical failures.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arsym::ar_process::{
    contaminate, default_burn_in, simulate_stationary, ArParams, ContaminationModel, Series,
};
use arsym::config::ExperimentConfig;
use arsym::estimation::{ols_estimate, residuals, ResidualSet};
use arsym::harness::{run_experiment, with_workers};
use arsym::innovation::{DistModel, MixtureAlternative};
use arsym::limit_laws::{
    asymptotic_power, chisq_quantile, noncentrality, ChiSqAnalysisInput, CriticalValueCache,
    LimitSimConfig,
};
use arsym::report::{power_csv, results_csv, results_json};
use arsym::symmetry_stats::{cell_counts, chi_sq, omega_sq, CellPartition};
use arsym::{Error, Result};

#[derive(Parser)]
#[command(
    name = "arsym",
    version,
    about = "Residual-based symmetry tests for AR(p) innovations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a stationary AR(p) path; prints the p presample values then n observations
    Simulate(SimulateArgs),
    /// Omega-square symmetry test on a residual or series file
    TestOmega(TestOmegaArgs),
    /// Chi-square symmetry test on a residual or series file
    TestChisq(TestChisqArgs),
    /// Print or recompute simulated critical values of the omega-square limit
    CriticalValues(CriticalArgs),
    /// Analytic power of the chi-square test
    Power(PowerArgs),
    /// Run an experiment config file
    Experiment(ExperimentArgs),
}

fn parse_dist(s: &str) -> std::result::Result<DistModel, String> {
    s.parse::<DistModel>().map_err(|e| e.to_string())
}

#[derive(Args)]
struct SimulateArgs {
    /// AR coefficients, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coeffs: Vec<f64>,
    #[arg(long)]
    n: usize,
    /// Null innovation law, e.g. normal:1
    #[arg(long = "p", default_value = "normal:1", value_parser = parse_dist)]
    p_dist: DistModel,
    /// Alternative law mixed in with weight min(1, rho/sqrt(n))
    #[arg(long = "q", value_parser = parse_dist)]
    q_dist: Option<DistModel>,
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Outlier law for gamma > 0
    #[arg(long = "pi", value_parser = parse_dist)]
    pi_dist: Option<DistModel>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct InputArgs {
    /// Newline-separated decimals; `-` reads stdin
    input: PathBuf,
    /// Treat the input as residuals rather than an observed series
    #[arg(long)]
    precomputed_residuals: bool,
    /// AR order fitted by least squares when the input is a series
    #[arg(long, default_value_t = 1)]
    order: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Args)]
struct LimitArgs {
    /// Simulated bridge paths for the critical value
    #[arg(long)]
    paths: Option<usize>,
    /// Grid points per path
    #[arg(long)]
    grid: Option<usize>,
    /// Seed of the limit simulation
    #[arg(long = "limit-seed")]
    limit_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl LimitArgs {
    fn sim(&self) -> LimitSimConfig {
        let d = LimitSimConfig::default();
        LimitSimConfig {
            paths: self.paths.unwrap_or(d.paths),
            grid: self.grid.unwrap_or(d.grid),
            seed: self.limit_seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Args)]
struct TestOmegaArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    limit: LimitArgs,
}

#[derive(Args)]
struct CellArgs {
    /// Number of equal-probability positive cells under --p
    #[arg(long, conflicts_with = "cuts")]
    m: Option<usize>,
    /// Explicit cuts 0,x1,...,x_{m-1}
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cuts: Option<Vec<f64>>,
    /// Null law used to place equal-probability cuts
    #[arg(long = "p", default_value = "normal:1", value_parser = parse_dist)]
    p_dist: DistModel,
}

impl CellArgs {
    fn partition(&self) -> Result<CellPartition> {
        match &self.cuts {
            Some(c) => CellPartition::new(c.clone()),
            None => CellPartition::equiprobable(
                &self.p_dist,
                self.m.unwrap_or(arsym::config::DEFAULT_CELLS),
            ),
        }
    }
}

#[derive(Args)]
struct TestChisqArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    cells: CellArgs,
}

#[derive(Args)]
struct CriticalArgs {
    /// Levels, comma separated
    #[arg(long, default_value = "0.1,0.05,0.01", value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Recompute and overwrite stored values
    #[arg(long)]
    recompute: bool,
    /// List the stored table only
    #[arg(long, conflicts_with = "recompute")]
    list: bool,
    #[command(flatten)]
    limit: LimitArgs,
}

#[derive(Args)]
struct PowerArgs {
    /// Degrees of freedom with --lambda2; otherwise the number of
    /// equal-probability cells under --p
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Noncentrality for a direct evaluation
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_hyphen_values = true
    )]
    rho: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_hyphen_values = true
    )]
    gamma: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.5",
        allow_hyphen_values = true
    )]
    coeffs: Vec<f64>,
    #[arg(long = "q", default_value = "centered_exponential:1", value_parser = parse_dist)]
    q_dist: DistModel,
    #[arg(long = "pi", default_value = "point_mass:0", value_parser = parse_dist)]
    pi_dist: DistModel,
    #[arg(long, value_delimiter = ',', conflicts_with = "lambda2")]
    cuts: Option<Vec<f64>>,
    #[arg(long = "p", default_value = "normal:1", value_parser = parse_dist)]
    p_dist: DistModel,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Overrides master_seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides workers
    #[arg(long)]
    workers: Option<usize>,
    /// Write the summary CSV here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Long-format power curve CSV
    #[arg(long)]
    power_csv: Option<PathBuf>,
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    let mut text = String::new();
    if path == Path::new("-") {
        io::stdin().read_to_string(&mut text)?;
    } else {
        text = fs::read_to_string(path).map_err(|e| Error::Config {
            field: "input".into(),
            message: format!("{}: {e}", path.display()),
        })?;
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| Error::Config {
            field: "input".into(),
            message: format!("line {}: `{line}` is not a decimal number", i + 1),
        })?;
        if !v.is_finite() {
            return Err(Error::Config {
                field: "input".into(),
                message: format!("line {}: non-finite value", i + 1),
            });
        }
        out.push(v);
    }
    Ok(out)
}

fn load_residuals(args: &InputArgs) -> Result<ResidualSet> {
    let values = read_numbers(&args.input)?;
    if args.precomputed_residuals {
        return ResidualSet::new(values);
    }
    let series = Series::from_values(values, args.order)?;
    let beta = ols_estimate(&series, args.order)?;
    residuals(&series, &beta)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn decision(reject: bool) -> &'static str {
    if reject {
        "reject"
    } else {
        "fail to reject"
    }
}

fn cmd_simulate(a: SimulateArgs, out: &mut impl Write) -> Result<()> {
    let params = ArParams::new(a.coeffs)?;
    let burn_in = a.burn_in.unwrap_or_else(|| default_burn_in(params.order()));
    let q = a.q_dist.unwrap_or_else(|| a.p_dist.clone());
    let alt = MixtureAlternative::new(a.p_dist, q, a.rho)?;
    let seed_sim = arsym::seed::derive_seed(a.seed, 0);
    let mut series = simulate_stationary(&params, &alt.at(a.n)?, a.n, burn_in, seed_sim)?;
    if a.gamma > 0.0 {
        let pi = a.pi_dist.ok_or_else(|| Error::Config {
            field: "pi".into(),
            message: "required when gamma > 0".into(),
        })?;
        let model = ContaminationModel::new(a.gamma, pi)?;
        series = contaminate(&series, &model, arsym::seed::derive_seed(a.seed, 1))?;
    }
    for v in series.values() {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

fn cmd_test_omega(a: TestOmegaArgs, out: &mut impl Write) -> Result<()> {
    check_alpha(a.input.alpha)?;
    let res = load_residuals(&a.input)?;
    let stat = omega_sq(&res);
    let sim = a.limit.sim();
    let alpha = a.input.alpha;
    let crit = with_workers(a.limit.workers, || {
        CriticalValueCache::from_env().quantile(alpha, &sim)
    })??;
    let reject = stat > crit;
    writeln!(out, "n = {}", res.len())?;
    writeln!(out, "statistic omega_sq = {stat}")?;
    writeln!(
        out,
        "critical value c_{{{}}} = {crit} (limit simulation: paths={} grid={} seed={})",
        1.0 - alpha,
        sim.paths,
        sim.grid,
        sim.seed
    )?;
    writeln!(out, "rule: reject symmetry if omega_sq > c_{{1-alpha}}")?;
    writeln!(out, "decision: {}", decision(reject))?;
    Ok(())
}

fn cmd_test_chisq(a: TestChisqArgs, out: &mut impl Write) -> Result<()> {
    check_alpha(a.input.alpha)?;
    let res = load_residuals(&a.input)?;
    let cells = a.cells.partition()?;
    let counts = cell_counts(&res, &cells);
    let stat = chi_sq(&counts)?;
    let m = cells.m();
    let crit = chisq_quantile(m, 1.0 - a.input.alpha)?;
    let reject = stat > crit;
    writeln!(out, "n = {}", res.len())?;
    writeln!(out, "cells m = {m}, cuts = {:?}", cells.cuts())?;
    writeln!(
        out,
        "counts plus = {:?}, minus = {:?}",
        counts.nu_plus, counts.nu_minus
    )?;
    writeln!(out, "statistic chi_sq = {stat}")?;
    writeln!(
        out,
        "critical value chi2_{{{}}}({m}) = {crit}",
        1.0 - a.input.alpha
    )?;
    writeln!(out, "rule: reject symmetry if chi_sq > chi2_{{1-alpha}}(m)")?;
    writeln!(out, "decision: {}", decision(reject))?;
    Ok(())
}

fn cmd_critical(a: CriticalArgs, out: &mut impl Write) -> Result<()> {
    let cache = CriticalValueCache::from_env();
    if a.list {
        match cache.path() {
            Some(p) => writeln!(out, "# table {}", p.display())?,
            None => writeln!(
                out,
                "# no cache directory set ({})",
                arsym::limit_laws::CACHE_DIR_ENV
            )?,
        }
        writeln!(out, "alpha,paths,grid,seed,value")?;
        for (alpha, sim, v) in cache.entries()? {
            writeln!(out, "{alpha},{},{},{},{v}", sim.paths, sim.grid, sim.seed)?;
        }
        return Ok(());
    }
    let sim = a.limit.sim();
    writeln!(out, "alpha,paths,grid,seed,value")?;
    for &alpha in &a.alpha {
        let v = with_workers(a.limit.workers, || {
            if a.recompute {
                cache.recompute(alpha, &sim)
            } else {
                cache.quantile(alpha, &sim)
            }
        })??;
        writeln!(out, "{alpha},{},{},{},{v}", sim.paths, sim.grid, sim.seed)?;
    }
    Ok(())
}

fn cmd_power(a: PowerArgs, out: &mut impl Write) -> Result<()> {
    if let (Some(m), Some(l2)) = (a.m, a.lambda2) {
        writeln!(out, "{}", asymptotic_power(m, a.alpha, l2)?)?;
        return Ok(());
    }
    if a.lambda2.is_some() {
        return Err(Error::Config {
            field: "m".into(),
            message: "--lambda2 needs --m".into(),
        });
    }
    let cells = CellArgs {
        m: a.m,
        cuts: a.cuts.clone(),
        p_dist: a.p_dist.clone(),
    }
    .partition()?;
    let m = cells.m();
    let coeffs = ArParams::new(a.coeffs)?;
    writeln!(out, "rho,gamma,lambda2,analytic")?;
    for &rho in &a.rho {
        for &gamma in &a.gamma {
            let input = ChiSqAnalysisInput {
                cells: cells.clone(),
                coeffs: coeffs.clone(),
                p_dist: a.p_dist.clone(),
                q_dist: a.q_dist.clone(),
                pi_dist: a.pi_dist.clone(),
                rho,
                gamma,
            };
            let l2 = noncentrality(&input)?;
            writeln!(
                out,
                "{rho},{gamma},{l2},{}",
                asymptotic_power(m, a.alpha, l2)?
            )?;
        }
    }
    Ok(())
}

fn write_to(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Config {
        field: "output".into(),
        message: format!("{}: {e}", path.display()),
    })
}

fn cmd_experiment(a: ExperimentArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(&a.config)?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if a.workers.is_some() {
        cfg.workers = a.workers;
    }
    cfg.validate()?;
    let results = run_experiment(&cfg)?;
    let csv = results_csv(&results)?;
    match &a.csv {
        Some(p) => write_to(p, &csv)?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(p) = &a.json {
        write_to(p, &results_json(&results)?)?;
    }
    if let Some(p) = &a.power_csv {
        write_to(p, &power_csv(&results)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a, &mut out),
        Command::TestOmega(a) => cmd_test_omega(a, &mut out),
        Command::TestChisq(a) => cmd_test_chisq(a, &mut out),
        Command::CriticalValues(a) => cmd_critical(a, &mut out),
        Command::Power(a) => cmd_power(a, &mut out),
        Command::Experiment(a) => cmd_experiment(a, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}

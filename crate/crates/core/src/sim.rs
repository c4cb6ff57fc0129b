//! Seeded Monte Carlo risk study: percentage relative improvement in risk
//! (PRIR) of each estimator over `X`, `S/n` and `(X, S/n)`.
//!
//! Streams: scenario `(p, n, m, s0, q, cov_kind)` gets the key
//! `mix_seed(base_seed, content)`; stream index 0 builds `Θ`, index `r + 1`
//! drives replication `r`. Replications run in parallel and are reduced in
//! index order, so results do not depend on the number of workers.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::conditions::{default_config, EstimatorConfig, EstimatorLabel};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{
    build_scenario, matrix_normal_with_factor, mix_seed, wishart_with_factor, CovKind, DataPair,
    ModelDims, Parameters, RngStream, ScenarioSpec,
};
use crate::risk::{loss_scalar_quad, prir, stein_against};

pub const CSV_HEADER: &str =
    "p,n,m,s0,q,cov_kind,estimator,prir_theta,se_theta,prir_sigma,se_sigma,prir_kl,se_kl,reps,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// One `Θ` per scenario, shared by all replications.
    #[default]
    FixedPerScenario,
    /// Fresh singular vectors for every replication.
    PerReplication,
}

impl ThetaMode {
    pub fn name(self) -> &'static str {
        match self {
            ThetaMode::FixedPerScenario => "fixed_per_scenario",
            ThetaMode::PerReplication => "per_replication",
        }
    }
}

impl std::str::FromStr for ThetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed_per_scenario" => Ok(ThetaMode::FixedPerScenario),
            "per_replication" => Ok(ThetaMode::PerReplication),
            _ => Err(Error::Parse(format!(
                "unknown theta_mode `{s}` (expected fixed_per_scenario or per_replication)"
            ))),
        }
    }
}

/// An estimator in the grid: a label resolved per scenario by
/// [`default_config`], or a fixed configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Default(EstimatorLabel),
    Custom(EstimatorConfig),
}

impl EstimatorSpec {
    pub fn label(&self) -> EstimatorLabel {
        match self {
            EstimatorSpec::Default(l) => *l,
            EstimatorSpec::Custom(c) => c.label,
        }
    }

    fn resolve(&self, dims: ModelDims) -> Result<EstimatorConfig> {
        match self {
            EstimatorSpec::Default(l) => default_config(dims, *l),
            EstimatorSpec::Custom(c) => Ok(*c),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentGrid {
    pub scenarios: Vec<ScenarioSpec>,
    pub estimators: Vec<EstimatorSpec>,
    pub replications: usize,
    pub base_seed: u64,
    pub theta_mode: ThetaMode,
}

/// Stream key of a scenario, a hash of its content and the base seed.
pub fn scenario_seed(base_seed: u64, dims: ModelDims, s0: f64, q: f64, cov_kind: CovKind) -> u64 {
    let kind = match cov_kind {
        CovKind::Equicorr => 0,
        CovKind::Ar => 1,
    };
    mix_seed(
        base_seed,
        &[dims.p() as u64, dims.n() as u64, dims.m() as u64, s0.to_bits(), q.to_bits(), kind],
    )
}

/// The cross product `dims × cov_kinds × s0 × q`, keeping a single `q` for
/// `s0 = 0` where `q` has no effect.
pub fn expand_scenarios(
    dims: &[ModelDims],
    s0: &[f64],
    q: &[f64],
    cov_kinds: &[CovKind],
    base_seed: u64,
) -> Vec<ScenarioSpec> {
    let mut out = Vec::new();
    for &kind in cov_kinds {
        for &s in s0 {
            let qs: &[f64] = if s == 0.0 { &q[..q.len().min(1)] } else { q };
            for &qq in qs {
                for &d in dims {
                    out.push(ScenarioSpec {
                        dims: d,
                        s0: s,
                        q: qq,
                        cov_kind: kind,
                        seed: scenario_seed(base_seed, d, s, qq, kind),
                    });
                }
            }
        }
    }
    out
}

/// Risk summary of one (scenario, estimator) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub scenario: ScenarioSpec,
    pub estimator: EstimatorLabel,
    pub prir_theta: f64,
    pub se_theta: f64,
    pub prir_sigma: f64,
    pub se_sigma: f64,
    pub prir_kl: f64,
    pub se_kl: f64,
    /// Mean baseline losses `L_Q(X)`, `L_S(S/n)`, `D_KL(X, S/n)`.
    pub risk_base: [f64; 3],
    /// Mean estimator losses in the same order.
    pub risk_est: [f64; 3],
    /// Monte Carlo standard error of `risk_base[0]`, for the `mp` check.
    pub se_base_theta: f64,
    pub reps: usize,
    pub seed: u64,
    pub error: Option<String>,
}

impl RiskReport {
    fn failed(scenario: ScenarioSpec, estimator: EstimatorLabel, reps: usize, seed: u64, msg: String) -> Self {
        Self {
            scenario,
            estimator,
            prir_theta: f64::NAN,
            se_theta: f64::NAN,
            prir_sigma: f64::NAN,
            se_sigma: f64::NAN,
            prir_kl: f64::NAN,
            se_kl: f64::NAN,
            risk_base: [f64::NAN; 3],
            risk_est: [f64::NAN; 3],
            se_base_theta: f64::NAN,
            reps,
            seed,
            error: Some(msg),
        }
    }
}

type Losses = [f64; 3];

struct Replication {
    base: Losses,
    est: Vec<std::result::Result<Losses, String>>,
}

fn losses_of(mean: &Matrix, cov: &Matrix, truth: &Parameters) -> Result<Losses> {
    let lq = loss_scalar_quad(mean, truth)?;
    let ls = stein_against(cov, truth)?;
    let m = truth.theta().nrows() as f64;
    Ok([lq, ls, 0.5 * m * ls + 0.5 * lq])
}

fn replicate(
    spec: &ScenarioSpec,
    fixed: &Parameters,
    sigma_l: &Matrix,
    mode: ThetaMode,
    configs: &[Option<EstimatorConfig>],
    r: usize,
) -> Result<Replication> {
    let mut rng = RngStream::new(spec.seed, r as u64 + 1);
    let fresh;
    let truth = match mode {
        ThetaMode::FixedPerScenario => fixed,
        ThetaMode::PerReplication => {
            fresh = build_scenario(spec, &mut rng)?;
            &fresh
        }
    };
    let n = spec.dims.n();
    let x = matrix_normal_with_factor(truth.theta(), sigma_l, &mut rng);
    let s = wishart_with_factor(n as f64, sigma_l, &mut rng)?;
    let data = DataPair::new(x, s, n)?;
    let base = losses_of(data.x(), &(data.s() / n as f64), truth)?;
    let est = configs
        .iter()
        .map(|cfg| match cfg {
            None => Err(String::new()),
            Some(cfg) => {
                let run = || -> Result<Losses> {
                    let mean = cfg.estimate_mean(&data)?;
                    let cov = cfg.estimate_cov(&data)?;
                    losses_of(&mean, &cov, truth)
                };
                run().map_err(|e| format!("replication {r}: {e}"))
            }
        })
        .collect();
    Ok(Replication { base, est })
}

/// PRIR and its delta-method standard error from paired losses.
pub fn paired_prir(base: &[f64], est: &[f64]) -> Result<(f64, f64)> {
    let n = base.len() as f64;
    let mb = base.iter().sum::<f64>() / n;
    let me = est.iter().sum::<f64>() / n;
    let value = prir(mb, me)?;
    if base.len() < 2 {
        return Ok((value, 0.0));
    }
    let ratio = me / mb;
    let (mut vb, mut ve, mut cbe) = (0.0, 0.0, 0.0);
    for (b, e) in base.iter().zip(est) {
        vb += (b - mb) * (b - mb);
        ve += (e - me) * (e - me);
        cbe += (b - mb) * (e - me);
    }
    let k = n - 1.0;
    let var_ratio = (ve / k - 2.0 * ratio * cbe / k + ratio * ratio * vb / k) / (n * mb * mb);
    Ok((value, 100.0 * var_ratio.max(0.0).sqrt()))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_scenario(grid: &ExperimentGrid, spec: &ScenarioSpec) -> Vec<RiskReport> {
    let reps = grid.replications;
    let seed = grid.base_seed;
    let configs: Vec<Result<EstimatorConfig>> = grid.estimators.iter().map(|e| e.resolve(spec.dims)).collect();
    let fail_all = |msg: String| -> Vec<RiskReport> {
        grid.estimators
            .iter()
            .map(|e| RiskReport::failed(*spec, e.label(), reps, seed, msg.clone()))
            .collect()
    };

    let mut setup = RngStream::new(spec.seed, 0);
    let fixed = match build_scenario(spec, &mut setup) {
        Ok(p) => p,
        Err(e) => return fail_all(format!("scenario setup: {e}")),
    };
    let sigma_l = fixed.sigma_chol().l();
    let usable: Vec<Option<EstimatorConfig>> = configs.iter().map(|c| c.as_ref().ok().copied()).collect();

    let draws: Result<Vec<Replication>> = (0..reps)
        .into_par_iter()
        .map(|r| replicate(spec, &fixed, &sigma_l, grid.theta_mode, &usable, r))
        .collect();
    let draws = match draws {
        Ok(d) => d,
        Err(e) => return fail_all(format!("sampling: {e}")),
    };

    let base: [Vec<f64>; 3] = std::array::from_fn(|k| draws.iter().map(|d| d.base[k]).collect());
    let (base_theta, se_base_theta) = mean_se(&base[0]);
    let risk_base: [f64; 3] = std::array::from_fn(|k| mean_se(&base[k]).0);

    let mut out = Vec::with_capacity(configs.len());
    for (j, (cfg, spec_e)) in configs.iter().zip(&grid.estimators).enumerate() {
        let label = spec_e.label();
        if let Err(e) = cfg {
            out.push(RiskReport::failed(*spec, label, reps, seed, e.to_string()));
            continue;
        }
        let mut est: [Vec<f64>; 3] = Default::default();
        let mut err = None;
        for d in &draws {
            match &d.est[j] {
                Ok(l) => {
                    for k in 0..3 {
                        est[k].push(l[k]);
                    }
                }
                Err(e) => {
                    err = Some(e.clone());
                    break;
                }
            }
        }
        if let Some(e) = err {
            out.push(RiskReport::failed(*spec, label, reps, seed, e));
            continue;
        }
        let prirs: Result<Vec<(f64, f64)>> = (0..3).map(|k| paired_prir(&base[k], &est[k])).collect();
        match prirs {
            Ok(p) => out.push(RiskReport {
                scenario: *spec,
                estimator: label,
                prir_theta: p[0].0,
                se_theta: p[0].1,
                prir_sigma: p[1].0,
                se_sigma: p[1].1,
                prir_kl: p[2].0,
                se_kl: p[2].1,
                risk_base: [base_theta, risk_base[1], risk_base[2]],
                risk_est: std::array::from_fn(|k| mean_se(&est[k]).0),
                se_base_theta,
                reps,
                seed,
                error: None,
            }),
            Err(e) => out.push(RiskReport::failed(*spec, label, reps, seed, e.to_string())),
        }
    }
    out
}

/// Runs every (scenario, estimator) cell on the current rayon pool.
/// Failing cells carry an `error` and do not stop the run.
pub fn run_experiment(grid: &ExperimentGrid) -> Vec<RiskReport> {
    grid.scenarios.iter().flat_map(|s| run_scenario(grid, s)).collect()
}

/// [`run_experiment`] on a dedicated pool of `jobs` workers (all cores when
/// `None`).
pub fn run_experiment_with_jobs(grid: &ExperimentGrid, jobs: Option<usize>) -> Result<Vec<RiskReport>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::Parameter("jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_experiment(grid)))
}

/// `%.6g`-style formatting: six significant digits, trailing zeros dropped.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "NA".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    // Rounding can bump the exponent (e.g. 999999.7).
    let rounded: f64 = format!("{:.5e}", x).parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if !(-4..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mant, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().unwrap_or(0);
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV body with [`CSV_HEADER`].
pub fn report_csv(reports: &[RiskReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let s = &r.scenario;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.dims.p(),
            s.dims.n(),
            s.dims.m(),
            fmt_g6(s.s0),
            fmt_g6(s.q),
            s.cov_kind.name(),
            r.estimator,
            fmt_g6(r.prir_theta),
            fmt_g6(r.se_theta),
            fmt_g6(r.prir_sigma),
            fmt_g6(r.se_sigma),
            fmt_g6(r.prir_kl),
            fmt_g6(r.se_kl),
            r.reps,
            r.seed
        );
    }
    out
}

/// Key-value manifest describing the grid, the scenario stream keys and any
/// failed cells.
pub fn manifest(grid: &ExperimentGrid, reports: &[RiskReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "toolkit = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "base_seed = {}", grid.base_seed);
    let _ = writeln!(out, "replications = {}", grid.replications);
    let _ = writeln!(out, "theta_mode = {}", grid.theta_mode.name());
    let labels: Vec<&str> = grid.estimators.iter().map(|e| e.label().name()).collect();
    let _ = writeln!(out, "estimators = {}", labels.join(","));
    let _ = writeln!(out, "scenarios = {}", grid.scenarios.len());
    for (i, s) in grid.scenarios.iter().enumerate() {
        let _ = writeln!(
            out,
            "scenario.{i} = p={} n={} m={} s0={} q={} cov_kind={} stream_key={}",
            s.dims.p(),
            s.dims.n(),
            s.dims.m(),
            fmt_g6(s.s0),
            fmt_g6(s.q),
            s.cov_kind.name(),
            s.seed
        );
    }
    let mut seen = BTreeSet::new();
    for r in reports {
        let s = &r.scenario;
        if r.error.is_none() && seen.insert(s.seed) {
            let mp = (s.dims.m() * s.dims.p()) as f64;
            let _ = writeln!(
                out,
                "baseline_quadratic_risk.{} = {} (se {}, analytic mp = {})",
                s.seed,
                fmt_g6(r.risk_base[0]),
                fmt_g6(r.se_base_theta),
                mp
            );
        }
    }
    for r in reports {
        if let Some(e) = &r.error {
            let s = &r.scenario;
            let _ = writeln!(
                out,
                "error.{}.{} = p={} n={} m={} s0={} q={} cov_kind={}: {}",
                s.seed,
                r.estimator,
                s.dims.p(),
                s.dims.n(),
                s.dims.m(),
                fmt_g6(s.s0),
                fmt_g6(s.q),
                s.cov_kind.name(),
                e.replace('\n', " ")
            );
        }
    }
    out
}

/// `<path>.manifest`.
pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

/// Writes the CSV report to `path` and the manifest next to it.
pub fn emit_report(reports: &[RiskReport], grid: &ExperimentGrid, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Parameter("no reports to write".into()));
    }
    fs::write(path, report_csv(reports))?;
    fs::write(manifest_path(path), manifest(grid, reports))?;
    Ok(())
}

const KNOWN_KEYS: [&str; 8] = ["dims", "s0", "q", "cov_kinds", "estimators", "reps", "seed", "theta_mode"];

fn float_list(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Vec<f64> {
    let Some(v) = table.get(key) else {
        errors.push(format!("missing key `{key}`"));
        return Vec::new();
    };
    let Some(arr) = v.as_array() else {
        errors.push(format!("`{key}` must be an array of numbers"));
        return Vec::new();
    };
    if arr.is_empty() {
        errors.push(format!("`{key}` must not be empty"));
    }
    let mut out = Vec::new();
    for (i, x) in arr.iter().enumerate() {
        match x.as_float().or_else(|| x.as_integer().map(|i| i as f64)) {
            Some(f) if f.is_finite() => out.push(f),
            _ => errors.push(format!("`{key}[{i}]` must be a finite number, got {x}")),
        }
    }
    out
}

fn string_list(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Vec<(usize, String)> {
    let Some(v) = table.get(key) else {
        errors.push(format!("missing key `{key}`"));
        return Vec::new();
    };
    let Some(arr) = v.as_array() else {
        errors.push(format!("`{key}` must be an array of strings"));
        return Vec::new();
    };
    if arr.is_empty() {
        errors.push(format!("`{key}` must not be empty"));
    }
    let mut out = Vec::new();
    for (i, x) in arr.iter().enumerate() {
        match x.as_str() {
            Some(s) => out.push((i, s.to_string())),
            None => errors.push(format!("`{key}[{i}]` must be a string, got {x}")),
        }
    }
    out
}

fn positive_int(table: &toml::Table, key: &str, errors: &mut Vec<String>) -> Option<i64> {
    match table.get(key) {
        None => {
            errors.push(format!("missing key `{key}`"));
            None
        }
        Some(v) => match v.as_integer() {
            Some(i) if i >= 0 => Some(i),
            _ => {
                errors.push(format!("`{key}` must be a nonnegative integer, got {v}"));
                None
            }
        },
    }
}

/// Parses an experiment grid.
///
/// ```toml
/// dims = [[10, 10, 5], [10, 25, 30]]   # (p, n, m)
/// s0 = [0.0, 1.0]
/// q = [1.0, 0.5]
/// cov_kinds = ["equicorr", "ar"]
/// estimators = ["EM", "G1", "G2", "GB"]
/// reps = 5000
/// seed = 20240101
/// theta_mode = "fixed_per_scenario"       # optional
/// ```
///
/// Every schema violation is reported in one [`Error::Config`].
pub fn parse_grid(text: &str) -> Result<ExperimentGrid> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut errors = Vec::new();
    for key in table.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errors.push(format!("unknown key `{key}`"));
        }
    }

    let mut dims = Vec::new();
    match table.get("dims") {
        None => errors.push("missing key `dims`".into()),
        Some(v) => match v.as_array() {
            None => errors.push("`dims` must be an array of [p, n, m] triples".into()),
            Some(arr) => {
                if arr.is_empty() {
                    errors.push("`dims` must not be empty".into());
                }
                for (i, t) in arr.iter().enumerate() {
                    let triple: Option<Vec<i64>> =
                        t.as_array().map(|a| a.iter().filter_map(|x| x.as_integer()).collect());
                    match triple {
                        Some(v) if v.len() == 3 && t.as_array().map(|a| a.len()) == Some(3) => {
                            if v.iter().any(|&x| x <= 0) {
                                errors.push(format!("`dims[{i}]` entries must be positive, got {t}"));
                                continue;
                            }
                            match ModelDims::from_pnm(v[0] as usize, v[1] as usize, v[2] as usize) {
                                Ok(d) => dims.push(d),
                                Err(e) => errors.push(format!("`dims[{i}]` = {t}: {e}")),
                            }
                        }
                        _ => errors.push(format!("`dims[{i}]` must be an integer triple [p, n, m], got {t}")),
                    }
                }
            }
        },
    }

    let s0 = float_list(&table, "s0", &mut errors);
    for (i, v) in s0.iter().enumerate() {
        if *v < 0.0 {
            errors.push(format!("`s0[{i}]` must be nonnegative, got {v}"));
        }
    }
    let q = float_list(&table, "q", &mut errors);

    let mut cov_kinds = Vec::new();
    for (i, s) in string_list(&table, "cov_kinds", &mut errors) {
        match s.parse::<CovKind>() {
            Ok(k) => cov_kinds.push(k),
            Err(_) => errors.push(format!("`cov_kinds[{i}]` = \"{s}\" is not equicorr or ar")),
        }
    }
    let mut estimators = Vec::new();
    for (i, s) in string_list(&table, "estimators", &mut errors) {
        match s.parse::<EstimatorLabel>() {
            Ok(l) => estimators.push(EstimatorSpec::Default(l)),
            Err(_) => errors.push(format!("`estimators[{i}]` = \"{s}\" is not GB, G1, G2 or EM")),
        }
    }

    let reps = positive_int(&table, "reps", &mut errors);
    if reps == Some(0) {
        errors.push("`reps` must be at least 1".into());
    }
    let seed = positive_int(&table, "seed", &mut errors);

    let theta_mode = match table.get("theta_mode") {
        None => ThetaMode::default(),
        Some(v) => match v.as_str().map(str::parse::<ThetaMode>) {
            Some(Ok(m)) => m,
            _ => {
                errors.push(format!("`theta_mode` must be \"fixed_per_scenario\" or \"per_replication\", got {v}"));
                ThetaMode::default()
            }
        },
    };

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    let base_seed = seed.unwrap_or(0) as u64;
    Ok(ExperimentGrid {
        scenarios: expand_scenarios(&dims, &s0, &q, &cov_kinds, base_seed),
        estimators,
        replications: reps.unwrap_or(1) as usize,
        base_seed,
        theta_mode,
    })
}

pub fn load_grid(path: &Path) -> Result<ExperimentGrid> {
    parse_grid(&fs::read_to_string(path)?)
}

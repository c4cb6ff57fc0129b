//! Command-line front end: `estimate`, `simulate`, `check` and `oracle`.
//!
//! Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::conditions::{
    a_low, a_upp, c_low, condition_table, default_config, ConditionRow, CovParams,
    EstimatorConfig, EstimatorLabel, MeanParams, Verdict,
};
use crate::error::Error;
use crate::estimators::{efron_morris_coef, GParams, PriorHyper};
use crate::io::{format_matrix_csv, read_matrix_csv, write_matrix_csv};
use crate::linalg::Matrix;
use crate::model::{DataPair, ModelDims, RngStream};
use crate::posterior::{posterior_lambda_mean, MIN_SAMPLES};
use crate::sim::{emit_report, load_grid, manifest_path, run_experiment_with_jobs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gbshrink", version, about = "Generalized Bayes shrinkage estimators for matrix-variate normal models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate Θ and Σ from CSV matrices X (m×p) and S (p×p).
    Estimate(EstimateArgs),
    /// Run a Monte Carlo risk study described by a TOML grid.
    Simulate(SimulateArgs),
    /// Evaluate dominance conditions for given or default parameters.
    Check(CheckArgs),
    /// Monte Carlo estimate of E[Λ | F] under the hierarchical prior.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV file holding X (m×p).
    #[arg(long)]
    pub x: PathBuf,
    /// CSV file holding S (p×p, symmetric positive definite).
    #[arg(long)]
    pub s: PathBuf,
    /// Degrees of freedom of S.
    #[arg(long)]
    pub n: usize,
    /// GB, G1, G2 or EM.
    #[arg(long, default_value = "GB")]
    pub estimator: EstimatorLabel,
    /// Prior hyperparameter a (GB; needs --c).
    #[arg(long, allow_negative_numbers = true, requires = "c")]
    pub a: Option<f64>,
    /// Prior hyperparameter c (GB; needs --a).
    #[arg(long, allow_negative_numbers = true, requires = "a")]
    pub c: Option<f64>,
    /// Shrinkage constant k0 for the GB mean alone.
    #[arg(long, conflicts_with_all = ["a", "c"])]
    pub k0: Option<f64>,
    /// α of the G1/G2 family (needs --beta).
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    /// β of the G1/G2 family (needs --alpha).
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    /// Directory for mean.csv and cov.csv instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML experiment grid.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV report path; the manifest goes to `<out>.manifest`.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config replication count.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    /// Resolve the recommended parameters of GB, G1, G2 or EM first.
    #[arg(long, conflicts_with_all = ["alpha", "beta", "cov_alpha", "cov_beta", "a", "b", "c"])]
    pub defaults: Option<EstimatorLabel>,
    /// α of the mean family.
    #[arg(long, requires = "beta")]
    pub alpha: Option<f64>,
    /// β of the mean family.
    #[arg(long, requires = "alpha")]
    pub beta: Option<f64>,
    /// α of the covariance family.
    #[arg(long, requires = "cov_beta")]
    pub cov_alpha: Option<f64>,
    /// β of the covariance family.
    #[arg(long, requires = "cov_alpha")]
    pub cov_beta: Option<f64>,
    /// Prior hyperparameter a.
    #[arg(long, allow_negative_numbers = true, requires = "c")]
    pub a: Option<f64>,
    /// Prior hyperparameter b (default: the closed-form a + ℓ − n).
    #[arg(long, allow_negative_numbers = true, requires = "a")]
    pub b: Option<f64>,
    /// Prior hyperparameter c.
    #[arg(long, allow_negative_numbers = true, requires = "a")]
    pub c: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Eigenvalues F as a comma-separated list of length min(m, p).
    #[arg(long, value_delimiter = ',', required = true)]
    pub f: Vec<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    /// Default: the closed-form a + ℓ − n.
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads (default: all cores). Does not change results.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Input problems exit with 1, numerical failures with 2.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

type CmdResult = std::result::Result<(), Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(&a, out),
        Command::Simulate(a) => cmd_simulate(&a, out, err),
        Command::Check(a) => cmd_check(&a, out),
        Command::Oracle(a) => cmd_oracle(&a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Numerical(msg)) => {
            let _ = writeln!(err, "numerical failure: {msg}");
            EXIT_NUMERICAL
        }
    }
}

/// Six decimals with trailing zeros dropped.
fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn case_name(dims: ModelDims) -> &'static str {
    if dims.wide() {
        "p > m"
    } else {
        "m >= p"
    }
}

fn resolve_estimate_config(a: &EstimateArgs, dims: ModelDims) -> Result<EstimatorConfig, Failure> {
    let label = a.estimator;
    match label {
        EstimatorLabel::Gb => {
            if let Some(k0) = a.k0 {
                return Ok(EstimatorConfig { label, mean: MeanParams::K0(k0), cov: CovParams::Unbiased });
            }
            if let (Some(pa), Some(pc)) = (a.a, a.c) {
                let hyper = PriorHyper::closed_form(pa, pc, dims);
                hyper.validate(dims).map_err(invalid)?;
                let k0 = hyper.k0(dims).map_err(invalid)?;
                return Ok(EstimatorConfig { label, mean: MeanParams::K0(k0), cov: CovParams::Hyper(hyper) });
            }
            Ok(default_config(dims, label).map_err(invalid)?)
        }
        EstimatorLabel::G1 | EstimatorLabel::G2 => {
            if let (Some(alpha), Some(beta)) = (a.alpha, a.beta) {
                let g = GParams::new(alpha, beta).map_err(invalid)?;
                return Ok(EstimatorConfig { label, mean: MeanParams::G(g), cov: CovParams::G(g) });
            }
            Ok(default_config(dims, label).map_err(invalid)?)
        }
        EstimatorLabel::Em => Ok(default_config(dims, label).map_err(invalid)?),
    }
}

fn cmd_estimate(a: &EstimateArgs, out: &mut dyn Write) -> CmdResult {
    let x = read_matrix_csv(&a.x).map_err(invalid)?;
    let s = read_matrix_csv(&a.s).map_err(invalid)?;
    // Input checks on S are validation errors, not numerical ones.
    let data = DataPair::new(x, s, a.n).map_err(invalid)?;
    let dims = data.dims();
    let cfg = resolve_estimate_config(a, dims)?;

    writeln!(out, "estimator = {}", cfg.label)?;
    writeln!(out, "case = {} {}", case_name(dims), dims)?;
    match cfg.mean {
        MeanParams::K0(k0) => {
            writeln!(out, "k0 = {}", num(k0))?;
            writeln!(out, "alpha = {}", num(k0))?;
            writeln!(out, "beta = {}", num(1.0 - k0))?;
        }
        MeanParams::G(g) => {
            writeln!(out, "alpha = {}", num(g.alpha))?;
            writeln!(out, "beta = {}", num(g.beta))?;
        }
        MeanParams::Em(c) => writeln!(out, "c_em = {}", num(c))?,
    }
    if let CovParams::Hyper(h) = cfg.cov {
        writeln!(out, "a = {}\nb = {}\nc = {}", num(h.a), num(h.b), num(h.c))?;
    }
    let mean = cfg.estimate_mean(&data)?;
    // A bare k0 fixes only the mean estimator.
    let cov = match (cfg.label, cfg.cov) {
        (EstimatorLabel::Gb, CovParams::Unbiased) => None,
        _ => Some(cfg.estimate_cov(&data)?),
    };
    if cov.is_none() {
        writeln!(out, "note = covariance estimate needs --a and --c")?;
    }
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write_matrix_csv(&dir.join("mean.csv"), &mean)?;
            writeln!(out, "mean -> {}", dir.join("mean.csv").display())?;
            if let Some(c) = &cov {
                write_matrix_csv(&dir.join("cov.csv"), c)?;
                writeln!(out, "cov -> {}", dir.join("cov.csv").display())?;
            }
        }
        None => {
            writeln!(out, "[mean]")?;
            out.write_all(format_matrix_csv(&mean).as_bytes())?;
            if let Some(c) = &cov {
                writeln!(out, "[cov]")?;
                out.write_all(format_matrix_csv(c).as_bytes())?;
            }
        }
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut grid = load_grid(&a.config).map_err(invalid)?;
    if let Some(seed) = a.seed {
        // Re-key the scenarios under the new base seed.
        grid.base_seed = seed;
        for s in &mut grid.scenarios {
            s.seed = crate::sim::scenario_seed(seed, s.dims, s.s0, s.q, s.cov_kind);
        }
    }
    if let Some(reps) = a.reps {
        if reps == 0 {
            return Err(invalid("--reps must be at least 1"));
        }
        grid.replications = reps;
    }
    let reports = run_experiment_with_jobs(&grid, a.jobs).map_err(invalid)?;
    emit_report(&reports, &grid, &a.out)?;
    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    writeln!(out, "wrote {} rows to {}", reports.len(), a.out.display())?;
    writeln!(out, "manifest {}", manifest_path(&a.out).display())?;
    if failed > 0 {
        writeln!(err, "warning: {failed} cells failed; see the manifest")?;
    }
    Ok(())
}

fn print_rows(out: &mut dyn Write, rows: &[ConditionRow]) -> std::io::Result<()> {
    if rows.is_empty() {
        return writeln!(out, "no conditions apply");
    }
    writeln!(out, "{:<16} {:>14} {:>14}  verdict", "condition", "value", "bound")?;
    for r in rows {
        let v = r.value.map(num).unwrap_or_else(|| "-".into());
        let b = r.bound.map(num).unwrap_or_else(|| "-".into());
        write!(out, "{:<16} {:>14} {:>14}  {}", r.name, v, b, r.verdict)?;
        if let Verdict::NotApplicable(why) = &r.verdict {
            write!(out, " ({why})")?;
        }
        writeln!(out)?;
        if let Some(note) = &r.note {
            writeln!(out, "  note: {note}")?;
        }
    }
    Ok(())
}

fn cmd_check(a: &CheckArgs, out: &mut dyn Write) -> CmdResult {
    let dims = ModelDims::from_pnm(a.p, a.n, a.m).map_err(invalid)?;
    writeln!(out, "dims = {} ({})", dims, case_name(dims))?;
    if dims.p() > dims.m() + 1 {
        writeln!(out, "c_low = {}", num(c_low(dims)))?;
    }
    if !dims.wide() {
        writeln!(out, "a_upp = {} (a must exceed {})", num(a_upp(dims)), num(a_low(dims)))?;
    }
    let rows = if let Some(label) = a.defaults {
        let cfg = default_config(dims, label).map_err(invalid)?;
        writeln!(out, "defaults = {label}")?;
        match (cfg.mean, cfg.cov) {
            (MeanParams::K0(k0), CovParams::Hyper(h)) => {
                writeln!(out, "a = {}\nb = {}\nc = {}\nk0 = {}", num(h.a), num(h.b), num(h.c), num(k0))?;
                condition_table(dims, None, None, Some(&h))
            }
            (MeanParams::G(g), CovParams::G(_)) => {
                writeln!(out, "alpha = {}\nbeta = {}", num(g.alpha), num(g.beta))?;
                condition_table(dims, Some(g), Some(g), None)
            }
            _ => {
                writeln!(out, "c_em = {}", num(efron_morris_coef(dims)))?;
                Vec::new()
            }
        }
    } else {
        let mean = match (a.alpha, a.beta) {
            (Some(al), Some(be)) => Some(GParams::new(al, be).map_err(invalid)?),
            _ => None,
        };
        let cov = match (a.cov_alpha, a.cov_beta) {
            (Some(al), Some(be)) => Some(GParams::new(al, be).map_err(invalid)?),
            _ => None,
        };
        let hyper = match (a.a, a.c) {
            (Some(pa), Some(pc)) => {
                let mut h = PriorHyper::closed_form(pa, pc, dims);
                if let Some(b) = a.b {
                    h.b = b;
                }
                writeln!(out, "a = {}\nb = {}\nc = {}", num(h.a), num(h.b), num(h.c))?;
                if let Ok(k0) = h.k0(dims) {
                    writeln!(out, "k0 = {}", num(k0))?;
                }
                Some(h)
            }
            _ => None,
        };
        if mean.is_none() && cov.is_none() && hyper.is_none() {
            return Err(invalid("give --defaults, or --alpha/--beta, --cov-alpha/--cov-beta, --a/--c"));
        }
        condition_table(dims, mean, cov, hyper.as_ref())
    };
    print_rows(out, &rows)?;
    Ok(())
}

fn matrix_lines(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.6e}", m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn cmd_oracle(a: &OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let dims = ModelDims::new(a.m, a.p, a.n).map_err(invalid)?;
    if a.samples < MIN_SAMPLES {
        return Err(invalid(format!("--samples must be at least {MIN_SAMPLES}")));
    }
    let mut hyper = PriorHyper::closed_form(a.a, a.c, dims);
    if let Some(b) = a.b {
        hyper.b = b;
    }
    hyper.validate(dims).map_err(invalid)?;
    if a.f.len() != dims.ell() {
        return Err(invalid(format!("--f has {} values, min(m, p) = {}", a.f.len(), dims.ell())));
    }
    let rng = RngStream::new(a.seed, 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(invalid("--jobs must be positive"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(invalid)?;
    let est = pool.install(|| posterior_lambda_mean(&a.f, &hyper, dims, a.samples, &rng))?;

    let k0 = hyper.k0(dims)?;
    let mut report = String::new();
    report.push_str(&format!("dims = {} ({})\n", dims, case_name(dims)));
    report.push_str(&format!("a = {}\nb = {}\nc = {}\n", num(hyper.a), num(hyper.b), num(hyper.c)));
    report.push_str(&format!("closed_form = {}\n", hyper.is_closed_form(dims)));
    report.push_str(&format!("k0 = {:.6e}\n", k0));
    report.push_str(&format!("samples = {}\nseed = {}\n", a.samples, a.seed));
    report.push_str(&format!("ess = {:.6e}\n", est.ess));
    report.push_str("[lambda_mean]\n");
    report.push_str(&matrix_lines(&est.lambda_mean));
    report.push_str("[se]\n");
    report.push_str(&matrix_lines(&est.se));
    report.push_str(&format!("max_offdiag_z = {:.3}\n", est.max_off_diagonal_z()));
    report.push_str(&format!("diagonal = {}\n", if est.max_off_diagonal_z() < 3.0 { "PASS" } else { "FAIL" }));
    if let Some(w) = &est.warning {
        report.push_str(&format!("warning = {w}\n"));
        writeln!(err, "warning: {w}")?;
    }
    match &a.out {
        Some(path) => {
            std::fs::write(path, &report)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => out.write_all(report.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("gbshrink").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn check_gb_defaults() {
        let (code, out, _) = run_capture(&["check", "--p", "10", "--n", "25", "--m", "5", "--defaults", "GB"]);
        assert_eq!(code, 0);
        assert!(out.contains("a = 5\n"), "{out}");
        assert!(out.contains("c = 13.117647\n"));
        assert!(out.contains("k0 = 0.235294\n"));
        let kl = out.lines().find(|l| l.starts_with("gb-kl")).unwrap();
        assert!(kl.ends_with("PASS"), "{kl}");
    }

    #[test]
    fn unknown_flag_and_help() {
        assert_eq!(run_capture(&["check", "--bogus"]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
        assert_eq!(run_capture(&["oracle", "--f", "1", "--a", "1", "--c", "0", "--m", "1", "--p", "1", "--n", "2"]).0, 1);
    }

    #[test]
    fn check_matrix_loss_not_applicable() {
        let (code, out, _) = run_capture(&["check", "--p", "6", "--n", "25", "--m", "5", "--alpha", "0.1", "--beta", "1"]);
        assert_eq!(code, 0);
        assert!(out.lines().any(|l| l.starts_with("mean-matrix") && l.contains("N/A")), "{out}");
    }
}

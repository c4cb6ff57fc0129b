//! Dominance and minimaxity conditions as predicates, the constants that
//! locate the recommended hyperparameters, and the default estimator
//! configurations used in the risk study.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    efron_morris_coef, em_mean, g1_cov, g2_cov, g_mean, gb_cov, gb_mean, GParams, PriorHyper,
};
use crate::linalg::Matrix;
use crate::model::{DataPair, ModelDims};
use crate::shrinkage::ShrinkageFunction;

/// Relative slack on every `≤` comparison.
pub const SLACK: f64 = 1e-12;

fn le(value: f64, bound: f64) -> bool {
    value <= bound + SLACK * value.abs().max(bound.abs())
}

fn mnp(dims: ModelDims) -> (f64, f64, f64) {
    (dims.m() as f64, dims.p() as f64, dims.n() as f64)
}

fn ratio(g: GParams) -> f64 {
    if g.alpha == 0.0 {
        0.0
    } else {
        g.alpha / g.beta
    }
}

/// `value ≤ bound` with the two sides exposed for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub value: f64,
    pub bound: f64,
}

impl Comparison {
    pub fn holds(&self) -> bool {
        le(self.value, self.bound)
    }
}

/// Matrix-loss minimaxity of the mean family: `α ≤ 2(p−m−1)β/(n−p+2m+1)`.
pub fn mean_matrix_bound(dims: ModelDims, g: GParams) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    if dims.p() <= dims.m() + 1 {
        return Err(Error::NotApplicable(format!("matrix loss needs p > m+1, got {dims}")));
    }
    Ok(Comparison { value: g.alpha, bound: 2.0 * (p - m - 1.0) * g.beta / (n - p + 2.0 * m + 1.0) })
}

pub fn check_mean_matrix(dims: ModelDims, g: GParams) -> Result<bool> {
    Ok(mean_matrix_bound(dims, g)?.holds())
}

/// Scalar-loss minimaxity of the mean family:
/// `α ≤ 2(|p−m|−1)β/(n−p+2ℓ+1)`.
pub fn mean_scalar_bound(dims: ModelDims, g: GParams) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    let d = (p - m).abs();
    if d <= 1.0 {
        return Err(Error::NotApplicable(format!("scalar loss needs |p−m| > 1, got {dims}")));
    }
    let ell = dims.ell() as f64;
    Ok(Comparison { value: g.alpha, bound: 2.0 * (d - 1.0) * g.beta / (n - p + 2.0 * ell + 1.0) })
}

pub fn check_mean_scalar(dims: ModelDims, g: GParams) -> Result<bool> {
    Ok(mean_scalar_bound(dims, g)?.holds())
}

/// Stein-loss dominance of the wide covariance family over `S/n`:
/// `α/β ≤ 2(p−m)/(n−p+m)`.
pub fn cov_pgtm_bound(dims: ModelDims, g: GParams) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    if !dims.wide() {
        return Err(Error::NotApplicable(format!("needs p > m, got {dims}")));
    }
    Ok(Comparison { value: ratio(g), bound: 2.0 * (p - m) / (n - p + m) })
}

pub fn check_cov_pgtm(dims: ModelDims, g: GParams) -> Result<bool> {
    Ok(cov_pgtm_bound(dims, g)?.holds())
}

/// Kullback–Leibler dominance of `(Θ̂^G, Σ̂^G1)` over `(X, S/n)`:
/// `α/β ≤ 2(p−m−1)/(n−p+2m+1)`.
pub fn kl_pgtm_bound(dims: ModelDims, g: GParams) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    if dims.p() <= dims.m() + 1 {
        return Err(Error::NotApplicable(format!("needs p > m+1, got {dims}")));
    }
    Ok(Comparison { value: ratio(g), bound: 2.0 * (p - m - 1.0) / (n - p + 2.0 * m + 1.0) })
}

pub fn check_kl_pgtm(dims: ModelDims, g: GParams) -> Result<bool> {
    Ok(kl_pgtm_bound(dims, g)?.holds())
}

/// Kullback–Leibler dominance of `(Θ̂^G, Σ̂^G2)` for `m ≥ p`:
/// `α < 1` and `(n+p+1)α + mαβ/(2(1−α)) ≤ 2(m−p−1)β + 2(m/n)β`.
///
/// The comparison is `None` when `α ≥ 1`.
pub fn kl_mgep_bound(dims: ModelDims, g: GParams) -> Result<Option<Comparison>> {
    let (m, p, n) = mnp(dims);
    if dims.wide() {
        return Err(Error::NotApplicable(format!("needs m ≥ p, got {dims}")));
    }
    if g.alpha >= 1.0 {
        return Ok(None);
    }
    let value = (n + p + 1.0) * g.alpha + m * g.alpha * g.beta / (2.0 * (1.0 - g.alpha));
    let bound = 2.0 * (m - p - 1.0) * g.beta + 2.0 * (m / n) * g.beta;
    Ok(Some(Comparison { value, bound }))
}

pub fn check_kl_mgep(dims: ModelDims, g: GParams) -> Result<bool> {
    Ok(kl_mgep_bound(dims, g)?.is_some_and(|c| c.holds()))
}

/// Smallest `c` for which the generalized Bayes pair with `a = n−p−2m`
/// dominates `(X, S/n)` under Kullback–Leibler loss (`p > m+1`).
pub fn c_low(dims: ModelDims) -> f64 {
    let (m, p, n) = mnp(dims);
    (n * n - (p - m) * n - (p - 1.0) * (m + 1.0)) / (n + p - 1.0)
}

/// `c_low` lies below `n − 2m`, so an admissible `c` exists.
pub fn c_low_exists(dims: ModelDims) -> bool {
    let (m, p, n) = mnp(dims);
    let den = 2.0 * p - 3.0 * m - 1.0;
    p > (3.0 * m + 1.0) / 2.0 && den > 0.0 && n > (p - 1.0) * (m - 1.0) / den
}

/// Largest `a` for which the generalized Bayes pair with `c = n−m−1`
/// dominates `(X, S/n)` under Kullback–Leibler loss (`m ≥ p`).
pub fn a_upp(dims: ModelDims) -> f64 {
    let (m, p, n) = mnp(dims);
    -m - 2.0 * p + n * (1.0 + 2.0 * (m - p - 1.0 + m / n) / (n + m / 2.0 + p + 1.0))
}

/// Lower end `n − m − p − 1 < a` of the range paired with `a_upp`.
pub fn a_low(dims: ModelDims) -> f64 {
    let (m, p, n) = mnp(dims);
    n - m - p - 1.0
}

/// `a_upp` exceeds `n − m − p − 1`, so an admissible `a` exists.
pub fn a_upp_exists(dims: ModelDims) -> bool {
    let (m, p, n) = mnp(dims);
    let den = 2.0 * (2.0 * m - 3.0 * p - 1.0);
    m > (3.0 * p + 1.0) / 2.0 && den > 0.0 && n > (2.0 * p * p + m * p - 5.0 * m - 1.0) / den
}

fn closed_form_k0(dims: ModelDims, hyper: &PriorHyper) -> Result<f64> {
    if !hyper.is_closed_form(dims) {
        return Err(Error::NotApplicable(format!(
            "needs the closed-form b = a + ℓ − n = {}",
            hyper.a + dims.ell() as f64 - dims.n() as f64
        )));
    }
    hyper.k0(dims)
}

/// `k0 ≤ 2(p−m−1)/(n+p−1)` for the generalized Bayes mean, matrix loss.
pub fn gb_matrix_mean_bound(dims: ModelDims, hyper: &PriorHyper) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    if dims.p() <= dims.m() + 1 {
        return Err(Error::NotApplicable(format!("matrix loss needs p > m+1, got {dims}")));
    }
    let k0 = closed_form_k0(dims, hyper)?;
    Ok(Comparison { value: k0, bound: 2.0 * (p - m - 1.0) / (n + p - 1.0) })
}

/// The generalized Bayes mean improves on `X` under matrix loss.
pub fn check_gb_matrix_mean(dims: ModelDims, hyper: &PriorHyper) -> Result<bool> {
    let cmp = gb_matrix_mean_bound(dims, hyper)?;
    Ok(hyper.validate(dims).is_ok() && cmp.holds())
}

/// `k0 ≤ 2(|p−m|−1)/(n−p+2ℓ+2|p−m|−1)` for the generalized Bayes mean,
/// scalar loss. This is the scalar-loss family bound at `α = k0, β = 1−k0`.
pub fn gb_scalar_mean_bound(dims: ModelDims, hyper: &PriorHyper) -> Result<Comparison> {
    let (m, p, n) = mnp(dims);
    let d = (p - m).abs();
    if d <= 1.0 {
        return Err(Error::NotApplicable(format!("scalar loss needs |p−m| > 1, got {dims}")));
    }
    let k0 = closed_form_k0(dims, hyper)?;
    let ell = dims.ell() as f64;
    Ok(Comparison { value: k0, bound: 2.0 * (d - 1.0) / (n - p + 2.0 * ell + 2.0 * d - 1.0) })
}

pub fn check_gb_scalar_mean(dims: ModelDims, hyper: &PriorHyper) -> Result<bool> {
    let cmp = gb_scalar_mean_bound(dims, hyper)?;
    Ok(hyper.validate(dims).is_ok() && cmp.holds())
}

/// Open interval for `c` under which the generalized Bayes covariance with
/// `a = n−2m−p` dominates `S/n` (`p > m`):
/// `max{−2, n(n−p+m)/(n+p−m) − m − 1} < c < n − 2m`.
pub fn gb_cov_c_interval(dims: ModelDims) -> Result<(f64, f64)> {
    let (m, p, n) = mnp(dims);
    if !dims.wide() {
        return Err(Error::NotApplicable(format!("needs p > m, got {dims}")));
    }
    let lo = (-2.0f64).max(n * (n - p + m) / (n + p - m) - m - 1.0);
    Ok((lo, n - 2.0 * m))
}

pub fn check_gb_cov(dims: ModelDims, hyper: &PriorHyper) -> Result<bool> {
    let (lo, hi) = gb_cov_c_interval(dims)?;
    let (m, p, n) = mnp(dims);
    let a0 = n - 2.0 * m - p;
    if (hyper.a - a0).abs() > SLACK * a0.abs().max(1.0) {
        return Err(Error::NotApplicable(format!("needs a = n − 2m − p = {a0}")));
    }
    closed_form_k0(dims, hyper)?;
    Ok(hyper.c > lo && hyper.c < hi)
}

/// The four estimators compared in the risk study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorLabel {
    #[serde(rename = "GB")]
    Gb,
    #[serde(rename = "G1")]
    G1,
    #[serde(rename = "G2")]
    G2,
    #[serde(rename = "EM")]
    Em,
}

impl EstimatorLabel {
    pub const ALL: [EstimatorLabel; 4] =
        [EstimatorLabel::Em, EstimatorLabel::G1, EstimatorLabel::G2, EstimatorLabel::Gb];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorLabel::Gb => "GB",
            EstimatorLabel::G1 => "G1",
            EstimatorLabel::G2 => "G2",
            EstimatorLabel::Em => "EM",
        }
    }
}

impl fmt::Display for EstimatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for EstimatorLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GB" => Ok(EstimatorLabel::Gb),
            "G1" => Ok(EstimatorLabel::G1),
            "G2" => Ok(EstimatorLabel::G2),
            "EM" => Ok(EstimatorLabel::Em),
            _ => Err(Error::Parse(format!("unknown estimator '{s}' (expected GB, G1, G2 or EM)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanParams {
    K0(f64),
    G(GParams),
    /// Efron–Morris coefficient.
    Em(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovParams {
    Hyper(PriorHyper),
    /// `Σ̂^G1` when `p > m`, `Σ̂^G2` when `m ≥ p`.
    G(GParams),
    /// `S/n`.
    Unbiased,
}

/// A labelled pair of mean and covariance estimators with resolved
/// parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub label: EstimatorLabel,
    pub mean: MeanParams,
    pub cov: CovParams,
}

impl EstimatorConfig {
    pub fn estimate_mean(&self, data: &DataPair) -> Result<Matrix> {
        match self.mean {
            MeanParams::K0(k0) => gb_mean(data, k0),
            MeanParams::G(g) => g_mean(data, g),
            MeanParams::Em(_) => em_mean(data),
        }
    }

    pub fn estimate_cov(&self, data: &DataPair) -> Result<Matrix> {
        match self.cov {
            CovParams::Hyper(h) => gb_cov(data, &h),
            CovParams::G(g) if data.dims().wide() => g1_cov(data, g),
            CovParams::G(g) => g2_cov(data, g),
            CovParams::Unbiased => Ok(data.s() / data.n() as f64),
        }
    }

    /// `φ` of the equivalent member of the general mean class.
    pub fn phi(&self) -> ShrinkageFunction {
        match self.mean {
            MeanParams::K0(k0) => ShrinkageFunction::rational(k0, 1.0 - k0),
            MeanParams::G(g) => ShrinkageFunction::rational(g.alpha, g.beta),
            MeanParams::Em(c) => ShrinkageFunction::inverse(c),
        }
    }

    /// `ψ` of the equivalent member of the general covariance class, when
    /// the covariance estimator belongs to it.
    pub fn psi(&self, dims: ModelDims) -> Option<ShrinkageFunction> {
        let g = match self.cov {
            CovParams::Unbiased => return Some(ShrinkageFunction::zero()),
            CovParams::G(g) => g,
            CovParams::Hyper(h) => {
                let scale = dims.m() as f64 + h.c + 1.0;
                if (scale - dims.n() as f64).abs() > 1e-9 * scale.abs() {
                    return None;
                }
                let k0 = h.k0(dims).ok()?;
                GParams { alpha: k0, beta: 1.0 - k0 }
            }
        };
        Some(if dims.wide() {
            ShrinkageFunction::rational_cov_wide(g.alpha, g.beta)
        } else {
            ShrinkageFunction::rational(g.alpha, g.beta)
        })
    }

    /// `(α, β)` of the mean estimator, with `α = k0, β = 1−k0` for GB.
    pub fn mean_g(&self) -> Option<GParams> {
        match self.mean {
            MeanParams::K0(k0) => Some(GParams { alpha: k0, beta: 1.0 - k0 }),
            MeanParams::G(g) => Some(g),
            MeanParams::Em(_) => None,
        }
    }

    /// The conditions this configuration was chosen to satisfy.
    pub fn own_conditions(&self, dims: ModelDims) -> Vec<ConditionRow> {
        let mut rows = Vec::new();
        let g = self.mean_g();
        match (self.label, g) {
            (EstimatorLabel::Gb, Some(g)) => rows.push(kl_row(dims, g)),
            (EstimatorLabel::G1, Some(g)) => {
                rows.push(row_from("mean-scalar", mean_scalar_bound(dims, g)));
                rows.push(kl_row(dims, g));
            }
            (EstimatorLabel::G2, Some(g)) => {
                if dims.wide() {
                    rows.push(row_from("cov-stein", cov_pgtm_bound(dims, g)));
                } else {
                    rows.push(alpha_below_one_row(g));
                }
            }
            _ => {}
        }
        rows
    }
}

/// Recommended parameters for each label.
pub fn default_config(dims: ModelDims, label: EstimatorLabel) -> Result<EstimatorConfig> {
    let (m, p, n) = mnp(dims);
    let na = |why: &str| Error::NotApplicable(format!("{label} at {dims}: {why}"));
    let cfg = match label {
        EstimatorLabel::Gb => {
            let hyper = if dims.wide() {
                PriorHyper::closed_form(n - 2.0 * m - p, c_low(dims), dims)
            } else {
                PriorHyper::closed_form(a_upp(dims), n - m - 1.0, dims)
            };
            hyper.validate(dims).map_err(|e| na(&e.to_string()))?;
            let k0 = hyper.k0(dims)?;
            if !(0.0..1.0).contains(&k0) {
                return Err(na(&format!("k0 = {k0} outside [0, 1)")));
            }
            EstimatorConfig { label, mean: MeanParams::K0(k0), cov: CovParams::Hyper(hyper) }
        }
        EstimatorLabel::G1 => {
            let g = if dims.p() > dims.m() + 1 {
                GParams { alpha: p - m - 1.0, beta: n - p + 2.0 * m + 1.0 }
            } else if dims.m() > dims.p() + 1 {
                GParams { alpha: (m - p - 1.0) / (n + m), beta: (n + p + 1.0) / (n + m) }
            } else {
                return Err(na("needs |p − m| > 1"));
            };
            EstimatorConfig { label, mean: MeanParams::G(g), cov: CovParams::G(g) }
        }
        EstimatorLabel::G2 => {
            let g = if dims.wide() {
                GParams { alpha: p - m, beta: n - p + m }
            } else {
                GParams { alpha: (m - p) / (n + m - p), beta: n / (n + m - p) }
            };
            EstimatorConfig { label, mean: MeanParams::G(g), cov: CovParams::G(g) }
        }
        EstimatorLabel::Em => EstimatorConfig {
            label,
            mean: MeanParams::Em(efron_morris_coef(dims)),
            cov: CovParams::Unbiased,
        },
    };
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.pad("PASS"),
            Verdict::Fail => f.pad("FAIL"),
            Verdict::NotApplicable(_) => f.pad("N/A"),
        }
    }
}

/// One line of a condition table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub name: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub verdict: Verdict,
    pub note: Option<String>,
}

fn row_from(name: &str, cmp: Result<Comparison>) -> ConditionRow {
    match cmp {
        Ok(c) => ConditionRow {
            name: name.into(),
            value: Some(c.value),
            bound: Some(c.bound),
            verdict: if c.holds() { Verdict::Pass } else { Verdict::Fail },
            note: None,
        },
        Err(e) => ConditionRow {
            name: name.into(),
            value: None,
            bound: None,
            verdict: Verdict::NotApplicable(e.to_string()),
            note: None,
        },
    }
}

fn alpha_below_one_row(g: GParams) -> ConditionRow {
    ConditionRow {
        name: "alpha<1".into(),
        value: Some(g.alpha),
        bound: Some(1.0),
        verdict: if g.alpha < 1.0 { Verdict::Pass } else { Verdict::Fail },
        note: None,
    }
}

fn kl_row(dims: ModelDims, g: GParams) -> ConditionRow {
    if dims.wide() {
        return row_from("kl", kl_pgtm_bound(dims, g));
    }
    match kl_mgep_bound(dims, g) {
        Ok(Some(c)) => row_from("kl", Ok(c)),
        Ok(None) => ConditionRow {
            name: "kl".into(),
            value: Some(g.alpha),
            bound: Some(1.0),
            verdict: Verdict::Fail,
            note: Some("needs alpha < 1".into()),
        },
        Err(e) => row_from("kl", Err(e)),
    }
}

/// Every condition that applies to the supplied parameters.
///
/// `mean` is the `(α, β)` of the mean family, `cov` that of the covariance
/// family, and `hyper` the closed-form prior hyperparameters.
pub fn condition_table(
    dims: ModelDims,
    mean: Option<GParams>,
    cov: Option<GParams>,
    hyper: Option<&PriorHyper>,
) -> Vec<ConditionRow> {
    let mut rows = Vec::new();
    if let Some(g) = mean {
        rows.push(row_from("mean-matrix", mean_matrix_bound(dims, g)));
        rows.push(row_from("mean-scalar", mean_scalar_bound(dims, g)));
    }
    if let Some(g) = cov {
        if dims.wide() {
            rows.push(row_from("cov-stein", cov_pgtm_bound(dims, g)));
        } else {
            let mut row = alpha_below_one_row(g);
            row.name = "cov-stein".into();
            row.verdict = Verdict::Fail;
            row.note = Some(
                "for m >= p no estimator of the form S/n - Q^-T Psi Q^-1 / n dominates S/n under \
                 Stein loss: its risk difference tends to p[(1-a) - log(1-a) - 1] > 0 as F -> 0"
                    .into(),
            );
            rows.push(row);
        }
    }
    if let (Some(gm), Some(gc)) = (mean, cov) {
        if gm == gc {
            rows.push(kl_row(dims, gm));
        }
    }
    if let Some(h) = hyper {
        match h.validate(dims) {
            Ok(()) => rows.push(ConditionRow {
                name: "prior-range".into(),
                value: None,
                bound: None,
                verdict: Verdict::Pass,
                note: None,
            }),
            Err(e) => rows.push(ConditionRow {
                name: "prior-range".into(),
                value: None,
                bound: None,
                verdict: Verdict::Fail,
                note: Some(e.to_string()),
            }),
        }
        rows.push(row_from("gb-mean-matrix", gb_matrix_mean_bound(dims, h)));
        rows.push(row_from("gb-mean-scalar", gb_scalar_mean_bound(dims, h)));
        if let Ok(k0) = closed_form_k0(dims, h) {
            rows.push(kl_row(dims, GParams { alpha: k0, beta: 1.0 - k0 }));
            if let Some(r) = rows.last_mut() {
                r.name = "gb-kl".into();
            }
        }
        if dims.wide() {
            let row = match (gb_cov_c_interval(dims), check_gb_cov(dims, h)) {
                (Ok((lo, hi)), Ok(pass)) => ConditionRow {
                    name: "gb-cov-stein".into(),
                    value: Some(h.c),
                    bound: Some(hi),
                    verdict: if pass { Verdict::Pass } else { Verdict::Fail },
                    note: Some(format!("{} < c < {}", crate::sim::fmt_g6(lo), crate::sim::fmt_g6(hi))),
                },
                (Err(e), _) | (_, Err(e)) => ConditionRow {
                    name: "gb-cov-stein".into(),
                    value: None,
                    bound: None,
                    verdict: Verdict::NotApplicable(e.to_string()),
                    note: None,
                },
            };
            rows.push(row);
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: usize, n: usize, m: usize) -> ModelDims {
        ModelDims::from_pnm(p, n, m).unwrap()
    }

    fn g(alpha: f64, beta: f64) -> GParams {
        GParams { alpha, beta }
    }

    #[test]
    fn mean_matrix_examples() {
        let dims = d(10, 25, 5);
        assert!(check_mean_matrix(dims, g(4.0, 26.0)).unwrap());
        assert!(check_mean_matrix(dims, g(8.0, 26.0)).unwrap());
        assert!(!check_mean_matrix(dims, g(9.0, 26.0)).unwrap());
        assert!(check_mean_matrix(dims, g(0.0, 3.0)).unwrap());
        assert!(matches!(check_mean_matrix(d(6, 25, 5), g(0.0, 1.0)), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn mean_scalar_examples() {
        let dims = d(10, 25, 5);
        let g1 = default_config(dims, EstimatorLabel::G1).unwrap().mean_g().unwrap();
        let cmp = mean_scalar_bound(dims, g1).unwrap();
        assert!((cmp.bound - 2.0 * cmp.value).abs() < 1e-12);
        assert!(check_mean_scalar(dims, g(0.0, 1.0)).unwrap());
        assert!(!check_mean_scalar(dims, g(8.0 * 1.0001, 26.0)).unwrap());
        assert!(matches!(check_mean_scalar(d(10, 25, 9), g(0.0, 1.0)), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn cov_pgtm_examples() {
        let dims = d(10, 25, 5);
        assert!(check_cov_pgtm(dims, g(5.0, 20.0)).unwrap());
        assert!(check_cov_pgtm(dims, g(0.0, 20.0)).unwrap());
        assert!(!check_cov_pgtm(dims, g(15.0, 20.0)).unwrap());
        assert!(check_cov_pgtm(d(5, 25, 10), g(0.0, 1.0)).is_err());
    }

    #[test]
    fn kl_pgtm_at_gb_boundary() {
        let dims = d(10, 25, 5);
        let k0 = match default_config(dims, EstimatorLabel::Gb).unwrap().mean {
            MeanParams::K0(k) => k,
            _ => unreachable!(),
        };
        let cmp = kl_pgtm_bound(dims, g(k0, 1.0 - k0)).unwrap();
        assert!((cmp.bound - 8.0 / 26.0).abs() < 1e-15);
        assert!((cmp.value - cmp.bound).abs() <= 1e-12 * cmp.bound);
        assert!(cmp.holds());
        assert!(check_kl_pgtm(dims, g(0.0, 1.0)).unwrap());
        assert!(!check_kl_pgtm(dims, g(0.32, 1.0)).unwrap());
    }

    #[test]
    fn kl_mgep_examples() {
        let dims = d(10, 25, 20);
        assert!(check_kl_mgep(dims, g(0.0, 1.0)).unwrap());
        let (alpha, beta) = (9.0 / 45.0, 36.0 / 45.0);
        let cmp = kl_mgep_bound(dims, g(alpha, beta)).unwrap().unwrap();
        assert!((cmp.value - (36.0 * 0.2 + 20.0 * 0.2 * 0.8 / 1.6)).abs() < 1e-12);
        assert!((cmp.bound - (18.0 * 0.8 + 1.6 * 0.8)).abs() < 1e-12);
        assert!(check_kl_mgep(dims, g(alpha, beta)).unwrap());
        assert!(!check_kl_mgep(dims, g(0.99, 0.01)).unwrap());
        assert!(!check_kl_mgep(dims, g(1.0, 1.0)).unwrap());
        assert!(check_kl_mgep(d(10, 25, 5), g(0.0, 1.0)).is_err());
    }

    #[test]
    fn constants() {
        assert!((c_low(d(10, 25, 5)) - 446.0 / 34.0).abs() < 1e-12);
        assert!((c_low(d(10, 25, 5)) - 13.1176471).abs() < 1e-6);
        assert!(c_low_exists(d(10, 25, 5)));
        let dims = d(10, 25, 20);
        assert!((a_upp(dims) + 4.3478261).abs() < 1e-6);
        assert_eq!(a_low(dims), -6.0);
        assert!(a_upp(dims) > a_low(dims));
        assert!(a_upp_exists(dims));
        assert!(!a_upp_exists(d(10, 25, 12)));
    }

    #[test]
    fn c_low_gives_boundary_ratio() {
        for (p, n, m) in [(10, 25, 5), (10, 10, 5), (12, 40, 3), (20, 30, 6)] {
            let dims = d(p, n, m);
            let k0 = crate::estimators::k0(n as f64 - p as f64 - 2.0 * m as f64, c_low(dims), dims).unwrap();
            let bound = kl_pgtm_bound(dims, g(k0, 1.0 - k0)).unwrap().bound;
            assert!((k0 / (1.0 - k0) - bound).abs() <= 1e-12 * bound, "{dims}");
        }
    }

    #[test]
    fn default_values() {
        let cfg = default_config(d(10, 25, 5), EstimatorLabel::Gb).unwrap();
        let CovParams::Hyper(h) = cfg.cov else { panic!() };
        assert_eq!(h.a, 5.0);
        assert!((h.c - 13.1176471).abs() < 1e-6);
        assert!(matches!(cfg.mean, MeanParams::K0(k) if (k - 0.2352941).abs() < 1e-6));

        let cfg = default_config(d(10, 25, 20), EstimatorLabel::G2).unwrap();
        let gp = cfg.mean_g().unwrap();
        assert!((gp.alpha - 10.0 / 35.0).abs() < 1e-15 && (gp.beta - 25.0 / 35.0).abs() < 1e-15);

        let cfg = default_config(d(10, 25, 20), EstimatorLabel::Gb).unwrap();
        let CovParams::Hyper(h) = cfg.cov else { panic!() };
        assert!((h.a + 4.3478261).abs() < 1e-6);
        assert_eq!(h.c, 4.0);
        assert!(matches!(cfg.mean, MeanParams::K0(k) if (k - 10.652174 / 35.652174).abs() < 1e-6));

        assert!(matches!(default_config(d(10, 25, 10), EstimatorLabel::G1), Err(Error::NotApplicable(_))));
        assert!(matches!(default_config(d(10, 25, 9), EstimatorLabel::G1), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn defaults_pass_their_conditions() {
        for (p, n, m) in [(10, 10, 5), (10, 10, 25), (10, 25, 5), (10, 25, 20), (10, 25, 30), (6, 10, 4), (4, 10, 6)] {
            let dims = d(p, n, m);
            for label in EstimatorLabel::ALL {
                let Ok(cfg) = default_config(dims, label) else { continue };
                for row in cfg.own_conditions(dims) {
                    assert_eq!(row.verdict, Verdict::Pass, "{label} at {dims}: {row:?}");
                }
            }
        }
    }

    #[test]
    fn gb_corollary_consistency() {
        // The closed-form mean bounds are the family bounds at α = k0, β = 1 − k0.
        for (p, n, m, a, c) in [(10, 25, 5, 5.0, 9.0), (10, 25, 20, -4.0, 4.0), (12, 30, 3, 0.0, 2.0)] {
            let dims = d(p, n, m);
            let h = PriorHyper::closed_form(a, c, dims);
            let k0 = h.k0(dims).unwrap();
            let gk = g(k0, 1.0 - k0);
            assert_eq!(check_gb_scalar_mean(dims, &h).unwrap(), check_mean_scalar(dims, gk).unwrap());
            if p > m + 1 {
                assert_eq!(check_gb_matrix_mean(dims, &h).unwrap(), check_mean_matrix(dims, gk).unwrap());
            }
        }
        let dims = d(10, 25, 5);
        let open = PriorHyper { a: 5.0, b: 0.0, c: 9.0 };
        assert!(check_gb_matrix_mean(dims, &open).is_err());
        // Range-violating c.
        let bad = PriorHyper::closed_form(5.0, 16.0, dims);
        assert!(!check_gb_matrix_mean(dims, &bad).unwrap());
    }

    #[test]
    fn gb_cov_interval() {
        let dims = d(10, 25, 5);
        let (lo, hi) = gb_cov_c_interval(dims).unwrap();
        assert!((lo - (25.0 * 20.0 / 30.0 - 6.0)).abs() < 1e-12);
        assert_eq!(hi, 15.0);
        let h = PriorHyper::closed_form(5.0, 13.0, dims);
        assert!(check_gb_cov(dims, &h).unwrap());
        assert!(!check_gb_cov(dims, &PriorHyper::closed_form(5.0, 15.0, dims)).unwrap());
    }

    #[test]
    fn table_for_tall_covariance_carries_note() {
        let rows = condition_table(d(10, 25, 20), None, Some(g(0.5, 1.0)), None);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].verdict, Verdict::Fail);
        assert!(rows[0].note.as_ref().unwrap().contains("dominates"));
        let rows = condition_table(d(10, 25, 9), Some(g(0.1, 1.0)), None, None);
        assert!(matches!(rows[0].verdict, Verdict::NotApplicable(_)));
    }

    #[test]
    fn label_parsing() {
        assert_eq!("gb".parse::<EstimatorLabel>().unwrap(), EstimatorLabel::Gb);
        assert!("XX".parse::<EstimatorLabel>().is_err());
    }
}

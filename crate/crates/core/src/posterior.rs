//! Monte Carlo evaluation of `E[Λ | F]` under the hierarchical prior for
//! arbitrary `b`, and the integral-form generalized Bayes estimators built
//! from it.
//!
//! The proposal is the matrix beta distribution `Beta_ℓ(ν₁/2, ν₂/2)` with
//! `ν₁ = a − c + p + ℓ − 1`, `ν₂ = c + m + 1`, which is the exact posterior
//! when `b = a + ℓ − n`. Other values of `b` are handled by self-normalized
//! importance sampling with weight `|I − D^{1/2} Λ D^{1/2}|^{(b−a−ℓ+n)/2}`,
//! `D = F(I+F)⁻¹`.

use rayon::prelude::*;

use crate::decomp::{eigen_xsx, simul_diag};
use crate::error::{Error, Result};
use crate::estimators::PriorHyper;
use crate::linalg::{cholesky, log_det_chol, symmetrize, Matrix, Vector};
use crate::model::{bartlett_factor, DataPair, ModelDims, RngStream};

/// Batches used for the batch-means standard errors.
pub const BATCHES: usize = 32;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 1000;

/// Warn when the effective sample size falls below this fraction of draws.
pub const ESS_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixBetaParams {
    pub dim: usize,
    pub nu1: f64,
    pub nu2: f64,
}

impl MatrixBetaParams {
    pub fn new(dim: usize, nu1: f64, nu2: f64) -> Result<Self> {
        let lim = dim as f64 - 1.0;
        for nu in [nu1, nu2] {
            if !(nu > lim) {
                return Err(Error::DegreesOfFreedom { df: nu, dim });
            }
        }
        Ok(Self { dim, nu1, nu2 })
    }

    /// Proposal parameters for the posterior of `Λ`.
    pub fn posterior(hyper: &PriorHyper, dims: ModelDims) -> Result<Self> {
        let (m, p, ell) = (dims.m() as f64, dims.p() as f64, dims.ell() as f64);
        Self::new(dims.ell(), hyper.a - hyper.c + p + ell - 1.0, hyper.c + m + 1.0)
    }

    /// `E[Λ] = ν₁/(ν₁+ν₂) I`.
    pub fn mean_scale(&self) -> f64 {
        self.nu1 / (self.nu1 + self.nu2)
    }
}

/// `Λ = C⁻¹ W₁ C⁻ᵀ` with `W_i ~ W(ν_i, I)` and `C Cᵀ = W₁ + W₂`.
pub fn sample_matrix_beta(params: MatrixBetaParams, rng: &mut RngStream) -> Result<Matrix> {
    let a1 = bartlett_factor(params.nu1, params.dim, rng)?;
    let a2 = bartlett_factor(params.nu2, params.dim, rng)?;
    let w1 = &a1 * a1.transpose();
    let w2 = &a2 * a2.transpose();
    let c = cholesky(&(&w1 + w2), "W1 + W2")?.l();
    let y = c
        .solve_lower_triangular(&a1)
        .ok_or_else(|| Error::CholeskyFailure("W1 + W2".into()))?;
    Ok(symmetrize(&(&y * y.transpose())))
}

/// Importance-sampling estimate of `E[Λ | F]`.
#[derive(Debug, Clone)]
pub struct OracleEstimate {
    /// Raw estimate, off-diagonals included.
    pub lambda_mean: Matrix,
    /// Entrywise batch-means standard errors.
    pub se: Matrix,
    pub ess: f64,
    pub n_samples: usize,
    pub warning: Option<String>,
}

impl OracleEstimate {
    pub fn diagonal(&self) -> Vec<f64> {
        self.lambda_mean.diagonal().iter().copied().collect()
    }

    pub fn diagonal_se(&self) -> Vec<f64> {
        self.se.diagonal().iter().copied().collect()
    }

    /// Largest `|off-diagonal| / se` over the strict upper triangle.
    pub fn max_off_diagonal_z(&self) -> f64 {
        let k = self.lambda_mean.nrows();
        let mut z: f64 = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let se = self.se[(i, j)];
                let v = self.lambda_mean[(i, j)].abs();
                z = z.max(if se > 0.0 { v / se } else if v == 0.0 { 0.0 } else { f64::INFINITY });
            }
        }
        z
    }
}

/// `(b − a − ℓ + n)/2`, the importance-weight exponent.
pub fn weight_exponent(hyper: &PriorHyper, dims: ModelDims) -> f64 {
    0.5 * (hyper.b - hyper.a - dims.ell() as f64 + dims.n() as f64)
}

/// `log |I − D^{1/2} Λ D^{1/2}| · exponent` with `D = F(I+F)⁻¹`.
pub fn log_weight(f: &[f64], lambda: &Matrix, exponent: f64) -> Result<f64> {
    if exponent == 0.0 {
        return Ok(0.0);
    }
    let k = f.len();
    let sd: Vec<f64> = f.iter().map(|&v| (v / (1.0 + v)).sqrt()).collect();
    let mut a = Matrix::identity(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] -= sd[i] * lambda[(i, j)] * sd[j];
        }
    }
    let ch = cholesky(&a, "I - D^1/2 Λ D^1/2")?;
    Ok(exponent * log_det_chol(&ch))
}

struct Batch {
    max_lw: f64,
    sw: f64,
    sw2: f64,
    swl: Matrix,
}

fn run_batch(
    f: &[f64],
    params: MatrixBetaParams,
    exponent: f64,
    size: usize,
    mut rng: RngStream,
) -> Result<Batch> {
    let k = f.len();
    let mut draws = Vec::with_capacity(size);
    let mut lws = Vec::with_capacity(size);
    for _ in 0..size {
        let lam = sample_matrix_beta(params, &mut rng)?;
        lws.push(log_weight(f, &lam, exponent)?);
        draws.push(lam);
    }
    let max_lw = lws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut b = Batch { max_lw, sw: 0.0, sw2: 0.0, swl: Matrix::zeros(k, k) };
    for (lam, lw) in draws.iter().zip(&lws) {
        let w = (lw - max_lw).exp();
        b.sw += w;
        b.sw2 += w * w;
        b.swl += lam * w;
    }
    Ok(b)
}

/// Self-normalized importance-sampling estimate of `E[Λ | F]`.
///
/// Draws are split into [`BATCHES`] batches on substreams `0..BATCHES` of
/// `rng`; batches run in parallel and are combined in index order, so the
/// result does not depend on the thread count.
pub fn posterior_lambda_mean(
    f: &[f64],
    hyper: &PriorHyper,
    dims: ModelDims,
    n_samples: usize,
    rng: &RngStream,
) -> Result<OracleEstimate> {
    if f.len() != dims.ell() {
        return Err(Error::Dimension(format!("F has {} entries, ℓ = {}", f.len(), dims.ell())));
    }
    if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("eigenvalues must be finite and nonnegative: {f:?}")));
    }
    hyper.validate(dims)?;
    let params = MatrixBetaParams::posterior(hyper, dims)?;
    lambda_mean_with(f, params, weight_exponent(hyper, dims), n_samples, rng)
}

/// Same estimate for explicit proposal parameters and weight exponent.
pub fn lambda_mean_with(
    f: &[f64],
    params: MatrixBetaParams,
    exponent: f64,
    n_samples: usize,
    rng: &RngStream,
) -> Result<OracleEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::Parameter(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    if f.len() != params.dim {
        return Err(Error::Dimension(format!("F has {} entries, dim = {}", f.len(), params.dim)));
    }
    let base = n_samples / BATCHES;
    let rem = n_samples % BATCHES;
    let batches: Vec<Batch> = (0..BATCHES)
        .into_par_iter()
        .map(|k| {
            let size = base + usize::from(k < rem);
            run_batch(f, params, exponent, size, rng.substream(k as u64))
        })
        .collect::<Result<_>>()?;

    let global = batches.iter().map(|b| b.max_lw).fold(f64::NEG_INFINITY, f64::max);
    let dim = params.dim;
    let (mut sw, mut sw2, mut swl) = (0.0, 0.0, Matrix::zeros(dim, dim));
    let mut means = Vec::with_capacity(BATCHES);
    for b in &batches {
        let s = (b.max_lw - global).exp();
        sw += b.sw * s;
        sw2 += b.sw2 * s * s;
        swl += &b.swl * s;
        means.push(&b.swl / b.sw);
    }
    let lambda_mean = symmetrize(&(swl / sw));
    let mut var = Matrix::zeros(dim, dim);
    for mu in &means {
        let d = mu - &lambda_mean;
        var += d.component_mul(&d);
    }
    let nb = BATCHES as f64;
    let se = (var / (nb - 1.0) / nb).map(f64::sqrt);
    let ess = sw * sw / sw2;
    let warning = (ess < ESS_WARN_FRACTION * n_samples as f64).then(|| {
        format!("ill-conditioned importance weights: ESS {ess:.1} of {n_samples} draws")
    });
    Ok(OracleEstimate { lambda_mean, se, ess, n_samples, warning })
}

/// `φ_i = e_i / (1 + f_i (1 − e_i))`, the mean shrinkage induced by the
/// diagonal `e` of `E[Λ | F]`.
pub fn phi_from_lambda(f: &[f64], e: &[f64]) -> Vec<f64> {
    f.iter().zip(e).map(|(&fi, &ei)| ei / (1.0 + fi * (1.0 - ei))).collect()
}

/// `∂φ_i/∂e_i = (1 + f_i)/(1 + f_i(1 − e_i))²`.
pub fn phi_sensitivity(f: &[f64], e: &[f64]) -> Vec<f64> {
    f.iter().zip(e).map(|(&fi, &ei)| (1.0 + fi) / (1.0 + fi * (1.0 - ei)).powi(2)).collect()
}

fn spectrum(data: &DataPair) -> Result<Vec<f64>> {
    if data.dims().wide() {
        Ok(eigen_xsx(data)?.f)
    } else {
        Ok(simul_diag(data)?.f)
    }
}

fn check_e(e: &[f64], ell: usize) -> Result<()> {
    if e.len() != ell {
        return Err(Error::Dimension(format!("E[Λ|F] diagonal has {} entries, ℓ = {ell}", e.len())));
    }
    Ok(())
}

/// Integral-form generalized Bayes mean for a given diagonal `e` of
/// `E[Λ | F]`: `X − R F⁻¹E{F⁻¹(I+F) − E}⁻¹ Rᵀ X` for `p > m`, and the
/// corresponding `X(I − Q Φ Q⁻¹)` for `m ≥ p`.
pub fn gb_mean_from_lambda(data: &DataPair, e: &[f64]) -> Result<Matrix> {
    check_e(e, data.dims().ell())?;
    if data.dims().wide() {
        let ep = eigen_xsx(data)?;
        let phi = Vector::from_vec(phi_from_lambda(&ep.f, e));
        let shrink = &ep.r * Matrix::from_diagonal(&phi) * ep.r.transpose();
        Ok(data.x() - shrink * data.x())
    } else {
        let sp = simul_diag(data)?;
        let phi = Vector::from_vec(phi_from_lambda(&sp.f, e));
        let shrink = &sp.q * Matrix::from_diagonal(&phi) * &sp.q_inv;
        Ok(data.x() - data.x() * shrink)
    }
}

/// Integral-form generalized Bayes covariance:
/// `(b+m+n+p)⁻¹ [S + Xᵀ R Φ Rᵀ X]` for `p > m`,
/// `(b+m+n+p)⁻¹ [S + Q⁻ᵀ F Φ Q⁻¹]` for `m ≥ p`.
pub fn gb_cov_from_lambda(data: &DataPair, hyper: &PriorHyper, e: &[f64]) -> Result<Matrix> {
    let dims = data.dims();
    check_e(e, dims.ell())?;
    let scale = hyper.b + (dims.m() + dims.n() + dims.p()) as f64;
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!("b + m + n + p = {scale} must be positive")));
    }
    let extra = if dims.wide() {
        let ep = eigen_xsx(data)?;
        let phi = Vector::from_vec(phi_from_lambda(&ep.f, e));
        let xr = data.x().transpose() * &ep.r;
        &xr * Matrix::from_diagonal(&phi) * xr.transpose()
    } else {
        let sp = simul_diag(data)?;
        let phi = phi_from_lambda(&sp.f, e);
        let fphi = Vector::from_iterator(phi.len(), phi.iter().zip(&sp.f).map(|(a, b)| a * b));
        sp.q_inv.transpose() * Matrix::from_diagonal(&fphi) * &sp.q_inv
    };
    Ok(symmetrize(&((data.s() + extra) / scale)))
}

/// An estimate assembled from the oracle, with the oracle output kept for
/// error propagation and diagnostics.
#[derive(Debug, Clone)]
pub struct GeneralEstimate {
    pub estimate: Matrix,
    pub f: Vec<f64>,
    pub oracle: OracleEstimate,
}

fn oracle_for(
    data: &DataPair,
    hyper: &PriorHyper,
    n_samples: usize,
    rng: &RngStream,
) -> Result<(Vec<f64>, OracleEstimate)> {
    let f = spectrum(data)?;
    let oracle = posterior_lambda_mean(&f, hyper, data.dims(), n_samples, rng)?;
    Ok((f, oracle))
}

/// Generalized Bayes mean for any admissible `(a, b, c)`; off-diagonals of
/// the oracle estimate are dropped before assembly.
pub fn gb_mean_general(
    data: &DataPair,
    hyper: &PriorHyper,
    n_samples: usize,
    rng: &RngStream,
) -> Result<GeneralEstimate> {
    let (f, oracle) = oracle_for(data, hyper, n_samples, rng)?;
    let estimate = gb_mean_from_lambda(data, &oracle.diagonal())?;
    Ok(GeneralEstimate { estimate, f, oracle })
}

/// Generalized Bayes covariance for any admissible `(a, b, c)`.
pub fn gb_cov_general(
    data: &DataPair,
    hyper: &PriorHyper,
    n_samples: usize,
    rng: &RngStream,
) -> Result<GeneralEstimate> {
    let (f, oracle) = oracle_for(data, hyper, n_samples, rng)?;
    let estimate = gb_cov_from_lambda(data, hyper, &oracle.diagonal())?;
    Ok(GeneralEstimate { estimate, f, oracle })
}

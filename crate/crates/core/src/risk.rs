//! Loss functions, unbiased risk estimates for the general shrinkage classes,
//! and the percentage relative improvement in risk (PRIR).

use crate::error::{Error, Result};
use crate::linalg::{cholesky, log_det_chol, Matrix};
use crate::model::{ModelDims, Parameters};
use crate::shrinkage::ShrinkageFunction;

/// Relative gap below which two eigenvalues count as tied.
pub const TIE_TOL: f64 = 1e-9;

/// All four losses of one estimate.
#[derive(Debug, Clone)]
pub struct LossBundle {
    pub l_matrix: Matrix,
    pub l_scalar: f64,
    pub l_stein: f64,
    pub l_kl: f64,
}

/// Unbiased risk estimate components.
#[derive(Debug, Clone, Default)]
pub struct UreReport {
    /// Per-component `φ*_i` of the matrix-loss estimate; wide case only.
    pub phi_star: Option<Vec<f64>>,
    pub tr_phi_star: f64,
    pub delta_cov: Option<f64>,
    pub delta_kl: Option<f64>,
    /// `d_i = n − p + 2i − 1`.
    pub d: Vec<f64>,
}

impl UreReport {
    /// `mp + tr(Φ*)`, the unbiased estimate of the scalar quadratic risk.
    pub fn scalar_risk(&self, dims: ModelDims) -> f64 {
        (dims.m() * dims.p()) as f64 + self.tr_phi_star
    }

    /// `p I_m + R Φ* Rᵀ`, the unbiased estimate of the matrix quadratic risk.
    pub fn matrix_risk(&self, r: &Matrix, dims: ModelDims) -> Option<Matrix> {
        let phi = self.phi_star.as_ref()?;
        let m = dims.m();
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_column_slice(phi));
        Some(Matrix::identity(m, m) * dims.p() as f64 + r * d * r.transpose())
    }
}

fn whitened_error(est: &Matrix, truth: &Parameters) -> Result<Matrix> {
    if est.shape() != truth.theta().shape() {
        return Err(Error::Dimension(format!(
            "estimate is {:?}, Theta is {:?}",
            est.shape(),
            truth.theta().shape()
        )));
    }
    let diff = est - truth.theta();
    // Yᵀ = L⁻¹ Dᵀ so that Y Yᵀ = D Σ⁻¹ Dᵀ.
    truth
        .sigma_chol()
        .l_dirty()
        .solve_lower_triangular(&diff.transpose())
        .ok_or_else(|| Error::CholeskyFailure("Sigma".into()))
}

/// `(Θ̂−Θ) Σ⁻¹ (Θ̂−Θ)ᵀ`.
pub fn loss_matrix_quad(est: &Matrix, truth: &Parameters) -> Result<Matrix> {
    let yt = whitened_error(est, truth)?;
    Ok(yt.transpose() * yt)
}

/// `tr{(Θ̂−Θ) Σ⁻¹ (Θ̂−Θ)ᵀ}`.
pub fn loss_scalar_quad(est: &Matrix, truth: &Parameters) -> Result<f64> {
    Ok(whitened_error(est, truth)?.norm_squared())
}

/// Stein loss `tr(Σ̂Σ⁻¹) − log|Σ̂Σ⁻¹| − p`.
pub fn loss_stein(est_cov: &Matrix, sigma: &Matrix) -> Result<f64> {
    let ch = cholesky(sigma, "Sigma")?;
    stein_with_chol(est_cov, &ch)
}

pub(crate) fn stein_against(est_cov: &Matrix, truth: &Parameters) -> Result<f64> {
    stein_with_chol(est_cov, truth.sigma_chol())
}

fn stein_with_chol(est_cov: &Matrix, sigma: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> Result<f64> {
    let p = est_cov.nrows();
    let est_ch = cholesky(est_cov, "Sigma-hat")?;
    let l = sigma.l_dirty();
    // tr(L⁻¹ Σ̂ L⁻ᵀ)
    let a = l
        .solve_lower_triangular(est_cov)
        .ok_or_else(|| Error::CholeskyFailure("Sigma".into()))?;
    let b = l
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| Error::CholeskyFailure("Sigma".into()))?;
    let trace = b.trace();
    let log_det = log_det_chol(&est_ch) - log_det_chol(sigma);
    Ok(trace - log_det - p as f64)
}

/// `(m/2) L_S + (1/2) L_Q`, the Kullback–Leibler divergence between the
/// fitted and true matrix normal models.
pub fn loss_kl(est_mean: &Matrix, est_cov: &Matrix, truth: &Parameters) -> Result<f64> {
    let m = truth.theta().nrows() as f64;
    Ok(0.5 * m * stein_against(est_cov, truth)? + 0.5 * loss_scalar_quad(est_mean, truth)?)
}

pub fn losses(est_mean: &Matrix, est_cov: &Matrix, truth: &Parameters) -> Result<LossBundle> {
    let l_matrix = loss_matrix_quad(est_mean, truth)?;
    let l_scalar = l_matrix.trace();
    let l_stein = stein_against(est_cov, truth)?;
    let m = truth.theta().nrows() as f64;
    Ok(LossBundle { l_matrix, l_scalar, l_stein, l_kl: 0.5 * m * l_stein + 0.5 * l_scalar })
}

/// Divided differences of `g(f)` for a separable shrinkage function,
/// `(g(f_i) − g(f_j))/(f_i − f_j)` or `g'(f_i)` at a tie.
struct Divided<'a> {
    f: &'a [f64],
    tie_gap: f64,
    separable: bool,
}

impl<'a> Divided<'a> {
    fn new(f: &'a [f64], func: &ShrinkageFunction) -> Self {
        let fmax = f.iter().cloned().fold(0.0_f64, f64::max);
        Self { f, tie_gap: TIE_TOL * fmax, separable: func.is_separable() }
    }

    fn tied(&self, i: usize, j: usize) -> bool {
        (self.f[i] - self.f[j]).abs() <= self.tie_gap
    }

    /// `gi, gj` are `g(f_i), g(f_j)`; `dgi` is `g'(f_i)`.
    fn eval(&self, i: usize, j: usize, gi: f64, gj: f64, dgi: impl FnOnce() -> Option<f64>) -> Result<f64> {
        if self.tied(i, j) {
            if !self.separable {
                return Err(Error::Tie { i, j });
            }
            dgi().ok_or(Error::Tie { i, j })
        } else {
            Ok((gi - gj) / (self.f[i] - self.f[j]))
        }
    }
}

fn check_len(f: &[f64], dims: ModelDims) -> Result<()> {
    if f.len() != dims.ell() {
        return Err(Error::Dimension(format!("F has {} entries, ℓ = {}", f.len(), dims.ell())));
    }
    if f.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain(format!("eigenvalues must be finite and nonnegative: {f:?}")));
    }
    if f.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain("eigenvalues must be in descending order".into()));
    }
    Ok(())
}

fn d_coeffs(dims: ModelDims) -> Vec<f64> {
    let (n, p) = (dims.n() as f64, dims.p() as f64);
    (1..=dims.ell()).map(|i| n - p + 2.0 * i as f64 - 1.0).collect()
}

/// Sum of the mean-matrix URE terms; returns `(tr Φ*, per-component Φ*)`.
fn mean_terms(f: &[f64], phi: &ShrinkageFunction, dims: ModelDims) -> Result<(f64, Option<Vec<f64>>)> {
    check_len(f, dims)?;
    let ell = f.len();
    let (m, p, n) = (dims.m() as f64, dims.p() as f64, dims.n() as f64);
    let a = n - p + 2.0 * ell as f64 - 3.0;
    let b = (p - m).abs() + 1.0;
    let v = phi.values(f);
    let dv = phi.derivs(f);
    if v.iter().chain(&dv).any(|x| !x.is_finite()) {
        return Err(Error::Domain("phi or its derivative is not finite".into()));
    }
    let dd = Divided::new(f, phi);

    // g(f) = f φ and h(f) = f² φ², with derivatives φ + fφ' and 2fφ² + 2f²φφ'.
    let g = |i: usize| f[i] * v[i];
    let dg = |i: usize| phi.scalar_value(f[i]).map(|_| v[i] + f[i] * dv[i]);
    let h = |i: usize| (f[i] * v[i]).powi(2);
    let dh = |i: usize| phi.scalar_value(f[i]).map(|_| 2.0 * f[i] * v[i] * v[i] + 2.0 * f[i] * f[i] * v[i] * dv[i]);

    let diag: Vec<f64> = (0..ell)
        .map(|i| {
            a * f[i] * v[i] * v[i] - 2.0 * b * v[i] - 4.0 * f[i] * f[i] * v[i] * dv[i] - 4.0 * f[i] * dv[i]
        })
        .collect();

    let mut trace: f64 = diag.iter().sum();
    for i in 0..ell {
        for j in (i + 1)..ell {
            let dd_h = dd.eval(i, j, h(i), h(j), || dh(i))?;
            let dd_g = dd.eval(i, j, g(i), g(j), || dg(i))?;
            trace -= 2.0 * (dd_h + 2.0 * dd_g);
        }
    }

    let per_component = if dims.wide() {
        // φ*_i = diag_i − 2 Σ_{j≠i} (f_iφ_i + 1)(f_iφ_i − f_jφ_j)/(f_i − f_j)
        let mut out = diag.clone();
        for i in 0..ell {
            for j in 0..ell {
                if i != j {
                    let dd_g = dd.eval(i, j, g(i), g(j), || dg(i))?;
                    out[i] -= 2.0 * (g(i) + 1.0) * dd_g;
                }
            }
        }
        Some(out)
    } else {
        None
    };
    Ok((trace, per_component))
}

/// Unbiased estimate of the mean-matrix risk of the general shrinkage class.
///
/// `tr_phi_star` is valid in both cases; `phi_star` (matrix loss) is filled
/// only when `p > m`.
pub fn ure_mean(f: &[f64], phi: &ShrinkageFunction, dims: ModelDims) -> Result<UreReport> {
    let (tr, per) = mean_terms(f, phi, dims)?;
    Ok(UreReport { phi_star: per, tr_phi_star: tr, d: d_coeffs(dims), ..Default::default() })
}

/// Sum inside the covariance URE, i.e. `n · Δ̂`.
fn cov_terms(f: &[f64], psi: &ShrinkageFunction, dims: ModelDims) -> Result<f64> {
    check_len(f, dims)?;
    let ell = f.len();
    let n = dims.n() as f64;
    let d = d_coeffs(dims);
    let v = psi.values(f);
    let dv = psi.derivs(f);
    if v.iter().chain(&dv).any(|x| !x.is_finite()) {
        return Err(Error::Domain("psi or its derivative is not finite".into()));
    }
    if let Some(i) = v.iter().position(|&x| x >= 1.0) {
        return Err(Error::Domain(format!("psi_{} = {} must be below 1", i + 1, v[i])));
    }
    let dd = Divided::new(f, psi);
    let mut total = 0.0;
    for i in 0..ell {
        let mut t = -d[i] * v[i] + 2.0 * f[i] * dv[i] - n * (1.0 - v[i]).ln();
        for j in (i + 1)..ell {
            t += 2.0 * dd.eval(i, j, v[i], v[j], || psi.scalar_deriv(f[i]))? * f[j];
        }
        total += t;
    }
    Ok(total)
}

/// Unbiased estimate of the Stein-risk difference between the general
/// covariance class and `S/n`.
pub fn ure_cov_delta(f: &[f64], psi: &ShrinkageFunction, dims: ModelDims) -> Result<f64> {
    Ok(cov_terms(f, psi, dims)? / dims.n() as f64)
}

/// Unbiased estimate of the Kullback–Leibler risk difference between
/// `(Θ̂^SH, Σ̂^SH)` and `(X, S/n)`:
/// `2Δ̂ = tr Φ* + (m/n) · Σ_i {…covariance terms…}`.
pub fn ure_kl_delta(
    f: &[f64],
    phi: &ShrinkageFunction,
    psi: &ShrinkageFunction,
    dims: ModelDims,
) -> Result<f64> {
    let (tr, _) = mean_terms(f, phi, dims)?;
    let cov = cov_terms(f, psi, dims)?;
    let twice = tr + dims.m() as f64 / dims.n() as f64 * cov;
    Ok(0.5 * twice)
}

/// All URE components at once.
pub fn ure_all(
    f: &[f64],
    phi: &ShrinkageFunction,
    psi: &ShrinkageFunction,
    dims: ModelDims,
) -> Result<UreReport> {
    let mut rep = ure_mean(f, phi, dims)?;
    let cov = ure_cov_delta(f, psi, dims)?;
    rep.delta_cov = Some(cov);
    rep.delta_kl = Some(ure_kl_delta(f, phi, psi, dims)?);
    Ok(rep)
}

/// `100 (R_base − R_est) / R_base`.
pub fn prir(risk_base: f64, risk_est: f64) -> Result<f64> {
    if !(risk_base > 0.0) {
        return Err(Error::Domain(format!("baseline risk {risk_base} must be positive")));
    }
    Ok(100.0 * (risk_base - risk_est) / risk_base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(theta: Matrix, sigma: Matrix) -> Parameters {
        Parameters::new(theta, sigma).unwrap()
    }

    #[test]
    fn quadratic_losses() {
        let t = truth(Matrix::zeros(2, 2), Matrix::identity(2, 2));
        assert_eq!(loss_matrix_quad(&Matrix::zeros(2, 2), &t).unwrap(), Matrix::zeros(2, 2));
        let est = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let lm = loss_matrix_quad(&est, &t).unwrap();
        assert_eq!(lm, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert_eq!(loss_scalar_quad(&est, &t).unwrap(), 1.0);

        let t = truth(Matrix::zeros(1, 1), Matrix::from_element(1, 1, 4.0));
        let lm = loss_matrix_quad(&Matrix::from_element(1, 1, 2.0), &t).unwrap();
        assert!((lm[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stein_values() {
        let sigma = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        assert!(loss_stein(&sigma, &sigma).unwrap().abs() < 1e-14);
        let got = loss_stein(&(&sigma * 2.0), &sigma).unwrap();
        assert!((got - (4.0 - 4f64.ln() - 2.0)).abs() < 1e-12);
        let one = Matrix::from_element(1, 1, 3.0);
        let got = loss_stein(&(&one * 0.5), &one).unwrap();
        assert!((got - (0.5 + 2f64.ln() - 1.0)).abs() < 1e-14);
        let bad = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(loss_stein(&bad, &sigma), Err(Error::CholeskyFailure(_))));
    }

    #[test]
    fn kl_combination() {
        let t = truth(Matrix::zeros(3, 2), Matrix::identity(2, 2));
        assert!(loss_kl(&Matrix::zeros(3, 2), &Matrix::identity(2, 2), &t).unwrap().abs() < 1e-15);
        let mut est = Matrix::zeros(3, 2);
        est[(0, 0)] = 1.0;
        let got = loss_kl(&est, &(Matrix::identity(2, 2) * 2.0), &t).unwrap();
        assert!((got - (1.5 * 0.6137056388801094 + 0.5)).abs() < 1e-12);
        assert!((got - 1.4205584583201641).abs() < 1e-12);
    }

    #[test]
    fn zero_shrinkage_has_zero_ure() {
        let dims = ModelDims::new(2, 5, 8).unwrap();
        let rep = ure_mean(&[3.0, 1.0], &ShrinkageFunction::zero(), dims).unwrap();
        assert_eq!(rep.tr_phi_star, 0.0);
        assert_eq!(rep.phi_star, Some(vec![0.0, 0.0]));
        assert_eq!(rep.scalar_risk(dims), 10.0);
        assert_eq!(ure_cov_delta(&[3.0, 1.0], &ShrinkageFunction::zero(), dims).unwrap(), 0.0);
        let z = ShrinkageFunction::zero();
        assert_eq!(ure_kl_delta(&[3.0, 1.0], &z, &z, dims).unwrap(), 0.0);
    }

    #[test]
    fn single_eigenvalue_mean_ure() {
        let dims = ModelDims::new(1, 3, 5).unwrap();
        let rep = ure_mean(&[1.0], &ShrinkageFunction::rational(0.5, 1.0), dims).unwrap();
        assert!((rep.tr_phi_star + 0.8125).abs() < 1e-14);
        assert!((rep.phi_star.unwrap()[0] + 0.8125).abs() < 1e-14);
    }

    #[test]
    fn single_eigenvalue_cov_ure() {
        let dims = ModelDims::new(1, 3, 5).unwrap();
        let psi = ShrinkageFunction::separable("0.5", |_| 0.5, |_| 0.0);
        let got = ure_cov_delta(&[2.0], &psi, dims).unwrap();
        assert!((got - 0.2 * (-1.5 - 5.0 * 0.5f64.ln())).abs() < 1e-14);
        assert!((got - 0.3931472).abs() < 1e-7);
    }

    #[test]
    fn cov_ure_domain_and_ties() {
        let dims = ModelDims::new(4, 2, 6).unwrap();
        let big = ShrinkageFunction::separable("1", |_| 1.0, |_| 0.0);
        assert!(matches!(ure_cov_delta(&[2.0, 1.0], &big, dims), Err(Error::Domain(_))));
        let general = ShrinkageFunction::general(
            "gen",
            |f: &[f64]| f.iter().map(|v| 0.1 / (1.0 + v)).collect(),
            |f: &[f64]| f.iter().map(|v| -0.1 / (1.0 + v).powi(2)).collect(),
        );
        assert!(matches!(ure_cov_delta(&[1.0, 1.0], &general, dims), Err(Error::Tie { .. })));
        assert!(ure_cov_delta(&[1.5, 1.0], &general, dims).is_ok());
        // Separable functions take the derivative limit at ties.
        let sep = ShrinkageFunction::rational(0.1, 1.0);
        let tied = ure_cov_delta(&[1.0, 1.0], &sep, dims).unwrap();
        let near = ure_cov_delta(&[1.0 + 1e-6, 1.0], &sep, dims).unwrap();
        assert!((tied - near).abs() < 1e-6);
    }

    #[test]
    fn input_validation() {
        let dims = ModelDims::new(2, 5, 8).unwrap();
        let phi = ShrinkageFunction::rational(1.0, 1.0);
        assert!(matches!(ure_mean(&[1.0], &phi, dims), Err(Error::Dimension(_))));
        assert!(matches!(ure_mean(&[1.0, 2.0], &phi, dims), Err(Error::Domain(_))));
    }

    #[test]
    fn prir_definition() {
        assert_eq!(prir(50.0, 50.0).unwrap(), 0.0);
        assert_eq!(prir(50.0, 40.0).unwrap(), 20.0);
        assert!(prir(0.0, 1.0).is_err());
    }
}

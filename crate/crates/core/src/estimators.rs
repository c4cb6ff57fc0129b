//! Closed-form shrinkage estimators of the mean matrix `Θ` and covariance
//! `Σ`: the generalized Bayes pair, the `(α, β)` families, Efron–Morris, and
//! the general diagonal-shrinkage classes.
//!
//! Every inverse of the form `(I_p + β S⁻¹XᵀX)⁻¹` is evaluated as
//! `(S + βXᵀX)⁻¹ S` with a Cholesky solve, so rank-deficient `X` is fine.

use serde::{Deserialize, Serialize};

use crate::decomp::{eigen_xsx, simul_diag, woodbury_inv, RANK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, symmetrize, Matrix, Vector};
use crate::model::{DataPair, ModelDims};

pub use crate::shrinkage::ShrinkageFunction;

/// Hyperparameters `(a, b, c)` of the hierarchical prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorHyper {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PriorHyper {
    /// The closed-form member `b = a + ℓ − n`.
    pub fn closed_form(a: f64, c: f64, dims: ModelDims) -> Self {
        Self { a, b: a + dims.ell() as f64 - dims.n() as f64, c }
    }

    pub fn is_closed_form(&self, dims: ModelDims) -> bool {
        let b0 = self.a + dims.ell() as f64 - dims.n() as f64;
        (self.b - b0).abs() <= 1e-9 * (1.0 + b0.abs())
    }

    /// Ranges under which the generalized Bayes estimator exists:
    /// `b > −n−m−1` and `ℓ−m−2 < c < a+p`.
    pub fn validate(&self, dims: ModelDims) -> Result<()> {
        let (m, p, n, ell) = (dims.m() as f64, dims.p() as f64, dims.n() as f64, dims.ell() as f64);
        let c_min = ell - m - 2.0;
        if !(self.c > c_min && self.c < self.a + p) {
            return Err(Error::Parameter(format!(
                "need {c_min} < c < a+p = {}, got c = {}",
                self.a + p,
                self.c
            )));
        }
        if !(self.b > -n - m - 1.0) {
            return Err(Error::Parameter(format!("need b > -n-m-1 = {}, got {}", -n - m - 1.0, self.b)));
        }
        Ok(())
    }

    pub fn k0(&self, dims: ModelDims) -> Result<f64> {
        k0(self.a, self.c, dims)
    }
}

/// `(α, β)` of the rational families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(Error::Parameter(format!("alpha={alpha}, beta={beta} must be nonnegative")));
        }
        Ok(Self { alpha, beta })
    }
}

/// `k0 = (a − c + p + ℓ − 1) / (a + m + p + ℓ)`, the posterior mean of the
/// shrinkage factor in the closed-form case.
pub fn k0(a: f64, c: f64, dims: ModelDims) -> Result<f64> {
    let (m, p, ell) = (dims.m() as f64, dims.p() as f64, dims.ell() as f64);
    let den = a + m + p + ell;
    if den == 0.0 {
        return Err(Error::Parameter("a + m + p + ℓ = 0".into()));
    }
    Ok((a - c + p + ell - 1.0) / den)
}

/// `(I_p + β S⁻¹ XᵀX)⁻¹ = (S + βXᵀX)⁻¹ S`.
pub(crate) fn resolvent(data: &DataPair, beta: f64) -> Result<Matrix> {
    if beta == 0.0 {
        let p = data.dims().p();
        return Ok(Matrix::identity(p, p));
    }
    let t = data.s() + beta * data.x().transpose() * data.x();
    Ok(cholesky(&t, "S + βXᵀX")?.solve(data.s()))
}

fn check_k0(k0: f64) -> Result<()> {
    if !(0.0..1.0).contains(&k0) {
        return Err(Error::Parameter(format!("k0={k0} must lie in [0, 1)")));
    }
    Ok(())
}

/// Generalized Bayes mean `X − k0 X (I_p + (1−k0) S⁻¹XᵀX)⁻¹`.
pub fn gb_mean(data: &DataPair, k0: f64) -> Result<Matrix> {
    check_k0(k0)?;
    g_mean(data, GParams { alpha: k0, beta: 1.0 - k0 })
}

/// The m×m form `X − k0 (I_m + (1−k0) X S⁻¹ Xᵀ)⁻¹ X`, by direct inversion.
pub fn gb_mean_left(data: &DataPair, k0: f64) -> Result<Matrix> {
    check_k0(k0)?;
    let m = data.dims().m();
    let xsx = data.x() * data.s_chol().solve(&data.x().transpose());
    let inv = (Matrix::identity(m, m) + (1.0 - k0) * xsx)
        .try_inverse()
        .ok_or_else(|| Error::Rank("I + βXS⁻¹Xᵀ".into()))?;
    Ok(data.x() - k0 * inv * data.x())
}

/// `X − α X (I_p + β S⁻¹XᵀX)⁻¹`.
pub fn g_mean(data: &DataPair, g: GParams) -> Result<Matrix> {
    let z = resolvent(data, g.beta)?;
    Ok(data.x() - g.alpha * data.x() * z)
}

/// Efron–Morris coefficient `(|m−p|−1)/(min{n−p+2m, n+p}+1)`, clamped at 0.
pub fn efron_morris_coef(dims: ModelDims) -> f64 {
    let (m, p, n) = (dims.m() as f64, dims.p() as f64, dims.n() as f64);
    let c = ((m - p).abs() - 1.0) / ((n - p + 2.0 * m).min(n + p) + 1.0);
    c.max(0.0)
}

/// Efron–Morris `X − c_EM R F⁻¹ Rᵀ X` with `R` the leading `ℓ` eigenvectors of
/// `X S⁻¹ Xᵀ`.
pub fn em_mean(data: &DataPair) -> Result<Matrix> {
    let c = efron_morris_coef(data.dims());
    if c == 0.0 {
        return Ok(data.x().clone());
    }
    let e = eigen_xsx(data)?;
    if e.is_rank_deficient() {
        return Err(Error::Rank("X S⁻¹ Xᵀ has a zero eigenvalue".into()));
    }
    let scale = Vector::from_iterator(e.f.len(), e.f.iter().map(|f| c / f));
    let shrink = &e.r * Matrix::from_diagonal(&scale) * e.r.transpose();
    Ok(data.x() - shrink * data.x())
}

fn finite_values(phi: &[f64], what: &str) -> Result<()> {
    if phi.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} is not finite: {phi:?}")))
    }
}

/// General shrinkage class: `(I_m − R Φ(F) Rᵀ) X` for `p > m`,
/// `X (I_p − Q Φ(F) Q⁻¹)` for `m ≥ p`.
pub fn sh_mean(data: &DataPair, phi: &ShrinkageFunction) -> Result<Matrix> {
    if data.dims().wide() {
        let e = eigen_xsx(data)?;
        let vals = phi.values(&e.f);
        finite_values(&vals, "phi")?;
        let shrink = &e.r * Matrix::from_diagonal(&Vector::from_vec(vals)) * e.r.transpose();
        Ok(data.x() - shrink * data.x())
    } else {
        let sp = simul_diag(data)?;
        let vals = phi.values(&sp.f);
        finite_values(&vals, "phi")?;
        let shrink = &sp.q * Matrix::from_diagonal(&Vector::from_vec(vals)) * &sp.q_inv;
        Ok(data.x() - data.x() * shrink)
    }
}

/// Generalized Bayes covariance `Σ̃ − k0 Σ̃ (I_p + (1−k0) S⁻¹XᵀX)⁻¹` with
/// `Σ̃ = S/(m+c+1)`, for the closed-form hyperparameters.
pub fn gb_cov(data: &DataPair, hyper: &PriorHyper) -> Result<Matrix> {
    let dims = data.dims();
    if !hyper.is_closed_form(dims) {
        return Err(Error::Parameter(format!(
            "closed form needs b = a + ℓ − n = {}, got {}",
            hyper.a + dims.ell() as f64 - dims.n() as f64,
            hyper.b
        )));
    }
    let scale = dims.m() as f64 + hyper.c + 1.0;
    if !(scale > 0.0) {
        return Err(Error::Parameter(format!("m + c + 1 = {scale} must be positive")));
    }
    let k0 = hyper.k0(dims)?;
    check_k0(k0)?;
    let z = resolvent(data, 1.0 - k0)?;
    let s = data.s();
    Ok(symmetrize(&((s - k0 * s * z) / scale)))
}

/// The other displayed form of the generalized Bayes covariance:
/// `(a+2m+p)⁻¹ [S + k0 Xᵀ(I_m+(1−k0)XS⁻¹Xᵀ)⁻¹X]` for `p > m`, and
/// `(a+m+2p)⁻¹ [S + k0 {(XᵀX)⁻¹ + (1−k0)S⁻¹}⁻¹]` for `m ≥ p`.
/// Evaluated with explicit inverses.
pub fn gb_cov_alt(data: &DataPair, hyper: &PriorHyper) -> Result<Matrix> {
    let dims = data.dims();
    let (m, p) = (dims.m() as f64, dims.p() as f64);
    let k0 = hyper.k0(dims)?;
    check_k0(k0)?;
    let s_inv = data.s().clone().try_inverse().ok_or_else(|| Error::Rank("S".into()))?;
    let x = data.x();
    let out = if dims.wide() {
        let mm = dims.m();
        let inner = (Matrix::identity(mm, mm) + (1.0 - k0) * x * &s_inv * x.transpose())
            .try_inverse()
            .ok_or_else(|| Error::Rank("I + βXS⁻¹Xᵀ".into()))?;
        (data.s() + k0 * x.transpose() * inner * x) / (hyper.a + 2.0 * m + p)
    } else {
        let xtx_inv = (x.transpose() * x)
            .try_inverse()
            .ok_or_else(|| Error::Rank("XᵀX".into()))?;
        let inner = (xtx_inv + (1.0 - k0) * s_inv)
            .try_inverse()
            .ok_or_else(|| Error::Rank("(XᵀX)⁻¹ + βS⁻¹".into()))?;
        (data.s() + k0 * inner) / (hyper.a + m + 2.0 * p)
    };
    Ok(symmetrize(&out))
}

/// Wide-case family `S/n + (α/n) Xᵀ (I_m + β X S⁻¹ Xᵀ)⁻¹ X`.
pub fn g1_cov(data: &DataPair, g: GParams) -> Result<Matrix> {
    let dims = data.dims();
    if !dims.wide() {
        return Err(Error::Case(format!("Sigma^G1 needs p > m, got {dims}")));
    }
    let n = dims.n() as f64;
    let w = woodbury_inv(data.x(), data.s(), g.beta)?;
    let x = data.x();
    Ok(symmetrize(&((data.s() + g.alpha * x.transpose() * w * x) / n)))
}

/// Tall-case family `(S/n)(I_p − α (I_p + β S⁻¹XᵀX)⁻¹)`, symmetrized.
pub fn g2_cov(data: &DataPair, g: GParams) -> Result<Matrix> {
    let dims = data.dims();
    if dims.wide() {
        return Err(Error::Case(format!("Sigma^G2 needs m >= p, got {dims}")));
    }
    if !(g.alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha={} must be below 1", g.alpha)));
    }
    let z = resolvent(data, g.beta)?;
    let s = data.s();
    Ok(symmetrize(&((s - g.alpha * s * z) / dims.n() as f64)))
}

/// General covariance class: `S/n − n⁻¹ Xᵀ R F⁻¹ Ψ(F) Rᵀ X` for `p > m`,
/// `S/n − n⁻¹ (Qᵀ)⁻¹ Ψ(F) Q⁻¹` for `m ≥ p`.
pub fn sh_cov(data: &DataPair, psi: &ShrinkageFunction) -> Result<Matrix> {
    let dims = data.dims();
    let n = dims.n() as f64;
    let middle = if dims.wide() {
        let e = eigen_xsx(data)?;
        let fmax = e.f.first().copied().unwrap_or(0.0);
        if e.f.iter().any(|&f| !(f > RANK_TOL * fmax)) {
            return Err(Error::Rank("F⁻¹Ψ(F) with a vanishing eigenvalue".into()));
        }
        let vals = psi.values(&e.f);
        finite_values(&vals, "psi")?;
        let d = Vector::from_iterator(vals.len(), vals.iter().zip(&e.f).map(|(v, f)| v / f));
        let xr = data.x().transpose() * &e.r;
        &xr * Matrix::from_diagonal(&d) * xr.transpose()
    } else {
        let sp = simul_diag(data)?;
        let vals = psi.values(&sp.f);
        finite_values(&vals, "psi")?;
        sp.q_inv.transpose() * Matrix::from_diagonal(&Vector::from_vec(vals)) * &sp.q_inv
    };
    Ok(symmetrize(&((data.s() - middle) / n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_frobenius;
    use crate::testutil::random_data;

    fn scalar(x: f64, s: f64, n: usize) -> DataPair {
        DataPair::new(Matrix::from_element(1, 1, x), Matrix::from_element(1, 1, s), n).unwrap()
    }

    #[test]
    fn k0_values() {
        let d = ModelDims::new(5, 10, 25).unwrap();
        assert!((k0(5.0, 2.0, d).unwrap() - 0.68).abs() < 1e-15);
        assert!((k0(5.0, 13.117647, d).unwrap() - 0.2352941).abs() < 1e-7);
        assert_eq!(k0(5.0, 5.0 + 10.0 + 5.0 - 1.0, d).unwrap(), 0.0);
        assert!(k0(-20.0, 0.0, d).is_err());
    }

    #[test]
    fn gb_mean_scalar() {
        let got = gb_mean(&scalar(2.0, 2.0, 2), 0.5).unwrap()[(0, 0)];
        assert!((got - 1.5).abs() < 1e-14);
        assert!(gb_mean(&scalar(2.0, 2.0, 2), 1.0).is_err());
        assert!(gb_mean(&scalar(2.0, 2.0, 2), -0.1).is_err());
    }

    #[test]
    fn trivial_shrinkage() {
        let data = random_data(3, 5, 7, 1);
        assert_eq!(gb_mean(&data, 0.0).unwrap(), *data.x());
        let zero = DataPair::new(Matrix::zeros(3, 5), data.s().clone(), 7).unwrap();
        assert_eq!(gb_mean(&zero, 0.4).unwrap(), Matrix::zeros(3, 5));
        assert_eq!(g_mean(&data, GParams::new(0.0, 3.0).unwrap()).unwrap(), *data.x());
        let sh = sh_mean(&data, &ShrinkageFunction::zero()).unwrap();
        assert!(rel_frobenius(&sh, data.x()) < 1e-14);
    }

    #[test]
    fn g_mean_scalar() {
        let got = g_mean(&scalar(2.0, 2.0, 2), GParams::new(1.0, 2.0).unwrap()).unwrap();
        assert!((got[(0, 0)] - 1.6).abs() < 1e-14);
    }

    #[test]
    fn em_coefficients() {
        let c = |p, n, m| efron_morris_coef(ModelDims::from_pnm(p, n, m).unwrap());
        assert!((c(10, 25, 5) - 4.0 / 26.0).abs() < 1e-15);
        assert!((c(10, 10, 5) - 4.0 / 11.0).abs() < 1e-15);
        assert_eq!(c(10, 25, 9), 0.0);
        assert_eq!(c(10, 25, 11), 0.0);
        assert_eq!(c(10, 25, 10), 0.0);
        let data = random_data(4, 5, 8, 2);
        assert_eq!(em_mean(&data).unwrap(), *data.x());
    }

    #[test]
    fn gb_cov_scalar() {
        let d = ModelDims::new(1, 1, 2).unwrap();
        // k0 = (a+1)/(a+3) = 0.5 at a = 1; c = 0 so m+c+1 = 2.
        let hyper = PriorHyper::closed_form(1.0, 0.0, d);
        assert!((hyper.k0(d).unwrap() - 0.5).abs() < 1e-15);
        let got = gb_cov(&scalar(2.0, 2.0, 2), &hyper).unwrap()[(0, 0)];
        assert!((got - 0.75).abs() < 1e-14);
        let open = PriorHyper { b: 1.0, ..hyper };
        assert!(gb_cov(&scalar(2.0, 2.0, 2), &open).is_err());
    }

    #[test]
    fn gb_cov_without_shrinkage() {
        let data = random_data(3, 6, 9, 4);
        let d = data.dims();
        let a = 2.0;
        let c = a + 6.0 + 3.0 - 1.0;
        let hyper = PriorHyper::closed_form(a, c, d);
        assert_eq!(hyper.k0(d).unwrap(), 0.0);
        let got = gb_cov(&data, &hyper).unwrap();
        assert!(rel_frobenius(&got, &(data.s() / (3.0 + c + 1.0))) < 1e-14);
    }

    #[test]
    fn g1_cov_hand_example() {
        let data = DataPair::new(
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::identity(2, 2),
            2,
        )
        .unwrap();
        let got = g1_cov(&data, GParams::new(1.0, 1.0).unwrap()).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[0.75, 0.0, 0.0, 0.5]);
        assert!((got - want).norm() < 1e-15);
        let tall = random_data(4, 2, 5, 1);
        assert!(matches!(g1_cov(&tall, GParams::new(1.0, 1.0).unwrap()), Err(Error::Case(_))));
    }

    #[test]
    fn g2_cov_scalar_and_errors() {
        // XᵀX = 4, S = 2, n = 2.
        let data = DataPair::new(
            Matrix::from_row_slice(2, 1, &[2.0, 0.0]),
            Matrix::from_element(1, 1, 2.0),
            2,
        )
        .unwrap();
        let got = g2_cov(&data, GParams::new(0.5, 1.0).unwrap()).unwrap()[(0, 0)];
        assert!((got - (1.0 - 0.5 / 3.0)).abs() < 1e-14);
        assert!(matches!(g2_cov(&data, GParams::new(1.0, 1.0).unwrap()), Err(Error::Parameter(_))));
        let s_over_n = g2_cov(&data, GParams::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(s_over_n[(0, 0)], 1.0);
    }

    #[test]
    fn sh_cov_zero_is_unbiased() {
        for (m, p) in [(2, 5), (6, 3)] {
            let data = random_data(m, p, 8, 9);
            let got = sh_cov(&data, &ShrinkageFunction::zero()).unwrap();
            assert!(rel_frobenius(&got, &data.unbiased_cov()) < 1e-14);
        }
    }

    #[test]
    fn sh_cov_rejects_vanishing_eigenvalue() {
        let data = DataPair::new(Matrix::zeros(2, 4), Matrix::identity(4, 4), 5).unwrap();
        let psi = ShrinkageFunction::rational_cov_wide(1.0, 1.0);
        assert!(matches!(sh_cov(&data, &psi), Err(Error::Rank(_))));
        // The closed forms stay defined.
        assert!(g1_cov(&data, GParams::new(1.0, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn hyper_ranges() {
        let d = ModelDims::from_pnm(10, 25, 5).unwrap();
        assert!(PriorHyper::closed_form(5.0, 13.1, d).validate(d).is_ok());
        assert!(PriorHyper::closed_form(5.0, -2.0, d).validate(d).is_err());
        assert!(PriorHyper::closed_form(5.0, 15.0, d).validate(d).is_err());
        let tall = ModelDims::from_pnm(4, 10, 6).unwrap();
        // c > p - m - 2 = -4 in the tall case.
        assert!(PriorHyper::closed_form(1.0, -3.5, tall).validate(tall).is_ok());
        assert!(PriorHyper::closed_form(1.0, -4.0, tall).validate(tall).is_err());
    }
}

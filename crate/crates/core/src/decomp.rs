//! Spectral decompositions the estimators are expressed in.
//!
//! * [`eigen_xsx`]: `X S⁻¹ Xᵀ = R F Rᵀ`, the natural coordinates when `p > m`.
//! * [`simul_diag`]: `Qᵀ S Q = I`, `Qᵀ XᵀX Q = F`, used when `m ≥ p`.
//!
//! Both return the `ℓ = min(m, p)` nonzero eigenvalues in descending order.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_eigen_desc, Matrix, Vector};
use crate::model::DataPair;

/// Below this fraction of the largest eigenvalue an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Leading eigenvectors `R` (m×ℓ) and descending eigenvalues `F` of `X S⁻¹ Xᵀ`.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub r: Matrix,
    pub f: Vec<f64>,
}

impl EigenPair {
    pub fn is_rank_deficient(&self) -> bool {
        rank_deficient(&self.f)
    }
}

/// Simultaneous diagonalizer `Q` (p×p), its inverse, and descending `F`.
#[derive(Debug, Clone)]
pub struct SimulPair {
    pub q: Matrix,
    pub q_inv: Matrix,
    pub f: Vec<f64>,
}

fn rank_deficient(f: &[f64]) -> bool {
    let max = f.iter().cloned().fold(0.0_f64, f64::max);
    max <= 0.0 || f.iter().any(|&v| v <= RANK_TOL * max)
}

/// Eigendecomposition of `X S⁻¹ Xᵀ`, truncated to the `ℓ` leading pairs.
///
/// For `p > m` this is the full `m×m` orthogonal `R`. Rank-deficient `X` is
/// allowed; check [`EigenPair::is_rank_deficient`].
pub fn eigen_xsx(data: &DataPair) -> Result<EigenPair> {
    let ell = data.dims().ell();
    // Y = X L⁻ᵀ so that Y Yᵀ = X S⁻¹ Xᵀ.
    let l = data.s_chol().l();
    let yt = l
        .solve_lower_triangular(&data.x().transpose())
        .ok_or_else(|| Error::CholeskyFailure("S".into()))?;
    let gram = yt.transpose() * &yt;
    let (vals, vecs) = sym_eigen_desc(&gram);
    let f = vals.into_iter().take(ell).map(|v| v.max(0.0)).collect();
    let r = vecs.columns(0, ell).into_owned();
    Ok(EigenPair { r, f })
}

/// `S^{1/2}` and `S^{-1/2}` from the eigendecomposition of `S`.
pub(crate) fn sym_sqrt_pair(s: &Matrix) -> Result<(Matrix, Matrix)> {
    let (vals, vecs) = sym_eigen_desc(s);
    if vals.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::CholeskyFailure("S".into()));
    }
    let root = Vector::from_iterator(vals.len(), vals.iter().map(|v| v.sqrt()));
    let inv_root = root.map(|v| 1.0 / v);
    let half = &vecs * Matrix::from_diagonal(&root) * vecs.transpose();
    let neg_half = &vecs * Matrix::from_diagonal(&inv_root) * vecs.transpose();
    Ok((half, neg_half))
}

/// Simultaneous diagonalization of `S` and `XᵀX`: `Q = S^{-1/2} O` with `O`
/// the eigenvectors of `S^{-1/2} XᵀX S^{-1/2}`.
///
/// Requires `XᵀX` of full rank `p`, so in particular `m ≥ p`.
pub fn simul_diag(data: &DataPair) -> Result<SimulPair> {
    let dims = data.dims();
    if dims.wide() {
        return Err(Error::Rank(format!(
            "XᵀX has rank at most m={} < p={}",
            dims.m(),
            dims.p()
        )));
    }
    let (half, neg_half) = sym_sqrt_pair(data.s())?;
    let xtx = data.x().transpose() * data.x();
    let inner = &neg_half * xtx * &neg_half;
    let (f, o) = sym_eigen_desc(&inner);
    if rank_deficient(&f) {
        return Err(Error::Rank("XᵀX is singular".into()));
    }
    let q = &neg_half * &o;
    let q_inv = o.transpose() * half;
    Ok(SimulPair { q, q_inv, f })
}

/// `(I_m + β X S⁻¹ Xᵀ)⁻¹` through the p×p system `I − βX(S + βXᵀX)⁻¹Xᵀ`.
pub fn woodbury_inv(x: &Matrix, s: &Matrix, beta: f64) -> Result<Matrix> {
    let m = x.nrows();
    if beta < 0.0 {
        return Err(Error::Parameter(format!("beta={beta} must be nonnegative")));
    }
    if beta == 0.0 {
        return Ok(Matrix::identity(m, m));
    }
    let t = s + beta * x.transpose() * x;
    let solved = cholesky(&t, "S + βXᵀX")?.solve(&x.transpose());
    let w = Matrix::identity(m, m) - beta * x * solved;
    Ok((&w + w.transpose()) * 0.5)
}

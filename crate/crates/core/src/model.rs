//! Model dimensions, observed data, true parameters, seeded sampling and
//! construction of the simulation scenarios.

use std::fmt;

use nalgebra::{Cholesky, Dyn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, is_symmetric, Matrix};

/// Relative tolerance for the symmetry check on `S` and `Σ`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// The triple `(m, p, n)`: rows of the mean matrix, its columns (the
/// covariance dimension), and the Wishart degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelDims {
    m: usize,
    p: usize,
    n: usize,
}

impl ModelDims {
    pub fn new(m: usize, p: usize, n: usize) -> Result<Self> {
        if m == 0 || p == 0 {
            return Err(Error::Parameter(format!("m={m} and p={p} must be positive")));
        }
        if n < p {
            return Err(Error::DegreesOfFreedom { df: n as f64, dim: p });
        }
        Ok(Self { m, p, n })
    }

    /// Same as [`ModelDims::new`] with the arguments in the `(p, n, m)` order
    /// used by the result tables.
    pub fn from_pnm(p: usize, n: usize, m: usize) -> Result<Self> {
        Self::new(m, p, n)
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn n(&self) -> usize {
        self.n
    }
    /// `min(m, p)`, the number of nonzero eigenvalues of `X S⁻¹ Xᵀ`.
    pub fn ell(&self) -> usize {
        self.m.min(self.p)
    }
    /// `true` in the wide case `p > m`; `p = m` belongs to the tall branch.
    pub fn wide(&self) -> bool {
        self.p > self.m
    }
}

impl fmt::Display for ModelDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(p,n,m)=({},{},{})", self.p, self.n, self.m)
    }
}

/// Observed `(X, S)` together with the degrees of freedom of `S`.
///
/// `S` is checked for symmetry and positive definiteness on construction and
/// its Cholesky factor is kept for the solves every estimator needs.
#[derive(Clone)]
pub struct DataPair {
    x: Matrix,
    s: Matrix,
    n: usize,
    s_chol: Cholesky<f64, Dyn>,
}

impl fmt::Debug for DataPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DataPair")
            .field("x", &self.x)
            .field("s", &self.s)
            .field("n", &self.n)
            .finish()
    }
}

impl DataPair {
    pub fn new(x: Matrix, s: Matrix, n: usize) -> Result<Self> {
        if !s.is_square() || s.nrows() != x.ncols() {
            return Err(Error::Dimension(format!(
                "X is {}x{} but S is {}x{}",
                x.nrows(),
                x.ncols(),
                s.nrows(),
                s.ncols()
            )));
        }
        if !is_symmetric(&s, SYMMETRY_TOL) {
            return Err(Error::CholeskyFailure("S (asymmetric)".into()));
        }
        ModelDims::new(x.nrows(), x.ncols(), n)?;
        let s_chol = cholesky(&s, "S")?;
        Ok(Self { x, s, n, s_chol })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }
    pub fn s(&self) -> &Matrix {
        &self.s
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dims(&self) -> ModelDims {
        ModelDims { m: self.x.nrows(), p: self.x.ncols(), n: self.n }
    }
    pub(crate) fn s_chol(&self) -> &Cholesky<f64, Dyn> {
        &self.s_chol
    }
    /// `S / n`, the unbiased covariance estimator.
    pub fn unbiased_cov(&self) -> Matrix {
        &self.s / self.n as f64
    }
}

/// True mean `Θ` (m×p) and covariance `Σ` (p×p, SPD).
#[derive(Clone)]
pub struct Parameters {
    theta: Matrix,
    sigma: Matrix,
    sigma_chol: Cholesky<f64, Dyn>,
}

impl fmt::Debug for Parameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Parameters")
            .field("theta", &self.theta)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl Parameters {
    pub fn new(theta: Matrix, sigma: Matrix) -> Result<Self> {
        if !sigma.is_square() || sigma.nrows() != theta.ncols() {
            return Err(Error::Dimension(format!(
                "Theta is {}x{} but Sigma is {}x{}",
                theta.nrows(),
                theta.ncols(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if !is_symmetric(&sigma, SYMMETRY_TOL) {
            return Err(Error::CholeskyFailure("Sigma (asymmetric)".into()));
        }
        let sigma_chol = cholesky(&sigma, "Sigma")?;
        Ok(Self { theta, sigma, sigma_chol })
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }
    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }
    pub(crate) fn sigma_chol(&self) -> &Cholesky<f64, Dyn> {
        &self.sigma_chol
    }
}

/// Covariance structure of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovKind {
    /// `σ_kl = 0.9 + 0.1 δ_kl`
    Equicorr,
    /// `σ_kl = 0.5^|k-l|`
    Ar,
}

impl CovKind {
    pub fn matrix(self, p: usize) -> Matrix {
        match self {
            CovKind::Equicorr => {
                Matrix::from_fn(p, p, |k, l| if k == l { 1.0 } else { 0.9 })
            }
            CovKind::Ar => Matrix::from_fn(p, p, |k, l| 0.5_f64.powi(k.abs_diff(l) as i32)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CovKind::Equicorr => "EQUICORR",
            CovKind::Ar => "AR",
        }
    }
}

impl std::str::FromStr for CovKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "equicorr" => Ok(CovKind::Equicorr),
            "ar" => Ok(CovKind::Ar),
            other => Err(Error::Parse(format!("unknown covariance kind `{other}`"))),
        }
    }
}

/// One cell of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioSpec {
    pub dims: ModelDims,
    /// Singular-value scale `s0 ≥ 0`.
    pub s0: f64,
    /// Dispersion exponent: the trailing singular values are `s0 / 10^q`.
    pub q: f64,
    pub cov_kind: CovKind,
    pub seed: u64,
}

/// Deterministic random stream addressed by `(seed, index)`.
///
/// Streams with the same address replay the same draws; distinct indices
/// select disjoint ChaCha streams under the same key.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    index: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { seed, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn index(&self) -> u64 {
        self.index
    }

    /// A child stream keyed on this stream's address and `k`.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream::new(mix_seed(self.seed, &[self.index]), k)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub(crate) fn chi_square(&mut self, df: f64) -> Result<f64> {
        let dist = ChiSquared::new(df)
            .map_err(|_| Error::DegreesOfFreedom { df, dim: 1 })?;
        Ok(dist.sample(&mut self.rng))
    }

    /// `rows × cols` matrix of i.i.d. standard normals, filled row by row.
    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let mut z = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                z[(i, j)] = self.standard_normal();
            }
        }
        z
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Folds `parts` into `seed` with the splitmix64 finalizer.
pub fn mix_seed(seed: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(splitmix(seed), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Draws `X ~ N_{m×p}(Θ, I_m ⊗ Σ)` as `Θ + Z Lᵀ` with `L` the lower Cholesky
/// factor of `Σ`.
pub fn sample_matrix_normal(theta: &Matrix, sigma: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    let ch = cholesky(sigma, "Sigma")?;
    Ok(matrix_normal_with_factor(theta, &ch.l(), rng))
}

pub(crate) fn matrix_normal_with_factor(theta: &Matrix, l: &Matrix, rng: &mut RngStream) -> Matrix {
    let z = rng.normal_matrix(theta.nrows(), theta.ncols());
    theta + z * l.transpose()
}

/// Draws `S ~ W_p(n, Σ)` by the Bartlett construction.
pub fn sample_wishart(n: usize, sigma: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    let p = sigma.nrows();
    if n < p {
        return Err(Error::DegreesOfFreedom { df: n as f64, dim: p });
    }
    let ch = cholesky(sigma, "Sigma")?;
    wishart_with_factor(n as f64, &ch.l(), rng)
}

/// Bartlett draw `L A Aᵀ Lᵀ` for real `df > dim - 1`.
pub(crate) fn wishart_with_factor(df: f64, l: &Matrix, rng: &mut RngStream) -> Result<Matrix> {
    let a = bartlett_factor(df, l.nrows(), rng)?;
    let b = l * a;
    let s = &b * b.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Lower-triangular Bartlett factor: `sqrt(χ²_{df-i})` on the diagonal,
/// standard normals below it.
pub(crate) fn bartlett_factor(df: f64, dim: usize, rng: &mut RngStream) -> Result<Matrix> {
    if !(df > dim as f64 - 1.0) {
        return Err(Error::DegreesOfFreedom { df, dim });
    }
    let mut a = Matrix::zeros(dim, dim);
    for i in 0..dim {
        a[(i, i)] = rng.chi_square(df - i as f64)?.sqrt();
        for j in 0..i {
            a[(i, j)] = rng.standard_normal();
        }
    }
    Ok(a)
}

/// `rows × k` matrix with orthonormal columns: QR of a square standard-normal
/// matrix with the R diagonal forced nonnegative.
pub(crate) fn random_orthonormal(rows: usize, k: usize, rng: &mut RngStream) -> Matrix {
    let z = rng.normal_matrix(rows, rows);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..rows {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q.columns(0, k).into_owned()
}

/// Singular values of the scenario mean: the first `min(k, ℓ)` follow
/// `s0 + s0 (i-1)/(k-1)` with `k = max(⌊p/5⌋, 2)`, the rest are `s0 / 10^q`.
pub fn scenario_singular_values(dims: ModelDims, s0: f64, q: f64) -> Vec<f64> {
    let ell = dims.ell();
    let k = (dims.p() / 5).max(2);
    let lead = k.min(ell);
    let tail = s0 / 10f64.powf(q);
    (0..ell)
        .map(|i| {
            if i < lead {
                s0 + s0 * i as f64 / (k - 1) as f64
            } else {
                tail
            }
        })
        .collect()
}

/// Builds `(Θ, Σ)` for a scenario. The singular vectors of `Θ` are drawn from
/// `rng`; `Σ` follows the scenario's covariance kind.
pub fn build_scenario(spec: &ScenarioSpec, rng: &mut RngStream) -> Result<Parameters> {
    let dims = ModelDims::new(spec.dims.m(), spec.dims.p(), spec.dims.n())?;
    if !(spec.s0 >= 0.0) || !spec.q.is_finite() {
        return Err(Error::Parameter(format!("s0={} q={}", spec.s0, spec.q)));
    }
    let (m, p, ell) = (dims.m(), dims.p(), dims.ell());
    let sv = scenario_singular_values(dims, spec.s0, spec.q);
    let u = random_orthonormal(m, ell, rng);
    let v = random_orthonormal(p, ell, rng);
    let theta = if spec.s0 == 0.0 {
        Matrix::zeros(m, p)
    } else {
        let mut us = u;
        for (j, s) in sv.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * v.transpose()
    };
    Parameters::new(theta, spec.cov_kind.matrix(p))
}

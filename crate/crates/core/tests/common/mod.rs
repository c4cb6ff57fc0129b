//! Helpers shared by the integration tests.
#![allow(dead_code)]

use gbshrink::model::{sample_wishart, DataPair, Parameters, RngStream};
use gbshrink::Matrix;
use nalgebra::{Cholesky, SymmetricEigen};

/// Random SPD matrix `A Aᵀ / k + I/2`.
pub fn random_spd(p: usize, rng: &mut RngStream) -> Matrix {
    let a = rng.normal_matrix(p, p);
    &a * a.transpose() / p as f64 + Matrix::identity(p, p) * 0.5
}

/// Standard normal `X` and `S ~ W_p(n, Σ)` for a random SPD `Σ`.
pub fn random_data(m: usize, p: usize, n: usize, seed: u64) -> DataPair {
    let mut rng = RngStream::new(seed, 0);
    let x = rng.normal_matrix(m, p);
    let sigma = random_spd(p, &mut rng);
    let s = sample_wishart(n, &sigma, &mut rng).unwrap();
    DataPair::new(x, s, n).unwrap()
}

pub fn random_truth(m: usize, p: usize, seed: u64) -> Parameters {
    let mut rng = RngStream::new(seed, 1);
    let theta = rng.normal_matrix(m, p);
    let sigma = random_spd(p, &mut rng);
    Parameters::new(theta, sigma).unwrap()
}

/// Random `k × k` orthogonal matrix.
pub fn random_orthogonal(k: usize, rng: &mut RngStream) -> Matrix {
    rng.normal_matrix(k, k).qr().q()
}

pub fn rel(a: &Matrix, b: &Matrix) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap());
    v
}

/// Singular values, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let mut v: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
    v
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// `KL(N(μ₀, Σ₀) ‖ N(μ₁, Σ₁))` for vectors, written out from the densities.
pub fn mvn_kl(mu0: &nalgebra::DVector<f64>, s0: &Matrix, mu1: &nalgebra::DVector<f64>, s1: &Matrix) -> f64 {
    let k = mu0.len() as f64;
    let c1 = Cholesky::new(s1.clone()).unwrap();
    let c0 = Cholesky::new(s0.clone()).unwrap();
    let logdet = |c: &Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let trace = c1.solve(s0).trace();
    let d = mu1 - mu0;
    let quad = d.dot(&c1.solve(&d));
    0.5 * (trace + quad - k + logdet(&c1) - logdet(&c0))
}

/// Kullback–Leibler divergence of `N_{m×p}(Θ̂, I ⊗ Σ̂)` from `N_{m×p}(Θ, I ⊗ Σ)`
/// through the `mp`-dimensional row-stacked vector.
pub fn matrix_normal_kl(theta_hat: &Matrix, sigma_hat: &Matrix, theta: &Matrix, sigma: &Matrix) -> f64 {
    let m = theta.nrows();
    let vec_rows = |t: &Matrix| nalgebra::DVector::from_iterator(t.len(), t.transpose().iter().copied());
    let eye = Matrix::identity(m, m);
    mvn_kl(&vec_rows(theta_hat), &kron(&eye, sigma_hat), &vec_rows(theta), &kron(&eye, sigma))
}

/// Tanh-sinh quadrature of `f` over `(a, b)`; tolerates integrable endpoint
/// singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 1.0 / 64.0;
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    let kmax = (4.0 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        let x = u.tanh();
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() / u.cosh().powi(2);
        // Distance to the nearer endpoint, computed without cancellation.
        let dist = half / (u.abs().exp() * u.cosh());
        let xi = if x >= 0.0 { b - dist } else { a + dist };
        if dist <= 0.0 || !(xi > a && xi < b) {
            continue;
        }
        let fx = f(xi);
        if fx.is_finite() {
            sum += w * fx;
        }
    }
    sum * h * half
}

/// `2 Σ i·x_i ≤ (k+1) Σ x_i` for a descending vector `x` of length `k`.
pub fn dey_srinivasan_holds(x: &[f64]) -> bool {
    let k = x.len() as f64;
    let lhs: f64 = x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).sum();
    let rhs = (k + 1.0) * x.iter().sum::<f64>();
    lhs <= rhs + 1e-12 * rhs.abs().max(1.0)
}

/// Tolerance for identities that pass through `S⁻¹`: `1e-10` scaled by `κ(S)/100`.
pub fn cond_tol(data: &DataPair) -> f64 {
    let ev = sym_eigenvalues(data.s());
    let kappa = ev[ev.len() - 1] / ev[0];
    1e-10 * (kappa / 100.0).max(1.0)
}

/// Frobenius norms of the rank-one pieces the estimate is assembled from:
/// the mean (or covariance) moves by `Σ δφ_i · w_i` when `φ` moves by `δφ`.
pub fn piece_norms(data: &DataPair, cov_scale: Option<f64>) -> Vec<f64> {
    if data.dims().wide() {
        let ep = gbshrink::decomp::eigen_xsx(data).unwrap();
        (0..ep.f.len())
            .map(|i| {
                let r = ep.r.column(i);
                match cov_scale {
                    None => (r * (r.transpose() * data.x())).norm(),
                    Some(s) => (data.x().transpose() * r).norm_squared() / s,
                }
            })
            .collect()
    } else {
        let sp = gbshrink::decomp::simul_diag(data).unwrap();
        (0..sp.f.len())
            .map(|i| {
                let q = sp.q.column(i);
                let qi = sp.q_inv.row(i);
                match cov_scale {
                    None => ((data.x() * q) * qi).norm(),
                    Some(s) => sp.f[i] * qi.norm_squared() / s,
                }
            })
            .collect()
    }
}

/// `3 Σ_i |∂φ_i/∂e_i| · se_i · ‖w_i‖`, the first-order error of an
/// oracle-assembled estimate.
pub fn oracle_tolerance(f: &[f64], e: &[f64], se: &[f64], norms: &[f64]) -> f64 {
    let sens = gbshrink::posterior::phi_sensitivity(f, e);
    3.0 * sens.iter().zip(se).zip(norms).map(|((s, e), w)| s * e * w).sum::<f64>()
}

/// `E[λ | f]` by quadrature of the scalar posterior
/// `λ^{ν₁/2−1} (1−λ)^{ν₂/2−1} (1 − fλ/(1+f))^{κ}`.
pub fn quadrature_mean(f: f64, hyper: &gbshrink::estimators::PriorHyper, d: gbshrink::model::ModelDims) -> f64 {
    let params = gbshrink::posterior::MatrixBetaParams::posterior(hyper, d).unwrap();
    let kappa = gbshrink::posterior::weight_exponent(hyper, d);
    let t = f / (1.0 + f);
    let dens = |x: f64| {
        (x.ln() * (0.5 * params.nu1 - 1.0) + (1.0 - x).ln() * (0.5 * params.nu2 - 1.0) + (1.0 - t * x).ln() * kappa)
            .exp()
    };
    tanh_sinh(|x| x * dens(x), 0.0, 1.0) / tanh_sinh(dens, 0.0, 1.0)
}

#[derive(Debug)]
pub struct GeneralGap {
    pub mean_err: f64,
    pub mean_tol: f64,
    pub cov_err: f64,
    pub cov_tol: f64,
}

/// Frobenius distance between oracle-assembled and closed-form estimates at
/// `b = a + ℓ − n`, with the propagated Monte Carlo tolerance.
pub fn general_form_gap(m: usize, p: usize, n: usize, seed: u64, samples: usize) -> GeneralGap {
    use gbshrink::estimators::{gb_cov, gb_mean, PriorHyper};
    use gbshrink::posterior::{gb_cov_general, gb_mean_general};
    let data = random_data(m, p, n, seed);
    let d = data.dims();
    let mut rng = RngStream::new(seed, 1);
    let a = 1.0 + 4.0 * rng.standard_normal().abs();
    let c = (d.ell() as f64 - m as f64 - 2.0).max(-2.0) + 0.5 + rng.standard_normal().abs();
    let hyper = PriorHyper::closed_form(a, c, d);
    hyper.validate(d).unwrap();
    let k0 = hyper.k0(d).unwrap();
    let stream = RngStream::new(seed, 2);

    let gm = gb_mean_general(&data, &hyper, samples, &stream).unwrap();
    let mean_tol = oracle_tolerance(&gm.f, &gm.oracle.diagonal(), &gm.oracle.diagonal_se(), &piece_norms(&data, None));
    let mean_err = (&gm.estimate - gb_mean(&data, k0).unwrap()).norm();

    let gc = gb_cov_general(&data, &hyper, samples, &stream).unwrap();
    let scale = hyper.b + (m + n + p) as f64;
    let cov_tol =
        oracle_tolerance(&gc.f, &gc.oracle.diagonal(), &gc.oracle.diagonal_se(), &piece_norms(&data, Some(scale)));
    let cov_err = (&gc.estimate - gb_cov(&data, &hyper).unwrap()).norm();
    GeneralGap { mean_err, mean_tol, cov_err, cov_tol }
}

/// `(I_m + β X S⁻¹ Xᵀ)⁻¹` evaluated directly in m×m form: `Y = L⁻¹Xᵀ` with
/// `S = LLᵀ`, then the Cholesky inverse of `I + βYᵀY`.
pub fn direct_resolvent(x: &Matrix, s: &Matrix, beta: f64) -> Matrix {
    let m = x.nrows();
    let l = Cholesky::new(s.clone()).unwrap().l();
    let y = l.solve_lower_triangular(&x.transpose()).unwrap();
    Cholesky::new(Matrix::identity(m, m) + beta * y.transpose() * &y).unwrap().inverse()
}

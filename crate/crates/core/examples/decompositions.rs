//! Eigen-decomposition of `X S⁻¹ Xᵀ` (wide case) and simultaneous
//! diagonalization of `S` and `XᵀX` (tall case).

use gbshrink::decomp::{eigen_xsx, simul_diag, woodbury_inv};
use gbshrink::model::{sample_wishart, CovKind, DataPair, RngStream};
use gbshrink::Matrix;

fn draw(m: usize, p: usize, n: usize, rng: &mut RngStream) -> gbshrink::Result<DataPair> {
    let x = rng.normal_matrix(m, p);
    let s = sample_wishart(n, &CovKind::Equicorr.matrix(p), rng)?;
    DataPair::new(x, s, n)
}

fn main() -> gbshrink::Result<()> {
    let mut rng = RngStream::new(3, 0);

    let wide = draw(3, 6, 10, &mut rng)?;
    let ep = eigen_xsx(&wide)?;
    println!("p > m: F = {:.4?}", ep.f);
    println!("  |RᵀR − I| = {:.1e}", (ep.r.transpose() * &ep.r - Matrix::identity(3, 3)).norm());

    let tall = draw(6, 3, 10, &mut rng)?;
    let sp = simul_diag(&tall)?;
    println!("m >= p: F = {:.4?}", sp.f);
    println!("  |QᵀSQ − I| = {:.1e}", (sp.q.transpose() * tall.s() * &sp.q - Matrix::identity(3, 3)).norm());

    // (I + β X S⁻¹ Xᵀ)⁻¹ has eigenvalues 1/(1 + β f_i).
    let w = woodbury_inv(wide.x(), wide.s(), 0.5)?;
    let mut ev: Vec<f64> = w.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    let want: Vec<f64> = ep.f.iter().map(|f| 1.0 / (1.0 + 0.5 * f)).collect();
    println!("resolvent eigenvalues {ev:.4?}\n           expected {want:.4?}");
    Ok(())
}

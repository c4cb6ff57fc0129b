//! Draws one `(X, S)` pair from a simulation scenario and compares the
//! singular values of `Θ` with the design.
//!
//! Run: `cargo run --example sample_model -- [seed]`

use gbshrink::model::{
    build_scenario, sample_matrix_normal, sample_wishart, scenario_singular_values, CovKind, ModelDims, RngStream,
    ScenarioSpec,
};

fn main() -> gbshrink::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse().expect("seed")).unwrap_or(7);
    let dims = ModelDims::from_pnm(6, 10, 4)?;
    let spec = ScenarioSpec { dims, s0: 5.0, q: 0.5, cov_kind: CovKind::Ar, seed };

    let mut setup = RngStream::new(seed, 0);
    let truth = build_scenario(&spec, &mut setup)?;
    let sv = truth.theta().clone().svd(false, false).singular_values;
    let mut design = scenario_singular_values(dims, spec.s0, spec.q);
    design.sort_by(|a, b| b.total_cmp(a));
    println!("design singular values   {design:.6?}");
    println!("realised singular values {:.6?}", sv.as_slice());

    let mut rng = RngStream::new(seed, 1);
    let x = sample_matrix_normal(truth.theta(), truth.sigma(), &mut rng)?;
    let s = sample_wishart(dims.n(), truth.sigma(), &mut rng)?;
    println!("X ({}x{}):{x:.3}", x.nrows(), x.ncols());
    println!("S/n vs Sigma, max |diff| = {:.3}", (s / dims.n() as f64 - truth.sigma()).abs().max());
    Ok(())
}

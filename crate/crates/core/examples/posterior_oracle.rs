//! Importance-sampling estimate of `E[Λ | F]` away from the closed-form
//! prior, and the estimator assembled from it.
//!
//! Run: `cargo run --release --example posterior_oracle -- [samples]`

use gbshrink::estimators::{gb_mean, PriorHyper};
use gbshrink::model::{sample_wishart, CovKind, DataPair, ModelDims, RngStream};
use gbshrink::posterior::{gb_mean_general, posterior_lambda_mean};

fn main() -> gbshrink::Result<()> {
    let samples: usize = std::env::args().nth(1).map(|s| s.parse().expect("samples")).unwrap_or(200_000);
    let dims = ModelDims::new(2, 5, 8)?;
    let closed = PriorHyper::closed_form(2.0, 0.5, dims);
    let k0 = closed.k0(dims)?;
    let f = [6.0, 0.8];
    let rng = RngStream::new(19, 0);

    for shift in [0.0, 2.0, 6.0] {
        let hyper = PriorHyper { b: closed.b + shift, ..closed };
        let est = posterior_lambda_mean(&f, &hyper, dims, samples, &rng)?;
        println!(
            "b = {:>5}: E[Λ|F] diag {:.4?} (se {:.1e}), off-diagonal z {:.2}, ESS {:.0}",
            hyper.b,
            est.diagonal(),
            est.diagonal_se().iter().cloned().fold(0.0, f64::max),
            est.max_off_diagonal_z(),
            est.ess
        );
    }
    println!("closed form k0 = {k0:.4}");

    let mut r = RngStream::new(20, 0);
    let data = DataPair::new(r.normal_matrix(2, 5), sample_wishart(8, &CovKind::Ar.matrix(5), &mut r)?, 8)?;
    let general = gb_mean_general(&data, &closed, samples, &rng)?;
    let gap = (&general.estimate - gb_mean(&data, k0)?).norm() / general.estimate.norm();
    println!("integral form vs closed form at b = a + ℓ − n: relative gap {gap:.1e}");
    Ok(())
}

//! Unbiased risk estimates against realised losses, averaged over
//! replications.
//!
//! Run: `cargo run --release --example unbiased_risk -- [reps]`

use gbshrink::conditions::{default_config, EstimatorLabel};
use gbshrink::decomp::eigen_xsx;
use gbshrink::model::{build_scenario, sample_matrix_normal, sample_wishart, CovKind, DataPair, ModelDims, RngStream, ScenarioSpec};
use gbshrink::risk::{loss_kl, loss_scalar_quad, loss_stein, ure_all};

fn main() -> gbshrink::Result<()> {
    let reps: usize = std::env::args().nth(1).map(|s| s.parse().expect("reps")).unwrap_or(5000);
    for (p, n, m) in [(6, 10, 4), (4, 10, 6)] {
        let dims = ModelDims::from_pnm(p, n, m)?;
        let spec = ScenarioSpec { dims, s0: 5.0, q: 1.0, cov_kind: CovKind::Equicorr, seed: 5 };
        let truth = build_scenario(&spec, &mut RngStream::new(spec.seed, 0))?;
        for label in [EstimatorLabel::G1, EstimatorLabel::G2] {
            let cfg = default_config(dims, label)?;
            let psi = cfg.psi(dims).expect("covariance shrinkage");
            let mut sums = [0.0; 6];
            for r in 0..reps {
                let mut rng = RngStream::new(spec.seed, r as u64 + 1);
                let x = sample_matrix_normal(truth.theta(), truth.sigma(), &mut rng)?;
                let data = DataPair::new(x, sample_wishart(n, truth.sigma(), &mut rng)?, n)?;
                let ure = ure_all(&eigen_xsx(&data)?.f, &cfg.phi(), &psi, dims)?;
                let (mean, cov) = (cfg.estimate_mean(&data)?, cfg.estimate_cov(&data)?);
                let base = data.s() / n as f64;
                let row = [
                    ure.tr_phi_star,
                    loss_scalar_quad(&mean, &truth)? - loss_scalar_quad(data.x(), &truth)?,
                    ure.delta_cov.unwrap_or(f64::NAN),
                    loss_stein(&cov, truth.sigma())? - loss_stein(&base, truth.sigma())?,
                    ure.delta_kl.unwrap_or(f64::NAN),
                    loss_kl(&mean, &cov, &truth)? - loss_kl(data.x(), &base, &truth)?,
                ];
                for (s, v) in sums.iter_mut().zip(row) {
                    *s += v / reps as f64;
                }
            }
            println!(
                "{dims} {label}: quadratic {:+.3} vs {:+.3}, stein {:+.4} vs {:+.4}, kl {:+.3} vs {:+.3}",
                sums[0], sums[1], sums[2], sums[3], sums[4], sums[5]
            );
        }
    }
    Ok(())
}

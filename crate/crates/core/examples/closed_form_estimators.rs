//! All four default estimators on one simulated data set, with their losses.
//!
//! Run: `cargo run --example closed_form_estimators -- [p n m]`

use gbshrink::conditions::{default_config, EstimatorLabel};
use gbshrink::model::{build_scenario, sample_matrix_normal, sample_wishart, CovKind, DataPair, ModelDims, RngStream, ScenarioSpec};
use gbshrink::risk::losses;

fn main() -> gbshrink::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|s| s.parse().expect("integer")).collect();
    let (p, n, m) = match args[..] {
        [p, n, m] => (p, n, m),
        _ => (10, 25, 5),
    };
    let dims = ModelDims::from_pnm(p, n, m)?;
    let spec = ScenarioSpec { dims, s0: 2.0, q: 1.0, cov_kind: CovKind::Equicorr, seed: 11 };
    let truth = build_scenario(&spec, &mut RngStream::new(spec.seed, 0))?;
    let mut rng = RngStream::new(spec.seed, 1);
    let x = sample_matrix_normal(truth.theta(), truth.sigma(), &mut rng)?;
    let s = sample_wishart(n, truth.sigma(), &mut rng)?;
    let data = DataPair::new(x, s, n)?;

    let base = losses(data.x(), &(data.s() / n as f64), &truth)?;
    println!("{dims}");
    println!("{:>6} {:>10} {:>10} {:>10}", "", "L_Q", "L_S", "KL");
    println!("{:>6} {:>10.4} {:>10.4} {:>10.4}", "X,S/n", base.l_scalar, base.l_stein, base.l_kl);
    for label in EstimatorLabel::ALL {
        let cfg = match default_config(dims, label) {
            Ok(c) => c,
            Err(e) => {
                println!("{label:>6} {e}");
                continue;
            }
        };
        let l = losses(&cfg.estimate_mean(&data)?, &cfg.estimate_cov(&data)?, &truth)?;
        println!("{label:>6} {:>10.4} {:>10.4} {:>10.4}", l.l_scalar, l.l_stein, l.l_kl);
    }
    Ok(())
}

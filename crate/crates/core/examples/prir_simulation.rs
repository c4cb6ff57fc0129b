//! Monte Carlo risk study at two design points with `Θ = 0`.
//!
//! Run: `cargo run --release --example prir_simulation -- [reps] [seed]`

use gbshrink::conditions::EstimatorLabel;
use gbshrink::model::{CovKind, ModelDims};
use gbshrink::sim::{expand_scenarios, run_experiment, EstimatorSpec, ExperimentGrid, ThetaMode};

fn main() -> gbshrink::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().map(|s| s.parse().expect("reps")).unwrap_or(2000);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);

    let dims = [ModelDims::from_pnm(10, 10, 5)?, ModelDims::from_pnm(10, 25, 30)?];
    let grid = ExperimentGrid {
        scenarios: expand_scenarios(&dims, &[0.0], &[1.0], &[CovKind::Equicorr, CovKind::Ar], seed),
        estimators: EstimatorLabel::ALL.iter().map(|&l| EstimatorSpec::Default(l)).collect(),
        replications: reps,
        base_seed: seed,
        theta_mode: ThetaMode::FixedPerScenario,
    };

    println!("{:>10} {:>9} {:>4} {:>16} {:>16} {:>16}", "(p,n,m)", "Sigma", "est", "PRIR theta", "PRIR sigma", "PRIR KL");
    for r in run_experiment(&grid) {
        let d = r.scenario.dims;
        let cell = |v: f64, se: f64| format!("{v:7.2} ({se:.2})");
        println!(
            "{:>10} {:>9} {:>4} {:>16} {:>16} {:>16}",
            format!("({},{},{})", d.p(), d.n(), d.m()),
            r.scenario.cov_kind.name(),
            r.estimator,
            cell(r.prir_theta, r.se_theta),
            cell(r.prir_sigma, r.se_sigma),
            cell(r.prir_kl, r.se_kl),
        );
    }
    Ok(())
}

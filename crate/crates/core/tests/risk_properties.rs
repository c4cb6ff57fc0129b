mod common;

use common::{dey_srinivasan_holds, matrix_normal_kl, random_data, random_truth, rel};
use gbshrink::estimators::{gb_cov, gb_mean, PriorHyper};
use gbshrink::model::{ModelDims, RngStream};
use gbshrink::risk::{loss_kl, loss_matrix_quad, loss_scalar_quad, loss_stein, losses, ure_all, ure_cov_delta, ure_mean};
use gbshrink::{Matrix, ShrinkageFunction};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..7, 1usize..7, 0usize..5).prop_map(|(m, p, e)| (m, p, p + e))
}

fn descending(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..50.0, len).prop_map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_matches_vectorized_density_form((m, p, n) in dims(), seed in any::<u64>()) {
        let data = random_data(m, p, n, seed);
        let truth = random_truth(m, p, seed);
        let cov = data.unbiased_cov();
        let got = loss_kl(data.x(), &cov, &truth).unwrap();
        let want = matrix_normal_kl(data.x(), &cov, truth.theta(), truth.sigma());
        prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn loss_bundle_is_consistent((m, p, n) in dims(), seed in any::<u64>()) {
        let data = random_data(m, p, n, seed);
        let truth = random_truth(m, p, seed);
        let mean = gb_mean(&data, 0.3).unwrap();
        let b = losses(&mean, &data.unbiased_cov(), &truth).unwrap();
        prop_assert!((b.l_scalar - b.l_matrix.trace()).abs() <= 1e-12 * b.l_scalar.max(1.0));
        let kl = 0.5 * m as f64 * b.l_stein + 0.5 * b.l_scalar;
        prop_assert!((b.l_kl - kl).abs() <= 1e-12 * kl.abs().max(1.0));
        prop_assert!(rel(&b.l_matrix, &loss_matrix_quad(&mean, &truth).unwrap()) == 0.0);
        let direct = loss_scalar_quad(&mean, &truth).unwrap();
        prop_assert!((b.l_scalar - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn stein_loss_is_nonnegative((m, p, n) in dims(), seed in any::<u64>()) {
        let data = random_data(m, p, n, seed);
        let truth = random_truth(m, p, seed);
        let cov = gb_cov(&data, &PriorHyper::closed_form(1.0, 0.0, data.dims())).unwrap();
        prop_assert!(loss_stein(&cov, truth.sigma()).unwrap() >= -1e-12);
        prop_assert!(loss_stein(truth.sigma(), truth.sigma()).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn dey_srinivasan_inequality(x in (1usize..12).prop_flat_map(descending)) {
        prop_assert!(dey_srinivasan_holds(&x));
    }

    #[test]
    fn ure_trace_matches_components(m in 1usize..6, extra_p in 1usize..5, extra_n in 0usize..5,
                                     alpha in 0.0f64..5.0, beta in 0.0f64..3.0, seed in any::<u64>()) {
        let p = m + extra_p;
        let d = ModelDims::new(m, p, p + extra_n).unwrap();
        let mut rng = RngStream::new(seed, 0);
        let mut f: Vec<f64> = (0..m).map(|_| rng.standard_normal().abs() * 10.0 + 0.01).collect();
        f.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let rep = ure_mean(&f, &ShrinkageFunction::rational(alpha, beta), d).unwrap();
        let phi = rep.phi_star.as_ref().unwrap();
        let s: f64 = phi.iter().sum();
        prop_assert!((s - rep.tr_phi_star).abs() <= 1e-10 * s.abs().max(1.0));
        prop_assert!(rep.d.windows(2).all(|w| w[0] < w[1]));
    }

    /// Tied eigenvalues use the derivative in place of the divided difference,
    /// so the estimate is continuous in `F`.
    #[test]
    fn ure_is_continuous_at_ties(alpha in 0.05f64..0.9, beta in 0.0f64..2.0, f0 in 0.1f64..20.0) {
        let d = ModelDims::new(6, 4, 10).unwrap();
        let phi = ShrinkageFunction::rational(alpha, beta);
        let tied = vec![f0; 4];
        let near: Vec<f64> = (0..4).map(|i| f0 * (1.0 + 1e-6 * (3 - i) as f64)).collect();
        let a = ure_all(&tied, &phi, &phi, d).unwrap();
        let b = ure_all(&near, &phi, &phi, d).unwrap();
        prop_assert!((a.tr_phi_star - b.tr_phi_star).abs() <= 1e-4 * a.tr_phi_star.abs().max(1.0));
        prop_assert!((a.delta_cov.unwrap() - b.delta_cov.unwrap()).abs() <= 1e-4);
    }
}

#[test]
fn stein_loss_vanishes_only_at_truth() {
    let sigma = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    assert!(loss_stein(&sigma, &sigma).unwrap().abs() < 1e-14);
    assert!(loss_stein(&(&sigma * 1.01), &sigma).unwrap() > 0.0);
}

#[test]
fn prop_4_1_limit_is_positive() {
    for (m, p, n) in [(6, 4, 10), (5, 5, 7), (30, 10, 25)] {
        let d = ModelDims::new(m, p, n).unwrap();
        for alpha in [0.1f64, 0.5, 0.9] {
            let want = p as f64 * ((1.0 - alpha) - (1.0 - alpha).ln() - 1.0);
            let mut prev = f64::INFINITY;
            for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
                let got = ure_cov_delta(&vec![eps; p], &ShrinkageFunction::rational(alpha, 1.0), d).unwrap();
                let gap = (got - want).abs();
                assert!(gap <= prev + 1e-12, "gap grew at eps={eps}");
                prev = gap;
            }
            assert!(prev < 1e-4 && want > 0.0);
        }
    }
}

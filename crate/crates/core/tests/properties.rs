// SPDX-License-Identifier: MIT OR Apache-2.0

use irregcp::detect::{centered_cusum_min, eta_objective};
use irregcp::nulldist::{asymptotic_cdf, asymptotic_quantile};
use irregcp::numeric::normal_quantile;
use irregcp::{
    block_means, compute_test_statistic, estimate_lrv, gen_noise, gen_signal, locate, locate_amoc,
    locate_cusum, locate_sbs1, make_dataset, sliding_block_means, step2, DetectorConfig, NoiseSpec,
    Sbs1Params, Series, SignalSpec, VarianceSource,
};
use proptest::prelude::*;

fn values(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, len)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Step signal plus a small, bounded perturbation.
fn noisy_step(n: usize, tau: usize, h: f64, wiggle: &[f64]) -> Vec<f64> {
    (1..=n)
        .map(|t| if t < tau { 0.0 } else { h } + wiggle[(t - 1) % wiggle.len()])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn block_means_are_consistent(xs in values(4..200), k in 1usize..8) {
        prop_assume!(xs.len() >= k);
        let s = Series::new(xs.clone()).unwrap();
        let means = block_means(&s, k).unwrap();
        let m = xs.len() / k;
        prop_assert_eq!(means.len(), m);
        let avg = means.iter().sum::<f64>() / m as f64;
        let direct = xs[..m * k].iter().sum::<f64>() / (m * k) as f64;
        prop_assert!(close(avg, direct, 1e-10));

        let sliding = sliding_block_means(&s, k, k, m * k).unwrap();
        for j in 1..=m {
            prop_assert!(close(sliding[(j - 1) * k], means[j - 1], 1e-10));
        }
    }

    #[test]
    fn block_means_shift_equivariant(xs in values(4..120), k in 1usize..6, c in -100.0..100.0f64) {
        prop_assume!(xs.len() >= k);
        let s = Series::new(xs).unwrap();
        let shifted = s.map(|x| x + c).unwrap();
        for (a, b) in block_means(&s, k).unwrap().iter().zip(block_means(&shifted, k).unwrap()) {
            prop_assert!(close(a + c, b, 1e-10));
        }
    }

    #[test]
    fn normal_quantile_is_antisymmetric(p in 1e-6..0.5f64) {
        let lo = normal_quantile(p).unwrap();
        let hi = normal_quantile(1.0 - p).unwrap();
        prop_assert!(close(lo, -hi, 1e-9));
    }

    #[test]
    fn asymptotic_quantile_inverts_cdf(alpha in 1e-4..0.99f64) {
        let q = asymptotic_quantile(alpha).unwrap();
        prop_assert!(q <= 0.0);
        prop_assert!(close(asymptotic_cdf(q).unwrap(), alpha, 1e-12));
    }

    #[test]
    fn detector_invariant_under_affine_maps(
        xs in prop::collection::vec(-1.0..1.0f64, 60..240),
        jump in 0.0..4.0f64,
        a in prop::sample::select(vec![0.25, 0.5, 2.0, 3.0, 10.0]),
        b in -20.0..20.0f64,
    ) {
        let n = xs.len();
        let base: Vec<f64> = xs.iter().enumerate()
            .map(|(i, x)| x + if i >= n / 2 { jump } else { 0.0 })
            .collect();
        let s = Series::new(base).unwrap();
        let t = s.map(|x| a * x + b).unwrap();
        let config = DetectorConfig::default();

        let (lo, ao) = (locate(&s, &config), locate(&t, &config));
        prop_assert_eq!(lo.is_ok(), ao.is_ok());
        let (Ok(lo), Ok(ao)) = (lo, ao) else { return Ok(()) };
        prop_assert!(close(ao.sigma_sq_hat, a * a * lo.sigma_sq_hat, 1e-8));
        prop_assert_eq!(&lo.indicators, &ao.indicators);
        prop_assert_eq!(lo.eta_hat, ao.eta_hat);
        prop_assert_eq!(lo.tau_hat, ao.tau_hat);

        let t0 = compute_test_statistic(&s, lo.sigma_sq_hat.sqrt()).unwrap();
        let t1 = compute_test_statistic(&t, ao.sigma_sq_hat.sqrt()).unwrap();
        prop_assert!(close(t0, t1, 1e-8));
    }

    #[test]
    fn step2_trace_matches_direct_sums(xs in values(2..150), mu1 in -5.0..5.0f64, d in 0.0..10.0f64, rho in 0.05..0.95f64) {
        let s = Series::new(xs.clone()).unwrap();
        let (tau, trace) = step2(&s, mu1, d, rho).unwrap();
        prop_assert_eq!(trace.len(), xs.len() - 1);
        let mut acc = 0.0;
        for (j, value) in trace.iter().enumerate() {
            acc += xs[j] - mu1 - rho * d;
            prop_assert!(close(*value, acc, 1e-9));
        }
        let min = trace.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(trace[tau - 2], min);
        prop_assert!(trace[..tau - 2].iter().all(|v| *v > min));
    }

    #[test]
    fn noise_free_step_is_located_exactly(
        k in 2usize..6,
        pre_blocks in 5usize..20,
        offset in 0usize..6,
        post_blocks in 3usize..15,
        h in 0.5..5.0f64,
        level in -10.0..10.0f64,
        post in prop::collection::vec(1.0..1.5f64, 1..7),
    ) {
        let tau = k * pre_blocks + offset % k;
        let n = tau + k * post_blocks;
        let xs: Vec<f64> = (1..=n)
            .map(|t| if t < tau { level } else { level + h * post[(t - tau) % post.len()] })
            .collect();
        let s = Series::new(xs).unwrap();
        let config = DetectorConfig {
            k: Some(k),
            variance_source: VarianceSource::Known { sigma_inf_sq: (1e-3 * h).powi(2) },
            ..DetectorConfig::default()
        };
        let out = locate(&s, &config).unwrap();
        prop_assert_eq!(out.tau_hat, tau);
    }

    #[test]
    fn eta_objective_dual_forms_agree(indicators in prop::collection::vec(any::<bool>(), 2..80)) {
        let m = indicators.len();
        let squared: Vec<usize> = (1..m)
            .map(|t| {
                (1..=m)
                    .map(|j| {
                        let diff = indicators[j - 1] as i64 - (j > t) as i64;
                        (diff * diff) as usize
                    })
                    .sum()
            })
            .collect();
        let counted: Vec<usize> = (1..m)
            .map(|t| {
                indicators[..t].iter().filter(|&&b| b).count()
                    + indicators[t..].iter().filter(|&&b| !b).count()
            })
            .collect();
        prop_assert_eq!(&squared, &counted);
        prop_assert_eq!(eta_objective(&indicators), counted);
    }

    #[test]
    fn lrv_is_nonnegative(xs in values(8..300), k in 1usize..8, j in 1usize..5) {
        prop_assume!(xs.len() / k >= j);
        let est = estimate_lrv(&Series::new(xs).unwrap(), k, j).unwrap();
        prop_assert!(est.sigma_sq >= 0.0);
        prop_assert!(est.ell_hat >= k);
    }

    #[test]
    fn baselines_invariant_under_affine_maps(
        wiggle in prop::collection::vec(-0.3..0.3f64, 7..13),
        n in 40usize..160,
        h in 1.0..5.0f64,
        a in prop::sample::select(vec![0.5, 2.0, 7.0]),
        b in -30.0..30.0f64,
    ) {
        let s = Series::new(noisy_step(n, n / 2, h, &wiggle)).unwrap();
        let t = s.map(|x| a * x + b).unwrap();
        prop_assert_eq!(locate_cusum(&s).unwrap(), locate_cusum(&t).unwrap());
        prop_assert_eq!(locate_amoc(&s).unwrap(), locate_amoc(&t).unwrap());
        let p = Sbs1Params::marginal();
        prop_assert_eq!(locate_sbs1(&s, &p).unwrap(), locate_sbs1(&t, &p).unwrap());
    }

    #[test]
    fn cusum_baseline_and_statistic_share_the_scan(xs in values(2..200)) {
        let s = Series::new(xs.clone()).unwrap();
        let (j, min) = centered_cusum_min(&xs);
        prop_assert_eq!(locate_cusum(&s).unwrap(), j + 1);
        let t = compute_test_statistic(&s, 1.0).unwrap();
        prop_assert!(close(t * (xs.len() as f64).sqrt(), min, 1e-9));
    }

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), theta in prop::sample::select(vec![-0.3, 0.0, 0.2, 0.4])) {
        let noise = NoiseSpec::new(theta, 0.5);
        prop_assert_eq!(gen_noise(&noise, 64, seed).unwrap(), gen_noise(&noise, 64, seed).unwrap());
        let signal = SignalSpec::from_ratios(64, 1.0, (0.4, 0.6, 0.8)).unwrap();
        prop_assert_eq!(
            make_dataset(&noise, &signal, seed).unwrap(),
            make_dataset(&noise, &signal, seed).unwrap()
        );
    }

    #[test]
    fn signal_regimes_are_ordered(n in 20usize..5000, s in 0.0..3.0f64) {
        let spec = SignalSpec::from_ratios(n, s, (0.4, 0.6, 0.8)).unwrap();
        prop_assert!(1 < spec.tau && spec.tau < spec.tau1 && spec.tau1 < spec.tau2 && spec.tau2 < n);
        let mu = gen_signal(&spec).unwrap();
        prop_assert_eq!(mu.len(), n);
        prop_assert!(mu[..spec.tau - 1].iter().all(|&v| v == spec.mu1));
        prop_assert!(mu[spec.tau - 1..].iter().all(|&v| v >= spec.mu1 - 1e-12 || s == 0.0));
    }
}

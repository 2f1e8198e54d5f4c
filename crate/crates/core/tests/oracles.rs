// SPDX-License-Identifier: MIT OR Apache-2.0

//! Worked examples checked against brute-force oracles written here,
//! independently of the library code paths.

use irregcp::baselines::{binary_segmentation, locate_sbs1, Sbs1Params};
use irregcp::detect::{eta_objective, fit_step};
use irregcp::nulldist::{asymptotic_quantile, finite_sample_quantile};
use irregcp::numeric::normal_quantile;
use irregcp::{
    block_means, compute_d_star, compute_test_statistic, estimate_lrv, locate_amoc, locate_cusum,
    select_l_hat, sliding_block_means, Series,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn series(xs: &[f64]) -> Series {
    Series::new(xs.to_vec()).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || a == b
}

// --- oracles -------------------------------------------------------------

/// erf by its Maclaurin series (accurate for |x| < 3).
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        term *= -x * x / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

fn oracle_normal_quantile(p: f64) -> f64 {
    let cdf = |x: f64| 0.5 * (1.0 + erf_series(x / std::f64::consts::SQRT_2));
    let (mut lo, mut hi) = (-4.0, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_block_means(xs: &[f64], k: usize) -> Vec<f64> {
    let m = xs.len() / k;
    (0..m)
        .map(|j| {
            let mut s = 0.0;
            for x in &xs[j * k..(j + 1) * k] {
                s += x;
            }
            s / k as f64
        })
        .collect()
}

fn oracle_lrv(xs: &[f64], k: usize, ell: usize) -> (f64, f64) {
    let mu0 = xs[..ell].iter().sum::<f64>() / ell as f64;
    let mut ss = 0.0;
    for s in k..=ell {
        let r = xs[s - k..s].iter().sum::<f64>() / k as f64;
        ss += (r - mu0).powi(2);
    }
    (k as f64 / (ell - k + 1) as f64 * ss, mu0)
}

// --- series and blocking -------------------------------------------------

#[test]
fn block_means_with_dropped_tail() {
    let xs = [1.0, 3.0, 2.0, 4.0, 0.0, 2.0, 9.0];
    let oracle = oracle_block_means(&xs, 2);
    assert_eq!(oracle, vec![2.0, 3.0, 1.0]);
    let got = block_means(&series(&xs), 2).unwrap();
    for (g, o) in got.iter().zip(&oracle) {
        assert!(rel_close(*g, *o, 1e-12));
    }
}

#[test]
fn overlapping_window_means() {
    let xs = [1.0, 3.0, 2.0, 4.0, 0.0, 2.0];
    let oracle: Vec<f64> = (2..=6)
        .map(|s| xs[s - 2..s].iter().sum::<f64>() / 2.0)
        .collect();
    assert_eq!(oracle, vec![2.0, 2.5, 3.0, 2.0, 1.0]);
    let got = sliding_block_means(&series(&xs), 2, 2, 6).unwrap();
    for (g, o) in got.iter().zip(&oracle) {
        assert!(rel_close(*g, *o, 1e-12));
    }
}

#[test]
fn normal_quantile_against_bisection() {
    // frozen from the erf-series bisection oracle
    let cases = [
        (0.975, 1.959_963_984_540_054),
        (1.0 - 1.0 / 24.0, 1.731_664_396_122_245),
    ];
    for (p, frozen) in cases {
        let oracle = oracle_normal_quantile(p);
        assert!(
            (oracle - frozen).abs() < 1e-12,
            "oracle {oracle} vs frozen {frozen}"
        );
        let got = normal_quantile(p).unwrap();
        assert!(rel_close(got, frozen, 1e-12), "p = {p}: {got}");
    }
    assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
    assert!((normal_quantile(1.0 - 1.0 / 24.0).unwrap() - 1.731664).abs() < 1e-6);
}

// --- detector ------------------------------------------------------------

#[test]
fn statistic_by_direct_loop() {
    let xs = [-1.0, 1.0, -1.0, 1.0];
    let mean = xs.iter().sum::<f64>() / 4.0;
    let mut best = f64::INFINITY;
    for j in 1..=4 {
        let s: f64 = xs[..j].iter().map(|x| x - mean).sum();
        best = best.min(s / (4f64.sqrt() * 1.0));
    }
    assert_eq!(best, -0.5);
    assert!(rel_close(
        compute_test_statistic(&series(&xs), 1.0).unwrap(),
        best,
        1e-12
    ));
}

#[test]
fn l_hat_by_definition() {
    let r = [2.0, 3.0, 1.0, 2.0, 5.0];
    let j = 3;
    // exhaustive: the J-th smallest value is the smallest v with at least J entries <= v
    let third = r
        .iter()
        .copied()
        .filter(|&v| r.iter().filter(|&&w| w <= v).count() >= j)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(third, 2.0);
    let oracle = (1..=r.len()).filter(|&i| r[i - 1] <= third).max().unwrap();
    assert_eq!(oracle, 4);
    assert_eq!(select_l_hat(&r, j).unwrap(), oracle);
}

#[test]
fn lrv_by_direct_evaluation() {
    let xs = [1.0, 3.0, 2.0, 4.0, 0.0, 2.0];
    let (sigma_sq, mu0) = oracle_lrv(&xs, 2, 6);
    assert!((sigma_sq - 0.9).abs() < 1e-12);
    assert_eq!(mu0, 2.0);
    let est = estimate_lrv(&series(&xs), 2, 1).unwrap();
    assert_eq!((est.l_hat, est.ell_hat), (3, 6));
    assert!(rel_close(est.sigma_sq, sigma_sq, 1e-12));
    assert!(rel_close(est.mu0, mu0, 1e-12));
}

#[test]
fn lrv_of_white_noise_against_batch_means() {
    let n = 100_000;
    let mut rng = StdRng::seed_from_u64(2024);
    let xs: Vec<f64> = (0..n)
        .map(|_| rng.sample(rand_distr::StandardNormal))
        .collect();
    let k = 47; // ceil(100000^(1/3))
    let est = estimate_lrv(&series(&xs), k, 3).unwrap();
    let (oracle, _) = oracle_lrv(&xs, k, est.ell_hat);
    assert!(rel_close(est.sigma_sq, oracle, 1e-9));

    let bm = oracle_block_means(&xs, k);
    let mean = bm.iter().sum::<f64>() / bm.len() as f64;
    let batch =
        k as f64 * bm.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (bm.len() - 1) as f64;
    assert!((0.9..=1.1).contains(&batch), "batch-means oracle {batch}");
    assert!(
        (0.9..=1.1).contains(&est.sigma_sq),
        "estimate {}",
        est.sigma_sq
    );
    assert!((est.sigma_sq - batch).abs() < 0.1);
}

#[test]
fn eta_objective_by_exhaustive_scan() {
    let i = [false, false, true, false, true, true];
    let m = i.len();
    let scan: Vec<usize> = (1..m)
        .map(|t| {
            (1..=m)
                .filter(|&j| (i[j - 1] as usize) != (j > t) as usize)
                .count()
        })
        .collect();
    assert_eq!(scan, vec![2, 1, 2, 1, 2]);
    assert_eq!(eta_objective(&i), scan);
    assert_eq!(fit_step(&i).unwrap(), 2);
}

#[test]
fn d_star_linear_ramp() {
    let (n, tau, k, c) = (60usize, 21usize, 4usize, 0.25);
    let eta = tau / k;
    let mu: Vec<f64> = (1..=n)
        .map(|j| {
            if j < tau {
                0.0
            } else {
                (j - tau + 1) as f64 * c
            }
        })
        .collect();
    let brute = (k * (eta + 1) + 1..=n - k + 1)
        .map(|i| (i..i + k).map(|j| mu[j - 1] - mu[0]).sum::<f64>() / k as f64)
        .fold(f64::INFINITY, f64::min);
    let earliest = k * (eta + 1) + 1;
    let closed = c * ((earliest - tau + 1) as f64 + (k - 1) as f64 / 2.0);
    assert_eq!(closed, 1.625);
    assert!((brute - closed).abs() < 1e-12);
    assert!(rel_close(
        compute_d_star(&mu, k, eta).unwrap(),
        closed,
        1e-12
    ));
}

// --- baselines -----------------------------------------------------------

#[test]
fn cusum_alternating_by_scan() {
    for len in [4usize, 5, 6, 9] {
        let xs: Vec<f64> = (0..len)
            .map(|i| if i % 2 == 0 { -1.0 } else { 1.0 })
            .collect();
        let mean = xs.iter().sum::<f64>() / len as f64;
        let mut best = (0, f64::INFINITY);
        for j in 2..=len + 1 {
            let s: f64 = xs[..j - 1].iter().map(|x| x - mean).sum();
            if s < best.1 - 1e-12 {
                best = (j, s);
            }
        }
        assert_eq!(best.0, 2);
        assert_eq!(locate_cusum(&series(&xs)).unwrap(), best.0, "len = {len}");
    }
}

#[test]
fn amoc_by_full_scan() {
    let xs = [0.0, 0.0, 1.0, 3.0, 3.0, 3.0];
    let n = xs.len();
    let mut best = (0, -1.0);
    for c in 1..n {
        let left = xs[..c].iter().sum::<f64>() / c as f64;
        let right = xs[c..].iter().sum::<f64>() / (n - c) as f64;
        let stat = ((c * (n - c)) as f64 / n as f64).sqrt() * (left - right).abs();
        if stat > best.1 + 1e-12 {
            best = (c, stat);
        }
    }
    assert_eq!(best.0, 3);
    assert_eq!(locate_amoc(&series(&xs)).unwrap(), best.0 + 1);
}

#[test]
fn sbs1_two_steps_reports_the_earliest() {
    let mut rng = StdRng::seed_from_u64(17);
    let xs: Vec<f64> = (1..=90)
        .map(|t| {
            let mu = if t <= 30 {
                0.0
            } else if t <= 60 {
                5.0
            } else {
                12.0
            };
            mu + 0.1 * rng.sample::<f64, _>(rand_distr::StandardNormal)
        })
        .collect();
    let sigma = irregcp::baselines::marginal_scale(&xs);
    let zeta = 1.3 * sigma * (2.0 * 90f64.ln()).sqrt();
    let splits = binary_segmentation(&xs, zeta);
    assert!(splits.contains(&30) && splits.contains(&60), "{splits:?}");
    assert_eq!(
        locate_sbs1(&series(&xs), &Sbs1Params::marginal()).unwrap(),
        Some(31)
    );
    assert_eq!(
        locate_sbs1(&series(&xs), &Sbs1Params::long_run()).unwrap(),
        Some(31)
    );
}

// --- null distribution ---------------------------------------------------

/// Sequential Box-Muller simulation of the discretized bridge minimum with
/// a different generator.
fn oracle_bridge_quantile(n: usize, alpha: f64, reps: usize, seed: u64) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut walk = vec![0.0; n];
    let mut minima = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut s = 0.0;
        let mut i = 0;
        while i < n {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            for z in [
                r * (std::f64::consts::TAU * u2).cos(),
                r * (std::f64::consts::TAU * u2).sin(),
            ] {
                if i < n {
                    s += z;
                    walk[i] = s;
                    i += 1;
                }
            }
        }
        let total = walk[n - 1];
        let min = (0..n)
            .map(|j| walk[j] - (j + 1) as f64 / n as f64 * total)
            .fold(f64::INFINITY, f64::min);
        minima.push(min / (n as f64).sqrt());
    }
    minima.sort_by(f64::total_cmp);
    minima[(alpha * reps as f64).ceil() as usize - 1]
}

#[test]
fn finite_sample_quantile_matches_resimulation_and_limit() {
    let (n, alpha, reps) = (2000, 0.05, 100_000);
    let got = finite_sample_quantile(n, alpha, reps, 1).unwrap();
    let oracle = oracle_bridge_quantile(n, alpha, reps, 99);
    let limit = asymptotic_quantile(alpha).unwrap();
    assert!(
        (got - oracle).abs() < 0.02,
        "impl {got} vs re-simulation {oracle}"
    );
    assert!((got - limit).abs() < 0.02, "impl {got} vs limit {limit}");
    assert!((oracle - limit).abs() < 0.02);
}

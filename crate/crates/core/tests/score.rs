use proptest::prelude::*;
use scorelabel_core::integrate::{self, ode_drift, IntegrationConfig};
use scorelabel_core::score::{estimate_score, log_weights};
use scorelabel_core::{rng, BatchSampler, Matrix, Schedule};

/// Score of `N(0, (alpha^2 + beta^2) I)`, the exact marginal for standard-normal data.
fn gaussian_score(z: &[f64], t: f64) -> Vec<f64> {
    let var = (1.0 - t) * (1.0 - t) + t;
    z.iter().map(|v| -v / var).collect()
}

/// sqrt(sum |S - S*|^2 / sum |S*|^2) over query points.
fn relative_l2(data: &Matrix, queries: &Matrix, t: f64) -> f64 {
    let s = Schedule::default();
    let (mut num, mut den) = (0.0, 0.0);
    for z in queries.iter_rows() {
        let got = estimate_score(&s, z, t, data).score;
        let want = gaussian_score(z, t);
        num += got.iter().zip(&want).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        den += want.iter().map(|b| b * b).sum::<f64>();
    }
    (num / den).sqrt()
}

#[test]
fn full_batch_converges_to_gaussian_score() {
    let queries = rng::standard_normal_matrix(100, 2, 7);
    let small = relative_l2(&rng::standard_normal_matrix(5000, 2, 1), &queries, 0.5);
    let large = relative_l2(&rng::standard_normal_matrix(50_000, 2, 2), &queries, 0.5);
    assert!(small < 0.05, "J = 5000: {small}");
    assert!(large < 0.02, "J = 50000: {large}");
}

/// Direct evaluation of the weights without the log-sum-exp shift.
fn naive_weights(z: &[f64], t: f64, data: &Matrix) -> Vec<f64> {
    let (a, b2) = (1.0 - t, t);
    let raw: Vec<f64> = data
        .iter_rows()
        .map(|x| {
            let d2: f64 = z.iter().zip(x).map(|(zi, xi)| (zi - a * xi).powi(2)).sum();
            (-d2 / (2.0 * b2)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

#[test]
fn log_space_weights_match_naive_where_safe() {
    let data = rng::standard_normal_matrix(200, 3, 4);
    let queries = rng::standard_normal_matrix(20, 3, 5);
    for t in [0.3, 0.6, 0.95] {
        for z in queries.iter_rows() {
            let lw = log_weights(&Schedule::default(), z, t, &data);
            for (l, n) in lw.iter().zip(naive_weights(z, t, &data)) {
                assert!((l.exp() - n).abs() <= 1e-10 * n.max(1e-300) + 1e-300, "t={t}");
            }
        }
    }
}

#[test]
fn far_query_stays_finite() {
    let data = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let e = estimate_score(&Schedule::default(), &[1e4], 1e-3, &data);
    assert!(e.score[0].is_finite());
    assert_eq!(e.posterior_mean, vec![1.0]);
}

#[test]
fn ensemble_step_matches_pointwise_drift() {
    // one Euler step through the ensemble kernel against the reference drift
    let data = rng::standard_normal_matrix(300, 3, 11);
    let inputs = rng::standard_normal_matrix(40, 3, 12);
    let s = Schedule::default();
    let cfg = IntegrationConfig::new(1, s);
    let mut sampler = BatchSampler::new(&data, 300, 0).unwrap();
    let out = integrate::solve_ode(&inputs, &cfg, &mut sampler).unwrap();
    let grid = cfg.time_grid();
    let dt = grid[1] - grid[0];
    for (z, got) in inputs.iter_rows().zip(out.states.iter_rows()) {
        let drift = ode_drift(&s, z, grid[0], &data);
        for ((zi, di), g) in z.iter().zip(&drift).zip(got) {
            let want = zi + dt * di;
            assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0), "{g} vs {want}");
        }
    }
}

#[test]
fn sampler_is_uniform_without_replacement() {
    let (j, n, batches) = (100_000usize, 5000usize, 10_000usize);
    let data = Matrix::zeros(j, 1);
    let mut sampler = BatchSampler::new(&data, n, 3).unwrap();
    let mut counts = vec![0u32; j];
    let mut seen = vec![u32::MAX; j];
    for b in 0..batches as u32 {
        for i in sampler.next_indices() {
            assert_ne!(seen[i], b, "row {i} repeated within batch {b}");
            seen[i] = b;
            counts[i] += 1;
        }
    }
    let p = n as f64 / j as f64;
    let mean = batches as f64 * p;
    let var = batches as f64 * p * (1.0 - p);
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - mean).powi(2) / var).sum();
    let df = j as f64;
    assert!((chi2 - df).abs() < 4.0 * (2.0 * df).sqrt(), "chi-square {chi2}");
    let worst = counts.iter().map(|&c| (c as f64 - mean).abs()).fold(0.0, f64::max);
    assert!(worst < 6.0 * var.sqrt(), "worst deviation {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weights_normalize(seed in 0u64..10_000, n in 1usize..64, d in 1usize..5, t in 0.0f64..1.0, scale in 0.1f64..50.0) {
        let data = rng::standard_normal_matrix(n, d, seed);
        let z: Vec<f64> = rng::standard_normal_matrix(1, d, seed + 1).into_vec().into_iter().map(|v| v * scale).collect();
        let lw = log_weights(&Schedule::default(), &z, t, &data);
        let total: f64 = lw.iter().map(|l| l.exp()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(lw.iter().all(|l| *l <= 0.0));
    }

    #[test]
    fn score_is_translation_equivariant(seed in 0u64..10_000, t in 0.05f64..0.95, shift in -5.0f64..5.0) {
        let s = Schedule::default();
        let data = rng::standard_normal_matrix(30, 2, seed);
        let z = [0.3, -0.7];
        let base = estimate_score(&s, &z, t, &data);
        let mut moved = data.clone();
        moved.as_mut_slice().iter_mut().for_each(|v| *v += shift);
        let a = s.alpha(t);
        let z2 = [z[0] + a * shift, z[1] + a * shift];
        let other = estimate_score(&s, &z2, t, &moved);
        for (x, y) in base.score.iter().zip(&other.score) {
            prop_assert!((x - y).abs() < 1e-8 * x.abs().max(1.0));
        }
    }

    #[test]
    fn score_is_posterior_mean_identity(seed in 0u64..10_000, t in 0.01f64..0.99) {
        let s = Schedule::default();
        let data = rng::standard_normal_matrix(25, 3, seed);
        let z = [1.0, 0.0, -2.0];
        let e = estimate_score(&s, &z, t, &data);
        let lw = log_weights(&s, &z, t, &data);
        for k in 0..3 {
            let m: f64 = lw.iter().zip(data.iter_rows()).map(|(l, x)| l.exp() * x[k]).sum();
            let want = (s.alpha(t) * m - z[k]) / s.beta_sq(t);
            prop_assert!((e.score[k] - want).abs() < 1e-9 * want.abs().max(1.0));
        }
    }
}


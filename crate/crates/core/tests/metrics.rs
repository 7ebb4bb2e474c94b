use scorelabel_core::data::{generate_toy, ToyDataset};
use scorelabel_core::metrics::{compare, marginal_hist, uniform_edges};
use scorelabel_core::{rng, Matrix};

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

#[test]
fn normal_histogram_matches_bin_averaged_density() {
    let s = rng::standard_normal_matrix(200_000, 1, 3);
    let edges = uniform_edges(-4.0, 4.0, 50);
    let h = marginal_hist(&s, 0, &edges).unwrap();
    // the bin straddling zero
    let b = 25;
    let (lo, hi) = (edges[b], edges[b + 1]);
    let want = (normal_cdf(hi) - normal_cdf(lo)) / (hi - lo);
    assert!((want - 0.3989).abs() < 0.002);
    assert!((h.density[b] - want).abs() < 0.02 * want, "{} vs {want}", h.density[b]);
}

#[test]
fn shifted_normal_kl_near_analytic() {
    // KL(N(0,1) || N(0.5,1)) = 0.125
    let truth = rng::standard_normal_matrix(100_000, 1, 1);
    let mut cand = rng::standard_normal_matrix(100_000, 1, 2);
    cand.as_mut_slice().iter_mut().for_each(|v| *v += 0.5);
    let r = compare(&truth, &cand, 50, 0.5).unwrap();
    assert!((r.dims[0].kl_fwd - 0.125).abs() < 0.01, "{}", r.dims[0].kl_fwd);
    assert!(r.dims[0].kl_rev > 0.1);
    assert!(r.dims[0].cand_hist.clipped > 0);
}

#[test]
fn same_distribution_noise_floor() {
    let a = generate_toy(ToyDataset::EightGaussians, 10_000, 1).unwrap();
    let b = generate_toy(ToyDataset::EightGaussians, 10_000, 2).unwrap();
    let r = compare(a.values(), b.values(), 50, 0.5).unwrap();
    for d in &r.dims {
        assert!(d.kl_fwd < 0.02, "dim {}: {}", d.dim, d.kl_fwd);
    }
}

#[test]
fn uniform_density_is_flat() {
    let mut r = rng::stream(4);
    let values: Vec<f64> = (0..100_000).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
    let m = Matrix::from_vec(100_000, 1, values).unwrap();
    let h = marginal_hist(&m, 0, &uniform_edges(0.0, 1.0, 10)).unwrap();
    for d in &h.density {
        assert!((d - 1.0).abs() < 0.05, "{d}");
    }
    assert_eq!(h.clipped, 0);
}

#[test]
fn kl_is_nonnegative_and_zero_on_self() {
    for seed in 0..20 {
        let a = rng::standard_normal_matrix(500, 2, seed);
        let b = rng::standard_normal_matrix(50, 2, seed + 100);
        let r = compare(&a, &b, 20, 0.5).unwrap();
        assert!(r.dims.iter().all(|d| d.kl_fwd >= 0.0 && d.kl_rev >= 0.0));
        let same = compare(&a, &a, 20, 0.5).unwrap();
        assert!(same.dims.iter().all(|d| d.kl_fwd == 0.0));
    }
}

use scorelabel_core::data::column_stats;
use scorelabel_core::integrate::{self, IntegrationConfig, Mode};
use scorelabel_core::{rng, BatchSampler, Matrix, Schedule};

#[test]
fn forward_perturbation_has_stated_moments() {
    let s = Schedule::default();
    let x0 = [2.0, -1.0];
    let n = 200_000;
    for t in [0.2, 0.7] {
        let noise = rng::standard_normal_matrix(n, 2, 5);
        let mut out = [0.0; 2];
        let mut samples = Vec::with_capacity(n);
        for e in noise.iter_rows() {
            s.perturb(&x0, t, e, &mut out);
            samples.push(out[0]);
        }
        let (mean, std) = column_stats(&samples);
        let se = s.beta(t) / (n as f64).sqrt();
        assert!((mean - (1.0 - t) * 2.0).abs() < 5.0 * se, "t={t} mean {mean}");
        assert!((std - t.sqrt()).abs() < 0.01, "t={t} std {std}");
    }
}

fn ensemble_moments(mode: Mode, j: usize, m: usize, steps: usize) -> (f64, f64) {
    let data = rng::standard_normal_matrix(j, 1, 1);
    let inputs = rng::standard_normal_matrix(m, 1, 2);
    let cfg = IntegrationConfig::new(steps, Schedule::default()).with_mode(mode);
    let mut sampler = BatchSampler::new(&data, j.min(5000), 3).unwrap();
    let out = integrate::solve(&inputs, &cfg, &mut sampler, 4).unwrap();
    column_stats(out.states.as_slice())
}

#[test]
fn standard_normal_target_is_preserved() {
    let (mean, std) = ensemble_moments(Mode::Ode, 5000, 2000, 200);
    assert!(mean.abs() < 0.08, "mean {mean}");
    assert!((std - 1.0).abs() < 0.08, "std {std}");
}

#[test]
fn ode_and_sde_share_marginals() {
    let ode = ensemble_moments(Mode::Ode, 4000, 2000, 200);
    let sde = ensemble_moments(Mode::Sde, 4000, 2000, 200);
    assert!((ode.0 - sde.0).abs() < 0.1, "{ode:?} {sde:?}");
    assert!((ode.1 - sde.1).abs() < 0.1, "{ode:?} {sde:?}");
}

#[test]
fn sde_paths_are_rougher() {
    let data = Matrix::from_vec(400, 1, (0..400).map(|i| if i % 2 == 0 { -2.0 } else { 2.0 }).collect()).unwrap();
    let inputs = rng::standard_normal_matrix(16, 1, 9);
    let tv = |mode| {
        let cfg = IntegrationConfig::new(200, Schedule::default()).with_mode(mode).recording(true);
        let mut sampler = BatchSampler::new(&data, 400, 0).unwrap();
        let sol = integrate::solve(&inputs, &cfg, &mut sampler, 5).unwrap();
        let trajs = sol.trajectories.unwrap();
        trajs.iter().map(|t| t.total_variation()).sum::<f64>() / trajs.len() as f64
    };
    assert!(tv(Mode::Sde) > tv(Mode::Ode));
}

#[test]
fn results_do_not_depend_on_ensemble_size() {
    // trajectories are independent given the shared batches
    let data = rng::standard_normal_matrix(500, 2, 1);
    let inputs = rng::standard_normal_matrix(100, 2, 2);
    let cfg = IntegrationConfig::new(30, Schedule::default());
    let full = {
        let mut sampler = BatchSampler::new(&data, 500, 0).unwrap();
        integrate::solve_ode(&inputs, &cfg, &mut sampler).unwrap().states
    };
    let head = inputs.select_rows(&(0..7).collect::<Vec<_>>());
    let mut sampler = BatchSampler::new(&data, 500, 0).unwrap();
    let part = integrate::solve_ode(&head, &cfg, &mut sampler).unwrap().states;
    for i in 0..7 {
        assert_eq!(part.row(i), full.row(i));
    }
}

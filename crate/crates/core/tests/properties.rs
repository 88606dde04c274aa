use bdpd::asymptotics::sandwich;
use bdpd::divergence::{moment_residual, population_divergence, sample_objective, GSpec};
use bdpd::optimize::{
    local_minimize, log_grid, mle, multistart_global, LambdaGrid, SampleObjective, StartBox, StartSpec, Tolerances,
};
use bdpd::simulate::{run_study, Contaminant, ContaminationSpec, SimConfig};
use bdpd::{BridgeConfig, Family, Theta};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

fn exp_sample(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Exp::new(1.0).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn normal_sample(seed: u64, n: usize, mu: f64, sd: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mu, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

fn grid_argmin(family: &Family, data: &[f64], cfg: &BridgeConfig, grid: &[f64]) -> usize {
    let vals: Vec<f64> = grid
        .iter()
        .map(|&s| sample_objective(family, &Theta::scalar(s), data, cfg).unwrap())
        .collect();
    vals.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap()
}

fn scale_grid() -> Vec<f64> {
    log_grid(0.2, 5.0, 400)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn endpoints_are_limits_of_the_bridge(seed in any::<u64>(), n in 10usize..80, alpha in 0.1f64..1.0) {
        let fam = Family::ExponentialScale;
        let data = exp_sample(seed, n);
        let grid = scale_grid();
        let at = |l: f64| grid_argmin(&fam, &data, &BridgeConfig::new(alpha, l).unwrap(), &grid);
        prop_assert!(at(1.0 - 1e-6).abs_diff(at(1.0)) <= 1);
        prop_assert!(at(1e-6).abs_diff(at(0.0)) <= 1);
    }

    #[test]
    fn small_alpha_tracks_the_mle(seed in any::<u64>(), n in 10usize..80, lambda in 0.0f64..=1.0) {
        let fam = Family::ExponentialScale;
        let data = exp_sample(seed, n);
        let grid = scale_grid();
        let near = grid_argmin(&fam, &data, &BridgeConfig::new(1e-4, lambda).unwrap(), &grid);
        let ml = grid_argmin(&fam, &data, &BridgeConfig::new(0.0, lambda).unwrap(), &grid);
        prop_assert!(near.abs_diff(ml) <= 1, "{near} vs {ml}");
    }

    #[test]
    fn endpoint_argmins_scale_with_the_data(seed in any::<u64>(), n in 10usize..60, alpha in 0.1f64..1.0, c in 0.2f64..5.0) {
        let fam = Family::ExponentialScale;
        let data = exp_sample(seed, n);
        let scaled: Vec<f64> = data.iter().map(|x| c * x).collect();
        let grid = log_grid(0.05, 20.0, 2000);
        let step = (20.0f64 / 0.05).ln() / 1999.0;
        for lambda in [0.0, 1.0] {
            let cfg = BridgeConfig::new(alpha, lambda).unwrap();
            let a = grid[grid_argmin(&fam, &data, &cfg, &grid)];
            let b = grid[grid_argmin(&fam, &scaled, &cfg, &grid)];
            prop_assert!(((b / (c * a)).ln()).abs() <= 2.0 * step, "lambda {lambda}: {a} {b}");
        }
    }

    #[test]
    fn divergence_is_nonnegative(s1 in 0.2f64..5.0, s2 in 0.2f64..5.0, alpha in 0.05f64..1.0, lambda in 0.0f64..=1.0) {
        let fam = Family::ExponentialScale;
        let g = GSpec::single(fam, Theta::scalar(s1));
        let d = population_divergence(&g, &fam, &Theta::scalar(s2), &BridgeConfig::new(alpha, lambda).unwrap()).unwrap();
        prop_assert!(d >= -1e-10, "{d}");
    }

    #[test]
    fn fitted_roots_solve_the_moment_equation(seed in any::<u64>(), n in 20usize..80, alpha in 0.1f64..1.0, lambda in 0.0f64..=1.0) {
        let fam = Family::NormalLocationScale;
        let data = normal_sample(seed, n, 0.0, 1.0);
        let cfg = BridgeConfig::new(alpha, lambda).unwrap();
        let obj = SampleObjective::new(fam, &data, cfg).unwrap();
        let fit = local_minimize(&obj, &mle(&fam, &data).unwrap(), &Tolerances::default()).unwrap();
        if fit.converged {
            let r = moment_residual(&fam, &fit.theta_hat, &data, &cfg).unwrap();
            prop_assert!(r.norm() <= 1e-7, "{r}");
            let v = sandwich(&fam, &fit.theta_hat, &data, &cfg).unwrap();
            let k = &v.k;
            prop_assert!((k - k.transpose()).norm() <= 1e-12 * k.norm().max(1.0));
            prop_assert!(k.clone().symmetric_eigenvalues().min() >= -1e-10);
        }
    }
}

#[test]
fn lambda_one_multistart_is_reproducible() {
    let data = normal_sample(4, 40, 0.0, 1.0);
    let fam = Family::NormalLocationScale;
    let obj = SampleObjective::new(fam, &data, BridgeConfig::dpd(0.5).unwrap()).unwrap();
    let starts = StartSpec::standard(&fam, &data, 99);
    let a = multistart_global(&obj, &starts, &Tolerances::default()).unwrap();
    let b = multistart_global(&obj, &starts, &Tolerances::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimator_is_consistent() {
    let spec = ContaminationSpec {
        family: Family::ExponentialScale,
        theta: Theta::scalar(1.0),
        contaminant: Contaminant::PointMass { location: 6.0 },
        epsilon: 0.0,
    };
    let mut errors = Vec::new();
    for n in [100, 1000, 10000] {
        let mut cfg = SimConfig::new(spec.clone(), n, 40, 31);
        cfg.alpha_grid = vec![0.4];
        cfg.lambda_grid = LambdaGrid::uniform(2).unwrap();
        cfg.start_boxes = Some(vec![
            StartBox { count: 2, bounds: vec![(0.0, 0.1)] },
            StartBox { count: 4, bounds: vec![(0.1, 10.0)] },
        ]);
        let report = run_study(&cfg).unwrap();
        let est = &report.estimates[1];
        let mae = est.iter().flatten().map(|t| (t[0] - 1.0).abs()).sum::<f64>() / est.len() as f64;
        errors.push(mae);
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn mle_wins_under_contamination_at_the_mode() {
    // N(5, 1) majority with 20% of the mass in a narrow slab at its mode.
    let spec = ContaminationSpec {
        family: Family::NormalScale { mean: 5.0 },
        theta: Theta::scalar(1.0),
        contaminant: Contaminant::UniformSlab { lo: 5.0 - 1e-5, hi: 5.0 + 1e-5 },
        epsilon: 0.2,
    };
    let mut cfg = SimConfig::new(spec, 100, 60, 2024);
    cfg.alpha_grid = vec![0.0, 0.5, 1.0];
    cfg.lambda_grid = LambdaGrid::uniform(2).unwrap();
    let report = run_study(&cfg).unwrap();
    for &l in &report.lambdas {
        let base = report.cell(0.0, l).unwrap().scaled_mse[0];
        for a in [0.5, 1.0] {
            assert!(base < report.cell(a, l).unwrap().scaled_mse[0], "alpha {a} lambda {l}");
        }
    }
}

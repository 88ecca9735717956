use proptest::prelude::*;

use schelling_core::discrete_pde::DiscreteField;
use schelling_core::dynamics::{sample_initial, SchellingParams};
use schelling_core::hydro::{
    pair_continuum, pair_empirical, pair_field, run_convergence_experiment, validate_assumptions,
    ExperimentConfig, HydroError, InitialProfile, LimitSettings, NeighborhoodSpec, TestFunction,
};
use schelling_core::limit_pde::ContinuumField;
use schelling_core::rng::stream_rng;
use schelling_core::{Configuration, Neighborhood, TorusGeometry};

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        sizes: vec![16, 32],
        replicas: 4,
        times: vec![0.05, 0.1],
        c0_bound: 10.0,
        diameter_ratio_bound: 1.0,
        ..Default::default()
    }
}

#[test]
fn all_ones_pairs_to_the_grid_average() {
    let g = TorusGeometry::new(1, 10).unwrap();
    let c = Configuration::filled(g, true);
    let phi: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
    let avg = phi.iter().sum::<f64>() / 10.0;
    assert!((pair_empirical(&c, &phi).unwrap() - avg).abs() < 1e-12);
    let ones = TestFunction::One.sample(&g);
    let field = DiscreteField::constant(g, 0.3);
    assert!((pair_field(&field, &ones).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn continuum_pairing_checks_the_grid() {
    let v = ContinuumField::constant(1, 8, 0.25).unwrap();
    assert!(matches!(pair_continuum(&v, &[1.0; 4]), Err(HydroError::GridMismatch { .. })));
    assert_eq!(pair_continuum(&v, &[1.0; 8]).unwrap(), 0.25);
}

#[test]
fn reported_log_ratio() {
    let g = TorusGeometry::new(1, 128).unwrap();
    let nb = Neighborhood::from_offsets(1, vec![vec![-1], vec![1]]).unwrap();
    let r = validate_assumptions(&DiscreteField::constant(g, 0.5), &nb);
    assert_eq!(r.diameter, 2);
    assert!((r.diameter_ratio - 2.0 / 128f64.ln()).abs() < 1e-15);
}

#[test]
fn frozen_all_ones_has_zero_deviation() {
    let cfg = ExperimentConfig {
        params: SchellingParams::new(0.3, 0.0, 0.5).unwrap(),
        initial: InitialProfile::Constant { value: 1.0 },
        enforce_assumptions: false,
        ..small_config()
    };
    let report = run_convergence_experiment(&cfg).unwrap();
    assert!(!report.assumptions[0].range_ok);
    assert!(report.records.iter().all(|r| r.particle_vs_discrete == 0.0));
    // Enforced, the same run is refused and names the assumption.
    let err = run_convergence_experiment(&ExperimentConfig {
        enforce_assumptions: true,
        ..cfg
    })
    .unwrap_err();
    assert!(err.to_string().contains("[eps, 1-eps]"), "{err}");
}

#[test]
fn steep_or_wide_setups_are_rejected() {
    let steep = ExperimentConfig {
        initial: InitialProfile::Sine {
            mean: 0.5,
            amplitude: 0.45,
            frequency: 7,
        },
        ..small_config()
    };
    assert!(matches!(run_convergence_experiment(&steep), Err(HydroError::Assumption { .. })));
    let wide = ExperimentConfig {
        neighborhood: NeighborhoodSpec::Box {
            radius: 4,
            one_sided: false,
        },
        ..small_config()
    };
    assert!(matches!(run_convergence_experiment(&wide), Err(HydroError::Assumption { .. })));
}

#[test]
fn report_is_sorted_complete_and_reproducible() {
    let cfg = ExperimentConfig {
        limit: Some(LimitSettings { m: 64, steps: 100 }),
        ..small_config()
    };
    let a = run_convergence_experiment(&cfg).unwrap();
    let b = run_convergence_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), 2 * 4 * 2 * 3);
    assert_eq!(a.streams.len(), 8);
    assert!(a.records.iter().all(|r| {
        r.particle_vs_discrete >= 0.0
            && r.discrete_vs_limit.is_some_and(|d| (0.0..0.05).contains(&d))
            && r.particle_vs_limit.is_some_and(|d| d >= 0.0)
    }));
    let keys: Vec<(usize, usize, u64)> =
        a.records.iter().map(|r| (r.n, r.replica, r.time.to_bits())).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    let other_seed = run_convergence_experiment(&ExperimentConfig { seed: 99, ..cfg }).unwrap();
    assert_ne!(a.records, other_seed.records);
}

#[test]
fn growing_k_mode_runs() {
    let cfg = ExperimentConfig {
        neighborhood: NeighborhoodSpec::GrowingK { c: 0.5 },
        sizes: vec![32, 64],
        replicas: 2,
        times: vec![0.05],
        diameter_ratio_bound: 1.5,
        ..Default::default()
    };
    let report = run_convergence_experiment(&cfg).unwrap();
    assert!(report.assumptions.iter().all(|a| a.one_sided));
}

/// At time zero the replica average of `<pi, phi>` sits within a 4 sigma band of `<u0, phi>`.
#[test]
fn initial_pairing_matches_profile() {
    let g = TorusGeometry::new(1, 128).unwrap();
    let profile = InitialProfile::Sine {
        mean: 0.5,
        amplitude: 0.2,
        frequency: 1,
    };
    let u0 = profile.on_lattice(&g);
    let mut rng = stream_rng(9, 0);
    for f in [TestFunction::One, TestFunction::Cos, TestFunction::Sin] {
        let phi = f.sample(&g);
        let target = pair_field(&u0, &phi).unwrap();
        let variance: f64 = u0
            .values()
            .iter()
            .zip(&phi)
            .map(|(p, x)| p * (1.0 - p) * x * x)
            .sum::<f64>()
            / (g.site_count() as f64).powi(2);
        let replicas = 400;
        let mean = (0..replicas)
            .map(|_| pair_empirical(&sample_initial(&u0, &mut rng).unwrap(), &phi).unwrap())
            .sum::<f64>()
            / replicas as f64;
        let sigma = (variance / replicas as f64).sqrt();
        assert!((mean - target).abs() <= 4.0 * sigma, "{}: {mean} vs {target}", f.name());
    }
}

proptest! {
    #[test]
    fn pairing_is_linear_and_bounded(
        bits in proptest::collection::vec(any::<bool>(), 24),
        a in proptest::collection::vec(-3.0f64..3.0, 24),
        b in proptest::collection::vec(-3.0f64..3.0, 24),
        s in -2.0f64..2.0,
    ) {
        let g = TorusGeometry::new(1, 24).unwrap();
        let c = Configuration::from_bits(g, bits).unwrap();
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let lhs = pair_empirical(&c, &combo).unwrap();
        let rhs = pair_empirical(&c, &a).unwrap() + s * pair_empirical(&c, &b).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
        let sup = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(pair_empirical(&c, &a).unwrap().abs() <= sup + 1e-15);
    }
}

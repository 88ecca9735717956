use proptest::prelude::*;

use schelling_core::discrete_pde::{
    comparison_check, gradient_profile, DiscreteField, DiscretePde, IntegratorConfig, Scheme,
    StepSize,
};
use schelling_core::dynamics::SchellingParams;
use schelling_core::{NeighborTable, Neighborhood, ReactionSpec, TorusGeometry};

fn ring(n: usize) -> NeighborTable {
    let g = TorusGeometry::new(1, n).unwrap();
    let nb = Neighborhood::from_offsets(1, vec![vec![-1], vec![1]]).unwrap();
    NeighborTable::new(&g, &nb).unwrap()
}

fn sine(g: &TorusGeometry, mean: f64, amp: f64) -> DiscreteField {
    DiscreteField::from_fn(*g, |x| mean + amp * (2.0 * std::f64::consts::PI * x[0]).sin())
}

/// Classical RK4 on `u' = beta (1 - 2u) + g_K(u)` with a tiny step.
fn scalar_reference(spec: &ReactionSpec, beta: f64, u0: f64, t: f64) -> f64 {
    let f = |u: f64| beta * (1.0 - 2.0 * u) + spec.g(u);
    let steps = 100_000;
    let h = t / steps as f64;
    let mut u = u0;
    for _ in 0..steps {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    u
}

#[test]
fn constant_data_follow_the_scalar_ode() {
    let g = TorusGeometry::new(2, 6).unwrap();
    let nb = Neighborhood::build_box(&g, 1, false).unwrap();
    let table = NeighborTable::new(&g, &nb).unwrap();
    for &(t, beta, p) in &[(0.3, 0.2, 0.1), (0.45, 1.0, 0.8), (0.7, 0.05, 0.35)] {
        let spec = ReactionSpec::finite(t, 8).unwrap();
        let params = SchellingParams::new(t, beta, 0.5).unwrap();
        let pde = DiscretePde::new(params, &table, spec).unwrap();
        let traj = pde
            .integrate(
                &DiscreteField::constant(g, p),
                &IntegratorConfig {
                    scheme: Scheme::ExplicitRk4,
                    dt: StepSize::Fixed(1e-3),
                    obs_times: vec![1.0],
                },
            )
            .unwrap();
        let expected = scalar_reference(&spec, beta, p, 1.0);
        for &v in traj[1].1.values() {
            assert!((v - expected).abs() < 1e-8, "{v} vs {expected}");
        }
    }
}

#[test]
fn schemes_agree_on_a_smooth_problem() {
    let table = ring(32);
    let g = *table.geometry();
    let spec = ReactionSpec::finite(0.3, 2).unwrap();
    let params = SchellingParams::new(0.3, 0.2, 0.5).unwrap();
    let pde = DiscretePde::new(params, &table, spec).unwrap();
    let u0 = sine(&g, 0.5, 0.2);
    let run = |scheme, dt| {
        pde.integrate(
            &u0,
            &IntegratorConfig {
                scheme,
                dt,
                obs_times: vec![0.2],
            },
        )
        .unwrap()
        .pop()
        .unwrap()
        .1
    };
    let rk = run(Scheme::ExplicitRk4, StepSize::Auto);
    let imex = run(Scheme::ExponentialImex, StepSize::Fixed(2e-7));
    let gap = rk.sup_distance(&imex);
    assert!(gap < 1e-6, "gap {gap}");
    // The default step is first order and still close.
    let coarse = run(Scheme::ExponentialImex, StepSize::Auto);
    assert!(rk.sup_distance(&coarse) < 1e-3);
}

fn one_sided_pde(k: usize, beta: f64) -> (TorusGeometry, NeighborTable, ReactionSpec, SchellingParams) {
    let g = TorusGeometry::new(1, 2 * k + 4).unwrap();
    let nb = Neighborhood::build_box(&g, k, true).unwrap();
    let table = NeighborTable::new(&g, &nb).unwrap();
    (g, table, ReactionSpec::finite(0.5, k).unwrap(), SchellingParams::new(0.5, beta, 0.3).unwrap())
}

/// Drift of the constant solution at `1 - eps`: about `eps - beta (1 - 2 eps)`.
fn top_drift(spec: &ReactionSpec, beta: f64, eps: f64) -> f64 {
    beta * (1.0 - 2.0 * (1.0 - eps)) + spec.g(1.0 - eps)
}

#[test]
fn constant_supersolution_dominates() {
    // eps <= beta / (1 + 2 beta) makes 1 - eps a supersolution.
    let (k, beta, eps) = (80, 0.144, 0.1);
    let (g, table, spec, params) = one_sided_pde(k, beta);
    assert!(top_drift(&spec, beta, eps) < 0.0);
    let pde = DiscretePde::new(params, &table, spec).unwrap();
    let cfg = IntegratorConfig {
        obs_times: vec![0.1, 0.2, 0.3],
        ..Default::default()
    };
    let top = pde.integrate(&DiscreteField::constant(g, 1.0 - eps), &cfg).unwrap();
    let below = pde.integrate(&sine(&g, 0.5, 0.3), &cfg).unwrap();
    assert!(comparison_check(&top, &below).unwrap());
    for (_, u) in &top {
        assert!(u.max() <= 1.0 - eps + 1e-9);
    }
}

/// With beta / (1 + 2 beta) < eps < 2 beta / (1 + 4 beta) the top constant is not a
/// supersolution: the drift is positive and the flat start leaves [eps, 1 - eps].
#[test]
fn constant_top_escapes_past_the_drift_balance() {
    let (k, beta, eps) = (80, 0.144, 0.18);
    let (g, table, spec, params) = one_sided_pde(k, beta);
    assert!(eps > beta / (1.0 + 2.0 * beta) && eps < 2.0 * beta / (1.0 + 4.0 * beta));
    assert!((k as f64) > (eps / 2.0).ln().abs() / (eps * eps));
    let drift = top_drift(&spec, beta, eps);
    assert!(drift > 0.08, "drift {drift}");
    let pde = DiscretePde::new(params, &table, spec).unwrap();
    let cfg = IntegratorConfig {
        obs_times: vec![0.3],
        ..Default::default()
    };
    let top = pde.integrate(&DiscreteField::constant(g, 1.0 - eps), &cfg).unwrap();
    assert!(top[1].1.min() > 1.0 - eps + 0.01);
}

#[test]
fn gradient_envelope_with_one_constant() {
    let spec = ReactionSpec::finite(0.3, 2).unwrap();
    let params = SchellingParams::new(0.3, 0.2, 0.5).unwrap();
    let times: Vec<f64> = (1..=10).map(|j| j as f64 * 0.05).collect();
    let mut fitted: Option<(f64, f64)> = None;
    for &n in &[64usize, 128, 256] {
        let table = ring(n);
        let g = *table.geometry();
        let pde = DiscretePde::new(params, &table, spec).unwrap();
        let u0 = sine(&g, 0.5, 0.2);
        // Initial gradient is the finite difference of the sine.
        let c0 = n as f64 * u0.max_gradient();
        assert!(c0 <= 2.0 * std::f64::consts::PI * 0.2 * (1.0 + 1e-9));
        let traj = pde
            .integrate(
                &u0,
                &IntegratorConfig {
                    obs_times: times.clone(),
                    ..Default::default()
                },
            )
            .unwrap();
        let profile = gradient_profile(&traj);
        match fitted {
            None => {
                let c = profile
                    .iter()
                    .skip(1)
                    .map(|(t, grad)| ((n as f64 * grad - c0) / t.sqrt()).max(0.0))
                    .fold(0.0, f64::max);
                fitted = Some((c0, c));
            }
            Some((c0_fit, c)) => {
                for (t, grad) in &profile {
                    assert!(n as f64 * grad <= 1.05 * (c0_fit + c * t.sqrt()) + 1e-9, "N={n} t={t}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn shifted_data_stay_ordered(
        t in 0.05f64..0.95,
        beta in 0.0f64..2.0,
        alpha in 0.05f64..1.0,
        amp in 0.0f64..0.45,
        shift in 0.0f64..0.2,
        radius in 1usize..=3,
    ) {
        let g = TorusGeometry::new(1, 48).unwrap();
        let nb = Neighborhood::build_box(&g, radius, false).unwrap();
        let table = NeighborTable::new(&g, &nb).unwrap();
        let spec = ReactionSpec::finite(t, table.k()).unwrap();
        let pde = DiscretePde::new(SchellingParams::new(t, beta, alpha).unwrap(), &table, spec).unwrap();
        let lower = sine(&g, 0.5, amp);
        let upper = DiscreteField::new(g, lower.values().iter().map(|v| (v + shift).min(1.0)).collect()).unwrap();
        let cfg = IntegratorConfig { obs_times: vec![0.25, 0.5, 1.0], ..Default::default() };
        let a = pde.integrate(&upper, &cfg).unwrap();
        let b = pde.integrate(&lower, &cfg).unwrap();
        prop_assert!(comparison_check(&a, &b).unwrap());
        for (_, u) in a.iter().chain(&b) {
            prop_assert!(u.min() >= -1e-9 && u.max() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn translation_commutes_with_the_flow(shift in 0i64..48, amp in 0.0f64..0.4) {
        let table = ring(48);
        let g = *table.geometry();
        let spec = ReactionSpec::finite(0.3, 2).unwrap();
        let pde = DiscretePde::new(SchellingParams::new(0.3, 0.2, 0.5).unwrap(), &table, spec).unwrap();
        let u0 = DiscreteField::from_fn(g, |x| 0.5 + amp * (2.0 * std::f64::consts::PI * x[0]).cos().powi(3));
        let cfg = IntegratorConfig { obs_times: vec![0.3], ..Default::default() };
        let a = pde.integrate(&u0, &cfg).unwrap().pop().unwrap().1.translated(&[shift]);
        let b = pde.integrate(&u0.translated(&[shift]), &cfg).unwrap().pop().unwrap().1;
        prop_assert!(a.sup_distance(&b) < 1e-12);
    }
}

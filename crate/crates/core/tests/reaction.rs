use proptest::prelude::*;
use rand::Rng;

use schelling_core::reaction::{
    binomial_cdf, gamma_inf_beta, h_inf, p0, phase_classify, poisson_binomial_cdf, Phase,
};
use schelling_core::rng::stream_rng;
use schelling_core::{NeighborTable, Neighborhood, ReactionSpec, TorusGeometry};

/// `P(sum <= k)` by summing over all `2^K` outcomes.
fn enumerate_cdf(probs: &[f64], k: i64) -> f64 {
    let mut total = 0.0;
    for mask in 0u32..(1 << probs.len()) {
        if (mask.count_ones() as i64) > k {
            continue;
        }
        total += probs
            .iter()
            .enumerate()
            .map(|(j, &p)| if mask >> j & 1 == 1 { p } else { 1.0 - p })
            .product::<f64>();
    }
    total
}

/// `G(0, u)` from the polynomial form: sum over subsets of the neighborhood.
fn subset_reaction(u: &[f64], own: f64, kappa: i64) -> f64 {
    let zeros: Vec<f64> = u.iter().map(|x| 1.0 - x).collect();
    let create = enumerate_cdf(&zeros, kappa);
    let annihilate = enumerate_cdf(u, kappa);
    (1.0 - own) * create - own * annihilate
}

fn ring_with(k: usize) -> NeighborTable {
    let g = TorusGeometry::new(1, 2 * k + 2).unwrap();
    let nb = Neighborhood::build_box(&g, k, true).unwrap();
    NeighborTable::new(&g, &nb).unwrap()
}

#[test]
fn two_fair_coins() {
    assert!((poisson_binomial_cdf(&[0.5, 0.5], 0) - 0.25).abs() < 1e-15);
}

#[test]
fn hand_computed_g() {
    let spec = ReactionSpec::finite(0.4, 3).unwrap();
    assert_eq!(spec.kappa(), Some(1));
    assert!((spec.g(0.2) + 0.096).abs() < 1e-12);
}

#[test]
fn beta_one_classification() {
    let cases = [(0.45, Phase::Segregated), (0.38, Phase::MetastableSegregation), (0.30, Phase::Mixed)];
    for (t, phase) in cases {
        assert_eq!(phase_classify(t, 1.0).unwrap().phase, phase);
    }
}

#[test]
fn h_k_sandwich_near_the_jump() {
    let (rho, eps) = (0.2, 0.05);
    let spec = ReactionSpec::finite(0.5 - rho, 4000).unwrap();
    let n = 400;
    for j in 0..=n {
        let q = 2.0 * rho - eps + 2.0 * eps * j as f64 / n as f64;
        let h = spec.h(q);
        assert!(h >= 2.0 * rho - 2.0 * eps - 1e-12 && h <= 1.0 + 1e-12, "q={q} h={h}");
    }
}

#[test]
fn h_k_tends_to_h_inf_away_from_jumps() {
    let rho = 0.2;
    for &k in &[100usize, 1000, 10000] {
        let spec = ReactionSpec::finite(0.5 - rho, k).unwrap();
        let mut worst: f64 = 0.0;
        for j in 0..=200 {
            let q = -1.0 + j as f64 / 100.0;
            if (q.abs() - 2.0 * rho).abs() < 5.0 / (k as f64).sqrt() {
                continue;
            }
            worst = worst.max((spec.h(q) - h_inf(q, rho)).abs());
        }
        assert!(worst < 0.05, "K={k}: {worst}");
    }
}

#[test]
fn ordered_fields_order_the_reaction() {
    let mut rng = stream_rng(31, 0);
    for _ in 0..10_000 {
        let k = rng.random_range(1..=20);
        let table = ring_with(k);
        let spec = ReactionSpec::finite(rng.random_range(0.05..0.95), k).unwrap();
        let n = table.geometry().site_count();
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut u: Vec<f64> = v.iter().map(|x| (x + rng.random_range(0.0..0.5)).min(1.0)).collect();
        u[0] = v[0];
        assert!(spec.monotone_check(&table, &u, &v, 0).unwrap());
    }
}

proptest! {
    #[test]
    fn dp_matches_enumeration(probs in proptest::collection::vec(0.0f64..=1.0, 1..=12), k in -1i64..=13) {
        prop_assert!((poisson_binomial_cdf(&probs, k) - enumerate_cdf(&probs, k)).abs() < 1e-13);
    }

    #[test]
    fn equal_probabilities_are_binomial(n in 1usize..=50, p in 0.0f64..=1.0, k in 0i64..=50) {
        let probs = vec![p; n];
        prop_assert!((poisson_binomial_cdf(&probs, k) - binomial_cdf(n, p, k)).abs() < 1e-12);
    }

    #[test]
    fn lattice_reaction_matches_subset_sum(
        u in proptest::collection::vec(0.0f64..=1.0, 1..=10),
        own in 0.0f64..=1.0,
        t in 0.05f64..0.95,
    ) {
        let k = u.len();
        let spec = ReactionSpec::finite(t, k).unwrap();
        let table = ring_with(k);
        let mut field = vec![0.5; table.geometry().site_count()];
        field[0] = own;
        for (slot, &j) in table.neighbors(0).iter().enumerate() {
            field[j as usize] = u[slot];
        }
        let expected = subset_reaction(&u, own, spec.kappa().unwrap() as i64);
        prop_assert!((spec.lattice_reaction(&table, &field, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn g_is_antisymmetric_and_vanishes_at_ends(k in 1usize..200, t in 0.02f64..0.98, p in 0.0f64..=1.0) {
        let spec = ReactionSpec::finite(t, k).unwrap();
        prop_assert!((spec.g(1.0 - p) + spec.g(p)).abs() < 1e-12);
        prop_assert!(spec.g(0.0).abs() < 1e-15 && spec.g(1.0).abs() < 1e-15);
        prop_assert!(spec.g(0.5).abs() < 1e-12);
    }

    #[test]
    fn h_k_is_bounded(k in 1usize..300, t in 0.02f64..0.98, q in -1.0f64..=1.0) {
        let spec = ReactionSpec::finite(t, k).unwrap();
        prop_assert!(spec.h(q).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn centered_reaction_is_bounded(seed in any::<u64>(), k in 1usize..12, t in 0.05f64..0.95) {
        let mut rng = stream_rng(seed, 0);
        let table = ring_with(k);
        let spec = ReactionSpec::finite(t, k).unwrap();
        let v: Vec<f64> = (0..table.geometry().site_count()).map(|_| rng.random_range(-1.0..=1.0)).collect();
        for i in 0..v.len() {
            prop_assert!(spec.centered_lattice_reaction(&table, &v, i).abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn potential_is_symmetric(t in 0.0f64..=1.0, beta in 0.01f64..10.0, p in 0.0f64..=1.0) {
        prop_assert!((gamma_inf_beta(p, t, beta) - gamma_inf_beta(1.0 - p, t, beta)).abs() < 1e-12);
        prop_assert!(p0(t) <= 0.5);
    }
}

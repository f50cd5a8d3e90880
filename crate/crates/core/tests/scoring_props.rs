//! Properties of the scoring rules.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use reconc_core::scoring::{
    energy_score, energy_score_weighted, mis, rps_discrete, rps_tabulated, skill_score,
};
use reconc_core::{
    reconcile_exact, BaseForecastSet, CountPmf, ExactOptions, Hierarchy, ReconciledJoint,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn skill_is_antisymmetric_and_bounded(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        prop_assume!(a + b > 0.0);
        let s = skill_score(a, b).unwrap();
        prop_assert!((-2.0..=2.0).contains(&s));
        prop_assert!((s + skill_score(b, a).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn rps_is_non_negative(weights in proptest::collection::vec(0.0f64..1.0, 1..12), y in 0u64..20) {
        prop_assume!(weights.iter().sum::<f64>() > 1e-6);
        let pmf = CountPmf::from_weights(weights.clone()).unwrap();
        let s = rps_discrete(&pmf, y);
        prop_assert!(s >= 0.0);
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        prop_assert!((s - rps_tabulated(&probs, y)).abs() < 1e-9);
    }

    #[test]
    fn mis_inside_interval_is_width(l in 0.0f64..50.0, w in 0.0f64..50.0, t in 0.0f64..1.0, alpha in 0.01f64..0.99) {
        let u = l + w;
        let y = l + t * w;
        prop_assert!((mis(l, u, y, alpha).unwrap() - w).abs() < 1e-9);
    }
}

#[test]
fn energy_score_of_point_mass() {
    let y = [5.0, 2.0, 3.0];
    let s0 = vec![vec![3.0, 1.0, 2.0]; 10];
    let es = energy_score(&s0, &s0, &y, 2.0).unwrap();
    assert!((es - 6.0).abs() < 1e-12);
}

#[test]
fn gaussian_energy_score_closed_form() {
    // For exponent 2 the trace terms cancel and ES = ||y - mu||^2.
    let mu: [f64; 3] = [3.0, -1.0, 0.5];
    let sd = [1.0, 2.0, 0.5];
    let y = [4.0, 0.0, 0.0];
    let closed: f64 = y.iter().zip(&mu).map(|(a, b)| (a - b).powi(2)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..3)
            .map(|i| mu[i] + sd[i] * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    // Replicate the estimator to get its standard error.
    let reps: Vec<f64> = (0..200)
        .map(|_| {
            let a: Vec<_> = (0..1000).map(|_| draw(&mut rng)).collect();
            let b: Vec<_> = (0..1000).map(|_| draw(&mut rng)).collect();
            energy_score(&a, &b, &y, 2.0).unwrap()
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let sd_rep =
        (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    assert!(
        (reps[0] - closed).abs() < 3.0 * sd_rep,
        "{} vs {closed}",
        reps[0]
    );
    assert!((mean - closed).abs() < 3.0 * sd_rep / (reps.len() as f64).sqrt());
}

#[test]
fn exact_energy_score_matches_monte_carlo() {
    let h = Hierarchy::temporal(2, &[2]).unwrap();
    let base = BaseForecastSet::new(
        &h,
        vec![
            CountPmf::poisson(2.0).unwrap(),
            CountPmf::poisson(4.0).unwrap(),
        ],
        vec![Some(CountPmf::poisson(9.0).unwrap())],
    )
    .unwrap();
    let j = ReconciledJoint::Exact(reconcile_exact(&h, &base, &ExactOptions::default()).unwrap());
    let support: Vec<(Vec<f64>, f64)> = j
        .weighted_full_vectors(&h)
        .into_iter()
        .filter(|(_, w)| *w > 1e-15)
        .map(|(y, w)| (y.iter().map(|&v| v as f64).collect(), w))
        .collect();
    let y = [8.0, 3.0, 5.0];
    let exact = energy_score_weighted(&support, &y, 2.0).unwrap();

    // Inverse-CDF sampling from the enumerated joint.
    let mut cum = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for (_, w) in &support {
        acc += w;
        cum.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pick = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random::<f64>() * acc;
        support[cum.partition_point(|&c| c < u).min(support.len() - 1)]
            .0
            .clone()
    };
    let reps: Vec<f64> = (0..100)
        .map(|_| {
            let a: Vec<_> = (0..1000).map(|_| pick(&mut rng)).collect();
            let b: Vec<_> = (0..1000).map(|_| pick(&mut rng)).collect();
            energy_score(&a, &b, &y, 2.0).unwrap()
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let sd =
        (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
    assert!((reps[0] - exact).abs() < 3.0 * sd, "{} vs {exact}", reps[0]);
    assert!((mean - exact).abs() < 3.0 * sd / (reps.len() as f64).sqrt());
}

//! Exact conditioning checked against an independent full-update oracle.

use proptest::prelude::*;
use reconc_core::{
    bottom_up_exact, condition_on_upper, reconcile_exact, BaseForecastSet, CountPmf, ExactJoint,
    ExactOptions, Hierarchy,
};

fn poisson(rate: f64) -> CountPmf {
    CountPmf::poisson(rate).unwrap()
}

/// Poisson pmf from the textbook recursion, independent of the library.
fn poisson_pmf(rate: f64, k: u64) -> f64 {
    let mut p = (-rate).exp();
    for i in 1..=k {
        p *= rate / i as f64;
    }
    p
}

/// All evidence applied in one multiplication over the same grid the
/// library enumerates, then renormalized once.
fn full_update(
    h: &Hierarchy,
    grid: &ExactJoint,
    bottom_rates: &[f64],
    upper_rates: &[f64],
) -> Vec<f64> {
    let mut w: Vec<f64> = grid
        .iter()
        .map(|(b, _)| {
            let prior: f64 = b
                .iter()
                .zip(bottom_rates)
                .map(|(&x, &r)| poisson_pmf(r, x))
                .product();
            let evidence: f64 = h
                .a_rows()
                .iter()
                .zip(upper_rates)
                .map(|(row, &r)| {
                    let s: u64 = row.iter().zip(&b).map(|(&a, &x)| a as u64 * x).sum();
                    poisson_pmf(r, s)
                })
                .product();
            prior * evidence
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

fn setup_421() -> (Hierarchy, Vec<f64>, Vec<f64>, BaseForecastSet) {
    let h = Hierarchy::temporal(4, &[2, 4]).unwrap();
    let bottom = vec![1.0, 2.0, 3.0, 4.0];
    // year, then the two semesters
    let upper = vec![12.0, 2.5, 8.0];
    let base = BaseForecastSet::new(
        &h,
        bottom.iter().map(|&r| poisson(r)).collect(),
        upper.iter().map(|&r| Some(poisson(r))).collect(),
    )
    .unwrap();
    (h, bottom, upper, base)
}

#[test]
fn sequential_equals_full_update() {
    let (h, bottom, upper, base) = setup_421();
    let opts = ExactOptions::default();
    let seq = reconcile_exact(&h, &base, &opts).unwrap();
    let grid = bottom_up_exact(&h, &base, &opts).unwrap();
    // The library truncates each bottom at its 1 - eps quantile; the oracle
    // uses the same grid, so differences come only from the update order.
    let oracle = full_update(&h, &grid, &bottom, &upper);
    for (a, b) in seq.probabilities().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn evidence_order_is_irrelevant() {
    let (h, _, _, base) = setup_421();
    let grid = bottom_up_exact(&h, &base, &ExactOptions::default()).unwrap();
    let orders = [[0, 1, 2], [2, 1, 0], [1, 2, 0], [1, 0, 2]];
    let run = |order: &[usize]| {
        order.iter().fold(grid.clone(), |j, &i| {
            condition_on_upper(&j, &h, i, base.upper[i].as_ref().unwrap()).unwrap()
        })
    };
    let reference = run(&orders[0]);
    for order in &orders[1..] {
        let other = run(order);
        for (a, b) in reference.probabilities().iter().zip(other.probabilities()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn ratio_law_between_atoms() {
    let (h, _, _, base) = setup_421();
    let opts = ExactOptions::default();
    let bu = bottom_up_exact(&h, &base, &opts).unwrap();
    let rec = reconcile_exact(&h, &base, &opts).unwrap();
    let evidence = |b: &[u64]| -> f64 {
        (0..h.n_upper())
            .map(|i| base.upper[i].as_ref().unwrap().pmf(h.upper_value(i, b)))
            .product()
    };
    let pairs = [
        ([0, 1, 2, 3], [1, 2, 3, 4]),
        ([2, 2, 2, 2], [0, 0, 5, 5]),
        ([1, 0, 0, 0], [3, 1, 4, 1]),
    ];
    for (b, c) in pairs {
        let lhs = rec.prob_of(&b) / rec.prob_of(&c);
        let rhs = bu.prob_of(&b) / bu.prob_of(&c) * evidence(&b) / evidence(&c);
        assert!((lhs / rhs - 1.0).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}

fn small_temporal() -> impl Strategy<Value = Hierarchy> {
    prop_oneof![
        Just(Hierarchy::temporal(2, &[2]).unwrap()),
        Just(Hierarchy::temporal(3, &[3]).unwrap()),
        Just(Hierarchy::temporal(4, &[2, 4]).unwrap()),
        Just(Hierarchy::temporal(4, &[4]).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn reconciled_joint_is_normalized_and_coherent(
        h in small_temporal(),
        rates in proptest::collection::vec(0.2f64..3.0, 4),
        upper_rates in proptest::collection::vec(0.5f64..8.0, 3),
        drop_mask in proptest::collection::vec(any::<bool>(), 3),
    ) {
        let bottom = rates[..h.m()].iter().map(|&r| poisson(r)).collect();
        let upper = (0..h.n_upper())
            .map(|i| (!drop_mask[i]).then(|| poisson(upper_rates[i])))
            .collect();
        let base = BaseForecastSet::new(&h, bottom, upper).unwrap();
        let j = reconcile_exact(&h, &base, &ExactOptions::default()).unwrap();
        prop_assert!((j.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(j.probabilities().iter().all(|&p| p >= 0.0));
        for (b, _) in j.support().take(200) {
            let y = h.aggregate(&b).unwrap();
            prop_assert!(h.is_coherent(&y).unwrap());
        }
    }

    #[test]
    fn uniform_evidence_is_a_no_op(rates in proptest::collection::vec(0.2f64..3.0, 2)) {
        let h = Hierarchy::temporal(2, &[2]).unwrap();
        let bottom: Vec<_> = rates.iter().map(|&r| poisson(r)).collect();
        let opts = ExactOptions::default();
        let bu = bottom_up_exact(&h, &BaseForecastSet::bottom_only(&h, bottom.clone()).unwrap(), &opts).unwrap();
        let max_sum: usize = bu.dims().iter().map(|d| d - 1).sum();
        let flat = CountPmf::from_weights(vec![1.0; max_sum + 1]).unwrap();
        let rec = condition_on_upper(&bu, &h, 0, &flat).unwrap();
        for (a, b) in bu.probabilities().iter().zip(rec.probabilities()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}

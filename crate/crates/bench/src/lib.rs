//! Fixtures shared by the benchmarks.

use reconc_core::{BaseForecastSet, CountPmf, GaussianForecast, Hierarchy};

/// Minimal hierarchy with Poisson bases (2, 4) and Poisson(9) on top.
pub fn minimal_poisson() -> (Hierarchy, BaseForecastSet) {
    let h = Hierarchy::temporal(2, &[2]).expect("valid hierarchy");
    let base = poisson_base(&h, &[2.0, 4.0], &[9.0]);
    (h, base)
}

/// Four-period hierarchy (4-2-1) with Poisson rates 1..4 and incoherent uppers.
pub fn quarterly_poisson() -> (Hierarchy, BaseForecastSet) {
    let h = Hierarchy::temporal(4, &[2, 4]).expect("valid hierarchy");
    let base = poisson_base(&h, &[1.0, 2.0, 3.0, 4.0], &[12.0, 2.5, 8.0]);
    (h, base)
}

/// Monthly hierarchy with low, intermittent-looking rates.
pub fn monthly_poisson() -> (Hierarchy, BaseForecastSet) {
    let h = Hierarchy::temporal(12, &[2, 3, 4, 6, 12]).expect("valid hierarchy");
    let bottom: Vec<f64> = (0..12).map(|i| 0.3 + 0.05 * i as f64).collect();
    let rates = &bottom;
    let upper: Vec<f64> = h
        .levels()
        .iter()
        .take(h.levels().len() - 1)
        .flat_map(|l| {
            let span = l.span;
            (0..12 / span).map(move |j| 1.1 * rates[j * span..(j + 1) * span].iter().sum::<f64>())
        })
        .collect();
    let base = poisson_base(&h, &bottom, &upper);
    (h, base)
}

fn poisson_base(h: &Hierarchy, bottom: &[f64], upper: &[f64]) -> BaseForecastSet {
    BaseForecastSet::new(
        h,
        bottom
            .iter()
            .map(|&r| CountPmf::poisson(r).expect("positive rate"))
            .collect(),
        upper
            .iter()
            .map(|&r| Some(CountPmf::poisson(r).expect("positive rate")))
            .collect(),
    )
    .expect("consistent base set")
}

/// Gaussian base forecasts for every node of `h`, upper nodes first.
pub fn gaussian_base(h: &Hierarchy) -> Vec<GaussianForecast> {
    (0..h.n())
        .map(|i| {
            GaussianForecast::new(1.0 + i as f64, 1.0 + 0.5 * i as f64).expect("positive variance")
        })
        .collect()
}

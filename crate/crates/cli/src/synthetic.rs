//! Seeded intermittent count series for benchmarking the pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reconc_core::CountPmf;

use crate::config::derive_seed;
use crate::io::Observations;

/// Threshold on the average inter-demand interval above which a series is
/// called intermittent.
pub const ADI_INTERMITTENT: f64 = 1.32;

/// `n_series` monthly-style series of `cycles * period` points. Even
/// indices are Poisson, odd indices negative binomial with the same mean;
/// rates are low and mildly seasonal so most series are intermittent.
pub fn generate(n_series: usize, cycles: usize, period: usize, seed: u64) -> Observations {
    (0..n_series)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            let level: f64 = rng.random_range(0.15..0.6);
            let size: f64 = rng.random_range(0.5..2.0);
            let values = (0..cycles * period)
                .map(|t| {
                    let phase = 2.0 * std::f64::consts::PI * (t % period) as f64 / period as f64;
                    let mean = level * (1.0 + 0.3 * phase.sin());
                    let pmf = if i % 2 == 0 {
                        CountPmf::poisson(mean).expect("positive rate")
                    } else {
                        CountPmf::neg_binomial(size, size / (size + mean))
                            .expect("valid parameters")
                    };
                    pmf.draw(&mut rng)
                })
                .collect();
            (format!("syn{i:03}"), values)
        })
        .collect()
}

/// Average inter-demand interval: periods per non-zero observation.
pub fn adi(values: &[u64]) -> f64 {
    let nonzero = values.iter().filter(|&&v| v > 0).count();
    if nonzero == 0 {
        f64::INFINITY
    } else {
        values.len() as f64 / nonzero as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_intermittent() {
        let a = generate(10, 4, 12, 5);
        assert_eq!(a, generate(10, 4, 12, 5));
        assert_ne!(a, generate(10, 4, 12, 6));
        assert!(a.values().all(|v| v.len() == 48));
        let intermittent = a.values().filter(|v| adi(v) > ADI_INTERMITTENT).count();
        assert!(intermittent >= 8, "{intermittent}");
    }

    #[test]
    fn adi_examples() {
        assert_eq!(adi(&[1, 0, 0, 2]), 2.0);
        assert_eq!(adi(&[0, 0]), f64::INFINITY);
    }
}

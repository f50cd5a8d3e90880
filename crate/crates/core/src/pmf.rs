//! Base-forecast distributions: count pmfs (Poisson, negative binomial,
//! tabulated), Gaussians, and moment fits from forecast samples.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Default tail mass dropped when truncating a pmf for enumeration.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// Floor applied to fitted Gaussian variances so `W` stays invertible.
pub const VARIANCE_FLOOR: f64 = 1e-9;

const TABULATED_SUM_TOL: f64 = 1e-12;

/// A probability mass function over the non-negative integers.
#[derive(Debug, Clone, PartialEq)]
pub enum CountPmf {
    /// Poisson with the given rate. Rate 0 is the point mass at 0.
    Poisson { rate: f64 },
    /// Negative binomial counting failures before the `size`-th success,
    /// `P(k) = C(k+r-1, k) p^r (1-p)^k`, mean `r(1-p)/p`.
    NegBinomial { size: f64, prob: f64 },
    /// Explicit probabilities for `0..probs.len()`; zero beyond.
    Tabulated { probs: Vec<f64> },
}

impl CountPmf {
    pub fn poisson(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::InvalidDistribution(format!("Poisson rate {rate}")));
        }
        Ok(Self::Poisson { rate })
    }

    pub fn neg_binomial(size: f64, prob: f64) -> Result<Self> {
        if !(size.is_finite() && size > 0.0) || !(prob > 0.0 && prob < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "negative binomial r={size}, p={prob}"
            )));
        }
        Ok(Self::NegBinomial { size, prob })
    }

    /// Tabulated pmf; probabilities must be non-negative and sum to 1
    /// within 1e-12.
    pub fn tabulated(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability table".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite probability".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TABULATED_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self::Tabulated { probs })
    }

    /// Tabulated pmf from non-negative weights, rescaled to sum to one.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidDistribution("weights have no mass".into()));
        }
        Ok(Self::Tabulated {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    /// Point mass at `k`.
    pub fn point_mass(k: u64) -> Self {
        let mut probs = vec![0.0; k as usize + 1];
        probs[k as usize] = 1.0;
        Self::Tabulated { probs }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            Self::Poisson { rate } if *rate == 0.0 => f64::from(u8::from(k == 0)),
            Self::Tabulated { probs } => probs.get(k as usize).copied().unwrap_or(0.0),
            _ => self.ln_pmf(k).exp(),
        }
    }

    /// Natural log of the pmf; `-inf` where the mass is zero.
    pub fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            Self::Poisson { rate } => {
                if *rate == 0.0 {
                    if k == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    kf * rate.ln() - rate - ln_gamma(kf + 1.0)
                }
            }
            Self::NegBinomial { size, prob } => {
                ln_gamma(kf + size) - ln_gamma(*size) - ln_gamma(kf + 1.0)
                    + size * prob.ln()
                    + kf * (1.0 - prob).ln()
            }
            Self::Tabulated { probs } => {
                probs.get(k as usize).map_or(f64::NEG_INFINITY, |p| p.ln())
            }
        }
    }

    pub fn cdf(&self, k: u64) -> f64 {
        (0..=k).map(|i| self.pmf(i)).sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Poisson { rate } => *rate,
            Self::NegBinomial { size, prob } => size * (1.0 - prob) / prob,
            Self::Tabulated { probs } => probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Poisson { rate } => *rate,
            Self::NegBinomial { size, prob } => size * (1.0 - prob) / (prob * prob),
            Self::Tabulated { probs } => {
                let mu = self.mean();
                probs
                    .iter()
                    .enumerate()
                    .map(|(k, p)| (k as f64 - mu).powi(2) * p)
                    .sum()
            }
        }
    }

    /// Smallest `K` with `CDF(K) >= 1 - epsilon`.
    pub fn quantile_truncate(&self, epsilon: f64) -> u64 {
        if let Self::Tabulated { probs } = self {
            let last_nonzero = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            return self.quantile_scan(1.0 - epsilon).min(last_nonzero as u64);
        }
        self.quantile_scan(1.0 - epsilon)
    }

    /// Smallest `k` with `CDF(k) >= level`.
    pub fn quantile(&self, level: f64) -> u64 {
        self.quantile_scan(level)
    }

    pub fn median(&self) -> u64 {
        self.quantile_scan(0.5)
    }

    fn quantile_scan(&self, level: f64) -> u64 {
        // Guard against summation never reaching `level` through rounding.
        let guard = (self.mean() + 60.0 * self.variance().sqrt() + 200.0) as u64;
        let mut acc = 0.0;
        let mut k = 0u64;
        loop {
            acc += self.pmf(k);
            if acc >= level || k >= guard {
                return k;
            }
            if let Self::Tabulated { probs } = self {
                if k as usize + 1 >= probs.len() {
                    return k;
                }
            }
            k += 1;
        }
    }

    /// Probabilities for `0..=max`.
    pub fn table(&self, max: u64) -> Vec<f64> {
        (0..=max).map(|k| self.pmf(k)).collect()
    }

    /// The single support point, if the pmf is a point mass.
    pub fn point_mass_value(&self) -> Option<u64> {
        match self {
            Self::Poisson { rate } if *rate == 0.0 => Some(0),
            Self::Tabulated { probs } => {
                let mut nz = probs.iter().enumerate().filter(|(_, &p)| p > 0.0);
                match (nz.next(), nz.next()) {
                    (Some((k, _)), None) => Some(k as u64),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Poisson { rate } => {
                if *rate == 0.0 {
                    0
                } else {
                    Poisson::new(*rate).expect("valid rate").sample(rng) as u64
                }
            }
            Self::NegBinomial { size, prob } => {
                let lambda = Gamma::new(*size, (1.0 - prob) / prob)
                    .expect("valid gamma")
                    .sample(rng);
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).expect("valid rate").sample(rng) as u64
                }
            }
            Self::Tabulated { probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k as u64;
                    }
                }
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u64
            }
        }
    }

    /// `n` i.i.d. draws.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> ForecastSamples {
        ForecastSamples {
            draws: (0..n).map(|_| self.draw(rng) as f64).collect(),
        }
    }
}

/// Mean and variance of a Gaussian predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianForecast {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianForecast {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "Gaussian mean={mean}, variance={variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    /// Moment-matched Gaussian for a count pmf.
    pub fn from_count(pmf: &CountPmf) -> Self {
        Self {
            mean: pmf.mean(),
            variance: pmf.variance().max(VARIANCE_FLOOR),
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Quantile of the untruncated normal at probability `p` in `(0, 1)`.
    pub fn quantile(&self, p: f64) -> f64 {
        Normal::new(self.mean, self.sd())
            .expect("positive variance")
            .inverse_cdf(p)
    }
}

/// Draws from a predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSamples {
    draws: Vec<f64>,
}

impl ForecastSamples {
    pub fn new(draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite sample".into()));
        }
        Ok(Self { draws })
    }

    pub fn from_counts(draws: &[u64]) -> Result<Self> {
        Self::new(draws.iter().map(|&d| d as f64).collect())
    }

    pub fn draws(&self) -> &[f64] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.draws.iter().sum::<f64>() / self.draws.len() as f64
    }

    /// Unbiased sample variance; 0 for a single draw.
    pub fn variance(&self) -> f64 {
        let n = self.draws.len();
        if n < 2 {
            return 0.0;
        }
        let mu = self.mean();
        self.draws.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1) as f64
    }
}

/// Method-of-moments negative binomial fit: `r = m^2 / (v - m)`,
/// `p = r / (r + m)`. Equi- or under-dispersed samples fall back to
/// Poisson(m); all-zero samples give the point mass at zero.
pub fn fit_negbinomial(samples: &ForecastSamples) -> Result<CountPmf> {
    if samples.draws().iter().any(|&d| d < 0.0 || d.fract() != 0.0) {
        return Err(Error::DegenerateSamples(
            "count samples must be non-negative integers".into(),
        ));
    }
    let mean = samples.mean();
    if mean == 0.0 {
        return Ok(CountPmf::point_mass(0));
    }
    let var = samples.variance();
    if var <= mean {
        return CountPmf::poisson(mean);
    }
    let size = mean * mean / (var - mean);
    CountPmf::neg_binomial(size, size / (size + mean))
}

/// Sample mean and unbiased variance, floored at [`VARIANCE_FLOOR`].
pub fn fit_gaussian(samples: &ForecastSamples) -> Result<GaussianForecast> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(GaussianForecast {
        mean: samples.mean(),
        variance: samples.variance().max(VARIANCE_FLOOR),
    })
}

/// Parametric part of a forecast-file entry, tagged by `"dist"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum DistSpec {
    Poisson { lambda: f64 },
    Negbin { r: f64, p: f64 },
    Gaussian { mean: f64, var: f64 },
    Tabulated { probs: Vec<f64> },
}

/// One node's entry in a forecast file: a parametric distribution or raw
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ForecastSpec {
    Samples { samples: Vec<f64> },
    Dist(DistSpec),
}

impl ForecastSpec {
    /// Count pmf for count reconciliation. Samples are fitted with
    /// [`fit_negbinomial`]; Gaussian entries are rejected.
    pub fn to_count_pmf(&self) -> Result<CountPmf> {
        match self {
            Self::Samples { samples } => fit_negbinomial(&ForecastSamples::new(samples.clone())?),
            Self::Dist(DistSpec::Poisson { lambda }) => CountPmf::poisson(*lambda),
            Self::Dist(DistSpec::Negbin { r, p }) => CountPmf::neg_binomial(*r, *p),
            Self::Dist(DistSpec::Tabulated { probs }) => CountPmf::tabulated(probs.clone()),
            Self::Dist(DistSpec::Gaussian { .. }) => Err(Error::InvalidDistribution(
                "a Gaussian forecast cannot feed count reconciliation".into(),
            )),
        }
    }

    /// Gaussian for minT reconciliation. Samples are fitted with
    /// [`fit_gaussian`]; count pmfs are moment-matched.
    pub fn to_gaussian(&self) -> Result<GaussianForecast> {
        match self {
            Self::Samples { samples } => fit_gaussian(&ForecastSamples::new(samples.clone())?),
            Self::Dist(DistSpec::Gaussian { mean, var }) => GaussianForecast::new(*mean, *var),
            _ => Ok(GaussianForecast::from_count(&self.to_count_pmf()?)),
        }
    }
}

impl From<&CountPmf> for ForecastSpec {
    fn from(pmf: &CountPmf) -> Self {
        Self::Dist(match pmf {
            CountPmf::Poisson { rate } => DistSpec::Poisson { lambda: *rate },
            CountPmf::NegBinomial { size, prob } => DistSpec::Negbin { r: *size, p: *prob },
            CountPmf::Tabulated { probs } => DistSpec::Tabulated {
                probs: probs.clone(),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pmf_values() {
        assert_abs_diff_eq!(
            CountPmf::poisson(2.0).unwrap().pmf(0),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        let t = CountPmf::tabulated(vec![0.5, 0.2, 0.3]).unwrap();
        assert_eq!(t.pmf(1), 0.2);
        assert_eq!(t.pmf(3), 0.0);
        assert_abs_diff_eq!(
            CountPmf::neg_binomial(2.0, 0.5).unwrap().pmf(1),
            0.25,
            epsilon = 1e-14
        );
    }

    #[test]
    fn negbin_matches_binomial_coefficient_form() {
        // C(k+r-1, k) p^r (1-p)^k with integer r
        let d = CountPmf::neg_binomial(3.0, 0.4).unwrap();
        let choose =
            |n: u64, k: u64| (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64);
        for k in 0..15u64 {
            let direct = choose(k + 2, k) * 0.4f64.powi(3) * 0.6f64.powi(k as i32);
            assert_abs_diff_eq!(d.pmf(k), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(CountPmf::poisson(-1.0).is_err());
        assert!(CountPmf::neg_binomial(0.0, 0.5).is_err());
        assert!(CountPmf::neg_binomial(1.0, 1.0).is_err());
        assert!(CountPmf::tabulated(vec![0.5, 0.4]).is_err());
        assert!(CountPmf::tabulated(vec![1.5, -0.5]).is_err());
        assert!(GaussianForecast::new(0.0, 0.0).is_err());
    }

    #[test]
    fn truncation_points() {
        let t = CountPmf::tabulated(vec![0.5, 0.2, 0.3]).unwrap();
        assert_eq!(t.quantile_truncate(1e-9), 2);
        assert_eq!(CountPmf::poisson(0.0).unwrap().quantile_truncate(1e-9), 0);

        // cumulative sum of Poisson(9) terms, built by recurrence
        let mut term = (-9.0f64).exp();
        let mut cdf = term;
        let mut k = 0u64;
        while cdf < 1.0 - 1e-9 {
            k += 1;
            term *= 9.0 / k as f64;
            cdf += term;
        }
        assert_eq!(CountPmf::poisson(9.0).unwrap().quantile_truncate(1e-9), k);
    }

    #[test]
    fn moments() {
        let nb = CountPmf::neg_binomial(2.0, 0.5).unwrap();
        assert_abs_diff_eq!(nb.mean(), 2.0);
        assert_abs_diff_eq!(nb.variance(), 4.0);
        let t = CountPmf::tabulated(vec![0.5, 0.2, 0.3]).unwrap();
        assert_abs_diff_eq!(t.mean(), 0.8);
        assert_abs_diff_eq!(t.variance(), 0.2 + 1.2 - 0.64, epsilon = 1e-12);
        let tab_nb = CountPmf::from_weights(nb.table(nb.quantile_truncate(1e-14))).unwrap();
        assert_abs_diff_eq!(tab_nb.mean(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(tab_nb.variance(), 4.0, epsilon = 1e-8);
    }

    #[test]
    fn medians_and_point_masses() {
        assert_eq!(CountPmf::poisson(2.0).unwrap().median(), 2);
        assert_eq!(CountPmf::point_mass(3).median(), 3);
        assert_eq!(CountPmf::point_mass(3).point_mass_value(), Some(3));
        assert_eq!(CountPmf::poisson(1.0).unwrap().point_mass_value(), None);
    }

    #[test]
    fn fit_negbinomial_cases() {
        // mean 2, unbiased variance 2
        let s = ForecastSamples::new(vec![0.0, 2.0, 2.0, 4.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.mean(), 2.0);
        assert_abs_diff_eq!(s.variance(), 8.0 / 5.0);
        let eq = ForecastSamples::new(vec![0.0, 2.0, 4.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(eq.variance(), 2.0);
        assert_eq!(
            fit_negbinomial(&eq).unwrap(),
            CountPmf::Poisson { rate: 2.0 }
        );

        // mean 2, unbiased variance 4
        let od = ForecastSamples::new(vec![0.0, 0.0, 4.0, 4.0, 2.0]).unwrap();
        assert_abs_diff_eq!(od.variance(), 4.0);
        match fit_negbinomial(&od).unwrap() {
            CountPmf::NegBinomial { size, prob } => {
                assert_abs_diff_eq!(size, 2.0, epsilon = 1e-12);
                assert_abs_diff_eq!(prob, 0.5, epsilon = 1e-12);
            }
            other => panic!("expected negative binomial, got {other:?}"),
        }

        let zeros = ForecastSamples::new(vec![0.0; 5]).unwrap();
        assert_eq!(
            fit_negbinomial(&zeros).unwrap(),
            CountPmf::Tabulated { probs: vec![1.0] }
        );
        assert!(fit_negbinomial(&ForecastSamples::new(vec![1.5, 2.0]).unwrap()).is_err());
    }

    #[test]
    fn gaussian_quantiles() {
        let g = GaussianForecast::new(10.0, 4.0).unwrap();
        assert!((g.quantile(0.5) - 10.0).abs() < 1e-12);
        assert!((g.quantile(0.95) - (10.0 + 2.0 * 1.6448536269514722)).abs() < 1e-8);
    }

    #[test]
    fn fit_gaussian_cases() {
        let g = fit_gaussian(&ForecastSamples::new(vec![1.0; 4]).unwrap()).unwrap();
        assert_eq!((g.mean, g.variance), (1.0, 1e-9));
        let g = fit_gaussian(&ForecastSamples::new(vec![0.0, 2.0]).unwrap()).unwrap();
        assert_eq!((g.mean, g.variance), (1.0, 2.0));
        assert_eq!(
            fit_gaussian(&ForecastSamples::new(vec![1.0]).unwrap()),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        );

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = CountPmf::poisson(9.0).unwrap().sample(20_000, &mut rng);
        let g = fit_gaussian(&s).unwrap();
        assert!((g.mean - 9.0).abs() < 0.2, "{}", g.mean);
        assert!((g.variance - 9.0).abs() < 1.0, "{}", g.variance);
    }

    #[test]
    fn sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = CountPmf::tabulated(vec![1.0]).unwrap().sample(5, &mut rng);
        assert_eq!(s.draws(), &[0.0; 5]);

        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = CountPmf::poisson(2.0).unwrap().sample(n, &mut rng);
        assert!((s.mean() - 2.0).abs() < 0.03, "{}", s.mean());

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = CountPmf::neg_binomial(2.0, 0.5)
            .unwrap()
            .sample(n, &mut rng);
        assert!((s.mean() - 2.0).abs() < 0.05, "{}", s.mean());

        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let d = CountPmf::neg_binomial(1.5, 0.3).unwrap();
        assert_eq!(d.sample(50, &mut a), d.sample(50, &mut b));
    }

    #[test]
    fn negbin_fit_recovers_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let truth = CountPmf::neg_binomial(1.5, 0.25).unwrap();
        let s = truth.sample(100_000, &mut rng);
        let fit = fit_negbinomial(&s).unwrap();
        let se = (truth.variance() / s.len() as f64).sqrt();
        assert!((fit.mean() - truth.mean()).abs() < 3.0 * se);
    }

    #[test]
    fn forecast_spec_json() {
        let parse = |s: &str| serde_json::from_str::<ForecastSpec>(s).unwrap();
        assert_eq!(
            parse(r#"{"dist":"poisson","lambda":2.5}"#)
                .to_count_pmf()
                .unwrap(),
            CountPmf::Poisson { rate: 2.5 }
        );
        assert_eq!(
            parse(r#"{"dist":"negbin","r":2,"p":0.5}"#)
                .to_count_pmf()
                .unwrap(),
            CountPmf::NegBinomial {
                size: 2.0,
                prob: 0.5
            }
        );
        let g = parse(r#"{"dist":"gaussian","mean":1,"var":2}"#);
        assert!(g.to_count_pmf().is_err());
        assert_eq!(
            g.to_gaussian().unwrap(),
            GaussianForecast::new(1.0, 2.0).unwrap()
        );
        assert_eq!(
            parse(r#"{"dist":"tabulated","probs":[0.5,0.2,0.3]}"#)
                .to_gaussian()
                .unwrap()
                .mean,
            0.8
        );
        let s = parse(r#"{"samples":[0,0,4,4,2]}"#);
        assert!(matches!(
            s.to_count_pmf().unwrap(),
            CountPmf::NegBinomial { .. }
        ));
        assert!(serde_json::from_str::<ForecastSpec>(r#"{"dist":"weibull"}"#).is_err());
    }
}

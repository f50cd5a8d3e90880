//! Forecast evaluation: MASE, ranked probability score (discrete and
//! continuity-corrected Gaussian), interval score, energy score and the
//! symmetric skill score.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pmf::{CountPmf, GaussianForecast};

/// Cumulative mass after which the RPS sum is cut. Every dropped term is
/// at most `(1e-12)^2`.
pub const RPS_TAIL: f64 = 1e-12;

/// Mean absolute error over the horizon scaled by the mean absolute first
/// difference of the training series.
pub fn mase(actuals: &[f64], forecasts: &[f64], training: &[f64]) -> Result<f64> {
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("empty horizon".into()));
    }
    if actuals.len() != forecasts.len() {
        return Err(Error::DimensionError {
            expected: actuals.len(),
            got: forecasts.len(),
        });
    }
    let scale = naive_scale(training)?;
    let mae = actuals
        .iter()
        .zip(forecasts)
        .map(|(y, f)| (y - f).abs())
        .sum::<f64>()
        / actuals.len() as f64;
    Ok(mae / scale)
}

/// In-sample scale `Q = mean |y_t - y_{t-1}|`.
pub fn naive_scale(training: &[f64]) -> Result<f64> {
    if training.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: training.len(),
        });
    }
    let q = training
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .sum::<f64>()
        / (training.len() - 1) as f64;
    if q == 0.0 {
        return Err(Error::UndefinedScale);
    }
    Ok(q)
}

/// RPS of tabulated probabilities for `0..probs.len()`. The pmf is taken
/// as zero beyond the table.
pub fn rps_tabulated(probs: &[f64], y: u64) -> f64 {
    let total: f64 = probs.iter().sum();
    let mut cdf = 0.0;
    let mut score = 0.0;
    let last = (probs.len() as u64).max(y + 1);
    for k in 0..last {
        cdf += probs.get(k as usize).copied().unwrap_or(0.0) / total;
        let ind = if y <= k { 1.0 } else { 0.0 };
        score += (cdf.min(1.0) - ind).powi(2);
    }
    score
}

/// `sum_k (F(k) - 1{y <= k})^2`, summed until `F(k) >= 1 - 1e-12` and past
/// `y`.
pub fn rps_discrete(pmf: &CountPmf, y: u64) -> f64 {
    let cut = pmf.quantile_truncate(RPS_TAIL);
    let mut cdf = 0.0;
    let mut score = 0.0;
    for k in 0..=cut.max(y) {
        cdf += pmf.pmf(k);
        let ind = if y <= k { 1.0 } else { 0.0 };
        score += (cdf.min(1.0) - ind).powi(2);
    }
    score
}

/// Continuity-corrected discretization of a Gaussian on the counts:
/// `P(k) = P(k - 0.5 < X <= k + 0.5)`, with all mass below 0.5 assigned to
/// zero, truncated where the upper tail drops below 1e-12 and renormalized.
pub fn discretize_gaussian(g: &GaussianForecast) -> Vec<f64> {
    let sd = g.sd();
    let normal = Normal::new(g.mean, sd).expect("positive variance");
    // Upper-tail differences use the survival function to avoid
    // cancellation.
    let mass_between = |lo: f64, hi: f64| -> f64 {
        if lo > g.mean {
            normal.sf(lo) - normal.sf(hi)
        } else {
            normal.cdf(hi) - normal.cdf(lo)
        }
    };
    let mut probs = vec![normal.cdf(0.5)];
    let mut k = 1u64;
    while normal.sf(k as f64 - 0.5) > RPS_TAIL {
        let x = k as f64;
        probs.push(mass_between(x - 0.5, x + 0.5).max(0.0));
        k += 1;
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// RPS of a Gaussian forecast against a count via continuity correction.
pub fn rps_gaussian_cc(g: &GaussianForecast, y: u64) -> f64 {
    rps_tabulated(&discretize_gaussian(g), y)
}

/// Interval score for `[lower, upper]` at nominal coverage `1 - alpha`.
pub fn mis(lower: f64, upper: f64, y: f64, alpha: f64) -> Result<f64> {
    if lower > upper {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha}")));
    }
    let mut score = upper - lower;
    if y < lower {
        score += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        score += 2.0 / alpha * (y - upper);
    }
    Ok(score)
}

fn norm_pow(a: &[f64], b: &[f64], exponent: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, z)| (x - z).powi(2)).sum();
    if exponent == 2.0 {
        sq
    } else {
        sq.sqrt().powf(exponent)
    }
}

fn check_exponent(exponent: f64) -> Result<()> {
    if exponent > 0.0 && exponent <= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "energy exponent {exponent} outside (0, 2]"
        )))
    }
}

/// Monte Carlo energy score `E||y - s||^a - 0.5 E||s - s*||^a` from two
/// independent batches of full-hierarchy draws. The first term averages
/// over both batches; the second pairs the batches row by row.
pub fn energy_score(
    batch_a: &[Vec<f64>],
    batch_b: &[Vec<f64>],
    y: &[f64],
    exponent: f64,
) -> Result<f64> {
    check_exponent(exponent)?;
    if batch_a.is_empty() || batch_b.is_empty() {
        return Err(Error::InsufficientSamples {
            needed: 1,
            got: batch_a.len().min(batch_b.len()),
        });
    }
    if let Some(bad) = batch_a.iter().chain(batch_b).find(|s| s.len() != y.len()) {
        return Err(Error::DimensionError {
            expected: y.len(),
            got: bad.len(),
        });
    }
    let n_all = (batch_a.len() + batch_b.len()) as f64;
    let first = batch_a
        .iter()
        .chain(batch_b)
        .map(|s| norm_pow(y, s, exponent))
        .sum::<f64>()
        / n_all;
    let pairs = batch_a.len().min(batch_b.len());
    let second = batch_a
        .iter()
        .zip(batch_b)
        .map(|(s, t)| norm_pow(s, t, exponent))
        .sum::<f64>()
        / pairs as f64;
    Ok(first - 0.5 * second)
}

/// Energy score of a discrete joint given as weighted full-hierarchy
/// vectors, with both expectations computed by enumeration.
pub fn energy_score_weighted(support: &[(Vec<f64>, f64)], y: &[f64], exponent: f64) -> Result<f64> {
    check_exponent(exponent)?;
    if support.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let total: f64 = support.iter().map(|(_, w)| w).sum();
    let first = support
        .iter()
        .map(|(s, w)| w * norm_pow(y, s, exponent))
        .sum::<f64>()
        / total;
    let mut second = 0.0;
    for (s, w) in support {
        for (t, v) in support {
            second += w * v * norm_pow(s, t, exponent);
        }
    }
    Ok(first - 0.5 * second / (total * total))
}

/// `(baseline - method) / ((baseline + method) / 2)`, in `[-2, 2]`.
pub fn skill_score(baseline: f64, method: f64) -> Result<f64> {
    if baseline < 0.0 || method < 0.0 || !baseline.is_finite() || !method.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "skill score needs finite non-negative metrics, got {baseline} and {method}"
        )));
    }
    if baseline + method == 0.0 {
        return Err(Error::UndefinedSkill);
    }
    Ok((baseline - method) / ((baseline + method) / 2.0))
}

/// One metric value in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub series: String,
    pub level: String,
    /// 1-based horizon within the level; 0 for hierarchy-wide metrics.
    pub horizon: usize,
    pub metric: String,
    pub method: String,
    pub value: f64,
}

/// Skill of `method` against `baseline` on one metric and level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillRow {
    pub metric: String,
    pub level: String,
    pub method: String,
    pub baseline: String,
    pub value: f64,
    /// Horizons where both metrics were zero, counted as skill 0.
    pub undefined: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    pub skills: Vec<SkillRow>,
}

/// Label of the row averaging a metric's skill over levels.
pub const AVERAGE_LEVEL: &str = "average";

impl ScoreReport {
    pub fn push(
        &mut self,
        series: &str,
        level: &str,
        horizon: usize,
        metric: &str,
        method: &str,
        value: f64,
    ) {
        self.rows.push(ScoreRow {
            series: series.into(),
            level: level.into(),
            horizon,
            metric: metric.into(),
            method: method.into(),
            value,
        });
    }

    /// Skill scores of every method against `baseline`: per horizon, then
    /// averaged over horizons, then over series. Each metric gets one row
    /// per level in first-seen order plus an average over levels.
    pub fn compute_skills(&mut self, baseline: &str) {
        type Key = (String, String, String, String); // metric, level, series, method
        let mut values: BTreeMap<(Key, usize), f64> = BTreeMap::new();
        let mut metric_order: Vec<String> = Vec::new();
        let mut level_order: Vec<(String, String)> = Vec::new();
        let mut methods: Vec<String> = Vec::new();
        for r in &self.rows {
            if !metric_order.contains(&r.metric) {
                metric_order.push(r.metric.clone());
            }
            let ml = (r.metric.clone(), r.level.clone());
            if !level_order.contains(&ml) {
                level_order.push(ml);
            }
            if r.method != baseline && !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
            values.insert(
                (
                    (
                        r.metric.clone(),
                        r.level.clone(),
                        r.series.clone(),
                        r.method.clone(),
                    ),
                    r.horizon,
                ),
                r.value,
            );
        }

        let mut skills = Vec::new();
        for method in &methods {
            for metric in &metric_order {
                let mut level_means = Vec::new();
                for (_, level) in level_order.iter().filter(|(m, _)| m == metric) {
                    let mut per_series: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
                    let mut undefined = 0;
                    for r in self
                        .rows
                        .iter()
                        .filter(|r| &r.metric == metric && &r.level == level && &r.method == method)
                    {
                        let key = (
                            (
                                metric.clone(),
                                level.clone(),
                                r.series.clone(),
                                baseline.to_string(),
                            ),
                            r.horizon,
                        );
                        let Some(&base) = values.get(&key) else {
                            continue;
                        };
                        let s = match skill_score(base, r.value) {
                            Ok(s) => s,
                            Err(_) => {
                                undefined += 1;
                                0.0
                            }
                        };
                        let e = per_series.entry(r.series.as_str()).or_insert((0.0, 0));
                        e.0 += s;
                        e.1 += 1;
                    }
                    if per_series.is_empty() {
                        continue;
                    }
                    let value = per_series.values().map(|(s, c)| s / *c as f64).sum::<f64>()
                        / per_series.len() as f64;
                    level_means.push(value);
                    skills.push(SkillRow {
                        metric: metric.clone(),
                        level: level.clone(),
                        method: method.clone(),
                        baseline: baseline.into(),
                        value,
                        undefined,
                    });
                }
                if level_means.len() > 1 {
                    skills.push(SkillRow {
                        metric: metric.clone(),
                        level: AVERAGE_LEVEL.into(),
                        method: method.clone(),
                        baseline: baseline.into(),
                        value: level_means.iter().sum::<f64>() / level_means.len() as f64,
                        undefined: 0,
                    });
                }
            }
        }
        self.skills = skills;
    }

    /// Long-format CSV: `series,level,horizon,metric,method,value`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("series,level,horizon,metric,method,value\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.series, r.level, r.horizon, r.metric, r.method, r.value
            ));
        }
        out
    }

    /// Skill table CSV: `metric,level,method,baseline,skill,undefined`.
    pub fn skills_csv(&self) -> String {
        let mut out = String::from("metric,level,method,baseline,skill,undefined\n");
        for s in &self.skills {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.metric, s.level, s.method, s.baseline, s.value, s.undefined
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

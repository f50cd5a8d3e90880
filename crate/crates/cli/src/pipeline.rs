//! `reconcile` and `score` runs driven by an [`ExperimentConfig`].

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reconc_core::pmf::DistSpec;
use reconc_core::scoring::{energy_score, mis, naive_scale, ScoreReport};
use reconc_core::{exact_to_json, samples_to_csv, ForecastSpec, Hierarchy, SamplerDiagnostics};
use serde::Serialize;

use crate::aggregate::level_histories;
use crate::config::{derive_seed, ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::io::{read_forecasts, read_observations, write_file, Observations};
use crate::methods::{node_specs, run_method, JointRepr, MethodResult, NodeSummary};

#[derive(Debug, Serialize)]
struct SummaryDoc<'a> {
    series: &'a str,
    method: &'a str,
    alpha: f64,
    nodes: Vec<NodeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<&'a SamplerDiagnostics>,
}

/// Files written for one series.
#[derive(Debug, Clone)]
pub struct ReconcileOutput {
    pub series: String,
    pub summaries: Vec<NodeSummary>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// File-system-safe form of a series id.
fn path_component(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn summary_json(series: &str, h: &Hierarchy, result: &MethodResult) -> String {
    let diagnostics = match &result.joint {
        JointRepr::Sampled(s) => s.diagnostics.as_ref(),
        _ => None,
    };
    let doc = SummaryDoc {
        series,
        method: result.method.name(),
        alpha: result.alpha,
        nodes: result.summaries(h),
        diagnostics,
    };
    serde_json::to_string_pretty(&doc).expect("summary serializes") + "\n"
}

/// Reconciles every series in the forecast file with `cfg.method` and
/// writes `<output_dir>/<series>/<method>_summary.json` plus the joint
/// (`_joint.json` when exact, `_samples.csv` when sampled).
pub fn run_reconcile(cfg: &ExperimentConfig) -> Result<Vec<ReconcileOutput>> {
    cfg.validate()?;
    let method = cfg
        .method
        .ok_or_else(|| HarnessError::InvalidConfig("reconcile needs `method`".into()))?;
    let path = cfg
        .forecasts
        .as_ref()
        .ok_or_else(|| HarnessError::InvalidConfig("reconcile needs `forecasts`".into()))?;
    let h = cfg.build_hierarchy()?;
    let forecasts = read_forecasts(path)?;
    let seed = cfg.sampler.seed.unwrap_or(0);

    let mut outputs = Vec::new();
    for (index, (series, map)) in forecasts.iter().enumerate() {
        let specs = node_specs(&h, map)?;
        let result = run_method(method, &h, &specs, cfg, derive_seed(seed, index as u64))?;
        let dir = cfg.output_dir.join(path_component(series));
        let mut files = Vec::new();
        let summary_path = dir.join(format!("{method}_summary.json"));
        write_file(&summary_path, &summary_json(series, &h, &result))?;
        files.push(summary_path);
        let mut warnings = Vec::new();
        match &result.joint {
            JointRepr::Exact(j) => {
                let p = dir.join(format!("{method}_joint.json"));
                write_file(&p, &(exact_to_json(j, &h) + "\n"))?;
                files.push(p);
            }
            JointRepr::Sampled(s) => {
                let p = dir.join(format!("{method}_samples.csv"));
                write_file(&p, &samples_to_csv(s, &h))?;
                files.push(p);
                if let Some(d) = &s.diagnostics {
                    warnings.extend(d.warnings.iter().map(|w| format!("{series}: {w}")));
                }
            }
            _ => {}
        }
        outputs.push(ReconcileOutput {
            series: series.clone(),
            summaries: result.summaries(&h),
            files,
            warnings,
        });
    }
    Ok(outputs)
}

/// Built-in forecaster for self-contained runs: every node gets a Poisson
/// whose rate is the training mean of its level at the same position in
/// the cycle.
pub fn empirical_poisson(h: &Hierarchy, histories: &[Vec<f64>]) -> Vec<Option<ForecastSpec>> {
    let mut position = vec![0usize; h.levels().len()];
    (0..h.n())
        .map(|node| {
            let li = h.node_level(node);
            let count = h.levels()[li].count;
            let p = position[li];
            position[li] += 1;
            let hist = &histories[li];
            let len = hist.len();
            let picked: Vec<f64> = (0..len)
                .filter(|&j| count - 1 - (len - 1 - j) % count == p)
                .map(|j| hist[j])
                .collect();
            let rate = if picked.is_empty() {
                hist.iter().sum::<f64>() / len.max(1) as f64 / count as f64
            } else {
                picked.iter().sum::<f64>() / picked.len() as f64
            };
            Some(ForecastSpec::Dist(DistSpec::Poisson { lambda: rate }))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ScoreRun {
    pub report: ScoreReport,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Scores every configured method on the last `test_length` observations
/// of each series and writes `scores.csv`, `skills.csv` and `scores.json`.
pub fn run_score(cfg: &ExperimentConfig) -> Result<ScoreRun> {
    cfg.validate()?;
    let seed = cfg.require_seed("for scoring (energy-score draws)")?;
    let h = cfg.build_hierarchy()?;
    let obs_path = cfg
        .observations
        .as_ref()
        .ok_or_else(|| HarnessError::InvalidConfig("score needs `observations`".into()))?;
    let observations = read_observations(obs_path)?;
    let forecasts = cfg
        .forecasts
        .as_ref()
        .map(|p| read_forecasts(p))
        .transpose()?;
    let test_length = cfg.test_length.unwrap_or(h.m());
    if test_length != h.m() {
        return Err(HarnessError::InvalidConfig(format!(
            "test_length must be one cycle of {} bottom periods, got {test_length}",
            h.m()
        )));
    }
    let mut methods: Vec<Method> = Vec::new();
    for m in std::iter::once(cfg.baseline).chain(cfg.methods.iter().copied()) {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }

    let series_ids: Vec<String> = match &forecasts {
        Some(f) => f.keys().cloned().collect(),
        None => observations.keys().cloned().collect(),
    };
    let mut report = ScoreReport::default();
    let mut warnings = Vec::new();
    for (index, id) in series_ids.iter().enumerate() {
        let specs = forecasts
            .as_ref()
            .map(|f| node_specs(&h, &f[id]))
            .transpose()?;
        score_series(
            cfg,
            &h,
            &observations,
            id,
            specs,
            &methods,
            derive_seed(seed, index as u64),
            &mut report,
            &mut warnings,
        )?;
    }
    report.compute_skills(cfg.baseline.name());

    let files = vec![
        cfg.output_dir.join("scores.csv"),
        cfg.output_dir.join("skills.csv"),
        cfg.output_dir.join("scores.json"),
    ];
    write_file(&files[0], &report.rows_csv())?;
    write_file(&files[1], &report.skills_csv())?;
    write_file(&files[2], &(report.to_json() + "\n"))?;
    Ok(ScoreRun {
        report,
        warnings,
        files,
    })
}

#[allow(clippy::too_many_arguments)]
fn score_series(
    cfg: &ExperimentConfig,
    h: &Hierarchy,
    observations: &Observations,
    id: &str,
    specs: Option<Vec<Option<ForecastSpec>>>,
    methods: &[Method],
    seed: u64,
    report: &mut ScoreReport,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let obs = observations
        .get(id)
        .ok_or_else(|| HarnessError::MissingActuals(id.into()))?;
    let test_length = h.m();
    if obs.len() < test_length {
        return Err(HarnessError::MissingActuals(id.into()));
    }
    let (train, test) = obs.split_at(obs.len() - test_length);
    if train.len() < 2 {
        return Err(HarnessError::SeriesTooShort {
            series: id.into(),
            needed: test_length + 2,
            got: obs.len(),
        });
    }
    let histories = level_histories(id, train, h)?;
    let actual = h.aggregate(test)?;
    let actual_f: Vec<f64> = actual.iter().map(|&v| v as f64).collect();
    let scales: Vec<Option<f64>> = histories
        .iter()
        .zip(h.levels())
        .map(|(hist, level)| match naive_scale(hist) {
            Ok(q) => Some(q),
            Err(e) => {
                warnings.push(format!("{id}: MASE skipped at level {}: {e}", level.name));
                None
            }
        })
        .collect();
    let specs = specs.unwrap_or_else(|| empirical_poisson(h, &histories));

    let mut level_start = vec![usize::MAX; h.levels().len()];
    for node in 0..h.n() {
        let li = h.node_level(node);
        level_start[li] = level_start[li].min(node);
    }

    for (mi, &method) in methods.iter().enumerate() {
        let result = run_method(method, h, &specs, cfg, derive_seed(seed, mi as u64))?;
        if let JointRepr::Sampled(s) = &result.joint {
            if let Some(d) = &s.diagnostics {
                warnings.extend(d.warnings.iter().map(|w| format!("{id} {method}: {w}")));
            }
        }
        let name = method.name();
        for (node, &y) in actual.iter().enumerate() {
            let li = h.node_level(node);
            let level = &h.levels()[li].name;
            let horizon = node - level_start[li] + 1;
            let marginal = &result.marginals[node];
            if let Some(q) = scales[li] {
                // single-step MASE: absolute error over the level's scale
                let value = (y as f64 - marginal.mean()).abs() / q;
                report.push(id, level, horizon, "mase", name, value);
            }
            report.push(id, level, horizon, "rps", name, marginal.rps(y));
            let (l, u) = marginal.interval(cfg.alpha);
            report.push(
                id,
                level,
                horizon,
                "mis",
                name,
                mis(l, u, y as f64, cfg.alpha)?,
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000 + mi as u64));
        let a = result.draw_full(h, cfg.es_batch, &mut rng);
        let b = result.draw_full(h, cfg.es_batch, &mut rng);
        report.push(
            id,
            "hierarchy",
            0,
            "es",
            name,
            energy_score(&a, &b, &actual_f, 2.0)?,
        );
    }
    Ok(())
}

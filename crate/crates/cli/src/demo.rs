//! Built-in worked examples with pass/fail checks against stored values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use reconc_core::{
    bottom_up_exact, correlation, exact_to_json, reconcile_exact, reconcile_mcmc, samples_to_csv,
    summarize, BaseForecastSet, CountPmf, ExactOptions, Hierarchy, MarginalSummary, McmcOptions,
    ReconciledJoint,
};

use crate::error::Result;
use crate::io::write_file;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    MinimalTable2,
    PoissonTable3,
    Hierarchy421,
}

impl DemoName {
    pub const ALL: [DemoName; 3] = [
        DemoName::MinimalTable2,
        DemoName::PoissonTable3,
        DemoName::Hierarchy421,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DemoName::MinimalTable2 => "minimal_table2",
            DemoName::PoissonTable3 => "poisson_table3",
            DemoName::Hierarchy421 => "hierarchy421",
        }
    }
}

impl std::str::FromStr for DemoName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        DemoName::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| format!("unknown demo {s}; expected one of minimal_table2, poisson_table3, hierarchy421"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Within { expected: f64, tol: f64 },
    Below(f64),
    Above(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub rule: Rule,
}

impl Check {
    fn within(label: impl Into<String>, value: f64, expected: f64, tol: f64) -> Self {
        Self {
            label: label.into(),
            value,
            rule: Rule::Within { expected, tol },
        }
    }

    fn below(label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            value,
            rule: Rule::Below(bound),
        }
    }

    pub fn pass(&self) -> bool {
        match self.rule {
            Rule::Within { expected, tol } => (self.value - expected).abs() <= tol,
            Rule::Below(b) => self.value < b,
            Rule::Above(b) => self.value > b,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let target = match self.rule {
            Rule::Within { expected, tol } => format!("target {expected:.6} ± {tol:.2e}"),
            Rule::Below(b) => format!("target < {b:.6}"),
            Rule::Above(b) => format!("target > {b:.6}"),
        };
        format!(
            "{verdict}  {:<36} {:>12.6}  {target}",
            self.label, self.value
        )
    }
}

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub name: &'static str,
    pub tables: String,
    pub checks: Vec<Check>,
    /// Artifacts as (file name, contents).
    pub files: Vec<(String, String)>,
}

impl DemoReport {
    pub fn check_lines(&self) -> String {
        self.checks.iter().map(|c| c.line() + "\n").collect()
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    /// Writes `report.txt` and the artifacts into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let report = format!("{}\n{}", self.tables, self.check_lines());
        for (name, contents) in
            std::iter::once(("report.txt".to_string(), report)).chain(self.files.iter().cloned())
        {
            let p = dir.join(name);
            write_file(&p, &contents)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Kept draws per chain in the sampled demos; four chains give 4e4 draws.
pub const DEMO_DRAWS_PER_CHAIN: usize = 10_000;

pub fn run_demo(name: DemoName, seed: u64) -> Result<DemoReport> {
    match name {
        DemoName::MinimalTable2 => minimal_uniform(),
        DemoName::PoissonTable3 => poisson_reference(seed),
        DemoName::Hierarchy421 => hierarchy421(seed),
    }
}

fn minimal() -> Hierarchy {
    Hierarchy::temporal(2, &[2])
        .and_then(|h| h.with_labels(vec!["Y".into(), "S1".into(), "S2".into()]))
        .expect("valid hierarchy")
}

fn demo_mcmc(seed: u64) -> McmcOptions {
    McmcOptions {
        n_chains: 4,
        n_samples: DEMO_DRAWS_PER_CHAIN,
        seed,
        ..McmcOptions::default()
    }
}

fn summaries_json(h: &Hierarchy, s: &[MarginalSummary]) -> String {
    let doc: Vec<_> = h
        .labels()
        .iter()
        .zip(s)
        .map(|(l, m)| {
            serde_json::json!({
                "label": l,
                "mean": m.mean,
                "variance": m.variance,
                "median": m.median,
                "lower": m.lower,
                "upper": m.upper,
            })
        })
        .collect();
    serde_json::to_string_pretty(&doc).expect("json") + "\n"
}

fn minimal_uniform() -> Result<DemoReport> {
    let h = minimal();
    let uniform = CountPmf::tabulated(vec![0.5, 0.5])?;
    let base = BaseForecastSet::new(
        &h,
        vec![uniform.clone(), uniform],
        vec![Some(CountPmf::tabulated(vec![0.5, 0.2, 0.3])?)],
    )?;
    let opts = ExactOptions::default();
    let bu = bottom_up_exact(&h, &base, &opts)?;
    let rec = reconcile_exact(&h, &base, &opts)?;

    let mut t = String::new();
    writeln!(
        t,
        "minimal hierarchy Y = S1 + S2, uniform bottoms on {{0,1}}, p(Y) = (.5, .2, .3)"
    )
    .unwrap();
    writeln!(
        t,
        "{:>4} {:>4} {:>4} {:>12} {:>12}",
        "S1", "S2", "Y", "bottom-up", "reconciled"
    )
    .unwrap();
    let expected = [5.0 / 12.0, 1.0 / 6.0, 1.0 / 6.0, 0.25];
    let mut checks = Vec::new();
    for ((b, p_bu), ((_, p), want)) in bu.iter().zip(rec.iter().zip(expected)) {
        writeln!(
            t,
            "{:>4} {:>4} {:>4} {:>12.4} {:>12.4}",
            b[0],
            b[1],
            b[0] + b[1],
            p_bu,
            p
        )
        .unwrap();
        checks.push(Check::within(
            format!("P(S1={}, S2={})", b[0], b[1]),
            p,
            want,
            1e-10,
        ));
    }
    let s = summarize(&ReconciledJoint::Exact(rec.clone()), &h, 0.1)?;
    writeln!(t, "\nreconciled p(Y): {}", fmt_probs(&s[0].pmf)).unwrap();
    for (k, want) in [5.0 / 12.0, 1.0 / 3.0, 0.25].into_iter().enumerate() {
        checks.push(Check::within(format!("P(Y={k})"), s[0].pmf[k], want, 1e-10));
    }
    Ok(DemoReport {
        name: DemoName::MinimalTable2.name(),
        tables: t,
        checks,
        files: vec![
            ("joint.json".into(), exact_to_json(&rec, &h) + "\n"),
            ("summary.json".into(), summaries_json(&h, &s)),
        ],
    })
}

fn fmt_probs(p: &[f64]) -> String {
    p.iter()
        .map(|x| format!("{x:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Values of the published table: reconciled means and variances of
/// (S1, S2, Y) and the mean shifts from the base forecasts.
const REF_MEAN: [f64; 3] = [2.4, 4.8, 7.2];
const REF_VAR: [f64; 3] = [1.9, 3.0, 3.6];
const REF_DELTA: [f64; 3] = [0.4, 0.8, -1.8];
const REF_TOL: f64 = 0.1;

fn poisson_reference(seed: u64) -> Result<DemoReport> {
    let h = minimal();
    let rates = [9.0, 2.0, 4.0];
    let base = BaseForecastSet::new(
        &h,
        vec![CountPmf::poisson(rates[1])?, CountPmf::poisson(rates[2])?],
        vec![Some(CountPmf::poisson(rates[0])?)],
    )?;
    let exact = ReconciledJoint::Exact(reconcile_exact(&h, &base, &ExactOptions::default())?);
    let sampled = reconcile_mcmc(&h, &base, &demo_mcmc(seed))?;
    let samples_csv = samples_to_csv(&sampled, &h);
    let mcmc = ReconciledJoint::Sampled(sampled);
    let se = summarize(&exact, &h, 0.1)?;
    let sm = summarize(&mcmc, &h, 0.1)?;

    // table order S1, S2, Y
    let order = [1usize, 2, 0];
    let names = ["S1", "S2", "Y"];
    let mut t = String::new();
    writeln!(
        t,
        "Poisson example: lambda_S1 = 2, lambda_S2 = 4, lambda_Y = 9; MCMC seed {seed}"
    )
    .unwrap();
    writeln!(
        t,
        "{:<4} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "node",
        "base mean",
        "base var",
        "exact mean",
        "exact var",
        "mcmc mean",
        "mcmc var",
        "table mean",
        "table var"
    )
    .unwrap();
    let mut checks = Vec::new();
    for (k, &node) in order.iter().enumerate() {
        writeln!(
            t,
            "{:<4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.1} {:>10.1}",
            names[k],
            rates[node],
            rates[node],
            se[node].mean,
            se[node].variance,
            sm[node].mean,
            sm[node].variance,
            REF_MEAN[k],
            REF_VAR[k]
        )
        .unwrap();
    }
    for (k, &node) in order.iter().enumerate() {
        checks.push(Check::within(
            format!("exact mean {}", names[k]),
            se[node].mean,
            REF_MEAN[k],
            REF_TOL,
        ));
        checks.push(Check::within(
            format!("exact var {}", names[k]),
            se[node].variance,
            REF_VAR[k],
            REF_TOL,
        ));
    }
    for (k, &node) in order.iter().enumerate() {
        let delta = se[node].mean - rates[node];
        checks.push(Check::within(
            format!("mean shift {}", names[k]),
            delta,
            REF_DELTA[k],
            REF_TOL,
        ));
    }
    for (k, &node) in order.iter().enumerate() {
        checks.push(Check::within(
            format!("mcmc mean {} vs exact", names[k]),
            sm[node].mean,
            se[node].mean,
            0.1,
        ));
        checks.push(Check::within(
            format!("mcmc var {} vs exact", names[k]),
            sm[node].variance,
            se[node].variance,
            0.1,
        ));
    }
    for (k, &node) in order.iter().enumerate() {
        checks.push(Check::below(
            format!("var {} below base", names[k]),
            se[node].variance,
            rates[node],
        ));
    }
    let rho = correlation(&exact, &h, 1, 2)?;
    writeln!(
        t,
        "\ncorr(S1, S2): exact {rho:.4}, mcmc {:.4}",
        correlation(&mcmc, &h, 1, 2)?
    )
    .unwrap();
    checks.push(Check::below("corr(S1, S2) exact", rho, 0.0));

    Ok(DemoReport {
        name: DemoName::PoissonTable3.name(),
        tables: t,
        checks,
        files: vec![
            ("summary_exact.json".into(), summaries_json(&h, &se)),
            ("summary_mcmc.json".into(), summaries_json(&h, &sm)),
            ("samples_mcmc.csv".into(), samples_csv),
        ],
    })
}

fn hierarchy421(seed: u64) -> Result<DemoReport> {
    let h = Hierarchy::temporal(4, &[2, 4])?;
    let base = BaseForecastSet::new(
        &h,
        vec![CountPmf::poisson(1.0)?; 4],
        vec![
            Some(CountPmf::poisson(4.0)?),
            Some(CountPmf::poisson(2.0)?),
            Some(CountPmf::poisson(2.0)?),
        ],
    )?;
    let bottom_up = [4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
    let exact = ReconciledJoint::Exact(reconcile_exact(&h, &base, &ExactOptions::default())?);
    let sampled = reconcile_mcmc(&h, &base, &demo_mcmc(seed))?;
    let samples_csv = samples_to_csv(&sampled, &h);
    let rhat = sampled
        .diagnostics
        .as_ref()
        .map(|d| d.split_rhat.clone())
        .unwrap_or_default();
    let mcmc = ReconciledJoint::Sampled(sampled);
    let se = summarize(&exact, &h, 0.1)?;
    let sm = summarize(&mcmc, &h, 0.1)?;

    let mut t = String::new();
    writeln!(t, "4-2-1 hierarchy, bottom Poisson(1), semesters Poisson(2), year Poisson(4); MCMC seed {seed}").unwrap();
    writeln!(
        t,
        "{:<6} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "node", "bottom-up", "exact mean", "exact var", "mcmc mean", "mcmc var"
    )
    .unwrap();
    for i in 0..h.n() {
        writeln!(
            t,
            "{:<6} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            h.labels()[i],
            bottom_up[i],
            se[i].mean,
            se[i].variance,
            sm[i].mean,
            sm[i].variance
        )
        .unwrap();
    }
    writeln!(t, "\nsplit R-hat per bottom node: {}", fmt_probs(&rhat)).unwrap();

    let mut checks = Vec::new();
    for i in 0..h.n() {
        let l = &h.labels()[i];
        checks.push(Check::within(
            format!("mcmc mean {l} vs exact"),
            sm[i].mean,
            se[i].mean,
            0.1,
        ));
        checks.push(Check::within(
            format!("mcmc var {l} vs exact"),
            sm[i].variance,
            se[i].variance,
            0.05 * se[i].variance,
        ));
    }
    for i in 0..h.n() {
        let l = &h.labels()[i];
        checks.push(Check::within(
            format!("mcmc mean {l} vs bottom-up"),
            sm[i].mean,
            bottom_up[i],
            0.1,
        ));
    }
    Ok(DemoReport {
        name: DemoName::Hierarchy421.name(),
        tables: t,
        checks,
        files: vec![
            ("summary_exact.json".into(), summaries_json(&h, &se)),
            ("summary_mcmc.json".into(), summaries_json(&h, &sm)),
            ("samples_mcmc.csv".into(), samples_csv),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_demo_passes() {
        let r = run_demo(DemoName::MinimalTable2, 0).unwrap();
        assert!(r.all_pass(), "{}", r.check_lines());
        assert!(r.tables.contains("0.4167"));
    }

    #[test]
    fn check_rules() {
        assert!(Check::within("a", 1.05, 1.0, 0.1).pass());
        assert!(!Check::within("a", 1.2, 1.0, 0.1).pass());
        assert!(Check::below("b", -0.1, 0.0).pass());
        assert!(Check::within("a", 1.2, 1.0, 0.1).line().starts_with("FAIL"));
        assert_eq!(
            "hierarchy421".parse::<DemoName>().unwrap(),
            DemoName::Hierarchy421
        );
        assert!("nope".parse::<DemoName>().is_err());
    }
}

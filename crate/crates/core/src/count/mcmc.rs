use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BaseForecastSet;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::joint::{SampledJoint, SamplerDiagnostics};
use crate::pmf::CountPmf;

const RHAT_WARN: f64 = 1.1;

/// Metropolis–Hastings settings. One kept draw is taken every `thin`
/// single-coordinate proposals; `burn_in` is counted in the same units as
/// `n_samples` and defaults to `n_samples`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcOptions {
    pub n_chains: usize,
    /// Kept draws per chain.
    pub n_samples: usize,
    pub burn_in: Option<usize>,
    /// Proposals per kept draw; `None` uses `5 * m`.
    pub thin: Option<usize>,
    pub seed: u64,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_samples: 10_000,
            burn_in: None,
            thin: None,
            seed: 0,
        }
    }
}

impl McmcOptions {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_samples)
    }

    pub fn thin_for(&self, m: usize) -> usize {
        self.thin.unwrap_or(5 * m).max(1)
    }
}

/// Log pmf values computed on demand.
#[derive(Clone)]
struct LnPmfCache {
    pmf: CountPmf,
    values: Vec<f64>,
}

impl LnPmfCache {
    fn new(pmf: &CountPmf) -> Self {
        Self {
            pmf: pmf.clone(),
            values: Vec::new(),
        }
    }

    fn get(&mut self, k: u64) -> f64 {
        let k = k as usize;
        while self.values.len() <= k {
            let next = self.values.len() as u64;
            self.values.push(self.pmf.ln_pmf(next));
        }
        self.values[k]
    }
}

struct Target {
    bottom: Vec<LnPmfCache>,
    /// Present uppers: bottom members and evidence.
    uppers: Vec<(Vec<usize>, LnPmfCache)>,
    /// For each bottom coordinate, indices into `uppers` that contain it.
    touching: Vec<Vec<usize>>,
}

impl Target {
    fn new(h: &Hierarchy, base: &BaseForecastSet) -> Self {
        let members = h.upper_members();
        let uppers: Vec<(Vec<usize>, LnPmfCache)> = base
            .present_uppers()
            .map(|(i, p)| (members[i].clone(), LnPmfCache::new(p)))
            .collect();
        let mut touching = vec![Vec::new(); h.m()];
        for (k, (mem, _)) in uppers.iter().enumerate() {
            for &j in mem {
                touching[j].push(k);
            }
        }
        Self {
            bottom: base.bottom.iter().map(LnPmfCache::new).collect(),
            uppers,
            touching,
        }
    }

    fn upper_sums(&self, b: &[u64]) -> Vec<u64> {
        self.uppers
            .iter()
            .map(|(mem, _)| mem.iter().map(|&j| b[j]).sum())
            .collect()
    }

    fn log_density(&mut self, b: &[u64], sums: &[u64]) -> f64 {
        let mut lp = 0.0;
        for (c, &v) in self.bottom.iter_mut().zip(b) {
            lp += c.get(v);
        }
        for ((_, c), &s) in self.uppers.iter_mut().zip(sums) {
            lp += c.get(s);
        }
        lp
    }

    /// Change in log density when coordinate `j` moves from `old` to `new`.
    fn delta(&mut self, j: usize, old: u64, new: u64, sums: &[u64]) -> f64 {
        let mut d = self.bottom[j].get(new) - self.bottom[j].get(old);
        for &k in &self.touching[j] {
            let s_old = sums[k];
            let s_new = s_old + new - old;
            let c = &mut self.uppers[k].1;
            d += c.get(s_new) - c.get(s_old);
        }
        d
    }
}

struct ChainOutput {
    draws: Vec<u64>,
    accepted: usize,
    proposals: usize,
    final_log_density: f64,
}

fn run_chain(
    h: &Hierarchy,
    base: &BaseForecastSet,
    opts: &McmcOptions,
    chain: usize,
) -> ChainOutput {
    let m = h.m();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(chain as u64);
    let mut target = Target::new(h, base);

    let level = (chain as f64 + 0.5) / opts.n_chains as f64;
    let mut state: Vec<u64> = base.bottom.iter().map(|p| p.quantile(level)).collect();
    let mut sums = target.upper_sums(&state);
    let mut lp = target.log_density(&state, &sums);

    let thin = opts.thin_for(m);
    let burn = opts.burn_in();
    let mut draws = Vec::with_capacity(opts.n_samples * m);
    let mut accepted = 0usize;
    let mut proposals = 0usize;

    for sweep in 0..burn + opts.n_samples {
        for _ in 0..thin {
            proposals += 1;
            let j = rng.random_range(0..m);
            let up = rng.random::<bool>();
            let old = state[j];
            if !up && old == 0 {
                continue;
            }
            let new = if up { old + 1 } else { old - 1 };
            let d = target.delta(j, old, new, &sums);
            let accept = if lp.is_finite() {
                d >= 0.0 || rng.random::<f64>().ln() < d
            } else {
                // Outside the support: wander until positive density is found.
                true
            };
            if accept {
                accepted += 1;
                state[j] = new;
                for &k in &target.touching[j] {
                    sums[k] = sums[k] + new - old;
                }
                lp = if lp.is_finite() {
                    lp + d
                } else {
                    target.log_density(&state, &sums)
                };
            }
        }
        if sweep >= burn {
            draws.extend_from_slice(&state);
        }
    }

    ChainOutput {
        draws,
        accepted,
        proposals,
        final_log_density: lp,
    }
}

/// Split-R̂ of one scalar across chains of equal length.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let half = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if half < 2 {
        return f64::NAN;
    }
    let pieces: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[half..2 * half]])
        .collect();
    let k = pieces.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|p| p.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / k;
    let between = n / (k - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
    let within = pieces
        .iter()
        .zip(&means)
        .map(|(p, mu)| p.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / k;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * within + between / n;
    (var_plus / within).sqrt()
}

/// Samples the reconciled bottom pmf, proportional to
/// `prod_j p(b_j) * prod_i p(u_i = A_i b)` over present uppers, with
/// independent random-walk Metropolis chains run in parallel.
///
/// Each proposal moves one uniformly chosen coordinate by ±1; negative
/// proposals are rejected. Chain `c` starts at the `(c + 0.5) / C` quantile
/// of every bottom base forecast and owns a generator on stream `c` of
/// `seed`, so output is deterministic regardless of scheduling.
pub fn reconcile_mcmc(
    h: &Hierarchy,
    base: &BaseForecastSet,
    opts: &McmcOptions,
) -> Result<SampledJoint> {
    if opts.n_samples == 0 || opts.n_chains == 0 {
        return Err(Error::InvalidArgument(
            "n_samples and n_chains must be at least 1".into(),
        ));
    }
    if base.bottom.len() != h.m() || base.upper.len() != h.n_upper() {
        return Err(Error::DimensionError {
            expected: h.n(),
            got: base.bottom.len() + base.upper.len(),
        });
    }

    let outputs: Vec<ChainOutput> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..opts.n_chains)
            .map(|c| scope.spawn(move || run_chain(h, base, opts, c)))
            .collect();
        handles
            .into_iter()
            .map(|hd| hd.join().expect("chain thread panicked"))
            .collect()
    });

    let single_atom = base.bottom.iter().all(|p| p.point_mass_value().is_some());
    for (c, out) in outputs.iter().enumerate() {
        if !out.final_log_density.is_finite() {
            return Err(Error::SamplerStuck(format!(
                "chain {c} never reached a state with positive target density"
            )));
        }
        if out.accepted == 0 && !single_atom {
            return Err(Error::SamplerStuck(format!(
                "chain {c} rejected all {} proposals",
                out.proposals
            )));
        }
    }

    let m = h.m();
    let split_rhat: Vec<f64> = (0..m)
        .map(|j| {
            let chains: Vec<Vec<f64>> = outputs
                .iter()
                .map(|o| o.draws.chunks_exact(m).map(|b| b[j] as f64).collect())
                .collect();
            split_rhat(&chains)
        })
        .collect();
    let warnings = split_rhat
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > RHAT_WARN)
        .map(|(j, r)| {
            format!(
                "split-Rhat {r:.3} > {RHAT_WARN} on bottom node {}",
                h.bottom_labels()[j]
            )
        })
        .collect();
    let diagnostics = SamplerDiagnostics {
        acceptance_rates: outputs
            .iter()
            .map(|o| o.accepted as f64 / o.proposals.max(1) as f64)
            .collect(),
        split_rhat,
        warnings,
    };

    let draws = outputs.into_iter().flat_map(|o| o.draws).collect();
    let mut joint = SampledJoint::new(m, draws, opts.seed);
    joint.diagnostics = Some(diagnostics);
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Hierarchy {
        Hierarchy::temporal(2, &[2]).unwrap()
    }

    #[test]
    fn point_mass_target() {
        let h = minimal();
        let base = BaseForecastSet::new(
            &h,
            vec![CountPmf::point_mass(1), CountPmf::point_mass(2)],
            vec![Some(CountPmf::point_mass(3))],
        )
        .unwrap();
        let opts = McmcOptions {
            n_chains: 2,
            n_samples: 100,
            seed: 3,
            ..Default::default()
        };
        let s = reconcile_mcmc(&h, &base, &opts).unwrap();
        assert_eq!(s.n_draws(), 200);
        assert!(s.rows().all(|b| b == [1, 2]));
    }

    #[test]
    fn deterministic_for_seed() {
        let h = minimal();
        let base = BaseForecastSet::new(
            &h,
            vec![
                CountPmf::poisson(2.0).unwrap(),
                CountPmf::poisson(4.0).unwrap(),
            ],
            vec![Some(CountPmf::poisson(9.0).unwrap())],
        )
        .unwrap();
        let opts = McmcOptions {
            n_samples: 500,
            seed: 42,
            ..Default::default()
        };
        let a = reconcile_mcmc(&h, &base, &opts).unwrap();
        let b = reconcile_mcmc(&h, &base, &opts).unwrap();
        assert_eq!(a, b);
        let c = reconcile_mcmc(&h, &base, &McmcOptions { seed: 43, ..opts }).unwrap();
        assert_ne!(a, c);
        let d = a.diagnostics.unwrap();
        assert_eq!(d.acceptance_rates.len(), 4);
        assert!(d.acceptance_rates.iter().all(|r| *r > 0.2 && *r < 1.0));
    }

    #[test]
    fn rhat_flags_disagreeing_chains() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| 50.0 + (i % 5) as f64).collect();
        assert!(split_rhat(&[a.clone(), b]) > 1.1);
        let r = split_rhat(&[a.clone(), a]);
        assert!((r - 1.0).abs() < 0.05, "{r}");
        assert_eq!(split_rhat(&[vec![2.0; 10], vec![2.0; 10]]), 1.0);
    }

    #[test]
    fn stuck_when_support_unreachable() {
        // Supports {0} and {0,10} with ±1 moves: the chain cannot leave
        // its start, and the target is not a declared point mass.
        let h = minimal();
        let mut gap = vec![0.0; 11];
        gap[0] = 0.5;
        gap[10] = 0.5;
        let base = BaseForecastSet::new(
            &h,
            vec![CountPmf::point_mass(0), CountPmf::tabulated(gap).unwrap()],
            vec![Some(CountPmf::point_mass(0))],
        )
        .unwrap();
        let opts = McmcOptions {
            n_chains: 1,
            n_samples: 50,
            seed: 1,
            ..Default::default()
        };
        assert!(matches!(
            reconcile_mcmc(&h, &base, &opts),
            Err(Error::SamplerStuck(_))
        ));
    }
}

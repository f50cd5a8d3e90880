use super::BaseForecastSet;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::joint::ExactJoint;
use crate::pmf::{CountPmf, DEFAULT_EPSILON};

/// Largest product grid enumerated before giving up.
pub const DEFAULT_CELL_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactOptions {
    /// Tail mass dropped from each bottom pmf.
    pub epsilon: f64,
    pub cell_cap: u128,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Probabilistic bottom-up joint over the truncated product support,
/// renormalized.
pub fn bottom_up_exact(
    h: &Hierarchy,
    base: &BaseForecastSet,
    opts: &ExactOptions,
) -> Result<ExactJoint> {
    if base.bottom.len() != h.m() {
        return Err(Error::DimensionError {
            expected: h.m(),
            got: base.bottom.len(),
        });
    }
    if !(opts.epsilon > 0.0 && opts.epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {}", opts.epsilon)));
    }
    let tables: Vec<Vec<f64>> = base
        .bottom
        .iter()
        .map(|p| p.table(p.quantile_truncate(opts.epsilon)))
        .collect();
    let cells = tables
        .iter()
        .try_fold(1u128, |acc, t| acc.checked_mul(t.len() as u128))
        .unwrap_or(u128::MAX);
    if cells > opts.cell_cap {
        return Err(Error::SupportTooLarge {
            cells,
            cap: opts.cell_cap,
        });
    }

    let mut probs = vec![1.0];
    for t in &tables {
        probs = probs
            .iter()
            .flat_map(|&p| t.iter().map(move |&q| p * q))
            .collect();
    }
    let dims = tables.iter().map(Vec::len).collect();
    let mut joint = ExactJoint::new(dims, probs);
    joint.normalize();
    Ok(joint)
}

/// Visits every grid cell in order together with the value of one upper
/// node (sum of the bottom coordinates in `members`).
fn for_each_upper_value(dims: &[usize], members: &[bool], mut f: impl FnMut(usize, u64)) {
    let total: usize = dims.iter().product();
    let mut current = vec![0usize; dims.len()];
    let mut sum = 0u64;
    for idx in 0..total {
        f(idx, sum);
        let mut j = dims.len();
        while j > 0 {
            j -= 1;
            current[j] += 1;
            if members[j] {
                sum += 1;
            }
            if current[j] < dims[j] {
                break;
            }
            if members[j] {
                sum -= current[j] as u64;
            }
            current[j] = 0;
        }
    }
}

/// Virtual-evidence update on upper node `upper`: each atom's weight is
/// multiplied by the evidence mass at `A_upper b`, then renormalized.
pub fn condition_on_upper(
    joint: &ExactJoint,
    h: &Hierarchy,
    upper: usize,
    evidence: &CountPmf,
) -> Result<ExactJoint> {
    if joint.m() != h.m() {
        return Err(Error::DimensionError {
            expected: h.m(),
            got: joint.m(),
        });
    }
    if upper >= h.n_upper() {
        return Err(Error::InvalidArgument(format!("no upper node {upper}")));
    }
    let row = &h.a_rows()[upper];
    let members: Vec<bool> = row.iter().map(|&v| v == 1).collect();
    let max_sum: usize = joint
        .dims()
        .iter()
        .zip(&members)
        .filter(|(_, &mem)| mem)
        .map(|(&d, _)| d - 1)
        .sum();
    let lik = evidence.table(max_sum as u64);

    let mut out = joint.clone();
    let probs = out.probabilities_mut();
    for_each_upper_value(joint.dims(), &members, |idx, sum| {
        probs[idx] *= lik[sum as usize];
    });
    let total = out.normalize();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::IncompatibleEvidence(upper));
    }
    Ok(out)
}

/// Bottom-up joint followed by sequential virtual-evidence updates for
/// every present upper forecast, in row order of `A`.
pub fn reconcile_exact(
    h: &Hierarchy,
    base: &BaseForecastSet,
    opts: &ExactOptions,
) -> Result<ExactJoint> {
    let mut joint = bottom_up_exact(h, base, opts)?;
    for (i, evidence) in base.present_uppers() {
        joint = condition_on_upper(&joint, h, i, evidence)?;
    }
    Ok(joint)
}

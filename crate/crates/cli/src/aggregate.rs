//! Temporal aggregation of observed series.

use reconc_core::Hierarchy;

use crate::error::{HarnessError, Result};

/// Block sums of one aggregation level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSeries {
    pub factor: usize,
    pub values: Vec<u64>,
}

/// Non-overlapping block sums for each factor, coarsest first and ending
/// with the bottom series (factor 1). Leading observations that do not
/// fill a block of the largest factor are dropped so that every level ends
/// at the last observation.
pub fn temporal_aggregate(
    series: &str,
    obs: &[u64],
    factors: &[usize],
) -> Result<Vec<LevelSeries>> {
    let mut fs: Vec<usize> = factors.iter().copied().filter(|&f| f > 1).collect();
    fs.sort_unstable_by(|a, b| b.cmp(a));
    fs.dedup();
    let top = fs.first().copied().unwrap_or(1);
    if obs.len() < top {
        return Err(HarnessError::SeriesTooShort {
            series: series.into(),
            needed: top,
            got: obs.len(),
        });
    }
    let trimmed = &obs[obs.len() % top..];
    Ok(fs
        .into_iter()
        .chain(std::iter::once(1))
        .map(|factor| LevelSeries {
            factor,
            values: trimmed.chunks(factor).map(|c| c.iter().sum()).collect(),
        })
        .collect())
}

/// Per-level history of a series, indexed like `h.levels()`.
///
/// Temporal hierarchies use [`temporal_aggregate`]. Other hierarchies cut
/// the series into whole cycles of `m` bottom periods (dropping the
/// leading remainder) and concatenate each level's node values cycle by
/// cycle.
pub fn level_histories(series: &str, obs: &[u64], h: &Hierarchy) -> Result<Vec<Vec<f64>>> {
    if let Some(spec) = h.temporal_spec() {
        let levels = temporal_aggregate(series, obs, &spec.factors)?;
        return Ok(h
            .levels()
            .iter()
            .map(|l| {
                levels
                    .iter()
                    .find(|s| s.factor == l.span)
                    .map(|s| s.values.iter().map(|&v| v as f64).collect())
                    .unwrap_or_default()
            })
            .collect());
    }
    let m = h.m();
    if obs.len() < m {
        return Err(HarnessError::SeriesTooShort {
            series: series.into(),
            needed: m,
            got: obs.len(),
        });
    }
    let mut out = vec![Vec::new(); h.levels().len()];
    for cycle in obs[obs.len() % m..].chunks(m) {
        let y = h.aggregate(cycle)?;
        for (node, v) in y.into_iter().enumerate() {
            out[h.node_level(node)].push(v as f64);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn values(levels: &[LevelSeries]) -> Vec<(usize, Vec<u64>)> {
        levels
            .iter()
            .map(|l| (l.factor, l.values.clone()))
            .collect()
    }

    #[test]
    fn quarterly_example() {
        let out = temporal_aggregate("q", &[1, 2, 3, 4], &[2, 4]).unwrap();
        assert_eq!(
            values(&out),
            vec![(4, vec![10]), (2, vec![3, 7]), (1, vec![1, 2, 3, 4])]
        );
    }

    #[test]
    fn monthly_to_annual() {
        let obs: Vec<u64> = (1..=24).collect();
        let out = temporal_aggregate("m", &obs, &[12]).unwrap();
        assert_eq!(out[0].values, vec![78, 222]);
    }

    #[test]
    fn leading_remainder_is_trimmed() {
        let obs: Vec<u64> = (0..25).collect();
        let out = temporal_aggregate("m", &obs, &[12]).unwrap();
        assert_eq!(out[0].values.len(), 2);
        assert_eq!(out[1].values[0], 1);
        assert_eq!(out[0].values[0], (1..=12).sum::<u64>());
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            temporal_aggregate("s", &[1, 2, 3], &[4]),
            Err(HarnessError::SeriesTooShort {
                needed: 4,
                got: 3,
                ..
            })
        ));
    }

    #[test]
    fn histories_for_explicit_matrix() {
        let h = Hierarchy::from_a_matrix(
            3,
            vec![vec![1, 1, 1], vec![1, 1, 0]],
            ["t", "p", "a", "b", "c"].map(String::from).to_vec(),
        )
        .unwrap();
        let hist = level_histories("s", &[9, 1, 2, 3, 4, 5, 6], &h).unwrap();
        assert_eq!(hist[0], vec![6.0, 15.0]);
        assert_eq!(hist[1], vec![3.0, 9.0]);
        assert_eq!(hist[2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);

        let t = Hierarchy::temporal(4, &[2, 4]).unwrap();
        let hist = level_histories("s", &[1, 2, 3, 4], &t).unwrap();
        assert_eq!(
            hist,
            vec![vec![10.0], vec![3.0, 7.0], vec![1.0, 2.0, 3.0, 4.0]]
        );
    }
}

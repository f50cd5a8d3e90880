//! Hierarchy structure: the aggregation matrix `A`, the summing matrix
//! `S = [A; I]`, node labels and level metadata.
//!
//! Nodes are ordered upper levels first (coarsest level first, chronological
//! within a level), then the bottom nodes. A full vector `y` is therefore
//! `[u; b]` with `u = A b`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

/// Non-negative integer vector over nodes (length `n`) or bottom nodes
/// (length `m`).
pub type CountVector = Vec<u64>;

/// A group of nodes sharing the same aggregation span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    /// Number of nodes in this level.
    pub count: usize,
    /// Number of bottom nodes each node of this level sums.
    pub span: usize,
}

/// Temporal parameters, kept when the hierarchy was built from a bottom
/// period count and aggregation factors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSpec {
    pub bottom: usize,
    /// Aggregation factors sorted ascending, bottom factor 1 excluded.
    pub factors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    m: usize,
    a: Vec<Vec<u8>>,
    labels: Vec<String>,
    levels: Vec<Level>,
    node_level: Vec<usize>,
    temporal: Option<TemporalSpec>,
}

/// JSON document form: `{"m": int, "labels": [...], "A": [[0/1,...],...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyDoc {
    pub m: usize,
    pub labels: Vec<String>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<u8>>,
}

impl Hierarchy {
    /// Builds a hierarchy from an explicit aggregation matrix.
    ///
    /// Levels are derived by grouping consecutive upper rows that sum the
    /// same number of bottom nodes.
    pub fn from_a_matrix(m: usize, a: Vec<Vec<u8>>, labels: Vec<String>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidHierarchy("no bottom nodes".into()));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidHierarchy(format!(
                    "row {i} of A has {} columns, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|&v| v > 1) {
                return Err(Error::InvalidHierarchy(format!(
                    "row {i} of A has entries outside {{0,1}}"
                )));
            }
            if !row.contains(&1) {
                return Err(Error::InvalidHierarchy(format!("row {i} of A is all zero")));
            }
        }
        let n = a.len() + m;
        if labels.len() != n {
            return Err(Error::InvalidHierarchy(format!(
                "{} labels for {n} nodes",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidHierarchy(format!("duplicate label {l}")));
            }
        }

        let mut levels: Vec<Level> = Vec::new();
        let mut node_level = Vec::with_capacity(n);
        for row in &a {
            let span = row.iter().filter(|&&v| v == 1).count();
            match levels.last_mut() {
                Some(last) if last.span == span => last.count += 1,
                _ => levels.push(Level {
                    name: format!("sum{span}"),
                    count: 1,
                    span,
                }),
            }
            node_level.push(levels.len() - 1);
        }
        levels.push(Level {
            name: "bottom".into(),
            count: m,
            span: 1,
        });
        node_level.extend(std::iter::repeat_n(levels.len() - 1, m));

        Ok(Self {
            m,
            a,
            labels,
            levels,
            node_level,
            temporal: None,
        })
    }

    /// Temporal hierarchy over `bottom` periods. Each factor `k` adds a level
    /// of `bottom / k` nodes summing consecutive disjoint blocks of `k`
    /// bottom periods. Labels are `k{factor}_{index}` with 1-based indices.
    pub fn temporal(bottom: usize, factors: &[usize]) -> Result<Self> {
        if bottom == 0 {
            return Err(Error::InvalidAggregation(
                "bottom period count is zero".into(),
            ));
        }
        let mut sorted = factors.to_vec();
        sorted.sort_unstable();
        let mut prev = 1;
        for &k in &sorted {
            if k == 0 {
                return Err(Error::InvalidAggregation("factor 0".into()));
            }
            if k == prev {
                return Err(Error::DuplicateLevel(format!(
                    "factor {k} given more than once"
                )));
            }
            if !bottom.is_multiple_of(k) {
                return Err(Error::InvalidAggregation(format!(
                    "factor {k} does not divide {bottom}"
                )));
            }
            prev = k;
        }

        let mut a = Vec::new();
        let mut labels = Vec::new();
        for &k in sorted.iter().rev() {
            for block in 0..bottom / k {
                let mut row = vec![0u8; bottom];
                row[block * k..(block + 1) * k].fill(1);
                a.push(row);
                labels.push(format!("k{k}_{}", block + 1));
            }
        }
        labels.extend((1..=bottom).map(|j| format!("k1_{j}")));

        let mut h = Self::from_a_matrix(bottom, a, labels)?;
        h.levels = sorted
            .iter()
            .rev()
            .map(|&k| Level {
                name: format!("k{k}"),
                count: bottom / k,
                span: k,
            })
            .chain(std::iter::once(Level {
                name: "k1".into(),
                count: bottom,
                span: 1,
            }))
            .collect();
        h.node_level = h
            .levels
            .iter()
            .enumerate()
            .flat_map(|(li, l)| std::iter::repeat_n(li, l.count))
            .collect();
        h.temporal = Some(TemporalSpec {
            bottom,
            factors: sorted,
        });
        Ok(h)
    }

    /// Replaces node labels, keeping the structure.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        let rebuilt = Self::from_a_matrix(self.m, self.a.clone(), labels)?;
        self.labels = rebuilt.labels;
        Ok(self)
    }

    pub fn from_doc(doc: HierarchyDoc) -> Result<Self> {
        Self::from_a_matrix(doc.m, doc.a, doc.labels)
    }

    pub fn to_doc(&self) -> HierarchyDoc {
        HierarchyDoc {
            m: self.m,
            labels: self.labels.clone(),
            a: self.a.clone(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: HierarchyDoc = serde_json::from_str(s)
            .map_err(|e| Error::InvalidHierarchy(format!("bad hierarchy JSON: {e}")))?;
        Self::from_doc(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("hierarchy serializes")
    }

    /// Number of bottom nodes.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Total number of nodes.
    pub fn n(&self) -> usize {
        self.a.len() + self.m
    }

    pub fn n_upper(&self) -> usize {
        self.a.len()
    }

    pub fn a_rows(&self) -> &[Vec<u8>] {
        &self.a
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn bottom_labels(&self) -> &[String] {
        &self.labels[self.n_upper()..]
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    /// Index into [`Hierarchy::levels`] of each node.
    pub fn node_level(&self, node: usize) -> usize {
        self.node_level[node]
    }

    pub fn temporal_spec(&self) -> Option<&TemporalSpec> {
        self.temporal.as_ref()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Number of bottom nodes summed by `node` (1 for bottom nodes).
    pub fn span(&self, node: usize) -> usize {
        if node < self.n_upper() {
            self.a[node].iter().filter(|&&v| v == 1).count()
        } else {
            1
        }
    }

    /// Bottom indices aggregated by each upper row.
    pub fn upper_members(&self) -> Vec<Vec<usize>> {
        self.a
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }

    /// The `(n - m) x m` aggregation matrix as reals.
    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_upper(), self.m, |i, j| f64::from(self.a[i][j]))
    }

    /// The `n x m` summing matrix `[A; I_m]`.
    pub fn s_matrix(&self) -> DMatrix<f64> {
        let nu = self.n_upper();
        DMatrix::from_fn(self.n(), self.m, |i, j| {
            if i < nu {
                f64::from(self.a[i][j])
            } else if i - nu == j {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Value of upper node `i` for bottom vector `b`.
    pub fn upper_value(&self, i: usize, b: &[u64]) -> u64 {
        self.a[i]
            .iter()
            .zip(b)
            .filter(|(&w, _)| w == 1)
            .map(|(_, &v)| v)
            .sum()
    }

    /// `y = S b`.
    pub fn aggregate(&self, b: &[u64]) -> Result<CountVector> {
        self.check_len(b.len(), self.m)?;
        let mut y: Vec<u64> = (0..self.n_upper())
            .map(|i| self.upper_value(i, b))
            .collect();
        y.extend_from_slice(b);
        Ok(y)
    }

    /// Real-valued `y = S b`.
    pub fn aggregate_real(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len(), self.m)?;
        let mut y: Vec<f64> = self
            .a
            .iter()
            .map(|row| row.iter().zip(b).map(|(&w, &v)| f64::from(w) * v).sum())
            .collect();
        y.extend_from_slice(b);
        Ok(y)
    }

    /// True iff the upper block of `y` equals `A` times its bottom block.
    pub fn is_coherent(&self, y: &[u64]) -> Result<bool> {
        self.check_len(y.len(), self.n())?;
        let (u, b) = y.split_at(self.n_upper());
        Ok(u.iter()
            .enumerate()
            .all(|(i, &ui)| ui == self.upper_value(i, b)))
    }

    /// Real-valued coherence within an absolute tolerance.
    pub fn is_coherent_real(&self, y: &[f64], tol: f64) -> Result<bool> {
        self.check_len(y.len(), self.n())?;
        let (_, b) = y.split_at(self.n_upper());
        let implied = self.aggregate_real(b)?;
        Ok(y.iter().zip(&implied).all(|(x, z)| (x - z).abs() <= tol))
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::DimensionError { expected, got })
        }
    }
}

//! Coherent joint distributions over bottom vectors. Upper values are
//! always implied by `A b`, so every atom or draw is coherent.

use rand::Rng;

use crate::hierarchy::Hierarchy;

/// Exact pmf tabulated over the product grid `0..=dims[j]-1` of each bottom
/// node, stored row-major with the last bottom node varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJoint {
    dims: Vec<usize>,
    probs: Vec<f64>,
}

impl ExactJoint {
    pub(crate) fn new(dims: Vec<usize>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), probs.len());
        Self { dims, probs }
    }

    /// Number of support values per bottom node.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn m(&self) -> usize {
        self.dims.len()
    }

    /// Probabilities in grid order, including zero cells.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub(crate) fn probabilities_mut(&mut self) -> &mut [f64] {
        &mut self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Bottom vector at grid position `idx`.
    pub fn atom(&self, mut idx: usize) -> Vec<u64> {
        let mut b = vec![0u64; self.dims.len()];
        for (j, &d) in self.dims.iter().enumerate().rev() {
            b[j] = (idx % d) as u64;
            idx /= d;
        }
        b
    }

    /// Grid position of bottom vector `b`, if inside the grid.
    pub fn index_of(&self, b: &[u64]) -> Option<usize> {
        if b.len() != self.dims.len() {
            return None;
        }
        let mut idx = 0usize;
        for (&v, &d) in b.iter().zip(&self.dims) {
            if v as usize >= d {
                return None;
            }
            idx = idx * d + v as usize;
        }
        Some(idx)
    }

    pub fn prob_of(&self, b: &[u64]) -> f64 {
        self.index_of(b).map_or(0.0, |i| self.probs[i])
    }

    /// Atoms in grid order paired with their probability.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        GridIter::new(&self.dims).zip(self.probs.iter().copied())
    }

    /// Atoms with strictly positive probability.
    pub fn support(&self) -> impl Iterator<Item = (Vec<u64>, f64)> + '_ {
        self.iter().filter(|(_, p)| *p > 0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `n` independent draws by inversion of the cumulative table.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<u64>> {
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cum.push(acc);
        }
        (0..n)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                self.atom(idx)
            })
            .collect()
    }

    pub(crate) fn normalize(&mut self) -> f64 {
        let total = self.total_mass();
        if total > 0.0 {
            self.probs.iter_mut().for_each(|p| *p /= total);
        }
        total
    }
}

/// Odometer over a product grid, last coordinate fastest.
pub(crate) struct GridIter {
    dims: Vec<usize>,
    current: Vec<u64>,
    done: bool,
}

impl GridIter {
    pub(crate) fn new(dims: &[usize]) -> Self {
        Self {
            dims: dims.to_vec(),
            current: vec![0; dims.len()],
            done: dims.contains(&0),
        }
    }
}

impl Iterator for GridIter {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let mut j = self.dims.len();
        loop {
            if j == 0 {
                self.done = true;
                break;
            }
            j -= 1;
            self.current[j] += 1;
            if (self.current[j] as usize) < self.dims[j] {
                break;
            }
            self.current[j] = 0;
        }
        Some(out)
    }
}

/// Per-chain Metropolis–Hastings diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerDiagnostics {
    pub acceptance_rates: Vec<f64>,
    /// Split-R̂ per bottom coordinate.
    pub split_rhat: Vec<f64>,
    /// Non-fatal warnings, e.g. R̂ above 1.1.
    pub warnings: Vec<String>,
}

/// Bottom vectors drawn from a coherent joint, one row per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledJoint {
    m: usize,
    draws: Vec<u64>,
    pub seed: u64,
    pub diagnostics: Option<SamplerDiagnostics>,
}

impl SampledJoint {
    pub fn new(m: usize, draws: Vec<u64>, seed: u64) -> Self {
        assert!(m > 0 && draws.len().is_multiple_of(m), "draw matrix shape");
        Self {
            m,
            draws,
            seed,
            diagnostics: None,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len() / self.m
    }

    pub fn draw(&self, i: usize) -> &[u64] {
        &self.draws[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u64]> {
        self.draws.chunks_exact(self.m)
    }
}

/// Coherent joint distribution produced by a reconciler.
#[derive(Debug, Clone, PartialEq)]
pub enum ReconciledJoint {
    Exact(ExactJoint),
    Sampled(SampledJoint),
}

impl ReconciledJoint {
    pub fn m(&self) -> usize {
        match self {
            Self::Exact(e) => e.m(),
            Self::Sampled(s) => s.m(),
        }
    }

    pub fn as_exact(&self) -> Option<&ExactJoint> {
        match self {
            Self::Exact(e) => Some(e),
            Self::Sampled(_) => None,
        }
    }

    pub fn as_sampled(&self) -> Option<&SampledJoint> {
        match self {
            Self::Sampled(s) => Some(s),
            Self::Exact(_) => None,
        }
    }

    /// Weighted full-hierarchy vectors: atoms with their probabilities, or
    /// draws with equal weight.
    pub fn weighted_full_vectors(&self, h: &Hierarchy) -> Vec<(Vec<u64>, f64)> {
        match self {
            Self::Exact(e) => e
                .support()
                .map(|(b, p)| (h.aggregate(&b).expect("bottom length"), p))
                .collect(),
            Self::Sampled(s) => {
                let w = 1.0 / s.n_draws() as f64;
                s.rows()
                    .map(|b| (h.aggregate(b).expect("bottom length"), w))
                    .collect()
            }
        }
    }
}

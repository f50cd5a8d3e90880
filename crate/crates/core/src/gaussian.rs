//! minT reconciliation of Gaussian base forecasts with diagonal `W`, and
//! the truncated-Gaussian count baseline.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::joint::SampledJoint;
use crate::pmf::GaussianForecast;

/// Choice of the diagonal error covariance `W`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    /// Base-forecast variances, one per node.
    HierarchyVariance(Vec<f64>),
    /// Each node's variance equals the number of bottom nodes it sums.
    StructuralScaling,
}

impl CovarianceSpec {
    /// Hierarchy variance built from the base forecasts themselves.
    pub fn hierarchy_variance(base: &[GaussianForecast]) -> Self {
        Self::HierarchyVariance(base.iter().map(|g| g.variance).collect())
    }
}

/// Diagonal of `W`.
pub fn build_w(h: &Hierarchy, spec: &CovarianceSpec) -> Result<DVector<f64>> {
    match spec {
        CovarianceSpec::HierarchyVariance(vars) => {
            if vars.len() != h.n() {
                return Err(Error::DimensionError {
                    expected: h.n(),
                    got: vars.len(),
                });
            }
            if let Some(v) = vars.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "variance {v} is not positive"
                )));
            }
            Ok(DVector::from_column_slice(vars))
        }
        CovarianceSpec::StructuralScaling => Ok(DVector::from_iterator(
            h.n(),
            (0..h.n()).map(|i| h.span(i) as f64),
        )),
    }
}

fn check_w(h: &Hierarchy, w: &DVector<f64>) -> Result<()> {
    if w.len() != h.n() {
        return Err(Error::DimensionError {
            expected: h.n(),
            got: w.len(),
        });
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::NumericalError(
            "W has a non-positive diagonal entry".into(),
        ));
    }
    Ok(())
}

/// Cholesky factor of `S' W^-1 S`.
fn precision_factor(h: &Hierarchy, w: &DVector<f64>) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    check_w(h, w)?;
    let s = h.s_matrix();
    let winv_s = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] / w[i]);
    let precision = s.transpose() * &winv_s;
    let chol = Cholesky::new(precision)
        .ok_or_else(|| Error::NumericalError("S' W^-1 S is not positive definite".into()))?;
    Ok((winv_s, chol))
}

/// `G = (S' W^-1 S)^-1 S' W^-1`, shape `m x n`.
pub fn mint_g(h: &Hierarchy, w: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (winv_s, chol) = precision_factor(h, w)?;
    Ok(chol.solve(&winv_s.transpose()))
}

/// Reconciled Gaussian over all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianReconciled {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    m: usize,
}

impl GaussianReconciled {
    pub fn bottom_mean(&self) -> DVector<f64> {
        self.mean
            .rows(self.mean.len() - self.m, self.m)
            .into_owned()
    }

    pub fn bottom_covariance(&self) -> DMatrix<f64> {
        let off = self.mean.len() - self.m;
        self.covariance
            .view((off, off), (self.m, self.m))
            .into_owned()
    }

    /// Marginal of one node. Variance is clamped at zero against rounding.
    pub fn marginal(&self, node: usize) -> (f64, f64) {
        (self.mean[node], self.covariance[(node, node)].max(0.0))
    }

    /// Draws from the joint: bottom vectors from the multivariate normal,
    /// aggregated to full-hierarchy vectors.
    pub fn sample_full<R: Rng + ?Sized>(
        &self,
        h: &Hierarchy,
        n: usize,
        rng: &mut R,
    ) -> Vec<Vec<f64>> {
        let cov = self.bottom_covariance();
        let scale = cov.diagonal().max().max(1e-300);
        let chol = (0..8)
            .find_map(|k| {
                let jitter = if k == 0 {
                    0.0
                } else {
                    scale * 1e-12 * 10f64.powi(k)
                };
                Cholesky::new(&cov + DMatrix::identity(self.m, self.m) * jitter)
            })
            .expect("bottom covariance is positive semidefinite");
        let l = chol.l();
        let mu = self.bottom_mean();
        (0..n)
            .map(|_| {
                let z = DVector::from_fn(self.m, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b = &mu + &l * z;
                h.aggregate_real(b.as_slice()).expect("bottom length")
            })
            .collect()
    }
}

/// minT reconciliation: mean `S G y_hat`, covariance `S (S' W^-1 S)^-1 S'`.
pub fn reconcile_gaussian(
    h: &Hierarchy,
    base: &[GaussianForecast],
    spec: &CovarianceSpec,
) -> Result<GaussianReconciled> {
    if base.len() < h.n() {
        return Err(Error::MissingForecast(h.labels()[base.len()].clone()));
    }
    if base.len() > h.n() {
        return Err(Error::DimensionError {
            expected: h.n(),
            got: base.len(),
        });
    }
    let w = build_w(h, spec)?;
    let (winv_s, chol) = precision_factor(h, &w)?;
    let s = h.s_matrix();
    let y_hat = DVector::from_iterator(h.n(), base.iter().map(|g| g.mean));
    let bottom = chol.solve(&(winv_s.transpose() * y_hat));
    let bottom_cov = chol.inverse();
    let covariance = &s * bottom_cov * s.transpose();
    Ok(GaussianReconciled {
        mean: &s * bottom,
        covariance: (&covariance + covariance.transpose()) * 0.5,
        m: h.m(),
    })
}

/// Draw from `N(mean, sd^2)` truncated to `[0, inf)`.
fn truncated_normal_draw<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd <= 0.0 {
        return mean.max(0.0);
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    // Mass above zero is Phi(mean / sd); sample the upper tail by inversion
    // of the mirrored variable.
    let upper_mass = std.cdf(mean / sd);
    if upper_mass < 1e-300 {
        // Far tail: truncated normal is close to an exponential at zero.
        let e: f64 = rng.sample(Exp1);
        return e * sd * sd / mean.abs();
    }
    let v: f64 = rng.random::<f64>() * upper_mass;
    let w = std.inverse_cdf(v.max(f64::MIN_POSITIVE));
    (mean - sd * w).max(0.0)
}

/// Truncated-Gaussian baseline: each bottom marginal of the minT result is
/// truncated at zero and sampled independently, draws are rounded to the
/// nearest integer, and uppers follow by summation.
pub fn reconcile_truncated(
    h: &Hierarchy,
    base: &[GaussianForecast],
    spec: &CovarianceSpec,
    n_samples: usize,
    seed: u64,
) -> Result<SampledJoint> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let rec = reconcile_gaussian(h, base, spec)?;
    let off = h.n_upper();
    let marginals: Vec<(f64, f64)> = (0..h.m())
        .map(|j| {
            let (mu, var) = rec.marginal(off + j);
            (mu, var.sqrt())
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(n_samples * h.m());
    for _ in 0..n_samples {
        for &(mu, sd) in &marginals {
            draws.push(truncated_normal_draw(mu, sd, &mut rng).round() as u64);
        }
    }
    Ok(SampledJoint::new(h.m(), draws, seed))
}

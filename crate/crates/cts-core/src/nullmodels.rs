//! Gaussian random tensor null model and its analytic spectrum.
//!
//! The null tensor has i.i.d. normal(0, sigma_g^2) entries. Its stage-two
//! spectrum at gamma = 1 follows a quarter-circle law on
//! [0, 2 sigma_g D sqrt(N)]: each slice is an independent Gaussian matrix
//! whose k-th singular value concentrates near the k-th quarter-circle
//! quantile, and the stage-two SVD of the near-constant D x D matrix
//! multiplies that value by D. Comparisons use the normalized CDF of the
//! law, which is what a Kolmogorov-Smirnov distance needs.

use nalgebra::DMatrix;
use ndarray::Array4;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::linalg::{fix_signs, singular_values_sorted, svd_sorted};
use crate::rng::gaussian_entry;
use crate::spectra::{stage_two, SingularVectorField, TensorSpectrum};

/// Default memory cap for dense materialization: 1 GiB.
pub const DEFAULT_TENSOR_CAP_BYTES: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTensorSpec {
    pub n: usize,
    pub dim: usize,
    pub sigma_g: f64,
    pub seed: u64,
}

impl GaussianTensorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.dim < 2 {
            return Err(CoreError::InvalidParam("need n >= 2 and dim >= 2".into()));
        }
        if !(self.sigma_g > 0.0) {
            return Err(CoreError::InvalidParam("sigma_g must be positive".into()));
        }
        Ok(())
    }

    fn dense_bytes(&self) -> usize {
        self.n * self.n * self.dim * self.dim * std::mem::size_of::<f64>()
    }
}

/// A Gaussian random correlation tensor, either materialized or generated
/// on demand from the counter-based keyed sampler. Both forms produce
/// bit-identical entries.
#[derive(Debug, Clone)]
pub struct GaussianTensor {
    spec: GaussianTensorSpec,
    data: Option<Array4<f64>>,
}

impl GaussianTensor {
    /// Lazy handle: slices are generated on demand; nothing is stored.
    pub fn lazy(spec: GaussianTensorSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, data: None })
    }

    pub fn spec(&self) -> &GaussianTensorSpec {
        &self.spec
    }

    pub fn is_dense(&self) -> bool {
        self.data.is_some()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        match &self.data {
            Some(data) => data[(i, j, alpha, beta)],
            None => self.spec.sigma_g * gaussian_entry(self.spec.seed, i, j, alpha, beta),
        }
    }

    /// Materialize the N x N slice for one component pair.
    pub fn slice_matrix(&self, alpha: usize, beta: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.spec.n, self.spec.n, |i, j| self.entry(i, j, alpha, beta))
    }
}

/// Materialize the full dense tensor, indexed (i, j, alpha, beta).
/// Fails when the allocation would exceed `cap_bytes`
/// (default [`DEFAULT_TENSOR_CAP_BYTES`]).
pub fn sample_gaussian_tensor(
    spec: GaussianTensorSpec,
    cap_bytes: Option<usize>,
) -> Result<GaussianTensor> {
    spec.validate()?;
    let cap = cap_bytes.unwrap_or(DEFAULT_TENSOR_CAP_BYTES);
    let bytes = spec.dense_bytes();
    if bytes > cap {
        return Err(CoreError::MemoryCap { bytes, cap });
    }
    let (n, d) = (spec.n, spec.dim);
    let data = Array4::from_shape_fn((n, n, d, d), |(i, j, a, b)| {
        spec.sigma_g * gaussian_entry(spec.seed, i, j, a, b)
    });
    Ok(GaussianTensor {
        spec,
        data: Some(data),
    })
}

/// Double SVD of the Gaussian tensor: dense per-slice SVD (full rank, no
/// window factorization applies), then the stage-two SVD per k. Returns
/// all N x D generalized singular values.
pub fn gaussian_double_svd(tensor: &GaussianTensor) -> TensorSpectrum {
    let spec = tensor.spec();
    let (n, d) = (spec.n, spec.dim);
    let sigmas: Vec<Vec<f64>> = (0..d * d)
        .into_par_iter()
        .map(|idx| singular_values_sorted(tensor.slice_matrix(idx / d, idx % d)))
        .collect();
    let sigma_matrices: Vec<DMatrix<f64>> = (0..n)
        .map(|k| DMatrix::from_fn(d, d, |a, b| sigmas[a * d + b][k]))
        .collect();
    stage_two(0, d, sigma_matrices)
}

/// The k = 1 slice singular vectors of the Gaussian tensor, for comparison
/// against empirical singular-vector component distributions.
pub fn gaussian_largest_singular_vectors(tensor: &GaussianTensor) -> SingularVectorField {
    let spec = tensor.spec();
    let (n, d) = (spec.n, spec.dim);
    let slices: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..d * d)
        .into_par_iter()
        .map(|idx| {
            let svd = svd_sorted(tensor.slice_matrix(idx / d, idx % d));
            let mut u = svd.u;
            let mut vt = svd.vt;
            fix_signs(&mut u, &mut vt);
            (u.columns(0, 1).into_owned(), vt.rows(0, 1).into_owned())
        })
        .collect();
    let mut l1 = ndarray::Array3::zeros((n, d, d));
    let mut r1 = ndarray::Array3::zeros((n, d, d));
    for (idx, (u1, v1)) in slices.iter().enumerate() {
        let (a, b) = (idx / d, idx % d);
        for i in 0..n {
            l1[(i, a, b)] = u1[(i, 0)];
            r1[(i, a, b)] = v1[(0, i)];
        }
    }
    SingularVectorField { l1, r1 }
}

/// Normalized quarter-circle law for the gamma = 1 spectrum of the
/// Gaussian tensor: density `f(x) = (4 / (pi rho_max^2)) sqrt(rho_max^2 - x^2)`
/// on [0, rho_max] with `rho_max = 2 sigma_g D sqrt(N)`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticSpectrum {
    pub rho_max: f64,
}

impl AnalyticSpectrum {
    pub fn from_spec(spec: &GaussianTensorSpec) -> Self {
        Self {
            rho_max: 2.0 * spec.sigma_g * spec.dim as f64 * (spec.n as f64).sqrt(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=self.rho_max).contains(&x) {
            return 0.0;
        }
        let m = self.rho_max;
        4.0 / (std::f64::consts::PI * m * m) * (m * m - x * x).sqrt()
    }

    /// CDF: `F(x) = (2/pi) [ (x/m) sqrt(1 - (x/m)^2) + asin(x/m) ]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.rho_max {
            return 1.0;
        }
        let u = x / self.rho_max;
        (2.0 / std::f64::consts::PI) * (u * (1.0 - u * u).sqrt() + u.asin())
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..=1.0).contains(&p));
        let (mut lo, mut hi) = (0.0, self.rho_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and
/// the analytic quarter-circle CDF. Values above `1.05 * rho_max` are a
/// support violation and an error.
pub fn quarter_circle_ks(values: &[f64], spec: &GaussianTensorSpec) -> Result<f64> {
    if values.is_empty() {
        return Err(CoreError::EmptyInput("quarter_circle_ks".into()));
    }
    let law = AnalyticSpectrum::from_spec(spec);
    let outside = values
        .iter()
        .filter(|&&v| v < 0.0 || v > 1.05 * law.rho_max)
        .count();
    if outside > 0 {
        return Err(CoreError::OutsideSupport {
            count: outside,
            total: values.len(),
            max: law.rho_max,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut ks = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = law.cdf(x);
        ks = ks.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(ks)
}

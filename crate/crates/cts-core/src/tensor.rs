//! Windowed correlation tensors over embedding component series.
//!
//! The four-index tensor `M[i,j,a,b](t)` is the Pearson correlation between
//! node i's component a and node j's component b across the
//! `W = 2*delta_t + 1` weeks centered at t. It is held in factored form: a
//! standardized window array `Z[i,a,s]` with
//! `M[i,j,a,b] = (1/(W-1)) * sum_s Z[i,a,s] * Z[j,b,s]`.
//! The dense N^2 D^2 tensor is never materialized by default; single slices
//! can be, for debugging and cross-checks on small N.
//!
//! Standard deviations use divisor `W - 1`, matching the `1/(W-1)` prefactor
//! so that the self-correlation `M[i,i,a,a]` is exactly 1.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use ndarray::{Array3, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::embed::EmbeddingSeries;
use crate::error::{CoreError, Result};
use crate::rng::{derive_seed2, seeded_rng};

/// Correlation window parameters: `W = 2 * delta_t + 1` samples centered at t.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    delta_t: usize,
}

impl WindowSpec {
    pub fn new(delta_t: usize) -> Result<Self> {
        if delta_t < 1 {
            return Err(CoreError::InvalidParam("delta_t must be >= 1".into()));
        }
        Ok(Self { delta_t })
    }

    pub fn delta_t(&self) -> usize {
        self.delta_t
    }

    /// Window length in samples.
    pub fn window(&self) -> usize {
        2 * self.delta_t + 1
    }

    /// Valid center weeks for a series of `num_weeks` weeks:
    /// `delta_t <= t <= num_weeks - 1 - delta_t`.
    pub fn valid_centers(&self, num_weeks: usize) -> Result<std::ops::RangeInclusive<usize>> {
        if num_weeks < self.window() {
            return Err(CoreError::ShortSeries {
                len: num_weeks,
                window: self.window(),
            });
        }
        Ok(self.delta_t..=num_weeks - 1 - self.delta_t)
    }

    fn check_center(&self, center: usize, num_weeks: usize) -> Result<()> {
        let range = self.valid_centers(num_weeks)?;
        if !range.contains(&center) {
            return Err(CoreError::CenterOutOfRange {
                center,
                lo: *range.start(),
                hi: *range.end(),
            });
        }
        Ok(())
    }
}

/// A correlation tensor for one center week, in standardized-window form.
#[derive(Debug, Clone)]
pub struct CorrelationTensor {
    pub center_week: usize,
    /// Standardized windows, shape (N, D, W). Dropped rows are zeroed.
    z: Array3<f64>,
    /// (node, component) pairs whose window had zero variance.
    pub dropped: BTreeSet<(usize, usize)>,
}

impl CorrelationTensor {
    pub fn num_nodes(&self) -> usize {
        self.z.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.z.shape()[1]
    }

    pub fn window(&self) -> usize {
        self.z.shape()[2]
    }

    pub fn is_dropped(&self, node: usize, component: usize) -> bool {
        self.dropped.contains(&(node, component))
    }

    /// Standardized window rows for one component, shape (N, W).
    pub fn component_rows(&self, component: usize) -> ArrayView2<'_, f64> {
        self.z.index_axis(Axis(1), component)
    }

    /// The N x W factor F_a = Z_a / sqrt(W - 1), so a dense slice is
    /// `F_a * F_b^T`.
    pub fn factor_matrix(&self, component: usize) -> DMatrix<f64> {
        let rows = self.component_rows(component);
        let scale = 1.0 / ((self.window() - 1) as f64).sqrt();
        DMatrix::from_fn(self.num_nodes(), self.window(), |i, s| {
            rows[(i, s)] * scale
        })
    }

    /// Materialize the dense N x N slice for fixed (a, b). Debug and
    /// cross-check use only; cost O(N^2 W).
    pub fn dense_slice(&self, alpha: usize, beta: usize) -> DMatrix<f64> {
        let fa = self.factor_matrix(alpha);
        let fb = self.factor_matrix(beta);
        &fa * fb.transpose()
    }

    /// Single tensor entry M[i,j,a,b].
    pub fn entry(&self, i: usize, j: usize, alpha: usize, beta: usize) -> f64 {
        let denom = (self.window() - 1) as f64;
        let mut acc = 0.0;
        for s in 0..self.window() {
            acc += self.z[(i, alpha, s)] * self.z[(j, beta, s)];
        }
        acc / denom
    }
}

/// Standardize a window row in place. Returns false when the row has zero
/// variance (all samples identical), in which case it is zeroed.
fn standardize_row(samples: &mut [f64]) -> bool {
    let w = samples.len();
    let mean = samples.iter().sum::<f64>() / w as f64;
    let mut ssd = 0.0;
    for x in samples.iter() {
        let d = x - mean;
        ssd += d * d;
    }
    if ssd == 0.0 || !ssd.is_finite() {
        samples.iter_mut().for_each(|x| *x = 0.0);
        return false;
    }
    let sd = (ssd / (w - 1) as f64).sqrt();
    for x in samples.iter_mut() {
        *x = (*x - mean) / sd;
    }
    true
}

fn build_tensor(
    series: &EmbeddingSeries,
    center: usize,
    spec: WindowSpec,
    mut permute: impl FnMut(usize, usize, &mut [usize]),
) -> Result<CorrelationTensor> {
    spec.check_center(center, series.num_weeks())?;
    let (n, d, w) = (series.num_nodes(), series.dim(), spec.window());
    let first = center - spec.delta_t();

    let mut z = Array3::<f64>::zeros((n, d, w));
    let mut dropped = BTreeSet::new();
    let mut order: Vec<usize> = (0..w).collect();
    let mut row = vec![0.0f64; w];
    for i in 0..n {
        for a in 0..d {
            order.clear();
            order.extend(0..w);
            permute(i, a, &mut order);
            for (s, &src) in order.iter().enumerate() {
                row[s] = series.component(first + src, i, a);
            }
            if standardize_row(&mut row) {
                for s in 0..w {
                    z[(i, a, s)] = row[s];
                }
            } else {
                dropped.insert((i, a));
            }
        }
    }
    if dropped.len() == n * d {
        return Err(CoreError::AllPairsDropped);
    }
    Ok(CorrelationTensor {
        center_week: center,
        z,
        dropped,
    })
}

/// Correlation tensor at `center` from the embedding series.
pub fn correlation_tensor(
    series: &EmbeddingSeries,
    center: usize,
    spec: WindowSpec,
) -> Result<CorrelationTensor> {
    build_tensor(series, center, spec, |_, _, _| {})
}

/// Reshuffled-null tensor: each (node, component) window is independently
/// permuted in time before standardization, destroying temporal alignment
/// between rows while preserving each row's marginal distribution.
/// Deterministic under `seed`; the permutation for a row depends only on
/// (seed, node, component).
pub fn reshuffled_tensor(
    series: &EmbeddingSeries,
    center: usize,
    spec: WindowSpec,
    seed: u64,
) -> Result<CorrelationTensor> {
    build_tensor(series, center, spec, |i, a, order| {
        let mut rng = seeded_rng(derive_seed2(seed, i as u64, a as u64));
        order.shuffle(&mut rng);
    })
}

//! Two-stage singular value decomposition of correlation tensors.
//!
//! Stage one decomposes each N x N slice (fixed component pair) over the
//! node indices; stage two decomposes, for each rank k, the D x D matrix of
//! k-th slice singular values over the component indices, yielding the
//! generalized spectrum `rho[k][gamma]` and the spectral gap.
//!
//! Stage one never touches dense N x N slices: each slice is `F_a * F_b^T`
//! with N x W factors, so a reduced QR of the factors and an SVD of the
//! small W x W core give the exact decomposition in O(N W^2) per slice.
//! Window centering bounds the slice rank by W - 1, so exactly W - 1
//! triples are retained; values for higher k are identically zero and are
//! reported as such rather than computed.

use nalgebra::DMatrix;
use ndarray::{Array2, Array3};
use rayon::prelude::*;

use crate::embed::EmbeddingSeries;
use crate::error::Result;
use crate::linalg::{fix_signs, svd_sorted, thin_qr};
use crate::tensor::{correlation_tensor, CorrelationTensor, WindowSpec};

/// Singular triples of one (alpha, beta) slice, truncated to the rank bound.
#[derive(Debug, Clone)]
pub struct SliceSvd {
    pub alpha: usize,
    pub beta: usize,
    /// Descending singular values, length `window - 1`.
    pub sigma: Vec<f64>,
    /// Left singular vectors, N x (window - 1).
    pub left: DMatrix<f64>,
    /// Right singular vectors, (window - 1) x N.
    pub right: DMatrix<f64>,
}

/// Generalized singular values and stage-two factors of one tensor.
#[derive(Debug, Clone)]
pub struct TensorSpectrum {
    pub center_week: usize,
    pub k_max: usize,
    pub dim: usize,
    /// `rho[(k, gamma)]`, each row descending over gamma. Row k corresponds
    /// to stage-one rank k + 1.
    pub rho: Array2<f64>,
    /// Per-k stage-two left factors (D x D, columns indexed by gamma).
    pub stage_left: Vec<DMatrix<f64>>,
    /// Per-k stage-two right factors (D x D, rows indexed by gamma).
    pub stage_right: Vec<DMatrix<f64>>,
}

impl TensorSpectrum {
    /// Largest generalized singular value (the paper's rho_1^1).
    pub fn largest(&self) -> f64 {
        self.rho[(0, 0)]
    }

    /// Second largest at gamma = 1 (the paper's rho_2^1).
    pub fn second(&self) -> f64 {
        self.rho[(1, 0)]
    }

    pub fn spectral_gap(&self) -> f64 {
        self.largest() - self.second()
    }

    /// Reconstruct the D x D matrix of k-th slice singular values from the
    /// stage-two factors.
    pub fn sigma_matrix(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim;
        let l = &self.stage_left[k];
        let r = &self.stage_right[k];
        let mut out = DMatrix::zeros(d, d);
        for g in 0..d {
            let rho = self.rho[(k, g)];
            for a in 0..d {
                for b in 0..d {
                    out[(a, b)] += l[(a, g)] * rho * r[(g, b)];
                }
            }
        }
        out
    }
}

/// Precomputed thin QR factors of each component's window matrix.
struct ComponentQr {
    q: Vec<DMatrix<f64>>,
    r: Vec<DMatrix<f64>>,
}

fn component_qrs(tensor: &CorrelationTensor) -> ComponentQr {
    let pairs: Vec<(DMatrix<f64>, DMatrix<f64>)> = (0..tensor.dim())
        .into_par_iter()
        .map(|a| thin_qr(tensor.factor_matrix(a)))
        .collect();
    let mut q = Vec::with_capacity(pairs.len());
    let mut r = Vec::with_capacity(pairs.len());
    for (qi, ri) in pairs {
        q.push(qi);
        r.push(ri);
    }
    ComponentQr { q, r }
}

/// Retained ranks: window centering bounds the slice rank by W - 1, and a
/// slice can never exceed rank N.
fn rank_bound(n: usize, window: usize) -> usize {
    (window - 1).min(n)
}

fn slice_svd_from_qr(
    qr: &ComponentQr,
    window: usize,
    alpha: usize,
    beta: usize,
) -> SliceSvd {
    let core = &qr.r[alpha] * qr.r[beta].transpose();
    let svd = svd_sorted(core);
    let mut left = &qr.q[alpha] * &svd.u;
    let mut right = &svd.vt * qr.q[beta].transpose();
    fix_signs(&mut left, &mut right);
    let k_max = rank_bound(left.nrows(), window);
    SliceSvd {
        alpha,
        beta,
        sigma: svd.singular_values[..k_max].to_vec(),
        left: left.columns(0, k_max).into_owned(),
        right: right.rows(0, k_max).into_owned(),
    }
}

/// Exact SVD of one slice via the thin factorization.
pub fn slice_svd(tensor: &CorrelationTensor, alpha: usize, beta: usize) -> SliceSvd {
    assert!(alpha < tensor.dim() && beta < tensor.dim(), "component index");
    let (qa, ra) = thin_qr(tensor.factor_matrix(alpha));
    let (qb, rb) = thin_qr(tensor.factor_matrix(beta));
    let qr = ComponentQr {
        q: vec![qa, qb],
        r: vec![ra, rb],
    };
    let mut out = slice_svd_from_qr(&qr, tensor.window(), 0, 1);
    out.alpha = alpha;
    out.beta = beta;
    out
}

/// Stage two: SVD the D x D matrix of k-th singular values for each k.
pub(crate) fn stage_two(
    center_week: usize,
    dim: usize,
    sigma_matrices: Vec<DMatrix<f64>>,
) -> TensorSpectrum {
    let k_max = sigma_matrices.len();
    let mut rho = Array2::zeros((k_max, dim));
    let mut stage_left = Vec::with_capacity(k_max);
    let mut stage_right = Vec::with_capacity(k_max);
    for (k, sk) in sigma_matrices.into_iter().enumerate() {
        let svd = svd_sorted(sk);
        let mut l = svd.u;
        let mut r = svd.vt;
        fix_signs(&mut l, &mut r);
        for g in 0..dim {
            rho[(k, g)] = svd.singular_values[g];
        }
        stage_left.push(l);
        stage_right.push(r);
    }
    TensorSpectrum {
        center_week,
        k_max,
        dim,
        rho,
        stage_left,
        stage_right,
    }
}

fn assemble_sigma_matrices(slices: &[SliceSvd], dim: usize, k_max: usize) -> Vec<DMatrix<f64>> {
    (0..k_max)
        .map(|k| {
            DMatrix::from_fn(dim, dim, |a, b| slices[a * dim + b].sigma[k])
        })
        .collect()
}

/// Double SVD over the factored slice representation. Slice decompositions
/// run in parallel and are reduced in fixed (alpha, beta, k) order.
pub fn double_svd(tensor: &CorrelationTensor) -> TensorSpectrum {
    let dim = tensor.dim();
    let k_max = rank_bound(tensor.num_nodes(), tensor.window());
    let qr = component_qrs(tensor);
    let slices: Vec<SliceSvd> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| slice_svd_from_qr(&qr, tensor.window(), idx / dim, idx % dim))
        .collect();
    let sigma_matrices = assemble_sigma_matrices(&slices, dim, k_max);
    stage_two(tensor.center_week, dim, sigma_matrices)
}

/// Double SVD through dense N x N slices. Exists as the independent route
/// for cross-checks and the dense debug path; cost O(D^2 N^3).
pub fn double_svd_dense(tensor: &CorrelationTensor) -> TensorSpectrum {
    let dim = tensor.dim();
    let k_max = rank_bound(tensor.num_nodes(), tensor.window());
    let sigmas: Vec<Vec<f64>> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| {
            let slice = tensor.dense_slice(idx / dim, idx % dim);
            crate::linalg::singular_values_sorted(slice)
        })
        .collect();
    let sigma_matrices: Vec<DMatrix<f64>> = (0..k_max)
        .map(|k| DMatrix::from_fn(dim, dim, |a, b| sigmas[a * dim + b][k]))
        .collect();
    stage_two(tensor.center_week, dim, sigma_matrices)
}

/// One row of the spectra time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraRow {
    pub week: usize,
    pub rho11: f64,
    pub rho21: f64,
    pub gap: f64,
}

/// Largest two generalized singular values and spectral gap per valid
/// center week.
pub fn spectra_timeseries(series: &EmbeddingSeries, spec: WindowSpec) -> Result<Vec<SpectraRow>> {
    let centers = spec.valid_centers(series.num_weeks())?;
    centers
        .collect::<Vec<usize>>()
        .into_par_iter()
        .map(|t| {
            let tensor = correlation_tensor(series, t, spec)?;
            let spectrum = double_svd(&tensor);
            Ok(SpectraRow {
                week: t,
                rho11: spectrum.largest(),
                rho21: spectrum.second(),
                gap: spectrum.spectral_gap(),
            })
        })
        .collect()
}

/// Full per-center spectra (used by the artifact writers).
pub fn tensor_spectra(series: &EmbeddingSeries, spec: WindowSpec) -> Result<Vec<TensorSpectrum>> {
    let centers = spec.valid_centers(series.num_weeks())?;
    centers
        .collect::<Vec<usize>>()
        .into_par_iter()
        .map(|t| Ok(double_svd(&correlation_tensor(series, t, spec)?)))
        .collect()
}

/// Mean and sample standard deviation of the spectra summary across an
/// ensemble of embedding runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub week: usize,
    pub mean_rho11: f64,
    pub std_rho11: f64,
    pub mean_rho21: f64,
    pub std_rho21: f64,
    pub mean_gap: f64,
    pub std_gap: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ssd: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ssd / (n - 1) as f64).sqrt())
}

pub fn ensemble_timeseries(
    ensemble: &[EmbeddingSeries],
    spec: WindowSpec,
) -> Result<Vec<EnsembleRow>> {
    assert!(!ensemble.is_empty(), "ensemble must be non-empty");
    let per_run: Vec<Vec<SpectraRow>> = ensemble
        .iter()
        .map(|series| spectra_timeseries(series, spec))
        .collect::<Result<_>>()?;
    let weeks = per_run[0].len();
    let mut rows = Vec::with_capacity(weeks);
    for w in 0..weeks {
        let rho11: Vec<f64> = per_run.iter().map(|r| r[w].rho11).collect();
        let rho21: Vec<f64> = per_run.iter().map(|r| r[w].rho21).collect();
        let gap: Vec<f64> = per_run.iter().map(|r| r[w].gap).collect();
        let (m1, s1) = mean_std(&rho11);
        let (m2, s2) = mean_std(&rho21);
        let (mg, sg) = mean_std(&gap);
        rows.push(EnsembleRow {
            week: per_run[0][w].week,
            mean_rho11: m1,
            std_rho11: s1,
            mean_rho21: m2,
            std_rho21: s2,
            mean_gap: mg,
            std_gap: sg,
        });
    }
    Ok(rows)
}

/// The k = 1 left and right singular vectors of every slice, indexed
/// `[node, alpha, beta]`. Input to driver detection and the component
/// distribution diagnostics.
#[derive(Debug, Clone)]
pub struct SingularVectorField {
    pub l1: Array3<f64>,
    pub r1: Array3<f64>,
}

pub fn largest_singular_vectors(tensor: &CorrelationTensor) -> SingularVectorField {
    let (n, dim) = (tensor.num_nodes(), tensor.dim());
    let qr = component_qrs(tensor);
    let slices: Vec<SliceSvd> = (0..dim * dim)
        .into_par_iter()
        .map(|idx| slice_svd_from_qr(&qr, tensor.window(), idx / dim, idx % dim))
        .collect();
    let mut l1 = Array3::zeros((n, dim, dim));
    let mut r1 = Array3::zeros((n, dim, dim));
    for slice in &slices {
        for i in 0..n {
            l1[(i, slice.alpha, slice.beta)] = slice.left[(i, 0)];
            r1[(i, slice.alpha, slice.beta)] = slice.right[(0, i)];
        }
    }
    SingularVectorField { l1, r1 }
}

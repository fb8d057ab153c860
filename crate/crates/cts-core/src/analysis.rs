//! Price-spectra diagnostics and driver-node identification.
//!
//! Pearson coefficients come with exact two-sided p-values from the
//! Student-t distribution. Series alignment convention: `price` and
//! `rho11` share their index origin (the same week axis); the rolling
//! statistic pairs `price[t']` with `rho11[t' - 1]` inside its window,
//! the lagged statistic pairs `price[t + lag]` with `rho11[t]`.

use std::collections::BTreeSet;

use ndarray::Array3;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::ingest::WeeklyNetwork;
use crate::special::pearson_p_value;

/// Pearson r and two-sided p-value over paired samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 3 {
        return Err(CoreError::InsufficientOverlap { n, min: 3 });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y.iter()) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CoreError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok((r, pearson_p_value(r, n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagPoint {
    pub lag: usize,
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCorrelation {
    pub points: Vec<LagPoint>,
}

/// Pearson correlation between `price[t + lag]` and `rho11[t]` for each
/// lag in `0..=max_lag`, over all t where both series are defined.
pub fn lagged_correlation(
    price: &[f64],
    rho11: &[f64],
    max_lag: usize,
) -> Result<LagCorrelation> {
    let mut points = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let n = rho11.len().min(price.len().saturating_sub(lag));
        if n < 3 {
            return Err(CoreError::InsufficientOverlap { n, min: 3 });
        }
        let x: Vec<f64> = (0..n).map(|t| rho11[t]).collect();
        let y: Vec<f64> = (0..n).map(|t| price[t + lag]).collect();
        let (r, p) = pearson(&x, &y)?;
        points.push(LagPoint { lag, r, p, n });
    }
    Ok(LagCorrelation { points })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingPoint {
    pub center: usize,
    /// None when the window has zero variance on either side.
    pub r: Option<f64>,
    pub p: Option<f64>,
}

impl RollingPoint {
    pub fn significant(&self, level: f64) -> Option<bool> {
        self.p.map(|p| p < level)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingCorrelation {
    pub delta_tau: usize,
    pub points: Vec<RollingPoint>,
}

/// Moving-window Pearson between `price[t']` and `rho11[t' - 1]` over
/// windows of `2 delta_tau + 1` centers. A window with zero variance
/// yields a missing point, not an error.
pub fn rolling_correlation(
    price: &[f64],
    rho11: &[f64],
    delta_tau: usize,
) -> Result<RollingCorrelation> {
    if delta_tau < 1 {
        return Err(CoreError::InvalidParam("delta_tau must be >= 1".into()));
    }
    // Valid centers t: window samples t' in [t - delta_tau, t + delta_tau]
    // need price[t'] and rho11[t' - 1].
    let lo = delta_tau + 1;
    let hi_price = price.len().checked_sub(delta_tau + 1);
    let hi_rho = rho11.len().checked_sub(delta_tau);
    let hi = match (hi_price, hi_rho) {
        (Some(a), Some(b)) => a.min(b),
        _ => {
            return Err(CoreError::ShortSeries {
                len: price.len().min(rho11.len()),
                window: 2 * delta_tau + 1,
            })
        }
    };
    if hi < lo {
        return Err(CoreError::ShortSeries {
            len: price.len().min(rho11.len()),
            window: 2 * delta_tau + 1,
        });
    }
    let mut points = Vec::with_capacity(hi - lo + 1);
    for t in lo..=hi {
        let x: Vec<f64> = (t - delta_tau..=t + delta_tau).map(|u| price[u]).collect();
        let y: Vec<f64> = (t - delta_tau..=t + delta_tau)
            .map(|u| rho11[u - 1])
            .collect();
        match pearson(&x, &y) {
            Ok((r, p)) => points.push(RollingPoint {
                center: t,
                r: Some(r),
                p: Some(p),
            }),
            Err(CoreError::ZeroVariance) => points.push(RollingPoint {
                center: t,
                r: None,
                p: None,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(RollingCorrelation { delta_tau, points })
}

/// Nodes overrepresented among large singular-vector components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriverReport {
    pub threshold: f64,
    pub margin: f64,
    /// Count of entries above +threshold / below -threshold.
    pub n_c_positive: usize,
    pub n_c_negative: usize,
    pub positive_nodes: Vec<usize>,
    pub negative_nodes: Vec<usize>,
    pub driver_set: Vec<usize>,
    pub complement: Vec<usize>,
    pub n_nodes: usize,
}

/// Detect overrepresented node indices in the k = 1 singular-vector field
/// (shape N x D x D). A node is overrepresented in a tail when its count
/// of super-threshold entries exceeds the uniform expectation `N_c / N`
/// by more than `margin`.
pub fn driver_set(vectors: &Array3<f64>, threshold: f64, margin: f64) -> Result<DriverReport> {
    if vectors.is_empty() {
        return Err(CoreError::EmptyInput("singular-vector field".into()));
    }
    if !(threshold > 0.0) {
        return Err(CoreError::InvalidParam("threshold must be positive".into()));
    }
    if margin < 0.0 {
        return Err(CoreError::InvalidParam("margin must be >= 0".into()));
    }
    let n = vectors.shape()[0];
    let mut count_pos = vec![0usize; n];
    let mut count_neg = vec![0usize; n];
    for ((i, _, _), &v) in vectors.indexed_iter() {
        if v > threshold {
            count_pos[i] += 1;
        } else if v < -threshold {
            count_neg[i] += 1;
        }
    }
    let n_c_positive: usize = count_pos.iter().sum();
    let n_c_negative: usize = count_neg.iter().sum();
    let cutoff_pos = n_c_positive as f64 / n as f64 + margin;
    let cutoff_neg = n_c_negative as f64 / n as f64 + margin;
    let positive_nodes: Vec<usize> = (0..n)
        .filter(|&i| count_pos[i] as f64 > cutoff_pos)
        .collect();
    let negative_nodes: Vec<usize> = (0..n)
        .filter(|&i| count_neg[i] as f64 > cutoff_neg)
        .collect();
    let drivers: BTreeSet<usize> = positive_nodes
        .iter()
        .chain(negative_nodes.iter())
        .copied()
        .collect();
    let complement: Vec<usize> = (0..n).filter(|i| !drivers.contains(i)).collect();
    Ok(DriverReport {
        threshold,
        margin,
        n_c_positive,
        n_c_negative,
        positive_nodes,
        negative_nodes,
        driver_set: drivers.into_iter().collect(),
        complement,
        n_nodes: n,
    })
}

/// Weekly flow statistics for one node set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetFlow {
    /// Volume on edges with both endpoints inside the set.
    pub induced_volume: f64,
    /// Mean weighted in-degree (from the full network) over set members
    /// present that week; None when none are present.
    pub mean_inflow: Option<f64>,
    pub mean_outflow: Option<f64>,
    /// Set members present in the week's node set.
    pub presence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeekFlow {
    pub week: usize,
    pub driver: SetFlow,
    pub complement: SetFlow,
}

fn set_flow(network: &WeeklyNetwork, set: &BTreeSet<String>) -> SetFlow {
    let mut induced = 0.0;
    let mut inflow = 0.0;
    let mut outflow = 0.0;
    for (src, dst, w) in network.edges() {
        let src_in = set.contains(src);
        let dst_in = set.contains(dst);
        if src_in && dst_in {
            induced += w;
        }
        if src_in {
            outflow += w;
        }
        if dst_in {
            inflow += w;
        }
    }
    let presence = set.iter().filter(|n| network.contains(n)).count();
    let mean = |total: f64| {
        if presence == 0 {
            None
        } else {
            Some(total / presence as f64)
        }
    };
    SetFlow {
        induced_volume: induced,
        mean_inflow: mean(inflow),
        mean_outflow: mean(outflow),
        presence,
    }
}

/// Per-week flow comparison between a node set and its complement.
/// The sets must be disjoint.
pub fn flow_stats(
    networks: &[WeeklyNetwork],
    node_set: &BTreeSet<String>,
    complement: &BTreeSet<String>,
) -> Result<Vec<WeekFlow>> {
    if node_set.intersection(complement).next().is_some() {
        return Err(CoreError::InvalidParam(
            "node set and complement must be disjoint".into(),
        ));
    }
    Ok(networks
        .iter()
        .map(|network| WeekFlow {
            week: network.week_index,
            driver: set_flow(network, node_set),
            complement: set_flow(network, complement),
        })
        .collect())
}

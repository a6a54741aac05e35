//! Binned factorial-moment estimators of one- and two-point correlation
//! functions from independent replicas.
//!
//! For bins `A`, `B` the per-replica statistics are
//!
//! ```text
//! order 1:          s(A) / |A|
//! order 2, A != B:  s(A) s(B) / (|A| |B|)
//! order 2, A == B:  s(A) (s(A) - 1) / |A|^2
//! ```
//!
//! whose means are unbiased for the bin-averaged correlation functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config_space::Configuration;
use crate::error::{invalid, Result};
use crate::stats::{gauss_legendre, Moments};

/// Strictly increasing bin edges on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    edges: Vec<f64>,
}

impl Bins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(invalid("bins need at least two edges"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("bin edges must be finite and strictly increasing"));
        }
        Ok(Self { edges })
    }

    /// Bins of width `width` covering `[lo, hi]`; the last bin is clipped
    /// to end exactly at `hi`.
    pub fn uniform(lo: f64, hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && lo < hi) {
            return Err(invalid(format!("bad uniform bins lo={lo} hi={hi} width={width}")));
        }
        let n = ((hi - lo) / width - 1e-9).ceil().max(1.0) as usize;
        let mut edges: Vec<f64> = (0..n).map(|i| lo + i as f64 * width).collect();
        edges.push(hi);
        Self::new(edges)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.edges[i]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.edges[i + 1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Half-open `[lo, hi)` bin containing `x`.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x >= self.edges[0] && x < *self.edges.last().unwrap()) {
            return None;
        }
        Some(self.edges.partition_point(|&e| e <= x) - 1)
    }

    fn counts(&self, config: &Configuration) -> Vec<u32> {
        let mut c = vec![0u32; self.len()];
        for z in config.iter() {
            if let Some(i) = self.locate(z.re) {
                c[i] += 1;
            }
        }
        c
    }
}

/// One bin (order 1) or one unordered pair of bins (order 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCell {
    /// Bin indices, `bins.len() == order`, non-decreasing.
    pub bins: Vec<usize>,
    pub estimate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedEstimate {
    pub order: usize,
    pub bins: Bins,
    pub cells: Vec<EstimateCell>,
    pub replicas: usize,
}

impl BinnedEstimate {
    /// Product of bin widths of a cell.
    pub fn cell_volume(&self, cell: &EstimateCell) -> f64 {
        cell.bins.iter().map(|&i| self.bins.width(i)).product()
    }
}

fn cell_indices(order: usize, nbins: usize) -> Vec<Vec<usize>> {
    match order {
        1 => (0..nbins).map(|i| vec![i]).collect(),
        _ => (0..nbins).flat_map(|i| (i..nbins).map(move |j| vec![i, j])).collect(),
    }
}

/// Factorial-moment estimate of the `order`-point correlation function on
/// `bins`, using the real parts of the points.
pub fn estimate_correlation(samples: &[Configuration], order: usize, bins: &Bins) -> Result<BinnedEstimate> {
    if samples.is_empty() {
        return Err(invalid("estimate_correlation: empty sample list"));
    }
    if samples.len() < 2 {
        return Err(invalid("estimate_correlation: need at least two replicas"));
    }
    if !(order == 1 || order == 2) {
        return Err(invalid(format!("correlation order must be 1 or 2, got {order}")));
    }
    let cells = cell_indices(order, bins.len());
    // Counting is parallel; the reduction is sequential in replica order
    // so the floating-point sums do not depend on the thread count.
    let counts: Vec<Vec<u32>> = samples.par_iter().map(|c| bins.counts(c)).collect();
    let mut acc = vec![Moments::default(); cells.len()];
    for c in &counts {
        for (m, idx) in acc.iter_mut().zip(&cells) {
            m.push(replica_statistic(c, idx, bins));
        }
    }
    let cells = cells
        .into_iter()
        .zip(acc)
        .map(|(bins, m)| EstimateCell {
            bins,
            estimate: m.mean(),
            stderr: m.stderr(),
        })
        .collect();
    Ok(BinnedEstimate {
        order,
        bins: bins.clone(),
        cells,
        replicas: samples.len(),
    })
}

fn replica_statistic(counts: &[u32], idx: &[usize], bins: &Bins) -> f64 {
    match *idx {
        [i] => counts[i] as f64 / bins.width(i),
        [i, j] if i == j => {
            let c = counts[i] as f64;
            c * (c - 1.0) / (bins.width(i) * bins.width(i))
        }
        [i, j] => counts[i] as f64 * counts[j] as f64 / (bins.width(i) * bins.width(j)),
        _ => unreachable!("order checked"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub bins: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub estimate: f64,
    pub stderr: f64,
    pub prediction: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub rows: Vec<DeviationRow>,
    pub max_abs_z: f64,
    pub fraction_within_3: f64,
}

/// Compare against a prediction evaluated at cell centres.
pub fn compare_to_prediction<F: Fn(&[f64]) -> f64>(est: &BinnedEstimate, predicted: F) -> Result<DeviationReport> {
    let values: Vec<f64> = est
        .cells
        .iter()
        .map(|c| {
            let centre: Vec<f64> = c.bins.iter().map(|&i| est.bins.center(i)).collect();
            predicted(&centre)
        })
        .collect();
    compare_to_values(est, &values)
}

/// Compare against precomputed per-cell predictions (same order as
/// `est.cells`).
///
/// A cell with zero jackknife error (e.g. no counts at all) would give an
/// infinite z-score; the error is floored at the resolution of a single
/// count, `1 / (R |cell|)`.
pub fn compare_to_values(est: &BinnedEstimate, predictions: &[f64]) -> Result<DeviationReport> {
    if predictions.len() != est.cells.len() {
        return Err(invalid("prediction count does not match the number of cells"));
    }
    let mut rows = Vec::with_capacity(est.cells.len());
    for (cell, &p) in est.cells.iter().zip(predictions) {
        if !p.is_finite() {
            return Err(invalid(format!("prediction not finite on cell {:?}", cell.bins)));
        }
        let floor = 1.0 / (est.replicas as f64 * est.cell_volume(cell));
        let z = (cell.estimate - p) / cell.stderr.max(floor);
        rows.push(DeviationRow {
            bins: cell.bins.clone(),
            lo: cell.bins.iter().map(|&i| est.bins.lo(i)).collect(),
            hi: cell.bins.iter().map(|&i| est.bins.hi(i)).collect(),
            estimate: cell.estimate,
            stderr: cell.stderr,
            prediction: p,
            z,
        });
    }
    let max_abs_z = rows.iter().fold(0.0f64, |m, r| m.max(r.z.abs()));
    let within = rows.iter().filter(|r| r.z.abs() <= 3.0).count();
    Ok(DeviationReport {
        fraction_within_3: within as f64 / rows.len().max(1) as f64,
        max_abs_z,
        rows,
    })
}

/// Cell averages of `f` by tensor Gauss-Legendre quadrature.
pub fn cell_averages<F>(est: &BinnedEstimate, f: F, nodes: usize) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let (x, w) = gauss_legendre(nodes);
    est.cells
        .iter()
        .map(|cell| {
            let maps: Vec<(f64, f64)> = cell
                .bins
                .iter()
                .map(|&i| (est.bins.center(i), 0.5 * est.bins.width(i)))
                .collect();
            let mut total = 0.0;
            match maps.as_slice() {
                [(c, h)] => {
                    for (xi, wi) in x.iter().zip(&w) {
                        total += 0.5 * wi * f(&[c + h * xi])?;
                    }
                }
                [(c1, h1), (c2, h2)] => {
                    for (xi, wi) in x.iter().zip(&w) {
                        for (xj, wj) in x.iter().zip(&w) {
                            total += 0.25 * wi * wj * f(&[c1 + h1 * xi, c2 + h2 * xj])?;
                        }
                    }
                }
                _ => unreachable!("order is 1 or 2"),
            }
            Ok(total)
        })
        .collect()
}

/// Wigner semicircle density `sqrt(4 - x^2) / (2 pi)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * std::f64::consts::PI)
    }
}

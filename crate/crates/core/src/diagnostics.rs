//! Coverage maps and per-pixel histograms of a set of training targets.
//!
//! A saturated map shows which object-plane pixels were ever lit; a
//! normalized map shows how strongly each one was exercised. Sums are
//! taken sequentially in input order, so results are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    Saturated,
    Normalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageMap {
    pub values: Image,
    pub mode: CoverageMode,
    pub sample_count: usize,
}

impl CoverageMap {
    /// Pixels lit in at least one sample (saturated value > 0).
    pub fn effective_pixels(&self) -> Vec<bool> {
        self.values.data().iter().map(|&v| v > 0.0).collect()
    }

    pub fn effective_count(&self) -> usize {
        self.effective_pixels().into_iter().filter(|&e| e).count()
    }
}

fn pixel_sums<'a>(targets: impl IntoIterator<Item = &'a Image>) -> Result<(Image, usize)> {
    let mut iter = targets.into_iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::EmptyInput("no targets to superpose".into()))?;
    let mut acc = first.clone();
    let mut n = 1;
    for t in iter {
        acc.check_same_dims(t, "superpose")?;
        for (a, v) in acc.data_mut().iter_mut().zip(t.data()) {
            *a += v;
        }
        n += 1;
    }
    Ok((acc, n))
}

/// Elementwise `min(Σ targets, 1)`.
pub fn superpose_saturated<'a>(targets: impl IntoIterator<Item = &'a Image>) -> Result<CoverageMap> {
    let (sum, n) = pixel_sums(targets)?;
    Ok(CoverageMap {
        values: sum.map(|v| v.min(1.0)),
        mode: CoverageMode::Saturated,
        sample_count: n,
    })
}

/// `Σ targets / max(Σ targets)`.
pub fn superpose_normalized<'a>(targets: impl IntoIterator<Item = &'a Image>) -> Result<CoverageMap> {
    let (sum, n) = pixel_sums(targets)?;
    let (_, max) = sum.min_max();
    if !(max > 0.0) {
        return Err(Error::Degenerate("superposed targets are all zero".into()));
    }
    Ok(CoverageMap {
        values: sum.map(|v| v / max),
        mode: CoverageMode::Normalized,
        sample_count: n,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointHistogram {
    pub point: (usize, usize),
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramSet {
    pub bins: usize,
    pub sample_count: usize,
    pub per_point: Vec<PointHistogram>,
    /// Arithmetic mean of the per-point normalized histograms.
    pub pooled: Vec<f64>,
}

impl HistogramSet {
    pub fn bin_edges(&self, bin: usize) -> (f64, f64) {
        let w = 1.0 / self.bins as f64;
        (bin as f64 * w, (bin + 1) as f64 * w)
    }

    /// Ratio of the largest to the smallest nonzero pooled frequency.
    pub fn pooled_occupied_ratio(&self) -> Option<f64> {
        let occupied: Vec<f64> = self.pooled.iter().copied().filter(|&f| f > 0.0).collect();
        let lo = occupied.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = occupied.iter().copied().fold(0.0, f64::max);
        (!occupied.is_empty()).then(|| hi / lo)
    }
}

pub fn bin_of(value: f64, bins: usize) -> usize {
    ((value * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// Histograms of the values each of `points` takes across `targets`, with
/// `bins` uniform bins on `[0, 1]`.
pub fn pixel_histograms<'a>(
    targets: impl IntoIterator<Item = &'a Image>,
    points: &[(usize, usize)],
    bins: usize,
) -> Result<HistogramSet> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    let targets: Vec<&Image> = targets.into_iter().collect();
    let dims: Dims = targets
        .first()
        .ok_or_else(|| Error::EmptyInput("no targets to histogram".into()))?
        .dims();
    for &(y, x) in points {
        if y >= dims.height || x >= dims.width {
            return Err(Error::InvalidPoint(format!("({y}, {x}) is outside {dims}")));
        }
    }
    let mut per_point: Vec<PointHistogram> = points
        .iter()
        .map(|&point| PointHistogram {
            point,
            counts: vec![0; bins],
            frequencies: vec![0.0; bins],
        })
        .collect();
    for t in &targets {
        if t.dims() != dims {
            return Err(Error::Shape(format!("histogram input {} vs {dims}", t.dims())));
        }
        for h in per_point.iter_mut() {
            h.counts[bin_of(t.get(h.point.0, h.point.1), bins)] += 1;
        }
    }
    let n = targets.len();
    let mut pooled = vec![0.0; bins];
    for h in per_point.iter_mut() {
        for (f, &c) in h.frequencies.iter_mut().zip(&h.counts) {
            *f = c as f64 / n as f64;
        }
        for (p, f) in pooled.iter_mut().zip(&h.frequencies) {
            *p += f;
        }
    }
    if !per_point.is_empty() {
        let k = per_point.len() as f64;
        pooled.iter_mut().for_each(|p| *p /= k);
    }
    Ok(HistogramSet {
        bins,
        sample_count: n,
        per_point,
        pooled,
    })
}

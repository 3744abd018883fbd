//! Reconstruction quality measures: Pearson correlation, SSIM, cosine
//! similarity and the binarized Dice overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

fn same_len(a: &Image, b: &Image, what: &str) -> Result<()> {
    a.check_same_dims(b, what)
}

/// Pearson correlation over flattened pixels.
///
/// Exactly one constant input gives 0 (no linear association); two
/// constant inputs are undefined.
pub fn pcc(a: &Image, b: &Image) -> Result<f64> {
    same_len(a, b, "pcc")?;
    let n = a.data().len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    match (saa > 0.0, sbb > 0.0) {
        (false, false) => Err(Error::UndefinedMetric("pcc of two constant images".into())),
        (true, true) => Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)),
        _ => Ok(0.0),
    }
}

pub fn cosine(a: &Image, b: &Image) -> Result<f64> {
    same_len(a, b, "cosine")?;
    let dot: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    let na = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedMetric("cosine with a zero image".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Dice overlap of the masks `a ≥ threshold` and `b ≥ threshold`; 1 when
/// both masks are empty.
pub fn dice_coeff(a: &Image, b: &Image, threshold: f64) -> Result<f64> {
    same_len(a, b, "dice")?;
    let (mut both, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (ia, ib) = (x >= threshold, y >= threshold);
        na += ia as usize;
        nb += ib as usize;
        both += (ia && ib) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams {
            window: 7,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_with(a, b, &SsimParams::default())
}

/// Mean of the Gaussian-weighted local SSIM map over every window position
/// that lies fully inside the image.
pub fn ssim_with(a: &Image, b: &Image, p: &SsimParams) -> Result<f64> {
    same_len(a, b, "ssim")?;
    let d = a.dims();
    let w = p.window;
    if w == 0 || d.height < w || d.width < w {
        return Err(Error::InvalidArgument(format!(
            "image {d} is smaller than the {w}x{w} ssim window"
        )));
    }
    let half = (w as f64 - 1.0) / 2.0;
    let g1: Vec<f64> = (0..w)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * p.sigma * p.sigma)).exp())
        .collect();
    let total: f64 = g1.iter().sum::<f64>().powi(2);
    let c1 = (p.k1 * p.dynamic_range).powi(2);
    let c2 = (p.k2 * p.dynamic_range).powi(2);

    let mut acc = 0.0;
    let mut count = 0usize;
    for y0 in 0..=d.height - w {
        for x0 in 0..=d.width - w {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (i, gy) in g1.iter().enumerate() {
                for (j, gx) in g1.iter().enumerate() {
                    let wt = gy * gx / total;
                    let (u, v) = (a.get(y0 + i, x0 + j), b.get(y0 + i, x0 + j));
                    ma += wt * u;
                    mb += wt * v;
                    saa += wt * u * u;
                    sbb += wt * v * v;
                    sab += wt * u * v;
                }
            }
            let va = (saa - ma * ma).max(0.0);
            let vb = (sbb - mb * mb).max(0.0);
            let cov = sab - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// All four measures for one (reconstruction, truth) pair. Undefined
/// values are kept as `None` rather than reported as zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub family: String,
    pub index: usize,
    pub pcc: Option<f64>,
    pub ssim: Option<f64>,
    pub cosine: Option<f64>,
    pub dice: Option<f64>,
}

impl MetricReport {
    pub fn evaluate(family: &str, index: usize, recon: &Image, truth: &Image) -> Result<Self> {
        same_len(recon, truth, "metric report")?;
        let defined = |r: Result<f64>| -> Result<Option<f64>> {
            match r {
                Ok(v) => Ok(Some(v)),
                Err(Error::UndefinedMetric(_)) | Err(Error::InvalidArgument(_)) => Ok(None),
                Err(e) => Err(e),
            }
        };
        Ok(MetricReport {
            family: family.to_string(),
            index,
            pcc: defined(pcc(recon, truth))?,
            ssim: defined(ssim(recon, truth))?,
            cosine: defined(cosine(recon, truth))?,
            dice: Some(dice_coeff(recon, truth, 0.5)?),
        })
    }
}

/// Mean of the defined values, `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

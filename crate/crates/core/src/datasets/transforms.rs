//! Target transformations: enlargement, two-sine intensity modulation,
//! superposition and embedding on a larger canvas.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::TargetImage;
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::seed::rng_from_seed;

/// Bilinear resampling onto `dims` with pixel centres aligned
/// (`src = (dst + 0.5) · scale − 0.5`, clamped at the edges).
pub fn resize_bilinear(img: &Image, dims: Dims) -> Image {
    let src = img.dims();
    let sy = src.height as f64 / dims.height as f64;
    let sx = src.width as f64 / dims.width as f64;
    let sample = |pos: f64, n: usize| -> (usize, usize, f64) {
        let p = pos.clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    Image::from_fn(dims, |y, x| {
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sy - 0.5, src.height);
        let (x0, x1, fx) = sample((x as f64 + 0.5) * sx - 0.5, src.width);
        let top = img.get(y0, x0) * (1.0 - fx) + img.get(y0, x1) * fx;
        let bottom = img.get(y1, x0) * (1.0 - fx) + img.get(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Fits an image into `dims`: zero-padded around the centre when it is no
/// larger in either direction, bilinearly resized otherwise.
pub fn fit_to_dims(img: &Image, dims: Dims) -> Image {
    let src = img.dims();
    if src == dims {
        return img.clone();
    }
    if src.fits_within(dims) {
        let dy = (dims.height - src.height) / 2;
        let dx = (dims.width - src.width) / 2;
        let mut out = Image::zeros(dims);
        for y in 0..src.height {
            for x in 0..src.width {
                out.set(y + dy, x + dx, img.get(y, x));
            }
        }
        out
    } else {
        resize_bilinear(img, dims)
    }
}

pub fn binarize(img: &Image, threshold: f64) -> Image {
    img.map(|v| if v >= threshold { 1.0 } else { 0.0 })
}

/// Bilinear upscale by `factor`, then crop the central window of the
/// original size. Binary inputs are re-binarized at 0.5.
pub fn enlarge_center_crop(target: &TargetImage, factor: f64) -> Result<TargetImage> {
    if !(factor >= 1.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "enlargement factor must be >= 1, got {factor}"
        )));
    }
    let d = target.image.dims();
    let big = Dims::new(
        (d.height as f64 * factor).round() as usize,
        (d.width as f64 * factor).round() as usize,
    );
    let up = resize_bilinear(&target.image, big);
    let mut out = up.crop((big.height - d.height) / 2, (big.width - d.width) / 2, d)?;
    if target.image.is_binary() {
        out = binarize(&out, 0.5);
    }
    Ok(TargetImage {
        image: out,
        ..target.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmplitudeMode {
    FixedOne,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub amplitude_mode: AmplitudeMode,
    /// Spatial frequencies in cycles per image side.
    pub cycles_choices_x: Vec<f64>,
    pub cycles_choices_y: Vec<f64>,
    pub phase_seed: u64,
}

impl ModulationParams {
    pub fn new(amplitude_mode: AmplitudeMode, phase_seed: u64) -> Self {
        ModulationParams {
            amplitude_mode,
            cycles_choices_x: vec![4.0, 8.0 / 3.0],
            cycles_choices_y: vec![4.0, 8.0 / 3.0],
            phase_seed,
        }
    }

    pub fn sample(&self) -> Result<ModulationSample> {
        if self.cycles_choices_x.is_empty() || self.cycles_choices_y.is_empty() {
            return Err(Error::InvalidArgument("empty cycles choice set".into()));
        }
        let mut rng = rng_from_seed(self.phase_seed);
        let amplitude = match self.amplitude_mode {
            AmplitudeMode::FixedOne => 1.0,
            AmplitudeMode::Uniform => 1.0 - rng.random::<f64>(),
        };
        let cycles_x = self.cycles_choices_x[rng.random_range(0..self.cycles_choices_x.len())];
        let cycles_y = self.cycles_choices_y[rng.random_range(0..self.cycles_choices_y.len())];
        let phase_x = rng.random_range(0.0..2.0 * PI);
        let phase_y = rng.random_range(0.0..2.0 * PI);
        Ok(ModulationSample {
            amplitude,
            cycles_x,
            cycles_y,
            phase_x,
            phase_y,
        })
    }
}

/// One concrete two-sine sheet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationSample {
    pub amplitude: f64,
    pub cycles_x: f64,
    pub cycles_y: f64,
    pub phase_x: f64,
    pub phase_y: f64,
}

impl ModulationSample {
    /// `A·[sin(kx·x + φx) + sin(ky·y + φy)]` at column `x`, row `y`.
    pub fn raw(&self, dims: Dims, y: usize, x: usize) -> f64 {
        let kx = 2.0 * PI * self.cycles_x / dims.width as f64;
        let ky = 2.0 * PI * self.cycles_y / dims.height as f64;
        self.amplitude * ((kx * x as f64 + self.phase_x).sin() + (ky * y as f64 + self.phase_y).sin())
    }

    /// The sheet shifted and scaled from `[−2A, 2A]` onto `[0, 1]`.
    pub fn rescaled(&self, dims: Dims, y: usize, x: usize) -> f64 {
        let a = self.amplitude;
        ((self.raw(dims, y, x) + 2.0 * a) / (4.0 * a)).clamp(0.0, 1.0)
    }
}

pub fn modulate_with(target: &TargetImage, sheet: &ModulationSample) -> Result<TargetImage> {
    if !target.image.in_unit_range() {
        return Err(Error::InvalidArgument("target values must lie in [0, 1]".into()));
    }
    if !(sheet.amplitude > 0.0 && sheet.amplitude <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "amplitude must be in (0, 1], got {}",
            sheet.amplitude
        )));
    }
    let d = target.image.dims();
    let image = Image::from_fn(d, |y, x| target.image.get(y, x) * sheet.rescaled(d, y, x));
    Ok(TargetImage {
        image,
        ..target.clone()
    })
}

pub fn modulate(target: &TargetImage, params: &ModulationParams) -> Result<TargetImage> {
    modulate_with(target, &params.sample()?)
}

/// Elementwise `min(a + b, 1)`.
pub fn superpose_targets(a: &TargetImage, b: &TargetImage) -> Result<TargetImage> {
    a.image.check_same_dims(&b.image, "superpose")?;
    let image = Image::from_vec(
        a.image.dims(),
        a.image
            .data()
            .iter()
            .zip(b.image.data())
            .map(|(u, v)| (u + v).min(1.0))
            .collect(),
    )?;
    Ok(TargetImage { image, ..a.clone() })
}

/// Copies `target` onto a zero canvas with its top-left corner at `offset`.
pub fn embed(target: &TargetImage, canvas: Dims, offset: (usize, usize)) -> Result<TargetImage> {
    let d = target.image.dims();
    let (dy, dx) = offset;
    if dy + d.height > canvas.height || dx + d.width > canvas.width {
        return Err(Error::InvalidOffset(format!(
            "{d} target at ({dy}, {dx}) does not fit a {canvas} canvas"
        )));
    }
    let mut image = Image::zeros(canvas);
    for y in 0..d.height {
        for x in 0..d.width {
            image.set(y + dy, x + dx, target.image.get(y, x));
        }
    }
    Ok(TargetImage {
        image,
        ..target.clone()
    })
}

/// Offset that centres `target` on `canvas`.
pub fn central_offset(target: Dims, canvas: Dims) -> (usize, usize) {
    (
        canvas.height.saturating_sub(target.height) / 2,
        canvas.width.saturating_sub(target.width) / 2,
    )
}

//! Row-major 2-D arrays shared by targets, speckle patterns and maps.
//!
//! Pixel `(y, x)` of an image with width `w` lives at flat index `y * w + x`.
//! The same convention flattens both planes of a transmission matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height and width of a pixel grid. Serialized as `"HxW"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dims {
    pub height: usize,
    pub width: usize,
}

impl Dims {
    pub const fn new(height: usize, width: usize) -> Self {
        Dims { height, width }
    }

    pub const fn square(side: usize) -> Self {
        Dims::new(side, side)
    }

    pub const fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn index(&self, y: usize, x: usize) -> usize {
        y * self.width + x
    }

    pub fn fits_within(&self, other: Dims) -> bool {
        self.height <= other.height && self.width <= other.width
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

impl FromStr for Dims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("expected HxW, got {s:?}"));
        let (h, w) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let height = h.trim().parse().map_err(|_| bad())?;
        let width = w.trim().parse().map_err(|_| bad())?;
        Ok(Dims { height, width })
    }
}

impl TryFrom<String> for Dims {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Dims> for String {
    fn from(d: Dims) -> String {
        d.to_string()
    }
}

/// Dense real image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    dims: Dims,
    data: Vec<f64>,
}

impl AsRef<Image> for Image {
    fn as_ref(&self) -> &Image {
        self
    }
}

impl Image {
    pub fn zeros(dims: Dims) -> Self {
        Image::filled(dims, 0.0)
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        Image {
            dims,
            data: vec![value; dims.pixels()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.pixels() {
            return Err(Error::Shape(format!(
                "{} values do not fill a {dims} image",
                data.len()
            )));
        }
        Ok(Image { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.pixels());
        for y in 0..dims.height {
            for x in 0..dims.width {
                data.push(f(y, x));
            }
        }
        Image { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[self.dims.index(y, x)]
    }

    pub fn set(&mut self, y: usize, x: usize, value: f64) {
        let i = self.dims.index(y, x);
        self.data[i] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Copies the `dims`-sized window whose top-left corner is `(dy, dx)`.
    pub fn crop(&self, dy: usize, dx: usize, dims: Dims) -> Result<Image> {
        if dy + dims.height > self.dims.height || dx + dims.width > self.dims.width {
            return Err(Error::InvalidOffset(format!(
                "{dims} window at ({dy}, {dx}) exceeds {} image",
                self.dims
            )));
        }
        Ok(Image::from_fn(dims, |y, x| self.get(y + dy, x + dx)))
    }

    pub(crate) fn check_same_dims(&self, other: &Image, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!("{what}: {} vs {}", self.dims, other.dims)));
        }
        Ok(())
    }
}

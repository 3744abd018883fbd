//! Learned inverse mappings from speckle patterns back to targets.

pub mod net;
pub mod ridge;

use nalgebra::{DMatrix, DVector};

pub use net::{loss_and_grads, train_net, train_net_logged, Batch, NetConfig, NetParams, NetTraining};
pub use ridge::{fit_ridge, train_ridge, RidgeConfig, RidgeSolver};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MappingKind {
    RidgeAffine,
    SmallNet,
}

impl MappingKind {
    pub fn code(self) -> u8 {
        match self {
            MappingKind::RidgeAffine => 0,
            MappingKind::SmallNet => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MappingParams {
    /// `x̂ = W (y − ȳ) + x̄`, with `W` of shape `(target_pixels, speckle_pixels)`.
    RidgeAffine {
        weights: DMatrix<f64>,
        target_mean: DVector<f64>,
        speckle_mean: DVector<f64>,
    },
    SmallNet(NetParams),
}

/// A trained inverse mapping, tagged with the data it was fitted on.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedMapping {
    /// Speckle (input) dims.
    pub in_dims: Dims,
    /// Target (output) dims.
    pub out_dims: Dims,
    pub training_fingerprint: u64,
    pub params: MappingParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    /// `raw_values` clamped to `[0, 1]`.
    pub values: Image,
    pub raw_values: Image,
}

impl Reconstruction {
    fn from_raw(raw: Image) -> Self {
        Reconstruction {
            values: raw.map(|v| v.clamp(0.0, 1.0)),
            raw_values: raw,
        }
    }
}

impl LearnedMapping {
    pub fn kind(&self) -> MappingKind {
        match self.params {
            MappingParams::RidgeAffine { .. } => MappingKind::RidgeAffine,
            MappingParams::SmallNet(_) => MappingKind::SmallNet,
        }
    }

    /// Checks that every parameter block matches the declared dims.
    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.in_dims.pixels(), self.out_dims.pixels());
        let ok = match &self.params {
            MappingParams::RidgeAffine {
                weights,
                target_mean,
                speckle_mean,
            } => weights.shape() == (q, p) && target_mean.len() == q && speckle_mean.len() == p,
            MappingParams::SmallNet(n) => n.in_dim() == p && n.out_dim() == q && n.is_consistent(),
        };
        if !ok {
            return Err(Error::Shape(format!(
                "mapping parameters do not chain {} -> {}",
                self.in_dims, self.out_dims
            )));
        }
        Ok(())
    }

    pub fn predict(&self, speckle: impl AsRef<Image>) -> Result<Reconstruction> {
        let s = speckle.as_ref();
        Ok(self.predict_many(&[s])?.pop().expect("one prediction"))
    }

    /// Applies the mapping to a batch of speckles in one product.
    pub fn predict_many(&self, speckles: &[&Image]) -> Result<Vec<Reconstruction>> {
        let p = self.in_dims.pixels();
        let mut y = DMatrix::<f64>::zeros(p, speckles.len());
        for (c, s) in speckles.iter().enumerate() {
            if s.dims() != self.in_dims {
                return Err(Error::Shape(format!(
                    "speckle is {}, mapping expects {}",
                    s.dims(),
                    self.in_dims
                )));
            }
            y.column_mut(c).copy_from_slice(s.data());
        }
        let raw = match &self.params {
            MappingParams::RidgeAffine {
                weights,
                target_mean,
                speckle_mean,
            } => {
                for mut col in y.column_iter_mut() {
                    col -= speckle_mean;
                }
                let mut x = weights * y;
                for mut col in x.column_iter_mut() {
                    col += target_mean;
                }
                x
            }
            MappingParams::SmallNet(n) => n.forward(&y).output,
        };
        raw.column_iter()
            .map(|col| {
                Ok(Reconstruction::from_raw(Image::from_vec(
                    self.out_dims,
                    col.iter().copied().collect(),
                )?))
            })
            .collect()
    }
}

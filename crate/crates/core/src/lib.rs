//! Deterministic simulator and analysis toolkit for learned inverse mappings
//! of a scattering-imaging system.
//!
//! A [`media::TransmissionMedium`] maps an object-plane target to a
//! detection-plane speckle pattern. The [`datasets`] module generates
//! targets with controlled spatial coverage and grayscale diversity, the
//! [`learners`] module fits inverse mappings from (target, speckle) pairs,
//! and [`metrics`], [`diagnostics`] and [`experiments`] measure how well a
//! mapping trained on one family of targets transfers to another.

pub mod datasets;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod image;
pub mod io;
pub mod learners;
pub mod linalg;
pub mod media;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
pub use image::{Dims, Image};

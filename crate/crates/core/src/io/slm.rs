//! `.slm` mapping files.
//!
//! `"SLM1"`, kind `u8` (0 ridge, 1 net), speckle height/width `u32`, target
//! height/width `u32`, for nets the hidden width `u32`, then the training
//! fingerprint `u64`, then `f64` parameter blocks:
//!
//! * ridge: `W` row-major `(target_px × speckle_px)`, `x̄`, `ȳ`
//! * net: `W1` row-major `(hidden × speckle_px)`, `b1`, `W2` row-major
//!   `(target_px × hidden)`, `b2`

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::{checked_len, put_f64s, read_file, write_file, Reader};
use crate::error::{Error, Result};
use crate::image::Dims;
use crate::learners::{LearnedMapping, MappingParams, NetParams};

pub const MAGIC: &[u8; 4] = b"SLM1";

fn put_row_major(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    put_f64s(
        out,
        (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])),
    );
}

pub fn encode_mapping(m: &LearnedMapping) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(m.kind().code());
    for v in [
        m.in_dims.height,
        m.in_dims.width,
        m.out_dims.height,
        m.out_dims.width,
    ] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    if let MappingParams::SmallNet(n) = &m.params {
        out.extend_from_slice(&(n.hidden() as u32).to_le_bytes());
    }
    out.extend_from_slice(&m.training_fingerprint.to_le_bytes());
    match &m.params {
        MappingParams::RidgeAffine {
            weights,
            target_mean,
            speckle_mean,
        } => {
            put_row_major(&mut out, weights);
            put_f64s(&mut out, target_mean.iter().copied());
            put_f64s(&mut out, speckle_mean.iter().copied());
        }
        MappingParams::SmallNet(n) => {
            put_row_major(&mut out, &n.w1);
            put_f64s(&mut out, n.b1.iter().copied());
            put_row_major(&mut out, &n.w2);
            put_f64s(&mut out, n.b2.iter().copied());
        }
    }
    out
}

pub fn decode_mapping(bytes: &[u8]) -> Result<LearnedMapping> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let kind = r.u8("kind")?;
    if kind > 1 {
        return Err(Error::Format {
            expected: "mapping kind 0 or 1".into(),
            found: kind.to_string(),
        });
    }
    let in_dims = Dims::new(
        r.u32("speckle height")? as usize,
        r.u32("speckle width")? as usize,
    );
    let out_dims = Dims::new(r.u32("target height")? as usize, r.u32("target width")? as usize);
    let (p, q) = (in_dims.pixels(), out_dims.pixels());
    if p == 0 || q == 0 {
        return Err(Error::Format {
            expected: "nonzero mapping dims".into(),
            found: format!("{in_dims} -> {out_dims}"),
        });
    }
    let hidden = if kind == 1 {
        r.u32("hidden width")? as usize
    } else {
        0
    };
    let training_fingerprint = r.u64("training fingerprint")?;
    let params = if kind == 0 {
        let n = checked_len(&[q, p], "weights")?
            .checked_add(q + p)
            .ok_or_else(|| Error::Consistency("ridge payload size overflows".into()))?;
        r.expect_exact(checked_len(&[n, 8], "ridge payload")?, "ridge parameters")?;
        MappingParams::RidgeAffine {
            weights: DMatrix::from_row_slice(q, p, &r.f64s(q * p, "W")?),
            target_mean: DVector::from_vec(r.f64s(q, "target mean")?),
            speckle_mean: DVector::from_vec(r.f64s(p, "speckle mean")?),
        }
    } else {
        if hidden == 0 {
            return Err(Error::Format {
                expected: "nonzero hidden width".into(),
                found: "0".into(),
            });
        }
        let n = [
            checked_len(&[hidden, p], "W1")?,
            hidden,
            checked_len(&[q, hidden], "W2")?,
            q,
        ]
        .into_iter()
        .try_fold(0usize, |a, b| a.checked_add(b))
        .ok_or_else(|| Error::Consistency("net payload size overflows".into()))?;
        r.expect_exact(checked_len(&[n, 8], "net payload")?, "net parameters")?;
        MappingParams::SmallNet(NetParams {
            w1: DMatrix::from_row_slice(hidden, p, &r.f64s(hidden * p, "W1")?),
            b1: DVector::from_vec(r.f64s(hidden, "b1")?),
            w2: DMatrix::from_row_slice(q, hidden, &r.f64s(q * hidden, "W2")?),
            b2: DVector::from_vec(r.f64s(q, "b2")?),
        })
    };
    let m = LearnedMapping {
        in_dims,
        out_dims,
        training_fingerprint,
        params,
    };
    m.validate()?;
    Ok(m)
}

pub fn save_mapping(path: &Path, m: &LearnedMapping) -> Result<()> {
    write_file(path, &encode_mapping(m))
}

pub fn load_mapping(path: &Path) -> Result<LearnedMapping> {
    decode_mapping(&read_file(path)?)
}

//! `.sds` dataset files.
//!
//! `"SDS1"`, count `u32`, target height/width `u32`, speckle height/width
//! `u32`, then per pair the target and then the speckle as `f32`, row-major.
//! The JSON sidecar carries the [`DatasetSpec`], the medium fingerprint and
//! the per-target generator seeds. Pixel data is single precision, so a
//! round trip is exact once values have passed through `f32`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{checked_len, read_file, sidecar_path, write_file, Reader};
use crate::datasets::{Dataset, DatasetSpec, Pair, TargetImage};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::media::SpecklePattern;

pub const MAGIC: &[u8; 4] = b"SDS1";
pub const HEADER_LEN: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdsSidecar {
    pub spec: DatasetSpec,
    pub medium_fingerprint: u64,
    #[serde(default)]
    pub gen_seeds: Vec<Option<u64>>,
}

/// Pixel content of a `.sds` file.
#[derive(Clone, Debug, PartialEq)]
pub struct SdsPayload {
    pub target_dims: Dims,
    pub speckle_dims: Dims,
    pub pairs: Vec<(Image, Image)>,
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let td = ds.target_dims().unwrap_or(ds.spec.object_dims());
    let sd = ds.speckle_dims().unwrap_or(Dims::new(0, 0));
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (td.pixels() + sd.pixels()) * 4);
    out.extend_from_slice(MAGIC);
    for v in [ds.len(), td.height, td.width, sd.height, sd.width] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for p in &ds.pairs {
        for &v in p.target.image.data().iter().chain(p.speckle.image.data()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_payload(bytes: &[u8]) -> Result<SdsPayload> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let count = r.u32("count")? as usize;
    let td = Dims::new(r.u32("target height")? as usize, r.u32("target width")? as usize);
    let sd = Dims::new(
        r.u32("speckle height")? as usize,
        r.u32("speckle width")? as usize,
    );
    if count > 0 && (td.pixels() == 0 || sd.pixels() == 0) {
        return Err(Error::Format {
            expected: "nonzero image dims".into(),
            found: format!("target {td}, speckle {sd}"),
        });
    }
    let pair_bytes = checked_len(&[td.pixels().saturating_add(sd.pixels()), 4], "pair")?;
    let total = checked_len(&[count, pair_bytes], "dataset payload")?;
    if r.remaining() < total {
        // report the start of the first incomplete pair
        let whole = r.remaining().checked_div(pair_bytes).unwrap_or(0);
        return Err(Error::Truncated {
            offset: HEADER_LEN + whole * pair_bytes,
            context: format!("pair {whole} of {count}"),
        });
    }
    r.expect_exact(total, "dataset pairs")?;
    let mut pairs = Vec::with_capacity(count);
    for i in 0..count {
        let at = r.pos();
        let t = r.f32s(td.pixels(), "target")?;
        let s = r.f32s(sd.pixels(), "speckle")?;
        if t.iter().any(|v| !(0.0..=1.0).contains(v)) || s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format {
                expected: "targets in [0, 1] and finite speckles".into(),
                found: format!("out-of-range value in pair {i} at byte {at}"),
            });
        }
        pairs.push((Image::from_vec(td, t)?, Image::from_vec(sd, s)?));
    }
    Ok(SdsPayload {
        target_dims: td,
        speckle_dims: sd,
        pairs,
    })
}

/// Joins a payload with its sidecar into a [`Dataset`].
pub fn assemble(payload: SdsPayload, side: SdsSidecar) -> Result<Dataset> {
    let n = payload.pairs.len();
    if !side.gen_seeds.is_empty() && side.gen_seeds.len() != n {
        return Err(Error::Consistency(format!(
            "sidecar lists {} seeds for {n} pairs",
            side.gen_seeds.len()
        )));
    }
    if n > 0 && payload.target_dims != side.spec.object_dims() {
        return Err(Error::Consistency(format!(
            "file holds {} targets, spec describes {}",
            payload.target_dims,
            side.spec.object_dims()
        )));
    }
    let pairs = payload
        .pairs
        .into_iter()
        .enumerate()
        .map(|(i, (t, s))| Pair {
            target: TargetImage {
                image: t,
                family: side.spec.family,
                gen_seed: side.gen_seeds.get(i).copied().flatten(),
            },
            speckle: SpecklePattern {
                image: s,
                medium_fingerprint: side.medium_fingerprint,
            },
        })
        .collect();
    Dataset::from_parts(side.spec, side.medium_fingerprint, pairs)
}

pub fn sidecar_of(ds: &Dataset) -> SdsSidecar {
    SdsSidecar {
        spec: ds.spec.clone(),
        medium_fingerprint: ds.medium_fingerprint,
        gen_seeds: ds.targets().map(|t| t.gen_seed).collect(),
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    write_file(path, &encode_dataset(ds))?;
    write_file(
        &sidecar_path(path),
        serde_json::to_string_pretty(&sidecar_of(ds))?.as_bytes(),
    )
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let payload = decode_payload(&read_file(path)?)?;
    let side: SdsSidecar = serde_json::from_slice(&read_file(&sidecar_path(path))?)?;
    assemble(payload, side)
}

/// `ds` as it reads back from disk: every value rounded through `f32`.
pub fn quantized(ds: &Dataset) -> Dataset {
    let mut q = ds.clone();
    let round = |img: &Image| img.map(|v| v as f32 as f64);
    for p in q.pairs.iter_mut() {
        p.target.image = round(&p.target.image);
        p.speckle.image = round(&p.speckle.image);
    }
    q
}

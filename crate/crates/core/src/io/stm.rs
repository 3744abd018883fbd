//! `.stm` medium files.
//!
//! `"STM1"`, kind `u8` (0 linear, 1 coherent), rows `u32`, cols `u32`, then
//! `rows · cols` entries as `f64`, row-major; coherent entries are stored as
//! interleaved `(re, im)` pairs. Rows index speckle pixels, columns target
//! pixels. The image dims and seed live in a JSON sidecar holding the
//! [`MediumSpec`].

use std::path::Path;

use nalgebra::DMatrix;

use super::{checked_len, put_f64s, read_file, sidecar_path, write_file, Reader};
use crate::error::{Error, Result};
use crate::image::Dims;
use crate::media::{MediumKind, MediumSpec, TransferMatrix, TransmissionMedium};

pub const MAGIC: &[u8; 4] = b"STM1";
pub const HEADER_LEN: usize = 13;

pub fn encode_medium(medium: &TransmissionMedium) -> Vec<u8> {
    let (rows, cols) = medium.matrix().shape();
    let per = match medium.kind() {
        MediumKind::Linear => 8,
        MediumKind::Coherent => 16,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * per);
    out.extend_from_slice(MAGIC);
    out.push(medium.kind().code());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    match medium.matrix() {
        TransferMatrix::Real(m) => {
            put_f64s(
                &mut out,
                (0..rows).flat_map(|r| (0..cols).map(move |c| m[(r, c)])),
            );
        }
        TransferMatrix::Complex { re, im } => {
            put_f64s(
                &mut out,
                (0..rows).flat_map(|r| (0..cols).flat_map(move |c| [re[(r, c)], im[(r, c)]])),
            );
        }
    }
    out
}

fn square_dims(pixels: usize) -> Option<Dims> {
    let side = (pixels as f64).sqrt().round() as usize;
    (side * side == pixels).then(|| Dims::square(side))
}

/// Decodes a medium. Without a `spec` the image dims are taken to be square
/// and the seed is recorded as 0.
pub fn decode_medium(bytes: &[u8], spec: Option<&MediumSpec>) -> Result<TransmissionMedium> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    let code = r.u8("kind")?;
    let kind = MediumKind::from_code(code).ok_or_else(|| Error::Format {
        expected: "medium kind 0 or 1".into(),
        found: code.to_string(),
    })?;
    let rows = r.u32("rows")? as usize;
    let cols = r.u32("cols")? as usize;
    let per = if kind == MediumKind::Linear { 1 } else { 2 };
    let n = checked_len(&[rows, cols, per, 8], "medium payload")?;
    r.expect_exact(n, "medium entries")?;
    let vals = r.f64s(n / 8, "medium entries")?;

    let spec = match spec {
        Some(s) => {
            if s.kind != kind || s.out_dims.pixels() != rows || s.in_dims.pixels() != cols {
                return Err(Error::Consistency(format!(
                    "sidecar describes a {:?} {} -> {} medium, file holds {kind:?} {rows}x{cols}",
                    s.kind, s.in_dims, s.out_dims
                )));
            }
            *s
        }
        None => {
            let (i, o) = square_dims(cols).zip(square_dims(rows)).ok_or_else(|| {
                Error::Consistency(format!(
                    "{rows}x{cols} matrix has no square image dims; a sidecar spec is needed"
                ))
            })?;
            MediumSpec::new(kind, i, o, 0)
        }
    };
    spec.validate()?;
    let matrix = match kind {
        MediumKind::Linear => TransferMatrix::Real(DMatrix::from_row_slice(rows, cols, &vals)),
        MediumKind::Coherent => {
            let re: Vec<f64> = vals.iter().step_by(2).copied().collect();
            let im: Vec<f64> = vals.iter().skip(1).step_by(2).copied().collect();
            TransferMatrix::Complex {
                re: DMatrix::from_row_slice(rows, cols, &re),
                im: DMatrix::from_row_slice(rows, cols, &im),
            }
        }
    };
    TransmissionMedium::from_matrix(spec, matrix)
}

/// Writes `path` and its JSON sidecar.
pub fn save_medium(path: &Path, medium: &TransmissionMedium) -> Result<()> {
    write_file(path, &encode_medium(medium))?;
    write_file(
        &sidecar_path(path),
        serde_json::to_string_pretty(medium.spec())?.as_bytes(),
    )
}

/// Reads `path`, using its sidecar when present.
pub fn load_medium(path: &Path) -> Result<TransmissionMedium> {
    let bytes = read_file(path)?;
    let side = sidecar_path(path);
    let spec: Option<MediumSpec> = if side.exists() {
        Some(serde_json::from_slice(&read_file(&side)?)?)
    } else {
        None
    };
    decode_medium(&bytes, spec.as_ref())
}

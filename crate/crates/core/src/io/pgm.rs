//! Binary greymap (`P5`) images with 8-bit samples.

use std::path::Path;

use super::{read_file, write_file};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};

/// Encodes with maxval 255; values are clamped to `[0, 1]` and rounded.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let d = img.dims();
    let mut out = format!("P5\n{} {}\n255\n", d.width, d.height).into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

/// Header token scanner: whitespace separated, `#` comments to end of line.
struct Tokens<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self, what: &str) -> Result<&'a [u8]> {
        loop {
            match self.buf.get(self.pos) {
                Some(b'#') => {
                    while self.buf.get(self.pos).is_some_and(|&c| c != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => {
                    return Err(Error::Truncated {
                        offset: self.pos,
                        context: format!("pgm header field {what}"),
                    })
                }
            }
        }
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(|c| !c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        Ok(&self.buf[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format {
                expected: format!("decimal {what}"),
                found: String::from_utf8_lossy(t).into_owned(),
            })
    }
}

/// Decodes a `P5` image with maxval ≤ 255 into values `sample / maxval`.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut t = Tokens { buf: bytes, pos: 0 };
    let magic = t.next("magic")?;
    if magic != b"P5" {
        return Err(Error::Format {
            expected: "pgm magic P5".into(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    let width = t.number("width")?;
    let height = t.number("height")?;
    let maxval = t.number("maxval")?;
    if !(1..=255).contains(&maxval) || width == 0 || height == 0 {
        return Err(Error::Format {
            expected: "8-bit pgm with nonzero size".into(),
            found: format!("{width}x{height}, maxval {maxval}"),
        });
    }
    // exactly one whitespace byte separates the header from the raster
    let start = t.pos + 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Consistency("pgm size overflows".into()))?;
    if bytes.len() < start.saturating_add(n) {
        return Err(Error::Truncated {
            offset: bytes.len(),
            context: format!("pgm raster needs {n} bytes"),
        });
    }
    let raster = &bytes[start..start + n];
    if let Some(&bad) = raster.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::Format {
            expected: format!("samples <= {maxval}"),
            found: bad.to_string(),
        });
    }
    Image::from_vec(
        Dims::new(height, width),
        raster.iter().map(|&v| v as f64 / maxval as f64).collect(),
    )
}

pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    write_file(path, &encode_pgm(img))
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    decode_pgm(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_on_the_byte_grid() {
        let img = Image::from_fn(Dims::new(3, 5), |y, x| ((y * 5 + x) * 17) as f64 / 255.0);
        let bytes = encode_pgm(&img);
        assert!(bytes.starts_with(b"P5\n5 3\n255\n"));
        let back = decode_pgm(&bytes).unwrap();
        for (a, b) in back.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn comments_and_maxval() {
        let mut b = b"P5 # made by hand\n2 1\n# max\n15\n".to_vec();
        b.extend([0u8, 15]);
        assert_eq!(decode_pgm(&b).unwrap().data(), &[0.0, 1.0]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            decode_pgm(b"P2\n1 1\n255\n\x00"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5\n2 2\n255\n\x00"),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            decode_pgm(b"P5\n1 1\n65535\n\x00\x00"),
            Err(Error::Format { .. })
        ));
        assert!(matches!(decode_pgm(b""), Err(Error::Truncated { .. })));
    }
}

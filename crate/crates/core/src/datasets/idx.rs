//! IDX containers (the MNIST distribution format): big-endian headers,
//! unsigned-byte payloads.

use super::transforms::{binarize, fit_to_dims};
use super::{Family, TargetImage};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` bytes, image-major then row-major.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            offset: bytes.len(),
            context: format!("idx header field {what}"),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = be_u32(bytes, 0, "magic")?;
    if magic != expected {
        return Err(Error::Format {
            expected: format!("idx magic {expected:#010x}"),
            found: format!("{magic:#010x}"),
        });
    }
    Ok(())
}

fn exact_payload(bytes: &[u8], start: usize, len: usize) -> Result<&[u8]> {
    let end = start
        .checked_add(len)
        .ok_or_else(|| Error::Consistency("idx payload size overflows".into()))?;
    if bytes.len() < end {
        return Err(Error::Truncated {
            offset: bytes.len(),
            context: format!("idx payload needs {end} bytes"),
        });
    }
    if bytes.len() > end {
        return Err(Error::Consistency(format!(
            "{} trailing bytes after idx payload",
            bytes.len() - end
        )));
    }
    Ok(&bytes[start..end])
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = be_u32(bytes, 4, "count")? as usize;
    let rows = be_u32(bytes, 8, "rows")? as usize;
    let cols = be_u32(bytes, 12, "cols")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Consistency("idx image payload size overflows".into()))?;
    let pixels = exact_payload(bytes, 16, len)?.to_vec();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = be_u32(bytes, 4, "count")? as usize;
    Ok(exact_payload(bytes, 8, count)?.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGE_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Decodes IDX images into targets of `dims`.
///
/// Bytes are scaled by 1/255, then centre-padded (or bilinearly resized when
/// the source is larger). `Family::Digit` images are binarized at 0.5;
/// anything else is tagged `Family::External`.
pub fn load_idx(
    image_bytes: &[u8],
    label_bytes: Option<&[u8]>,
    dims: Dims,
    family: Family,
) -> Result<Vec<TargetImage>> {
    let images = parse_idx_images(image_bytes)?;
    if let Some(lb) = label_bytes {
        let labels = parse_idx_labels(lb)?;
        if labels.len() != images.count {
            return Err(Error::Consistency(format!(
                "{} images but {} labels",
                images.count,
                labels.len()
            )));
        }
    }
    let src = Dims::new(images.rows, images.cols);
    (0..images.count)
        .map(|i| {
            let raw = Image::from_vec(src, images.image(i).iter().map(|&b| b as f64 / 255.0).collect())?;
            let mut image = fit_to_dims(&raw, dims).map(|v| v.clamp(0.0, 1.0));
            let family = match family {
                Family::Digit => {
                    image = binarize(&image, 0.5);
                    Family::Digit
                }
                _ => Family::External,
            };
            Ok(TargetImage {
                image,
                family,
                gen_seed: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_2x2() -> Vec<u8> {
        let mut b = Vec::new();
        for v in [0x803u32, 1, 2, 2] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(&[0, 255, 255, 0]);
        b
    }

    #[test]
    fn hand_crafted_image() {
        let t = load_idx(&one_2x2(), None, Dims::square(2), Family::External).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].image.data(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let mut b = one_2x2();
        b[3] = 0x02;
        assert!(matches!(parse_idx_images(&b), Err(Error::Format { .. })));
        assert!(matches!(parse_idx_images(&[]), Err(Error::Truncated { .. })));
        let short = &one_2x2()[..18];
        assert!(matches!(parse_idx_images(short), Err(Error::Truncated { .. })));
        let mut long = one_2x2();
        long.push(7);
        assert!(parse_idx_images(&long).is_err());
    }

    #[test]
    fn label_count_mismatch() {
        let labels = encode_idx_labels(&[3, 4]);
        assert!(matches!(
            load_idx(&one_2x2(), Some(&labels), Dims::square(2), Family::Digit),
            Err(Error::Consistency(_))
        ));
        let labels = encode_idx_labels(&[3]);
        assert!(load_idx(&one_2x2(), Some(&labels), Dims::square(2), Family::Digit).is_ok());
    }

    #[test]
    fn digit_family_binarizes_and_pads() {
        let mut b = Vec::new();
        for v in [0x803u32, 1, 2, 2] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(&[10, 200, 128, 127]);
        let t = load_idx(&b, None, Dims::square(4), Family::Digit).unwrap();
        assert_eq!(t[0].family, Family::Digit);
        assert!(t[0].image.is_binary());
        assert_eq!(t[0].image.get(1, 2), 1.0);
        assert_eq!(t[0].image.get(2, 1), 1.0);
        assert_eq!(t[0].image.get(2, 2), 0.0);
        assert_eq!(t[0].image.sum(), 2.0);
    }

    proptest! {
        #[test]
        fn images_round_trip_bytes(
            count in 0usize..4, rows in 1usize..5, cols in 1usize..5, fill in any::<u8>()
        ) {
            let pixels: Vec<u8> = (0..count * rows * cols).map(|i| (i as u8).wrapping_mul(31) ^ fill).collect();
            let imgs = IdxImages { count, rows, cols, pixels };
            let bytes = encode_idx_images(&imgs);
            let back = parse_idx_images(&bytes).unwrap();
            prop_assert_eq!(encode_idx_images(&back), bytes);
        }

        #[test]
        fn labels_round_trip_bytes(labels in proptest::collection::vec(0u8..10, 0..20)) {
            let bytes = encode_idx_labels(&labels);
            prop_assert_eq!(encode_idx_labels(&parse_idx_labels(&bytes).unwrap()), bytes);
        }
    }
}

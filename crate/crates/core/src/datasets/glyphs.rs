//! Binary digit targets drawn from a 5x7 bitmap font.

use rand::Rng as _;

use super::{Family, TargetImage};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::seed::rng_from_seed;

pub const GLYPH_ROWS: usize = 7;
pub const GLYPH_COLS: usize = 5;

#[rustfmt::skip]
const FONT: [[&str; GLYPH_ROWS]; 10] = [
    [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
    ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
    [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
    ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
    ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
    ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
    ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
    ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
    [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
    [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
];

fn glyph_lit(digit: usize, row: usize, col: usize) -> bool {
    FONT[digit][row].as_bytes()[col] == b'#'
}

/// Width of the blank frame that every digit leaves untouched along one axis
/// (12.5% of the side, rounded up).
pub fn border_width(side: usize) -> usize {
    (side as f64 * 0.125).ceil() as usize
}

pub fn gen_digit(seed: u64, dims: Dims) -> Result<TargetImage> {
    let mut rng = rng_from_seed(seed);
    let digit = rng.random_range(0..10);
    render(&mut rng, seed, dims, digit)
}

/// Same placement statistics as [`gen_digit`] but with a chosen glyph.
pub fn gen_digit_glyph(seed: u64, dims: Dims, digit: usize) -> Result<TargetImage> {
    if digit > 9 {
        return Err(Error::InvalidArgument(format!("no glyph for digit {digit}")));
    }
    let mut rng = rng_from_seed(seed);
    let _ = rng.random_range(0..10);
    render(&mut rng, seed, dims, digit)
}

fn render(rng: &mut crate::seed::Rng, seed: u64, dims: Dims, digit: usize) -> Result<TargetImage> {
    if dims.height < 8 || dims.width < 8 {
        return Err(Error::InvalidSpec(format!(
            "digit targets need at least 8x8, got {dims}"
        )));
    }
    let (by, bx) = (border_width(dims.height), border_width(dims.width));
    let (inner_h, inner_w) = (dims.height - 2 * by, dims.width - 2 * bx);

    let short = dims.height.min(dims.width) as f64;
    let side = rng.random_range(0.5..=0.8) * short;
    let dilate = rng.random_bool(0.5);
    let pad = if dilate { 2 } else { 0 };

    let mut gh = (side.round() as usize).clamp(1, inner_h - pad);
    let mut gw = ((gh as f64 * GLYPH_COLS as f64 / GLYPH_ROWS as f64).round() as usize).max(1);
    if gw > inner_w - pad {
        gw = inner_w - pad;
        gh = gh.min(inner_h - pad);
    }

    // Nearest-neighbour scale of the bitmap into a gh x gw box, surrounded by
    // a one-pixel margin when dilation will grow it.
    let mask_dims = Dims::new(gh + pad, gw + pad);
    let off = pad / 2;
    let mut mask = Image::zeros(mask_dims);
    for r in 0..gh {
        for c in 0..gw {
            let sr = r * GLYPH_ROWS / gh;
            let sc = c * GLYPH_COLS / gw;
            if glyph_lit(digit, sr, sc) {
                mask.set(r + off, c + off, 1.0);
            }
        }
    }
    if dilate {
        mask = dilate3x3(&mask);
    }

    let oy = by + rng.random_range(0..=inner_h - mask_dims.height);
    let ox = bx + rng.random_range(0..=inner_w - mask_dims.width);
    let mut image = Image::zeros(dims);
    for r in 0..mask_dims.height {
        for c in 0..mask_dims.width {
            if mask.get(r, c) > 0.0 {
                image.set(oy + r, ox + c, 1.0);
            }
        }
    }
    Ok(TargetImage {
        image,
        family: Family::Digit,
        gen_seed: Some(seed),
    })
}

fn dilate3x3(mask: &Image) -> Image {
    let d = mask.dims();
    Image::from_fn(d, |y, x| {
        let y0 = y.saturating_sub(1);
        let x0 = x.saturating_sub(1);
        let lit = (y0..=(y + 1).min(d.height - 1))
            .any(|yy| (x0..=(x + 1).min(d.width - 1)).any(|xx| mask.get(yy, xx) > 0.0));
        if lit {
            1.0
        } else {
            0.0
        }
    })
}

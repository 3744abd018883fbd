//! Grayscale textures with a flat per-pixel value distribution.
//!
//! Blurred white noise supplies spatial structure; a per-image rank
//! transform then replaces the values by a fixed uniform grid so every
//! image has exactly the same histogram and no pixel is ever zero.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Family, TargetImage};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::seed::rng_from_seed;

pub const TEXTURE_MIN: f64 = 0.02;
pub const TEXTURE_MAX: f64 = 1.0;

/// The sorted values every texture of `n` pixels takes.
pub fn texture_grid(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![TEXTURE_MAX];
    }
    (0..n)
        .map(|k| TEXTURE_MIN + (TEXTURE_MAX - TEXTURE_MIN) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn gen_texture(seed: u64, dims: Dims) -> Result<TargetImage> {
    if dims.height < 8 || dims.width < 8 {
        return Err(Error::InvalidSpec(format!(
            "texture targets need at least 8x8, got {dims}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let sigma = rng.random_range(1.0..=2.0);
    let noise = Image::from_fn(dims, |_, _| StandardNormal.sample(&mut rng));
    let blurred = gaussian_blur(&noise, sigma);

    let mut order: Vec<usize> = (0..dims.pixels()).collect();
    let v = blurred.data();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let grid = texture_grid(dims.pixels());
    let mut out = vec![0.0; dims.pixels()];
    for (rank, &idx) in order.iter().enumerate() {
        out[idx] = grid[rank];
    }
    Ok(TargetImage {
        image: Image::from_vec(dims, out)?,
        family: Family::Texture,
        gen_seed: Some(seed),
    })
}

/// Mirror index for half-sample symmetric extension (`d c b a | a b c d`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian filter with reflective boundaries.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let d = img.dims();
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let rows = Image::from_fn(d, |y, x| {
        k.iter()
            .enumerate()
            .map(|(t, w)| w * img.get(y, reflect(x as isize + t as isize - r, d.width)))
            .sum()
    });
    Image::from_fn(d, |y, x| {
        k.iter()
            .enumerate()
            .map(|(t, w)| w * rows.get(reflect(y as isize + t as isize - r, d.height), x))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(2, 4), 2);
    }

    #[test]
    fn blur_preserves_constants() {
        let img = Image::filled(Dims::square(8), 0.7);
        let b = gaussian_blur(&img, 1.7);
        assert!(b.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn values_are_the_fixed_grid() {
        for seed in 0..20 {
            let t = gen_texture(seed, Dims::square(16)).unwrap();
            let mut v = t.image.data().to_vec();
            v.sort_by(f64::total_cmp);
            assert_eq!(v, texture_grid(256));
            let (lo, hi) = t.image.min_max();
            assert!(lo >= 0.02 && hi <= 1.0);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = gen_texture(4, Dims::square(12)).unwrap();
        assert_eq!(a, gen_texture(4, Dims::square(12)).unwrap());
        assert_ne!(a, gen_texture(5, Dims::square(12)).unwrap());
    }

    #[test]
    fn too_small_rejected() {
        assert!(gen_texture(0, Dims::new(8, 7)).is_err());
    }
}

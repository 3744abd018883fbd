//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use scatter_core::learners::net::batch_loss;
use scatter_core::learners::{Batch, NetParams};
use scatter_core::seed::rng_from_seed;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng_from_seed(seed);
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// Minimizes `‖Xc − W Yc‖² + λ‖W‖²` by plain full-batch gradient descent,
/// with the centring and λ computed from scratch. Columns are samples.
pub fn ridge_by_gradient_descent(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda_rel: f64) -> DMatrix<f64> {
    let n = x.ncols();
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for r in 0..m.nrows() {
            let mean: f64 = (0..n).map(|j| m[(r, j)]).sum::<f64>() / n as f64;
            for j in 0..n {
                c[(r, j)] -= mean;
            }
        }
        c
    };
    let (xc, yc) = (center(x), center(y));
    let p = y.nrows();
    let mut trace = 0.0;
    for r in 0..p {
        for j in 0..n {
            trace += yc[(r, j)] * yc[(r, j)];
        }
    }
    let lambda = lambda_rel * trace / p as f64;
    // Lipschitz bound of the gradient: 2 (tr S_yy + p λ)
    let step = 1.0 / (2.0 * (trace + p as f64 * lambda));
    let mut w = DMatrix::<f64>::zeros(x.nrows(), p);
    for _ in 0..2_000_000 {
        let resid = &xc - &w * &yc;
        let grad = (resid * yc.transpose()) * -2.0 + &w * (2.0 * lambda);
        let delta = grad * step;
        w -= &delta;
        if delta.amax() < 1e-15 {
            break;
        }
    }
    w
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
}

/// Central differences of [`batch_loss`] against analytic gradients, with
/// relative error `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn finite_difference_check(
    params: &NetParams,
    batch: &Batch,
    w: f64,
    h: f64,
    analytic: &NetParams,
) -> GradCheck {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let blocks = |p: &NetParams| -> Vec<Vec<f64>> {
        vec![
            p.w1.as_slice().to_vec(),
            p.b1.as_slice().to_vec(),
            p.w2.as_slice().to_vec(),
            p.b2.as_slice().to_vec(),
        ]
    };
    let grads = blocks(analytic);
    for (b, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let shifted = |d: f64| {
                let mut q = params.clone();
                match b {
                    0 => q.w1.as_mut_slice()[i] += d,
                    1 => q.b1.as_mut_slice()[i] += d,
                    2 => q.w2.as_mut_slice()[i] += d,
                    _ => q.b2.as_mut_slice()[i] += d,
                }
                batch_loss(&q, batch, w)
            };
            let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
            let a = g[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        max_rel_err: worst,
        checked,
    }
}

pub fn random_batch(in_dim: usize, out_dim: usize, b: usize, seed: u64) -> Batch {
    let mut rng = rng_from_seed(seed);
    Batch {
        speckles: DMatrix::from_fn(in_dim, b, |_, _| rng.random_range(0.0..1.0)),
        targets: DMatrix::from_fn(out_dim, b, |_, _| rng.random_range(0.0..1.0)),
    }
}

/// Pearson correlation computed directly from the definition.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Outcome of feeding damaged copies of an encoded file to a decoder.
pub struct FuzzOutcome {
    pub cases: usize,
    /// Case descriptions that panicked or decoded without error.
    pub failures: Vec<String>,
}

/// Damages `bytes` `cases` times and requires every decode to return `Err`.
///
/// A quarter of the cases truncate at a random length and a quarter append
/// a random tail. The rest XOR a nonzero byte into one of the `structural` offsets, which must
/// be header fields whose every value change is detectable.
pub fn fuzz_decoder<T>(
    bytes: &[u8],
    structural: &[usize],
    cases: usize,
    seed: u64,
    decode: impl Fn(&[u8]) -> scatter_core::Result<T>,
) -> FuzzOutcome {
    let mut rng = rng_from_seed(seed);
    let mut failures = Vec::new();
    for i in 0..cases {
        let (damaged, what) = match i % 4 {
            0 => {
                let cut = rng.random_range(0..bytes.len());
                (bytes[..cut].to_vec(), format!("truncate to {cut}"))
            }
            1 => {
                let extra = rng.random_range(1..16);
                let mut d = bytes.to_vec();
                d.extend((0..extra).map(|_| rng.random::<u8>()));
                (d, format!("append {extra}"))
            }
            _ => {
                let at = structural[rng.random_range(0..structural.len())];
                let flip = rng.random_range(1..=255u8);
                let mut d = bytes.to_vec();
                d[at] ^= flip;
                (d, format!("xor {flip:#04x} at {at}"))
            }
        };
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| decode(&damaged).is_err()));
        match result {
            Ok(true) => {}
            Ok(false) => failures.push(format!("case {i}: {what} decoded silently")),
            Err(_) => failures.push(format!("case {i}: {what} panicked")),
        }
    }
    FuzzOutcome { cases, failures }
}

//! Closed-form mean-centred ridge regression from speckles to targets.
//!
//! With centred moments `S_yy = Σ (y−ȳ)(y−ȳ)ᵀ` and `S_xy = Σ (x−x̄)(y−ȳ)ᵀ`,
//! the weights solve `(S_yy + λ I) Wᵀ = S_xyᵀ` where
//! `λ = lambda_rel · tr(S_yy) / speckle_pixels`. A target pixel that never
//! varies in training has an all-zero row in `S_xy`, hence an all-zero row
//! in `W`, and is always predicted as its training constant.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LearnedMapping, MappingParams};
use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::image::Dims;
use crate::linalg::{conjugate_gradient, Cholesky};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RidgeSolver {
    Cholesky,
    ConjugateGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RidgeConfig {
    pub lambda_rel: f64,
    pub solver: RidgeSolver,
    pub cg_tol: f64,
    /// Defaults to ten times the number of speckle pixels.
    pub cg_max_iter: Option<usize>,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        RidgeConfig {
            lambda_rel: 1e-4,
            solver: RidgeSolver::Cholesky,
            cg_tol: 1e-10,
            cg_max_iter: None,
        }
    }
}

/// Row means of `m`; a row holding a single repeated value gets exactly
/// that value.
fn row_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols() as f64;
    DVector::from_iterator(
        m.nrows(),
        m.row_iter().map(|row| {
            let first = row[0];
            if row.iter().all(|&v| v == first) {
                first
            } else {
                row.sum() / n
            }
        }),
    )
}

/// Fits the affine ridge map on column-stacked samples: `targets` is
/// `(target_pixels, n)`, `speckles` is `(speckle_pixels, n)`.
pub fn fit_ridge(
    targets: &DMatrix<f64>,
    speckles: &DMatrix<f64>,
    in_dims: Dims,
    out_dims: Dims,
    cfg: &RidgeConfig,
) -> Result<LearnedMapping> {
    let n = targets.ncols();
    if speckles.ncols() != n {
        return Err(Error::Shape(format!(
            "{n} targets but {} speckles",
            speckles.ncols()
        )));
    }
    if targets.nrows() != out_dims.pixels() || speckles.nrows() != in_dims.pixels() {
        return Err(Error::Shape("sample length does not match dims".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "ridge needs at least 2 pairs, got {n}"
        )));
    }
    if !(cfg.lambda_rel >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda_rel must be >= 0, got {}",
            cfg.lambda_rel
        )));
    }

    let target_mean = row_means(targets);
    let speckle_mean = row_means(speckles);
    let mut xc = targets.clone();
    for mut col in xc.column_iter_mut() {
        col -= &target_mean;
    }
    let mut yc = speckles.clone();
    for mut col in yc.column_iter_mut() {
        col -= &speckle_mean;
    }
    let yct = yc.transpose();
    let mut a = &yc * &yct;
    // (S_xy)ᵀ = Yc Xcᵀ
    let rhs = &yc * xc.transpose();
    drop(yct);

    let p = a.nrows();
    let lambda = cfg.lambda_rel * a.trace() / p as f64;
    for i in 0..p {
        a[(i, i)] += lambda;
    }

    let wt = match cfg.solver {
        RidgeSolver::Cholesky => Cholesky::factor(&a)?.solve(&rhs),
        RidgeSolver::ConjugateGradient => {
            let max_iter = cfg.cg_max_iter.unwrap_or(10 * p);
            conjugate_gradient(&a, &rhs, cfg.cg_tol, max_iter)?.x
        }
    };
    Ok(LearnedMapping {
        in_dims,
        out_dims,
        training_fingerprint: 0,
        params: MappingParams::RidgeAffine {
            weights: wt.transpose(),
            target_mean,
            speckle_mean,
        },
    })
}

/// Stacks a dataset into `(targets, speckles)` column matrices.
pub fn stack_dataset(dataset: &Dataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (td, sd) = match (dataset.target_dims(), dataset.speckle_dims()) {
        (Some(t), Some(s)) => (t, s),
        _ => return Err(Error::EmptyInput("dataset has no pairs".into())),
    };
    let n = dataset.len();
    let mut x = DMatrix::<f64>::zeros(td.pixels(), n);
    let mut y = DMatrix::<f64>::zeros(sd.pixels(), n);
    for (c, p) in dataset.pairs.iter().enumerate() {
        x.column_mut(c).copy_from_slice(p.target.image.data());
        y.column_mut(c).copy_from_slice(p.speckle.image.data());
    }
    Ok((x, y))
}

pub fn train_ridge(dataset: &Dataset, cfg: &RidgeConfig) -> Result<LearnedMapping> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "ridge needs at least 2 pairs, got {}",
            dataset.len()
        )));
    }
    let (x, y) = stack_dataset(dataset)?;
    let td = dataset.target_dims().expect("nonempty");
    let sd = dataset.speckle_dims().expect("nonempty");
    let mut mapping = fit_ridge(&x, &y, sd, td, cfg)?;
    mapping.training_fingerprint = dataset.training_fingerprint();
    Ok(mapping)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use rand::Rng;

    fn random_cols(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng_from_seed(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
    }

    fn weights(m: &LearnedMapping) -> &DMatrix<f64> {
        match &m.params {
            MappingParams::RidgeAffine { weights, .. } => weights,
            _ => unreachable!(),
        }
    }

    #[test]
    fn identity_system_is_recovered() {
        let d = Dims::square(3);
        let v = random_cols(9, 50, 1);
        let cfg = RidgeConfig {
            lambda_rel: 1e-12,
            ..Default::default()
        };
        let m = fit_ridge(&v, &v, d, d, &cfg).unwrap();
        let w = weights(&m);
        assert!((w - DMatrix::<f64>::identity(9, 9)).abs().max() < 1e-6);
        for c in 0..50 {
            let y = Image::from_vec(d, v.column(c).iter().copied().collect()).unwrap();
            let r = m.predict(&y).unwrap();
            for (a, b) in r.raw_values.data().iter().zip(y.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn constant_target_pixel_gets_zero_row() {
        let mut x = random_cols(6, 30, 2);
        let y = random_cols(8, 30, 3);
        for c in 0..30 {
            x[(4, c)] = 0.37;
        }
        let m = fit_ridge(&x, &y, Dims::new(2, 4), Dims::new(2, 3), &RidgeConfig::default()).unwrap();
        assert!(weights(&m).row(4).iter().all(|&v| v == 0.0));
        let probe = Image::from_vec(Dims::new(2, 4), vec![5.0; 8]).unwrap();
        assert_eq!(m.predict(&probe).unwrap().raw_values.data()[4], 0.37);
    }

    #[test]
    fn cg_matches_cholesky() {
        let x = random_cols(10, 40, 4);
        let y = random_cols(15, 40, 5);
        let (i, o) = (Dims::new(3, 5), Dims::new(2, 5));
        let a = fit_ridge(&x, &y, i, o, &RidgeConfig::default()).unwrap();
        let cg = RidgeConfig {
            solver: RidgeSolver::ConjugateGradient,
            ..Default::default()
        };
        let b = fit_ridge(&x, &y, i, o, &cg).unwrap();
        assert!((weights(&a) - weights(&b)).abs().max() < 1e-6);
    }

    #[test]
    fn cg_iteration_cap_reports_residual() {
        let x = random_cols(10, 40, 4);
        let y = random_cols(15, 40, 5);
        let cfg = RidgeConfig {
            solver: RidgeSolver::ConjugateGradient,
            cg_max_iter: Some(1),
            ..Default::default()
        };
        assert!(matches!(
            fit_ridge(&x, &y, Dims::new(3, 5), Dims::new(2, 5), &cfg),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn rejects_tiny_or_singular_input() {
        let x = random_cols(4, 1, 0);
        assert!(fit_ridge(&x, &x, Dims::square(2), Dims::square(2), &RidgeConfig::default()).is_err());
        // identical speckles: S_yy = 0, nothing to regularize against
        let y = DMatrix::from_element(4, 5, 0.5);
        let x = random_cols(4, 5, 1);
        assert!(matches!(
            fit_ridge(&x, &y, Dims::square(2), Dims::square(2), &RidgeConfig::default()),
            Err(Error::Solver(_))
        ));
    }
}

//! Simulated scattering media and the forward model `Y = T X`.
//!
//! Both planes are flattened row-major, so column `y·w + x` of the
//! transmission matrix is the response to object pixel `(y, x)` and row
//! `v·W + u` is detector pixel `(v, u)`.

use nalgebra::{Complex, DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::linalg::Cholesky;
use crate::seed::{fingerprint, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumKind {
    /// Nonnegative real matrix acting on intensities.
    Linear,
    /// Complex field matrix; the detector records `|T x|²`.
    Coherent,
}

impl MediumKind {
    pub fn code(self) -> u8 {
        match self {
            MediumKind::Linear => 0,
            MediumKind::Coherent => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(MediumKind::Linear),
            1 => Some(MediumKind::Coherent),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MediumSpec {
    pub kind: MediumKind,
    pub in_dims: Dims,
    pub out_dims: Dims,
    pub seed: u64,
}

impl MediumSpec {
    pub fn new(kind: MediumKind, in_dims: Dims, out_dims: Dims, seed: u64) -> Self {
        MediumSpec {
            kind,
            in_dims,
            out_dims,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("in_dims", self.in_dims), ("out_dims", self.out_dims)] {
            if d.height < 2 || d.width < 2 {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be at least 2x2, got {d}"
                )));
            }
        }
        Ok(())
    }

    /// 64-bit content hash of the spec; tags every speckle it produces.
    pub fn fingerprint(&self) -> u64 {
        let mut bytes = Vec::with_capacity(48);
        bytes.extend_from_slice(b"MSPEC1");
        bytes.push(self.kind.code());
        for v in [
            self.in_dims.height,
            self.in_dims.width,
            self.out_dims.height,
            self.out_dims.width,
        ] {
            bytes.extend_from_slice(&(v as u64).to_le_bytes());
        }
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        fingerprint(&bytes)
    }
}

/// Entries of a transmission matrix, shape `(out_pixels, in_pixels)`.
#[derive(Clone, Debug, PartialEq)]
pub enum TransferMatrix {
    Real(DMatrix<f64>),
    /// Real and imaginary parts held separately so products stay real GEMMs.
    Complex {
        re: DMatrix<f64>,
        im: DMatrix<f64>,
    },
}

impl TransferMatrix {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            TransferMatrix::Real(m) => m.shape(),
            TransferMatrix::Complex { re, .. } => re.shape(),
        }
    }

    pub fn complex_entry(&self, row: usize, col: usize) -> Complex<f64> {
        match self {
            TransferMatrix::Real(m) => Complex::new(m[(row, col)], 0.0),
            TransferMatrix::Complex { re, im } => Complex::new(re[(row, col)], im[(row, col)]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMedium {
    spec: MediumSpec,
    matrix: TransferMatrix,
}

/// A detector-plane measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct SpecklePattern {
    pub image: Image,
    pub medium_fingerprint: u64,
}

impl AsRef<Image> for SpecklePattern {
    fn as_ref(&self) -> &Image {
        &self.image
    }
}

/// Draws a medium from the seeded generator.
///
/// LINEAR entries are `|N(0,1)| / in_pixels`; COHERENT entries have real and
/// imaginary parts i.i.d. `N(0, 1/(2·in_pixels))`. Entries are drawn in
/// row-major order of the matrix.
pub fn generate_medium(spec: MediumSpec) -> Result<TransmissionMedium> {
    spec.validate()?;
    let rows = spec.out_dims.pixels();
    let cols = spec.in_dims.pixels();
    let n_in = cols as f64;
    let mut rng = rng_from_seed(spec.seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let matrix = match spec.kind {
        MediumKind::Linear => {
            let mut m = DMatrix::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    m[(r, c)] = draw().abs() / n_in;
                }
            }
            TransferMatrix::Real(m)
        }
        MediumKind::Coherent => {
            let scale = (1.0 / (2.0 * n_in)).sqrt();
            let mut re = DMatrix::zeros(rows, cols);
            let mut im = DMatrix::zeros(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    re[(r, c)] = draw() * scale;
                    im[(r, c)] = draw() * scale;
                }
            }
            TransferMatrix::Complex { re, im }
        }
    };
    Ok(TransmissionMedium { spec, matrix })
}

impl TransmissionMedium {
    /// Wraps an explicit matrix, e.g. one loaded from disk or built by a test.
    pub fn from_matrix(spec: MediumSpec, matrix: TransferMatrix) -> Result<Self> {
        let expected = (spec.out_dims.pixels(), spec.in_dims.pixels());
        if matrix.shape() != expected {
            return Err(Error::Shape(format!(
                "matrix is {:?}, spec needs {:?}",
                matrix.shape(),
                expected
            )));
        }
        match (&matrix, spec.kind) {
            (TransferMatrix::Real(m), MediumKind::Linear) => {
                if m.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "linear medium entries must be finite and nonnegative".into(),
                    ));
                }
            }
            (TransferMatrix::Complex { re, im }, MediumKind::Coherent) => {
                if re.iter().chain(im.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("non-finite coherent entry".into()));
                }
            }
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "matrix storage does not match kind {:?}",
                    spec.kind
                )))
            }
        }
        Ok(TransmissionMedium { spec, matrix })
    }

    pub fn spec(&self) -> &MediumSpec {
        &self.spec
    }

    pub fn kind(&self) -> MediumKind {
        self.spec.kind
    }

    pub fn in_dims(&self) -> Dims {
        self.spec.in_dims
    }

    pub fn out_dims(&self) -> Dims {
        self.spec.out_dims
    }

    pub fn matrix(&self) -> &TransferMatrix {
        &self.matrix
    }

    pub fn fingerprint(&self) -> u64 {
        self.spec.fingerprint()
    }

    fn check_target(&self, target: &Image) -> Result<()> {
        if target.dims() != self.spec.in_dims {
            return Err(Error::Shape(format!(
                "target is {}, medium expects {}",
                target.dims(),
                self.spec.in_dims
            )));
        }
        if !target.in_unit_range() {
            return Err(Error::InvalidArgument("target values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn propagate(&self, target: impl AsRef<Image>) -> Result<SpecklePattern> {
        let target = target.as_ref();
        self.check_target(target)?;
        let x = DVector::from_column_slice(target.data());
        let values: Vec<f64> = match &self.matrix {
            TransferMatrix::Real(t) => (t * x).as_slice().to_vec(),
            TransferMatrix::Complex { re, im } => {
                let a = re * &x;
                let b = im * &x;
                a.iter().zip(b.iter()).map(|(r, i)| r * r + i * i).collect()
            }
        };
        Ok(SpecklePattern {
            image: Image::from_vec(self.spec.out_dims, values)?,
            medium_fingerprint: self.fingerprint(),
        })
    }

    /// Propagates many targets with one matrix-matrix product.
    pub fn propagate_many(&self, targets: &[&Image]) -> Result<Vec<SpecklePattern>> {
        if targets.is_empty() {
            return Ok(Vec::new());
        }
        let n_in = self.spec.in_dims.pixels();
        let mut x = DMatrix::<f64>::zeros(n_in, targets.len());
        for (c, t) in targets.iter().enumerate() {
            self.check_target(t)?;
            x.column_mut(c).copy_from_slice(t.data());
        }
        let y = match &self.matrix {
            TransferMatrix::Real(t) => t * x,
            TransferMatrix::Complex { re, im } => {
                let a = re * &x;
                let b = im * &x;
                a.zip_map(&b, |r, i| r * r + i * i)
            }
        };
        let fp = self.fingerprint();
        y.column_iter()
            .map(|col| {
                Ok(SpecklePattern {
                    image: Image::from_vec(self.spec.out_dims, col.iter().copied().collect())?,
                    medium_fingerprint: fp,
                })
            })
            .collect()
    }
}

/// Tikhonov pseudoinverse `(TᵀT + ridge·I)⁻¹ Tᵀ` of a LINEAR medium,
/// shape `(in_pixels, out_pixels)`.
pub fn exact_inverse(medium: &TransmissionMedium, ridge: f64) -> Result<DMatrix<f64>> {
    let t = match medium.matrix() {
        TransferMatrix::Real(t) => t,
        TransferMatrix::Complex { .. } => {
            return Err(Error::UnsupportedKind(
                "a coherent medium has no linear inverse".into(),
            ))
        }
    };
    if !(ridge >= 0.0) {
        return Err(Error::InvalidArgument(format!("ridge must be >= 0, got {ridge}")));
    }
    let tt = t.transpose();
    let mut gram = &tt * t;
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge;
    }
    Ok(Cholesky::factor(&gram)?.solve(&tt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear(in_d: Dims, out_d: Dims, m: DMatrix<f64>) -> TransmissionMedium {
        let spec = MediumSpec::new(MediumKind::Linear, in_d, out_d, 0);
        TransmissionMedium::from_matrix(spec, TransferMatrix::Real(m)).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = MediumSpec::new(MediumKind::Linear, Dims::square(4), Dims::square(4), 7);
        assert_eq!(generate_medium(spec).unwrap(), generate_medium(spec).unwrap());
        let c = MediumSpec {
            kind: MediumKind::Coherent,
            ..spec
        };
        assert_eq!(generate_medium(c).unwrap(), generate_medium(c).unwrap());
    }

    #[test]
    fn linear_entries_nonnegative() {
        let spec = MediumSpec::new(MediumKind::Linear, Dims::square(16), Dims::square(24), 1);
        let m = generate_medium(spec).unwrap();
        let TransferMatrix::Real(t) = m.matrix() else {
            panic!()
        };
        assert_eq!(t.len(), 147_456);
        assert!(t.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn coherent_entry_power() {
        let spec = MediumSpec::new(MediumKind::Coherent, Dims::square(16), Dims::square(24), 1);
        let m = generate_medium(spec).unwrap();
        let TransferMatrix::Complex { re, im } = m.matrix() else {
            panic!()
        };
        let n = re.len() as f64;
        let mean_power: f64 = re.iter().zip(im.iter()).map(|(a, b)| a * a + b * b).sum::<f64>() / n;
        let target = 1.0 / 256.0;
        assert!(((mean_power - target) / target).abs() < 0.1, "{mean_power}");
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = MediumSpec::new(MediumKind::Linear, Dims::new(0, 4), Dims::square(4), 1);
        assert!(matches!(generate_medium(bad), Err(Error::InvalidSpec(_))));
        let thin = MediumSpec::new(MediumKind::Linear, Dims::new(1, 4), Dims::square(4), 1);
        assert!(generate_medium(thin).is_err());
    }

    #[test]
    fn identity_medium_passes_target_through() {
        let d = Dims::new(2, 3);
        let m = linear(d, d, DMatrix::identity(6, 6));
        let x = Image::from_vec(d, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(m.propagate(&x).unwrap().image, x);
    }

    #[test]
    fn averaging_medium_of_ones() {
        let d = Dims::square(3);
        let m = linear(d, Dims::square(2), DMatrix::from_element(4, 9, 1.0 / 9.0));
        let y = m.propagate(Image::filled(d, 1.0)).unwrap();
        for v in y.image.data() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_single_row() {
        // T = (1, i) on a 1x2 object; out dims need at least one row, so the
        // medium is built directly.
        let spec = MediumSpec::new(MediumKind::Coherent, Dims::new(1, 2), Dims::new(1, 1), 0);
        let m = TransmissionMedium::from_matrix(
            spec,
            TransferMatrix::Complex {
                re: DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                im: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            },
        )
        .unwrap();
        let y = m.propagate(Image::filled(Dims::new(1, 2), 1.0)).unwrap();
        assert!((y.image.data()[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let spec = MediumSpec::new(MediumKind::Linear, Dims::square(4), Dims::square(4), 3);
        let m = generate_medium(spec).unwrap();
        assert!(matches!(
            m.propagate(Image::zeros(Dims::square(5))),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn batch_matches_single() {
        let spec = MediumSpec::new(MediumKind::Coherent, Dims::square(4), Dims::square(5), 9);
        let m = generate_medium(spec).unwrap();
        let a = Image::from_fn(Dims::square(4), |y, x| ((y + x) % 3) as f64 / 2.0);
        let b = Image::filled(Dims::square(4), 0.3);
        let batch = m.propagate_many(&[&a, &b]).unwrap();
        for (img, sp) in [&a, &b].into_iter().zip(&batch) {
            let single = m.propagate(img).unwrap();
            for (u, v) in single.image.data().iter().zip(sp.image.data()) {
                assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
            }
        }
    }

    #[test]
    fn exact_inverse_small_cases() {
        let d = Dims::square(2);
        let id = linear(d, d, DMatrix::identity(4, 4));
        let inv = exact_inverse(&id, 0.0).unwrap();
        assert!((inv - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-15);

        let dd = Dims::new(1, 2);
        let spec = MediumSpec::new(MediumKind::Linear, dd, dd, 0);
        let diag = TransmissionMedium::from_matrix(
            spec,
            TransferMatrix::Real(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]))),
        )
        .unwrap();
        let inv = exact_inverse(&diag, 0.0).unwrap();
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25]));
        assert!((inv - want).abs().max() < 1e-15);
    }

    #[test]
    fn exact_inverse_residual_on_random_tall_medium() {
        let spec = MediumSpec::new(MediumKind::Linear, Dims::new(4, 5), Dims::new(5, 6), 21);
        let m = generate_medium(spec).unwrap();
        let inv = exact_inverse(&m, 0.0).unwrap();
        let TransferMatrix::Real(t) = m.matrix() else {
            panic!()
        };
        let resid = (&inv * t - DMatrix::<f64>::identity(20, 20)).abs().max();
        assert!(resid < 1e-8, "{resid}");
    }

    #[test]
    fn exact_inverse_errors() {
        let spec = MediumSpec::new(MediumKind::Coherent, Dims::square(2), Dims::square(2), 0);
        let m = generate_medium(spec).unwrap();
        assert!(matches!(exact_inverse(&m, 0.0), Err(Error::UnsupportedKind(_))));

        let d = Dims::square(2);
        let singular = linear(d, d, DMatrix::from_element(4, 4, 1.0));
        assert!(matches!(exact_inverse(&singular, 0.0), Err(Error::Solver(_))));
        assert!(exact_inverse(&singular, 1e-3).is_ok());
    }

    fn unit_image(d: Dims) -> impl Strategy<Value = Image> {
        proptest::collection::vec(0.0f64..=1.0, d.pixels()).prop_map(move |v| Image::from_vec(d, v).unwrap())
    }

    fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
        let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        a.iter().zip(b).all(|(u, v)| (u - v).abs() <= tol * scale)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn linear_superposition(
            x1 in unit_image(Dims::square(3)),
            x2 in unit_image(Dims::square(3)),
            alpha in 0.0f64..=1.0,
            frac in 0.0f64..=1.0,
        ) {
            let beta = (1.0 - alpha) * frac;
            let spec = MediumSpec::new(MediumKind::Linear, Dims::square(3), Dims::square(4), 5);
            let m = generate_medium(spec).unwrap();
            let mix = Image::from_fn(Dims::square(3), |y, x| alpha * x1.get(y, x) + beta * x2.get(y, x));
            let lhs = m.propagate(&mix).unwrap();
            let y1 = m.propagate(&x1).unwrap();
            let y2 = m.propagate(&x2).unwrap();
            let rhs: Vec<f64> = y1.image.data().iter().zip(y2.image.data()).map(|(a, b)| alpha * a + beta * b).collect();
            prop_assert!(rel_close(lhs.image.data(), &rhs, 1e-10));
        }

        #[test]
        fn coherent_quadratic_scaling(x in unit_image(Dims::square(3)), alpha in 0.0f64..=1.0) {
            let spec = MediumSpec::new(MediumKind::Coherent, Dims::square(3), Dims::square(4), 6);
            let m = generate_medium(spec).unwrap();
            let scaled = x.map(|v| alpha * v);
            let lhs = m.propagate(&scaled).unwrap();
            let base = m.propagate(&x).unwrap();
            let rhs: Vec<f64> = base.image.data().iter().map(|v| alpha * alpha * v).collect();
            prop_assert!(rel_close(lhs.image.data(), &rhs, 1e-10));
        }
    }
}

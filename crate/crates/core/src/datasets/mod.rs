//! Target generators, augmentation recipes and paired (target, speckle)
//! datasets.

mod glyphs;
pub mod idx;
mod texture;
pub mod transforms;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use glyphs::{border_width, gen_digit, gen_digit_glyph};
pub use idx::load_idx;
pub use texture::{gaussian_blur, gen_texture, texture_grid};
pub use transforms::{
    central_offset, embed, enlarge_center_crop, modulate, modulate_with, superpose_targets, AmplitudeMode,
    ModulationParams, ModulationSample,
};

use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::media::{SpecklePattern, TransmissionMedium};
use crate::seed::{derive_seed, fingerprint, rng_from_seed};

/// Enlargement factor of the enlarged and modulated recipes.
pub const ENLARGE_FACTOR: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Digit,
    Texture,
    External,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Digit => "digit",
            Family::Texture => "texture",
            Family::External => "external",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Recipe {
    Plain,
    Enlarged,
    ModA,
    ModB,
    ModC,
    #[serde(rename = "embed-fixed")]
    EmbeddedFixed,
    #[serde(rename = "embed-random")]
    EmbeddedRandom,
}

impl Recipe {
    pub fn is_embedded(self) -> bool {
        matches!(self, Recipe::EmbeddedFixed | Recipe::EmbeddedRandom)
    }
}

/// An object-plane target with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetImage {
    pub image: Image,
    pub family: Family,
    pub gen_seed: Option<u64>,
}

impl TargetImage {
    pub fn external(image: Image) -> Result<Self> {
        if !image.in_unit_range() {
            return Err(Error::InvalidArgument("target values must lie in [0, 1]".into()));
        }
        Ok(TargetImage {
            image,
            family: Family::External,
            gen_seed: None,
        })
    }

    pub fn dims(&self) -> Dims {
        self.image.dims()
    }

    /// Content hash of the pixel values.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(self.image.data().len() * 8 + 16);
        bytes.extend_from_slice(&(self.dims().height as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.dims().width as u64).to_le_bytes());
        for v in self.image.data() {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        fingerprint(&bytes)
    }
}

impl AsRef<Image> for TargetImage {
    fn as_ref(&self) -> &Image {
        &self.image
    }
}

pub fn generate_target(family: Family, seed: u64, dims: Dims) -> Result<TargetImage> {
    match family {
        Family::Digit => gen_digit(seed, dims),
        Family::Texture => gen_texture(seed, dims),
        Family::External => Err(Error::InvalidSpec(
            "external targets come from a supplied pool, not a generator".into(),
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub family: Family,
    pub case_recipe: Recipe,
    pub count: usize,
    pub target_dims: Dims,
    /// Only read by the embedding recipes.
    pub canvas_dims: Dims,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.target_dims.fits_within(self.canvas_dims) {
            return Err(Error::InvalidSpec(format!(
                "canvas {} is smaller than target {}",
                self.canvas_dims, self.target_dims
            )));
        }
        Ok(())
    }

    /// Object-plane dims the medium must accept.
    pub fn object_dims(&self) -> Dims {
        if self.case_recipe.is_embedded() {
            self.canvas_dims
        } else {
            self.target_dims
        }
    }

    /// Hash of this spec together with the medium it is propagated through.
    pub fn training_fingerprint(&self, medium_fingerprint: u64) -> u64 {
        let mut bytes = serde_json::to_vec(self).expect("spec serializes");
        bytes.extend_from_slice(&medium_fingerprint.to_le_bytes());
        fingerprint(&bytes)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub target: TargetImage,
    pub speckle: SpecklePattern,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub medium_fingerprint: u64,
    pub pairs: Vec<Pair>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = &TargetImage> {
        self.pairs.iter().map(|p| &p.target)
    }

    pub fn target_dims(&self) -> Option<Dims> {
        self.pairs.first().map(|p| p.target.dims())
    }

    pub fn speckle_dims(&self) -> Option<Dims> {
        self.pairs.first().map(|p| p.speckle.image.dims())
    }

    pub fn training_fingerprint(&self) -> u64 {
        self.spec.training_fingerprint(self.medium_fingerprint)
    }

    /// Assembles a dataset from stored pairs, checking count and shapes.
    pub fn from_parts(spec: DatasetSpec, medium_fingerprint: u64, pairs: Vec<Pair>) -> Result<Self> {
        if pairs.len() != spec.count {
            return Err(Error::Consistency(format!(
                "spec declares {} pairs, found {}",
                spec.count,
                pairs.len()
            )));
        }
        if let Some(first) = pairs.first() {
            let (td, sd) = (first.target.dims(), first.speckle.image.dims());
            if pairs
                .iter()
                .any(|p| p.target.dims() != td || p.speckle.image.dims() != sd)
            {
                return Err(Error::Shape("pairs have inconsistent dims".into()));
            }
        }
        Ok(Dataset {
            spec,
            medium_fingerprint,
            pairs,
        })
    }
}

/// Per-item seed streams.
mod item {
    pub const BASE: u64 = 0;
    pub const SECOND: u64 = 1;
    pub const SHEET: u64 = 2;
    pub const OFFSET: u64 = 3;
    pub const POOL: u64 = 4;
}

/// Produces the object-plane target for item `index` of `spec`.
///
/// `pool` supplies base images for the external family (and may override
/// the generators for any family); items cycle through it.
pub fn make_target(spec: &DatasetSpec, index: usize, pool: Option<&[TargetImage]>) -> Result<TargetImage> {
    let item_seed = derive_seed(spec.seed, index as u64);
    let base = |stream: u64, slot: usize| -> Result<TargetImage> {
        match pool {
            Some(p) if !p.is_empty() => {
                let t = p[slot % p.len()].clone();
                if t.dims() != spec.target_dims {
                    return Err(Error::Shape(format!(
                        "pool image is {}, spec wants {}",
                        t.dims(),
                        spec.target_dims
                    )));
                }
                Ok(t)
            }
            Some(_) => Err(Error::EmptyInput("external image pool".into())),
            None => generate_target(spec.family, derive_seed(item_seed, stream), spec.target_dims),
        }
    };
    let first = base(item::BASE, index)?;
    let sheet = |mode| ModulationParams::new(mode, derive_seed(item_seed, item::SHEET));
    let target = match spec.case_recipe {
        Recipe::Plain => first,
        Recipe::Enlarged => enlarge_center_crop(&first, ENLARGE_FACTOR)?,
        Recipe::ModA => modulate(
            &enlarge_center_crop(&first, ENLARGE_FACTOR)?,
            &sheet(AmplitudeMode::FixedOne),
        )?,
        Recipe::ModB => modulate(
            &enlarge_center_crop(&first, ENLARGE_FACTOR)?,
            &sheet(AmplitudeMode::Uniform),
        )?,
        Recipe::ModC => {
            let slot = (derive_seed(item_seed, item::POOL) % (u32::MAX as u64)) as usize;
            let second = base(item::SECOND, slot)?;
            let both = superpose_targets(&first, &second)?;
            modulate(
                &enlarge_center_crop(&both, ENLARGE_FACTOR)?,
                &sheet(AmplitudeMode::Uniform),
            )?
        }
        Recipe::EmbeddedFixed => embed(
            &first,
            spec.canvas_dims,
            central_offset(spec.target_dims, spec.canvas_dims),
        )?,
        Recipe::EmbeddedRandom => {
            let mut rng = rng_from_seed(derive_seed(item_seed, item::OFFSET));
            let dy = rng.random_range(0..=spec.canvas_dims.height - spec.target_dims.height);
            let dx = rng.random_range(0..=spec.canvas_dims.width - spec.target_dims.width);
            embed(&first, spec.canvas_dims, (dy, dx))?
        }
    };
    Ok(target)
}

fn check_compatible(spec: &DatasetSpec, medium: &TransmissionMedium) -> Result<()> {
    spec.validate()?;
    if spec.object_dims() != medium.in_dims() {
        return Err(Error::Shape(format!(
            "{:?} targets occupy {}, medium accepts {}",
            spec.case_recipe,
            spec.object_dims(),
            medium.in_dims()
        )));
    }
    Ok(())
}

fn assemble(spec: &DatasetSpec, medium: &TransmissionMedium, targets: Vec<TargetImage>) -> Result<Dataset> {
    let refs: Vec<&Image> = targets.iter().map(|t| &t.image).collect();
    let speckles = medium.propagate_many(&refs)?;
    let pairs = targets
        .into_iter()
        .zip(speckles)
        .map(|(target, speckle)| Pair { target, speckle })
        .collect();
    Ok(Dataset {
        spec: spec.clone(),
        medium_fingerprint: medium.fingerprint(),
        pairs,
    })
}

/// Generates `spec.count` targets, applies the recipe and propagates each
/// through `medium`. Deterministic in `(spec, medium)`.
pub fn build_dataset(spec: &DatasetSpec, medium: &TransmissionMedium) -> Result<Dataset> {
    check_compatible(spec, medium)?;
    let targets = (0..spec.count)
        .map(|i| make_target(spec, i, None))
        .collect::<Result<Vec<_>>>()?;
    assemble(spec, medium, targets)
}

/// Like [`build_dataset`] but drawing base images from `pool`.
pub fn build_dataset_from_pool(
    spec: &DatasetSpec,
    medium: &TransmissionMedium,
    pool: &[TargetImage],
) -> Result<Dataset> {
    check_compatible(spec, medium)?;
    let targets = (0..spec.count)
        .map(|i| make_target(spec, i, Some(pool)))
        .collect::<Result<Vec<_>>>()?;
    assemble(spec, medium, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media::{generate_medium, MediumKind, MediumSpec};
    use proptest::prelude::*;

    fn medium(d: Dims) -> TransmissionMedium {
        generate_medium(MediumSpec::new(MediumKind::Linear, d, Dims::square(12), 1)).unwrap()
    }

    fn spec(family: Family, recipe: Recipe, count: usize) -> DatasetSpec {
        DatasetSpec {
            family,
            case_recipe: recipe,
            count,
            target_dims: Dims::square(16),
            canvas_dims: Dims::square(24),
            seed: 11,
        }
    }

    #[test]
    fn empty_dataset() {
        let ds = build_dataset(&spec(Family::Digit, Recipe::Plain, 0), &medium(Dims::square(16))).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn deterministic_build() {
        let m = medium(Dims::square(16));
        let s = spec(Family::Texture, Recipe::ModC, 6);
        assert_eq!(build_dataset(&s, &m).unwrap(), build_dataset(&s, &m).unwrap());
    }

    #[test]
    fn modulated_digits_are_graded() {
        let ds = build_dataset(&spec(Family::Digit, Recipe::ModB, 100), &medium(Dims::square(16))).unwrap();
        for t in ds.targets() {
            assert!(t.image.data().iter().any(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn plain_and_enlarged_digits_stay_binary() {
        let m = medium(Dims::square(16));
        for r in [Recipe::Plain, Recipe::Enlarged] {
            let ds = build_dataset(&spec(Family::Digit, r, 50), &m).unwrap();
            assert!(ds.targets().all(|t| t.image.is_binary()));
        }
    }

    #[test]
    fn embedded_needs_canvas_medium() {
        let s = spec(Family::Texture, Recipe::EmbeddedFixed, 3);
        assert!(matches!(
            build_dataset(&s, &medium(Dims::square(16))),
            Err(Error::Shape(_))
        ));
        let ds = build_dataset(&s, &medium(Dims::square(24))).unwrap();
        for t in ds.targets() {
            // centred at (4, 4): the outer 4-pixel frame stays dark
            assert_eq!(t.image.get(3, 10), 0.0);
            assert!(t.image.get(4, 4) > 0.0);
            assert!(t.image.get(19, 19) > 0.0);
            assert_eq!(t.image.get(20, 19), 0.0);
        }
    }

    #[test]
    fn random_embedding_moves() {
        let s = spec(Family::Texture, Recipe::EmbeddedRandom, 20);
        let ds = build_dataset(&s, &medium(Dims::square(24))).unwrap();
        let corners: std::collections::HashSet<_> = ds
            .targets()
            .map(|t| {
                let d = t.dims();
                (0..d.pixels()).find(|&i| t.image.data()[i] > 0.0).unwrap()
            })
            .collect();
        assert!(corners.len() > 5);
    }

    #[test]
    fn pool_dataset() {
        let m = medium(Dims::square(16));
        let pool: Vec<_> = (0..3)
            .map(|s| gen_texture(s, Dims::square(16)).unwrap())
            .collect();
        let ds = build_dataset_from_pool(&spec(Family::External, Recipe::Plain, 5), &m, &pool).unwrap();
        assert_eq!(ds.pairs[3].target, pool[0]);
        assert!(build_dataset_from_pool(&spec(Family::External, Recipe::Plain, 1), &m, &[]).is_err());
        assert!(build_dataset(&spec(Family::External, Recipe::Plain, 1), &m).is_err());
    }

    #[test]
    fn pairs_match_forward_model() {
        let m = medium(Dims::square(16));
        let ds = build_dataset(&spec(Family::Digit, Recipe::ModA, 10), &m).unwrap();
        for p in &ds.pairs {
            let again = m.propagate(&p.target).unwrap();
            for (a, b) in again.image.data().iter().zip(p.speckle.image.data()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn spec_json_names() {
        let s = spec(Family::Digit, Recipe::EmbeddedRandom, 1);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"embed-random\""));
        assert!(json.contains("\"digit\""));
        let back: DatasetSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let m: Recipe = serde_json::from_str("\"mod-a\"").unwrap();
        assert_eq!(m, Recipe::ModA);
    }

    fn any_recipe() -> impl Strategy<Value = Recipe> {
        prop_oneof![
            Just(Recipe::Plain),
            Just(Recipe::Enlarged),
            Just(Recipe::ModA),
            Just(Recipe::ModB),
            Just(Recipe::ModC),
            Just(Recipe::EmbeddedFixed),
            Just(Recipe::EmbeddedRandom),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn targets_stay_in_unit_range(
            seed in any::<u64>(),
            index in 0usize..1000,
            recipe in any_recipe(),
            digit in any::<bool>(),
        ) {
            let family = if digit { Family::Digit } else { Family::Texture };
            let s = DatasetSpec { seed, ..spec(family, recipe, 1) };
            let t = make_target(&s, index, None).unwrap();
            prop_assert!(t.image.in_unit_range());
            prop_assert_eq!(t.dims(), s.object_dims());
        }
    }
}

//! Named experiment cases run end to end, and the ordinal checks across them.
//!
//! Each case builds one training set, fits the configured learner and
//! evaluates on held-out targets that are disjoint from training by content
//! hash. Training and test targets come from separate seed streams.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datasets::{
    build_dataset, central_offset, embed, gen_digit_glyph, generate_target, Dataset, DatasetSpec, Family,
    Recipe, TargetImage,
};
use crate::diagnostics::{superpose_normalized, superpose_saturated, CoverageMap};
use crate::error::{Error, Result};
use crate::image::{Dims, Image};
use crate::learners::{train_net, train_ridge, LearnedMapping, NetConfig, RidgeConfig};
use crate::media::{generate_medium, MediumKind, MediumSpec, TransmissionMedium};
use crate::metrics::{mean_defined, MetricReport};
use crate::seed::{derive_seed, fingerprint, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    C1,
    C2,
    C3,
    C4A,
    C4B,
    C4C,
    C5,
    SIC,
}

impl CaseId {
    pub const ALL: [CaseId; 8] = [
        CaseId::C1,
        CaseId::C2,
        CaseId::C3,
        CaseId::C4A,
        CaseId::C4B,
        CaseId::C4C,
        CaseId::C5,
        CaseId::SIC,
    ];

    /// Short form accepted on the command line: `1`, `4a`, `sic`, ...
    pub fn token(self) -> &'static str {
        match self {
            CaseId::C1 => "1",
            CaseId::C2 => "2",
            CaseId::C3 => "3",
            CaseId::C4A => "4a",
            CaseId::C4B => "4b",
            CaseId::C4C => "4c",
            CaseId::C5 => "5",
            CaseId::SIC => "sic",
        }
    }

    pub fn training(self) -> (Family, Recipe) {
        match self {
            CaseId::C1 => (Family::Texture, Recipe::Plain),
            CaseId::C2 => (Family::Digit, Recipe::Plain),
            CaseId::C3 => (Family::Digit, Recipe::Enlarged),
            CaseId::C4A => (Family::Digit, Recipe::ModA),
            CaseId::C4B => (Family::Digit, Recipe::ModB),
            CaseId::C4C => (Family::Digit, Recipe::ModC),
            CaseId::C5 => (Family::Texture, Recipe::EmbeddedFixed),
            CaseId::SIC => (Family::Digit, Recipe::EmbeddedRandom),
        }
    }

    pub fn uses_canvas(self) -> bool {
        matches!(self, CaseId::C5 | CaseId::SIC)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix('c').unwrap_or(&t);
        CaseId::ALL
            .into_iter()
            .find(|c| c.token() == t || (t == "ic" && *c == CaseId::SIC))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown case {s:?}")))
    }
}

impl Serialize for CaseId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for CaseId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LearnerConfig {
    Ridge(RidgeConfig),
    Net(NetConfig),
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig::Ridge(RidgeConfig::default())
    }
}

impl LearnerConfig {
    pub fn train(&self, dataset: &Dataset) -> Result<LearnedMapping> {
        match self {
            LearnerConfig::Ridge(c) => train_ridge(dataset, c),
            LearnerConfig::Net(c) => train_net(dataset, c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub medium_kind: MediumKind,
    pub medium_seed: u64,
    pub target_dims: Dims,
    pub speckle_dims: Dims,
    /// Object plane of the embedding cases.
    pub canvas_dims: Dims,
    pub canvas_speckle_dims: Dims,
    pub train_count: usize,
    /// Per test family.
    pub test_count: usize,
    pub learner: LearnerConfig,
    pub seed: u64,
    /// Not part of the config hash.
    pub output_dir: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            medium_kind: MediumKind::Linear,
            medium_seed: 1,
            target_dims: Dims::square(16),
            speckle_dims: Dims::square(24),
            canvas_dims: Dims::square(32),
            canvas_speckle_dims: Dims::square(48),
            train_count: 4096,
            test_count: 32,
            learner: LearnerConfig::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.target_dims.fits_within(self.canvas_dims) {
            return Err(Error::InvalidSpec(format!(
                "canvas {} cannot hold target {}",
                self.canvas_dims, self.target_dims
            )));
        }
        if self.train_count < 2 || self.test_count == 0 {
            return Err(Error::InvalidSpec(
                "need at least 2 training pairs and 1 test image".into(),
            ));
        }
        Ok(())
    }

    /// Hash of everything that determines the numbers in a report.
    pub fn config_hash(&self) -> u64 {
        let mut c = self.clone();
        c.output_dir = None;
        fingerprint(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn medium_spec(&self, case: CaseId) -> MediumSpec {
        let (i, o) = if case.uses_canvas() {
            (self.canvas_dims, self.canvas_speckle_dims)
        } else {
            (self.target_dims, self.speckle_dims)
        };
        MediumSpec::new(self.medium_kind, i, o, self.medium_seed)
    }

    pub fn training_spec(&self, case: CaseId) -> DatasetSpec {
        let (family, case_recipe) = case.training();
        DatasetSpec {
            family,
            case_recipe,
            count: self.train_count,
            target_dims: self.target_dims,
            canvas_dims: self.canvas_dims,
            seed: derive_seed(self.seed, stream::TRAIN),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMean {
    pub family: String,
    pub count: usize,
    pub pcc: Option<f64>,
    pub ssim: Option<f64>,
    pub cosine: Option<f64>,
    pub dice: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconImage {
    pub family: String,
    pub index: usize,
    pub recon: Image,
    pub truth: Image,
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub case: CaseId,
    pub config: ExperimentConfig,
    pub config_hash: u64,
    pub medium_fingerprint: u64,
    pub training_fingerprint: u64,
    pub metrics: Vec<MetricReport>,
    pub family_means: Vec<FamilyMean>,
    pub coverage_saturated: CoverageMap,
    pub coverage_normalized: CoverageMap,
    pub reconstructions: Vec<ReconImage>,
    /// Largest `|raw reconstruction|` outside the trained region (C5 only).
    pub outside_max: Option<f64>,
    /// Wall-clock seconds per stage, in execution order.
    pub durations: Vec<(String, f64)>,
}

/// The numbers of a [`CaseReport`] that cross-case comparison needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case: CaseId,
    pub config_hash: u64,
    pub medium_fingerprint: u64,
    pub training_fingerprint: u64,
    pub family_means: Vec<FamilyMean>,
    pub outside_max: Option<f64>,
}

impl CaseSummary {
    pub fn mean(&self, family: &str) -> Option<&FamilyMean> {
        self.family_means.iter().find(|m| m.family == family)
    }

    pub fn mean_pcc(&self, family: &str) -> Option<f64> {
        self.mean(family).and_then(|m| m.pcc)
    }
}

impl CaseReport {
    pub fn summary(&self) -> CaseSummary {
        CaseSummary {
            case: self.case,
            config_hash: self.config_hash,
            medium_fingerprint: self.medium_fingerprint,
            training_fingerprint: self.training_fingerprint,
            family_means: self.family_means.clone(),
            outside_max: self.outside_max,
        }
    }

    pub fn mean_pcc(&self, family: &str) -> Option<f64> {
        self.family_means
            .iter()
            .find(|m| m.family == family)
            .and_then(|m| m.pcc)
    }
}

fn family_means(metrics: &[MetricReport]) -> Vec<FamilyMean> {
    let mut order: Vec<&str> = Vec::new();
    for m in metrics {
        if !order.contains(&m.family.as_str()) {
            order.push(&m.family);
        }
    }
    order
        .into_iter()
        .map(|f| {
            let g: Vec<&MetricReport> = metrics.iter().filter(|m| m.family == f).collect();
            FamilyMean {
                family: f.to_string(),
                count: g.len(),
                pcc: mean_defined(g.iter().map(|m| m.pcc)),
                ssim: mean_defined(g.iter().map(|m| m.ssim)),
                cosine: mean_defined(g.iter().map(|m| m.cosine)),
                dice: mean_defined(g.iter().map(|m| m.dice)),
            }
        })
        .collect()
}

/// `count` generated targets of `family` from the test stream, skipping any
/// whose content hash (or embedded hash) collides with training.
fn test_targets(
    cfg: &ExperimentConfig,
    family: Family,
    count: usize,
    seen: &HashSet<u64>,
    wrap: impl Fn(&TargetImage) -> Result<TargetImage>,
) -> Result<Vec<TargetImage>> {
    let base = derive_seed(derive_seed(cfg.seed, stream::TEST), family as u64);
    let mut out = Vec::with_capacity(count);
    let mut j = 0u64;
    while out.len() < count {
        let t = generate_target(family, derive_seed(base, j), cfg.target_dims)?;
        j += 1;
        if seen.contains(&t.content_hash()) || seen.contains(&wrap(&t)?.content_hash()) {
            continue;
        }
        out.push(t);
        if j > 16 * count as u64 + 64 {
            return Err(Error::Degenerate(format!(
                "could not draw {count} test targets disjoint from training"
            )));
        }
    }
    Ok(out)
}

struct Probe {
    group: String,
    index: usize,
    object: TargetImage,
    /// Display window inside the object plane.
    window: (usize, usize),
}

fn shifted(offset: (usize, usize), by: (usize, usize)) -> (usize, usize) {
    (offset.0 + by.0, offset.1 + by.1)
}

/// Builds and evaluates one case.
pub fn run_case(case: CaseId, cfg: &ExperimentConfig) -> Result<CaseReport> {
    cfg.validate()?;
    let mut durations = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, durations: &mut Vec<(String, f64)>| {
        durations.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let medium: TransmissionMedium = generate_medium(cfg.medium_spec(case))?;
    let train = build_dataset(&cfg.training_spec(case), &medium)?;
    lap("dataset", &mut durations);
    let mapping = cfg.learner.train(&train)?;
    lap("train", &mut durations);

    let seen: HashSet<u64> = train.targets().map(|t| t.content_hash()).collect();
    let td = cfg.target_dims;
    let h = td.height;
    let mut probes = Vec::new();
    match case {
        CaseId::C5 => {
            let home = central_offset(td, cfg.canvas_dims);
            let at = [
                ("original", home),
                ("shift-i", shifted(home, (0, h / 2))),
                ("shift-ii", shifted(home, (h / 2, h / 2))),
            ];
            let (fy, fx) = shifted(at[2].1, (td.height, td.width));
            if fy > cfg.canvas_dims.height || fx > cfg.canvas_dims.width {
                return Err(Error::InvalidSpec(format!(
                    "canvas {} cannot hold the half-side shifted tests",
                    cfg.canvas_dims
                )));
            }
            let tests = test_targets(cfg, Family::Texture, cfg.test_count, &seen, |t| {
                embed(t, cfg.canvas_dims, home)
            })?;
            for (group, offset) in at {
                for (i, t) in tests.iter().enumerate() {
                    probes.push(Probe {
                        group: group.into(),
                        index: i,
                        object: embed(t, cfg.canvas_dims, offset)?,
                        window: offset,
                    });
                }
            }
        }
        CaseId::SIC => {
            let (my, mx) = (
                cfg.canvas_dims.height - td.height,
                cfg.canvas_dims.width - td.width,
            );
            let corners = [(0, 0), (0, mx), (my, 0), (my, mx)];
            let base = derive_seed(cfg.seed, stream::TEST);
            // the glyph space is small: redraw until no corner copy was trained on
            let mut objects = None;
            for j in 0..64 {
                let glyph = gen_digit_glyph(derive_seed(base, j), td, 5)?;
                let placed = corners
                    .iter()
                    .map(|&o| embed(&glyph, cfg.canvas_dims, o))
                    .collect::<Result<Vec<_>>>()?;
                if placed.iter().all(|o| !seen.contains(&o.content_hash())) {
                    objects = Some(placed);
                    break;
                }
            }
            let objects = objects.ok_or_else(|| {
                Error::Degenerate("every corner probe coincides with a training target".into())
            })?;
            for (i, (offset, object)) in corners.into_iter().zip(objects).enumerate() {
                probes.push(Probe {
                    group: format!("corner-{}-{}", offset.0, offset.1),
                    index: i,
                    object,
                    window: offset,
                });
            }
        }
        _ => {
            for family in [Family::Texture, Family::Digit] {
                let tests = test_targets(cfg, family, cfg.test_count, &seen, |t| Ok(t.clone()))?;
                for (i, object) in tests.into_iter().enumerate() {
                    probes.push(Probe {
                        group: family.name().into(),
                        index: i,
                        object,
                        window: (0, 0),
                    });
                }
            }
        }
    }

    let objects: Vec<&Image> = probes.iter().map(|p| &p.object.image).collect();
    let speckles = medium.propagate_many(&objects)?;
    let speckle_refs: Vec<&Image> = speckles.iter().map(|s| &s.image).collect();
    let recons = mapping.predict_many(&speckle_refs)?;

    let mut metrics = Vec::with_capacity(probes.len());
    let mut reconstructions = Vec::with_capacity(probes.len());
    for (p, r) in probes.iter().zip(&recons) {
        let (dy, dx) = p.window;
        let recon = r.values.crop(dy, dx, td)?;
        let truth = p.object.image.crop(dy, dx, td)?;
        metrics.push(MetricReport::evaluate(&p.group, p.index, &recon, &truth)?);
        reconstructions.push(ReconImage {
            family: p.group.clone(),
            index: p.index,
            recon: r.values.clone(),
            truth: p.object.image.clone(),
        });
    }

    let outside_max = (case == CaseId::C5).then(|| {
        let (oy, ox) = central_offset(td, cfg.canvas_dims);
        let inside =
            |y: usize, x: usize| (oy..oy + td.height).contains(&y) && (ox..ox + td.width).contains(&x);
        let cd = cfg.canvas_dims;
        recons
            .iter()
            .flat_map(|r| {
                (0..cd.height)
                    .flat_map(move |y| (0..cd.width).map(move |x| (y, x)))
                    .filter(|&(y, x)| !inside(y, x))
                    .map(|(y, x)| r.raw_values.get(y, x).abs())
            })
            .fold(0.0, f64::max)
    });
    if let Some(m) = outside_max {
        if !(m < 1e-6) && matches!(cfg.learner, LearnerConfig::Ridge(_)) {
            return Err(Error::Consistency(format!(
                "ridge reconstruction reaches {m:e} outside the trained region"
            )));
        }
    }
    lap("evaluate", &mut durations);

    let images: Vec<&Image> = train.targets().map(|t| &t.image).collect();
    let coverage_saturated = superpose_saturated(images.iter().copied())?;
    let coverage_normalized = superpose_normalized(images.iter().copied())?;
    lap("diagnose", &mut durations);

    Ok(CaseReport {
        case,
        config: cfg.clone(),
        config_hash: cfg.config_hash(),
        medium_fingerprint: medium.fingerprint(),
        training_fingerprint: train.training_fingerprint(),
        family_means: family_means(&metrics),
        metrics,
        coverage_saturated,
        coverage_normalized,
        reconstructions,
        outside_max,
        durations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRow {
    /// Which claim the row checks.
    pub criterion: String,
    pub left: String,
    pub left_value: f64,
    pub relation: String,
    pub right: String,
    pub right_value: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrendTable {
    pub rows: Vec<TrendRow>,
}

impl TrendTable {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

pub const LADDER_MARGIN: f64 = 0.05;
pub const ASYMMETRY_MARGIN: f64 = 0.2;
pub const DIGIT_FLOOR: f64 = 0.9;
pub const SHIFT_RATIO: f64 = 0.5;
pub const CORNER_FLOOR: f64 = 0.8;

fn row(
    criterion: &str,
    left: String,
    lv: Option<f64>,
    rel: &str,
    right: String,
    rv: Option<f64>,
    margin: f64,
) -> TrendRow {
    let (l, r) = (lv.unwrap_or(f64::NAN), rv.unwrap_or(f64::NAN));
    let passed = match rel {
        ">" => l > r + margin,
        _ => l >= r + margin,
    };
    TrendRow {
        criterion: criterion.into(),
        left,
        left_value: l,
        relation: rel.into(),
        right,
        right_value: r,
        margin,
        passed,
    }
}

/// Ordinal checks over whichever cases are present. Fewer than two reports
/// give an empty table.
pub fn compare_cases(reports: &[CaseSummary]) -> Result<TrendTable> {
    if reports.len() < 2 {
        return Ok(TrendTable::default());
    }
    let hash = reports[0].config_hash;
    let mut seen = HashSet::new();
    for r in reports {
        if r.config_hash != hash {
            return Err(Error::Consistency(format!(
                "{} was run with config {:016x}, {} with {:016x}",
                reports[0].case, hash, r.case, r.config_hash
            )));
        }
        if !seen.insert(r.case) {
            return Err(Error::Consistency(format!("case {} appears twice", r.case)));
        }
    }
    Ok(rows_for(reports))
}

/// The checks a single case can settle on its own (corner and shift rows).
pub fn case_checks(summary: &CaseSummary) -> TrendTable {
    rows_for(std::slice::from_ref(summary))
}

fn rows_for(reports: &[CaseSummary]) -> TrendTable {
    let get = |c: CaseId| reports.iter().find(|r| r.case == c);
    let tex = |c: CaseId| get(c).and_then(|r| r.mean_pcc("texture"));
    let label = |c: CaseId, f: &str| format!("{c} {f} pcc");
    let mut rows = Vec::new();

    if get(CaseId::C1).is_some() && get(CaseId::C2).is_some() {
        rows.push(row(
            "asymmetric-generalization",
            label(CaseId::C1, "texture"),
            tex(CaseId::C1),
            ">=",
            label(CaseId::C2, "texture"),
            tex(CaseId::C2),
            ASYMMETRY_MARGIN,
        ));
    }
    for (hi, lo) in [
        (CaseId::C3, CaseId::C2),
        (CaseId::C4B, CaseId::C3),
        (CaseId::C4A, CaseId::C2),
    ] {
        if get(hi).is_some() && get(lo).is_some() {
            rows.push(row(
                "diversity-ladder",
                label(hi, "texture"),
                tex(hi),
                ">=",
                label(lo, "texture"),
                tex(lo),
                LADDER_MARGIN,
            ));
        }
    }
    for c in [
        CaseId::C1,
        CaseId::C2,
        CaseId::C3,
        CaseId::C4A,
        CaseId::C4B,
        CaseId::C4C,
    ] {
        if let Some(r) = get(c) {
            rows.push(row(
                "digit-fidelity",
                label(c, "digit"),
                r.mean_pcc("digit"),
                ">=",
                "floor".into(),
                Some(DIGIT_FLOOR),
                0.0,
            ));
        }
    }
    if let Some(r) = get(CaseId::C5) {
        let original = r.mean_pcc("original").map(|v| SHIFT_RATIO * v);
        for g in ["shift-i", "shift-ii"] {
            rows.push(row(
                "position-sensitivity",
                format!("{SHIFT_RATIO} x C5 original pcc"),
                original,
                ">",
                label(CaseId::C5, g),
                r.mean_pcc(g),
                0.0,
            ));
        }
    }
    if let Some(r) = get(CaseId::SIC) {
        for m in r.family_means.iter() {
            rows.push(row(
                "random-placement",
                label(CaseId::SIC, &m.family),
                m.pcc,
                ">=",
                "floor".into(),
                Some(CORNER_FLOOR),
                0.0,
            ));
        }
    }
    TrendTable { rows }
}

//! `scatter`: generate media and datasets, train inverse mappings, evaluate
//! them and run the named experiment cases.
//!
//! Exit status: 0 success, 1 usage error, 2 data or format error,
//! 3 numerical failure. Errors go to stderr as `error:<category>: message`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scatter_core::datasets::transforms::fit_to_dims;
use scatter_core::datasets::{
    build_dataset, build_dataset_from_pool, load_idx, DatasetSpec, Family, Recipe, TargetImage,
};
use scatter_core::diagnostics::{pixel_histograms, superpose_normalized, superpose_saturated};
use scatter_core::experiments::{compare_cases, run_case, CaseId, ExperimentConfig};
use scatter_core::io::pgm::{encode_pgm, read_pgm};
use scatter_core::io::report::{
    emit_report, fmt_sig, histogram_csvs, load_summary, trend_csv, OutputDir, Stage,
};
use scatter_core::io::sds::{load_dataset, save_dataset};
use scatter_core::io::slm::{load_mapping, save_mapping};
use scatter_core::io::stm::{load_medium, save_medium};
use scatter_core::learners::{train_net, train_ridge, NetConfig, RidgeConfig, RidgeSolver};
use scatter_core::media::{generate_medium, MediumKind, MediumSpec};
use scatter_core::metrics::MetricReport;
use scatter_core::{Dims, Error, Result};

const SEED_ENV: &str = "SCATTER_SEED";

#[derive(Parser)]
#[command(
    name = "scatter",
    version,
    about = "Scattering-medium imaging simulator and learned inverse mappings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random transmission medium.
    GenMedium(GenMedium),
    /// Generate targets, apply a recipe and propagate them through a medium.
    GenDataset(GenDataset),
    /// Fit an inverse mapping from speckles to targets.
    Train(Train),
    /// Score a mapping on a dataset, one CSV row per pair.
    Eval(Eval),
    /// Coverage maps or per-pixel histograms of a dataset's targets.
    Diagnose(Diagnose),
    /// Run one named experiment case end to end.
    RunCase(RunCase),
    /// Check the ordinal trends across case report directories.
    Compare(Compare),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Coherent,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Digit,
    Texture,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecipeArg {
    Plain,
    Enlarged,
    ModA,
    ModB,
    ModC,
    EmbedFixed,
    EmbedRandom,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Ridge,
    Net,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Cholesky,
    Cg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Saturate,
    Normalize,
    Hist,
}

#[derive(Args)]
struct GenMedium {
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Object-plane dims, e.g. 16x16.
    #[arg(long = "in")]
    in_dims: Dims,
    /// Detector-plane dims.
    #[arg(long = "out")]
    out_dims: Dims,
    /// Falls back to $SCATTER_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct GenDataset {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "plain")]
    recipe: RecipeArg,
    #[arg(long = "n")]
    count: usize,
    #[arg(long)]
    medium: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Target dims; defaults to the medium input (or half the canvas when embedding).
    #[arg(long)]
    target: Option<Dims>,
    /// IDX image file supplying base images.
    #[arg(long)]
    idx: Option<PathBuf>,
    /// IDX label file checked against --idx.
    #[arg(long, requires = "idx")]
    labels: Option<PathBuf>,
    /// PGM files supplying base images.
    #[arg(long, num_args = 1..)]
    pgm: Vec<PathBuf>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct Train {
    #[arg(long, value_enum)]
    learner: LearnerArg,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    lambda_rel: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    cg_max_iter: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    dice_weight: Option<f64>,
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Network initialisation and shuffling seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct Eval {
    #[arg(long = "map")]
    mapping: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct Diagnose {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// `y,x;y,x;...`; defaults to the centre pixel.
    #[arg(long)]
    points: Option<String>,
    #[arg(long, default_value_t = 256)]
    bins: usize,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct RunCase {
    /// 1, 2, 3, 4a, 4b, 4c, 5 or sic.
    #[arg(long)]
    case: CaseId,
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

#[derive(Args)]
struct Compare {
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

/// Flag, then environment, then `default`.
fn resolve_seed(flag: Option<u64>, default: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(default),
    }
}

fn parse_points(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (y, x) = p
                .split_once(',')
                .ok_or_else(|| Error::InvalidArgument(format!("point {p:?} is not y,x")))?;
            let n = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("point {p:?} is not y,x")))
            };
            Ok((n(y)?, n(x)?))
        })
        .collect()
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn gen_medium(a: GenMedium) -> Result<()> {
    let kind = match a.kind {
        KindArg::Linear => MediumKind::Linear,
        KindArg::Coherent => MediumKind::Coherent,
    };
    let m = generate_medium(MediumSpec::new(
        kind,
        a.in_dims,
        a.out_dims,
        resolve_seed(a.seed, 0)?,
    ))?;
    save_medium(&a.output, &m)?;
    println!(
        "medium {:016x} {} -> {}",
        m.fingerprint(),
        m.in_dims(),
        m.out_dims()
    );
    Ok(())
}

fn gen_dataset(a: GenDataset) -> Result<()> {
    let medium = load_medium(&a.medium)?;
    let recipe = match a.recipe {
        RecipeArg::Plain => Recipe::Plain,
        RecipeArg::Enlarged => Recipe::Enlarged,
        RecipeArg::ModA => Recipe::ModA,
        RecipeArg::ModB => Recipe::ModB,
        RecipeArg::ModC => Recipe::ModC,
        RecipeArg::EmbedFixed => Recipe::EmbeddedFixed,
        RecipeArg::EmbedRandom => Recipe::EmbeddedRandom,
    };
    let family = match a.family {
        FamilyArg::Digit => Family::Digit,
        FamilyArg::Texture => Family::Texture,
        FamilyArg::External => Family::External,
    };
    let object = medium.in_dims();
    let target_dims = a.target.unwrap_or(if recipe.is_embedded() {
        Dims::new(object.height / 2, object.width / 2)
    } else {
        object
    });
    let spec = DatasetSpec {
        family,
        case_recipe: recipe,
        count: a.count,
        target_dims,
        canvas_dims: if recipe.is_embedded() { object } else { target_dims },
        seed: resolve_seed(a.seed, 0)?,
    };
    let mut pool: Vec<TargetImage> = Vec::new();
    if let Some(idx) = &a.idx {
        let images = std::fs::read(idx)?;
        let labels = a.labels.as_ref().map(std::fs::read).transpose()?;
        pool.extend(load_idx(&images, labels.as_deref(), target_dims, family)?);
    }
    for p in &a.pgm {
        pool.push(TargetImage::external(fit_to_dims(&read_pgm(p)?, target_dims))?);
    }
    let ds = if pool.is_empty() {
        build_dataset(&spec, &medium)?
    } else {
        build_dataset_from_pool(&spec, &medium, &pool)?
    };
    save_dataset(&a.output, &ds)?;
    println!("dataset {:016x}: {} pairs", ds.training_fingerprint(), ds.len());
    Ok(())
}

fn train(a: Train) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let mapping = match a.learner {
        LearnerArg::Ridge => {
            let d = RidgeConfig::default();
            let cfg = RidgeConfig {
                lambda_rel: a.lambda_rel.unwrap_or(d.lambda_rel),
                solver: match a.solver {
                    Some(SolverArg::Cg) => RidgeSolver::ConjugateGradient,
                    _ => RidgeSolver::Cholesky,
                },
                cg_tol: a.cg_tol.unwrap_or(d.cg_tol),
                cg_max_iter: a.cg_max_iter,
            };
            train_ridge(&ds, &cfg)?
        }
        LearnerArg::Net => {
            let d = NetConfig::default();
            let cfg = NetConfig {
                hidden_width: a.hidden.unwrap_or(d.hidden_width),
                learning_rate: a.lr.unwrap_or(d.learning_rate),
                batch_size: a.batch.unwrap_or(d.batch_size),
                max_epochs: a.epochs.unwrap_or(d.max_epochs),
                early_stop_patience: a.patience.unwrap_or(d.early_stop_patience),
                dice_weight: a.dice_weight.unwrap_or(d.dice_weight),
                validation_fraction: a.val_fraction.unwrap_or(d.validation_fraction),
                init_seed: resolve_seed(a.seed, 0)?,
                ..d
            };
            train_net(&ds, &cfg)?
        }
    };
    save_mapping(&a.output, &mapping)?;
    println!("mapping {} -> {}", mapping.in_dims, mapping.out_dims);
    Ok(())
}

fn eval(a: Eval) -> Result<()> {
    let mapping = load_mapping(&a.mapping)?;
    let ds = load_dataset(&a.dataset)?;
    let speckles: Vec<_> = ds.pairs.iter().map(|p| &p.speckle.image).collect();
    let recons = mapping.predict_many(&speckles)?;
    let mut csv = String::from("family,index,pcc,ssim,cosine,dice\n");
    let cell = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    for (i, (p, r)) in ds.pairs.iter().zip(&recons).enumerate() {
        let m = MetricReport::evaluate(p.target.family.name(), i, &r.values, &p.target.image)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            m.family,
            m.index,
            cell(m.pcc),
            cell(m.ssim),
            cell(m.cosine),
            cell(m.dice)
        ));
    }
    write(&a.output, csv.as_bytes())
}

fn diagnose(a: Diagnose) -> Result<()> {
    let t0 = Instant::now();
    let ds = load_dataset(&a.dataset)?;
    let targets: Vec<_> = ds.targets().map(|t| &t.image).collect();
    let mut out = OutputDir::create(&a.output)?;
    let mode = match a.mode {
        ModeArg::Saturate => {
            let m = superpose_saturated(targets.iter().copied())?;
            out.write("coverage_saturated.pgm", &encode_pgm(&m.values))?;
            println!(
                "{} of {} pixels covered",
                m.effective_count(),
                m.values.data().len()
            );
            "saturate"
        }
        ModeArg::Normalize => {
            let m = superpose_normalized(targets.iter().copied())?;
            out.write("coverage_normalized.pgm", &encode_pgm(&m.values))?;
            "normalize"
        }
        ModeArg::Hist => {
            let points = match &a.points {
                Some(p) => parse_points(p)?,
                None => {
                    let d = ds.target_dims().unwrap_or(ds.spec.object_dims());
                    vec![(d.height / 2, d.width / 2)]
                }
            };
            let set = pixel_histograms(targets.iter().copied(), &points, a.bins)?;
            for (name, body) in histogram_csvs(&set) {
                out.write(&name, body.as_bytes())?;
            }
            "hist"
        }
    };
    let config = serde_json::json!({
        "dataset": a.dataset.display().to_string(),
        "mode": mode,
        "points": a.points,
        "bins": a.bins,
    });
    out.finish(
        config,
        vec![Stage {
            name: "diagnose".into(),
            seconds: t0.elapsed().as_secs_f64(),
        }],
    )?;
    Ok(())
}

fn run_case_cmd(a: RunCase) -> Result<()> {
    let mut cfg: ExperimentConfig = match &a.config {
        Some(p) => serde_json::from_slice(
            &std::fs::read(p)
                .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))?,
        )?,
        None => ExperimentConfig::default(),
    };
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.output_dir = Some(a.output.display().to_string());
    let report = run_case(a.case, &cfg)?;
    let manifest = emit_report(&report, &a.output)?;
    for m in &report.family_means {
        println!(
            "{} {:<12} pcc {}",
            report.case,
            m.family,
            m.pcc.map(fmt_sig).unwrap_or_else(|| "-".into())
        );
    }
    println!(
        "{} files written to {}",
        manifest.files.len() + 1,
        a.output.display()
    );
    Ok(())
}

fn compare(a: Compare) -> Result<()> {
    let summaries = a
        .reports
        .iter()
        .map(|d| load_summary(d))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_cases(&summaries)?;
    write(&a.output, trend_csv(&table).as_bytes())?;
    for r in &table.rows {
        println!(
            "{} {}: {} {} {}{}",
            if r.passed { "PASS" } else { "FAIL" },
            r.criterion,
            r.left,
            r.relation,
            r.right,
            if r.margin > 0.0 {
                format!(" + {}", r.margin)
            } else {
                String::new()
            }
        );
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenMedium(a) => gen_medium(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Diagnose(a) => diagnose(a),
        Command::RunCase(a) => run_case_cmd(a),
        Command::Compare(a) => compare(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error:usage: {first}");
            eprint!("{}", text.split_once('\n').map(|(_, rest)| rest).unwrap_or(""));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error:{}: {e}", e.category());
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

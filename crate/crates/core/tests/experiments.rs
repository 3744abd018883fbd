use std::collections::BTreeMap;
use std::path::Path;

use scatter_core::experiments::{compare_cases, run_case, CaseId, ExperimentConfig};
use scatter_core::io::report::{emit_report, load_summary, RunManifest, MANIFEST_FILE};
use scatter_core::Dims;
use sha2::{Digest, Sha256};

fn small(test_count: usize) -> ExperimentConfig {
    ExperimentConfig {
        target_dims: Dims::square(8),
        speckle_dims: Dims::square(12),
        canvas_dims: Dims::square(16),
        canvas_speckle_dims: Dims::square(24),
        train_count: 400,
        test_count,
        ..Default::default()
    }
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn manifest_hashes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_case(CaseId::C1, &small(1)).unwrap();
    let manifest = emit_report(&report, dir.path()).unwrap();
    let files = read_dir(dir.path());
    let on_disk: RunManifest = serde_json::from_slice(&files[MANIFEST_FILE]).unwrap();
    assert_eq!(on_disk, manifest);
    assert_eq!(manifest.files.len() + 1, files.len());
    for f in &manifest.files {
        let bytes = &files[&f.path];
        assert_eq!(f.bytes, bytes.len() as u64);
        let hex: String = Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f.sha256, hex);
    }
}

#[test]
fn two_images_give_two_rows_and_at_least_seven_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_case(CaseId::C2, &small(1)).unwrap();
    let manifest = emit_report(&report, dir.path()).unwrap();
    let csv = String::from_utf8(read_dir(dir.path())["report.csv"].clone()).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "case,family,index,pcc,ssim,cosine,dice");
    assert_eq!(lines.len(), 3);
    assert!(manifest.files.len() >= 7);
}

#[test]
fn empty_report_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut report = run_case(CaseId::C1, &small(1)).unwrap();
    report.metrics.clear();
    report.reconstructions.clear();
    emit_report(&report, dir.path()).unwrap();
    let csv = &read_dir(dir.path())["report.csv"];
    assert_eq!(csv.as_slice(), b"case,family,index,pcc,ssim,cosine,dice\n");
}

#[test]
fn reruns_write_identical_bytes() {
    let cfg = small(2);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&run_case(CaseId::C3, &cfg).unwrap(), a.path()).unwrap();
    emit_report(&run_case(CaseId::C3, &cfg).unwrap(), b.path()).unwrap();
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    // the manifest carries wall-clock stage timings
    for (name, bytes) in &fa {
        if name != MANIFEST_FILE {
            assert_eq!(bytes, &fb[name], "{name}");
        }
    }
}

#[test]
fn summaries_read_back_and_compare() {
    let cfg = small(3);
    let dir = tempfile::tempdir().unwrap();
    let mut summaries = Vec::new();
    for case in [CaseId::C1, CaseId::C2] {
        let path = dir.path().join(case.token());
        let report = run_case(case, &cfg).unwrap();
        emit_report(&report, &path).unwrap();
        let back = load_summary(&path).unwrap();
        assert_eq!(back, report.summary());
        summaries.push(back);
    }
    let table = compare_cases(&summaries).unwrap();
    let asym = table
        .rows
        .iter()
        .find(|r| r.criterion == "asymmetric-generalization")
        .unwrap();
    assert!(asym.passed);

    // swapping the case labels must break the ordinal check
    let (c1, c2) = (summaries[0].case, summaries[1].case);
    summaries[0].case = c2;
    summaries[1].case = c1;
    let table = compare_cases(&summaries).unwrap();
    assert!(!table.all_passed());
    assert!(table
        .rows
        .iter()
        .any(|r| r.criterion == "asymmetric-generalization" && !r.passed));
}

#[test]
fn mismatched_configs_are_refused() {
    let a = run_case(CaseId::C1, &small(1)).unwrap().summary();
    let mut other = small(1);
    other.seed = 9;
    let b = run_case(CaseId::C2, &other).unwrap().summary();
    assert!(compare_cases(&[a.clone(), b]).is_err());
    assert!(compare_cases(&[a.clone(), a.clone()]).is_err());
    assert!(compare_cases(&[a]).unwrap().rows.is_empty());
}

#[test]
fn shifted_probes_fail_and_random_placement_recovers() {
    let cfg = small(4);
    let c5 = run_case(CaseId::C5, &cfg).unwrap();
    let original = c5.mean_pcc("original").unwrap();
    for g in ["shift-i", "shift-ii"] {
        let shifted = c5.mean_pcc(g).unwrap();
        assert!(shifted < 0.5 * original, "{g}: {shifted} vs {original}");
    }
    assert!(c5.outside_max.unwrap() < 1e-6);

    let sic = run_case(CaseId::SIC, &cfg).unwrap();
    assert_eq!(sic.family_means.len(), 4);
    for m in &sic.family_means {
        assert!(m.family.starts_with("corner-"));
        assert!(m.pcc.unwrap() >= 0.8, "{}: {:?}", m.family, m.pcc);
    }
}

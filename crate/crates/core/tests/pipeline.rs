use std::path::Path;

use crimescope::config::{ConfigBuilder, PipelineConfig};
use crimescope::pipeline::{
    file_digest, files, run_pipeline, run_recorded, run_stage, ClusterPart, Resources, RunManifest, Stage,
};
use crimescope::report::{emit_report, write_report, SECTIONS};
use crimescope::Error;

fn fixture_config(out: &Path) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/fixture_config.json");
    let mut b = ConfigBuilder::from_file(&path).unwrap();
    b.set("output_dir", out.to_str().unwrap(), Path::new("."));
    b.build().unwrap()
}

#[test]
fn full_run_writes_every_stage_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let m = run_pipeline(&cfg).unwrap();
    let stages: Vec<Stage> = m.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, Stage::ALL.to_vec());
    assert!(m.verify().unwrap());
    for s in &m.stages {
        assert!(!s.outputs.is_empty(), "{} wrote nothing", s.stage);
    }

    let p = write_report(&m).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    for (i, title) in SECTIONS.iter().enumerate() {
        assert!(text.contains(&format!("{}. {title}", i + 1)), "missing section {title}");
    }
    assert!(!text.contains(dir.path().to_str().unwrap()));

    // regenerating from the persisted manifest gives identical bytes
    let again = RunManifest::read(&dir.path().join(files::MANIFEST)).unwrap();
    assert_eq!(emit_report(&again).unwrap(), text);

    let filter: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(files::FILTER_SUMMARY)).unwrap()).unwrap();
    assert_eq!(filter["quarantined"], 2);
    assert_eq!(filter["accepted"], 42);
    let gtd_dropped = std::fs::read_to_string(dir.path().join(files::PROVENANCE)).unwrap();
    assert!(gtd_dropped.contains("GlobalTerrorism"));
}

#[test]
fn repeated_runs_produce_identical_digests() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = run_pipeline(&fixture_config(a.path())).unwrap();
    let mb = run_pipeline(&fixture_config(b.path())).unwrap();
    assert_eq!(ma.digests(), mb.digests());
}

#[test]
fn deleted_stage_outputs_are_rebuilt_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let m = run_pipeline(&cfg).unwrap();
    let res = Resources::load(&cfg).unwrap();
    for rec in &m.stages {
        let upstream: Vec<_> = m.stages.iter().take_while(|s| s.stage < rec.stage).collect();
        let before: Vec<_> = upstream.iter().flat_map(|s| s.outputs.keys()).map(|n| mtime(&dir.path().join(n))).collect();
        for name in rec.outputs.keys() {
            std::fs::remove_file(dir.path().join(name)).unwrap();
        }
        run_stage(&cfg, &res, rec.stage).unwrap();
        for (name, digest) in &rec.outputs {
            assert_eq!(&file_digest(&dir.path().join(name)).unwrap(), digest, "{name} differs after rerun");
        }
        let after: Vec<_> = upstream.iter().flat_map(|s| s.outputs.keys()).map(|n| mtime(&dir.path().join(n))).collect();
        assert_eq!(before, after, "rerunning {} touched upstream files", rec.stage);
    }
}

fn mtime(p: &Path) -> std::time::SystemTime {
    std::fs::metadata(p).unwrap().modified().unwrap()
}

#[test]
fn single_stage_runs_record_into_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let res = Resources::load(&cfg).unwrap();
    for stage in Stage::ALL {
        let part = (stage == Stage::Cluster).then_some(ClusterPart::KMeans);
        run_recorded(&cfg, &res, stage, part).unwrap();
    }
    let m = run_recorded(&cfg, &res, Stage::Cluster, Some(ClusterPart::Dbscan)).unwrap();
    let full = run_pipeline(&fixture_config(tempfile::tempdir().unwrap().path())).unwrap();
    assert_eq!(m.digests(), full.digests());
    assert!(m.verify().unwrap());
}

#[test]
fn stage_without_upstream_reports_missing_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config(dir.path());
    let res = Resources::load(&cfg).unwrap();
    match run_stage(&cfg, &res, Stage::Vectorize) {
        Err(Error::MissingStageOutput { stage, .. }) => assert_eq!(stage, "corpus"),
        other => panic!("expected a missing-output error, got {other:?}"),
    }
}

#[test]
fn missing_input_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture_config(dir.path());
    cfg.crime_inputs.push(dir.path().join("nope.csv"));
    assert!(matches!(run_pipeline(&cfg), Err(Error::Config(_))));
    assert!(!dir.path().join(files::MANIFEST).exists());
}

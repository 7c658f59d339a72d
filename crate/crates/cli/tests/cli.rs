use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fixture_config.json")
}

fn crimescope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crimescope")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_report_prints_all_sections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let out = dir.path().to_str().unwrap();
    let o = crimescope(&["--config", cfg.to_str().unwrap(), "run", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let written = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();

    let o = crimescope(&["report", "--config", cfg.to_str().unwrap(), "--output_dir", out]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), written);
    assert!(written.contains("8. Entities"));
}

#[test]
fn stage_subcommands_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let base = ["--config", cfg.to_str().unwrap()];
    let out = dir.path().to_str().unwrap();
    for sub in ["ingest", "crimemap", "filter-news", "vectorize", "kmeans", "dbscan", "lda", "entities", "stats", "report"] {
        let mut args = base.to_vec();
        args.extend([sub, "--output-dir", out, "--lda-iterations", "50"]);
        let o = crimescope(&args);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        let text = stdout(&o);
        match sub {
            "crimemap" => assert!(text.starts_with("category,count\n"), "{text}"),
            "lda" => assert!(text.starts_with("topic,rank,word,weight\n"), "{text}"),
            _ => assert!(!text.is_empty()),
        }
    }
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let out = dir.path().to_str().unwrap();
    let c = cfg.to_str().unwrap();
    for sub in ["ingest", "filter-news", "vectorize"] {
        assert_eq!(crimescope(&["--config", c, sub, "--output-dir", out]).status.code(), Some(0));
    }
    let o = crimescope(&["--config", c, "kmeans", "--output-dir", out, "--k=3", "--sweep", "2..6:2"]);
    assert_eq!(o.status.code(), Some(0));
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("kmeans.json")).unwrap()).unwrap();
    assert_eq!(model["k"], 3);
    let sweep = std::fs::read_to_string(dir.path().join("sse_sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3);
}

#[test]
fn validation_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let c = cfg.to_str().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--config", c, "run", "--output-dir", out, "--crime-inputs", "/nonexistent/x.csv"],
        vec!["--config", c, "run", "--output-dir", out, "--k", "0"],
        vec!["--config", c, "run", "--output-dir", out, "--no-such-key", "1"],
        vec!["--config", c, "run", "--output-dir"],
        vec!["run", "--output-dir", out],
        vec!["--config", "/nonexistent/config.json", "run"],
    ];
    for args in cases {
        let o = crimescope(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn stage_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let out = dir.path().to_str().unwrap();
    // nothing upstream has run yet
    let o = crimescope(&["--config", cfg.to_str().unwrap(), "vectorize", "--output-dir", out]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("corpus"));

    let o = crimescope(&["--config", cfg.to_str().unwrap(), "run", "--output-dir", out, "--min-df", "1000"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

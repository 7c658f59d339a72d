//! Plain-text summary of a completed run, built only from its output files.
//!
//! The text holds no timings, so regenerating it from the same outputs is
//! byte-identical.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::pipeline::{files, DbscanSummary, FilterSummary, RunManifest, Stage};

/// Operating point highlighted in the elbow table.
pub const REFERENCE_K: usize = 64;

pub const SECTIONS: [&str; 8] = [
    "Source distribution",
    "Crime category distribution",
    "News filter",
    "SSE elbow",
    "K-Means cluster keywords",
    "DBSCAN clusters",
    "LDA topics",
    "Entities",
];

struct Reader<'a> {
    manifest: &'a RunManifest,
}

impl Reader<'_> {
    fn path(&self, stage: Stage, name: &str) -> Result<PathBuf> {
        let p = self.manifest.config.output_dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingStageOutput {
                stage: stage.name().to_string(),
                path: p,
            })
        }
    }

    fn rows(&self, stage: Stage, name: &str) -> Result<Vec<Vec<String>>> {
        let p = self.path(stage, name)?;
        let mut r = csv::Reader::from_path(&p).map_err(|e| Error::csv(&p, e))?;
        r.records()
            .map(|rec| {
                rec.map(|rec| rec.iter().map(String::from).collect())
                    .map_err(|e| Error::csv(&p, e))
            })
            .collect()
    }

    fn json<T: serde::de::DeserializeOwned>(&self, stage: Stage, name: &str) -> Result<T> {
        let p = self.path(stage, name)?;
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(name, e))
    }
}

fn heading(out: &mut String, n: usize) {
    let title = format!("{}. {}", n + 1, SECTIONS[n]);
    let _ = writeln!(out, "\n{title}\n{}", "-".repeat(title.len()));
}

/// Groups `(group, rank, word, weight)` rows into one line per group.
fn keyword_lines(out: &mut String, label: &str, rows: &[Vec<String>]) {
    let mut current: Option<&str> = None;
    for r in rows {
        if current != Some(r[0].as_str()) {
            if current.is_some() {
                out.push('\n');
            }
            let _ = write!(out, "  {label} {:>3}: {}", r[0], r[2]);
            current = Some(&r[0]);
        } else {
            let _ = write!(out, ", {}", r[2]);
        }
    }
    if current.is_some() {
        out.push('\n');
    }
}

pub fn emit_report(manifest: &RunManifest) -> Result<String> {
    let rd = Reader { manifest };
    let cfg = &manifest.config;
    let mut out = String::new();
    let _ = writeln!(out, "Crime records and news analysis report");
    let _ = writeln!(out, "seed {}", cfg.seed);

    heading(&mut out, 0);
    let rows = rd.rows(Stage::Ingest, files::SOURCE_DISTRIBUTION)?;
    let total: usize = rows.iter().filter_map(|r| r[1].parse::<usize>().ok()).sum();
    for r in &rows {
        let pct = r[2].parse::<f64>().unwrap_or(0.0) * 100.0;
        let _ = writeln!(out, "  {:<24} {:>8} {:>7.2}%", r[0], r[1], pct);
    }
    let _ = writeln!(out, "  {:<24} {:>8}", "total", total);
    let _ = writeln!(out, "  files: {}, {}, {}", files::CRIMES, files::CRIME_QUARANTINE, files::PROVENANCE);

    heading(&mut out, 1);
    for r in rd.rows(Stage::Crimemap, files::CATEGORY_DISTRIBUTION)? {
        let _ = writeln!(out, "  {:<24} {:>8}", r[0], r[1]);
    }

    heading(&mut out, 2);
    let f: FilterSummary = rd.json(Stage::Corpus, files::FILTER_SUMMARY)?;
    let _ = writeln!(out, "  articles merged      {}", f.total);
    let _ = writeln!(out, "  articles quarantined {}", f.quarantined);
    let _ = writeln!(out, "  crime articles       {}", f.accepted);
    let _ = writeln!(out, "  acceptance rate      {:.2}% (at least {} dictionary stems)", f.acceptance_rate * 100.0, f.threshold);

    heading(&mut out, 3);
    match &cfg.sweep {
        None => {
            let m: serde_json::Value = rd.json(Stage::Cluster, files::KMEANS_MODEL)?;
            let _ = writeln!(out, "  single k: k = {}, sse = {:.6}", m["k"], m["sse"].as_f64().unwrap_or(f64::NAN));
            let _ = writeln!(out, "  reference k = {REFERENCE_K}");
        }
        Some(_) => {
            let rows = rd.rows(Stage::Cluster, files::SSE_SWEEP)?;
            let _ = writeln!(out, "  {:>5} {:>16}", "k", "sse");
            let mut has_ref = false;
            for r in &rows {
                let mut flags = Vec::new();
                if r[2] == "true" {
                    flags.push("elbow");
                }
                if r[0] == REFERENCE_K.to_string() {
                    flags.push("reference");
                    has_ref = true;
                }
                let line = format!("  {:>5} {:>16} {}", r[0], r[1], flags.join(" "));
                let _ = writeln!(out, "{}", line.trim_end());
            }
            if !has_ref {
                let _ = writeln!(out, "  reference k = {REFERENCE_K} is outside the sweep");
            }
            let _ = writeln!(out, "  plot: {}", files::SSE_SWEEP_SVG);
        }
    }

    heading(&mut out, 4);
    let sizes = rd.rows(Stage::Cluster, files::KMEANS_SIZES)?;
    let _ = writeln!(out, "  k = {}, sizes (largest first): {}", cfg.k, sizes.iter().map(|r| r[1].as_str()).collect::<Vec<_>>().join(" "));
    keyword_lines(&mut out, "cluster", &rd.rows(Stage::Cluster, files::KMEANS_TOP_TERMS)?);
    let _ = writeln!(out, "  projection: {}, {}", files::PCA_PROJECTION, files::PCA_SVG);

    heading(&mut out, 5);
    let d: DbscanSummary = rd.json(Stage::Cluster, files::DBSCAN_SUMMARY)?;
    let _ = writeln!(out, "  eps = {}, min_samples = {}", d.eps, d.min_samples);
    let _ = writeln!(out, "  clusters {}, noise points {}", d.n_clusters, d.noise);
    let _ = writeln!(
        out,
        "  sizes (largest first): {}",
        d.sizes.iter().map(|s| s.1.to_string()).collect::<Vec<_>>().join(" ")
    );

    heading(&mut out, 6);
    keyword_lines(&mut out, "topic", &rd.rows(Stage::Topics, files::LDA_TOP_WORDS)?);

    heading(&mut out, 7);
    for r in rd.rows(Stage::Entities, files::ENTITY_COUNTS)? {
        let _ = writeln!(out, "  {:<8} {:>8}", r[0], r[1]);
    }
    let _ = writeln!(out, "  annotated articles: {}", files::ARTICLES_ENTITIES);
    let _ = writeln!(
        out,
        "\nOther outputs: {}, {}, {}, {}, {}",
        files::GEO_POINTS,
        files::GEO_SVG,
        files::OUTLET_COUNTS,
        files::HIT_TIMES,
        files::WORD_FREQUENCIES
    );
    Ok(out)
}

/// Writes the report next to the run outputs and returns its path.
pub fn write_report(manifest: &RunManifest) -> Result<PathBuf> {
    let text = emit_report(manifest)?;
    let p = manifest.config.output_dir.join(files::REPORT);
    std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    Ok(p)
}

//! File-to-file pipeline stages and the run manifest.
//!
//! Every stage reads only configuration, bundled data and files written by
//! earlier stages, so any stage can be rerun on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{geo_points, pca_project, word_frequencies};
use crate::cluster::{cluster_sizes, dbscan_fit, kmeans_fit, sse_sweep, top_terms, write_labels, KMeansModel, KMeansParams};
use crate::config::PipelineConfig;
use crate::corpus::{
    filter_crime_articles, group_count, merge_articles, read_articles, read_merged_articles, write_article_quarantine,
    write_articles, Article, CrimeDictionary,
};
use crate::crimemap::{category_distribution, compile_rules, load_rules, CanonicalCrimeType, CrimeTypeMapper};
use crate::entities::{annotate_articles, label_counts, write_annotated, Gazetteer};
use crate::error::{Error, Result};
use crate::ingest::{
    merge_sources, read_canonical_file, read_source, source_distribution, write_canonical_file, write_quarantine_file,
    MergedCrimeDataset,
};
use crate::svg;
use crate::textproc::{content_terms, StopList};
use crate::topics::{lda_fit, top_words, write_top_words, LdaParams};
use crate::vectorize::{fit_vocabulary, transform, DocTermMatrix, TokenizedDoc, VectorizerParams};

/// Per-stage offsets added to the configured seed.
pub const KMEANS_SEED_OFFSET: u64 = 1;
pub const LDA_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Crimemap,
    Corpus,
    Vectorize,
    Cluster,
    Topics,
    Entities,
    Analytics,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Crimemap,
        Stage::Corpus,
        Stage::Vectorize,
        Stage::Cluster,
        Stage::Topics,
        Stage::Entities,
        Stage::Analytics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Crimemap => "crimemap",
            Stage::Corpus => "corpus",
            Stage::Vectorize => "vectorize",
            Stage::Cluster => "cluster",
            Stage::Topics => "topics",
            Stage::Entities => "entities",
            Stage::Analytics => "analytics",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Output file names, relative to the output directory.
pub mod files {
    pub const CRIMES: &str = "crimes.csv";
    pub const CRIME_QUARANTINE: &str = "crimes_quarantine.csv";
    pub const PROVENANCE: &str = "provenance.json";
    pub const SOURCE_DISTRIBUTION: &str = "source_distribution.csv";
    pub const CATEGORY_DISTRIBUTION: &str = "category_distribution.csv";
    pub const CRIME_CATEGORIES: &str = "crime_categories.csv";
    pub const ARTICLES_MERGED: &str = "articles_merged.csv";
    pub const ARTICLE_QUARANTINE: &str = "articles_quarantine.csv";
    pub const ARTICLES_CRIME: &str = "articles_crime.csv";
    pub const FILTER_SUMMARY: &str = "filter_summary.json";
    pub const VOCABULARY: &str = "vocabulary.csv";
    pub const TFIDF_CSV: &str = "tfidf.csv";
    pub const TFIDF_BIN: &str = "tfidf.bin";
    pub const TFIDF_SHAPE: &str = "tfidf.json";
    pub const KMEANS_MODEL: &str = "kmeans.json";
    pub const KMEANS_CENTROIDS: &str = "kmeans_centroids.bin";
    pub const KMEANS_ASSIGNMENTS: &str = "kmeans_assignments.csv";
    pub const KMEANS_TOP_TERMS: &str = "kmeans_top_terms.csv";
    pub const KMEANS_SIZES: &str = "kmeans_sizes.csv";
    pub const SSE_SWEEP: &str = "sse_sweep.csv";
    pub const SSE_SWEEP_SVG: &str = "sse_sweep.svg";
    pub const DBSCAN_LABELS: &str = "dbscan_labels.csv";
    pub const DBSCAN_SUMMARY: &str = "dbscan.json";
    pub const LDA_MODEL: &str = "lda.json";
    pub const LDA_PHI: &str = "lda_phi.bin";
    pub const LDA_THETA: &str = "lda_theta.bin";
    pub const LDA_TOP_WORDS: &str = "lda_top_words.csv";
    pub const ARTICLES_ENTITIES: &str = "articles_entities.csv";
    pub const ENTITY_COUNTS: &str = "entity_counts.csv";
    pub const GEO_POINTS: &str = "geo_points.csv";
    pub const GEO_SVG: &str = "geo_points.svg";
    pub const OUTLET_COUNTS: &str = "outlet_counts.csv";
    pub const HIT_TIMES: &str = "hit_times.json";
    pub const WORD_FREQUENCIES: &str = "word_frequencies.csv";
    pub const PCA_PROJECTION: &str = "pca_projection.csv";
    pub const PCA_SVG: &str = "pca_projection.svg";
    pub const MANIFEST: &str = "manifest.json";
    pub const REPORT: &str = "report.txt";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub rows: usize,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub rows: usize,
    /// file name → SHA-256 hex digest
    pub outputs: BTreeMap<String, String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    /// All output digests keyed by file name.
    pub fn digests(&self) -> BTreeMap<String, String> {
        self.stages.iter().flat_map(|s| s.outputs.clone()).collect()
    }

    /// Recomputes every digest from the files on disk.
    pub fn verify(&self) -> Result<bool> {
        for (name, digest) in self.digests() {
            if file_digest(&self.config.output_dir.join(&name))? != digest {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::json("manifest", e))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json("manifest", e))
    }
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Bundled data or the configured replacements.
pub struct Resources {
    pub mapper: CrimeTypeMapper,
    pub dictionary: CrimeDictionary,
    pub stoplist: StopList,
    pub gazetteer: Gazetteer,
}

impl Resources {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let mapper = match &cfg.crime_rules {
            Some(p) => compile_rules(load_rules(p)?)?,
            None => CrimeTypeMapper::bundled(),
        };
        let dictionary = match &cfg.dictionary {
            Some(p) => CrimeDictionary::from_file(p, cfg.exclusion_groups.clone())?,
            None => CrimeDictionary::new(CrimeDictionary::bundled().stems().iter().cloned(), cfg.exclusion_groups.clone())?,
        };
        let stoplist = match &cfg.stopwords {
            Some(p) => StopList::from_file(p)?,
            None => StopList::english(),
        };
        let gazetteer = match &cfg.gazetteer_dir {
            Some(p) => Gazetteer::from_dir(p)?,
            None => Gazetteer::bundled(),
        };
        Ok(Self {
            mapper,
            dictionary,
            stoplist,
            gazetteer,
        })
    }
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    res: &'a Resources,
    outputs: Vec<String>,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    /// Path of a file this stage writes; recorded for the manifest.
    fn out(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.out(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let json = serde_json::to_string_pretty(value).map_err(|e| Error::json(name, e))?;
        self.write_text(name, &(json + "\n"))
    }

    fn write_csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
        I: IntoIterator<Item = R>,
    {
        let p = self.out(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| Error::csv(&p, e))?;
        w.write_record(header).map_err(|e| Error::csv(&p, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| Error::csv(&p, e))?;
        }
        w.flush().map_err(|e| Error::io(&p, e))
    }

    /// A prior stage's output; absent files name the stage that makes them.
    fn input(&self, stage: Stage, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingStageOutput {
                stage: stage.name().to_string(),
                path: p,
            })
        }
    }

    fn crimes(&self) -> Result<MergedCrimeDataset> {
        Ok(read_canonical_file(&self.input(Stage::Ingest, files::CRIMES)?)?.dataset)
    }

    fn crime_articles(&self) -> Result<Vec<Article>> {
        read_merged_articles(&self.input(Stage::Corpus, files::ARTICLES_CRIME)?)
    }

    fn matrix(&self) -> Result<DocTermMatrix> {
        DocTermMatrix::read_binary(
            &self.input(Stage::Vectorize, files::TFIDF_BIN)?,
            &self.input(Stage::Vectorize, files::TFIDF_SHAPE)?,
        )
    }
}

pub fn doc_id(a: &Article) -> String {
    format!("{}:{}", a.source_dataset, a.id)
}

pub fn tokenized_docs(articles: &[Article], stoplist: &StopList) -> Vec<TokenizedDoc> {
    use rayon::prelude::*;
    articles
        .par_iter()
        .map(|a| TokenizedDoc::new(doc_id(a), content_terms(&a.full_text(), stoplist)))
        .collect()
}

fn ingest(ctx: &mut Ctx) -> Result<usize> {
    let inputs = ctx.cfg.crime_inputs.iter().map(|p| read_source(p)).collect::<Result<Vec<_>>>()?;
    let merged = merge_sources(&inputs);
    write_canonical_file(&ctx.out(files::CRIMES), &merged.dataset)?;
    write_quarantine_file(&ctx.out(files::CRIME_QUARANTINE), &merged.quarantine)?;
    ctx.write_json(files::PROVENANCE, &merged.provenance_report())?;
    let fractions = source_distribution(&merged.dataset)?;
    let rows: Vec<[String; 3]> = fractions
        .iter()
        .map(|(k, f)| [k.to_string(), merged.dataset.provenance[k].to_string(), format!("{f:.6}")])
        .collect();
    ctx.write_csv(files::SOURCE_DISTRIBUTION, &["source", "count", "fraction"], rows)?;
    Ok(merged.dataset.len())
}

fn crimemap(ctx: &mut Ctx) -> Result<usize> {
    let d = ctx.crimes()?;
    let mapper = &ctx.res.mapper;
    let dist = category_distribution(&d, mapper);
    let rows: Vec<[String; 2]> = dist.iter().map(|(c, n)| [c.to_string(), n.to_string()]).collect();
    ctx.write_csv(files::CATEGORY_DISTRIBUTION, &["category", "count"], rows)?;
    let rows: Vec<[String; 4]> = d
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                i.to_string(),
                r.database.to_string(),
                r.crime_type.clone().unwrap_or_default(),
                mapper.canonicalize(r.crime_type.as_deref()).to_string(),
            ]
        })
        .collect();
    ctx.write_csv(files::CRIME_CATEGORIES, &["row", "database", "crime_type", "category"], rows)?;
    Ok(d.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub total: usize,
    pub accepted: usize,
    pub quarantined: usize,
    pub threshold: usize,
    pub acceptance_rate: f64,
}

fn corpus(ctx: &mut Ctx) -> Result<usize> {
    let inputs = ctx.cfg.article_inputs.iter().map(|p| read_articles(p)).collect::<Result<Vec<_>>>()?;
    let merged = merge_articles(&inputs);
    write_articles(&ctx.out(files::ARTICLES_MERGED), &merged.articles)?;
    write_article_quarantine(&ctx.out(files::ARTICLE_QUARANTINE), &merged.quarantine)?;
    let kept = filter_crime_articles(&merged.articles, &ctx.res.dictionary, ctx.cfg.threshold);
    write_articles(&ctx.out(files::ARTICLES_CRIME), &kept)?;
    let total = merged.articles.len();
    let summary = FilterSummary {
        total,
        accepted: kept.len(),
        quarantined: merged.quarantine.len(),
        threshold: ctx.cfg.threshold,
        acceptance_rate: if total == 0 { 0.0 } else { kept.len() as f64 / total as f64 },
    };
    ctx.write_json(files::FILTER_SUMMARY, &summary)?;
    Ok(kept.len())
}

fn vectorize(ctx: &mut Ctx) -> Result<usize> {
    let articles = ctx.crime_articles()?;
    let docs = tokenized_docs(&articles, &ctx.res.stoplist);
    let params = VectorizerParams {
        min_df: ctx.cfg.min_df,
        max_df_ratio: ctx.cfg.max_df_ratio,
        max_features: ctx.cfg.max_features,
    };
    let voc = fit_vocabulary(&docs, &params)?;
    voc.write_csv(&ctx.out(files::VOCABULARY))?;
    let m = transform(&voc, &docs);
    m.write_csv(&ctx.out(files::TFIDF_CSV))?;
    let (bin, shape) = (ctx.out(files::TFIDF_BIN), ctx.out(files::TFIDF_SHAPE));
    m.write_binary(&bin, &shape)?;
    Ok(m.n_rows())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanSummary {
    pub eps: f64,
    pub min_samples: usize,
    pub n_clusters: usize,
    pub noise: usize,
    /// (label, size), largest first
    pub sizes: Vec<(i64, usize)>,
}

fn kmeans(ctx: &mut Ctx) -> Result<usize> {
    let m = ctx.matrix()?;
    let params = KMeansParams {
        max_iter: ctx.cfg.kmeans_max_iter,
        tol: ctx.cfg.kmeans_tol,
    };
    let seed = ctx.cfg.seed.wrapping_add(KMEANS_SEED_OFFSET);
    let model = kmeans_fit(&m.rows, ctx.cfg.k, seed, &params)?;
    let (meta, cents) = (ctx.out(files::KMEANS_MODEL), ctx.out(files::KMEANS_CENTROIDS));
    model.write(&meta, &cents)?;
    write_labels(&ctx.out(files::KMEANS_ASSIGNMENTS), &m.doc_ids, &model.labels())?;

    let terms = top_terms(&model, &m.terms, ctx.cfg.top_n)?;
    let rows: Vec<[String; 4]> = terms
        .iter()
        .enumerate()
        .flat_map(|(c, list)| {
            list.iter()
                .enumerate()
                .map(move |(r, (t, w))| [c.to_string(), (r + 1).to_string(), t.clone(), format!("{w:.6}")])
        })
        .collect();
    ctx.write_csv(files::KMEANS_TOP_TERMS, &["cluster", "rank", "term", "weight"], rows)?;
    let sizes = cluster_sizes(&model.labels());
    let rows: Vec<[String; 2]> = sizes.clusters.iter().map(|(l, n)| [l.to_string(), n.to_string()]).collect();
    ctx.write_csv(files::KMEANS_SIZES, &["cluster", "size"], rows)?;

    if let Some(ks) = &ctx.cfg.sweep {
        let sweep = sse_sweep(&m.rows, ks, seed, &params)?;
        let rows: Vec<[String; 3]> = sweep
            .iter()
            .map(|p| [p.k.to_string(), format!("{:.9}", p.sse), p.elbow.to_string()])
            .collect();
        ctx.write_csv(files::SSE_SWEEP, &["k", "sse", "elbow"], rows)?;
        let pts: Vec<(f64, f64)> = sweep.iter().map(|p| (p.k as f64, p.sse)).collect();
        let elbow = sweep.iter().position(|p| p.elbow);
        ctx.write_text(files::SSE_SWEEP_SVG, &svg::line(&pts, elbow, "SSE by cluster count", "k", "SSE"))?;
    }
    Ok(m.n_rows())
}

fn dbscan(ctx: &mut Ctx) -> Result<usize> {
    let m = ctx.matrix()?;
    let r = dbscan_fit(&m.rows, ctx.cfg.eps, ctx.cfg.min_samples)?;
    write_labels(&ctx.out(files::DBSCAN_LABELS), &m.doc_ids, &r.labels)?;
    let sizes = cluster_sizes(&r.labels);
    let summary = DbscanSummary {
        eps: r.eps,
        min_samples: r.min_samples,
        n_clusters: r.n_clusters,
        noise: sizes.noise,
        sizes: sizes.clusters,
    };
    ctx.write_json(files::DBSCAN_SUMMARY, &summary)?;
    Ok(m.n_rows())
}

fn topics(ctx: &mut Ctx) -> Result<usize> {
    let articles = ctx.crime_articles()?;
    let docs = tokenized_docs(&articles, &ctx.res.stoplist);
    let params = LdaParams {
        k: ctx.cfg.lda_topics,
        alpha: ctx.cfg.lda_alpha,
        beta: ctx.cfg.lda_beta,
        iterations: ctx.cfg.lda_iterations,
        seed: ctx.cfg.seed.wrapping_add(LDA_SEED_OFFSET),
    };
    let model = lda_fit(&docs, &params)?;
    let (meta, phi, theta) = (ctx.out(files::LDA_MODEL), ctx.out(files::LDA_PHI), ctx.out(files::LDA_THETA));
    model.write(&meta, &phi, &theta)?;
    write_top_words(&ctx.out(files::LDA_TOP_WORDS), &top_words(&model, ctx.cfg.top_n))?;
    Ok(docs.len())
}

fn entities(ctx: &mut Ctx) -> Result<usize> {
    let articles = ctx.crime_articles()?;
    let ents = annotate_articles(&articles, &ctx.res.gazetteer);
    write_annotated(&ctx.out(files::ARTICLES_ENTITIES), &articles, &ents)?;
    let rows: Vec<[String; 2]> = label_counts(&ents).iter().map(|(l, n)| [l.to_string(), n.to_string()]).collect();
    ctx.write_csv(files::ENTITY_COUNTS, &["label", "count"], rows)?;
    Ok(articles.len())
}

fn category_index(c: CanonicalCrimeType) -> i64 {
    CanonicalCrimeType::ALL.iter().position(|&x| x == c).unwrap_or(0) as i64
}

fn analytics(ctx: &mut Ctx) -> Result<usize> {
    let crimes = ctx.crimes()?;
    let geo = geo_points(&crimes, &ctx.res.mapper, &ctx.cfg.geo_box);
    let rows: Vec<[String; 5]> = geo
        .main
        .iter()
        .map(|p| (p, false))
        .chain(geo.outliers.iter().map(|p| (p, true)))
        .map(|(p, outlier)| {
            [p.index.to_string(), p.long.to_string(), p.lat.to_string(), p.category.to_string(), outlier.to_string()]
        })
        .collect();
    ctx.write_csv(files::GEO_POINTS, &["row", "long", "lat", "category", "outlier"], rows)?;
    let pts: Vec<(f64, f64, i64)> = geo.main.iter().map(|p| (p.long, p.lat, category_index(p.category))).collect();
    ctx.write_text(files::GEO_SVG, &svg::scatter(&pts, "Crime locations", "longitude", "latitude"))?;

    let merged = read_merged_articles(&ctx.input(Stage::Corpus, files::ARTICLES_MERGED)?)?;
    let groups = group_count(&merged, &ctx.cfg.outlet_key)?;
    let rows: Vec<[String; 2]> = groups.counts.iter().map(|(g, n)| [g.clone(), n.to_string()]).collect();
    ctx.write_csv(files::OUTLET_COUNTS, &[ctx.cfg.outlet_key.as_str(), "count"], rows)?;
    ctx.write_json(files::HIT_TIMES, &groups.hit_times)?;

    let crime_articles = ctx.crime_articles()?;
    let texts: Vec<String> = crime_articles.iter().map(Article::full_text).collect();
    let freq = word_frequencies(&texts, &ctx.res.stoplist, ctx.cfg.word_freq_n);
    let rows: Vec<[String; 2]> = freq.iter().map(|(t, n)| [t.clone(), n.to_string()]).collect();
    ctx.write_csv(files::WORD_FREQUENCIES, &["term", "count"], rows)?;

    let m = ctx.matrix()?;
    let labels = read_labels(&ctx.input(Stage::Cluster, files::KMEANS_ASSIGNMENTS)?)?;
    let proj = pca_project(&m.rows, 2)?;
    let rows: Vec<[String; 4]> = m
        .doc_ids
        .iter()
        .zip(&proj.coords)
        .zip(&labels)
        .map(|((id, c), l)| [id.clone(), format!("{:.9}", c[0]), format!("{:.9}", c[1]), l.to_string()])
        .collect();
    ctx.write_csv(files::PCA_PROJECTION, &["doc_id", "pc1", "pc2", "cluster"], rows)?;
    let pts: Vec<(f64, f64, i64)> = proj.coords.iter().zip(&labels).map(|(c, &l)| (c[0], c[1], l)).collect();
    ctx.write_text(files::PCA_SVG, &svg::scatter(&pts, "K-Means clusters, PCA projection", "PC1", "PC2"))?;
    Ok(crimes.len())
}

pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let v = rec.get(1).unwrap_or("");
            v.parse().map_err(|_| Error::malformed("cluster", v, "not an integer label"))
        })
        .collect()
}

/// The parts of the cluster stage, runnable separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterPart {
    KMeans,
    Dbscan,
}

fn stage_failure(cfg: &PipelineConfig, stage: Stage, e: Error) -> Error {
    match e {
        Error::MissingStageOutput { .. } | Error::Config(_) => e,
        other => {
            let mut message = other.to_string();
            let quarantined: usize = [files::CRIME_QUARANTINE, files::ARTICLE_QUARANTINE]
                .iter()
                .filter_map(|f| csv::Reader::from_path(cfg.output_dir.join(f)).ok())
                .map(|mut r| r.records().count())
                .sum();
            if quarantined > 0 {
                message.push_str(&format!(" ({quarantined} input rows quarantined so far)"));
            }
            Error::Stage {
                stage: stage.name().to_string(),
                message,
            }
        }
    }
}

fn prepare(cfg: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))
}

fn execute(cfg: &PipelineConfig, res: &Resources, stage: Stage, part: Option<ClusterPart>) -> Result<StageOutcome> {
    prepare(cfg)?;
    let mut ctx = Ctx {
        cfg,
        res,
        outputs: Vec::new(),
    };
    let rows = match stage {
        Stage::Ingest => ingest(&mut ctx),
        Stage::Crimemap => crimemap(&mut ctx),
        Stage::Corpus => corpus(&mut ctx),
        Stage::Vectorize => vectorize(&mut ctx),
        Stage::Cluster => match part {
            Some(ClusterPart::KMeans) => kmeans(&mut ctx),
            Some(ClusterPart::Dbscan) => dbscan(&mut ctx),
            None => kmeans(&mut ctx).and_then(|_| dbscan(&mut ctx)),
        },
        Stage::Topics => topics(&mut ctx),
        Stage::Entities => entities(&mut ctx),
        Stage::Analytics => analytics(&mut ctx),
    }
    .map_err(|e| stage_failure(cfg, stage, e))?;
    Ok(StageOutcome {
        rows,
        outputs: ctx.outputs,
    })
}

/// Runs a single stage against files already in the output directory.
pub fn run_stage(cfg: &PipelineConfig, res: &Resources, stage: Stage) -> Result<StageOutcome> {
    execute(cfg, res, stage, None)
}

pub fn run_cluster_part(cfg: &PipelineConfig, res: &Resources, part: ClusterPart) -> Result<StageOutcome> {
    execute(cfg, res, Stage::Cluster, Some(part))
}

fn record(cfg: &PipelineConfig, stage: Stage, outcome: StageOutcome, wall_ms: u64) -> Result<StageRecord> {
    let outputs = outcome
        .outputs
        .into_iter()
        .map(|name| {
            let d = file_digest(&cfg.output_dir.join(&name))?;
            Ok((name, d))
        })
        .collect::<Result<_>>()?;
    Ok(StageRecord {
        stage,
        rows: outcome.rows,
        outputs,
        wall_ms,
    })
}

/// Validates, then runs all eight stages in order, rewriting the manifest
/// after each completed stage so a failed run still documents its progress.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let res = Resources::load(cfg).map_err(|e| Error::Config(e.to_string()))?;
    prepare(cfg)?;
    let mut manifest = RunManifest {
        config: cfg.clone(),
        stages: Vec::new(),
    };
    let manifest_path = cfg.output_dir.join(files::MANIFEST);
    for stage in Stage::ALL {
        let start = Instant::now();
        let outcome = run_stage(cfg, &res, stage)?;
        let ms = start.elapsed().as_millis() as u64;
        manifest.stages.push(record(cfg, stage, outcome, ms)?);
        manifest.write(&manifest_path)?;
    }
    Ok(manifest)
}

/// Runs one stage (or one half of the cluster stage) and records it in the
/// output directory's manifest, creating the manifest when absent.
pub fn run_recorded(cfg: &PipelineConfig, res: &Resources, stage: Stage, part: Option<ClusterPart>) -> Result<RunManifest> {
    let start = Instant::now();
    let outcome = execute(cfg, res, stage, part)?;
    let ms = start.elapsed().as_millis() as u64;
    let rec = record(cfg, stage, outcome, ms)?;

    let path = cfg.output_dir.join(files::MANIFEST);
    let mut manifest = RunManifest::read(&path).unwrap_or_else(|_| RunManifest {
        config: cfg.clone(),
        stages: Vec::new(),
    });
    manifest.config = cfg.clone();
    match manifest.stages.iter_mut().find(|s| s.stage == stage) {
        // a cluster half keeps the other half's digests
        Some(old) if part.is_some() => {
            old.outputs.extend(rec.outputs);
            old.rows = rec.rows;
            old.wall_ms = rec.wall_ms;
        }
        Some(old) => *old = rec,
        None => manifest.stages.push(rec),
    }
    manifest.stages.sort_by_key(|s| s.stage);
    manifest.write(&path)?;
    Ok(manifest)
}

pub fn load_kmeans(output_dir: &Path) -> Result<KMeansModel> {
    KMeansModel::read(&output_dir.join(files::KMEANS_MODEL), &output_dir.join(files::KMEANS_CENTROIDS))
}

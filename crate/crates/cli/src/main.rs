use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use crimescope::config::{ConfigBuilder, PipelineConfig};
use crimescope::pipeline::{files, run_pipeline, run_recorded, ClusterPart, Resources, RunManifest, Stage};
use crimescope::report::write_report;
use crimescope::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_STAGE: u8 = 3;

/// Unify crime records, filter crime news and mine the articles.
#[derive(Debug, Parser)]
#[command(name = "crimescope", version)]
struct Cli {
    /// Pipeline configuration (JSON). Relative paths inside it resolve
    /// against the file's directory.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Merge the crime sources into one canonical table.
    Ingest(Overrides),
    /// Map raw crime types to canonical categories and print the distribution.
    Crimemap(Overrides),
    /// Merge the article sources and keep the crime-related ones.
    FilterNews(Overrides),
    /// Build the TF-IDF matrix of the crime articles.
    Vectorize(Overrides),
    /// K-Means clustering plus the optional SSE sweep.
    Kmeans(Overrides),
    Dbscan(Overrides),
    /// Fit the topic model and print the top words per topic as CSV.
    Lda(Overrides),
    /// Named-entity annotation of the crime articles.
    Entities(Overrides),
    /// Geography, outlet counts, word frequencies and the PCA projection.
    Stats(Overrides),
    /// Regenerate the report from a finished run's outputs.
    Report(Overrides),
    /// Run every stage, then write the report.
    Run(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Configuration overrides, e.g. `--k 32 --sweep 2..64:2 --seed 7`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    pairs: Vec<String>,
}

impl Command {
    fn overrides(&self) -> &[String] {
        match self {
            Command::Ingest(o)
            | Command::Crimemap(o)
            | Command::FilterNews(o)
            | Command::Vectorize(o)
            | Command::Kmeans(o)
            | Command::Dbscan(o)
            | Command::Lda(o)
            | Command::Entities(o)
            | Command::Stats(o)
            | Command::Report(o)
            | Command::Run(o) => &o.pairs,
        }
    }
}

/// Splits `--key value` and `--key=value` items into pairs.
fn parse_pairs(items: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = items.iter();
    while let Some(item) = it.next() {
        let Some(key) = item.strip_prefix("--") else {
            bail!("expected --key, found `{item}`");
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().with_context(|| format!("--{key} needs a value"))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let cwd = std::env::current_dir().context("current directory")?;
    let mut pairs = parse_pairs(cli.command.overrides()).map_err(|e| Error::Config(format!("{e:#}")))?;
    // `--config` is also accepted after the subcommand
    let mut config = cli.config.clone();
    pairs.retain(|(k, v)| {
        if k == "config" {
            config = Some(cwd.join(v));
            false
        } else {
            true
        }
    });
    let mut builder = match &config {
        Some(p) => ConfigBuilder::from_file(p).map_err(|e| Error::Config(e.to_string()))?,
        None => ConfigBuilder::empty(&cwd),
    };
    for (k, v) in &pairs {
        builder.set(k, v, &cwd);
    }
    let cfg = builder.build()?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_file(path: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    print!("{text}");
    Ok(())
}

fn summarize(m: &RunManifest, stage: Stage) {
    if let Some(rec) = m.stages.iter().find(|s| s.stage == stage) {
        println!("{stage}: {} rows, {} ms", rec.rows, rec.wall_ms);
        for name in rec.outputs.keys() {
            println!("  {}", m.config.output_dir.join(name).display());
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    if let Command::Report(_) = cli.command {
        let manifest = RunManifest::read(&out.join(files::MANIFEST)).map_err(|_| Error::MissingStageOutput {
            stage: "run".into(),
            path: out.join(files::MANIFEST),
        })?;
        let p = write_report(&manifest)?;
        return print_file(&p);
    }
    if let Command::Run(_) = cli.command {
        let manifest = run_pipeline(&cfg)?;
        for s in Stage::ALL {
            summarize(&manifest, s);
        }
        let p = write_report(&manifest)?;
        println!("report: {}", p.display());
        return Ok(());
    }

    let res = Resources::load(&cfg).map_err(|e| Error::Config(e.to_string()))?;
    let (stage, part) = match cli.command {
        Command::Ingest(_) => (Stage::Ingest, None),
        Command::Crimemap(_) => (Stage::Crimemap, None),
        Command::FilterNews(_) => (Stage::Corpus, None),
        Command::Vectorize(_) => (Stage::Vectorize, None),
        Command::Kmeans(_) => (Stage::Cluster, Some(ClusterPart::KMeans)),
        Command::Dbscan(_) => (Stage::Cluster, Some(ClusterPart::Dbscan)),
        Command::Lda(_) => (Stage::Topics, None),
        Command::Entities(_) => (Stage::Entities, None),
        Command::Stats(_) => (Stage::Analytics, None),
        Command::Report(_) | Command::Run(_) => unreachable!("handled above"),
    };
    let manifest = run_recorded(&cfg, &res, stage, part)?;
    match cli.command {
        Command::Crimemap(_) => print_file(&out.join(files::CATEGORY_DISTRIBUTION)),
        Command::Lda(_) => print_file(&out.join(files::LDA_TOP_WORDS)),
        _ => {
            summarize(&manifest, stage);
            Ok(())
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => EXIT_VALIDATION,
        _ => EXIT_STAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

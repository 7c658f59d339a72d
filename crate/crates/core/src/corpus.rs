//! News article merging and crime-article selection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::analytics::{summary_stats, SummaryStats};
use crate::error::{Error, Result};
use crate::textproc::{stem_matches, tokenize_terms};

const DEFAULT_STEMS: &str = include_str!("../data/crime_stems.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ArticleSource {
    KaggleNews,
    EagerNews,
}

impl ArticleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::KaggleNews => "KaggleNews",
            Self::EagerNews => "EagerNews",
        }
    }
}

impl fmt::Display for ArticleSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub source_dataset: ArticleSource,
    pub id: String,
    pub title: Option<String>,
    pub publication: Option<String>,
    pub newline_id: Option<String>,
    pub news_outlet_id: Option<String>,
    pub author: Option<String>,
    pub publish_time: Option<NaiveDateTime>,
    pub outlet_name: Option<String>,
    pub content: String,
    pub article_url: Option<String>,
}

pub const ARTICLE_COLUMNS: [&str; 11] = [
    "DataSource",
    "ID",
    "Title",
    "Publication",
    "NewlineID",
    "NewsOutletID",
    "Author",
    "PublishTime",
    "OutletName",
    "Content",
    "ArticleURL",
];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

impl Article {
    pub fn new(source_dataset: ArticleSource, id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            source_dataset,
            id: id.into(),
            title: None,
            publication: None,
            newline_id: None,
            news_outlet_id: None,
            author: None,
            publish_time: None,
            outlet_name: None,
            content: content.into(),
            article_url: None,
        }
    }

    /// Title and content joined, the text the dictionary filter scans.
    pub fn full_text(&self) -> String {
        match &self.title {
            Some(t) => format!("{t}\n{}", self.content),
            None => self.content.clone(),
        }
    }

    /// Attribute value by canonical column or snake_case field name.
    pub fn attribute(&self, key: &str) -> Result<Option<String>> {
        let opt = |o: &Option<String>| o.clone();
        Ok(match key {
            "DataSource" | "source_dataset" => Some(self.source_dataset.to_string()),
            "ID" | "id" => Some(self.id.clone()),
            "Title" | "title" => opt(&self.title),
            "Publication" | "publication" => opt(&self.publication),
            "NewlineID" | "newline_id" => opt(&self.newline_id),
            "NewsOutletID" | "news_outlet_id" => opt(&self.news_outlet_id),
            "Author" | "author" => opt(&self.author),
            "PublishTime" | "publish_time" => self.publish_time.map(|t| t.format(TIME_FORMAT).to_string()),
            "OutletName" | "outlet_name" => opt(&self.outlet_name),
            "Content" | "content" => Some(self.content.clone()),
            "ArticleURL" | "article_url" => opt(&self.article_url),
            other => return Err(Error::UnknownAttribute(other.to_string())),
        })
    }

    pub fn to_row(&self) -> Vec<String> {
        ARTICLE_COLUMNS
            .iter()
            .map(|c| self.attribute(c).expect("canonical column").unwrap_or_default())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArticleSchema {
    Kaggle,
    Eager,
    Merged,
}

struct ArticleLayout {
    schema: ArticleSchema,
    signature: &'static [&'static str],
    id: &'static str,
    title: Option<&'static str>,
    publication: Option<&'static str>,
    newline_id: Option<&'static str>,
    news_outlet_id: Option<&'static str>,
    author: Option<&'static str>,
    publish_time: Option<(&'static str, &'static [&'static str])>,
    outlet_name: Option<&'static str>,
    content: &'static str,
    article_url: Option<&'static str>,
}

const KAGGLE_LAYOUT: ArticleLayout = ArticleLayout {
    schema: ArticleSchema::Kaggle,
    signature: &["publication", "url", "content"],
    id: "id",
    title: Some("title"),
    publication: Some("publication"),
    newline_id: None,
    news_outlet_id: None,
    author: Some("author"),
    publish_time: Some(("date", &["%Y-%m-%d"])),
    outlet_name: None,
    content: "content",
    article_url: Some("url"),
};

const EAGER_LAYOUT: ArticleLayout = ArticleLayout {
    schema: ArticleSchema::Eager,
    signature: &["newline_id", "news_outlet_id", "outlet_name"],
    id: "id",
    title: Some("title"),
    publication: None,
    newline_id: Some("newline_id"),
    news_outlet_id: Some("news_outlet_id"),
    author: Some("author"),
    publish_time: Some(("publish_time", &["%Y-%m-%d %H:%M:%S"])),
    outlet_name: Some("outlet_name"),
    content: "content",
    article_url: Some("article_url"),
};

const MERGED_LAYOUT: ArticleLayout = ArticleLayout {
    schema: ArticleSchema::Merged,
    signature: &["DataSource", "NewsOutletID", "ArticleURL"],
    id: "ID",
    title: Some("Title"),
    publication: Some("Publication"),
    newline_id: Some("NewlineID"),
    news_outlet_id: Some("NewsOutletID"),
    author: Some("Author"),
    publish_time: Some(("PublishTime", &[TIME_FORMAT])),
    outlet_name: Some("OutletName"),
    content: "Content",
    article_url: Some("ArticleURL"),
};

const LAYOUTS: [&ArticleLayout; 3] = [&KAGGLE_LAYOUT, &EAGER_LAYOUT, &MERGED_LAYOUT];

pub fn detect_article_schema<S: AsRef<str>>(header: &[S]) -> Result<ArticleSchema> {
    let cols: Vec<&str> = header.iter().map(|h| h.as_ref().trim()).collect();
    let hits: Vec<ArticleSchema> = LAYOUTS
        .iter()
        .filter(|l| l.signature.iter().all(|s| cols.contains(s)))
        .map(|l| l.schema)
        .collect();
    match hits.as_slice() {
        [] => Err(Error::UnrecognizedSchema),
        [one] => Ok(*one),
        many => Err(Error::AmbiguousSchema(many.iter().map(|s| format!("{s:?}")).collect())),
    }
}

fn layout(schema: ArticleSchema) -> &'static ArticleLayout {
    LAYOUTS.iter().copied().find(|l| l.schema == schema).expect("registered")
}

pub type RawArticle = BTreeMap<String, String>;

fn parse_time(column: &str, value: &str, formats: &[&str]) -> Result<NaiveDateTime> {
    for f in formats {
        if let Ok(t) = NaiveDateTime::parse_from_str(value, f) {
            return Ok(t);
        }
        if let Ok(d) = NaiveDate::parse_from_str(value, f) {
            return Ok(d.and_hms_opt(0, 0, 0).expect("midnight"));
        }
    }
    Err(Error::malformed(column, value, format!("expected one of {formats:?}")))
}

pub fn adapt_article(raw: &RawArticle, schema: ArticleSchema) -> Result<Article> {
    let l = layout(schema);
    let get = |col: Option<&str>| -> Option<String> {
        let v = raw.get(col?)?.trim();
        (!v.is_empty()).then(|| v.to_string())
    };
    let id = get(Some(l.id)).ok_or_else(|| Error::malformed(l.id, "", "article id is required"))?;
    let source_dataset = match schema {
        ArticleSchema::Kaggle => ArticleSource::KaggleNews,
        ArticleSchema::Eager => ArticleSource::EagerNews,
        ArticleSchema::Merged => match raw.get("DataSource").map(|s| s.trim()) {
            Some("KaggleNews") => ArticleSource::KaggleNews,
            Some("EagerNews") => ArticleSource::EagerNews,
            other => {
                return Err(Error::malformed("DataSource", other.unwrap_or(""), "unknown article source"))
            }
        },
    };
    let publish_time = match l.publish_time {
        Some((col, formats)) => match get(Some(col)) {
            Some(v) => Some(parse_time(col, &v, formats)?),
            None => None,
        },
        None => None,
    };
    Ok(Article {
        source_dataset,
        id,
        title: get(l.title),
        publication: get(l.publication),
        newline_id: get(l.newline_id),
        news_outlet_id: get(l.news_outlet_id),
        author: get(l.author),
        publish_time,
        outlet_name: get(l.outlet_name),
        // content is kept verbatim (never null)
        content: raw.get(l.content).cloned().unwrap_or_default(),
        article_url: get(l.article_url),
    })
}

#[derive(Debug, Clone)]
pub struct ArticleInput {
    pub schema: ArticleSchema,
    pub name: String,
    pub rows: Vec<(usize, RawArticle)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArticleQuarantine {
    pub input: String,
    pub row: usize,
    pub reason: String,
    pub raw: RawArticle,
}

#[derive(Debug, Clone, Default)]
pub struct ArticleMerge {
    pub articles: Vec<Article>,
    pub quarantine: Vec<ArticleQuarantine>,
}

/// Concatenates the inputs in order, quarantining rows that fail to adapt.
pub fn merge_articles(inputs: &[ArticleInput]) -> ArticleMerge {
    let mut out = ArticleMerge::default();
    for input in inputs {
        for (row, raw) in &input.rows {
            match adapt_article(raw, input.schema) {
                Ok(a) => out.articles.push(a),
                Err(e) => out.quarantine.push(ArticleQuarantine {
                    input: input.name.clone(),
                    row: *row,
                    reason: e.to_string(),
                    raw: raw.clone(),
                }),
            }
        }
    }
    out
}

pub fn read_articles(path: &Path) -> Result<ArticleInput> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::csv(path, e))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    let schema = detect_article_schema(&header)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push((
            i + 1,
            header.iter().cloned().zip(rec.iter().map(String::from)).collect(),
        ));
    }
    Ok(ArticleInput {
        schema,
        name: path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        rows,
    })
}

/// Reads a merged-schema article CSV; extra columns are ignored.
pub fn read_merged_articles(path: &Path) -> Result<Vec<Article>> {
    let input = read_articles(path)?;
    if input.schema != ArticleSchema::Merged {
        return Err(Error::malformed("header", &format!("{:?}", input.schema), "expected merged article CSV"));
    }
    let merged = merge_articles(&[input]);
    if let Some(q) = merged.quarantine.first() {
        return Err(Error::malformed("row", &q.row.to_string(), q.reason.clone()));
    }
    Ok(merged.articles)
}

pub fn write_articles(path: &Path, articles: &[Article]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(ARTICLE_COLUMNS).map_err(|e| Error::csv(path, e))?;
    for a in articles {
        w.write_record(a.to_row()).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_article_quarantine(path: &Path, entries: &[ArticleQuarantine]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let io = |e| Error::csv(path, e);
    w.write_record(["input", "row", "reason", "raw"]).map_err(io)?;
    for q in entries {
        let raw = serde_json::to_string(&q.raw).map_err(|e| Error::json("quarantine row", e))?;
        w.write_record([q.input.as_str(), &q.row.to_string(), &q.reason, &raw])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrimeDictionary {
    stems: BTreeSet<String>,
    exclusion_groups: Vec<BTreeSet<String>>,
}

pub const DEFAULT_THRESHOLD: usize = 3;

pub fn default_exclusion_groups() -> Vec<Vec<String>> {
    [
        ["vehicle", "accident", "damage"],
        ["fire", "damage", "incident"],
        ["fraud", "dispute", "offense"],
    ]
    .iter()
    .map(|g| g.iter().map(|s| s.to_string()).collect())
    .collect()
}

/// Parses a stem file: one stem per line, `#` starts a comment line.
pub fn parse_stems(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
        .collect()
}

impl CrimeDictionary {
    pub fn new<I, S>(stems: I, exclusion_groups: Vec<Vec<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stems: BTreeSet<String> = stems
            .into_iter()
            .map(|s| s.as_ref().trim().to_lowercase())
            .filter(|s| !s.is_empty())
            .collect();
        if stems.is_empty() {
            return Err(Error::InvalidDictionary("no stems".into()));
        }
        let groups: Vec<BTreeSet<String>> = exclusion_groups
            .into_iter()
            .map(|g| g.into_iter().map(|s| s.to_lowercase()).collect())
            .collect();
        for g in &groups {
            if let Some(missing) = g.iter().find(|s| !stems.contains(*s)) {
                return Err(Error::InvalidDictionary(format!(
                    "exclusion stem {missing:?} is not in the dictionary"
                )));
            }
        }
        Ok(Self {
            stems,
            exclusion_groups: groups,
        })
    }

    /// Bundled stems with the default exclusion groups.
    pub fn bundled() -> Self {
        Self::new(parse_stems(DEFAULT_STEMS), default_exclusion_groups()).expect("bundled dictionary is valid")
    }

    pub fn from_file(path: &Path, exclusion_groups: Vec<Vec<String>>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(parse_stems(&text), exclusion_groups)
    }

    pub fn stems(&self) -> &BTreeSet<String> {
        &self.stems
    }

    pub fn exclusion_groups(&self) -> &[BTreeSet<String>] {
        &self.exclusion_groups
    }

    pub fn with_stem(mut self, stem: &str) -> Self {
        self.stems.insert(stem.to_lowercase());
        self
    }
}

pub fn match_stems(text: &str, dict: &CrimeDictionary) -> BTreeSet<String> {
    let tokens = tokenize_terms(text);
    dict.stems
        .iter()
        .filter(|s| stem_matches(&tokens, s))
        .cloned()
        .collect()
}

pub fn is_crime_text(text: &str, dict: &CrimeDictionary, threshold: usize) -> bool {
    let matched = match_stems(text, dict);
    matched.len() >= threshold && !dict.exclusion_groups.iter().any(|g| matched.is_subset(g))
}

/// At least `threshold` distinct stems over title + content, and the
/// matched set is not contained in any single exclusion group.
pub fn is_crime_article(article: &Article, dict: &CrimeDictionary, threshold: usize) -> bool {
    is_crime_text(&article.full_text(), dict, threshold)
}

pub fn filter_crime_articles(articles: &[Article], dict: &CrimeDictionary, threshold: usize) -> Vec<Article> {
    use rayon::prelude::*;
    let keep: Vec<bool> = articles
        .par_iter()
        .map(|a| is_crime_article(a, dict, threshold))
        .collect();
    articles
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(a, _)| a.clone())
        .collect()
}

pub const NULL_GROUP: &str = "(null)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCount {
    pub counts: BTreeMap<String, usize>,
    /// Statistics over the per-group counts; `None` for an empty collection.
    pub hit_times: Option<SummaryStats>,
}

pub fn group_count(articles: &[Article], key: &str) -> Result<GroupCount> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    // validate the key even when there are no articles
    Article::new(ArticleSource::KaggleNews, "", "").attribute(key)?;
    for a in articles {
        let v = a.attribute(key)?.unwrap_or_else(|| NULL_GROUP.to_string());
        *counts.entry(v).or_default() += 1;
    }
    let values: Vec<f64> = counts.values().map(|&c| c as f64).collect();
    let hit_times = summary_stats(&values).ok();
    Ok(GroupCount { counts, hit_times })
}

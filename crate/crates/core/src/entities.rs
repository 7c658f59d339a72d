//! Rule and gazetteer based entity extraction.
//!
//! Tokens get one of five tags from their surface form and position. Runs of
//! proper-name candidates become entities labelled by gazetteer lookup
//! (place, then organization, then a person title cue, else OTHER), and runs
//! of date words and numbers become dates.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Article, ARTICLE_COLUMNS};
use crate::error::{Error, Result};
use crate::textproc::{surface_tokens, SurfaceToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    ProperCandidate,
    Word,
    Number,
    DateWord,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub word: String,
    pub tag: Tag,
    /// Capitalized word opening a sentence; tagged `Word` but may still
    /// join an entity when the gazetteer confirms it.
    pub sentence_initial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EntityLabel {
    Person,
    Org,
    Gpe,
    Date,
    Other,
}

impl EntityLabel {
    pub const ALL: [EntityLabel; 5] = [Self::Person, Self::Org, Self::Gpe, Self::Date, Self::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Person => "PERSON",
            Self::Org => "ORG",
            Self::Gpe => "GPE",
            Self::Date => "DATE",
            Self::Other => "OTHER",
        }
    }
}

impl fmt::Display for EntityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `start..end` indexes the tagged token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub text: String,
    pub label: EntityLabel,
    pub start: usize,
    pub end: usize,
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october", "november",
    "december",
];
const DAYS: [&str; 7] = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];

/// Words that end in a period without ending the sentence.
const ABBREVIATIONS: [&str; 20] = [
    "mr", "mrs", "ms", "dr", "st", "jr", "sr", "gov", "sen", "rep", "gen", "lt", "sgt", "col", "capt", "prof", "inc",
    "corp", "co", "vs",
];

fn is_capitalized(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

fn is_date_word(w: &str) -> bool {
    let lower = w.to_lowercase();
    is_capitalized(w) && (MONTHS.contains(&lower.as_str()) || DAYS.contains(&lower.as_str()))
}

fn ends_sentence(tokens: &[SurfaceToken], punct_at: usize) -> bool {
    let SurfaceToken::Punct(p) = &tokens[punct_at] else {
        return false;
    };
    match p.as_str() {
        "!" | "?" => true,
        "." => match punct_at.checked_sub(1).map(|i| &tokens[i]) {
            Some(SurfaceToken::Word(w)) => {
                let single_letter = w.chars().count() == 1 && is_capitalized(w);
                !single_letter && !ABBREVIATIONS.contains(&w.to_lowercase().as_str())
            }
            _ => true,
        },
        _ => false,
    }
}

fn is_opening(p: &str) -> bool {
    matches!(p, "\"" | "'" | "(" | "[" | "\u{201c}" | "\u{2018}" | "-" | "\u{2014}")
}

pub fn tag_tokens(text: &str) -> Vec<TaggedToken> {
    let tokens = surface_tokens(text);
    let mut out = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        let word = t.as_str().to_string();
        let SurfaceToken::Word(w) = t else {
            out.push(TaggedToken { word, tag: Tag::Punct, sentence_initial: false });
            continue;
        };
        // skip back over opening quotes and brackets to the previous token
        let mut j = i;
        while j > 0 && matches!(&tokens[j - 1], SurfaceToken::Punct(p) if is_opening(p)) {
            j -= 1;
        }
        let initial = j == 0 || ends_sentence(&tokens, j - 1);
        let tag = if w.chars().all(|c| c.is_ascii_digit()) {
            Tag::Number
        } else if is_date_word(w) {
            Tag::DateWord
        } else if is_capitalized(w) && !initial {
            Tag::ProperCandidate
        } else {
            Tag::Word
        };
        out.push(TaggedToken {
            word,
            tag,
            sentence_initial: initial && tag == Tag::Word && is_capitalized(w),
        });
    }
    out
}

/// Name lists used for labelling, one entry per line, compared
/// case-insensitively on word tokens.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    gpe: HashSet<String>,
    org: HashSet<String>,
    org_keywords: HashSet<String>,
    person_titles: HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GazetteerList {
    Gpe,
    Org,
    OrgKeyword,
    PersonTitle,
}

impl GazetteerList {
    pub const ALL: [GazetteerList; 4] = [Self::Gpe, Self::Org, Self::OrgKeyword, Self::PersonTitle];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::Gpe => "gpe.txt",
            Self::Org => "org.txt",
            Self::OrgKeyword => "org_keywords.txt",
            Self::PersonTitle => "person_titles.txt",
        }
    }

    fn bundled(self) -> &'static str {
        match self {
            Self::Gpe => include_str!("../data/gazetteer/gpe.txt"),
            Self::Org => include_str!("../data/gazetteer/org.txt"),
            Self::OrgKeyword => include_str!("../data/gazetteer/org_keywords.txt"),
            Self::PersonTitle => include_str!("../data/gazetteer/person_titles.txt"),
        }
    }
}

fn key(entry: &str) -> String {
    surface_tokens(entry)
        .iter()
        .filter_map(|t| match t {
            SurfaceToken::Word(w) => Some(w.to_lowercase()),
            SurfaceToken::Punct(_) => None,
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Gazetteer {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bundled() -> Self {
        let mut g = Self::empty();
        for list in GazetteerList::ALL {
            g.extend(list, list.bundled());
        }
        g
    }

    /// Reads the four list files from a directory.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut g = Self::empty();
        for list in GazetteerList::ALL {
            let path = dir.join(list.file_name());
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            g.extend(list, &text);
        }
        Ok(g)
    }

    fn extend(&mut self, list: GazetteerList, text: &str) {
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            self.add(list, line);
        }
    }

    pub fn add(&mut self, list: GazetteerList, entry: &str) {
        let k = key(entry);
        if k.is_empty() {
            return;
        }
        match list {
            GazetteerList::Gpe => self.gpe.insert(k),
            GazetteerList::Org => self.org.insert(k),
            GazetteerList::OrgKeyword => self.org_keywords.insert(k),
            GazetteerList::PersonTitle => self.person_titles.insert(k),
        };
    }

    fn is_title(&self, w: &str) -> bool {
        self.person_titles.contains(&w.to_lowercase())
    }

    /// Place or organization label from the name lists alone.
    fn name_label(&self, words: &[&str]) -> Option<EntityLabel> {
        let k = words.iter().map(|w| w.to_lowercase()).collect::<Vec<_>>().join(" ");
        if self.gpe.contains(&k) {
            Some(EntityLabel::Gpe)
        } else if self.org.contains(&k) || words.iter().any(|w| self.org_keywords.contains(&w.to_lowercase())) {
            Some(EntityLabel::Org)
        } else {
            None
        }
    }
}

fn span_text(tagged: &[TaggedToken], start: usize, end: usize) -> String {
    tagged[start..end].iter().map(|t| t.word.as_str()).collect::<Vec<_>>().join(" ")
}

/// Title word directly before `start`, optionally followed by a period.
fn title_before(tagged: &[TaggedToken], start: usize, gaz: &Gazetteer) -> bool {
    let prev = start.checked_sub(1).map(|i| &tagged[i]);
    match prev {
        Some(t) if t.tag == Tag::Punct && t.word == "." => {
            start >= 2 && tagged[start - 2].tag != Tag::Punct && gaz.is_title(&tagged[start - 2].word)
        }
        Some(t) if t.tag != Tag::Punct => gaz.is_title(&t.word),
        _ => false,
    }
}

fn label_run(tagged: &[TaggedToken], start: usize, end: usize, gaz: &Gazetteer) -> Option<Entity> {
    let words: Vec<&str> = tagged[start..end].iter().map(|t| t.word.as_str()).collect();
    if let Some(label) = gaz.name_label(&words) {
        return Some(Entity { text: words.join(" "), label, start, end });
    }
    // leading title words are a person cue and are not part of the name
    let titles = words.iter().take_while(|w| gaz.is_title(w)).count();
    if titles == words.len() {
        return None;
    }
    let s = start + titles;
    let label = if titles > 0 || title_before(tagged, start, gaz) {
        EntityLabel::Person
    } else {
        EntityLabel::Other
    };
    Some(Entity {
        text: span_text(tagged, s, end),
        label,
        start: s,
        end,
    })
}

pub fn extract_entities(tagged: &[TaggedToken], gaz: &Gazetteer) -> Vec<Entity> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tagged.len() {
        match tagged[i].tag {
            Tag::ProperCandidate => {
                let end = run_end(tagged, i, |t| t == Tag::ProperCandidate);
                out.extend(label_run(tagged, i, end, gaz));
                i = end;
            }
            Tag::Word if tagged[i].sentence_initial => {
                let end = run_end(tagged, i + 1, |t| t == Tag::ProperCandidate);
                let all: Vec<&str> = tagged[i..end].iter().map(|t| t.word.as_str()).collect();
                if let Some(label) = gaz.name_label(&all) {
                    out.push(Entity { text: all.join(" "), label, start: i, end });
                    i = end;
                } else if let Some(label) = gaz.name_label(&all[..1]) {
                    out.push(Entity { text: all[0].to_string(), label, start: i, end: i + 1 });
                    i += 1;
                } else {
                    i += 1;
                }
            }
            Tag::DateWord | Tag::Number => {
                let end = run_end(tagged, i, |t| matches!(t, Tag::DateWord | Tag::Number));
                if tagged[i..end].iter().any(|t| t.tag == Tag::DateWord) {
                    out.push(Entity {
                        text: span_text(tagged, i, end),
                        label: EntityLabel::Date,
                        start: i,
                        end,
                    });
                }
                i = end;
            }
            _ => i += 1,
        }
    }
    out
}

fn run_end(tagged: &[TaggedToken], from: usize, keep: impl Fn(Tag) -> bool) -> usize {
    let mut e = from;
    while e < tagged.len() && keep(tagged[e].tag) {
        e += 1;
    }
    e
}

pub fn entities_in(text: &str, gaz: &Gazetteer) -> Vec<Entity> {
    extract_entities(&tag_tokens(text), gaz)
}

pub fn annotate_articles(articles: &[Article], gaz: &Gazetteer) -> Vec<Vec<Entity>> {
    articles.par_iter().map(|a| entities_in(&a.content, gaz)).collect()
}

pub fn label_counts(entities: &[Vec<Entity>]) -> BTreeMap<EntityLabel, usize> {
    let mut m: BTreeMap<EntityLabel, usize> = EntityLabel::ALL.iter().map(|&l| (l, 0)).collect();
    for e in entities.iter().flatten() {
        *m.entry(e.label).or_default() += 1;
    }
    m
}

pub const ENTITIES_COLUMN: &str = "Entities";

/// The merged article table with an extra JSON column of entities.
pub fn write_annotated(path: &Path, articles: &[Article], entities: &[Vec<Entity>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    let mut header: Vec<&str> = ARTICLE_COLUMNS.to_vec();
    header.push(ENTITIES_COLUMN);
    w.write_record(&header).map_err(err)?;
    for (a, ents) in articles.iter().zip(entities) {
        let mut row = a.to_row();
        row.push(serde_json::to_string(ents).map_err(|e| Error::json("entities", e))?);
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads the entity column back from an annotated table.
pub fn read_annotated_entities(path: &Path) -> Result<Vec<Vec<Entity>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = headers
        .iter()
        .position(|h| h == ENTITIES_COLUMN)
        .ok_or_else(|| Error::malformed(ENTITIES_COLUMN, "", "column missing"))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            serde_json::from_str(rec.get(col).unwrap_or("[]")).map_err(|e| Error::json("entities", e))
        })
        .collect()
}

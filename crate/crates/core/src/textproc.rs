//! Tokenization, stopword removal and term counting.
//!
//! Every text-consuming stage (vectorizer, topic model, dictionary filter,
//! entity tagger) goes through the same tokenizer so that the notion of a
//! "word" never drifts between stages.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// A word token. `text` is lowercased, `original` keeps the surface casing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub original: String,
    pub position: usize,
}

/// A surface token that also keeps punctuation, used by the entity tagger
/// for sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SurfaceToken {
    Word(String),
    Punct(String),
}

impl SurfaceToken {
    pub fn as_str(&self) -> &str {
        match self {
            SurfaceToken::Word(s) | SurfaceToken::Punct(s) => s,
        }
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits NFKC-normalized text into runs of alphanumerics (with internal
/// apostrophes folded to `'`) and single non-space punctuation characters.
fn scan(text: &str) -> Vec<SurfaceToken> {
    let normalized: Vec<char> = text.nfkc().collect();
    let mut out = Vec::new();
    let mut word = String::new();
    for (i, &c) in normalized.iter().enumerate() {
        if c.is_alphanumeric() {
            word.push(c);
            continue;
        }
        let internal_apostrophe = is_apostrophe(c)
            && !word.is_empty()
            && normalized.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if internal_apostrophe {
            word.push('\'');
            continue;
        }
        if !word.is_empty() {
            out.push(SurfaceToken::Word(std::mem::take(&mut word)));
        }
        if !c.is_whitespace() {
            out.push(SurfaceToken::Punct(c.to_string()));
        }
    }
    if !word.is_empty() {
        out.push(SurfaceToken::Word(word));
    }
    out
}

/// Words and punctuation in reading order, original casing preserved.
pub fn surface_tokens(text: &str) -> Vec<SurfaceToken> {
    scan(text)
}

pub fn tokenize(text: &str) -> Vec<Token> {
    scan(text)
        .into_iter()
        .filter_map(|t| match t {
            SurfaceToken::Word(w) => Some(w),
            SurfaceToken::Punct(_) => None,
        })
        .filter_map(|original| {
            let text = lowercase_term(&original);
            (!text.is_empty()).then_some((text, original))
        })
        .enumerate()
        .map(|(position, (text, original))| Token {
            text,
            original,
            position,
        })
        .collect()
}

// Lowercasing can emit combining marks (e.g. U+0130), which would split on
// re-tokenization; keep only what the scanner treats as word characters.
fn lowercase_term(word: &str) -> String {
    word.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '\'')
        .collect()
}

/// Lowercased token texts only.
pub fn tokenize_terms(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

#[derive(Debug, Clone, Default)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The bundled English list.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn remove_stopwords(tokens: Vec<Token>, stoplist: &StopList) -> Vec<Token> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(&t.text))
        .collect()
}

/// Tokenize, lowercase and drop stopwords in one pass.
pub fn content_terms(text: &str, stoplist: &StopList) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !stoplist.contains(&t.text))
        .map(|t| t.text)
        .collect()
}

pub fn term_counts<S: AsRef<str>>(tokens: &[S]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in tokens {
        *counts.entry(t.as_ref().to_string()).or_insert(0) += 1;
    }
    counts
}

/// True when the (possibly multi-word) `stem` prefix-matches a run of
/// adjacent tokens starting at `start`.
pub fn stem_matches_at<S: AsRef<str>>(tokens: &[S], start: usize, stem: &str) -> bool {
    let mut idx = start;
    for part in stem.split_whitespace() {
        match tokens.get(idx) {
            Some(tok) if tok.as_ref().starts_with(part) => idx += 1,
            _ => return false,
        }
    }
    idx > start
}

pub fn stem_matches<S: AsRef<str>>(tokens: &[S], stem: &str) -> bool {
    (0..tokens.len()).any(|i| stem_matches_at(tokens, i, stem))
}

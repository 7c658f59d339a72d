//! Crime-type canonicalization ("crime map").
//!
//! Free-text offense descriptions from the different sources are mapped onto
//! a closed set of categories by an ordered list of stem rules. A rule fires
//! when any of its stems prefix-matches the lowercased tokens of the input
//! and none of its guard stems do; the lowest-priority rule that fires wins.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::MergedCrimeDataset;
use crate::textproc::{stem_matches, tokenize_terms};

const DEFAULT_RULES: &str = include_str!("../data/crime_rules.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CanonicalCrimeType {
    Robbery,
    Assault,
    Drug,
    VehicleTheft,
    VehicleAccident,
    Accident,
    Homicide,
    SexOffense,
    Fraud,
    Vandalism,
    WeaponsViolation,
    Arson,
    Kidnapping,
    Terrorism,
    Other,
}

impl CanonicalCrimeType {
    pub const ALL: [CanonicalCrimeType; 15] = [
        Self::Robbery,
        Self::Assault,
        Self::Drug,
        Self::VehicleTheft,
        Self::VehicleAccident,
        Self::Accident,
        Self::Homicide,
        Self::SexOffense,
        Self::Fraud,
        Self::Vandalism,
        Self::WeaponsViolation,
        Self::Arson,
        Self::Kidnapping,
        Self::Terrorism,
        Self::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Robbery => "Robbery",
            Self::Assault => "Assault",
            Self::Drug => "Drug",
            Self::VehicleTheft => "VehicleTheft",
            Self::VehicleAccident => "VehicleAccident",
            Self::Accident => "Accident",
            Self::Homicide => "Homicide",
            Self::SexOffense => "SexOffense",
            Self::Fraud => "Fraud",
            Self::Vandalism => "Vandalism",
            Self::WeaponsViolation => "WeaponsViolation",
            Self::Arson => "Arson",
            Self::Kidnapping => "Kidnapping",
            Self::Terrorism => "Terrorism",
            Self::Other => "Other",
        }
    }
}

impl fmt::Display for CanonicalCrimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CanonicalCrimeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::malformed("category", s, "unknown crime category"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrimeTypeRule {
    pub category: CanonicalCrimeType,
    pub stems: Vec<String>,
    #[serde(default)]
    pub guards: Vec<String>,
    pub priority: i64,
}

impl CrimeTypeRule {
    fn fires<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        self.stems.iter().any(|s| stem_matches(tokens, s))
            && !self.guards.iter().any(|g| stem_matches(tokens, g))
    }
}

/// Parses a ruleset file: a JSON list of `{category, stems, guards, priority}`.
pub fn parse_rules(json: &str) -> Result<Vec<CrimeTypeRule>> {
    serde_json::from_str(json).map_err(|e| Error::json("crime ruleset", e))
}

pub fn load_rules(path: &Path) -> Result<Vec<CrimeTypeRule>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rules(&text)
}

pub fn default_rules() -> Vec<CrimeTypeRule> {
    parse_rules(DEFAULT_RULES).expect("bundled ruleset is valid JSON")
}

/// Immutable, priority-ordered rule set.
#[derive(Debug, Clone)]
pub struct CrimeTypeMapper {
    rules: Vec<CrimeTypeRule>,
}

pub fn compile_rules(rules: Vec<CrimeTypeRule>) -> Result<CrimeTypeMapper> {
    let mut seen: HashMap<i64, &CrimeTypeRule> = HashMap::new();
    for rule in &rules {
        if rule.stems.iter().all(|s| s.trim().is_empty()) {
            return Err(Error::EmptyRule(rule.category.to_string()));
        }
        if let Some(prev) = seen.insert(rule.priority, rule) {
            return Err(Error::DuplicatePriority {
                priority: rule.priority,
                first: prev.category.to_string(),
                second: rule.category.to_string(),
            });
        }
    }
    let mut rules: Vec<CrimeTypeRule> = rules
        .into_iter()
        .map(|mut r| {
            r.stems = r.stems.iter().map(|s| s.to_lowercase()).collect();
            r.guards = r.guards.iter().map(|s| s.to_lowercase()).collect();
            r
        })
        .collect();
    rules.sort_by_key(|r| r.priority);
    Ok(CrimeTypeMapper { rules })
}

impl CrimeTypeMapper {
    pub fn bundled() -> Self {
        compile_rules(default_rules()).expect("bundled ruleset compiles")
    }

    pub fn rules(&self) -> &[CrimeTypeRule] {
        &self.rules
    }

    /// Distinct categories the mapper can produce, `Other` included.
    pub fn categories(&self) -> Vec<CanonicalCrimeType> {
        let mut cats: Vec<_> = self.rules.iter().map(|r| r.category).collect();
        cats.push(CanonicalCrimeType::Other);
        cats.sort();
        cats.dedup();
        cats
    }

    pub fn canonicalize(&self, crime_type: Option<&str>) -> CanonicalCrimeType {
        let Some(text) = crime_type else {
            return CanonicalCrimeType::Other;
        };
        let tokens = tokenize_terms(text);
        if tokens.is_empty() {
            return CanonicalCrimeType::Other;
        }
        self.rules
            .iter()
            .find(|r| r.fires(&tokens))
            .map_or(CanonicalCrimeType::Other, |r| r.category)
    }
}

/// Counts per category over the whole closed set; absent categories are 0.
pub fn category_distribution(
    dataset: &MergedCrimeDataset,
    mapper: &CrimeTypeMapper,
) -> BTreeMap<CanonicalCrimeType, usize> {
    let mut counts: BTreeMap<_, _> = CanonicalCrimeType::ALL.iter().map(|&c| (c, 0)).collect();
    for rec in &dataset.records {
        *counts
            .entry(mapper.canonicalize(rec.crime_type.as_deref()))
            .or_default() += 1;
    }
    counts
}

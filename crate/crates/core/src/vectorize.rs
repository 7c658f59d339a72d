//! Document-frequency pruned vocabulary and L2-normalized TF-IDF vectors.
//!
//! tf is the raw in-document count and idf is the smoothed
//! `ln((1 + n_docs) / (1 + df)) + 1`, so a term present in every document
//! still carries weight 1.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A document as a list of (already stopworded) terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub id: String,
    pub terms: Vec<String>,
}

impl TokenizedDoc {
    pub fn new(id: impl Into<String>, terms: Vec<String>) -> Self {
        Self { id: id.into(), terms }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorizerParams {
    pub min_df: usize,
    /// Terms with `df / n_docs` strictly above this are dropped.
    pub max_df_ratio: f64,
    pub max_features: usize,
}

impl Default for VectorizerParams {
    fn default() -> Self {
        Self {
            min_df: 5,
            max_df_ratio: 0.95,
            max_features: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    /// Kept terms, sorted lexicographically.
    pub terms: Vec<String>,
    pub df: BTreeMap<String, usize>,
    pub n_docs: usize,
}

pub fn fit_vocabulary(docs: &[TokenizedDoc], params: &VectorizerParams) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(Error::NoDocuments);
    }
    let n_docs = docs.len();

    // per-document partial counts, merged in document order
    let partials: Vec<HashMap<&str, usize>> = docs
        .par_iter()
        .map(|d| {
            let mut m = HashMap::new();
            for t in &d.terms {
                *m.entry(t.as_str()).or_insert(0) += 1;
            }
            m
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &partials {
        for (&t, &c) in p {
            *df.entry(t).or_default() += 1;
            *total.entry(t).or_default() += c;
        }
    }

    let mut candidates: Vec<(&str, usize)> = df
        .iter()
        .filter(|(_, &d)| d >= params.min_df && (d as f64 / n_docs as f64) <= params.max_df_ratio)
        .map(|(&t, _)| (t, total[t]))
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    candidates.truncate(params.max_features);

    let mut terms: Vec<String> = candidates.iter().map(|(t, _)| t.to_string()).collect();
    terms.sort();
    let df = terms.iter().map(|t| (t.clone(), df[t.as_str()])).collect();
    Ok(Vocabulary { terms, df, n_docs })
}

pub fn idf_value(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

impl Vocabulary {
    pub fn idf(&self, term: &str) -> Result<f64> {
        self.df
            .get(term)
            .map(|&df| idf_value(self.n_docs, df))
            .ok_or_else(|| Error::UnknownTerm(term.to_string()))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let err = |e| Error::csv(path, e);
        w.write_record(["term", "df", "idf"]).map_err(err)?;
        for t in &self.terms {
            let idf = self.idf(t)?;
            w.write_record([t.as_str(), &self.df[t].to_string(), &format!("{idf:.12}")])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    pub rows: Vec<Vec<f64>>,
    pub doc_ids: Vec<String>,
    pub terms: Vec<String>,
}

/// Raw weight `count · idf`, then each nonzero row scaled to unit L2 norm.
pub fn transform(voc: &Vocabulary, docs: &[TokenizedDoc]) -> DocTermMatrix {
    let index: HashMap<&str, usize> = voc.terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let idf: Vec<f64> = voc.terms.iter().map(|t| idf_value(voc.n_docs, voc.df[t])).collect();
    let rows = docs
        .par_iter()
        .map(|d| {
            let mut row = vec![0.0; voc.terms.len()];
            for t in &d.terms {
                if let Some(&j) = index.get(t.as_str()) {
                    row[j] += 1.0;
                }
            }
            for (w, idf) in row.iter_mut().zip(&idf) {
                *w *= idf;
            }
            let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|w| *w /= norm);
            }
            row
        })
        .collect();
    DocTermMatrix {
        rows,
        doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
        terms: voc.terms.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixShape {
    pub rows: usize,
    pub cols: usize,
    pub doc_ids: Vec<String>,
    pub terms: Vec<String>,
}

impl DocTermMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.terms.len()
    }

    pub fn shape(&self) -> MatrixShape {
        MatrixShape {
            rows: self.n_rows(),
            cols: self.n_cols(),
            doc_ids: self.doc_ids.clone(),
            terms: self.terms.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        let err = |e| Error::csv(path, e);
        let mut header = vec!["doc_id".to_string()];
        header.extend(self.terms.iter().cloned());
        w.write_record(&header).map_err(err)?;
        for (id, row) in self.doc_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Dense little-endian f64 block (row-major) plus a JSON shape sidecar.
    pub fn write_binary(&self, block: &Path, sidecar: &Path) -> Result<()> {
        write_f64_block(block, &self.rows)?;
        let json = serde_json::to_string_pretty(&self.shape()).map_err(|e| Error::json("matrix sidecar", e))?;
        std::fs::write(sidecar, json).map_err(|e| Error::io(sidecar, e))
    }

    pub fn read_binary(block: &Path, sidecar: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
        let shape: MatrixShape = serde_json::from_str(&text).map_err(|e| Error::json("matrix sidecar", e))?;
        let rows = read_f64_block(block, shape.rows, shape.cols)?;
        Ok(Self {
            rows,
            doc_ids: shape.doc_ids,
            terms: shape.terms,
        })
    }
}

pub fn write_f64_block(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    for row in rows {
        for v in row {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_f64_block(path: &Path, rows: usize, cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != rows * cols * 8 {
        return Err(Error::DimensionMismatch(format!(
            "{}: {} bytes for a {rows}x{cols} block",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if cols == 0 {
        return Ok(vec![Vec::new(); rows]);
    }
    Ok(values.chunks(cols).map(<[f64]>::to_vec).collect())
}

/// Distinct terms, handy for callers checking coverage.
pub fn distinct_terms(docs: &[TokenizedDoc]) -> HashSet<&str> {
    docs.iter().flat_map(|d| d.terms.iter().map(String::as_str)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: usize, text: &str) -> TokenizedDoc {
        TokenizedDoc::new(id.to_string(), text.split_whitespace().map(String::from).collect())
    }

    #[test]
    fn df_bounds() {
        // a: df 4, b: df 5, c: df 96, filler everywhere else
        let docs: Vec<TokenizedDoc> = (0..100)
            .map(|i| {
                let mut t = vec![format!("u{i}")];
                if i < 4 {
                    t.push("a".into());
                }
                if i < 5 {
                    t.push("b".into());
                }
                if i < 96 {
                    t.push("c".into());
                }
                TokenizedDoc::new(i.to_string(), t)
            })
            .collect();
        let v = fit_vocabulary(&docs, &VectorizerParams::default()).unwrap();
        assert_eq!(v.terms, vec!["b"]);
        assert_eq!(v.df["b"], 5);
    }

    #[test]
    fn max_df_boundary_is_strict() {
        let docs: Vec<TokenizedDoc> = (0..100)
            .map(|i| doc(i, if i < 95 { "x y" } else { "y" }))
            .collect();
        let v = fit_vocabulary(&docs, &VectorizerParams { max_df_ratio: 0.95, ..Default::default() }).unwrap();
        assert_eq!(v.terms, vec!["x"]);
    }

    #[test]
    fn feature_cap() {
        // 100 terms, each in 10 docs, term t_i repeated i+1 times in its docs
        let docs: Vec<TokenizedDoc> = (0..20)
            .map(|d| {
                let mut terms = Vec::new();
                for t in 0..100 {
                    if (t + d) % 2 == 0 {
                        for _ in 0..=t {
                            terms.push(format!("t{t:03}"));
                        }
                    }
                }
                TokenizedDoc::new(d.to_string(), terms)
            })
            .collect();
        let v = fit_vocabulary(&docs, &VectorizerParams::default()).unwrap();
        assert_eq!(v.terms.len(), 60);
        // the 60 most frequent are t040..t099
        assert_eq!(v.terms.first().unwrap(), "t040");
        assert_eq!(v.terms.last().unwrap(), "t099");
    }

    #[test]
    fn empty_vocabulary() {
        let docs = vec![doc(0, "a"), doc(1, "b")];
        assert!(matches!(fit_vocabulary(&docs, &VectorizerParams::default()), Err(Error::EmptyVocabulary)));
        assert!(matches!(fit_vocabulary(&[], &VectorizerParams::default()), Err(Error::NoDocuments)));
    }

    #[test]
    fn idf_values() {
        let v = Vocabulary {
            terms: vec!["a".into(), "b".into()],
            df: [("a".to_string(), 3), ("b".to_string(), 1)].into_iter().collect(),
            n_docs: 3,
        };
        assert_eq!(v.idf("a").unwrap(), 1.0);
        assert!((v.idf("b").unwrap() - 1.693_147_180_559_945_3).abs() < 1e-15);
        assert!(matches!(v.idf("zzz"), Err(Error::UnknownTerm(_))));
    }

    #[test]
    fn two_doc_corpus() {
        let docs = vec![doc(1, "crime crime gun"), doc(2, "gun")];
        let v = fit_vocabulary(&docs, &VectorizerParams { min_df: 1, max_df_ratio: 1.0, max_features: 10 }).unwrap();
        let m = transform(&v, &docs);
        // crime: idf = ln(3/2)+1, weight 2*idf; gun: idf 1, weight 1
        let c = 2.0 * ((1.5f64).ln() + 1.0);
        let n = (c * c + 1.0).sqrt();
        assert!((m.rows[0][0] - c / n).abs() < 1e-12);
        assert!((m.rows[0][1] - 1.0 / n).abs() < 1e-12);
        assert_eq!(m.rows[1], vec![0.0, 1.0]);
    }

    #[test]
    fn out_of_vocabulary_row_is_zero() {
        let docs = vec![doc(1, "a b"), doc(2, "a")];
        let v = fit_vocabulary(&docs, &VectorizerParams { min_df: 2, max_df_ratio: 1.0, max_features: 10 }).unwrap();
        let m = transform(&v, &[doc(3, "zzz"), doc(4, "")]);
        assert!(m.rows.iter().all(|r| r.iter().all(|&w| w == 0.0)));
    }

    #[test]
    fn binary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DocTermMatrix {
            rows: vec![vec![0.5, 0.25], vec![1.0, -0.0]],
            doc_ids: vec!["a".into(), "b".into()],
            terms: vec!["x".into(), "y".into()],
        };
        let (b, s) = (dir.path().join("m.bin"), dir.path().join("m.json"));
        m.write_binary(&b, &s).unwrap();
        assert_eq!(std::fs::metadata(&b).unwrap().len(), 32);
        assert_eq!(DocTermMatrix::read_binary(&b, &s).unwrap(), m);
    }

    proptest! {
        #[test]
        fn rows_unit_norm_and_df_bounds(
            docs in prop::collection::vec(prop::collection::vec(0u8..12, 0..20), 1..30),
            min_df in 1usize..4,
        ) {
            let docs: Vec<TokenizedDoc> = docs
                .iter()
                .enumerate()
                .map(|(i, d)| TokenizedDoc::new(i.to_string(), d.iter().map(|t| format!("w{t}")).collect()))
                .collect();
            let params = VectorizerParams { min_df, max_df_ratio: 0.9, max_features: 8 };
            let Ok(v) = fit_vocabulary(&docs, &params) else { return Ok(()); };
            prop_assert!(v.terms.len() <= 8);
            prop_assert!(v.terms.windows(2).all(|w| w[0] < w[1]));
            for t in &v.terms {
                let df = docs.iter().filter(|d| d.terms.contains(t)).count();
                prop_assert_eq!(df, v.df[t]);
                prop_assert!(df >= min_df && df as f64 / docs.len() as f64 <= 0.9);
            }
            let m = transform(&v, &docs);
            for row in &m.rows {
                let n: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!(row.iter().all(|&w| w >= 0.0));
                prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-9);
            }
        }
    }
}

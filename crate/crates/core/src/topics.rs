//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.
//!
//! A single chain; phi and theta are read from the final sweep's counts with
//! Dirichlet smoothing.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{read_f64_block, write_f64_block, TokenizedDoc};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Defaults to `50 / k` when absent.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: None,
            beta: 0.01,
            iterations: 1000,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// k × V
    pub phi: Vec<Vec<f64>>,
    /// D × k
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
}

pub struct GibbsSampler {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    words: Vec<Vec<usize>>,
    z: Vec<Vec<usize>>,
    /// V × k, flattened
    nw: Vec<u64>,
    nk: Vec<u64>,
    /// D × k, flattened
    nd: Vec<u64>,
    rng: ChaCha8Rng,
    sweeps: usize,
    weights: Vec<f64>,
}

impl GibbsSampler {
    pub fn new(docs: &[TokenizedDoc], params: &LdaParams) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::InvalidParameter("topic count must be at least 1".into()));
        }
        let alpha = params.alpha();
        if !(alpha > 0.0 && params.beta > 0.0) {
            return Err(Error::InvalidParameter("alpha and beta must be positive".into()));
        }
        let vocab: Vec<String> = docs
            .iter()
            .flat_map(|d| d.terms.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if vocab.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let words: Vec<Vec<usize>> = docs
            .iter()
            .map(|d| d.terms.iter().map(|t| index[t.as_str()]).collect())
            .collect();

        let k = params.k;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut nw = vec![0; vocab.len() * k];
        let mut nk = vec![0; k];
        let mut nd = vec![0; docs.len() * k];
        let z = words
            .iter()
            .enumerate()
            .map(|(d, ws)| {
                ws.iter()
                    .map(|&w| {
                        let t = rng.gen_range(0..k);
                        nw[w * k + t] += 1;
                        nk[t] += 1;
                        nd[d * k + t] += 1;
                        t
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            k,
            alpha,
            beta: params.beta,
            seed: params.seed,
            vocab,
            doc_ids: docs.iter().map(|d| d.id.clone()).collect(),
            words,
            z,
            nw,
            nk,
            nd,
            rng,
            sweeps: 0,
            weights: vec![0.0; k],
        })
    }

    pub fn sweep(&mut self) {
        let k = self.k;
        let vbeta = self.vocab.len() as f64 * self.beta;
        for d in 0..self.words.len() {
            for i in 0..self.words[d].len() {
                let w = self.words[d][i];
                let old = self.z[d][i];
                self.nw[w * k + old] -= 1;
                self.nk[old] -= 1;
                self.nd[d * k + old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.nd[d * k + t] as f64 + self.alpha) * (self.nw[w * k + t] as f64 + self.beta)
                        / (self.nk[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.z[d][i] = new;
                self.nw[w * k + new] += 1;
                self.nk[new] += 1;
                self.nd[d * k + new] += 1;
            }
        }
        self.sweeps += 1;
    }

    pub fn total_tokens(&self) -> u64 {
        self.words.iter().map(|w| w.len() as u64).sum()
    }

    /// Count tables agree with the token assignments and the corpus size.
    pub fn counts_conserved(&self) -> bool {
        let total = self.total_tokens();
        let k = self.k;
        self.nw.iter().sum::<u64>() == total
            && self.nk.iter().sum::<u64>() == total
            && self
                .words
                .iter()
                .enumerate()
                .all(|(d, ws)| self.nd[d * k..(d + 1) * k].iter().sum::<u64>() == ws.len() as u64)
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn into_model(self) -> TopicModel {
        let k = self.k;
        let v = self.vocab.len();
        let vbeta = v as f64 * self.beta;
        let phi = (0..k)
            .map(|t| {
                (0..v)
                    .map(|w| (self.nw[w * k + t] as f64 + self.beta) / (self.nk[t] as f64 + vbeta))
                    .collect()
            })
            .collect();
        let kalpha = k as f64 * self.alpha;
        let theta = self
            .words
            .iter()
            .enumerate()
            .map(|(d, ws)| {
                (0..k)
                    .map(|t| (self.nd[d * k + t] as f64 + self.alpha) / (ws.len() as f64 + kalpha))
                    .collect()
            })
            .collect();
        TopicModel {
            k,
            vocab: self.vocab,
            doc_ids: self.doc_ids,
            phi,
            theta,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            iterations: self.sweeps,
        }
    }
}

pub fn lda_fit(docs: &[TokenizedDoc], params: &LdaParams) -> Result<TopicModel> {
    let mut s = GibbsSampler::new(docs, params)?;
    for _ in 0..params.iterations {
        s.sweep();
        debug_assert!(s.counts_conserved());
    }
    Ok(s.into_model())
}

/// Highest-phi words per topic, ties lexicographic.
pub fn top_words(model: &TopicModel, n: usize) -> Vec<Vec<(String, f64)>> {
    model
        .phi
        .iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| model.vocab[a].cmp(&model.vocab[b])));
            idx.into_iter().take(n).map(|i| (model.vocab[i].clone(), row[i])).collect()
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct TopicMeta {
    k: usize,
    vocab: Vec<String>,
    doc_ids: Vec<String>,
    alpha: f64,
    beta: f64,
    seed: u64,
    iterations: usize,
}

impl TopicModel {
    pub fn write(&self, meta: &Path, phi: &Path, theta: &Path) -> Result<()> {
        let m = TopicMeta {
            k: self.k,
            vocab: self.vocab.clone(),
            doc_ids: self.doc_ids.clone(),
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            iterations: self.iterations,
        };
        let json = serde_json::to_string_pretty(&m).map_err(|e| Error::json("topic model", e))?;
        std::fs::write(meta, json).map_err(|e| Error::io(meta, e))?;
        write_f64_block(phi, &self.phi)?;
        write_f64_block(theta, &self.theta)
    }

    pub fn read(meta: &Path, phi: &Path, theta: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(meta).map_err(|e| Error::io(meta, e))?;
        let m: TopicMeta = serde_json::from_str(&text).map_err(|e| Error::json("topic model", e))?;
        Ok(Self {
            phi: read_f64_block(phi, m.k, m.vocab.len())?,
            theta: read_f64_block(theta, m.doc_ids.len(), m.k)?,
            k: m.k,
            vocab: m.vocab,
            doc_ids: m.doc_ids,
            alpha: m.alpha,
            beta: m.beta,
            seed: m.seed,
            iterations: m.iterations,
        })
    }
}

pub fn write_top_words(path: &Path, words: &[Vec<(String, f64)>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(["topic", "rank", "word", "weight"]).map_err(err)?;
    for (t, list) in words.iter().enumerate() {
        for (r, (word, p)) in list.iter().enumerate() {
            w.write_record([t.to_string(), (r + 1).to_string(), word.clone(), format!("{p:.10}")])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

//! K-Means (k-means++ seeding, Lloyd iterations, warm-started SSE sweep)
//! and DBSCAN over dense row vectors.
//!
//! On unit-norm TF-IDF rows an eps of 1 corresponds to an angle below 60°.

use std::collections::VecDeque;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{read_f64_block, write_f64_block};

pub const NOISE: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub sse: f64,
    pub iterations: usize,
    pub seed: u64,
    /// SSE after each (assign, update) pair.
    pub sse_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, ties to the lowest id.
fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    rows.par_iter().map(|x| nearest(x, centroids)).unzip()
}

pub fn sse_of(rows: &[Vec<f64>], centroids: &[Vec<f64>], assignments: &[usize]) -> f64 {
    rows.iter()
        .zip(assignments)
        .map(|(x, &a)| sq_dist(x, &centroids[a]))
        .sum()
}

fn check_rows(rows: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > rows.len() {
        return Err(Error::KTooLarge { k, n: rows.len() });
    }
    let dim = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch(format!("row of length {} in a {dim}-column matrix", r.len())));
    }
    Ok(dim)
}

fn kmeans_plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![rows[rng.gen_range(0..rows.len())].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|x| sq_dist(x, &centroids[0])).collect();
    while centroids.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.gen_range(0..rows.len()),
        };
        let c = rows[pick].clone();
        for (d, x) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(x, &c));
        }
        centroids.push(c);
    }
    centroids
}

struct Lloyd {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    iterations: usize,
    history: Vec<f64>,
}

fn update_centroids(rows: &[Vec<f64>], assignments: &mut [usize], dists: &[f64], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &a) in rows.iter().zip(assignments.iter()) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(x) {
            *s += v;
        }
    }
    // empty clusters seize the point farthest from its own centroid
    let mut dists = dists.to_vec();
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let donor = (0..rows.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
        let Some(i) = donor else { continue };
        if dists[i] <= 0.0 {
            continue;
        }
        let from = assignments[i];
        counts[from] -= 1;
        for (s, v) in sums[from].iter_mut().zip(&rows[i]) {
            *s -= v;
        }
        assignments[i] = j;
        counts[j] = 1;
        sums[j] = rows[i].clone();
        dists[i] = 0.0;
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        }
    }
}

fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, params: &KMeansParams) -> Lloyd {
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut assignments;
    loop {
        let (mut a, d) = assign(rows, &centroids);
        let previous = centroids.clone();
        update_centroids(rows, &mut a, &d, &mut centroids);
        iterations += 1;
        history.push(sse_of(rows, &centroids, &a));
        assignments = a;
        let shift = previous
            .iter()
            .zip(&centroids)
            .map(|(p, c)| sq_dist(p, c).sqrt())
            .fold(0.0, f64::max);
        if shift < params.tol || iterations >= params.max_iter {
            break;
        }
    }
    // final pass so every assignment is the argmin of the returned centroids
    let (final_assign, _) = assign(rows, &centroids);
    if final_assign != assignments {
        assignments = final_assign;
    }
    Lloyd {
        centroids,
        assignments,
        iterations,
        history,
    }
}

fn finish(rows: &[Vec<f64>], l: Lloyd, seed: u64) -> KMeansModel {
    let sse = sse_of(rows, &l.centroids, &l.assignments);
    KMeansModel {
        k: l.centroids.len(),
        centroids: l.centroids,
        assignments: l.assignments,
        sse,
        iterations: l.iterations,
        seed,
        sse_history: l.history,
    }
}

pub fn kmeans_fit(rows: &[Vec<f64>], k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansModel> {
    check_rows(rows, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_plus_plus(rows, k, &mut rng);
    Ok(finish(rows, lloyd(rows, init, params), seed))
}

/// Refit from explicit starting centroids.
pub fn kmeans_from(rows: &[Vec<f64>], init: Vec<Vec<f64>>, seed: u64, params: &KMeansParams) -> Result<KMeansModel> {
    let dim = check_rows(rows, init.len())?;
    if init.iter().any(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch("centroid length differs from row length".into()));
    }
    Ok(finish(rows, lloyd(rows, init, params), seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub sse: f64,
    /// Largest second difference of the sse curve.
    pub elbow: bool,
}

/// Fits each k in turn, seeding k' from the previous centroids plus the
/// points farthest from their nearest centroid, so sse never increases.
pub fn sse_sweep(rows: &[Vec<f64>], k_values: &[usize], seed: u64, params: &KMeansParams) -> Result<Vec<SweepPoint>> {
    if k_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("sweep k values must be strictly increasing".into()));
    }
    let Some(&first) = k_values.first() else {
        return Ok(Vec::new());
    };
    let mut model = kmeans_fit(rows, first, seed, params)?;
    let mut out = vec![SweepPoint { k: first, sse: model.sse, elbow: false }];
    for &k in &k_values[1..] {
        check_rows(rows, k)?;
        let mut centroids = model.centroids.clone();
        let mut d: Vec<f64> = rows.iter().map(|x| nearest(x, &centroids).1).collect();
        while centroids.len() < k {
            let far = (0..rows.len()).fold(0, |b, i| if d[i] > d[b] { i } else { b });
            let c = rows[far].clone();
            for (di, x) in d.iter_mut().zip(rows) {
                *di = di.min(sq_dist(x, &c));
            }
            centroids.push(c);
        }
        model = finish(rows, lloyd(rows, centroids, params), seed);
        out.push(SweepPoint { k, sse: model.sse, elbow: false });
    }
    if let Some(i) = elbow_index(&out.iter().map(|p| p.sse).collect::<Vec<_>>()) {
        out[i].elbow = true;
    }
    Ok(out)
}

/// Interior index with the largest second difference, ties to the lowest.
pub fn elbow_index(sse: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 1..sse.len().saturating_sub(1) {
        let d2 = sse[i - 1] - 2.0 * sse[i] + sse[i + 1];
        if best.is_none_or(|(_, b)| d2 > b) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanResult {
    pub labels: Vec<i64>,
    pub eps: f64,
    pub min_samples: usize,
    pub n_clusters: usize,
}

fn neighbors(rows: &[Vec<f64>], p: usize, eps2: f64) -> Vec<usize> {
    (0..rows.len()).filter(|&q| sq_dist(&rows[p], &rows[q]) <= eps2).collect()
}

pub fn dbscan_fit(rows: &[Vec<f64>], eps: f64, min_samples: usize) -> Result<DbscanResult> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if min_samples == 0 {
        return Err(Error::InvalidParameter("min_samples must be at least 1".into()));
    }
    let eps2 = eps * eps;
    let core: Vec<bool> = (0..rows.len())
        .into_par_iter()
        .map(|p| rows.iter().filter(|q| sq_dist(&rows[p], q) <= eps2).count() >= min_samples)
        .collect();

    let mut labels = vec![NOISE; rows.len()];
    let mut cluster = 0i64;
    for start in 0..rows.len() {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = cluster;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for q in neighbors(rows, p, eps2) {
                if labels[q] == NOISE {
                    labels[q] = cluster;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    Ok(DbscanResult {
        labels,
        eps,
        min_samples,
        n_clusters: cluster as usize,
    })
}

impl KMeansModel {
    pub fn labels(&self) -> Vec<i64> {
        self.assignments.iter().map(|&a| a as i64).collect()
    }

    pub fn write(&self, meta: &Path, centroids: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            k: usize,
            dims: usize,
            sse: f64,
            iterations: usize,
            seed: u64,
            sse_history: &'a [f64],
            assignments: &'a [usize],
        }
        let m = Meta {
            k: self.k,
            dims: self.centroids.first().map_or(0, Vec::len),
            sse: self.sse,
            iterations: self.iterations,
            seed: self.seed,
            sse_history: &self.sse_history,
            assignments: &self.assignments,
        };
        let json = serde_json::to_string_pretty(&m).map_err(|e| Error::json("kmeans model", e))?;
        std::fs::write(meta, json).map_err(|e| Error::io(meta, e))?;
        write_f64_block(centroids, &self.centroids)
    }

    pub fn read(meta: &Path, centroids: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Meta {
            k: usize,
            dims: usize,
            sse: f64,
            iterations: usize,
            seed: u64,
            sse_history: Vec<f64>,
            assignments: Vec<usize>,
        }
        let text = std::fs::read_to_string(meta).map_err(|e| Error::io(meta, e))?;
        let m: Meta = serde_json::from_str(&text).map_err(|e| Error::json("kmeans model", e))?;
        Ok(Self {
            k: m.k,
            centroids: read_f64_block(centroids, m.k, m.dims)?,
            assignments: m.assignments,
            sse: m.sse,
            iterations: m.iterations,
            seed: m.seed,
            sse_history: m.sse_history,
        })
    }
}

pub fn write_labels(path: &Path, doc_ids: &[String], labels: &[i64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let err = |e| Error::csv(path, e);
    w.write_record(["doc_id", "cluster"]).map_err(err)?;
    for (id, l) in doc_ids.iter().zip(labels) {
        w.write_record([id.as_str(), &l.to_string()]).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-cluster keywords by centroid weight, descending, ties lexicographic.
/// Zero-weight terms are left out.
pub fn top_terms(model: &KMeansModel, terms: &[String], n: usize) -> Result<Vec<Vec<(String, f64)>>> {
    model
        .centroids
        .iter()
        .map(|c| {
            if c.len() != terms.len() {
                return Err(Error::DimensionMismatch(format!(
                    "centroid has {} dims, vocabulary {} terms",
                    c.len(),
                    terms.len()
                )));
            }
            let mut w: Vec<(String, f64)> = terms
                .iter()
                .zip(c)
                .filter(|(_, &v)| v > 0.0)
                .map(|(t, &v)| (t.clone(), v))
                .collect();
            w.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            w.truncate(n);
            Ok(w)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSizes {
    /// (label, size), largest first, ties by label.
    pub clusters: Vec<(i64, usize)>,
    pub noise: usize,
}

impl ClusterSizes {
    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.1).collect()
    }
}

pub fn cluster_sizes(labels: &[i64]) -> ClusterSizes {
    let mut counts = std::collections::BTreeMap::new();
    let mut noise = 0;
    for &l in labels {
        if l < 0 {
            noise += 1;
        } else {
            *counts.entry(l).or_insert(0usize) += 1;
        }
    }
    let mut clusters: Vec<(i64, usize)> = counts.into_iter().collect();
    clusters.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ClusterSizes { clusters, noise }
}

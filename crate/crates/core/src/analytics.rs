//! Descriptive statistics, PCA projection, geographic scatter extraction and
//! word-frequency tables.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crimemap::{CanonicalCrimeType, CrimeTypeMapper};
use crate::error::{Error, Result};
use crate::ingest::MergedCrimeDataset;
use crate::textproc::{content_terms, StopList};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p100: f64,
}

/// Percentile of sorted data by linear interpolation between closest ranks
/// (position `q * (n - 1)`).
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summary_stats(values: &[f64]) -> Result<SummaryStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SummaryStats {
        count: values.len(),
        mean,
        std: var.sqrt(),
        p25: percentile_sorted(&sorted, 0.25),
        p50: percentile_sorted(&sorted, 0.50),
        p75: percentile_sorted(&sorted, 0.75),
        p100: sorted[sorted.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2D {
    /// n × dims
    pub coords: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    /// dims × features, orthonormal rows
    pub components: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

const POWER_MAX_ITER: usize = 20_000;
const POWER_TOL: f64 = 1e-15;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, bi)| *x -= p * bi);
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Top `dims` principal components by power iteration with deflation on the
/// sample covariance matrix. Each component's largest-magnitude entry is
/// made positive.
pub fn pca_project(rows: &[Vec<f64>], dims: usize) -> Result<Projection2D> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidParameter("PCA needs at least two rows".into()));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::DimensionMismatch("ragged rows".into()));
    }
    if dims == 0 || dims > p {
        return Err(Error::InvalidParameter(format!("dims = {dims} with {p} features")));
    }

    let mut mean = vec![0.0; p];
    for r in rows {
        mean.iter_mut().zip(r).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut cov = vec![vec![0.0; p]; p];
    for r in &centered {
        for i in 0..p {
            if r[i] == 0.0 {
                continue;
            }
            for j in i..p {
                cov[i][j] += r[i] * r[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in i..p {
            cov[i][j] /= denom;
            cov[j][i] = cov[i][j];
        }
    }
    let total_variance: f64 = (0..p).map(|i| cov[i][i]).sum();
    if total_variance <= 0.0 {
        return Err(Error::DegenerateData);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut deflated = cov.clone();
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut explained = Vec::with_capacity(dims);
    for _ in 0..dims {
        let mut v: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &components);
        normalize(&mut v);
        for _ in 0..POWER_MAX_ITER {
            let mut next = mat_vec(&deflated, &v);
            orthogonalize(&mut next, &components);
            if normalize(&mut next) == 0.0 {
                // remaining spectrum is zero; any orthonormal direction will do
                break;
            }
            // align sign before measuring movement
            if dot(&next, &v) < 0.0 {
                next.iter_mut().for_each(|x| *x = -*x);
            }
            let moved = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            v = next;
            if moved < POWER_TOL {
                break;
            }
        }
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let lambda = dot(&v, &mat_vec(&cov, &v)).max(0.0);
        for i in 0..p {
            for j in 0..p {
                deflated[i][j] -= lambda * v[i] * v[j];
            }
        }
        explained.push(lambda);
        components.push(v);
    }

    let coords = centered
        .iter()
        .map(|r| components.iter().map(|c| dot(r, c)).collect())
        .collect();
    Ok(Projection2D {
        coords,
        explained_variance: explained,
        components,
        mean,
    })
}

/// Contiguous-US bounding box used to separate plausible points from outliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBox {
    pub min_long: f64,
    pub max_long: f64,
    pub min_lat: f64,
    pub max_lat: f64,
}

impl Default for GeoBox {
    fn default() -> Self {
        Self {
            min_long: -125.0,
            max_long: -66.0,
            min_lat: 24.0,
            max_lat: 50.0,
        }
    }
}

impl GeoBox {
    pub fn contains(&self, long: f64, lat: f64) -> bool {
        (self.min_long..=self.max_long).contains(&long) && (self.min_lat..=self.max_lat).contains(&lat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub index: usize,
    pub long: f64,
    pub lat: f64,
    pub category: CanonicalCrimeType,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GeoPoints {
    pub main: Vec<GeoPoint>,
    pub outliers: Vec<GeoPoint>,
    /// Record indices with a null coordinate.
    pub skipped: Vec<usize>,
}

pub fn geo_points(d: &MergedCrimeDataset, mapper: &CrimeTypeMapper, bbox: &GeoBox) -> GeoPoints {
    let mut out = GeoPoints::default();
    for (index, rec) in d.records.iter().enumerate() {
        let (Some(long), Some(lat)) = (rec.long, rec.lat) else {
            out.skipped.push(index);
            continue;
        };
        let pt = GeoPoint {
            index,
            long,
            lat,
            category: mapper.canonicalize(rec.crime_type.as_deref()),
        };
        if bbox.contains(long, lat) {
            out.main.push(pt);
        } else {
            out.outliers.push(pt);
        }
    }
    out
}

/// Top-`n` terms by count over all texts, ties broken lexicographically.
pub fn word_frequencies<S: AsRef<str>>(texts: &[S], stoplist: &StopList, n: usize) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in texts {
        for term in content_terms(t.as_ref(), stoplist) {
            *counts.entry(term).or_default() += 1;
        }
    }
    top_counts(counts, n)
}

pub(crate) fn top_counts(counts: BTreeMap<String, usize>, n: usize) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(n);
    v
}

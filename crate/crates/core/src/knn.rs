//! Brute-force k-nearest-neighbour regression on transformed fingerprints.

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::pose::{label, wrap_degrees, LABEL_DIM};

/// Neighbour counts tried when tuning on a validation split.
pub const K_CANDIDATES: [usize; 5] = [1, 3, 5, 9, 15];
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<[f64; LABEL_DIM]>,
    k: usize,
}

/// Averages labels: yaw as a circular mean, everything else arithmetically.
pub fn average_labels<'a>(labels: impl Iterator<Item = &'a [f64; LABEL_DIM]> + Clone) -> [f64; LABEL_DIM] {
    let mut it = labels.clone();
    if let (Some(only), None) = (it.next(), it.next()) {
        return *only;
    }
    let mut acc = [0.0; LABEL_DIM];
    let (mut s, mut c, mut n) = (0.0, 0.0, 0usize);
    for l in labels {
        for k in 0..LABEL_DIM {
            acc[k] += l[k];
        }
        let a = l[label::YAW].to_radians();
        s += a.sin();
        c += a.cos();
        n += 1;
    }
    for v in &mut acc {
        *v /= n as f64;
    }
    acc[label::YAW] = wrap_degrees(s.atan2(c).to_degrees());
    acc
}

impl KnnModel {
    /// Stores `labels.len()` feature rows of width `dim`.
    pub fn fit(features: Vec<f64>, labels: Vec<[f64; LABEL_DIM]>, dim: usize, k: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("knn training set"));
        }
        if dim == 0 || features.len() != labels.len() * dim {
            return Err(Error::shape(labels.len() * dim, features.len()));
        }
        let mut m = KnnModel {
            dim,
            features,
            labels,
            k: 1,
        };
        m.set_k(k)?;
        Ok(m)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn set_k(&mut self, k: usize) -> Result<()> {
        if k == 0 || k > self.labels.len() {
            return Err(Error::Config(format!("k = {k} must be in 1..={}", self.labels.len())));
        }
        self.k = k;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[[f64; LABEL_DIM]] {
        &self.labels
    }

    /// The `k` nearest stored rows as `(squared distance, index)`, closest
    /// first; equal distances keep the lower index first.
    pub fn neighbors(&self, query: &[f64], k: usize) -> Vec<(f64, usize)> {
        let k = k.min(self.labels.len());
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, row) in self.features.chunks_exact(self.dim).enumerate() {
            let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k {
                if d >= best[k - 1].0 {
                    continue;
                }
                best.pop();
            }
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
        }
        best
    }

    pub fn predict(&self, query: &[f64]) -> Result<[f64; LABEL_DIM]> {
        if query.len() != self.dim {
            return Err(Error::shape(self.dim, query.len()));
        }
        let nb = self.neighbors(query, self.k);
        Ok(average_labels(nb.iter().map(|&(_, i)| &self.labels[i])))
    }

    pub fn predict_batch(&self, queries: &[f64], exec: Execution) -> Result<Vec<[f64; LABEL_DIM]>> {
        if !queries.len().is_multiple_of(self.dim) {
            return Err(Error::shape(self.dim, queries.len() % self.dim));
        }
        let rows = queries.len() / self.dim;
        exec.try_map(rows, |r| self.predict(&queries[r * self.dim..(r + 1) * self.dim]))
    }

    /// Picks the candidate `k` with the lowest mean 3-D position error on a
    /// validation set, keeping the smallest `k` on ties, and stores it.
    /// Returns the mean error (m) for every candidate tried.
    pub fn select_k(
        &mut self,
        queries: &[f64],
        truth: &[[f64; LABEL_DIM]],
        candidates: &[usize],
        exec: Execution,
    ) -> Result<Vec<(usize, f64)>> {
        let usable: Vec<usize> = candidates.iter().copied().filter(|&k| k >= 1 && k <= self.len()).collect();
        if usable.is_empty() || truth.is_empty() {
            return Err(Error::EmptyInput("knn k selection"));
        }
        if queries.len() != truth.len() * self.dim {
            return Err(Error::shape(truth.len() * self.dim, queries.len()));
        }
        let k_max = *usable.iter().max().expect("non-empty");
        let per_query = exec.map(truth.len(), |r| {
            let nb = self.neighbors(&queries[r * self.dim..(r + 1) * self.dim], k_max);
            usable
                .iter()
                .map(|&k| {
                    let est = average_labels(nb[..k].iter().map(|&(_, i)| &self.labels[i]));
                    (0..3).map(|c| (est[c] - truth[r][c]).powi(2)).sum::<f64>().sqrt()
                })
                .collect::<Vec<f64>>()
        });
        let scores: Vec<(usize, f64)> = usable
            .iter()
            .enumerate()
            .map(|(j, &k)| (k, per_query.iter().map(|e| e[j]).sum::<f64>() / truth.len() as f64))
            .collect();
        let best = scores
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("non-empty");
        self.k = best.0;
        Ok(scores)
    }
}

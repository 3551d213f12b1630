//! Feature and label scaling fitted on a training split.

use serde::{Deserialize, Serialize};

use crate::dataset::FingerprintRecord;
use crate::error::{Error, Result};
use crate::pose::{label, wrap_degrees, LABEL_DIM};

/// Linear SNR floor applied before taking decibels (-100 dB).
pub const RHO_FLOOR: f64 = 1e-10;

/// `10 log10(max(rho, floor))`.
pub fn to_db(rho: f64, floor: f64) -> f64 {
    10.0 * rho.max(floor).log10()
}

fn mean_std<'a>(cols: usize, rows: impl Iterator<Item = &'a [f64]> + Clone) -> (Vec<f64>, Vec<f64>, usize) {
    let mut n = 0usize;
    let mut mean = vec![0.0; cols];
    for r in rows.clone() {
        n += 1;
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; cols];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.iter().map(|s| (s / n as f64).sqrt()).collect();
    (mean, std, n)
}

/// Decibel conversion followed by per-AP standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransform {
    pub rho_floor: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureTransform {
    /// Fits on training records. Columns with no spread get unit std.
    pub fn fit(records: &[FingerprintRecord]) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyInput("training split"))?;
        let n_r = first.rho.len();
        let db: Vec<Vec<f64>> = records
            .iter()
            .map(|r| r.rho.iter().map(|&v| to_db(v, RHO_FLOOR)).collect())
            .collect();
        if let Some(bad) = db.iter().find(|r| r.len() != n_r) {
            return Err(Error::shape(n_r, bad.len()));
        }
        let (mean, std, _) = mean_std(n_r, db.iter().map(|r| r.as_slice()));
        let std = std.into_iter().map(|s| if s > 1e-12 { s } else { 1.0 }).collect();
        Ok(FeatureTransform {
            rho_floor: RHO_FLOOR,
            mean,
            std,
        })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_into(&self, rho: &[f64], out: &mut [f64]) {
        for k in 0..self.mean.len() {
            out[k] = (to_db(rho[k], self.rho_floor) - self.mean[k]) / self.std[k];
        }
    }

    pub fn apply(&self, rho: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mean.len()];
        self.apply_into(rho, &mut out);
        out
    }
}

/// Per-component label standardization; the identity when labels are kept raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelTransform {
    pub mean: [f64; LABEL_DIM],
    pub std: [f64; LABEL_DIM],
}

impl LabelTransform {
    pub fn identity() -> Self {
        LabelTransform {
            mean: [0.0; LABEL_DIM],
            std: [1.0; LABEL_DIM],
        }
    }

    pub fn fit(labels: &[[f64; LABEL_DIM]]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("training labels"));
        }
        let (m, s, _) = mean_std(LABEL_DIM, labels.iter().map(|l| l.as_slice()));
        let mut mean = [0.0; LABEL_DIM];
        let mut std = [1.0; LABEL_DIM];
        for k in 0..LABEL_DIM {
            mean[k] = m[k];
            if s[k] > 1e-12 {
                std[k] = s[k];
            }
        }
        Ok(LabelTransform { mean, std })
    }

    pub fn apply(&self, l: &[f64; LABEL_DIM]) -> [f64; LABEL_DIM] {
        std::array::from_fn(|k| (l[k] - self.mean[k]) / self.std[k])
    }

    pub fn inverse(&self, z: &[f64]) -> [f64; LABEL_DIM] {
        std::array::from_fn(|k| z[k] * self.std[k] + self.mean[k])
    }
}

/// Box that predictions are projected into before reporting.
///
/// Positions use the extremes seen in training; angles use their natural
/// ranges, with yaw wrapped rather than clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBounds {
    pub lo: [f64; LABEL_DIM],
    pub hi: [f64; LABEL_DIM],
}

impl LabelBounds {
    pub fn from_labels(labels: &[[f64; LABEL_DIM]]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyInput("training labels"));
        }
        let mut lo = [-180.0; LABEL_DIM];
        let mut hi = [180.0; LABEL_DIM];
        for k in label::X..=label::Z {
            lo[k] = labels.iter().map(|l| l[k]).fold(f64::INFINITY, f64::min);
            hi[k] = labels.iter().map(|l| l[k]).fold(f64::NEG_INFINITY, f64::max);
        }
        (lo[label::YAW], hi[label::YAW]) = (0.0, 360.0);
        (lo[label::ROLL], hi[label::ROLL]) = (-90.0, 90.0);
        Ok(LabelBounds { lo, hi })
    }

    pub fn project(&self, l: &mut [f64; LABEL_DIM]) {
        for k in 0..LABEL_DIM {
            l[k] = if k == label::YAW {
                wrap_degrees(l[k])
            } else {
                l[k].clamp(self.lo[k], self.hi[k])
            };
        }
    }
}

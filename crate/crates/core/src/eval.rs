//! Error metrics, timing and the downlink bit-error-rate study.

use std::fmt::Write as _;
use std::time::Instant;

use statrs::function::erf::erfc;

use crate::channel::{ChannelFlag, ChannelModel};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::par::Execution;
use crate::pose::{label, Pose, LABEL_DIM};

/// Queries excluded from latency averages.
pub const WARMUP_QUERIES: usize = 100;

/// 3-D Euclidean position error in centimetres.
pub fn position_error_cm(truth: &[f64; LABEL_DIM], est: &[f64; LABEL_DIM]) -> f64 {
    100.0 * (0..3).map(|k| (truth[k] - est[k]).powi(2)).sum::<f64>().sqrt()
}

/// Angle error in degrees: circular for yaw, absolute difference otherwise.
pub fn angle_error(truth: &[f64; LABEL_DIM], est: &[f64; LABEL_DIM], which: usize) -> f64 {
    let d = (truth[which] - est[which]).abs();
    if which == label::YAW {
        let d = d % 360.0;
        d.min(360.0 - d)
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Nearest-rank 90th percentile.
    pub precision90: f64,
}

/// Nearest-rank percentile of an ascending slice: element `ceil(q n)`, 1-based.
pub fn nearest_rank(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("error list"));
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

pub fn summarize(errors: &[f64]) -> Result<Summary> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("error list"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        precision90: nearest_rank(&sorted, 0.9)?,
    })
}

/// `error_cm,cdf` rows: ascending errors against `rank / n`.
pub fn cdf_csv(errors: &[f64]) -> String {
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut s = String::from("error_cm,cdf\n");
    for (i, e) in sorted.iter().enumerate() {
        let _ = writeln!(s, "{e},{}", (i + 1) as f64 / n);
    }
    s
}

/// Per-target errors of one estimator on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Centimetres.
    pub position: Vec<f64>,
    /// Degrees, indexed yaw, pitch, roll.
    pub angles: [Vec<f64>; 3],
}

impl ErrorReport {
    pub fn new(truth: &[[f64; LABEL_DIM]], est: &[[f64; LABEL_DIM]]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyInput("test set"));
        }
        if truth.len() != est.len() {
            return Err(Error::shape(truth.len(), est.len()));
        }
        let pairs = truth.iter().zip(est);
        Ok(ErrorReport {
            position: pairs.clone().map(|(t, e)| position_error_cm(t, e)).collect(),
            angles: [label::YAW, label::PITCH, label::ROLL]
                .map(|w| pairs.clone().map(|(t, e)| angle_error(t, e, w)).collect()),
        })
    }

    pub fn position_summary(&self) -> Summary {
        summarize(&self.position).expect("non-empty by construction")
    }

    /// Summary for yaw (0), pitch (1) or roll (2).
    pub fn angle_summary(&self, i: usize) -> Summary {
        summarize(&self.angles[i]).expect("non-empty by construction")
    }
}

/// Mean wall time per query (ms) of single-point prediction, after warmup.
pub fn online_latency_ms(model: &Model, queries: &[&[f64]]) -> Result<f64> {
    if queries.len() <= WARMUP_QUERIES {
        return Err(Error::EmptyInput("timing queries beyond warmup"));
    }
    let mut sink = 0.0;
    for q in &queries[..WARMUP_QUERIES] {
        sink += model.predict(q)?[0];
    }
    let start = Instant::now();
    for q in &queries[WARMUP_QUERIES..] {
        sink += model.predict(q)?[0];
    }
    let ms = start.elapsed().as_secs_f64() * 1e3 / (queries.len() - WARMUP_QUERIES) as f64;
    std::hint::black_box(sink);
    Ok(ms)
}

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Bit error rate of on-off keying at linear SNR `snr`.
pub fn ook_ber(snr: f64) -> f64 {
    q_function(snr.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber_exact: f64,
    pub ber_est: f64,
}

/// `0, 2, ..., 30` dB.
pub fn default_snr_grid() -> Vec<f64> {
    (0..=15).map(|i| 2.0 * i as f64).collect()
}

/// Sum of all downlink gains, AP lamps to device photodiodes.
pub fn downlink_l1(channel: &ChannelModel, pose: &Pose, flag: ChannelFlag) -> Result<f64> {
    Ok(channel.downlink_matrix(pose, flag)?.iter().sum())
}

/// Mean exact and estimated OOK bit error rates over a set of poses.
///
/// For each target mean SNR the transmit power is scaled so the received SNR
/// averaged over the true poses hits the target. The estimated BER evaluates
/// the same power on the channel of each estimated pose.
pub fn ber_curve(
    channel: &ChannelModel,
    flag: ChannelFlag,
    truth: &[Pose],
    est: &[Pose],
    grid_db: &[f64],
    exec: Execution,
) -> Result<Vec<BerPoint>> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("ber poses"));
    }
    if truth.len() != est.len() {
        return Err(Error::shape(truth.len(), est.len()));
    }
    let gains = exec.try_map(truth.len(), |i| {
        Ok((
            downlink_l1(channel, &truth[i], flag)?.powi(2),
            downlink_l1(channel, &est[i], flag)?.powi(2),
        ))
    })?;
    let mean_sq = gains.iter().map(|g| g.0).sum::<f64>() / gains.len() as f64;
    if !(mean_sq > 0.0) {
        return Err(Error::Domain {
            what: "mean downlink gain",
            value: mean_sq,
            domain: "(0, inf)",
        });
    }
    let n = gains.len() as f64;
    Ok(exec.map(grid_db.len(), |g| {
        let scale = 10f64.powf(grid_db[g] / 10.0) / mean_sq;
        let (mut exact, mut estimated) = (0.0, 0.0);
        for &(t, e) in &gains {
            exact += ook_ber(scale * t);
            estimated += ook_ber(scale * e);
        }
        BerPoint {
            snr_db: grid_db[g],
            ber_exact: exact / n,
            ber_est: estimated / n,
        }
    }))
}

pub fn ber_csv(curve: &[BerPoint]) -> String {
    let mut s = String::from("snr_db,ber_exact,ber_est\n");
    for p in curve {
        let _ = writeln!(s, "{},{:e},{:e}", p.snr_db, p.ber_exact, p.ber_est);
    }
    s
}

/// One method/channel column of the comparison table.
#[derive(Debug, Clone)]
pub struct TableEntry {
    pub method: String,
    pub flag: ChannelFlag,
    pub train_size: usize,
    pub report: ErrorReport,
}

/// Comparison table: one row per metric, one column per entry.
pub fn table_report(entries: &[TableEntry]) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:<28}", "metric");
    for e in entries {
        let _ = write!(s, " {:>16}", format!("{}/{} N={}", e.method, e.flag, e.train_size));
    }
    s.push('\n');
    let mut row = |name: &str, f: &dyn Fn(&ErrorReport) -> f64| {
        let _ = write!(s, "{name:<28}");
        for e in entries {
            let _ = write!(s, " {:>16.3}", f(&e.report));
        }
        s.push('\n');
    };
    row("position mean (cm)", &|r| r.position_summary().mean);
    row("position precision90 (cm)", &|r| r.position_summary().precision90);
    for (i, name) in ["yaw", "pitch", "roll"].iter().enumerate() {
        row(&format!("{name} mean (deg)"), &|r| r.angle_summary(i).mean);
        row(&format!("{name} precision90 (deg)"), &|r| r.angle_summary(i).precision90);
    }
    s
}

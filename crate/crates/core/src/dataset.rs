//! Fingerprint datasets: generation, persistence and splitting.
//!
//! File layout: a block of `# key=value` header lines (`version`, `n`, `n_r`,
//! `channel_flag`, `seed`, `rng_id`, `room_hash`), one column-name line, then
//! one CSV row per record: `rho_1..rho_{n_r},x,y,z,alpha,beta,gamma`. Values
//! carry 17 significant digits so a read reproduces every bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{snr_vector, ChannelFlag, ChannelModel};
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::pose::{label, Pose, LABEL_DIM};
use crate::sampling::{sample_record, RNG_ID};

pub const FORMAT_VERSION: u32 = 1;

/// Train/validation/test fractions used when none are given.
pub const DEFAULT_SPLIT: [f64; 3] = [0.81, 0.09, 0.10];

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintRecord {
    /// Linear SNR at each AP.
    pub rho: Vec<f64>,
    /// `x, y, z` in metres, `yaw, pitch, roll` in degrees.
    pub label: [f64; LABEL_DIM],
}

impl FingerprintRecord {
    pub fn pose(&self) -> Pose {
        Pose::from_label(&self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub version: u32,
    pub n: usize,
    pub n_r: usize,
    pub channel_flag: ChannelFlag,
    pub seed: u64,
    pub rng_id: String,
    pub room_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub metadata: Metadata,
    pub records: Vec<FingerprintRecord>,
}

/// Generates `n` records for `config`, building the channel model it needs.
pub fn generate_dataset(config: &SimConfig, n: usize, flag: ChannelFlag, exec: Execution) -> Result<Dataset> {
    let model = ChannelModel::new(&config.room, &config.ue, flag)?;
    generate_with_model(config, &model, n, flag, exec)
}

/// Generates `n` records with a prebuilt channel model.
///
/// The model must have been built from `config.room` and `config.ue`.
pub fn generate_with_model(
    config: &SimConfig,
    model: &ChannelModel,
    n: usize,
    flag: ChannelFlag,
    exec: Execution,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyInput("dataset size"));
    }
    config.validate()?;
    let records = exec.try_map(n, |i| {
        let (pose, p) = sample_record(&config.room, &config.sampler, i as u64)?;
        let h = model.channel_matrix(&pose, flag)?;
        Ok(FingerprintRecord {
            rho: snr_vector(&h, p, &config.room),
            label: pose.label(),
        })
    })?;
    Ok(Dataset {
        metadata: Metadata {
            version: FORMAT_VERSION,
            n,
            n_r: config.room.n_aps(),
            channel_flag: flag,
            seed: config.sampler.seed,
            rng_id: RNG_ID.to_string(),
            room_hash: config.room_hash(),
        },
        records,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_r(&self) -> usize {
        self.metadata.n_r
    }

    /// Dataset holding the given records, with the same provenance.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let records: Vec<_> = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset {
            metadata: Metadata {
                n: records.len(),
                ..self.metadata.clone()
            },
            records,
        }
    }

    pub fn labels(&self) -> Vec<[f64; LABEL_DIM]> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let m = &self.metadata;
        writeln!(w, "# version={}", m.version)?;
        writeln!(w, "# n={}", self.records.len())?;
        writeln!(w, "# n_r={}", m.n_r)?;
        writeln!(w, "# channel_flag={}", m.channel_flag)?;
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(w, "# rng_id={}", m.rng_id)?;
        writeln!(w, "# room_hash={}", m.room_hash)?;
        let mut names: Vec<String> = (1..=m.n_r).map(|i| format!("rho_{i}")).collect();
        names.extend(label::NAMES.iter().map(|s| s.to_string()));
        writeln!(w, "{}", names.join(","))?;
        let mut line = String::new();
        for r in &self.records {
            line.clear();
            for (k, v) in r.rho.iter().chain(r.label.iter()).enumerate() {
                if k > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{v:.16e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: String| Error::format(path, reason);

        let mut header = std::collections::BTreeMap::new();
        let mut lines = BufReader::new(file).lines();
        let columns = loop {
            let line = match lines.next() {
                Some(l) => l.map_err(|e| Error::io(path, e))?,
                None => return Err(bad("missing column line".into())),
            };
            match line.strip_prefix('#') {
                Some(kv) => {
                    let (k, v) = kv
                        .trim()
                        .split_once('=')
                        .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                None => break line,
            }
        };
        let get = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing header key {k}")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(format!("bad value for {k}"))) };

        let version = num("version")? as u32;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let n = num("n")? as usize;
        let n_r = num("n_r")? as usize;
        let metadata = Metadata {
            version,
            n,
            n_r,
            channel_flag: get("channel_flag")?.parse()?,
            seed: num("seed")?,
            rng_id: get("rng_id")?.clone(),
            room_hash: get("room_hash")?.clone(),
        };
        let width = n_r + LABEL_DIM;
        if columns.split(',').count() != width {
            return Err(bad(format!("expected {width} columns")));
        }

        let mut records = Vec::with_capacity(n);
        for (row, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(format!("row {}: {e}", row + 1)))?;
            if values.len() != width {
                return Err(Error::shape(width, values.len()));
            }
            let mut label = [0.0; LABEL_DIM];
            label.copy_from_slice(&values[n_r..]);
            records.push(FingerprintRecord {
                rho: values[..n_r].to_vec(),
                label,
            });
        }
        if records.len() != n {
            return Err(bad(format!("header says {n} records, found {}", records.len())));
        }
        Ok(Dataset { metadata, records })
    }
}

/// Shuffled disjoint partitions of a dataset.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Shuffles with `seed` and cuts into train, validation and test parts.
///
/// A partition may be empty only when its fraction is zero.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<Split> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0, 1] and sum to 1")));
    }
    let n = dataset.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let bounds = [0, n_train, n_train + n_val, n];
    for (k, name) in ["train", "validation", "test"].iter().enumerate() {
        if fractions[k] > 0.0 && bounds[k + 1] == bounds[k] {
            return Err(Error::EmptyPartition(name.to_string()));
        }
    }
    Ok(Split {
        train: dataset.subset(&idx[bounds[0]..bounds[1]]),
        val: dataset.subset(&idx[bounds[1]..bounds[2]]),
        test: dataset.subset(&idx[bounds[2]..bounds[3]]),
    })
}

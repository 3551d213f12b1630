//! Trained estimators with their scaling, and the model file container.
//!
//! File layout, all integers little-endian:
//!
//! | field            | bytes                                   |
//! |------------------|-----------------------------------------|
//! | magic            | `LIFIMDL\0`                             |
//! | version          | u32                                     |
//! | header length    | u64                                     |
//! | header           | JSON: kind, metadata, transforms, spec  |
//! | tensors          | raw values, see below                   |
//!
//! Networks store their trainable parameters (layer order, weights row-major
//! then bias) followed by normalization running statistics, in the header's
//! `dtype`. KNN models store the transformed feature rows then the labels,
//! both as f64.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelFlag;
use crate::dataset::{Dataset, FingerprintRecord, Split};
use crate::error::{Error, Result};
use crate::knn::{KnnModel, DEFAULT_K, K_CANDIDATES};
use crate::nn::{self, EpochLoss, Mode, ModelSpec, Network, Periodic, Real, TrainConfig};
use crate::par::Execution;
use crate::pose::{label, LABEL_DIM};
use crate::transform::{FeatureTransform, LabelBounds, LabelTransform};

const MAGIC: &[u8; 8] = b"LIFIMDL\0";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Cnn,
    Knn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::Knn => "knn",
        }
    }

    pub fn architecture(self) -> Option<nn::Architecture> {
        match self {
            ModelKind::Mlp => Some(nn::Architecture::Mlp),
            ModelKind::Cnn => Some(nn::Architecture::Cnn),
            ModelKind::Knn => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ModelKind::Mlp),
            "cnn" => Ok(ModelKind::Cnn),
            "knn" => Ok(ModelKind::Knn),
            other => Err(Error::Config(format!("unknown model kind {other:?} (mlp|cnn|knn)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub kind: ModelKind,
    pub n_r: usize,
    pub channel_flag: ChannelFlag,
    pub room_hash: String,
    pub dataset_seed: u64,
    pub train_size: usize,
    pub raw_labels: bool,
    pub train_config: Option<TrainConfig>,
    /// Mean validation position error (m) per candidate neighbour count.
    pub knn_scores: Vec<(usize, f64)>,
    pub history: Vec<EpochLoss>,
    /// Seed of the train/val/test shuffle, when the caller recorded it.
    #[serde(default)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    Network(Network<f32>),
    Knn(KnnModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub meta: ModelMeta,
    pub features: FeatureTransform,
    pub labels: LabelTransform,
    pub bounds: LabelBounds,
    pub estimator: Estimator,
}

/// Training choices beyond the split itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub train: TrainConfig,
    /// Regress labels in their raw units instead of standardized.
    pub raw_labels: bool,
    /// Network layout; the default for the kind when `None`.
    pub spec: Option<ModelSpec>,
    pub k_candidates: Vec<usize>,
    /// Measure the yaw residual around the circle in the network loss, so
    /// 359 and 1 degrees count as 2 apart rather than 358.
    pub circular_yaw: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            train: TrainConfig::default(),
            raw_labels: false,
            spec: None,
            k_candidates: K_CANDIDATES.to_vec(),
            circular_yaw: true,
        }
    }
}

fn feature_rows(t: &FeatureTransform, records: &[FingerprintRecord]) -> Vec<f64> {
    let d = t.n_features();
    let mut out = vec![0.0; records.len() * d];
    for (r, row) in records.iter().zip(out.chunks_exact_mut(d)) {
        t.apply_into(&r.rho, row);
    }
    out
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn label_rows(t: &LabelTransform, records: &[FingerprintRecord]) -> Vec<f32> {
    records.iter().flat_map(|r| t.apply(&r.label).map(|v| v as f32)).collect()
}

/// Fits transforms on `split.train` and trains a model of the given kind.
/// `on_epoch` sees each network epoch as it finishes.
pub fn train_model(
    kind: ModelKind,
    split: &Split,
    options: &TrainOptions,
    exec: Execution,
    on_epoch: impl FnMut(&EpochLoss),
) -> Result<Model> {
    let train = &split.train;
    if train.is_empty() {
        return Err(Error::EmptyPartition("train".into()));
    }
    let features = FeatureTransform::fit(&train.records)?;
    let train_labels = train.labels();
    let labels = if options.raw_labels || kind == ModelKind::Knn {
        LabelTransform::identity()
    } else {
        LabelTransform::fit(&train_labels)?
    };
    let bounds = LabelBounds::from_labels(&train_labels)?;
    let mut meta = ModelMeta {
        kind,
        n_r: train.n_r(),
        channel_flag: train.metadata.channel_flag,
        room_hash: train.metadata.room_hash.clone(),
        dataset_seed: train.metadata.seed,
        train_size: train.len(),
        raw_labels: options.raw_labels,
        train_config: None,
        knn_scores: Vec::new(),
        history: Vec::new(),
        split_seed: None,
    };
    let x = feature_rows(&features, &train.records);

    let estimator = match kind.architecture() {
        None => {
            let mut knn = KnnModel::fit(x, train_labels, features.n_features(), DEFAULT_K.min(train.len()))?;
            if !split.val.is_empty() {
                let vx = feature_rows(&features, &split.val.records);
                meta.knn_scores = knn.select_k(&vx, &split.val.labels(), &options.k_candidates, exec)?;
            }
            Estimator::Knn(knn)
        }
        Some(arch) => {
            let spec = match &options.spec {
                Some(s) if s.architecture == arch => s.clone(),
                Some(_) => return Err(Error::Config("network spec does not match model kind".into())),
                None => ModelSpec::default_for(arch, features.n_features()),
            };
            if spec.input_width != features.n_features() {
                return Err(Error::shape(features.n_features(), spec.input_width));
            }
            let mut config = options.train.clone();
            if options.circular_yaw {
                config.periodic.push(Periodic {
                    index: label::YAW,
                    period: 360.0 / labels.std[label::YAW],
                });
            }
            let mut net = Network::<f32>::new(spec, config.seed)?;
            let y = label_rows(&labels, &train.records);
            let vx = to_f32(&feature_rows(&features, &split.val.records));
            let vy = label_rows(&labels, &split.val.records);
            let val = (!vx.is_empty()).then_some((vx.as_slice(), vy.as_slice()));
            meta.history = nn::train(&mut net, &to_f32(&x), &y, val, &config, exec, on_epoch)?;
            meta.train_config = Some(config);
            Estimator::Network(net)
        }
    };
    Ok(Model {
        meta,
        features,
        labels,
        bounds,
        estimator,
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.meta.kind
    }

    /// Fails unless `dataset` comes from the room and AP count this model was trained for.
    pub fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.n_r() != self.meta.n_r {
            return Err(Error::shape(format!("{} APs", self.meta.n_r), dataset.n_r()));
        }
        if dataset.metadata.room_hash != self.meta.room_hash {
            return Err(Error::HashMismatch {
                model: self.meta.room_hash.clone(),
                dataset: dataset.metadata.room_hash.clone(),
            });
        }
        Ok(())
    }

    fn finish(&self, z: &[f64]) -> [f64; LABEL_DIM] {
        let mut l = self.labels.inverse(z);
        self.bounds.project(&mut l);
        l
    }

    /// Pose label estimate from one linear SNR vector.
    pub fn predict(&self, rho: &[f64]) -> Result<[f64; LABEL_DIM]> {
        if rho.len() != self.meta.n_r {
            return Err(Error::shape(self.meta.n_r, rho.len()));
        }
        let x = self.features.apply(rho);
        match &self.estimator {
            Estimator::Knn(knn) => Ok(self.finish(&knn.predict(&x)?)),
            Estimator::Network(net) => {
                let mut ws = net.workspace();
                let out = net.forward(&mut ws, &to_f32(&x), 1, Mode::Infer)?;
                let z: Vec<f64> = out.iter().map(|&v| v as f64).collect();
                Ok(self.finish(&z))
            }
        }
    }

    pub fn predict_records(&self, records: &[FingerprintRecord], exec: Execution) -> Result<Vec<[f64; LABEL_DIM]>> {
        if let Some(r) = records.iter().find(|r| r.rho.len() != self.meta.n_r) {
            return Err(Error::shape(self.meta.n_r, r.rho.len()));
        }
        let x = feature_rows(&self.features, records);
        match &self.estimator {
            Estimator::Knn(knn) => Ok(knn
                .predict_batch(&x, exec)?
                .iter()
                .map(|z| self.finish(z))
                .collect()),
            Estimator::Network(net) => {
                let out = net.predict(&to_f32(&x), records.len(), exec)?;
                Ok(out
                    .chunks_exact(LABEL_DIM)
                    .map(|z| self.finish(&z.iter().map(|&v| v as f64).collect::<Vec<_>>()))
                    .collect())
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let (spec, dtype, n_params, n_state, rows) = match &self.estimator {
            Estimator::Network(net) => (
                Some(net.spec().clone()),
                f32::DTYPE,
                net.params().len(),
                net.state().len(),
                0,
            ),
            Estimator::Knn(knn) => (None, f64::DTYPE, 0, 0, knn.len()),
        };
        let header = Header {
            meta: self.meta.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            bounds: self.bounds.clone(),
            spec,
            dtype: dtype.to_string(),
            n_params,
            n_state,
            knn_rows: rows,
            knn_k: match &self.estimator {
                Estimator::Knn(k) => k.k(),
                _ => 0,
            },
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Config(format!("model header: {e}")))?;
        let mut out = Vec::with_capacity(json.len() + 4 * n_params + 64);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        match &self.estimator {
            Estimator::Network(net) => {
                net.params().iter().chain(net.state()).for_each(|&v| v.write_le(&mut out));
            }
            Estimator::Knn(knn) => {
                knn.features().iter().for_each(|&v| v.write_le(&mut out));
                knn.labels().iter().flatten().for_each(|&v| v.write_le(&mut out));
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Model> {
        let bad = |reason: &str| Error::format(path, reason);
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(bad("not a model file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != MODEL_VERSION {
            return Err(Error::Version {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let body = bytes.get(20..).ok_or_else(|| bad("truncated"))?;
        let json = body.get(..hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| Error::format(path, e.to_string()))?;
        let mut tensors = &body[hlen..];
        let n_r = header.meta.n_r;
        if header.features.n_features() != n_r || header.features.std.len() != n_r {
            return Err(Error::shape(format!("{n_r} features"), header.features.n_features()));
        }

        let estimator = match header.meta.kind.architecture() {
            Some(arch) => {
                let spec = header.spec.clone().ok_or_else(|| bad("network without spec"))?;
                if spec.architecture != arch {
                    return Err(bad("spec does not match model kind"));
                }
                if spec.input_width != n_r {
                    return Err(Error::shape(format!("{n_r} inputs"), spec.input_width));
                }
                if header.dtype != f32::DTYPE {
                    return Err(bad("unsupported tensor dtype"));
                }
                let params = read_values::<f32>(&mut tensors, header.n_params).ok_or_else(|| bad("truncated"))?;
                let state = read_values::<f32>(&mut tensors, header.n_state).ok_or_else(|| bad("truncated"))?;
                Estimator::Network(Network::from_parts(spec, params, state)?)
            }
            None => {
                let rows = header.knn_rows;
                let f = read_values::<f64>(&mut tensors, rows * n_r).ok_or_else(|| bad("truncated"))?;
                let l = read_values::<f64>(&mut tensors, rows * LABEL_DIM).ok_or_else(|| bad("truncated"))?;
                let labels = l
                    .chunks_exact(LABEL_DIM)
                    .map(|c| c.try_into().expect("label width"))
                    .collect();
                Estimator::Knn(KnnModel::fit(f, labels, n_r, header.knn_k)?)
            }
        };
        if !tensors.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Model {
            meta: header.meta,
            features: header.features,
            labels: header.labels,
            bounds: header.bounds,
            estimator,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes, path)
    }

    /// `epoch,train_loss,val_loss` rows of the training history.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss\n");
        for e in &self.meta.history {
            let val = e.val.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{},{:e},{}\n", e.epoch, e.train, val));
        }
        s
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: ModelMeta,
    features: FeatureTransform,
    labels: LabelTransform,
    bounds: LabelBounds,
    spec: Option<ModelSpec>,
    dtype: String,
    n_params: usize,
    n_state: usize,
    knn_rows: usize,
    knn_k: usize,
}

fn read_values<T: Real>(bytes: &mut &[u8], count: usize) -> Option<Vec<T>> {
    let need = count.checked_mul(T::BYTES)?;
    if bytes.len() < need {
        return None;
    }
    let (head, rest) = bytes.split_at(need);
    *bytes = rest;
    Some(head.chunks_exact(T::BYTES).map(T::read_le).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::dataset::{generate_dataset, split, DEFAULT_SPLIT};

    fn small_split(n: usize) -> Split {
        let d = generate_dataset(&SimConfig::default(), n, ChannelFlag::Los, Execution::Parallel).unwrap();
        split(&d, DEFAULT_SPLIT, 1).unwrap()
    }

    fn quick() -> TrainOptions {
        TrainOptions {
            train: TrainConfig {
                epochs: 2,
                batch_size: 64,
                ..TrainConfig::default()
            },
            spec: None,
            ..TrainOptions::default()
        }
    }

    #[test]
    fn network_round_trip_and_determinism() {
        let s = small_split(400);
        let m = train_model(ModelKind::Mlp, &s, &quick(), Execution::Parallel, |_| {}).unwrap();
        let again = train_model(ModelKind::Mlp, &s, &quick(), Execution::Parallel, |_| {}).unwrap();
        assert_eq!(m.to_bytes().unwrap(), again.to_bytes().unwrap());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        m.save(&p).unwrap();
        let back = Model::load(&p).unwrap();
        assert_eq!(back, m);
        let a = m.predict_records(&s.test.records, Execution::Parallel).unwrap();
        let b = back.predict_records(&s.test.records, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        for (r, est) in s.test.records.iter().zip(&a) {
            let single = m.predict(&r.rho).unwrap();
            for k in 0..LABEL_DIM {
                assert!((single[k] - est[k]).abs() < 1e-4 * est[k].abs().max(1.0));
            }
            assert!((0.0..360.0).contains(&est[3]));
            assert!(est[0] >= m.bounds.lo[0] && est[0] <= m.bounds.hi[0]);
        }
        assert_eq!(m.meta.history.len(), 3);
        assert!(m.loss_csv().starts_with("epoch,train_loss,val_loss\n0,"));
    }

    #[test]
    fn knn_round_trip_and_memorization() {
        let s = small_split(300);
        let m = train_model(ModelKind::Knn, &s, &quick(), Execution::Parallel, |_| {}).unwrap();
        assert_eq!(m.meta.knn_scores.len(), 5);
        let bytes = m.to_bytes().unwrap();
        let back = Model::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, m);

        let mut exact = m.clone();
        if let Estimator::Knn(k) = &mut exact.estimator {
            k.set_k(1).unwrap();
        }
        let est = exact.predict_records(&s.train.records, Execution::Parallel).unwrap();
        for (r, e) in s.train.records.iter().zip(&est) {
            assert_eq!(&r.label, e);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let s = small_split(200);
        let m = train_model(ModelKind::Knn, &s, &quick(), Execution::Sequential, |_| {}).unwrap();
        let bytes = m.to_bytes().unwrap();
        let p = Path::new("x");
        assert!(Model::from_bytes(&bytes[..bytes.len() - 3], p).is_err());
        let mut v = bytes.clone();
        v[8] = 7;
        assert!(matches!(Model::from_bytes(&v, p), Err(Error::Version { found: 7, .. })));
        let mut v = bytes.clone();
        v[0] = b'X';
        assert!(Model::from_bytes(&v, p).is_err());

        // header claims a different AP count than the stored transform
        let text = String::from_utf8_lossy(&bytes[20..]).to_string();
        let hlen = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header = &text[..hlen].replace("\"n_r\":16", "\"n_r\":12");
        let mut v = bytes[..12].to_vec();
        v.extend_from_slice(&(header.len() as u64).to_le_bytes());
        v.extend_from_slice(header.as_bytes());
        v.extend_from_slice(&bytes[20 + hlen..]);
        assert!(matches!(Model::from_bytes(&v, p), Err(Error::Shape { .. })));
    }

    #[test]
    fn dataset_compatibility() {
        let s = small_split(200);
        let m = train_model(ModelKind::Knn, &s, &quick(), Execution::Sequential, |_| {}).unwrap();
        m.check_dataset(&s.test).unwrap();
        let mut other = SimConfig::default();
        other.room.reflectivity[0] = 0.5;
        let d = generate_dataset(&other, 5, ChannelFlag::Los, Execution::Sequential).unwrap();
        assert!(matches!(m.check_dataset(&d), Err(Error::HashMismatch { .. })));
        assert!(m.predict(&[1.0; 3]).is_err());
    }
}

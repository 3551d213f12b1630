//! `lifi`: generate fingerprint datasets, train estimators, and evaluate them.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numeric error.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lifi_core::dataset::{split, Dataset, DEFAULT_SPLIT};
use lifi_core::eval::{
    ber_csv, ber_curve, cdf_csv, default_snr_grid, online_latency_ms, table_report, ErrorReport, TableEntry,
};
use lifi_core::model::{train_model, Estimator, Model, ModelKind, TrainOptions};
use lifi_core::nn::TrainConfig;
use lifi_core::{ChannelFlag, ChannelModel, Error, ErrorClass, Execution, FingerprintRecord, Pose, SimConfig};

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "lifi", version, about = "Optical-wireless fingerprint simulation and pose estimation")]
struct Cli {
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a fingerprint dataset.
    Gen {
        /// Simulation config; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "full")]
        channel: ChannelFlag,
        /// Overrides the sampler seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an estimator on the training part of a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        /// Seeds weight initialization, shuffling and dropout.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Seeds the train/validation/test shuffle.
        #[arg(long, default_value_t = 1)]
        split_seed: u64,
        /// Regress labels in raw units instead of standardized ones.
        #[arg(long)]
        raw_labels: bool,
        /// Plain squared yaw difference in the loss, without wrapping.
        #[arg(long)]
        linear_yaw: bool,
        /// Fixed neighbour count for `knn` instead of validation selection.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score one or more models on a dataset.
    Eval {
        #[arg(long = "model", required = true)]
        models: Vec<PathBuf>,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::Test)]
        split: Part,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact versus pose-estimate bit error rate over a SNR grid.
    Ber {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Config the dataset was generated with; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `start:step:stop` in dB, or a comma-separated list.
        #[arg(long)]
        snr_grid: Option<String>,
        #[arg(long, value_enum, default_value_t = Part::Test)]
        split: Part,
        #[arg(long)]
        out: PathBuf,
    },
    /// Online single-point inference latency.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Part {
    Train,
    Test,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match run(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Io => 3,
        ErrorClass::Numeric => 4,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("LIFI_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("LIFI_THREADS must be a positive integer, got {v:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> lifi_core::Result<()> {
    fs::write(path, contents).map_err(io_err(path))
}

fn load_config(path: Option<&Path>) -> lifi_core::Result<(SimConfig, String)> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            Ok((SimConfig::parse(&text)?, manifest::sha256_hex(text.as_bytes())))
        }
        None => {
            let c = SimConfig::default();
            let hash = manifest::sha256_hex(c.to_text().as_bytes());
            Ok((c, hash))
        }
    }
}

/// Records of the chosen part, using the split seed stored in the model.
fn part_records(model: &Model, dataset: &Dataset, part: Part) -> lifi_core::Result<Vec<FingerprintRecord>> {
    if part == Part::All {
        return Ok(dataset.records.clone());
    }
    let s = split(dataset, DEFAULT_SPLIT, model.meta.split_seed.unwrap_or(1))?;
    Ok(match part {
        Part::Train => s.train.records,
        _ => s.test.records,
    })
}

fn parse_grid(spec: &str) -> lifi_core::Result<Vec<f64>> {
    let bad = || Error::Config(format!("bad SNR grid {spec:?}"));
    let nums = |sep: char| -> lifi_core::Result<Vec<f64>> {
        spec.split(sep)
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    if spec.contains(':') {
        let v = nums(':')?;
        let [start, step, stop] = v[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        nums(',')
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string()
}

fn run(command: Command, exec: Execution) -> lifi_core::Result<()> {
    let mut m = Manifest::start(std::env::args().collect());
    let out = match &command {
        Command::Gen { out, .. }
        | Command::Train { out, .. }
        | Command::Eval { out, .. }
        | Command::Ber { out, .. } => Some(out.clone()),
        Command::Bench { out, .. } => out.clone(),
    };
    if let Some(dir) = &out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    match command {
        Command::Gen {
            config,
            n,
            channel,
            seed,
            out,
        } => {
            let (mut cfg, hash) = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.sampler.seed = s;
            }
            m.config(config.as_deref(), hash);
            m.seed = Some(cfg.sampler.seed);
            let ds = lifi_core::dataset::generate_dataset(&cfg, n, channel, exec)?;
            let path = out.join("dataset.csv");
            ds.write(&path)?;
            m.artifact(&path)?;
            eprintln!("wrote {} records to {}", ds.len(), path.display());
        }
        Command::Train {
            dataset,
            model,
            epochs,
            batch_size,
            learning_rate,
            seed,
            split_seed,
            raw_labels,
            linear_yaw,
            k,
            out,
        } => {
            let ds = Dataset::read(&dataset)?;
            m.input(&dataset)?;
            m.seed = Some(seed);
            let s = split(&ds, DEFAULT_SPLIT, split_seed)?;
            let mut train = TrainConfig {
                seed,
                ..TrainConfig::default()
            };
            if let Some(e) = epochs {
                train.epochs = e;
            }
            if let Some(b) = batch_size {
                train.batch_size = b;
            }
            if let Some(lr) = learning_rate {
                train.adam.learning_rate = lr;
            }
            let options = TrainOptions {
                train,
                raw_labels,
                circular_yaw: !linear_yaw,
                ..TrainOptions::default()
            };
            let options = match k {
                Some(k) => TrainOptions {
                    k_candidates: vec![k],
                    ..options
                },
                None => options,
            };
            let mut trained = train_model(model, &s, &options, exec, |e| match e.val {
                Some(v) => eprintln!("epoch {:>3}: train {:.5} val {:.5}", e.epoch, e.train, v),
                None => eprintln!("epoch {:>3}: train {:.5}", e.epoch, e.train),
            })?;
            trained.meta.split_seed = Some(split_seed);
            if let Estimator::Knn(knn) = &trained.estimator {
                eprintln!("selected k = {}", knn.k());
            }
            let path = out.join(format!("{model}.model"));
            trained.save(&path)?;
            m.artifact(&path)?;
            if model != ModelKind::Knn {
                let loss = out.join("loss.csv");
                write_file(&loss, trained.loss_csv())?;
                m.artifact(&loss)?;
            }
        }
        Command::Eval {
            models,
            dataset,
            split: part,
            out,
        } => {
            let ds = Dataset::read(&dataset)?;
            m.input(&dataset)?;
            let mut entries = Vec::new();
            for path in &models {
                let model = Model::load(path)?;
                m.input(path)?;
                model.check_dataset(&ds)?;
                let records = part_records(&model, &ds, part)?;
                let est = model.predict_records(&records, exec)?;
                let truth: Vec<_> = records.iter().map(|r| r.label).collect();
                let report = ErrorReport::new(&truth, &est)?;
                let cdf = out.join(format!("cdf_{}.csv", file_stem(path)));
                write_file(&cdf, cdf_csv(&report.position))?;
                m.artifact(&cdf)?;
                entries.push(TableEntry {
                    method: model.kind().to_string(),
                    flag: model.meta.channel_flag,
                    train_size: model.meta.train_size,
                    report,
                });
            }
            let table = table_report(&entries);
            print!("{table}");
            let path = out.join("report.txt");
            write_file(&path, table)?;
            m.artifact(&path)?;
        }
        Command::Ber {
            model,
            dataset,
            config,
            snr_grid,
            split: part,
            out,
        } => {
            let (cfg, hash) = load_config(config.as_deref())?;
            m.config(config.as_deref(), hash);
            let ds = Dataset::read(&dataset)?;
            m.input(&dataset)?;
            let est_model = Model::load(&model)?;
            m.input(&model)?;
            est_model.check_dataset(&ds)?;
            if cfg.room_hash() != ds.metadata.room_hash {
                return Err(Error::HashMismatch {
                    model: cfg.room_hash(),
                    dataset: ds.metadata.room_hash.clone(),
                });
            }
            let grid = match snr_grid {
                Some(g) => parse_grid(&g)?,
                None => default_snr_grid(),
            };
            let records = part_records(&est_model, &ds, part)?;
            let truth: Vec<Pose> = records.iter().map(|r| r.pose()).collect();
            let est: Vec<Pose> = est_model
                .predict_records(&records, exec)?
                .iter()
                .map(|l| Pose::from_label(l))
                .collect();
            let flag = ds.metadata.channel_flag;
            let channel = ChannelModel::new(&cfg.room, &cfg.ue, flag)?;
            let curve = ber_curve(&channel, flag, &truth, &est, &grid, exec)?;
            let csv = ber_csv(&curve);
            print!("{csv}");
            let path = out.join("ber.csv");
            write_file(&path, csv)?;
            m.artifact(&path)?;
        }
        Command::Bench {
            model,
            dataset,
            queries,
            out,
        } => {
            let ds = Dataset::read(&dataset)?;
            let est_model = Model::load(&model)?;
            m.input(&dataset)?;
            m.input(&model)?;
            est_model.check_dataset(&ds)?;
            let rows: Vec<&[f64]> = ds
                .records
                .iter()
                .cycle()
                .take(queries + lifi_core::eval::WARMUP_QUERIES)
                .map(|r| r.rho.as_slice())
                .collect();
            let ms = online_latency_ms(&est_model, &rows)?;
            let line = format!(
                "{} N={} online {:.4} ms/point over {} queries\n",
                est_model.kind(),
                est_model.meta.train_size,
                ms,
                queries
            );
            print!("{line}");
            if let Some(dir) = &out {
                let path = dir.join("bench.txt");
                write_file(&path, line)?;
                m.artifact(&path)?;
            }
        }
    }
    if let Some(dir) = out {
        m.finish(&dir)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grid_forms() {
        assert_eq!(parse_grid("0:2:30").unwrap(), default_snr_grid());
        assert_eq!(parse_grid("5, 10,20").unwrap(), vec![5.0, 10.0, 20.0]);
        assert_eq!(parse_grid("0:0.5:1").unwrap(), vec![0.0, 0.5, 1.0]);
        for bad in ["0:0:10", "10:1:0", "a,b", "1:2"] {
            assert!(matches!(parse_grid(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}

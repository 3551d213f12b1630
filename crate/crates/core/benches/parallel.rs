use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lifi_core::channel::{ChannelModel, RadiosityCache};
use lifi_core::dataset::{generate_with_model, split, DEFAULT_SPLIT};
use lifi_core::model::{train_model, ModelKind, TrainOptions};
use lifi_core::nn::TrainConfig;
use lifi_core::{ChannelFlag, Execution, SimConfig};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(exec: Execution) -> &'static str {
    match exec {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn bench(c: &mut Criterion) {
    let config = SimConfig::default();
    let cache = Arc::new(RadiosityCache::build(&config.room).unwrap());
    let channel = ChannelModel::with_cache(&config.room, &config.ue, cache).unwrap();

    let mut g = c.benchmark_group("generate_2000");
    g.sample_size(10);
    for exec in MODES {
        g.bench_function(BenchmarkId::from_parameter(label(exec)), |b| {
            b.iter(|| generate_with_model(&config, &channel, 2_000, ChannelFlag::Full, exec).unwrap())
        });
    }
    g.finish();

    let data = generate_with_model(&config, &channel, 10_000, ChannelFlag::Full, Execution::Parallel).unwrap();
    let s = split(&data, DEFAULT_SPLIT, 1).unwrap();
    let options = TrainOptions {
        train: TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        },
        ..TrainOptions::default()
    };
    for kind in [ModelKind::Knn, ModelKind::Cnn] {
        let model = train_model(kind, &s, &options, Execution::Parallel, |_| {}).unwrap();
        let mut g = c.benchmark_group(format!("predict_{kind}_1000"));
        g.sample_size(10);
        for exec in MODES {
            g.bench_function(BenchmarkId::from_parameter(label(exec)), |b| {
                b.iter(|| model.predict_records(&s.test.records, exec).unwrap())
            });
        }
        g.finish();
    }
}

criterion_group!(benches, bench);
criterion_main!(benches);

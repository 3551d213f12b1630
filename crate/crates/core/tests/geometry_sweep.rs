//! Estimation gets worse in a larger room and with fewer access points.

use lifi_core::dataset::{generate_dataset, split, DEFAULT_SPLIT};
use lifi_core::eval::ErrorReport;
use lifi_core::model::{train_model, ModelKind, TrainOptions};
use lifi_core::{ChannelFlag, Execution, SimConfig};

fn knn_error(config: &SimConfig) -> f64 {
    let ds = generate_dataset(config, 6_000, ChannelFlag::Los, Execution::Parallel).unwrap();
    let s = split(&ds, DEFAULT_SPLIT, 1).unwrap();
    let m = train_model(ModelKind::Knn, &s, &TrainOptions::default(), Execution::Parallel, |_| {}).unwrap();
    let est = m.predict_records(&s.test.records, Execution::Parallel).unwrap();
    ErrorReport::new(&s.test.labels(), &est).unwrap().position_summary().mean
}

#[test]
fn larger_room_is_harder() {
    let base = knn_error(&SimConfig::default());
    let big = knn_error(&SimConfig::parse("room_l = 8\nroom_w = 8\n").unwrap());
    assert!(big > base, "5x5 m: {base:.2} cm, 8x8 m: {big:.2} cm");
}

#[test]
fn fewer_access_points_is_harder() {
    let base = knn_error(&SimConfig::default());
    let sparse = knn_error(&SimConfig::parse("n_aps = 4\n").unwrap());
    assert!(sparse > base, "16 APs: {base:.2} cm, 4 APs: {sparse:.2} cm");
}

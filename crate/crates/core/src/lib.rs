//! Simulation of indoor optical-wireless uplink SNR fingerprints and joint
//! position/orientation estimation from them.
//!
//! The pipeline: [`sampling`] draws device poses, [`channel`] turns a pose
//! into per-AP gains (direct path plus diffuse room reflections), [`dataset`]
//! stores SNR vectors with their poses, [`model`] trains a network or KNN
//! regressor, and [`eval`] scores it.

pub mod channel;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod knn;
pub mod model;
pub mod nn;
pub mod par;
pub mod pose;
pub mod sampling;
pub mod transform;

pub use channel::{ChannelFlag, ChannelModel};
pub use config::{RoomConfig, SimConfig, UeGeometry, Vec3};
pub use dataset::{Dataset, FingerprintRecord, Split};
pub use error::{Error, ErrorClass, Result};
pub use model::{Model, ModelKind, TrainOptions};
pub use par::Execution;
pub use pose::Pose;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::radiosity::{dot, RadiosityCache};
use super::{lambertian_order, led_state, los_gain, snr_vector, Emitter, Receiver};
use crate::config::{RoomConfig, UeGeometry};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Which propagation paths contribute to a channel gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelFlag {
    /// Line of sight only.
    Los,
    /// Line of sight plus all diffuse reflections.
    Full,
}

impl ChannelFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelFlag::Los => "los",
            ChannelFlag::Full => "full",
        }
    }
}

impl fmt::Display for ChannelFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelFlag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(ChannelFlag::Los),
            "full" | "los+nlos" => Ok(ChannelFlag::Full),
            other => Err(Error::Config(format!("unknown channel flag {other:?} (los|full)"))),
        }
    }
}

/// Uplink and downlink channel evaluator for one room and device design.
///
/// With a radiosity cache attached, the per-AP diffuse response is folded into
/// one vector per AP and direction, so a diffuse gain costs one pass over the
/// `K` patches instead of a `K x K` product.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    room: RoomConfig,
    ue: UeGeometry,
    led_order: f64,
    cache: Option<Arc<RadiosityCache>>,
    // Sᵀ r_i for each AP photodiode
    uplink_adjoint: Vec<Vec<f64>>,
    // S t_i for each AP LED
    downlink_exitance: Vec<Vec<f64>>,
}

impl ChannelModel {
    pub fn new(room: &RoomConfig, ue: &UeGeometry, flag: ChannelFlag) -> Result<Self> {
        match flag {
            ChannelFlag::Los => Self::los_only(room, ue),
            ChannelFlag::Full => {
                let cache = Arc::new(RadiosityCache::build(room)?);
                Self::with_cache(room, ue, cache)
            }
        }
    }

    pub fn los_only(room: &RoomConfig, ue: &UeGeometry) -> Result<Self> {
        room.validate()?;
        ue.validate()?;
        Ok(ChannelModel {
            room: room.clone(),
            ue: ue.clone(),
            led_order: lambertian_order(room.half_power_semiangle_deg)?,
            cache: None,
            uplink_adjoint: Vec::new(),
            downlink_exitance: Vec::new(),
        })
    }

    /// Attaches a prebuilt cache; it must come from the same room.
    pub fn with_cache(room: &RoomConfig, ue: &UeGeometry, cache: Arc<RadiosityCache>) -> Result<Self> {
        let mut model = Self::los_only(room, ue)?;
        let mut uplink = Vec::with_capacity(room.n_aps());
        let mut downlink = Vec::with_capacity(room.n_aps());
        for i in 0..room.n_aps() {
            let r = cache.collection(&model.ap_receiver(i))?;
            uplink.push(cache.adjoint(&r));
            let t = cache.incident(&model.ap_emitter(i))?;
            downlink.push(cache.apply(&t));
        }
        model.uplink_adjoint = uplink;
        model.downlink_exitance = downlink;
        model.cache = Some(cache);
        Ok(model)
    }

    pub fn room(&self) -> &RoomConfig {
        &self.room
    }

    pub fn ue(&self) -> &UeGeometry {
        &self.ue
    }

    pub fn led_order(&self) -> f64 {
        self.led_order
    }

    pub fn cache(&self) -> Option<&Arc<RadiosityCache>> {
        self.cache.as_ref()
    }

    /// The richest flag this model can evaluate.
    pub fn flag(&self) -> ChannelFlag {
        if self.cache.is_some() {
            ChannelFlag::Full
        } else {
            ChannelFlag::Los
        }
    }

    pub fn ap_receiver(&self, i: usize) -> Receiver {
        Receiver::new(
            self.room.ap_positions[i],
            self.room.ap_normals[i],
            self.room.pd_area,
            self.room.pd_fov_deg,
        )
    }

    /// AP lamp, co-located with its photodiode.
    pub fn ap_emitter(&self, i: usize) -> Emitter {
        Emitter::new(
            self.room.ap_positions[i],
            self.room.ap_normals[i],
            self.led_order,
            self.room.led_fov_deg,
        )
    }

    pub fn led_emitter(&self, pose: &Pose, j: usize) -> Emitter {
        let (p, n) = led_state(pose, &self.ue, j);
        Emitter::new(p, n, self.led_order, self.room.led_fov_deg)
    }

    /// Device photodiode `j`, co-located with LED `j`.
    pub fn ue_receiver(&self, pose: &Pose, j: usize) -> Receiver {
        let (p, n) = led_state(pose, &self.ue, j);
        Receiver::new(p, n, self.room.pd_area, self.room.pd_fov_deg)
    }

    fn require(&self, flag: ChannelFlag) -> Result<()> {
        if flag == ChannelFlag::Full && self.cache.is_none() {
            return Err(Error::Config("diffuse gains need a radiosity cache".into()));
        }
        Ok(())
    }

    /// Uplink channel matrix, `N_r x N_t`.
    pub fn channel_matrix(&self, pose: &Pose, flag: ChannelFlag) -> Result<DMatrix<f64>> {
        self.require(flag)?;
        let (nr, nt) = (self.room.n_aps(), self.ue.n_leds());
        let mut h = DMatrix::zeros(nr, nt);
        for j in 0..nt {
            let tx = self.led_emitter(pose, j);
            for i in 0..nr {
                h[(i, j)] = los_gain(&tx, &self.ap_receiver(i))?;
            }
            if flag == ChannelFlag::Full {
                let cache = self.cache.as_ref().expect("checked above");
                let t = cache.incident(&tx)?;
                for i in 0..nr {
                    h[(i, j)] += dot(&self.uplink_adjoint[i], &t);
                }
            }
        }
        Ok(h)
    }

    /// Received uplink SNR at every AP for transmit power `p_elec`.
    pub fn snr(&self, pose: &Pose, p_elec: f64, flag: ChannelFlag) -> Result<Vec<f64>> {
        let h = self.channel_matrix(pose, flag)?;
        Ok(snr_vector(&h, p_elec, &self.room))
    }

    /// Downlink matrix, `N_r x N_t`: AP lamp `i` to device photodiode `j`.
    pub fn downlink_matrix(&self, pose: &Pose, flag: ChannelFlag) -> Result<DMatrix<f64>> {
        self.require(flag)?;
        let (nr, nt) = (self.room.n_aps(), self.ue.n_leds());
        let mut h = DMatrix::zeros(nr, nt);
        for j in 0..nt {
            let rx = self.ue_receiver(pose, j);
            for i in 0..nr {
                h[(i, j)] = los_gain(&self.ap_emitter(i), &rx)?;
            }
            if flag == ChannelFlag::Full {
                let cache = self.cache.as_ref().expect("checked above");
                let r = cache.collection(&rx)?;
                for i in 0..nr {
                    h[(i, j)] += dot(&r, &self.downlink_exitance[i]);
                }
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{SimConfig, Vec3};

    fn pose(x: f64, y: f64, z: f64, yaw: f64, pitch: f64, roll: f64) -> Pose {
        Pose {
            x,
            y,
            z,
            yaw,
            pitch,
            roll,
            heading: 0.0,
        }
    }

    #[test]
    fn full_flag_needs_cache() {
        let c = SimConfig::default();
        let m = ChannelModel::los_only(&c.room, &c.ue).unwrap();
        assert!(m.channel_matrix(&pose(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), ChannelFlag::Full).is_err());
        assert_eq!("full".parse::<ChannelFlag>().unwrap(), ChannelFlag::Full);
        assert!("nlos".parse::<ChannelFlag>().is_err());
    }

    #[test]
    fn floor_facing_led_sees_no_ap() {
        let c = SimConfig::default();
        let m = ChannelModel::los_only(&c.room, &c.ue).unwrap();
        // pitch 180 flips the LED to face the floor
        let h = m.channel_matrix(&pose(0.3, -0.2, 1.0, 0.0, -180.0, 0.0), ChannelFlag::Los).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nearest_ap_dominates_aligned_pose() {
        let c = SimConfig::default();
        let m = ChannelModel::los_only(&c.room, &c.ue).unwrap();
        let ap0 = c.room.ap_positions[0];
        // LED (6 cm along +y) right below AP 0
        let p = pose(ap0.x, ap0.y - 0.06, 1.0, 0.0, 0.0, 0.0);
        let h = m.channel_matrix(&p, ChannelFlag::Los).unwrap();
        // independent evaluation of the LOS formula for every AP
        let led = Vec3::new(ap0.x, ap0.y, 1.0);
        let mut oracle = Vec::new();
        for ap in &c.room.ap_positions {
            let d = ap - led;
            let cos = d.z / d.norm();
            oracle.push(2.0 * 1e-4 / (2.0 * std::f64::consts::PI * d.norm_squared()) * cos * cos);
        }
        for i in 0..16 {
            assert!((h[(i, 0)] - oracle[i]).abs() < 1e-15, "{i}");
            assert!(h[(0, 0)] >= h[(i, 0)]);
        }
    }

    #[test]
    fn full_dominates_los_and_zero_zeta_collapses() {
        let c = SimConfig::default();
        let full = ChannelModel::new(&c.room, &c.ue, ChannelFlag::Full).unwrap();
        let p = pose(0.7, -1.2, 0.9, 200.0, 41.0, -1.0);
        let hl = full.channel_matrix(&p, ChannelFlag::Los).unwrap();
        let hf = full.channel_matrix(&p, ChannelFlag::Full).unwrap();
        for (a, b) in hl.iter().zip(hf.iter()) {
            assert!(b > a, "{b} <= {a}");
        }

        let mut dark = c.room.clone();
        dark.reflectivity = [0.0; 6];
        let m0 = ChannelModel::new(&dark, &c.ue, ChannelFlag::Full).unwrap();
        assert_eq!(
            m0.channel_matrix(&p, ChannelFlag::Full).unwrap(),
            m0.channel_matrix(&p, ChannelFlag::Los).unwrap()
        );
    }

    #[test]
    fn folded_route_matches_direct_route() {
        let c = SimConfig::default();
        let m = ChannelModel::new(&c.room, &c.ue, ChannelFlag::Full).unwrap();
        let cache = m.cache().unwrap();
        let p = pose(-1.1, 0.4, 1.3, 75.0, 38.0, 2.0);
        let h = m.channel_matrix(&p, ChannelFlag::Full).unwrap();
        let tx = m.led_emitter(&p, 0);
        for i in 0..16 {
            let rx = m.ap_receiver(i);
            let direct = los_gain(&tx, &rx).unwrap() + cache.nlos_gain(&tx, &rx).unwrap();
            assert!((h[(i, 0)] - direct).abs() < 1e-12 * direct);
        }
        let hd = m.downlink_matrix(&p, ChannelFlag::Full).unwrap();
        let rx = m.ue_receiver(&p, 0);
        for i in 0..16 {
            let tx = m.ap_emitter(i);
            let direct = los_gain(&tx, &rx).unwrap() + cache.nlos_gain(&tx, &rx).unwrap();
            assert!((hd[(i, 0)] - direct).abs() < 1e-12 * direct.max(1e-30));
        }
    }

    #[test]
    fn downlink_is_reciprocal_for_unit_order() {
        // Φ½ = 60° gives m = 1 at both ends and equal areas, so the links are reciprocal
        let c = SimConfig::default();
        let m = ChannelModel::new(&c.room, &c.ue, ChannelFlag::Full).unwrap();
        let p = pose(1.4, 0.2, 0.6, 310.0, 42.0, -3.0);
        let up = m.channel_matrix(&p, ChannelFlag::Full).unwrap();
        let down = m.downlink_matrix(&p, ChannelFlag::Full).unwrap();
        for (a, b) in up.iter().zip(down.iter()) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1e-20), "{a} vs {b}");
        }
    }
}

//! Optical wireless channel: Lambertian line-of-sight gains, device rotation,
//! infinite-bounce diffuse gains and received SNR.

mod model;
pub mod radiosity;

pub use model::{ChannelFlag, ChannelModel};
pub use radiosity::{discretize_room, Elements, RadiosityCache};

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3};

use crate::config::{RoomConfig, UeGeometry, Vec3};
use crate::error::{Error, Result};
use crate::pose::Pose;

/// Links shorter than this are treated as a configuration bug.
pub const MIN_LINK_DISTANCE: f64 = 1e-9;

/// Lambertian emission order `m = -1 / log2(cos Φ½)`.
pub fn lambertian_order(half_power_semiangle_deg: f64) -> Result<f64> {
    if !(half_power_semiangle_deg > 0.0 && half_power_semiangle_deg < 90.0) {
        return Err(Error::Domain {
            what: "half-power semi-angle",
            value: half_power_semiangle_deg,
            domain: "(0, 90) degrees",
        });
    }
    Ok(-1.0 / half_power_semiangle_deg.to_radians().cos().log2())
}

/// Device rotation `R = R_yaw · R_pitch · R_roll` (rotations about z, x and y).
pub fn rotation_matrix(yaw_deg: f64, pitch_deg: f64, roll_deg: f64) -> Matrix3<f64> {
    let (sa, ca) = yaw_deg.to_radians().sin_cos();
    let (sb, cb) = pitch_deg.to_radians().sin_cos();
    let (sg, cg) = roll_deg.to_radians().sin_cos();
    #[rustfmt::skip]
    let r_yaw = Matrix3::new(
        ca, -sa, 0.0,
        sa,  ca, 0.0,
        0.0, 0.0, 1.0,
    );
    #[rustfmt::skip]
    let r_pitch = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0,  cb, -sb,
        0.0,  sb,  cb,
    );
    #[rustfmt::skip]
    let r_roll = Matrix3::new(
         cg, 0.0,  sg,
        0.0, 1.0, 0.0,
        -sg, 0.0,  cg,
    );
    r_yaw * r_pitch * r_roll
}

/// World position and unit normal of LED `j` of a device at `pose`.
pub fn led_state(pose: &Pose, geom: &UeGeometry, j: usize) -> (Vec3, Vec3) {
    let r = rotation_matrix(pose.yaw, pose.pitch, pose.roll);
    let centre = Vec3::new(pose.x, pose.y, pose.z);
    let position = centre + r * geom.led_offsets[j];
    let normal = (r * geom.led_normals[j]).normalize();
    (position, normal)
}

/// A Lambertian source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub position: Vec3,
    pub normal: Vec3,
    pub order: f64,
    pub cos_fov: f64,
}

impl Emitter {
    pub fn new(position: Vec3, normal: Vec3, order: f64, fov_deg: f64) -> Self {
        Emitter {
            position,
            normal,
            order,
            cos_fov: fov_deg.to_radians().cos(),
        }
    }
}

/// A flat detector with a cosine response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub position: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub cos_fov: f64,
}

impl Receiver {
    pub fn new(position: Vec3, normal: Vec3, area: f64, fov_deg: f64) -> Self {
        Receiver {
            position,
            normal,
            area,
            cos_fov: fov_deg.to_radians().cos(),
        }
    }
}

/// DC line-of-sight gain `(m+1)A / (2π d²) · cos^m φ · cos ψ`, zero outside
/// either field of view.
pub fn los_gain(tx: &Emitter, rx: &Receiver) -> Result<f64> {
    let d = rx.position - tx.position;
    let dist2 = d.norm_squared();
    let dist = dist2.sqrt();
    if dist < MIN_LINK_DISTANCE {
        return Err(Error::DegenerateDistance { distance: dist });
    }
    let cos_phi = tx.normal.dot(&d) / dist;
    let cos_psi = -rx.normal.dot(&d) / dist;
    if cos_phi <= 0.0 || cos_psi <= 0.0 || cos_phi < tx.cos_fov || cos_psi < rx.cos_fov {
        return Ok(0.0);
    }
    let lobe = if tx.order == 1.0 { cos_phi } else { cos_phi.powf(tx.order) };
    Ok((tx.order + 1.0) * rx.area / (2.0 * PI * dist2) * lobe * cos_psi)
}

/// Received SNR per AP: `ρ_i = (λ Σ_j H_ij)² P / (N₀B)`.
pub fn snr_vector(h: &DMatrix<f64>, p_elec: f64, room: &RoomConfig) -> Vec<f64> {
    let scale = p_elec / room.noise_variance();
    h.row_iter()
        .map(|row| {
            let amp = room.conversion_gain * row.sum();
            amp * amp * scale
        })
        .collect()
}

/// M-PAM intensity levels `I_m = (2m - (M+1)) / (M+1) · I_DC`, `m = 1..M`.
pub fn pam_levels(order: usize, i_dc: f64) -> Vec<f64> {
    let m1 = (order + 1) as f64;
    (1..=order).map(|m| (2.0 * m as f64 - m1) / m1 * i_dc).collect()
}

/// Electrical power of an M-PAM signal, `I_DC²/3 · (M-1)/(M+1)`.
pub fn pam_power(order: usize, i_dc: f64) -> f64 {
    i_dc * i_dc / 3.0 * (order as f64 - 1.0) / (order as f64 + 1.0)
}

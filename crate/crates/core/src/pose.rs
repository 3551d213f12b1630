use serde::{Deserialize, Serialize};

/// Position (m) and orientation (deg) of the user device.
///
/// Yaw lies in `[0, 360)`, pitch in `[-180, 180)`, roll in `[-90, 90)`.
/// `heading` is the movement direction Ω the yaw was drawn around; it is not
/// part of the estimation label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub heading: f64,
}

/// Number of label components: `x, y, z, yaw, pitch, roll`.
pub const LABEL_DIM: usize = 6;

/// Label component indices.
pub mod label {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const Z: usize = 2;
    pub const YAW: usize = 3;
    pub const PITCH: usize = 4;
    pub const ROLL: usize = 5;
    pub const NAMES: [&str; 6] = ["x", "y", "z", "alpha", "beta", "gamma"];
}

impl Pose {
    pub fn label(&self) -> [f64; LABEL_DIM] {
        [self.x, self.y, self.z, self.yaw, self.pitch, self.roll]
    }

    /// Pose from a label; the heading is unknown and set to `yaw + 90`.
    pub fn from_label(l: &[f64]) -> Self {
        Pose {
            x: l[0],
            y: l[1],
            z: l[2],
            yaw: l[3],
            pitch: l[4],
            roll: l[5],
            heading: wrap_degrees(l[3] + 90.0),
        }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Reduces an angle into `[0, 360)`.
pub fn wrap_degrees(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Reduces an angle into `[-180, 180)`.
pub fn wrap_signed_degrees(a: f64) -> f64 {
    wrap_degrees(a + 180.0) - 180.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_into_ranges() {
        assert_eq!(wrap_degrees(-90.0), 270.0);
        assert_eq!(wrap_degrees(360.0), 0.0);
        assert_eq!(wrap_degrees(725.0), 5.0);
        assert!(wrap_degrees(-1e-300) < 360.0);
        assert_eq!(wrap_signed_degrees(180.0), -180.0);
        assert_eq!(wrap_signed_degrees(-190.0), 170.0);
    }

    #[test]
    fn label_round_trip() {
        let p = Pose {
            x: 1.0,
            y: -2.0,
            z: 0.5,
            yaw: 10.0,
            pitch: 40.0,
            roll: -1.0,
            heading: 100.0,
        };
        assert_eq!(Pose::from_label(&p.label()), p);
    }
}

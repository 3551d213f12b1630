//! Simulation configuration: room geometry, optics, device geometry and
//! sampler parameters.
//!
//! Configurations are stored as flat `key = value` text. Lines starting with
//! `#` are comments. Vector values are comma separated (`0, 0.06, 0`) and
//! explicit AP positions are `;` separated triples. Every key is optional;
//! missing keys keep the defaults of [`SimConfig::default`].
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `room_l`, `room_w`, `room_h` | room length / width / height (m) | 5, 5, 3 |
//! | `n_aps` | number of ceiling APs (square lattice when `ap_grid = auto`) | 16 |
//! | `ap_grid` | `auto` | `auto` |
//! | `ap_positions` | explicit `x,y,z; x,y,z; ...` (overrides the lattice) | |
//! | `phi_half_deg` | LED half-power semi-angle (deg) | 60 |
//! | `fov_led_deg`, `fov_pd_deg` | LED / PD field of view (deg) | 90, 90 |
//! | `pd_area_m2` | PD area (m^2) | 1e-4 |
//! | `responsivity` | PD responsivity (A/W) | 0.6 |
//! | `conversion_gain` | overall electro-optical gain λ | = `responsivity` |
//! | `zeta` | reflectivity of every surface | 0.7 |
//! | `zeta_floor`, `zeta_ceiling`, `zeta_walls` | per-surface overrides | |
//! | `element_res_m` | radiosity element size (m) | 0.5 |
//! | `max_elements` | cap on the number of radiosity elements | 20000 |
//! | `n0_w_per_hz`, `bandwidth_hz` | noise PSD (W/Hz), bandwidth (Hz) | 1e-21, 1e7 |
//! | `h_device_m` | maximum UE height (m) | 1.5 |
//! | `p_elec_max_w` | maximum UE electrical power (W) | 0.01 |
//! | `ue_led_offset_m` | LED offset in the device frame (m) | `0, 0.06, 0` |
//! | `ue_led_normal` | LED normal in the device frame | `0, 0, 1` |
//! | `ue_dims_m` | device bounding box (m) | `0.07, 0.14, 0.01` |
//! | `seed` | sampler seed | 1 |
//! | `alpha_offset_deg`, `alpha_std_deg` | yaw mean offset from Ω, yaw std | -90, 3.67 |
//! | `beta_mean_deg`, `beta_std_deg` | pitch mean / std | 40.78, 2.39 |
//! | `gamma_mean_deg`, `gamma_std_deg` | roll mean / std | -0.84, 2.21 |

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// The six interior surfaces of the room.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Ceiling,
    WallXMin,
    WallXMax,
    WallYMin,
    WallYMax,
}

impl Surface {
    pub const ALL: [Surface; 6] = [
        Surface::Floor,
        Surface::Ceiling,
        Surface::WallXMin,
        Surface::WallXMax,
        Surface::WallYMin,
        Surface::WallYMax,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Unit normal pointing into the room.
    pub fn inward_normal(self) -> Vec3 {
        match self {
            Surface::Floor => Vec3::new(0.0, 0.0, 1.0),
            Surface::Ceiling => Vec3::new(0.0, 0.0, -1.0),
            Surface::WallXMin => Vec3::new(1.0, 0.0, 0.0),
            Surface::WallXMax => Vec3::new(-1.0, 0.0, 0.0),
            Surface::WallYMin => Vec3::new(0.0, 1.0, 0.0),
            Surface::WallYMax => Vec3::new(0.0, -1.0, 0.0),
        }
    }
}

/// Room geometry, AP layout and optical/noise constants.
///
/// Coordinates are room-centred in x and y (`-L/2..L/2`, `-W/2..W/2`), with the
/// floor at `z = 0` and the ceiling at `z = H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoomConfig {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub ap_positions: Vec<Vec3>,
    pub ap_normals: Vec<Vec3>,
    pub half_power_semiangle_deg: f64,
    pub led_fov_deg: f64,
    pub pd_fov_deg: f64,
    pub pd_area: f64,
    pub responsivity: f64,
    /// Overall gain λ = T·R_p·η; defaults to the responsivity (T = η = 1).
    pub conversion_gain: f64,
    /// Reflectivity per surface, indexed by [`Surface::index`].
    pub reflectivity: [f64; 6],
    pub element_resolution: f64,
    pub max_elements: usize,
    pub noise_psd: f64,
    pub bandwidth: f64,
}

impl RoomConfig {
    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }

    /// Down-facing APs on a cell-centred `s x s` lattice on the ceiling.
    pub fn square_lattice(length: f64, width: f64, height: f64, n_aps: usize) -> Result<Vec<Vec3>> {
        let side = (n_aps as f64).sqrt().round() as usize;
        if side == 0 || side * side != n_aps {
            return Err(Error::Config(format!(
                "n_aps = {n_aps} is not a perfect square; give ap_positions explicitly"
            )));
        }
        let mut out = Vec::with_capacity(n_aps);
        for iy in 0..side {
            for ix in 0..side {
                let x = -length / 2.0 + (ix as f64 + 0.5) * length / side as f64;
                let y = -width / 2.0 + (iy as f64 + 0.5) * width / side as f64;
                out.push(Vec3::new(x, y, height));
            }
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("room_l", self.length),
            ("room_w", self.width),
            ("room_h", self.height),
            ("pd_area_m2", self.pd_area),
            ("element_res_m", self.element_resolution),
            ("bandwidth_hz", self.bandwidth),
            ("n0_w_per_hz", self.noise_psd),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.half_power_semiangle_deg > 0.0 && self.half_power_semiangle_deg < 90.0) {
            return Err(Error::Config(format!(
                "phi_half_deg must be in (0, 90), got {}",
                self.half_power_semiangle_deg
            )));
        }
        for (name, v) in [("fov_led_deg", self.led_fov_deg), ("fov_pd_deg", self.pd_fov_deg)] {
            if !(v > 0.0 && v <= 90.0) {
                return Err(Error::Config(format!("{name} must be in (0, 90], got {v}")));
            }
        }
        for (s, z) in Surface::ALL.iter().zip(self.reflectivity) {
            if !(0.0..1.0).contains(&z) {
                return Err(Error::Config(format!("reflectivity of {s:?} must be in [0, 1), got {z}")));
            }
        }
        if self.ap_positions.is_empty() {
            return Err(Error::Config("at least one AP is required".into()));
        }
        if self.ap_positions.len() != self.ap_normals.len() {
            return Err(Error::Config("ap_positions and ap_normals differ in length".into()));
        }
        for n in &self.ap_normals {
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("AP normal {n:?} is not unit length")));
            }
        }
        for p in &self.ap_positions {
            if p.x.abs() > self.length / 2.0 + 1e-12
                || p.y.abs() > self.width / 2.0 + 1e-12
                || p.z < 0.0
                || p.z > self.height + 1e-12
            {
                return Err(Error::Config(format!("AP position {p:?} is outside the room")));
            }
        }
        Ok(())
    }
}

/// Transmitter layout of the user device.
#[derive(Debug, Clone, PartialEq)]
pub struct UeGeometry {
    pub led_offsets: Vec<Vec3>,
    pub led_normals: Vec<Vec3>,
    /// Bounding box (x, y, z extents) of the device in metres.
    pub dimensions: Vec3,
}

impl Default for UeGeometry {
    fn default() -> Self {
        // 14 x 7 x 1 cm phone, LED on the screen 6 cm above the centre
        UeGeometry {
            led_offsets: vec![Vec3::new(0.0, 0.06, 0.0)],
            led_normals: vec![Vec3::new(0.0, 0.0, 1.0)],
            dimensions: Vec3::new(0.07, 0.14, 0.01),
        }
    }
}

impl UeGeometry {
    pub fn n_leds(&self) -> usize {
        self.led_offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.led_offsets.is_empty() || self.led_offsets.len() != self.led_normals.len() {
            return Err(Error::Config("device needs matching LED offsets and normals".into()));
        }
        for n in &self.led_normals {
            if (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("LED normal {n:?} is not unit length")));
            }
        }
        let half = self.dimensions / 2.0;
        for o in &self.led_offsets {
            if o.x.abs() > half.x + 1e-12 || o.y.abs() > half.y + 1e-12 || o.z.abs() > half.z + 1e-12 {
                return Err(Error::Config(format!("LED offset {o:?} lies outside the device")));
            }
        }
        Ok(())
    }
}

/// Mean, standard deviation and support of one orientation angle (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleStats {
    pub mean: f64,
    pub std: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Measured orientation statistics. Yaw is centred on `Ω + yaw_offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationStats {
    pub yaw_offset: f64,
    pub yaw_std: f64,
    pub pitch: AngleStats,
    pub roll: AngleStats,
}

impl Default for OrientationStats {
    fn default() -> Self {
        OrientationStats {
            yaw_offset: -90.0,
            yaw_std: 3.67,
            pitch: AngleStats {
                mean: 40.78,
                std: 2.39,
                lo: -180.0,
                hi: 180.0,
            },
            roll: AngleStats {
                mean: -0.84,
                std: 2.21,
                lo: -90.0,
                hi: 90.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub h_device: f64,
    pub p_elec_max: f64,
    pub orientation: OrientationStats,
}

/// Everything needed to generate a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub room: RoomConfig,
    pub ue: UeGeometry,
    pub sampler: SamplerConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        let (l, w, h) = (5.0, 5.0, 3.0);
        let aps = RoomConfig::square_lattice(l, w, h, 16).expect("16 is a square");
        SimConfig {
            room: RoomConfig {
                length: l,
                width: w,
                height: h,
                ap_normals: vec![Vec3::new(0.0, 0.0, -1.0); aps.len()],
                ap_positions: aps,
                half_power_semiangle_deg: 60.0,
                led_fov_deg: 90.0,
                pd_fov_deg: 90.0,
                pd_area: 1e-4,
                responsivity: 0.6,
                conversion_gain: 0.6,
                reflectivity: [0.7; 6],
                element_resolution: 0.5,
                max_elements: 20_000,
                noise_psd: 1e-21,
                bandwidth: 1e7,
            },
            ue: UeGeometry::default(),
            sampler: SamplerConfig {
                seed: 1,
                h_device: 1.5,
                p_elec_max: 0.01,
                orientation: OrientationStats::default(),
            },
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?} as a number")))
}

fn parse_vec3(key: &str, v: &str) -> Result<Vec3> {
    let parts: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("{key}: expected three comma separated values, got {v:?}")));
    }
    Ok(Vec3::new(
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
        parse_f64(key, parts[2])?,
    ))
}

fn fmt_vec3(v: &Vec3) -> String {
    format!("{:?}, {:?}, {:?}", v.x, v.y, v.z)
}

impl SimConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Parses flat `key = value` text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SimConfig::default();
        let mut n_aps: Option<usize> = None;
        let mut explicit_aps: Option<Vec<Vec3>> = None;
        let mut zeta_all: Option<f64> = None;
        let (mut zeta_floor, mut zeta_ceiling, mut zeta_walls) = (None, None, None);
        let mut conversion_gain: Option<f64> = None;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let room = &mut cfg.room;
            let sampler = &mut cfg.sampler;
            match key {
                "room_l" => room.length = parse_f64(key, value)?,
                "room_w" => room.width = parse_f64(key, value)?,
                "room_h" => room.height = parse_f64(key, value)?,
                "n_aps" => {
                    n_aps = Some(value.parse().map_err(|_| {
                        Error::Config(format!("n_aps: cannot parse {value:?} as a count"))
                    })?)
                }
                "ap_grid" => {
                    if value != "auto" {
                        return Err(Error::Config(format!("ap_grid: only `auto` is supported, got {value:?}")));
                    }
                }
                "ap_positions" => {
                    let aps = value
                        .split(';')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|p| parse_vec3(key, p))
                        .collect::<Result<Vec<_>>>()?;
                    explicit_aps = Some(aps);
                }
                "phi_half_deg" => room.half_power_semiangle_deg = parse_f64(key, value)?,
                "fov_led_deg" => room.led_fov_deg = parse_f64(key, value)?,
                "fov_pd_deg" => room.pd_fov_deg = parse_f64(key, value)?,
                "pd_area_m2" => room.pd_area = parse_f64(key, value)?,
                "responsivity" => room.responsivity = parse_f64(key, value)?,
                "conversion_gain" => conversion_gain = Some(parse_f64(key, value)?),
                "zeta" => zeta_all = Some(parse_f64(key, value)?),
                "zeta_floor" => zeta_floor = Some(parse_f64(key, value)?),
                "zeta_ceiling" => zeta_ceiling = Some(parse_f64(key, value)?),
                "zeta_walls" => zeta_walls = Some(parse_f64(key, value)?),
                "element_res_m" => room.element_resolution = parse_f64(key, value)?,
                "max_elements" => {
                    room.max_elements = value.parse().map_err(|_| {
                        Error::Config(format!("max_elements: cannot parse {value:?} as a count"))
                    })?
                }
                "n0_w_per_hz" => room.noise_psd = parse_f64(key, value)?,
                "bandwidth_hz" => room.bandwidth = parse_f64(key, value)?,
                "h_device_m" => sampler.h_device = parse_f64(key, value)?,
                "p_elec_max_w" => sampler.p_elec_max = parse_f64(key, value)?,
                "ue_led_offset_m" => cfg.ue.led_offsets = vec![parse_vec3(key, value)?],
                "ue_led_normal" => cfg.ue.led_normals = vec![parse_vec3(key, value)?],
                "ue_dims_m" => cfg.ue.dimensions = parse_vec3(key, value)?,
                "seed" => {
                    sampler.seed = value
                        .parse()
                        .map_err(|_| Error::Config(format!("seed: cannot parse {value:?} as u64")))?
                }
                "alpha_offset_deg" => sampler.orientation.yaw_offset = parse_f64(key, value)?,
                "alpha_std_deg" => sampler.orientation.yaw_std = parse_f64(key, value)?,
                "beta_mean_deg" => sampler.orientation.pitch.mean = parse_f64(key, value)?,
                "beta_std_deg" => sampler.orientation.pitch.std = parse_f64(key, value)?,
                "gamma_mean_deg" => sampler.orientation.roll.mean = parse_f64(key, value)?,
                "gamma_std_deg" => sampler.orientation.roll.std = parse_f64(key, value)?,
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            }
        }

        let room = &mut cfg.room;
        room.conversion_gain = conversion_gain.unwrap_or(room.responsivity);
        if let Some(z) = zeta_all {
            room.reflectivity = [z; 6];
        }
        if let Some(z) = zeta_floor {
            room.reflectivity[Surface::Floor.index()] = z;
        }
        if let Some(z) = zeta_ceiling {
            room.reflectivity[Surface::Ceiling.index()] = z;
        }
        if let Some(z) = zeta_walls {
            for s in [Surface::WallXMin, Surface::WallXMax, Surface::WallYMin, Surface::WallYMax] {
                room.reflectivity[s.index()] = z;
            }
        }
        room.ap_positions = match (explicit_aps, n_aps) {
            (Some(aps), Some(n)) if aps.len() != n => {
                return Err(Error::Config(format!(
                    "n_aps = {n} but {} ap_positions were given",
                    aps.len()
                )))
            }
            (Some(aps), _) => aps,
            (None, n) => RoomConfig::square_lattice(room.length, room.width, room.height, n.unwrap_or(16))?,
        };
        room.ap_normals = vec![Vec3::new(0.0, 0.0, -1.0); room.ap_positions.len()];
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.ue.validate()?;
        let s = &self.sampler;
        if !(s.h_device >= 0.0 && s.h_device <= self.room.height) {
            return Err(Error::Config(format!(
                "h_device_m must lie in [0, room_h], got {}",
                s.h_device
            )));
        }
        if !(s.p_elec_max > 0.0 && s.p_elec_max.is_finite()) {
            return Err(Error::Config(format!("p_elec_max_w must be positive, got {}", s.p_elec_max)));
        }
        let o = &s.orientation;
        for (name, std) in [("alpha_std_deg", o.yaw_std), ("beta_std_deg", o.pitch.std), ("gamma_std_deg", o.roll.std)] {
            if !(std > 0.0 && std.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {std}")));
            }
        }
        Ok(())
    }

    /// Canonical text form. Parsing it back yields an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = self.physics_text();
        let _ = writeln!(s, "seed = {}", self.sampler.seed);
        s
    }

    /// Canonical text of everything except the seed.
    fn physics_text(&self) -> String {
        let r = &self.room;
        let mut s = String::new();
        let _ = writeln!(s, "room_l = {:?}", r.length);
        let _ = writeln!(s, "room_w = {:?}", r.width);
        let _ = writeln!(s, "room_h = {:?}", r.height);
        let _ = writeln!(s, "n_aps = {}", r.n_aps());
        let aps: Vec<String> = r.ap_positions.iter().map(fmt_vec3).collect();
        let _ = writeln!(s, "ap_positions = {}", aps.join("; "));
        let _ = writeln!(s, "phi_half_deg = {:?}", r.half_power_semiangle_deg);
        let _ = writeln!(s, "fov_led_deg = {:?}", r.led_fov_deg);
        let _ = writeln!(s, "fov_pd_deg = {:?}", r.pd_fov_deg);
        let _ = writeln!(s, "pd_area_m2 = {:?}", r.pd_area);
        let _ = writeln!(s, "responsivity = {:?}", r.responsivity);
        let _ = writeln!(s, "conversion_gain = {:?}", r.conversion_gain);
        let _ = writeln!(s, "zeta_floor = {:?}", r.reflectivity[Surface::Floor.index()]);
        let _ = writeln!(s, "zeta_ceiling = {:?}", r.reflectivity[Surface::Ceiling.index()]);
        let walls = &r.reflectivity[2..];
        if walls.iter().all(|&z| z == walls[0]) {
            let _ = writeln!(s, "zeta_walls = {:?}", walls[0]);
        } else {
            // per-wall values cannot be expressed as keys; keep them in the hash input
            let _ = writeln!(s, "# zeta_per_wall = {walls:?}");
        }
        let _ = writeln!(s, "element_res_m = {:?}", r.element_resolution);
        let _ = writeln!(s, "max_elements = {}", r.max_elements);
        let _ = writeln!(s, "n0_w_per_hz = {:?}", r.noise_psd);
        let _ = writeln!(s, "bandwidth_hz = {:?}", r.bandwidth);
        let sp = &self.sampler;
        let _ = writeln!(s, "h_device_m = {:?}", sp.h_device);
        let _ = writeln!(s, "p_elec_max_w = {:?}", sp.p_elec_max);
        let _ = writeln!(s, "ue_led_offset_m = {}", fmt_vec3(&self.ue.led_offsets[0]));
        let _ = writeln!(s, "ue_led_normal = {}", fmt_vec3(&self.ue.led_normals[0]));
        let _ = writeln!(s, "ue_dims_m = {}", fmt_vec3(&self.ue.dimensions));
        let o = &sp.orientation;
        let _ = writeln!(s, "alpha_offset_deg = {:?}", o.yaw_offset);
        let _ = writeln!(s, "alpha_std_deg = {:?}", o.yaw_std);
        let _ = writeln!(s, "beta_mean_deg = {:?}", o.pitch.mean);
        let _ = writeln!(s, "beta_std_deg = {:?}", o.pitch.std);
        let _ = writeln!(s, "gamma_mean_deg = {:?}", o.roll.mean);
        let _ = writeln!(s, "gamma_std_deg = {:?}", o.roll.std);
        s
    }

    /// 16 hex digits identifying the physical setup (everything but the seed).
    pub fn room_hash(&self) -> String {
        let digest = Sha256::digest(self.physics_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_simulation_table() {
        let c = SimConfig::default();
        assert_eq!((c.room.length, c.room.width, c.room.height), (5.0, 5.0, 3.0));
        assert_eq!(c.room.n_aps(), 16);
        assert_eq!(c.room.half_power_semiangle_deg, 60.0);
        assert_eq!(c.room.pd_area, 1e-4);
        assert_eq!(c.room.reflectivity, [0.7; 6]);
        assert!((c.room.noise_variance() - 1e-14).abs() < 1e-28);
        assert_eq!(c.sampler.h_device, 1.5);
        assert_eq!(c.sampler.p_elec_max, 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn lattice_is_centred_on_ceiling() {
        let aps = RoomConfig::square_lattice(5.0, 5.0, 3.0, 16).unwrap();
        assert_eq!(aps[0], Vec3::new(-1.875, -1.875, 3.0));
        assert_eq!(aps[15], Vec3::new(1.875, 1.875, 3.0));
        let sum: Vec3 = aps.iter().sum();
        assert!(sum.x.abs() < 1e-12 && sum.y.abs() < 1e-12);
        assert!(RoomConfig::square_lattice(5.0, 5.0, 3.0, 12).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = SimConfig::default();
        c.sampler.seed = 99;
        c.room.reflectivity[Surface::Floor.index()] = 0.3;
        let back = SimConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.room_hash(), c.room_hash());
    }

    #[test]
    fn hash_ignores_seed_but_not_geometry() {
        let a = SimConfig::default();
        let mut b = a.clone();
        b.sampler.seed = 12345;
        assert_eq!(a.room_hash(), b.room_hash());
        b.room.length = 6.0;
        assert_ne!(a.room_hash(), b.room_hash());
    }

    #[test]
    fn parse_overrides_and_rejects() {
        let c = SimConfig::parse("room_l = 8\nroom_w = 8 # wide\nn_aps = 4\nzeta = 0.5\nseed = 7\n").unwrap();
        assert_eq!(c.room.length, 8.0);
        assert_eq!(c.room.n_aps(), 4);
        assert_eq!(c.room.reflectivity, [0.5; 6]);
        assert_eq!(c.sampler.seed, 7);

        assert!(SimConfig::parse("zeta = 1.0").is_err());
        assert!(SimConfig::parse("phi_half_deg = 90").is_err());
        assert!(SimConfig::parse("bogus = 1").is_err());
        assert!(SimConfig::parse("room_l 5").is_err());
        assert!(SimConfig::parse("n_aps = 3").is_err());
        assert!(SimConfig::parse("h_device_m = 4").is_err());
        let explicit = SimConfig::parse("ap_positions = 0,0,3; 1,1,3").unwrap();
        assert_eq!(explicit.room.n_aps(), 2);
        assert!(SimConfig::parse("n_aps = 4\nap_positions = 0,0,3").is_err());
    }
}

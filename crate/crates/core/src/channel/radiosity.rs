//! Diffuse (NLOS) gains with an infinite number of reflections.
//!
//! The room surfaces are tiled into `K` Lambertian patches (`m = 1`, 90° field
//! of view). With `E` the patch-to-patch gain matrix and `G = diag(ζ)`, light
//! arriving at the patches `t` is re-emitted and collected as
//! `h = rᵀ G (I - E G)⁻¹ t`. The operator `S = G (I - E G)⁻¹` only depends on
//! the room, so it is built once and shared.
//!
//! Point-to-point gains overestimate the exchange between nearby patches, so
//! a patch can appear to send more than all of its light to the rest of the
//! room. `E` is rescaled symmetrically, `d_k E_kl d_l`, until every patch
//! sends exactly its light to the closed room. Reciprocity survives the
//! scaling and the spectral radius of `E G` stays at or below the largest `ζ`.

use nalgebra::{DMatrix, DVector};

use super::{los_gain, Emitter, Receiver};
use crate::config::{RoomConfig, Surface, Vec3};
use crate::error::{Error, Result};

/// Surface patches of a discretized room.
#[derive(Debug, Clone, PartialEq)]
pub struct Elements {
    pub centers: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
    pub surfaces: Vec<Surface>,
}

impl Elements {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Patch `k` acting as a receiver.
    pub fn receiver(&self, k: usize) -> Receiver {
        Receiver::new(self.centers[k], self.normals[k], self.areas[k], 90.0)
    }

    /// Patch `k` acting as a unit-order Lambertian re-emitter.
    pub fn emitter(&self, k: usize) -> Emitter {
        Emitter::new(self.centers[k], self.normals[k], 1.0, 90.0)
    }
}

/// Cell edges `[0, res, 2 res, ..., len]`, clipping the last cell.
fn cell_edges(len: f64, res: f64) -> Vec<(f64, f64)> {
    let n = ((len / res) - 1e-9).ceil().max(1.0) as usize;
    (0..n)
        .map(|i| (i as f64 * res, ((i + 1) as f64 * res).min(len)))
        .collect()
}

fn cells_along(len: f64, res: f64) -> usize {
    ((len / res) - 1e-9).ceil().max(1.0) as usize
}

/// Tiles the four walls, floor and ceiling with square cells of side
/// `element_resolution`, normals pointing into the room.
pub fn discretize_room(room: &RoomConfig) -> Result<Elements> {
    let (l, w, h, res) = (room.length, room.width, room.height, room.element_resolution);
    let nl = cells_along(l, res);
    let nw = cells_along(w, res);
    let nh = cells_along(h, res);
    let needed = 2 * nl * nw + 2 * nw * nh + 2 * nl * nh;
    if needed > room.max_elements {
        return Err(Error::Resolution {
            needed,
            cap: room.max_elements,
        });
    }

    let mut out = Elements {
        centers: Vec::with_capacity(needed),
        normals: Vec::with_capacity(needed),
        areas: Vec::with_capacity(needed),
        surfaces: Vec::with_capacity(needed),
    };
    for surface in Surface::ALL {
        // (u extent, v extent, map (u, v) -> point)
        let (ulen, vlen): (f64, f64) = match surface {
            Surface::Floor | Surface::Ceiling => (l, w),
            Surface::WallXMin | Surface::WallXMax => (w, h),
            Surface::WallYMin | Surface::WallYMax => (l, h),
        };
        let place = |u: f64, v: f64| -> Vec3 {
            match surface {
                Surface::Floor => Vec3::new(u - l / 2.0, v - w / 2.0, 0.0),
                Surface::Ceiling => Vec3::new(u - l / 2.0, v - w / 2.0, h),
                Surface::WallXMin => Vec3::new(-l / 2.0, u - w / 2.0, v),
                Surface::WallXMax => Vec3::new(l / 2.0, u - w / 2.0, v),
                Surface::WallYMin => Vec3::new(u - l / 2.0, -w / 2.0, v),
                Surface::WallYMax => Vec3::new(u - l / 2.0, w / 2.0, v),
            }
        };
        let normal = surface.inward_normal();
        for &(v0, v1) in &cell_edges(vlen, res) {
            for &(u0, u1) in &cell_edges(ulen, res) {
                out.centers.push(place(0.5 * (u0 + u1), 0.5 * (v0 + v1)));
                out.normals.push(normal);
                out.areas.push((u1 - u0) * (v1 - v0));
                out.surfaces.push(surface);
            }
        }
    }
    debug_assert_eq!(out.len(), needed);
    Ok(out)
}

/// Room-only radiosity operator.
///
/// Immutable after construction; share it behind an `Arc` between workers.
#[derive(Debug, Clone)]
pub struct RadiosityCache {
    elements: Elements,
    transfer: DMatrix<f64>,
    reflectivity: Vec<f64>,
    operator: DMatrix<f64>,
}

impl RadiosityCache {
    pub fn build(room: &RoomConfig) -> Result<Self> {
        let elements = discretize_room(room)?;
        let k = elements.len();

        let mut transfer = DMatrix::<f64>::zeros(k, k);
        for src in 0..k {
            let tx = elements.emitter(src);
            for dst in 0..k {
                if dst != src {
                    transfer[(dst, src)] = los_gain(&tx, &elements.receiver(dst))?;
                }
            }
        }
        balance(&mut transfer);
        let reflectivity: Vec<f64> = elements
            .surfaces
            .iter()
            .map(|s| room.reflectivity[s.index()])
            .collect();

        let operator = if reflectivity.iter().all(|&z| z == 0.0) {
            DMatrix::zeros(k, k)
        } else {
            // I - E G: column l of E scaled by ζ_l
            let mut system = -transfer.clone();
            for (l, &z) in reflectivity.iter().enumerate() {
                system.column_mut(l).scale_mut(z);
            }
            for i in 0..k {
                system[(i, i)] += 1.0;
            }
            let mut inverse = system.lu().try_inverse().ok_or(Error::Singular)?;
            if inverse.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular);
            }
            for (row, &z) in reflectivity.iter().enumerate() {
                inverse.row_mut(row).scale_mut(z);
            }
            inverse
        };

        Ok(RadiosityCache {
            elements,
            transfer,
            reflectivity,
            operator,
        })
    }

    pub fn elements(&self) -> &Elements {
        &self.elements
    }

    /// Patch-to-patch gain matrix `E` (`E[(k, l)]` is the gain from `l` to `k`).
    pub fn transfer(&self) -> &DMatrix<f64> {
        &self.transfer
    }

    pub fn reflectivity(&self) -> &[f64] {
        &self.reflectivity
    }

    /// `S = G (I - E G)⁻¹`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// `S · v`: patch exitance caused by incident power `v`.
    pub fn apply(&self, incident: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(incident);
        (&self.operator * v).as_slice().to_vec()
    }

    /// `Sᵀ · r`, so that `rᵀ S t = adjoint(r) · t`.
    pub fn adjoint(&self, collection: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(collection);
        (self.operator.transpose() * r).as_slice().to_vec()
    }

    /// Power each patch receives directly from `tx` (the vector `t`).
    pub fn incident(&self, tx: &Emitter) -> Result<Vec<f64>> {
        (0..self.elements.len())
            .map(|k| los_gain(tx, &self.elements.receiver(k)))
            .collect()
    }

    /// Gain from each patch to `rx` (the vector `r`).
    pub fn collection(&self, rx: &Receiver) -> Result<Vec<f64>> {
        (0..self.elements.len())
            .map(|k| los_gain(&self.elements.emitter(k), rx))
            .collect()
    }

    /// Diffuse gain `rᵀ S t` from `tx` to `rx` over all reflection orders.
    pub fn nlos_gain(&self, tx: &Emitter, rx: &Receiver) -> Result<f64> {
        let t = self.incident(tx)?;
        let r = self.collection(rx)?;
        let exitance = self.apply(&t);
        Ok(dot(&r, &exitance))
    }
}

const BALANCE_TOL: f64 = 1e-13;
const BALANCE_MAX_ITERS: usize = 10_000;

/// Symmetric scaling `E_kl d_k d_l` with unit column sums, capped at one.
fn balance(transfer: &mut DMatrix<f64>) {
    let k = transfer.ncols();
    let mut d = DVector::from_element(k, 1.0);
    for _ in 0..BALANCE_MAX_ITERS {
        let reach = transfer.tr_mul(&d);
        let mut worst: f64 = 0.0;
        for l in 0..k {
            let sent = d[l] * reach[l];
            if sent > 0.0 {
                worst = worst.max((sent - 1.0).abs());
                d[l] /= sent.sqrt();
            }
        }
        if worst < BALANCE_TOL {
            break;
        }
    }
    for l in 0..k {
        for i in 0..k {
            transfer[(i, l)] *= d[i] * d[l];
        }
    }
    let most = (0..k).map(|l| transfer.column(l).sum()).fold(0.0, f64::max);
    if most > 1.0 {
        *transfer /= most;
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;

    fn room() -> RoomConfig {
        SimConfig::default().room
    }

    #[test]
    fn default_room_has_440_patches() {
        let e = discretize_room(&room()).unwrap();
        // 4 walls of 10 x 6 cells, floor and ceiling of 10 x 10
        assert_eq!(e.len(), 4 * 60 + 2 * 100);
        assert!((e.total_area() - 110.0).abs() < 1e-9 * 110.0);
        for (c, n) in e.centers.iter().zip(&e.normals) {
            // inward normals point toward the room centre
            let centre = Vec3::new(0.0, 0.0, 1.5);
            assert!(n.dot(&(centre - c)) > 0.0);
        }
    }

    #[test]
    fn unit_cube_single_patches() {
        let mut r = room();
        r.length = 1.0;
        r.width = 1.0;
        r.height = 1.0;
        r.element_resolution = 1.0;
        let e = discretize_room(&r).unwrap();
        assert_eq!(e.len(), 6);
        assert!(e.areas.iter().all(|&a| (a - 1.0).abs() < 1e-15));
    }

    #[test]
    fn clipped_cells_preserve_area() {
        let mut r = room();
        r.length = 5.3;
        r.width = 4.1;
        r.height = 2.7;
        r.element_resolution = 0.5;
        let e = discretize_room(&r).unwrap();
        let expected = 2.0 * (5.3 * 4.1 + 5.3 * 2.7 + 4.1 * 2.7);
        assert!((e.total_area() - expected).abs() < 1e-9 * expected);
        assert!(e.areas.iter().all(|&a| a > 0.0 && a <= 0.25 + 1e-12));
    }

    #[test]
    fn element_cap_is_enforced() {
        let mut r = room();
        r.element_resolution = 0.01;
        assert!(matches!(discretize_room(&r), Err(Error::Resolution { .. })));
    }

    #[test]
    fn transfer_matrix_structure() {
        let cache = RadiosityCache::build(&room()).unwrap();
        let e = cache.transfer();
        let els = cache.elements();
        for k in 0..els.len() {
            assert_eq!(e[(k, k)], 0.0);
            for l in 0..els.len() {
                assert!(e[(k, l)] >= 0.0);
                if els.surfaces[k] == els.surfaces[l] {
                    assert_eq!(e[(k, l)], 0.0);
                }
                let behind = els.normals[l].dot(&(els.centers[k] - els.centers[l])) <= 0.0;
                if behind {
                    assert_eq!(e[(k, l)], 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_reflectivity_gives_zero_operator() {
        let mut r = room();
        r.reflectivity = [0.0; 6];
        let cache = RadiosityCache::build(&r).unwrap();
        assert!(cache.operator().iter().all(|&v| v == 0.0));
        let tx = Emitter::new(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, 1.0), 1.0, 90.0);
        let rx = Receiver::new(Vec3::new(1.0, 1.0, 3.0), Vec3::new(0.0, 0.0, -1.0), 1e-4, 90.0);
        assert_eq!(cache.nlos_gain(&tx, &rx).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_below_one() {
        // power iteration on E G
        let cache = RadiosityCache::build(&room()).unwrap();
        let k = cache.elements().len();
        let mut eg = cache.transfer().clone();
        for (l, &z) in cache.reflectivity().iter().enumerate() {
            eg.column_mut(l).scale_mut(z);
        }
        let mut v = DVector::from_element(k, 1.0);
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = &eg * &v;
            lambda = w.norm() / v.norm();
            v = w.normalize();
        }
        assert!(lambda <= 0.7 + 1e-9, "spectral radius {lambda}");
        assert!(lambda > 0.5, "spectral radius {lambda}");
    }

    #[test]
    fn patches_send_at_most_their_light() {
        let mut r = room();
        r.reflectivity = [0.99; 6];
        let cache = RadiosityCache::build(&r).unwrap();
        let e = cache.transfer();
        let sums: Vec<f64> = (0..e.ncols()).map(|l| e.column(l).sum()).collect();
        assert!(sums.iter().all(|&s| (s - 1.0).abs() < 1e-12), "{sums:?}");
        let els = cache.elements();
        for k in 0..e.nrows() {
            for l in 0..k {
                let (a, b) = (e[(k, l)] * els.areas[l], e[(l, k)] * els.areas[k]);
                assert!((a - b).abs() <= 1e-12 * a.max(b), "{a} vs {b}");
            }
        }
        assert!(cache.operator().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn adjoint_matches_forward() {
        let cache = RadiosityCache::build(&room()).unwrap();
        let k = cache.elements().len();
        let t: Vec<f64> = (0..k).map(|i| ((i * 7919) % 101) as f64 * 1e-3).collect();
        let r: Vec<f64> = (0..k).map(|i| ((i * 104729) % 37) as f64 * 1e-4).collect();
        let a = dot(&r, &cache.apply(&t));
        let b = dot(&cache.adjoint(&r), &t);
        assert!((a - b).abs() < 1e-12 * a.abs());
    }
}

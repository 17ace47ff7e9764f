//! Monte Carlo Huygens superposition over one diffuse plane.
//!
//! The wave field at `x_v` is
//! `int_M e^{i k (|x_v - x_m| + |x_m - x_l|)} / (|x_v - x_m| |x_m - x_l|) dx_m`,
//! estimated with uniform area samples. The ray field drops the phase, giving
//! the steady-state (`Omega = 0`) component.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scene::{PlanarSurface, VoxelGrid};
use crate::{Point3, C};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldImage {
    pub grid: VoxelGrid,
    /// Complex field for the wave model; real and non-negative for the ray model.
    pub values: Vec<Complex64>,
    /// `None` for the ray model.
    pub omega: Option<f64>,
    pub n_samples: u64,
    pub seed: u64,
}

impl FieldImage {
    pub fn magnitude(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

pub fn simulate_wave_field(
    source: &Point3,
    surface: &PlanarSurface,
    grid: &VoxelGrid,
    omega: f64,
    n_samples: u64,
    seed: u64,
) -> Result<FieldImage> {
    let values = wave_at(source, surface, &grid.points(), omega, n_samples, seed)?;
    Ok(FieldImage {
        grid: grid.clone(),
        values,
        omega: Some(omega),
        n_samples,
        seed,
    })
}

pub fn simulate_ray_field(source: &Point3, surface: &PlanarSurface, grid: &VoxelGrid, n_samples: u64, seed: u64) -> Result<FieldImage> {
    let values = ray_at(source, surface, &grid.points(), n_samples, seed)?;
    Ok(FieldImage {
        grid: grid.clone(),
        values,
        omega: None,
        n_samples,
        seed,
    })
}

/// Wave field at arbitrary probe points. Probe `i` uses RNG stream `i`.
pub fn wave_at(
    source: &Point3,
    surface: &PlanarSurface,
    probes: &[Point3],
    omega: f64,
    n_samples: u64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let k = 2.0 * std::f64::consts::PI * omega / C;
    estimate(source, surface, probes, n_samples, seed, move |r1, r2| {
        Complex64::from_polar(1.0 / (r1 * r2), k * (r1 + r2))
    })
}

/// Ray (phase-free) field at arbitrary probe points.
pub fn ray_at(source: &Point3, surface: &PlanarSurface, probes: &[Point3], n_samples: u64, seed: u64) -> Result<Vec<Complex64>> {
    estimate(source, surface, probes, n_samples, seed, |r1, r2| {
        Complex64::new(1.0 / (r1 * r2), 0.0)
    })
}

fn estimate<F>(source: &Point3, surface: &PlanarSurface, probes: &[Point3], n_samples: u64, seed: u64, f: F) -> Result<Vec<Complex64>>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    if n_samples == 0 {
        return Err(Error::InvalidParams("n_samples must be > 0".into()));
    }
    let n = surface.normal();
    let off_plane = |p: &Point3| (p - surface.origin).dot(&n).abs() >= 1e-9;
    if !off_plane(source) || !probes.iter().all(off_plane) {
        return Err(Error::InvalidParams("source and probes must lie off the surface plane".into()));
    }
    let area = surface.area();
    probes
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut acc = Complex64::default();
            for _ in 0..n_samples {
                let xm = surface.point_at(rng.gen(), rng.gen());
                let r1 = (xm - source).norm();
                let r2 = (p - xm).norm();
                if r1 < 1e-9 {
                    return Err(Error::singularity(source, &xm));
                }
                if r2 < 1e-9 {
                    return Err(Error::singularity(&xm, p));
                }
                acc += f(r1, r2);
            }
            Ok(acc * (area / n_samples as f64))
        })
        .collect()
}

/// Angle in degrees, from `+z` toward `+x`, of the specular reflection of
/// the ray from `src` to the center of `plate`.
pub fn specular_angle_deg(src: &Point3, plate: &PlanarSurface) -> f64 {
    let d = (plate.center() - src).normalize();
    let n = plate.normal().into_inner();
    let r = d - n * (2.0 * d.dot(&n));
    r.x.atan2(r.z).to_degrees()
}

/// Probe points on a circular arc of radius `radius` about `center`, in the
/// plane spanned by `axis` (angle 0) and `toward` (positive angles).
pub fn arc(center: &Point3, axis: &crate::Vec3, toward: &crate::Vec3, radius: f64, degrees: &[f64]) -> Vec<Point3> {
    let a = axis.normalize();
    let b = (toward - a * toward.dot(&a)).normalize();
    degrees
        .iter()
        .map(|d| {
            let t = d.to_radians();
            center + (a * t.cos() + b * t.sin()) * radius
        })
        .collect()
}

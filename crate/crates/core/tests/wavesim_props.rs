//! Wave and ray field estimators: quadrature oracle, reciprocity, isotropy.

use std::f64::consts::PI;

use num_complex::Complex64;
use phasor_nlos::scene::{PlanarSurface, SurfaceKind};
use phasor_nlos::wavesim::{arc, ray_at, wave_at};
use phasor_nlos::{Point3, Vec3, C};
use proptest::prelude::*;

fn plate(size: f64, tilt: f64) -> PlanarSurface {
    PlanarSurface::from_center(Point3::zeros(), size, size, [0.0, tilt, 0.0], 1.0, SurfaceKind::Diffuse).unwrap()
}

/// Midpoint rule over an `n x n` cell partition of the plate.
fn quadrature(src: &Point3, s: &PlanarSurface, probe: &Point3, omega: f64, n: usize) -> Complex64 {
    let k = 2.0 * PI * omega / C;
    let da = s.edge_u.cross(&s.edge_v).norm() / (n * n) as f64;
    let mut acc = Complex64::default();
    for i in 0..n {
        for j in 0..n {
            let xm = s.origin + s.edge_u * ((i as f64 + 0.5) / n as f64) + s.edge_v * ((j as f64 + 0.5) / n as f64);
            let (r1, r2) = ((xm - src).norm(), (probe - xm).norm());
            acc += Complex64::from_polar(da / (r1 * r2), k * (r1 + r2));
        }
    }
    acc
}

#[test]
fn wave_estimate_agrees_with_quadrature() {
    let s = plate(0.1, 15.0);
    let src = Point3::new(-0.5, 0.0, 1.0);
    let probe = Point3::new(0.7, 0.1, 1.2);
    let omega = C / 0.02;
    let exact = quadrature(&src, &s, &probe, omega, 600);
    let runs: Vec<Complex64> = (0..8)
        .map(|seed| wave_at(&src, &s, &[probe], omega, 20_000, seed).unwrap()[0])
        .collect();
    let mean: Complex64 = runs.iter().sum::<Complex64>() / runs.len() as f64;
    let var = runs.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>() / (runs.len() - 1) as f64;
    let stderr = (var / runs.len() as f64).sqrt();
    assert!(
        (mean - exact).norm() <= 4.0 * stderr + 1e-9 * exact.norm(),
        "mean {mean}, quadrature {exact}, stderr {stderr:e}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // Swapping source and probe leaves the estimate unchanged: the kernel is
    // symmetric and probe 0 draws the same plate samples either way.
    #[test]
    fn reciprocity(tilt in -40.0f64..40.0, sx in -1.0f64..1.0, px in -1.0f64..1.0, pz in 0.5f64..2.0, seed in any::<u64>()) {
        let s = plate(0.3, tilt);
        let a = Point3::new(sx, 0.2, 1.0);
        let b = Point3::new(px, -0.1, pz);
        let omega = C / 0.02;
        let ab = wave_at(&a, &s, &[b], omega, 4000, seed).unwrap()[0];
        let ba = wave_at(&b, &s, &[a], omega, 4000, seed).unwrap()[0];
        prop_assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1e-300));
    }

    // Without phase the far field of a small plate is direction-independent.
    #[test]
    fn ray_field_is_isotropic(tilt in -30.0f64..30.0, seed in any::<u64>()) {
        let s = plate(0.1, tilt);
        let src = Point3::new(-0.6, 0.0, 1.0);
        let n = s.normal().into_inner();
        let degrees: Vec<f64> = (-60..=60).step_by(10).map(f64::from).collect();
        let probes = arc(&Point3::zeros(), &n, &Vec3::x(), 2.0, &degrees);
        let m: Vec<f64> = ray_at(&src, &s, &probes, 2000, seed).unwrap().iter().map(|v| v.norm()).collect();
        let (lo, hi) = m.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        prop_assert!(hi / lo < 1.05, "ray spread {}", hi / lo);
    }
}

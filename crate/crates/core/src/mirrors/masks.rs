//! Footprint masks and image-comparison scores used to evaluate mirror images.

use crate::scene::{mirror_reflect_point, mirror_reflect_vector, Dir3, PlanarSurface, VoxelGrid};
use crate::Point3;

/// Mirror image of a surface; the edge handedness flips with the reflection.
pub fn mirror_reflect_surface(s: &PlanarSurface, plane_point: &Point3, n: &Dir3) -> PlanarSurface {
    PlanarSurface {
        name: s.name.clone(),
        origin: mirror_reflect_point(&s.origin, plane_point, n),
        edge_u: mirror_reflect_vector(&s.edge_u, n),
        edge_v: mirror_reflect_vector(&s.edge_v, n),
        albedo: s.albedo,
        kind: s.kind,
    }
}

/// Voxels within `tol` meters of the plane of any surface and whose projection
/// falls inside that surface's rectangle.
pub fn footprint_mask(grid: &VoxelGrid, surfaces: &[PlanarSurface], tol: f64) -> Vec<bool> {
    let duals: Vec<_> = surfaces
        .iter()
        .map(|s| {
            let (u, v) = (s.edge_u, s.edge_v);
            let (uu, vv, uv) = (u.dot(&u), v.dot(&v), u.dot(&v));
            let det = uu * vv - uv * uv;
            (
                s.origin,
                s.normal(),
                (u * vv - v * uv) / det,
                (v * uu - u * uv) / det,
                tol / u.norm(),
                tol / v.norm(),
            )
        })
        .collect();
    (0..grid.len())
        .map(|f| {
            let p = grid.point_flat(f);
            duals.iter().any(|(o, n, ud, vd, eu, ev)| {
                let d = p - o;
                if d.dot(n).abs() > tol {
                    return false;
                }
                let (a, b) = (d.dot(ud), d.dot(vd));
                (-eu..=1.0 + eu).contains(&a) && (-ev..=1.0 + ev).contains(&b)
            })
        })
        .collect()
}

pub fn masked_sum(values: &[f64], mask: &[bool]) -> f64 {
    values.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| v).sum()
}

/// `1` where `values >= rel * max(values)`, else `0`.
pub fn threshold_image(values: &[f64], rel: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(0.0, f64::max);
    values
        .iter()
        .map(|v| if max > 0.0 && *v >= rel * max { 1.0 } else { 0.0 })
        .collect()
}

/// Zero-mean normalized cross-correlation (Pearson coefficient); `0` when
/// either input is constant.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "ncc inputs differ in length");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::SurfaceKind;
    use crate::Vec3;

    #[test]
    fn ncc_bounds() {
        let a = [0.0, 1.0, 2.0, 3.0];
        assert!((ncc(&a, &a) - 1.0).abs() < 1e-12);
        let b: Vec<f64> = a.iter().map(|x| -2.0 * x + 1.0).collect();
        assert!((ncc(&a, &b) + 1.0).abs() < 1e-12);
        assert_eq!(ncc(&a, &[1.0; 4]), 0.0);
    }

    #[test]
    fn footprint_of_plane_grid_on_surface() {
        let s = PlanarSurface::from_center(Point3::new(0.0, 0.0, 1.0), 0.4, 0.2, [0.0; 3], 1.0, SurfaceKind::Diffuse).unwrap();
        let g = VoxelGrid::plane(Point3::new(0.0, 0.0, 1.0), Vec3::x(), Vec3::y(), 1.0, 1.0, 11, 11);
        let mask = footprint_mask(&g, &[s], 1e-6);
        // x in {-0.2..0.2} (5 columns), y in {-0.1, 0, 0.1} (3 rows)
        assert_eq!(mask.iter().filter(|m| **m).count(), 15);
    }

    #[test]
    fn reflected_surface_is_mirror_image() {
        let s = PlanarSurface::from_center(Point3::new(1.0, 0.0, 0.3), 0.4, 0.2, [0.0; 3], 1.0, SurfaceKind::Diffuse).unwrap();
        let n = Dir3::new_normalize(Vec3::z());
        let r = mirror_reflect_surface(&s, &Point3::new(0.0, 0.0, 1.0), &n);
        assert!((r.center() - Point3::new(1.0, 0.0, 1.7)).norm() < 1e-12);
        assert!((r.area() - s.area()).abs() < 1e-12);
    }
}

//! Simulated scenes for the shipped experiments. All scenes use a relay wall at
//! `z = 0` with the laser at the origin and hidden geometry at `z > 0`.

use crate::error::Result;
use crate::mirrors::mirror_reflect_surface;
use crate::scene::{mirror_reflect_grid, Dir3, PlanarSurface, RelayAperture, Scene, SurfaceKind, VoxelGrid};
use crate::{Point3, Vec3};

fn diffuse(center: Point3, w: f64, h: f64, rot: [f64; 3], name: &str) -> Result<PlanarSurface> {
    Ok(PlanarSurface::from_center(center, w, h, rot, 1.0, SurfaceKind::Diffuse)?.named(name))
}

fn relay(n: usize) -> RelayAperture {
    RelayAperture::centered(Point3::zeros(), 2.0, 2.0, n, n)
}

/// Plate and point source for the specular wavefront experiment. The source
/// sits `SPECULAR_SOURCE_DIST` along the untilted normal; the plate is tilted
/// by `tilt_deg` about `y`.
pub const SPECULAR_SOURCE_DIST: f64 = 2.0;
pub const SPECULAR_PLATE: f64 = 0.25;

pub fn specular_plate(tilt_deg: f64) -> Result<(Point3, PlanarSurface)> {
    let plate = diffuse(Point3::zeros(), SPECULAR_PLATE, SPECULAR_PLATE, [0.0, tilt_deg, 0.0], "plate")?;
    Ok((Point3::new(0.0, 0.0, SPECULAR_SOURCE_DIST), plate))
}

/// `y = 0` slice around the plate for wave-field images.
pub fn specular_field_grid() -> VoxelGrid {
    VoxelGrid::plane(Point3::new(0.0, 0.0, 1.25), Vec3::x(), Vec3::z(), 3.0, 2.0, 151, 101)
}

/// Relay wall plus a parallel diffuse plane `M` at height `d`. Grids `S1` and
/// `S2` sit at `2d` and `4d`, where the first and second mirror images of the
/// laser point form.
pub fn infinity_mirror(d: f64, aperture_n: usize) -> Result<Scene> {
    let wall = PlanarSurface::from_center(Point3::zeros(), 2.2, 2.2, [0.0; 3], 1.0, SurfaceKind::Diffuse)?.named("wall");
    let m = diffuse(Point3::new(0.0, 0.0, d), 1.6, 1.6, [0.0; 3], "M")?;
    let slice = |z: f64| VoxelGrid::plane(Point3::new(0.0, 0.0, z), Vec3::x(), Vec3::y(), 1.0, 1.0, 51, 51);
    Ok(Scene::new(vec![wall, m], relay(aperture_n), 5)?
        .with_grid("S1", slice(2.0 * d))
        .with_grid("S2", slice(4.0 * d)))
}

/// Three plates: `M1` tilted toward the aperture, `M2` parallel to it, and
/// `M3` perpendicular to it, so that its specular lobe never returns to the
/// relay. Each plate has a same-sized footprint grid of the same name.
pub fn missing_cone(aperture_n: usize) -> Result<Scene> {
    let size = 0.4;
    let c1 = Point3::new(-0.6, 0.0, 1.0);
    let tilt1 = -(c1.x / c1.z).atan().to_degrees();
    let plates = [
        diffuse(c1, size, size, [0.0, -tilt1, 0.0], "M1")?,
        diffuse(Point3::new(0.0, 0.0, 1.3), size, size, [0.0; 3], "M2")?,
        diffuse(Point3::new(0.7, 0.0, 1.8), size, size, [0.0, 90.0, 0.0], "M3")?,
    ];
    let mut scene = Scene::new(plates.to_vec(), relay(aperture_n), 3)?;
    for p in &plates {
        scene = scene.with_grid(p.name.clone().unwrap(), VoxelGrid::on_surface(p, 20, 20));
    }
    let volume = VoxelGrid::plane(Point3::new(0.0, 0.005, 1.1), Vec3::x(), Vec3::z(), 2.0, 1.2, 101, 61);
    Ok(scene.with_grid("volume", volume))
}

/// Center and size of the visible mirror `M` in the secondary-aperture scene.
pub const MIRROR_CENTER: [f64; 3] = [0.4, 0.0, 1.45];
pub const MIRROR_SIZE: f64 = 0.8;
pub const MIRROR_TILT_DEG: f64 = 25.9;
pub const OCCLUDED_CENTER: [f64; 3] = [-0.5, 0.0, 0.55];

/// Visible plane `M` plus a plane `G` perpendicular-ish to the relay whose
/// third-bounce response misses the aperture. `g_angle_deg = 90` makes `G`
/// exactly perpendicular; other values rotate it about its center around `y`.
/// Grids: `M` (volume around the mirror) and `W` (a `y = 0` slice containing
/// `x_l` and `G`).
pub fn mirror_and_occluded(g_angle_deg: f64, aperture_n: usize) -> Result<Scene> {
    let m = diffuse(
        Point3::from(MIRROR_CENTER),
        MIRROR_SIZE,
        MIRROR_SIZE,
        [0.0, MIRROR_TILT_DEG, 0.0],
        "M",
    )?;
    // G's plane stays 0.5 m from x_l; its height keeps the specular point for
    // every tested tilt on the surface
    let g = diffuse(Point3::from(OCCLUDED_CENTER), 0.8, 0.6, [0.0, g_angle_deg, 0.0], "G")?;
    let mgrid = slab_around(&m, 0.03, 2, 2)?;
    // offset by half a voxel so no node coincides with x_l
    let w = VoxelGrid::plane(Point3::new(-0.495, 0.0, 0.355), Vec3::x(), Vec3::z(), 1.6, 1.3, 161, 131);
    Ok(Scene::new(vec![m, g], relay(aperture_n), 4)?
        .with_grid("M", mgrid)
        .with_grid("W", w))
}

/// T-shaped target: a bar and a stem in the plane of `rot` applied to the
/// `xy` plane, facing the rotated `+z`. The stem runs along the rotated `x`
/// with the bar at its `+x` end; `flipped` turns the T by 180 degrees in its
/// own plane.
pub fn t_shape(center: Point3, rot: [f64; 3], flipped: bool) -> Result<Vec<PlanarSurface>> {
    let s = if flipped { -1.0 } else { 1.0 };
    let u = diffuse(center, 1.0, 1.0, rot, "")?.edge_u.normalize();
    let bar = diffuse(center + u * (s * 0.3), 0.2, 0.6, rot, "T_bar")?;
    let stem = diffuse(center + u * (-s * 0.1), 0.6, 0.2, rot, "T_stem")?;
    Ok(vec![bar, stem])
}

/// Height of the mirror `M` above the relay in the two-corner scene.
pub const TWO_CORNER_MIRROR_Z: f64 = 1.1;
/// Center of the T hidden behind two corners.
pub const TWO_CORNER_TARGET: [f64; 3] = [1.7, 0.0, 0.35];

/// Plane of `M` as (point, unit normal).
pub fn two_corner_mirror_plane() -> (Point3, Dir3) {
    (Point3::new(0.0, 0.0, TWO_CORNER_MIRROR_Z), Dir3::new_normalize(Vec3::z()))
}

/// Tilt of the T about `y`: its mirror image across `M` faces `x_l`, so the
/// relay lies in the specular direction of the image.
pub fn two_corner_tilt_deg() -> f64 {
    let c = TWO_CORNER_TARGET;
    -c[0].atan2(2.0 * TWO_CORNER_MIRROR_Z - c[2]).to_degrees()
}

/// The T of the two-corner scene, facing `M`.
pub fn two_corner_t(flipped: bool) -> Result<Vec<PlanarSurface>> {
    t_shape(Point3::from(TWO_CORNER_TARGET), [0.0, two_corner_tilt_deg(), 0.0], flipped)
}

/// The T mirrored across `M`: where its two-corner image forms.
pub fn two_corner_t_image(flipped: bool) -> Result<Vec<PlanarSurface>> {
    let (p, n) = two_corner_mirror_plane();
    Ok(two_corner_t(flipped)?.iter().map(|s| mirror_reflect_surface(s, &p, &n)).collect())
}

/// Mirror `M` above a tilted T that has no line of sight to the relay or
/// `x_l` (an absorber wall blocks it). The grid `target` covers the mirror
/// image of the T's plane across `M`.
pub fn two_corner(flipped: bool, aperture_n: usize) -> Result<Scene> {
    let m = diffuse(Point3::new(1.3, 0.0, TWO_CORNER_MIRROR_Z), 2.0, 1.6, [0.0; 3], "M")?;
    // tall enough to hide the T, low enough to pass the M-to-relay legs
    let blocker = PlanarSurface::from_center(
        Point3::new(1.15, 0.0, 0.24),
        0.48,
        2.0,
        [0.0, 90.0, 0.0],
        0.0,
        SurfaceKind::Absorber,
    )?
    .named("blocker");
    let mut surfaces = vec![m, blocker];
    surfaces.extend(two_corner_t(flipped)?);
    Ok(Scene::new(surfaces, relay(aperture_n), 5)?.with_grid("target", two_corner_target_grid()?))
}

/// 1 m square grid on the plane of the T, reflected across `M`.
pub fn two_corner_target_grid() -> Result<VoxelGrid> {
    let (p, n) = two_corner_mirror_plane();
    let u = diffuse(Point3::zeros(), 1.0, 1.0, [0.0, two_corner_tilt_deg(), 0.0], "")?
        .edge_u
        .normalize();
    let on_t = VoxelGrid::plane(Point3::from(TWO_CORNER_TARGET), u, Vec3::y(), 1.0, 1.0, 41, 41);
    Ok(mirror_reflect_grid(&on_t, &p, &n))
}

/// Single-corner reference: the T placed at its two-corner mirror image,
/// facing the relay, with `M` and the absorber removed.
pub fn single_corner(flipped: bool, aperture_n: usize) -> Result<Scene> {
    Ok(Scene::new(two_corner_t_image(flipped)?, relay(aperture_n), 3)?.with_grid("target", two_corner_target_grid()?))
}

/// Volume aligned with `s`: `step`-spaced nodes over the rectangle plus `pad`
/// nodes on each side, and `2 * depth + 1` layers along the normal.
pub fn slab_around(s: &PlanarSurface, step: f64, pad: usize, depth: usize) -> Result<VoxelGrid> {
    let (du, dv) = (s.edge_u.normalize() * step, s.edge_v.normalize() * step);
    let dw = s.normal().into_inner() * step;
    let n = |len: f64| (len / step).round() as usize + 1 + 2 * pad;
    let origin = s.origin - (du + dv) * pad as f64 - dw * depth as f64;
    VoxelGrid::new(origin, du, dv, dw, n(s.edge_u.norm()), n(s.edge_v.norm()), 2 * depth + 1)
}

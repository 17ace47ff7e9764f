//! Scene geometry: planar rectangles, the relay aperture, voxel grids, and the
//! mirror-reflection helpers used to place imaging volumes behind hidden
//! surfaces.
//!
//! All positions are in meters. The relay plane is conventionally `z = 0` with
//! normal `+z`, and hidden geometry lives at `z > 0`.

mod config;

use std::collections::BTreeMap;

use nalgebra::{Unit, Vector3};

use crate::error::{Error, Result};

pub use config::{GridEntry, RelayEntry, SceneFile, SurfaceEntry};

pub type Vec3 = Vector3<f64>;
/// A position in world space (meters).
pub type Point3 = Vector3<f64>;
/// A unit-length direction.
pub type Dir3 = Unit<Vector3<f64>>;

/// Edge tolerance for ray/rectangle tests, in meters. Hits closer than this to
/// a rectangle edge count as misses.
pub const EDGE_EPS: f64 = 1e-9;

const PLANE_EPS: f64 = 1e-9;

/// Reflects `p` across the plane through `plane_point` with unit normal `n`.
pub fn mirror_reflect_point(p: &Point3, plane_point: &Point3, n: &Dir3) -> Point3 {
    let d = (p - plane_point).dot(n);
    p - n.into_inner() * (2.0 * d)
}

/// Reflects a free vector (no translation) across a plane with normal `n`.
pub fn mirror_reflect_vector(v: &Vec3, n: &Dir3) -> Vec3 {
    v - n.into_inner() * (2.0 * v.dot(n))
}

/// Reflects a whole voxel grid. Voxel `(i, j, k)` of the result is the mirror
/// image of voxel `(i, j, k)` of the input.
pub fn mirror_reflect_grid(g: &VoxelGrid, plane_point: &Point3, n: &Dir3) -> VoxelGrid {
    VoxelGrid {
        origin: mirror_reflect_point(&g.origin, plane_point, n),
        axis_u: mirror_reflect_vector(&g.axis_u, n),
        axis_v: mirror_reflect_vector(&g.axis_v, n),
        axis_w: mirror_reflect_vector(&g.axis_w, n),
        n_u: g.n_u,
        n_v: g.n_v,
        n_w: g.n_w,
    }
}

/// True iff the open segment `(a, b)` crosses no surface interior. Absorbers
/// and diffuse surfaces both block; edge-grazing hits do not.
pub fn point_visibility(a: &Point3, b: &Point3, scene: &Scene) -> bool {
    scene.segment_clear(a, b, None)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    #[default]
    Diffuse,
    Absorber,
}

/// A finite parallelogram `origin + a * edge_u + b * edge_v`, `a, b in [0, 1]`.
/// Diffuse surfaces scatter on both faces.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarSurface {
    pub name: Option<String>,
    pub origin: Point3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
    pub albedo: f64,
    pub kind: SurfaceKind,
}

impl PlanarSurface {
    pub fn new(origin: Point3, edge_u: Vec3, edge_v: Vec3, albedo: f64, kind: SurfaceKind) -> Result<Self> {
        let s = PlanarSurface {
            name: None,
            origin,
            edge_u,
            edge_v,
            albedo,
            kind,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn diffuse(origin: Point3, edge_u: Vec3, edge_v: Vec3, albedo: f64) -> Result<Self> {
        Self::new(origin, edge_u, edge_v, albedo, SurfaceKind::Diffuse)
    }

    pub fn absorber(origin: Point3, edge_u: Vec3, edge_v: Vec3) -> Result<Self> {
        Self::new(origin, edge_u, edge_v, 0.0, SurfaceKind::Absorber)
    }

    /// Axis-aligned `width x height` rectangle in the xy-plane (normal `+z`),
    /// rotated by `rotation_deg = [rx, ry, rz]` (applied x, then y, then z)
    /// about its center and then moved to `center`.
    pub fn from_center(center: Point3, width: f64, height: f64, rotation_deg: [f64; 3], albedo: f64, kind: SurfaceKind) -> Result<Self> {
        let r = rotation_matrix(rotation_deg);
        let eu = r * Vec3::new(width, 0.0, 0.0);
        let ev = r * Vec3::new(0.0, height, 0.0);
        let origin = center - eu * 0.5 - ev * 0.5;
        Self::new(origin, eu, ev, albedo, kind)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_albedo(mut self, albedo: f64) -> Self {
        self.albedo = albedo;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.origin.iter().chain(self.edge_u.iter()).chain(self.edge_v.iter())).all(|c| c.is_finite()) {
            return Err(Error::InvalidScene("surface has non-finite coordinates".into()));
        }
        if self.area() <= 1e-18 {
            return Err(Error::InvalidScene(format!("surface {:?} is degenerate (zero area)", self.name)));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::InvalidScene(format!("albedo {} outside [0, 1]", self.albedo)));
        }
        if self.kind == SurfaceKind::Absorber && self.albedo != 0.0 {
            return Err(Error::InvalidScene("absorbers must have zero albedo".into()));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.edge_u.cross(&self.edge_v).norm()
    }

    pub fn normal(&self) -> Dir3 {
        Unit::new_normalize(self.edge_u.cross(&self.edge_v))
    }

    pub fn center(&self) -> Point3 {
        self.origin + self.edge_u * 0.5 + self.edge_v * 0.5
    }

    pub fn corners(&self) -> [Point3; 4] {
        [
            self.origin,
            self.origin + self.edge_u,
            self.origin + self.edge_u + self.edge_v,
            self.origin + self.edge_v,
        ]
    }

    /// Point at parametric coordinates `(a, b)` in `[0, 1]^2`.
    pub fn point_at(&self, a: f64, b: f64) -> Point3 {
        self.origin + self.edge_u * a + self.edge_v * b
    }

    pub(crate) fn prepare(&self) -> PreparedSurface {
        let uu = self.edge_u.dot(&self.edge_u);
        let vv = self.edge_v.dot(&self.edge_v);
        let uv = self.edge_u.dot(&self.edge_v);
        let det = uu * vv - uv * uv;
        PreparedSurface {
            origin: self.origin,
            normal: self.normal().into_inner(),
            u_dual: (self.edge_u * vv - self.edge_v * uv) / det,
            v_dual: (self.edge_v * uu - self.edge_u * uv) / det,
            eps_u: EDGE_EPS / uu.sqrt(),
            eps_v: EDGE_EPS / vv.sqrt(),
            albedo: self.albedo,
            absorber: self.kind == SurfaceKind::Absorber,
        }
    }
}

fn rotation_matrix(deg: [f64; 3]) -> nalgebra::Matrix3<f64> {
    let rx = nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), deg[0].to_radians());
    let ry = nalgebra::Rotation3::from_axis_angle(&Vector3::y_axis(), deg[1].to_radians());
    let rz = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), deg[2].to_radians());
    (rz * ry * rx).into_inner()
}

/// Hot-path form of a [`PlanarSurface`] with the dual basis precomputed.
#[derive(Debug, Clone)]
pub(crate) struct PreparedSurface {
    pub origin: Point3,
    pub normal: Vec3,
    u_dual: Vec3,
    v_dual: Vec3,
    eps_u: f64,
    eps_v: f64,
    pub albedo: f64,
    pub absorber: bool,
}

impl PreparedSurface {
    /// Distance along `dir` (unit) to the rectangle interior, if within
    /// `(t_min, t_max)`.
    #[inline]
    pub fn hit(&self, o: &Point3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let denom = dir.dot(&self.normal);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = (self.origin - o).dot(&self.normal) / denom;
        if !(t > t_min && t < t_max) {
            return None;
        }
        let d = o + dir * t - self.origin;
        let a = d.dot(&self.u_dual);
        if a <= self.eps_u || a >= 1.0 - self.eps_u {
            return None;
        }
        let b = d.dot(&self.v_dual);
        if b <= self.eps_v || b >= 1.0 - self.eps_v {
            return None;
        }
        Some(t)
    }
}

/// Regular grid of relay-wall sample points `x_s` plus the single illuminated
/// point `x_l`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayAperture {
    pub grid_origin: Point3,
    pub step_u: Vec3,
    pub step_v: Vec3,
    pub n_u: usize,
    pub n_v: usize,
    pub normal: Dir3,
    pub laser_point: Point3,
}

impl RelayAperture {
    /// `size_u x size_v` meter aperture in the plane `z = center.z` with normal
    /// `+z`, sampled at cell centers, laser at `center`.
    pub fn centered(center: Point3, size_u: f64, size_v: f64, n_u: usize, n_v: usize) -> Self {
        let step_u = Vec3::new(size_u / n_u as f64, 0.0, 0.0);
        let step_v = Vec3::new(0.0, size_v / n_v as f64, 0.0);
        let grid_origin = center - Vec3::new(size_u / 2.0, size_v / 2.0, 0.0) + (step_u + step_v) * 0.5;
        RelayAperture {
            grid_origin,
            step_u,
            step_v,
            n_u,
            n_v,
            normal: Vector3::z_axis(),
            laser_point: center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u == 0 || self.n_v == 0 {
            return Err(Error::InvalidScene("relay aperture needs at least one point per axis".into()));
        }
        let n = self.normal.into_inner();
        if (n.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScene("relay normal is not unit length".into()));
        }
        let span = self.step_u.norm().max(self.step_v.norm()).max(1.0);
        if self.step_u.dot(&n).abs() > 1e-9 * span || self.step_v.dot(&n).abs() > 1e-9 * span {
            return Err(Error::InvalidScene("relay grid steps leave the relay plane".into()));
        }
        if self.step_u.cross(&self.step_v).norm() <= 0.0 && self.len() > 1 {
            return Err(Error::InvalidScene("relay grid steps are parallel".into()));
        }
        if self.plane_distance(&self.laser_point).abs() > 1e-6 {
            return Err(Error::InvalidScene("laser point is not on the relay plane".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Aperture point `(i, j)`; flat index is `i * n_v + j`.
    pub fn point(&self, i: usize, j: usize) -> Point3 {
        self.grid_origin + self.step_u * i as f64 + self.step_v * j as f64
    }

    pub fn points(&self) -> Vec<Point3> {
        let mut pts = Vec::with_capacity(self.len());
        for i in 0..self.n_u {
            for j in 0..self.n_v {
                pts.push(self.point(i, j));
            }
        }
        pts
    }

    /// Quadrature weight of one aperture sample, `|step_u x step_v|`.
    pub fn area_element(&self) -> f64 {
        self.step_u.cross(&self.step_v).norm()
    }

    /// Signed distance from the relay plane along its normal.
    pub fn plane_distance(&self, p: &Point3) -> f64 {
        (p - self.grid_origin).dot(&self.normal)
    }

    pub fn bounds(&self) -> [Point3; 4] {
        let eu = self.step_u * (self.n_u.saturating_sub(1)) as f64;
        let ev = self.step_v * (self.n_v.saturating_sub(1)) as f64;
        [
            self.grid_origin,
            self.grid_origin + eu,
            self.grid_origin + eu + ev,
            self.grid_origin + ev,
        ]
    }
}

/// A (possibly sheared) lattice of imaging points. Flat index of voxel
/// `(i, j, k)` is `(i * n_v + j) * n_w + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Point3,
    pub axis_u: Vec3,
    pub axis_v: Vec3,
    pub axis_w: Vec3,
    pub n_u: usize,
    pub n_v: usize,
    pub n_w: usize,
}

impl VoxelGrid {
    pub fn new(origin: Point3, axis_u: Vec3, axis_v: Vec3, axis_w: Vec3, n_u: usize, n_v: usize, n_w: usize) -> Result<Self> {
        let g = VoxelGrid {
            origin,
            axis_u,
            axis_v,
            axis_w,
            n_u,
            n_v,
            n_w,
        };
        g.validate()?;
        Ok(g)
    }

    /// Planar `n_u x n_v` grid centered on `center`, spanning `extent_u` along
    /// `dir_u` and `extent_v` along `dir_v` (end points included).
    pub fn plane(center: Point3, dir_u: Vec3, dir_v: Vec3, extent_u: f64, extent_v: f64, n_u: usize, n_v: usize) -> Self {
        let du = dir_u.normalize();
        let dv = dir_v.normalize();
        let step = |extent: f64, n: usize| if n > 1 { extent / (n - 1) as f64 } else { 0.0 };
        let axis_u = du * step(extent_u, n_u);
        let axis_v = dv * step(extent_v, n_v);
        let origin = center - du * (extent_u / 2.0) * f64::from(n_u > 1) - dv * (extent_v / 2.0) * f64::from(n_v > 1);
        let w = du.cross(&dv).normalize() * axis_u.norm().max(axis_v.norm()).max(1e-3);
        VoxelGrid {
            origin,
            axis_u,
            axis_v,
            axis_w: w,
            n_u,
            n_v,
            n_w: 1,
        }
    }

    /// Axis-aligned box with `n` samples per axis, end points included.
    pub fn boxed(min: Point3, max: Point3, n: [usize; 3]) -> Self {
        let step = |lo: f64, hi: f64, n: usize| if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
        let mut origin = min;
        for a in 0..3 {
            if n[a] == 1 {
                origin[a] = 0.5 * (min[a] + max[a]);
            }
        }
        VoxelGrid {
            origin,
            axis_u: Vec3::new(step(min.x, max.x, n[0]), 0.0, 0.0),
            axis_v: Vec3::new(0.0, step(min.y, max.y, n[1]), 0.0),
            axis_w: Vec3::new(0.0, 0.0, step(min.z, max.z, n[2])),
            n_u: n[0],
            n_v: n[1],
            n_w: n[2],
        }
    }

    /// Cell-center samples covering a surface's rectangle (`n_w = 1`).
    pub fn on_surface(s: &PlanarSurface, n_u: usize, n_v: usize) -> Self {
        let axis_u = s.edge_u / n_u as f64;
        let axis_v = s.edge_v / n_v as f64;
        VoxelGrid {
            origin: s.origin + (axis_u + axis_v) * 0.5,
            axis_u,
            axis_v,
            axis_w: s.normal().into_inner() * axis_u.norm().max(axis_v.norm()),
            n_u,
            n_v,
            n_w: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u == 0 || self.n_v == 0 || self.n_w == 0 {
            return Err(Error::InvalidScene("voxel grid counts must be >= 1".into()));
        }
        if self.n_w > 1 {
            let det = self.axis_u.dot(&self.axis_v.cross(&self.axis_w));
            let scale = self.axis_u.norm() * self.axis_v.norm() * self.axis_w.norm();
            if scale == 0.0 || det.abs() <= 1e-12 * scale {
                return Err(Error::InvalidScene("voxel grid axes are linearly dependent".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_u * self.n_v * self.n_w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_u, self.n_v, self.n_w]
    }

    pub fn point(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.origin + self.axis_u * i as f64 + self.axis_v * j as f64 + self.axis_w * k as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_v + j) * self.n_w + k
    }

    pub fn unravel(&self, flat: usize) -> (usize, usize, usize) {
        let k = flat % self.n_w;
        let ij = flat / self.n_w;
        (ij / self.n_v, ij % self.n_v, k)
    }

    pub fn point_flat(&self, flat: usize) -> Point3 {
        let (i, j, k) = self.unravel(flat);
        self.point(i, j, k)
    }

    pub fn points(&self) -> Vec<Point3> {
        (0..self.len()).map(|f| self.point_flat(f)).collect()
    }

    /// Area of one voxel face spanned by the u and v axes.
    pub fn face_area(&self) -> f64 {
        self.axis_u.cross(&self.axis_v).norm()
    }

    /// Largest voxel edge length.
    pub fn voxel_size(&self) -> f64 {
        let mut s = self.axis_u.norm().max(self.axis_v.norm());
        if self.n_w > 1 {
            s = s.max(self.axis_w.norm());
        }
        s
    }
}

/// Hidden-scene geometry plus the relay aperture it is observed from.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub surfaces: Vec<PlanarSurface>,
    pub relay: RelayAperture,
    pub max_bounces: u32,
    /// Named imaging volumes declared alongside the scene.
    pub grids: BTreeMap<String, VoxelGrid>,
}

impl Scene {
    pub fn new(surfaces: Vec<PlanarSurface>, relay: RelayAperture, max_bounces: u32) -> Result<Self> {
        let s = Scene {
            surfaces,
            relay,
            max_bounces,
            grids: BTreeMap::new(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_grid(mut self, name: impl Into<String>, grid: VoxelGrid) -> Self {
        self.grids.insert(name.into(), grid);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_bounces < 3 {
            return Err(Error::InvalidScene(format!("max_bounces = {} < 3", self.max_bounces)));
        }
        self.relay.validate()?;
        for s in &self.surfaces {
            s.validate()?;
            let d: Vec<f64> = s.corners().iter().map(|c| self.relay.plane_distance(c)).collect();
            let above = d.iter().any(|&x| x > PLANE_EPS);
            let below = d.iter().any(|&x| x < -PLANE_EPS);
            if above && below {
                return Err(Error::InvalidScene(format!(
                    "surface {:?} crosses the relay plane",
                    s.name.as_deref().unwrap_or("<unnamed>")
                )));
            }
        }
        for (name, g) in &self.grids {
            g.validate().map_err(|e| Error::InvalidScene(format!("grid {name}: {e}")))?;
        }
        Ok(())
    }

    pub fn surface(&self, name: &str) -> Option<&PlanarSurface> {
        self.surfaces.iter().find(|s| s.name.as_deref() == Some(name))
    }

    /// Copy of the scene without the named surface.
    pub fn without(&self, name: &str) -> Scene {
        let mut s = self.clone();
        s.surfaces.retain(|x| x.name.as_deref() != Some(name));
        s
    }

    pub fn grid(&self, name: &str) -> Result<&VoxelGrid> {
        self.grids
            .get(name)
            .ok_or_else(|| Error::Config(format!("scene declares no grid named {name:?}")))
    }

    pub(crate) fn prepared(&self) -> Vec<PreparedSurface> {
        self.surfaces.iter().map(PlanarSurface::prepare).collect()
    }

    /// Open-segment occlusion test; `skip` excludes one surface index.
    pub(crate) fn segment_clear(&self, a: &Point3, b: &Point3, skip: Option<usize>) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 0.0 {
            return true;
        }
        let dir = d / len;
        for (i, s) in self.surfaces.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            if s.prepare().hit(a, &dir, EDGE_EPS, len - EDGE_EPS).is_some() {
                return false;
            }
        }
        true
    }

    /// Upper bound on the length of any path `x_l -> v_1 -> ... -> x_s` with up
    /// to `max_bounces - 2` scene vertices. Consecutive vertices lie on distinct
    /// surfaces; each leg is bounded by the farthest corner pair.
    pub fn max_path_length(&self, max_bounces: u32) -> f64 {
        let n = self.surfaces.len();
        let scatterers: Vec<usize> = (0..n).filter(|&i| self.surfaces[i].kind == SurfaceKind::Diffuse).collect();
        if scatterers.is_empty() || max_bounces < 3 {
            return 0.0;
        }
        let xl = self.relay.laser_point;
        let aperture = self.relay.bounds();
        let far = |a: &[Point3], b: &[Point3]| {
            let mut m: f64 = 0.0;
            for p in a {
                for q in b {
                    m = m.max((p - q).norm());
                }
            }
            m
        };
        let corners: Vec<[Point3; 4]> = self.surfaces.iter().map(|s| s.corners()).collect();
        // best[i]: longest prefix ending on surface i
        let mut best: Vec<f64> = vec![f64::NEG_INFINITY; n];
        for &i in &scatterers {
            best[i] = far(&[xl], &corners[i]);
        }
        let mut overall: f64 = 0.0;
        let vertices = (max_bounces - 2) as usize;
        for step in 0..vertices {
            for &i in &scatterers {
                if best[i].is_finite() {
                    overall = overall.max(best[i] + far(&corners[i], &aperture));
                }
            }
            if step + 1 == vertices {
                break;
            }
            let mut next = vec![f64::NEG_INFINITY; n];
            for &j in &scatterers {
                for &i in &scatterers {
                    if i != j && best[i].is_finite() {
                        next[j] = next[j].max(best[i] + far(&corners[i], &corners[j]));
                    }
                }
            }
            best = next;
        }
        overall
    }
}

//! TOML scene files.
//!
//! ```toml
//! max_bounces = 5
//!
//! [relay]                      # or: center = [..], size = [su, sv], n = [nu, nv]
//! grid_origin = [-0.96875, -0.96875, 0.0]
//! step_u = [0.0625, 0.0, 0.0]
//! step_v = [0.0, 0.0625, 0.0]
//! n_u = 32
//! n_v = 32
//! normal = [0.0, 0.0, 1.0]
//! laser_point = [0.0, 0.0, 0.0]
//!
//! [[surface]]
//! name = "M"
//! kind = "diffuse"             # or "absorber"
//! albedo = 1.0
//! origin = [-0.8, -0.8, 0.5]   # or: center = [..], size = [w, h], rotate_deg = [rx, ry, rz]
//! edge_u = [1.6, 0.0, 0.0]
//! edge_v = [0.0, 1.6, 0.0]
//!
//! [grid.sprime]                # or: center/u_dir/v_dir/extent/n, or min/max/n,
//! origin = [-0.5, -0.5, 1.0]   #     or mirror_of = "grid", across = "surface"
//! axis_u = [0.02, 0.0, 0.0]
//! axis_v = [0.0, 0.02, 0.0]
//! axis_w = [0.0, 0.0, 0.02]
//! n = [51, 51, 1]
//! ```
//!
//! Lengths are meters, angles degrees. Writing always emits the explicit
//! `origin`/`edge` and `origin`/`axis` forms, so load -> save -> load is exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mirror_reflect_grid, PlanarSurface, RelayAperture, Scene, SurfaceKind, Vec3, VoxelGrid};
use crate::error::{Error, Result};

type Arr = [f64; 3];

fn v(a: Arr) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn arr(p: &Vec3) -> Arr {
    [p.x, p.y, p.z]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default = "default_bounces")]
    pub max_bounces: u32,
    pub relay: RelayEntry,
    #[serde(default, rename = "surface")]
    pub surfaces: Vec<SurfaceEntry>,
    #[serde(default)]
    pub grid: BTreeMap<String, GridEntry>,
}

fn default_bounces() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_origin: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_u: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_v: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_u: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_v: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub laser_point: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_kind")]
    pub kind: SurfaceKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub albedo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_u: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edge_v: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotate_deg: Option<Arr>,
}

fn default_kind() -> SurfaceKind {
    SurfaceKind::Diffuse
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_u: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_v: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis_w: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_dir: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_dir: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<Arr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mirror_of: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub across: Option<String>,
}

fn need<T: Copy>(x: Option<T>, what: &str) -> Result<T> {
    x.ok_or_else(|| Error::Config(format!("missing field `{what}`")))
}

impl RelayEntry {
    fn build(&self) -> Result<RelayAperture> {
        if let (Some(c), Some(size), Some(n)) = (self.center, self.size, self.n) {
            if self.grid_origin.is_some() || self.step_u.is_some() {
                return Err(Error::Config("[relay] mixes center/size/n with grid_origin/steps".into()));
            }
            return Ok(RelayAperture::centered(v(c), size[0], size[1], n[0], n[1]));
        }
        let normal = v(self.normal.unwrap_or([0.0, 0.0, 1.0]));
        if normal.norm() == 0.0 {
            return Err(Error::Config("[relay] normal is zero".into()));
        }
        Ok(RelayAperture {
            grid_origin: v(need(self.grid_origin, "relay.grid_origin")?),
            step_u: v(need(self.step_u, "relay.step_u")?),
            step_v: v(need(self.step_v, "relay.step_v")?),
            n_u: need(self.n_u, "relay.n_u")?,
            n_v: need(self.n_v, "relay.n_v")?,
            normal: nalgebra::Unit::new_normalize(normal),
            laser_point: v(self.laser_point.unwrap_or([0.0; 3])),
        })
    }

    fn from_relay(r: &RelayAperture) -> Self {
        RelayEntry {
            grid_origin: Some(arr(&r.grid_origin)),
            step_u: Some(arr(&r.step_u)),
            step_v: Some(arr(&r.step_v)),
            n_u: Some(r.n_u),
            n_v: Some(r.n_v),
            normal: Some(arr(&r.normal)),
            laser_point: Some(arr(&r.laser_point)),
            ..Default::default()
        }
    }
}

impl SurfaceEntry {
    fn build(&self) -> Result<PlanarSurface> {
        let albedo = self.albedo.unwrap_or(match self.kind {
            SurfaceKind::Diffuse => 1.0,
            SurfaceKind::Absorber => 0.0,
        });
        let label = self.name.clone().unwrap_or_else(|| "<unnamed>".into());
        let s = match (self.origin, self.center) {
            (Some(o), None) => PlanarSurface::new(
                v(o),
                v(need(self.edge_u, "surface.edge_u")?),
                v(need(self.edge_v, "surface.edge_v")?),
                albedo,
                self.kind,
            ),
            (None, Some(c)) => {
                let size = need(self.size, "surface.size")?;
                PlanarSurface::from_center(v(c), size[0], size[1], self.rotate_deg.unwrap_or([0.0; 3]), albedo, self.kind)
            }
            _ => return Err(Error::Config(format!("surface {label}: give exactly one of `origin` or `center`"))),
        }
        .map_err(|e| Error::Config(format!("surface {label}: {e}")))?;
        Ok(PlanarSurface {
            name: self.name.clone(),
            ..s
        })
    }

    fn from_surface(s: &PlanarSurface) -> Self {
        SurfaceEntry {
            name: s.name.clone(),
            kind: s.kind,
            albedo: Some(s.albedo),
            origin: Some(arr(&s.origin)),
            edge_u: Some(arr(&s.edge_u)),
            edge_v: Some(arr(&s.edge_v)),
            ..Default::default()
        }
    }
}

impl GridEntry {
    fn counts(&self, name: &str) -> Result<[usize; 3]> {
        let n = self.n.as_ref().ok_or_else(|| Error::Config(format!("grid {name}: missing `n`")))?;
        match n.as_slice() {
            [a, b] => Ok([*a, *b, 1]),
            [a, b, c] => Ok([*a, *b, *c]),
            _ => Err(Error::Config(format!("grid {name}: `n` needs 2 or 3 entries"))),
        }
    }

    fn build(&self, name: &str, done: &BTreeMap<String, VoxelGrid>, surfaces: &[PlanarSurface]) -> Result<Option<VoxelGrid>> {
        if let Some(src) = &self.mirror_of {
            let Some(base) = done.get(src) else {
                return Ok(None);
            };
            let across = self
                .across
                .as_ref()
                .ok_or_else(|| Error::Config(format!("grid {name}: `mirror_of` needs `across`")))?;
            let m = surfaces
                .iter()
                .find(|s| s.name.as_deref() == Some(across.as_str()))
                .ok_or_else(|| Error::Config(format!("grid {name}: no surface named {across:?}")))?;
            return Ok(Some(mirror_reflect_grid(base, &m.origin, &m.normal())));
        }
        let n = self.counts(name)?;
        let g = if let Some(o) = self.origin {
            VoxelGrid {
                origin: v(o),
                axis_u: v(need(self.axis_u, "grid.axis_u")?),
                axis_v: v(need(self.axis_v, "grid.axis_v")?),
                axis_w: v(self.axis_w.unwrap_or([0.0, 0.0, 0.0])),
                n_u: n[0],
                n_v: n[1],
                n_w: n[2],
            }
        } else if let Some(c) = self.center {
            let e = need(self.extent, "grid.extent")?;
            VoxelGrid::plane(
                v(c),
                v(self.u_dir.unwrap_or([1.0, 0.0, 0.0])),
                v(self.v_dir.unwrap_or([0.0, 1.0, 0.0])),
                e[0],
                e[1],
                n[0],
                n[1],
            )
        } else if let (Some(lo), Some(hi)) = (self.min, self.max) {
            VoxelGrid::boxed(v(lo), v(hi), n)
        } else {
            return Err(Error::Config(format!(
                "grid {name}: give `origin`/axes, `center`/`extent`, `min`/`max`, or `mirror_of`"
            )));
        };
        g.validate().map_err(|e| Error::Config(format!("grid {name}: {e}")))?;
        Ok(Some(g))
    }

    fn from_grid(g: &VoxelGrid) -> Self {
        GridEntry {
            origin: Some(arr(&g.origin)),
            axis_u: Some(arr(&g.axis_u)),
            axis_v: Some(arr(&g.axis_v)),
            axis_w: Some(arr(&g.axis_w)),
            n: Some(vec![g.n_u, g.n_v, g.n_w]),
            ..Default::default()
        }
    }
}

impl SceneFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<Scene> {
        let relay = self.relay.build()?;
        let surfaces = self.surfaces.iter().map(SurfaceEntry::build).collect::<Result<Vec<_>>>()?;
        let mut names = std::collections::BTreeSet::new();
        for s in &surfaces {
            if let Some(n) = &s.name {
                if !names.insert(n.clone()) {
                    return Err(Error::Config(format!("duplicate surface name {n:?}")));
                }
            }
        }
        // mirror_of entries may depend on each other; resolve to a fixed point
        let mut grids = BTreeMap::new();
        let mut pending: Vec<(&String, &GridEntry)> = self.grid.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for (name, entry) in pending {
                match entry.build(name, &grids, &surfaces)? {
                    Some(g) => {
                        grids.insert(name.clone(), g);
                    }
                    None => rest.push((name, entry)),
                }
            }
            if rest.len() == before {
                let names: Vec<_> = rest.iter().map(|(n, _)| n.as_str()).collect();
                return Err(Error::Config(format!("unresolvable mirror_of grids: {names:?}")));
            }
            pending = rest;
        }
        let scene = Scene {
            surfaces,
            relay,
            max_bounces: self.max_bounces,
            grids,
        };
        scene.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(scene)
    }

    pub fn from_scene(scene: &Scene) -> Self {
        SceneFile {
            max_bounces: scene.max_bounces,
            relay: RelayEntry::from_relay(&scene.relay),
            surfaces: scene.surfaces.iter().map(SurfaceEntry::from_surface).collect(),
            grid: scene.grids.iter().map(|(k, g)| (k.clone(), GridEntry::from_grid(g))).collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene files always serialize")
    }
}

impl Scene {
    pub fn from_toml(text: &str) -> Result<Scene> {
        SceneFile::parse(text)?.build()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scene> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read scene file {}: {e}", path.display())))?;
        Scene::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        SceneFile::from_scene(self).to_toml()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }
}

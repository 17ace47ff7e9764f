//! Reproducible experiment runs. An [`ExperimentConfig`] (TOML) names a
//! pipeline, a scene and its parameters; [`run`] writes the pipeline's
//! artifacts plus `manifest.json` into the output directory.
//!
//! Numeric artifacts depend only on the config: no timestamps, no host data,
//! and every parallel reduction is thread-count invariant.

mod pipelines;
pub mod presets;
mod registry;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_nlosh1;
use crate::phasor::{pulse_spectrum, FrequencyBand, IlluminationPulse, DEFAULT_TRUNCATION};
use crate::render::{BounceStratum, RenderParams};
use crate::scene::{Scene, SceneFile, VoxelGrid};
use crate::C;

pub use registry::{preset, preset_names, PRESETS};

/// Environment variable holding the default output directory.
pub const OUT_ENV: &str = "NLOS_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Render,
    ImageTransient,
    ImageConfocal,
    Infer,
    Secondary,
    TwoCorner,
    Wavesim,
    InfinityMirror,
    MissingCone,
}

impl Pipeline {
    pub const ALL: [Pipeline; 9] = [
        Pipeline::Render,
        Pipeline::ImageTransient,
        Pipeline::ImageConfocal,
        Pipeline::Infer,
        Pipeline::Secondary,
        Pipeline::TwoCorner,
        Pipeline::Wavesim,
        Pipeline::InfinityMirror,
        Pipeline::MissingCone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Render => "render",
            Pipeline::ImageTransient => "image-transient",
            Pipeline::ImageConfocal => "image-confocal",
            Pipeline::Infer => "infer",
            Pipeline::Secondary => "secondary",
            Pipeline::TwoCorner => "two-corner",
            Pipeline::Wavesim => "wavesim",
            Pipeline::InfinityMirror => "infinity-mirror",
            Pipeline::MissingCone => "missing-cone",
        }
    }

    fn needs_scene(self) -> bool {
        self != Pipeline::Wavesim
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline {s:?}")))
    }
}

/// Built-in scene generators, addressable from a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScenePreset {
    /// Relay only.
    Empty {
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
    InfinityMirror {
        d: f64,
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
    MissingCone {
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
    MirrorAndOccluded {
        g_angle_deg: f64,
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
    TwoCorner {
        #[serde(default)]
        flipped: bool,
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
    SingleCorner {
        #[serde(default)]
        flipped: bool,
        #[serde(default = "default_aperture")]
        aperture: usize,
    },
}

fn default_aperture() -> usize {
    32
}

impl ScenePreset {
    pub fn build(&self) -> Result<Scene> {
        match *self {
            ScenePreset::Empty { aperture } => Scene::new(
                Vec::new(),
                crate::scene::RelayAperture::centered(crate::Point3::zeros(), 2.0, 2.0, aperture, aperture),
                3,
            ),
            ScenePreset::InfinityMirror { d, aperture } => presets::infinity_mirror(d, aperture),
            ScenePreset::MissingCone { aperture } => presets::missing_cone(aperture),
            ScenePreset::MirrorAndOccluded { g_angle_deg, aperture } => presets::mirror_and_occluded(g_angle_deg, aperture),
            ScenePreset::TwoCorner { flipped, aperture } => presets::two_corner(flipped, aperture),
            ScenePreset::SingleCorner { flipped, aperture } => presets::single_corner(flipped, aperture),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseConfig {
    pub lambda_c: f64,
    pub sigma: f64,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
}

fn default_truncation() -> f64 {
    DEFAULT_TRUNCATION
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            lambda_c: 0.03,
            sigma: 0.03,
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

impl PulseConfig {
    pub fn pulse(&self) -> Result<IlluminationPulse> {
        IlluminationPulse::new(self.lambda_c, self.sigma).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumConfig {
    pub min_bounces: u32,
    pub max_bounces: u32,
    pub paths: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub dt: f64,
    pub paths: u64,
    #[serde(default = "three")]
    pub min_bounces: u32,
    /// Defaults to the scene's `max_bounces`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bounces: Option<u32>,
    /// Defaults to a window covering every path up to `max_bounces`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_bins: Option<usize>,
    /// Bounce strata rendered with separate path budgets and summed. When
    /// empty, one stratum `min_bounces..=max_bounces` with `paths`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strata: Vec<StratumConfig>,
}

fn three() -> u32 {
    3
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            dt: 1e-11,
            paths: 1_000_000,
            min_bounces: 3,
            max_bounces: None,
            n_bins: None,
            strata: Vec::new(),
        }
    }
}

impl RenderConfig {
    /// Render parameters for `scene`; `seed` is the base seed of the strata.
    pub fn params(&self, scene: &Scene, seed: u64) -> RenderParams {
        let max_b = self.max_bounces.unwrap_or(scene.max_bounces);
        let top = self.strata.iter().map(|s| s.max_bounces).max().unwrap_or(max_b);
        let mut probe = scene.clone();
        probe.max_bounces = top.max(3);
        let mut p = RenderParams::for_scene(&probe, self.dt, self.paths, seed).with_bounces(self.min_bounces, max_b);
        if let Some(n) = self.n_bins {
            p.n_bins = n;
        }
        p
    }

    pub fn strata(&self, scene: &Scene) -> Vec<BounceStratum> {
        if self.strata.is_empty() {
            vec![BounceStratum {
                min_bounces: self.min_bounces,
                max_bounces: self.max_bounces.unwrap_or(scene.max_bounces),
                n_paths: self.paths,
            }]
        } else {
            self.strata
                .iter()
                .map(|s| BounceStratum {
                    min_bounces: s.min_bounces,
                    max_bounces: s.max_bounces,
                    n_paths: s.paths,
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImageConfig {
    /// Grids to image; empty means every grid of the scene.
    #[serde(default)]
    pub grids: Vec<String>,
    #[serde(default = "zero_time")]
    pub times: Vec<f64>,
    /// Logarithmic PNG mapping over this many decades; linear when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_decades: Option<f64>,
    #[serde(default)]
    pub csv: bool,
}

fn zero_time() -> Vec<f64> {
    vec![0.0]
}

impl Default for ImageConfig {
    fn default() -> Self {
        ImageConfig {
            grids: Vec::new(),
            times: zero_time(),
            log_decades: None,
            csv: false,
        }
    }
}

/// Secondary-aperture and plane-inference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    /// Volume around the visible surface `M`.
    pub mirror_grid: String,
    /// Grid imaged through the secondary aperture.
    pub image_grid: String,
    pub aperture_threshold: f64,
    pub suppression_radius: f64,
    pub peak_threshold: f64,
    /// Surface used as ground truth in the reports, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_surface: Option<String>,
    /// Translation of the truth footprint giving the control region.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_offset: Option<[f64; 3]>,
}

impl Default for MirrorConfig {
    fn default() -> Self {
        MirrorConfig {
            mirror_grid: "M".into(),
            image_grid: "W".into(),
            aperture_threshold: 0.2,
            suppression_radius: 0.25,
            peak_threshold: 1e-3,
            truth_surface: None,
            control_offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoCornerConfig {
    /// Surface whose plane is the mirror; ignored when `mirror_point` and
    /// `mirror_normal` are both given.
    pub mirror_surface: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_point: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mirror_normal: Option<[f64; 3]>,
    /// Grid already placed behind the mirror.
    pub grid: String,
    /// Surfaces whose mirror images form the ground-truth mask.
    #[serde(default)]
    pub truth_surfaces: Vec<String>,
    /// Truth surfaces already sit at their image (no mirror in the scene).
    #[serde(default)]
    pub reference: bool,
    pub ncc_threshold: f64,
}

impl Default for TwoCornerConfig {
    fn default() -> Self {
        TwoCornerConfig {
            mirror_surface: "M".into(),
            mirror_point: None,
            mirror_normal: None,
            grid: "target".into(),
            truth_surfaces: Vec::new(),
            reference: false,
            ncc_threshold: 0.2,
        }
    }
}

/// Specular-wavefront simulation over the built-in tilted plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WavesimConfig {
    pub tilts_deg: Vec<f64>,
    pub wavelength: f64,
    pub samples: u64,
    pub arc_radius: f64,
    pub arc_span_deg: f64,
    pub arc_step_deg: f64,
    /// Samples per pixel for the field image; `0` skips it.
    #[serde(default)]
    pub image_samples: u64,
}

impl Default for WavesimConfig {
    fn default() -> Self {
        WavesimConfig {
            tilts_deg: vec![0.0, 10.0, 20.0],
            wavelength: 0.02,
            samples: 200_000,
            arc_radius: 2.0,
            arc_span_deg: 60.0,
            arc_step_deg: 0.5,
            image_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfinityConfig {
    pub mirror_surface: String,
    pub first_grid: String,
    pub second_grid: String,
}

impl Default for InfinityConfig {
    fn default() -> Self {
        InfinityConfig {
            mirror_surface: "M".into(),
            first_grid: "S1".into(),
            second_grid: "S2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissingConeConfig {
    /// Footprint grids; the first is the reference plate.
    pub plates: Vec<String>,
}

impl Default for MissingConeConfig {
    fn default() -> Self {
        MissingConeConfig {
            plates: vec!["M1".into(), "M2".into(), "M3".into()],
        }
    }
}

/// One experiment run. Relative paths are resolved against the directory of
/// the config file (see [`ExperimentConfig::load`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    /// Scene TOML file. Takes precedence over `scene_inline` and `scene_preset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    /// Scene written inline in scene-file syntax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_inline: Option<SceneFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_preset: Option<ScenePreset>,
    /// Captured or previously rendered `NLOSH1` data used instead of rendering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default = "one")]
    pub seed: u64,
    /// Worker threads; `0` uses every core. Never affects numeric output.
    #[serde(default)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub pulse: PulseConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub image: ImageConfig,
    #[serde(default)]
    pub mirror: MirrorConfig,
    #[serde(default)]
    pub two_corner: TwoCornerConfig,
    #[serde(default)]
    pub wavesim: WavesimConfig,
    #[serde(default)]
    pub infinity: InfinityConfig,
    #[serde(default)]
    pub missing_cone: MissingConeConfig,
}

fn one() -> u64 {
    1
}

impl ExperimentConfig {
    /// Defaults for `pipeline` with no scene.
    pub fn new(pipeline: Pipeline) -> Self {
        ExperimentConfig {
            pipeline,
            scene: None,
            scene_inline: None,
            scene_preset: None,
            dataset: None,
            seed: 1,
            threads: 0,
            out: None,
            pulse: PulseConfig::default(),
            render: RenderConfig::default(),
            image: ImageConfig::default(),
            mirror: MirrorConfig::default(),
            two_corner: TwoCornerConfig::default(),
            wavesim: WavesimConfig::default(),
            infinity: InfinityConfig::default(),
            missing_cone: MissingConeConfig::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment configs always serialize")
    }

    /// Reads a config file, resolving relative `scene`, `dataset` and `out`
    /// paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.scene, &mut cfg.dataset, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// The config recorded in a run's `manifest.json`, with the scene as built
    /// inlined so the run no longer depends on the original scene source.
    pub fn from_manifest(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |e: String| Error::Config(format!("{}: {e}", path.display()));
        let text = std::fs::read_to_string(path).map_err(|e| bad(e.to_string()))?;
        let m: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let mut cfg: Self = serde_json::from_value(m["config"].clone()).map_err(|e| bad(e.to_string()))?;
        if let Some(scene) = m["scene"].as_str() {
            cfg.scene = None;
            cfg.scene_preset = None;
            cfg.scene_inline = Some(SceneFile::parse(scene).map_err(|e| bad(e.to_string()))?);
        }
        Ok(cfg)
    }

    /// The scene named by `scene` or `scene_preset`, if any.
    pub fn load_scene(&self) -> Result<Option<Scene>> {
        if let Some(path) = &self.scene {
            return Scene::load(path).map(Some);
        }
        if let Some(s) = &self.scene_inline {
            return s.build().map(Some);
        }
        match &self.scene_preset {
            Some(p) => p.build().map(Some).map_err(|e| Error::Config(format!("scene preset: {e}"))),
            None => Ok(None),
        }
    }

    /// Output directory: `out`, else `$NLOS_OUT`, else `./out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Grids imaged by the image pipelines.
    fn image_grids(&self, scene: &Scene) -> Vec<String> {
        if self.image.grids.is_empty() {
            scene.grids.keys().cloned().collect()
        } else {
            self.image.grids.clone()
        }
    }

    /// Grid and surface names the pipeline will look up.
    fn referenced(&self, scene: &Scene) -> (Vec<String>, Vec<String>) {
        let mut grids = Vec::new();
        let mut surfaces = Vec::new();
        match self.pipeline {
            Pipeline::Render | Pipeline::Wavesim => {}
            Pipeline::ImageTransient | Pipeline::ImageConfocal => grids = self.image_grids(scene),
            Pipeline::Infer | Pipeline::Secondary => {
                grids = vec![self.mirror.mirror_grid.clone(), self.mirror.image_grid.clone()];
                surfaces.extend(self.mirror.truth_surface.clone());
            }
            Pipeline::TwoCorner => {
                grids.push(self.two_corner.grid.clone());
                let explicit = self.two_corner.mirror_point.is_some() && self.two_corner.mirror_normal.is_some();
                if !explicit && !self.two_corner.reference {
                    surfaces.push(self.two_corner.mirror_surface.clone());
                }
                surfaces.extend(self.two_corner.truth_surfaces.iter().cloned());
            }
            Pipeline::InfinityMirror => {
                grids = vec![self.infinity.first_grid.clone(), self.infinity.second_grid.clone()];
                surfaces.push(self.infinity.mirror_surface.clone());
            }
            Pipeline::MissingCone => grids = self.missing_cone.plates.clone(),
        }
        (grids, surfaces)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    /// Invalid configuration (exit code 2).
    Error,
    /// The time window cannot hold every path (exit code 3).
    Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
    /// `(path length, window)` in meters for coverage issues.
    #[serde(skip)]
    pub coverage: Option<(f64, f64)>,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
            Severity::Coverage => "coverage",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

/// Dry-run checks; writes nothing. An empty list means the config is ready.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Issue> {
    let mut out = Vec::new();
    let mut coverage = None;
    let mut err = |s: Severity, m: String| {
        out.push(Issue {
            severity: s,
            message: m,
            coverage: None,
        })
    };

    if !(cfg.pulse.lambda_c > 0.0 && cfg.pulse.sigma > 0.0) {
        err(
            Severity::Error,
            format!(
                "pulse parameters must be positive (lambda_c = {}, sigma = {})",
                cfg.pulse.lambda_c, cfg.pulse.sigma
            ),
        );
    }
    for (name, v) in [
        ("mirror.aperture_threshold", cfg.mirror.aperture_threshold),
        ("mirror.peak_threshold", cfg.mirror.peak_threshold),
        ("two_corner.ncc_threshold", cfg.two_corner.ncc_threshold),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            err(Severity::Error, format!("{name} = {v} must lie in (0, 1]"));
        }
    }
    if !cfg.pipeline.needs_scene() {
        let w = &cfg.wavesim;
        if !(w.wavelength > 0.0 && w.arc_radius > 0.0 && w.arc_step_deg > 0.0 && w.arc_span_deg > 0.0) || w.samples == 0 {
            err(
                Severity::Error,
                "wavesim wavelength, arc radius/span/step and samples must be positive".into(),
            );
        }
        if w.tilts_deg.is_empty() {
            err(Severity::Error, "wavesim.tilts_deg is empty".into());
        }
        return out;
    }

    let scene = match cfg.load_scene() {
        Ok(Some(s)) => s,
        Ok(None) => {
            err(
                Severity::Error,
                format!("pipeline {} needs a scene (--scene or --preset)", cfg.pipeline),
            );
            return out;
        }
        Err(e) => {
            err(Severity::Error, e.to_string());
            return out;
        }
    };

    let (grids, surfaces) = cfg.referenced(&scene);
    for g in &grids {
        if !scene.grids.contains_key(g) {
            err(Severity::Error, format!("scene declares no grid named {g:?}"));
        }
    }
    for s in &surfaces {
        if scene.surface(s).is_none() {
            err(Severity::Error, format!("scene declares no surface named {s:?}"));
        }
    }
    // the secondary-aperture image grid is not seen from the relay and may cross it
    let through_m = matches!(cfg.pipeline, Pipeline::Infer | Pipeline::Secondary).then_some(&cfg.mirror.image_grid);
    for g in grids
        .iter()
        .filter(|g| Some(*g) != through_m)
        .filter_map(|g| scene.grids.get(g).map(|x| (g, x)))
    {
        if let Some(w) = relay_plane_warning(&scene, g.1) {
            err(Severity::Warning, format!("grid {:?} {w}", g.0));
        }
    }

    // time axis: either the dataset's or the render's
    let (dt, n_bins) = match &cfg.dataset {
        Some(path) => match read_nlosh1(path) {
            Ok(h) => {
                if h.relay.len() != scene.relay.len() {
                    err(
                        Severity::Warning,
                        format!(
                            "dataset has {} relay points, scene relay has {}; the dataset's relay is used",
                            h.relay.len(),
                            scene.relay.len()
                        ),
                    );
                }
                (h.dt, h.n_bins)
            }
            Err(e) => {
                err(Severity::Error, format!("dataset {}: {e}", path.display()));
                return out;
            }
        },
        None => {
            let r = &cfg.render;
            let p = r.params(&scene, cfg.seed);
            if !(r.dt > 0.0) {
                err(Severity::Error, format!("render.dt = {} must be positive", r.dt));
                return out;
            }
            if r.paths == 0 && r.strata.is_empty() {
                err(Severity::Error, "render.paths must be > 0".into());
            }
            let strata = r.strata(&scene);
            let mut sorted = strata.clone();
            sorted.sort_by_key(|s| s.min_bounces);
            for s in &strata {
                if s.min_bounces < 3 || s.min_bounces > s.max_bounces {
                    err(
                        Severity::Error,
                        format!("bounce stratum {}..={} is empty or below 3", s.min_bounces, s.max_bounces),
                    );
                }
            }
            if sorted.windows(2).any(|w| w[1].min_bounces <= w[0].max_bounces) {
                err(Severity::Error, "bounce strata overlap".into());
            }
            let top = strata.iter().map(|s| s.max_bounces).max().unwrap_or(3);
            let need = scene.max_path_length(top);
            let window = p.n_bins as f64 * p.dt * C;
            if need >= window {
                let message = format!(
                    "{} bins of {:e} s cover {window:.3} m of path but {top}-bounce paths reach {need:.3} m",
                    p.n_bins, p.dt
                );
                err(Severity::Coverage, message);
                coverage = Some((need, window));
            }
            (p.dt, p.n_bins)
        }
    };

    if C * dt > cfg.pulse.lambda_c / 10.0 {
        err(
            Severity::Warning,
            format!(
                "dt = {dt:e} s is coarse for lambda_c = {} m (c dt = {:.4} m > lambda_c / 10)",
                cfg.pulse.lambda_c,
                C * dt
            ),
        );
    }
    if let Ok(pulse) = cfg.pulse.pulse() {
        match pulse_spectrum(&pulse, dt, FrequencyBand::dft_len_for(n_bins), cfg.pulse.truncation) {
            Ok(b) if !b.is_empty() => {}
            Ok(_) | Err(_) => err(
                Severity::Error,
                format!("frequency band is empty for dt = {dt:e} s and lambda_c = {} m", cfg.pulse.lambda_c),
            ),
        }
    }
    for i in out.iter_mut().filter(|i| i.severity == Severity::Coverage) {
        i.coverage = coverage;
    }
    out
}

fn relay_plane_warning(scene: &Scene, g: &VoxelGrid) -> Option<String> {
    let tol = g.voxel_size().max(1e-9);
    let d: Vec<f64> = g.points().iter().map(|p| scene.relay.plane_distance(p)).collect();
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo < -tol && hi > tol {
        Some("intersects the relay plane".into())
    } else if lo.abs().min(hi.abs()) < tol || (lo <= 0.0 && hi >= 0.0) {
        Some("touches the relay plane".into())
    } else if hi < 0.0 {
        Some("lies behind the relay wall".into())
    } else {
        None
    }
}

/// Result of a successful [`run`].
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub out_dir: PathBuf,
    /// Paths relative to `out_dir`, in write order.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    /// Pipeline-specific numbers, also stored in the manifest.
    pub results: serde_json::Map<String, serde_json::Value>,
}

/// Crate version plus `git describe` of the source tree at build time.
pub fn tool_version() -> (String, Option<String>) {
    let git = option_env!("NLOS_GIT_DESCRIBE").filter(|s| !s.is_empty()).map(str::to_owned);
    (env!("CARGO_PKG_VERSION").to_owned(), git)
}

/// Validates, runs the pipeline on a pool of `cfg.threads` workers and writes
/// artifacts plus `manifest.json` to [`ExperimentConfig::out_dir`].
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let issues = validate(cfg);
    if let Some((need, window)) = issues.iter().find_map(|i| i.coverage) {
        return Err(Error::Coverage { path_length: need, window });
    }
    let errors: Vec<String> = issues
        .iter()
        .filter(|i| i.severity == Severity::Error)
        .map(|i| i.message.clone())
        .collect();
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("; ")));
    }
    let warnings: Vec<String> = issues.iter().map(|i| i.message.clone()).collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let out_dir = cfg.out_dir();
    std::fs::create_dir_all(&out_dir)?;
    let mut ctx = pipelines::Context::new(cfg, out_dir.clone());
    pool.install(|| pipelines::dispatch(&mut ctx))?;
    let mut report = RunReport {
        out_dir,
        artifacts: ctx.artifacts,
        warnings,
        results: ctx.results,
    };
    report.warnings.extend(ctx.warnings);
    write_manifest(cfg, ctx.scene.as_ref(), &report)?;
    report.artifacts.push("manifest.json".into());
    Ok(report)
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: ToolInfo,
    pipeline: Pipeline,
    config: &'a ExperimentConfig,
    /// The scene as built, in scene-file syntax.
    #[serde(skip_serializing_if = "Option::is_none")]
    scene: Option<String>,
    artifacts: &'a [String],
    warnings: &'a [String],
    results: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct ToolInfo {
    name: &'static str,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    git: Option<String>,
}

fn write_manifest(cfg: &ExperimentConfig, scene: Option<&Scene>, report: &RunReport) -> Result<()> {
    let (version, git) = tool_version();
    let m = Manifest {
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME"),
            version,
            git,
        },
        pipeline: cfg.pipeline,
        config: cfg,
        scene: scene.map(Scene::to_toml),
        artifacts: &report.artifacts,
        warnings: &report.warnings,
        results: &report.results,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(report.out_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for runtime and
    /// coverage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidScene(_) | Error::Format { .. } => 2,
            _ => 3,
        }
    }
}

//! Shipped experiment presets. The TOML files under `presets/` are the source
//! of truth; they are embedded so the binary works from any directory.

use super::ExperimentConfig;
use crate::error::{Error, Result};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// `(name, TOML text)` of every shipped preset.
        pub const PRESETS: &[(&str, &str)] = &[$(($name, include_str!(concat!("../../presets/", $name, ".toml")))),*];
    };
}

presets!(
    "empty-render",
    "specular-wavefront",
    "infinity-mirror",
    "missing-cone",
    "plane-inference-90",
    "plane-inference-100",
    "plane-inference-80",
    "secondary-aperture",
    "two-corner",
    "two-corner-flipped",
    "single-corner",
    "captured-confocal",
    "captured-two-corner",
);

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let known: Vec<&str> = preset_names().collect();
        Error::Config(format!("unknown preset {name:?}; known presets: {}", known.join(", ")))
    })?;
    ExperimentConfig::parse(text).map_err(|e| Error::Config(format!("preset {name}: {e}")))
}

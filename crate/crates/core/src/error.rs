use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two points closer than the kernel can handle (`|b - a| < 1e-9 m`).
    #[error("singular kernel: points {a:?} and {b:?} are {distance:e} m apart")]
    Singularity { a: [f64; 3], b: [f64; 3], distance: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("frequency band is empty: {0}")]
    BandEmpty(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A sampled path arrived after the end of the histogram window.
    #[error("time window too short: path of {path_length:.4} m exceeds window of {window:.4} m")]
    Coverage { path_length: f64, window: f64 },

    #[error("secondary aperture is empty: no voxel reached {threshold} of the maximum")]
    EmptyAperture { threshold: f64 },

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed dataset {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn singularity(a: &crate::Point3, b: &crate::Point3) -> Self {
        Error::Singularity {
            a: [a.x, a.y, a.z],
            b: [b.x, b.y, b.z],
            distance: (b - a).norm(),
        }
    }
}

//! Transient rendering and phasor-field imaging for non-line-of-sight scenes.
//!
//! The crate is organised bottom-up:
//!
//! * [`scene`]: planar hidden geometry, the relay aperture, voxel grids and
//!   mirror-reflection helpers.
//! * [`render`]: a Monte Carlo light tracer producing the impulse response
//!   `H(x_l, x_s, t)`.
//! * [`phasor`]: the frequency-domain imaging core (pulse spectrum, RSD kernel,
//!   transient and confocal virtual cameras).
//! * [`wavesim`]: single-frequency Huygens superposition over one diffuse plane.
//! * [`mirrors`]: plane inference from mirror images, secondary-aperture
//!   imaging and two-corner imaging.
//! * [`io`] and [`experiment`]: dataset and image formats, scene presets and
//!   the pipelines behind the `nlos` binary.
//!
//! ```no_run
//! use phasor_nlos::prelude::*;
//!
//! let scene = Scene::load("scene.toml")?;
//! let params = RenderParams::for_scene(&scene, 1e-11, 200_000, 7);
//! let h = render_impulse_response(&scene, &params)?;
//! let pulse = IlluminationPulse::new(0.03, 0.03)?;
//! let img = confocal_camera(&h, &pulse, scene.grid("volume")?)?;
//! let frame = evaluate_at_time(&img, 0.0);
//! # Ok::<(), phasor_nlos::Error>(())
//! ```

// `!(x > 0.0)` is deliberate: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops over parallel arrays of bins and frequencies read better.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod experiment;
pub mod io;
pub mod mirrors;
pub mod phasor;
pub mod render;
pub mod scene;
pub mod wavesim;

pub use error::{Error, Result};
pub use scene::{Dir3, Point3, Vec3};

/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::mirrors::{
        confocal_camera_secondary, detect_peaks, extract_secondary_aperture, infer_plane, transient_camera_secondary, two_corner_image,
        PlaneEstimate, SecondaryAperture,
    };
    pub use crate::phasor::{
        confocal_camera, evaluate_at_time, propagate, pulse_spectrum, rsd_kernel, scene_response, transient_camera, FocalStackImage,
        FrequencyBand, IlluminationPulse, PhasorField, TimeSlice,
    };
    pub use crate::render::{
        convolve_sensor_response, render_bounce_separated, render_impulse_response, render_strata, BounceStratum, ImpulseResponse,
        LatePolicy, RenderParams,
    };
    pub use crate::scene::{
        mirror_reflect_grid, mirror_reflect_point, point_visibility, Dir3, PlanarSurface, Point3, RelayAperture, Scene, SurfaceKind, Vec3,
        VoxelGrid,
    };
    pub use crate::wavesim::{simulate_ray_field, simulate_wave_field, FieldImage};
    pub use crate::C;
}

//! Monte Carlo transient rendering of the relay-origin impulse response.

mod sensor;
mod tracer;

use crate::error::{Error, Result};
use crate::scene::{RelayAperture, Scene};
use crate::C;

pub use sensor::convolve_sensor_response;
pub use tracer::{render_bounce_separated, render_impulse_response, render_strata, render_with_stats, BounceStratum, RenderStats};

/// Time origin of an [`ImpulseResponse`]. Only relay-origin data exists: time
/// zero is the instant light leaves `x_l`, and arrival is measured at `x_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeOrigin {
    Relay,
}

/// Dense `H(x_l, x_s, t)` histogram. Bin `b` covers `[b dt, (b + 1) dt)`.
/// Storage is `[s_u][s_v][t]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub relay: RelayAperture,
    pub dt: f64,
    pub n_bins: usize,
    pub t0: TimeOrigin,
    pub values: Vec<f64>,
}

impl ImpulseResponse {
    pub fn zeros(relay: RelayAperture, dt: f64, n_bins: usize) -> Self {
        let n = relay.len() * n_bins;
        ImpulseResponse {
            relay,
            dt,
            n_bins,
            t0: TimeOrigin::Relay,
            values: vec![0.0; n],
        }
    }

    pub fn from_values(relay: RelayAperture, dt: f64, n_bins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != relay.len() * n_bins {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} aperture points x {} bins",
                values.len(),
                relay.len(),
                n_bins
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParams(format!("dt = {dt} must be positive")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParams(format!("impulse response holds invalid value {bad}")));
        }
        Ok(ImpulseResponse {
            relay,
            dt,
            n_bins,
            t0: TimeOrigin::Relay,
            values,
        })
    }

    pub fn n_points(&self) -> usize {
        self.relay.len()
    }

    /// Time series at flat aperture index `s`.
    pub fn series(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_bins..(s + 1) * self.n_bins]
    }

    pub fn series_mut(&mut self, s: usize) -> &mut [f64] {
        let n = self.n_bins;
        &mut self.values[s * n..(s + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize, b: usize) -> f64 {
        self.values[(i * self.relay.n_v + j) * self.n_bins + b]
    }

    pub fn total_energy(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Duration of the histogram window in seconds.
    pub fn window(&self) -> f64 {
        self.n_bins as f64 * self.dt
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Elementwise sum; both responses must share the sampling.
    pub fn add(&self, other: &ImpulseResponse) -> Result<Self> {
        self.check_same_sampling(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(out)
    }

    /// Delay every series by `m` bins, dropping what falls off the end.
    pub fn delayed(&self, m: usize) -> Self {
        let mut out = ImpulseResponse::zeros(self.relay.clone(), self.dt, self.n_bins);
        for s in 0..self.n_points() {
            let src = self.series(s);
            let dst = out.series_mut(s);
            let keep = self.n_bins.saturating_sub(m);
            dst[m.min(self.n_bins)..].copy_from_slice(&src[..keep]);
        }
        out
    }

    /// Index of the largest bin of series `s` (first on ties).
    pub fn peak_bin(&self, s: usize) -> Option<usize> {
        let series = self.series(s);
        let mut best: Option<(usize, f64)> = None;
        for (b, &v) in series.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, m)| v > m) {
                best = Some((b, v));
            }
        }
        best.map(|(b, _)| b)
    }

    pub(crate) fn check_same_sampling(&self, other: &ImpulseResponse) -> Result<()> {
        if self.n_bins != other.n_bins || self.dt != other.dt || self.relay != other.relay {
            return Err(Error::DimensionMismatch("impulse responses use different sampling".into()));
        }
        Ok(())
    }
}

/// What to do with a path that arrives after the histogram window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatePolicy {
    /// Drop the contribution, count it, and log a warning.
    Warn,
    /// Abort the render with [`Error::Coverage`].
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderParams {
    pub n_paths: u64,
    pub seed: u64,
    /// Seconds per bin.
    pub dt: f64,
    pub n_bins: usize,
    pub min_bounces: u32,
    pub max_bounces: u32,
    /// Sensor jitter FWHM in seconds, `0` for an ideal sensor. Never applied by
    /// the renderer itself; see [`convolve_sensor_response`].
    pub sensor_fwhm: f64,
    pub late: LatePolicy,
}

impl RenderParams {
    /// Parameters whose window covers every path of up to `scene.max_bounces`
    /// bounces, with 5% slack.
    pub fn for_scene(scene: &Scene, dt: f64, n_paths: u64, seed: u64) -> Self {
        let max_len = scene.max_path_length(scene.max_bounces);
        let n_bins = ((max_len * 1.05 / (C * dt)).ceil() as usize).max(16);
        RenderParams {
            n_paths,
            seed,
            dt,
            n_bins,
            min_bounces: 3,
            max_bounces: scene.max_bounces,
            sensor_fwhm: 0.0,
            late: LatePolicy::Warn,
        }
    }

    pub fn with_bounces(mut self, min: u32, max: u32) -> Self {
        self.min_bounces = min;
        self.max_bounces = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidParams("n_bins must be >= 1".into()));
        }
        if self.min_bounces < 3 || self.min_bounces > self.max_bounces {
            return Err(Error::InvalidParams(format!(
                "need 3 <= min_bounces ({}) <= max_bounces ({})",
                self.min_bounces, self.max_bounces
            )));
        }
        if !(self.sensor_fwhm >= 0.0) {
            return Err(Error::InvalidParams("sensor_fwhm must be >= 0".into()));
        }
        Ok(())
    }

    /// `Err(Coverage)` if the longest possible path misses the window.
    pub fn check_coverage(&self, scene: &Scene) -> Result<()> {
        let need = scene.max_path_length(self.max_bounces);
        let window = self.n_bins as f64 * self.dt * C;
        if need >= window {
            return Err(Error::Coverage { path_length: need, window });
        }
        Ok(())
    }
}

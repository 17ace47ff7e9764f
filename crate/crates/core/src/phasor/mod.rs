//! Phasor-field imaging in the frequency domain.
//!
//! Conventions: the forward DFT uses `e^{-i 2 pi k n / N}`, so a delay of `b`
//! bins multiplies a spectrum by `e^{-i 2 pi Omega b dt}`. Propagation uses the
//! kernel `e^{i k r} / r` and time evaluation uses `e^{+i 2 pi Omega t}`, so a
//! backprojected wavefront focuses at `t = 0`.

mod camera;
mod propagate;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::render::ImpulseResponse;
use crate::scene::{RelayAperture, VoxelGrid};
use crate::{Point3, C};

pub(crate) use camera::confocal_from_transient;
pub use camera::{confocal_camera, evaluate_at_time, transient_camera, FocalStackImage, Imager, TimeSlice, DEFAULT_TRUNCATION};
pub(crate) use propagate::backproject;
pub use propagate::propagate;

/// Gaussian-envelope carrier `e^{i 2 pi tau / lambda_c - (tau / sigma)^2 / 2}`
/// with `tau` in optical length (meters). Amplitude is fixed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlluminationPulse {
    pub lambda_c: f64,
    pub sigma: f64,
}

impl IlluminationPulse {
    pub fn new(lambda_c: f64, sigma: f64) -> Result<Self> {
        if !(lambda_c > 0.0 && lambda_c.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "pulse needs lambda_c > 0 and sigma > 0 (got {lambda_c}, {sigma})"
            )));
        }
        Ok(IlluminationPulse { lambda_c, sigma })
    }

    /// Pulse value at optical delay `tau` meters.
    pub fn value(&self, tau: f64) -> Complex64 {
        let env = (-0.5 * (tau / self.sigma).powi(2)).exp();
        Complex64::from_polar(env, 2.0 * std::f64::consts::PI * tau / self.lambda_c)
    }

    /// Carrier frequency `c / lambda_c` in Hz.
    pub fn carrier(&self) -> f64 {
        C / self.lambda_c
    }

    /// Envelope standard deviation in seconds.
    pub fn sigma_t(&self) -> f64 {
        self.sigma / C
    }
}

/// A contiguous run of DFT bins `first_index .. first_index + len` and the
/// pulse spectrum on them.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBand {
    pub omegas: Vec<f64>,
    pub weights: Vec<Complex64>,
    pub dft_len: usize,
    pub dt: f64,
    pub first_index: usize,
}

impl FrequencyBand {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Frequency spacing `1 / (N dt)`.
    pub fn resolution(&self) -> f64 {
        1.0 / (self.dft_len as f64 * self.dt)
    }

    /// DFT length used for an impulse response of `n_bins` bins.
    pub fn dft_len_for(n_bins: usize) -> usize {
        (2 * n_bins).next_power_of_two()
    }

    /// A band over explicit DFT bins with unit weights; for tests and for
    /// imaging data that is already pulse-filtered.
    pub fn from_bins(dt: f64, dft_len: usize, first_index: usize, len: usize) -> Self {
        let df = 1.0 / (dft_len as f64 * dt);
        FrequencyBand {
            omegas: (first_index..first_index + len).map(|k| k as f64 * df).collect(),
            weights: vec![Complex64::new(1.0, 0.0); len],
            dft_len,
            dt,
            first_index,
        }
    }

    /// Same bins, spacing and DFT length; weights may differ.
    pub fn same_as(&self, other: &FrequencyBand) -> bool {
        self.first_index == other.first_index && self.len() == other.len() && self.dft_len == other.dft_len && self.dt == other.dt
    }
}

/// Sampled pulse for a DFT of length `dft_len`: sample `n` sits at delay
/// `n dt` for `n < N/2`, at `(n - N) dt` otherwise.
pub fn sampled_pulse(pulse: &IlluminationPulse, dt: f64, dft_len: usize) -> Vec<Complex64> {
    (0..dft_len)
        .map(|n| {
            let m = if n < dft_len / 2 { n as f64 } else { n as f64 - dft_len as f64 };
            pulse.value(m * dt * C)
        })
        .collect()
}

/// DFT of the sampled pulse, truncated to the contiguous run of non-negative
/// frequencies around the peak whose magnitude is at least
/// `truncation_eps * peak`.
pub fn pulse_spectrum(pulse: &IlluminationPulse, dt: f64, dft_len: usize, truncation_eps: f64) -> Result<FrequencyBand> {
    if !(truncation_eps > 0.0 && truncation_eps < 1.0) {
        return Err(Error::InvalidParams(format!("truncation_eps = {truncation_eps} outside (0, 1)")));
    }
    if dft_len < 2 || !(dt > 0.0) {
        return Err(Error::InvalidParams("pulse spectrum needs dft_len >= 2 and dt > 0".into()));
    }
    let nyquist = 0.5 / dt;
    if pulse.carrier() >= nyquist {
        return Err(Error::BandEmpty(format!(
            "carrier {:.4e} Hz is above the Nyquist limit {:.4e} Hz of dt = {dt:e} s",
            pulse.carrier(),
            nyquist
        )));
    }
    let mut buf = sampled_pulse(pulse, dt, dft_len);
    FftPlanner::new().plan_fft_forward(dft_len).process(&mut buf);
    let half = dft_len / 2;
    let (peak_k, peak) = buf[..=half]
        .iter()
        .enumerate()
        .map(|(k, v)| (k, v.norm()))
        .fold((0, 0.0), |best, (k, m)| if m > best.1 { (k, m) } else { best });
    if !(peak > 0.0) {
        return Err(Error::BandEmpty("pulse spectrum vanishes".into()));
    }
    let floor = truncation_eps * peak;
    let mut lo = peak_k;
    while lo > 0 && buf[lo - 1].norm() >= floor {
        lo -= 1;
    }
    let mut hi = peak_k;
    while hi < half && buf[hi + 1].norm() >= floor {
        hi += 1;
    }
    let df = 1.0 / (dft_len as f64 * dt);
    Ok(FrequencyBand {
        omegas: (lo..=hi).map(|k| k as f64 * df).collect(),
        weights: buf[lo..=hi].to_vec(),
        dft_len,
        dt,
        first_index: lo,
    })
}

/// Complex amplitudes on a set of points, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorField {
    pub points: Vec<Point3>,
    /// Quadrature weight (m^2) of each point.
    pub area: Vec<f64>,
    /// `[point][omega]`, row-major.
    pub values: Vec<Complex64>,
    pub band: FrequencyBand,
}

impl PhasorField {
    pub fn new(points: Vec<Point3>, area: Vec<f64>, values: Vec<Complex64>, band: FrequencyBand) -> Result<Self> {
        if points.len() != area.len() || values.len() != points.len() * band.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points, {} weights, {} values for {} frequencies",
                points.len(),
                area.len(),
                values.len(),
                band.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidParams("phasor field holds non-finite values".into()));
        }
        Ok(PhasorField {
            points,
            area,
            values,
            band,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, p: usize) -> &[Complex64] {
        let n = self.band.len();
        &self.values[p * n..(p + 1) * n]
    }
}

/// `P(x_s, Omega) = P(x_l, Omega) H(x_l, x_s, Omega)` on the band's bins.
pub fn scene_response(h: &ImpulseResponse, band: &FrequencyBand) -> Result<PhasorField> {
    if band.dt != h.dt {
        return Err(Error::DimensionMismatch(format!("band dt {} differs from H dt {}", band.dt, h.dt)));
    }
    if band.dft_len < h.n_bins {
        return Err(Error::DimensionMismatch(format!(
            "dft_len {} shorter than {} bins",
            band.dft_len, h.n_bins
        )));
    }
    if band.first_index + band.len() > band.dft_len {
        return Err(Error::DimensionMismatch("band exceeds the DFT length".into()));
    }
    let fft = FftPlanner::new().plan_fft_forward(band.dft_len);
    let nf = band.len();
    let mut values = vec![Complex64::default(); h.n_points() * nf];
    let mut buf = vec![Complex64::default(); band.dft_len];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    for (s, row) in values.chunks_mut(nf.max(1)).enumerate().take(h.n_points()) {
        let series = h.series(s);
        if series.iter().all(|v| *v == 0.0) {
            continue;
        }
        buf.iter_mut().for_each(|b| *b = Complex64::default());
        for (b, &v) in series.iter().enumerate() {
            buf[b].re = v;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (j, out) in row.iter_mut().enumerate() {
            *out = band.weights[j] * buf[band.first_index + j];
        }
    }
    PhasorField::new(h.relay.points(), vec![h.relay.area_element(); h.n_points()], values, band.clone())
}

/// `e^{i k r} / r` with `k = 2 pi Omega / c`.
pub fn rsd_kernel(a: &Point3, b: &Point3, omega: f64) -> Result<Complex64> {
    let r = (b - a).norm();
    if r < 1e-9 {
        return Err(Error::singularity(a, b));
    }
    let k = 2.0 * std::f64::consts::PI * omega / C;
    Ok(Complex64::from_polar(1.0 / r, k * r))
}

/// Phasor field on a voxel grid's points, area weights taken from voxel faces.
pub fn field_on_grid(grid: &VoxelGrid, values: Vec<Complex64>, band: FrequencyBand) -> Result<PhasorField> {
    PhasorField::new(grid.points(), vec![grid.face_area(); grid.len()], values, band)
}

/// Phasor field on the relay points, area weights from the aperture grid.
pub fn relay_field(relay: &RelayAperture, values: Vec<Complex64>, band: FrequencyBand) -> Result<PhasorField> {
    PhasorField::new(relay.points(), vec![relay.area_element(); relay.len()], values, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn pulse_is_one_at_zero() {
        let p = IlluminationPulse::new(0.03, 0.03).unwrap();
        assert_eq!(p.value(0.0), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn spectrum_peaks_at_carrier() {
        for (lc, sigma) in [(0.03, 0.03), (0.05, 0.06), (0.12, 0.14)] {
            let p = IlluminationPulse::new(lc, sigma).unwrap();
            let band = pulse_spectrum(&p, 1e-11, 4096, 1e-3).unwrap();
            let (j, _) = band
                .weights
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
                .unwrap();
            assert!((band.omegas[j] - p.carrier()).abs() <= band.resolution());
        }
    }

    #[test]
    fn three_cm_band_is_a_bump_around_ten_gigahertz() {
        let p = IlluminationPulse::new(0.03, 0.03).unwrap();
        let band = pulse_spectrum(&p, 1e-11, 4096, 1e-3).unwrap();
        let centre = 0.5 * (band.omegas[0] + band.omegas[band.len() - 1]);
        assert!((centre - 9.993e9).abs() < 2.0 * band.resolution());
        // Gaussian spectrum: std 1 / (2 pi sigma_t), cut at 1e-3 -> half-width sqrt(2 ln 1000) std
        let half = (2.0 * 1000f64.ln()).sqrt() / (2.0 * PI * p.sigma_t());
        let width = band.omegas[band.len() - 1] - band.omegas[0];
        assert!((width - 2.0 * half).abs() < 3.0 * band.resolution(), "{width} vs {}", 2.0 * half);
        assert!(band.omegas.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn unresolvable_carrier_is_band_empty() {
        let p = IlluminationPulse::new(0.003, 0.03).unwrap();
        assert!(matches!(pulse_spectrum(&p, 1e-11, 1024, 1e-3), Err(Error::BandEmpty(_))));
    }

    #[test]
    fn kernel_full_period_is_one() {
        let a = Point3::zeros();
        let b = Point3::new(0.0, 1.0, 0.0);
        let k = rsd_kernel(&a, &b, C).unwrap();
        assert_relative_eq!(k.re, 1.0, epsilon = 1e-12);
        assert!(k.im.abs() < 1e-12);
    }

    #[test]
    fn kernel_magnitude_is_inverse_distance() {
        let k = rsd_kernel(&Point3::zeros(), &Point3::new(2.5, 0.0, 0.0), 3.7e9).unwrap();
        assert_relative_eq!(k.norm(), 0.4, epsilon = 1e-14);
    }

    #[test]
    fn kernel_legs_compose() {
        let (a, m, b) = (Point3::zeros(), Point3::new(0.3, 0.2, 1.0), Point3::new(-0.5, 0.1, 0.0));
        let omega = 9.9e9;
        let prod = rsd_kernel(&a, &m, omega).unwrap() * rsd_kernel(&m, &b, omega).unwrap();
        let k = 2.0 * PI * omega / C;
        let expect = k * ((m - a).norm() + (b - m).norm());
        let diff = (prod.arg() - expect).rem_euclid(2.0 * PI);
        assert!(diff < 1e-9 || 2.0 * PI - diff < 1e-9);
    }

    #[test]
    fn kernel_singularity() {
        let a = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(rsd_kernel(&a, &a, 1e9), Err(Error::Singularity { .. })));
    }

    #[test]
    fn spike_response_is_shifted_weights() {
        let relay = RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 2, 2);
        let mut h = ImpulseResponse::zeros(relay, 1e-11, 300);
        let b = 137;
        h.values[2 * 300 + b] = 1.0;
        let p = IlluminationPulse::new(0.03, 0.03).unwrap();
        let band = pulse_spectrum(&p, 1e-11, FrequencyBand::dft_len_for(300), 1e-3).unwrap();
        let f = scene_response(&h, &band).unwrap();
        for (j, w) in band.weights.iter().enumerate() {
            let expect = w * Complex64::from_polar(1.0, -2.0 * PI * band.omegas[j] * b as f64 * 1e-11);
            assert!((f.row(2)[j] - expect).norm() <= 1e-9 * w.norm().max(1e-300));
            assert_eq!(f.row(0)[j], Complex64::default());
        }
    }
}

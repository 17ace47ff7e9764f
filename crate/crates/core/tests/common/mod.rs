//! Independent oracles shared by the integration tests. Nothing here calls
//! into the imaging code it checks: transforms are naive sums, delays are
//! evaluated in the time domain.
#![allow(dead_code)]

pub mod checks;

use std::f64::consts::PI;

use num_complex::Complex64;
use phasor_nlos::phasor::{FrequencyBand, IlluminationPulse};
use phasor_nlos::render::ImpulseResponse;
use phasor_nlos::scene::RelayAperture;
use phasor_nlos::{Point3, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `|a - b|_2 / |b|_2` over complex vectors.
pub fn rel_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn rel_l2_real(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Random non-negative response with the last `tail` bins of every series
/// left empty.
pub fn random_h(relay: RelayAperture, dt: f64, n_bins: usize, tail: usize, seed: u64) -> ImpulseResponse {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = relay.len() * n_bins;
    let mut values = vec![0.0; n];
    for (i, v) in values.iter_mut().enumerate() {
        if i % n_bins < n_bins - tail {
            *v = rng.gen::<f64>();
        }
    }
    ImpulseResponse::from_values(relay, dt, n_bins, values).unwrap()
}

/// `sum_n x[n] e^{-2 pi i k n / N}` by direct summation.
pub fn naive_dft_bin(x: &[Complex64], k: usize) -> Complex64 {
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k as f64) * (j as f64) / n))
        .sum()
}

/// The pulse spectrum on bins `first..first + len` of an `N`-point DFT,
/// evaluated from the analytic pulse by direct summation.
pub fn oracle_band(pulse: &IlluminationPulse, dt: f64, dft_len: usize, first: usize, len: usize) -> FrequencyBand {
    let samples: Vec<Complex64> = (0..dft_len)
        .map(|n| {
            let m = if n < dft_len / 2 { n as f64 } else { n as f64 - dft_len as f64 };
            pulse.value(m * dt * C)
        })
        .collect();
    let mut band = FrequencyBand::from_bins(dt, dft_len, first, len);
    band.weights = (first..first + len).map(|k| naive_dft_bin(&samples, k)).collect();
    band
}

/// Band-limited virtual pulse `sum_j w_j e^{i 2 pi Omega_j tau}`.
pub fn virtual_pulse(band: &FrequencyBand, tau: f64) -> Complex64 {
    band.omegas
        .iter()
        .zip(&band.weights)
        .map(|(w, a)| a * Complex64::from_polar(1.0, 2.0 * PI * w * tau))
        .sum()
}

/// Time-domain backprojection at time `t`: every histogram bin is a pulse
/// emitted at `b dt` and propagated back along its path,
///
/// `f(x_v, t) = sum_s dA sum_b H_s[b] p(t + L/c - b dt) / R`,
///
/// with `L = |x_s - x_v|`, `R = |x_s - x_v|` for the transient camera and
/// `L = |x_l - x_v| + |x_s - x_v|`, `R = |x_l - x_v| |x_s - x_v|` for the
/// confocal camera.
pub fn td_backprojection(h: &ImpulseResponse, band: &FrequencyBand, voxels: &[Point3], t: f64, confocal: bool) -> Vec<Complex64> {
    let relay = h.relay.points();
    let da = h.relay.area_element();
    let xl = h.relay.laser_point;
    voxels
        .iter()
        .map(|v| {
            let (l0, r0) = if confocal { ((xl - v).norm(), (xl - v).norm()) } else { (0.0, 1.0) };
            let mut acc = Complex64::default();
            for (s, xs) in relay.iter().enumerate() {
                let r = (xs - v).norm();
                let series = h.series(s);
                for (b, &val) in series.iter().enumerate() {
                    if val != 0.0 {
                        let tau = t + (l0 + r) / C - b as f64 * h.dt;
                        acc += virtual_pulse(band, tau) * (val * da / (r * r0));
                    }
                }
            }
            acc
        })
        .collect()
}

/// Histogram bin of the single-scatter path `x_l -> p -> x_s`.
pub fn tof_bin(xl: &Point3, p: &Point3, xs: &Point3, dt: f64) -> usize {
    (((xl - p).norm() + (p - xs).norm()) / (C * dt)).floor() as usize
}

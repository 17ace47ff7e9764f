use super::ImpulseResponse;

/// Convolves every time series with a unit-area Gaussian of the given FWHM
/// (seconds). Taps that fall outside the window are folded onto the edge bin,
/// so total energy is preserved.
pub fn convolve_sensor_response(h: &ImpulseResponse, fwhm: f64) -> ImpulseResponse {
    assert!(fwhm >= 0.0, "fwhm must be non-negative");
    if fwhm == 0.0 {
        return h.clone();
    }
    let sigma_bins = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt()) / h.dt;
    let radius = (5.0 * sigma_bins).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius).map(|k| (-0.5 * (k as f64 / sigma_bins).powi(2)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= norm);

    let n = h.n_bins as isize;
    let mut out = ImpulseResponse::zeros(h.relay.clone(), h.dt, h.n_bins);
    for s in 0..h.n_points() {
        let src = h.series(s);
        let dst = out.series_mut(s);
        for (b, &x) in src.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (k, w) in kernel.iter().enumerate() {
                let t = (b as isize + k as isize - radius).clamp(0, n - 1);
                dst[t as usize] += x * w;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::RelayAperture;
    use crate::Point3;

    fn delta(n_bins: usize, at: usize) -> ImpulseResponse {
        let mut h = ImpulseResponse::zeros(RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 1, 1), 1e-11, n_bins);
        h.values[at] = 1.0;
        h
    }

    #[test]
    fn zero_fwhm_is_identity() {
        let h = delta(64, 10);
        assert_eq!(convolve_sensor_response(&h, 0.0), h);
    }

    #[test]
    fn half_max_width_matches_fwhm() {
        let h = delta(200, 100);
        let g = convolve_sensor_response(&h, 60e-12);
        let s = g.series(0);
        let peak = s[100];
        let half = peak / 2.0;
        // linear interpolation of the half-max crossings on both sides
        let cross = |range: Box<dyn Iterator<Item = usize>>| {
            for b in range {
                let (a, c) = (s[b], s[b + 1]);
                if (a - half) * (c - half) <= 0.0 && a != c {
                    return b as f64 + (half - a) / (c - a);
                }
            }
            f64::NAN
        };
        let left = cross(Box::new(80..100));
        let right = cross(Box::new(100..120));
        let width = (right - left) * 1e-11;
        assert!((width - 60e-12).abs() <= 1e-11, "width {width}");
    }

    #[test]
    fn energy_is_preserved_even_at_edges() {
        let mut h = delta(50, 1);
        h.values[48] = 3.0;
        h.values[25] = 0.5;
        let g = convolve_sensor_response(&h, 80e-12);
        let (a, b) = (h.total_energy(), g.total_energy());
        assert!(((a - b) / a).abs() < 1e-6);
    }
}

//! Check bodies shared by the property tests and the acceptance suite. Each
//! returns the measured error so callers choose how to report it.

use std::f64::consts::PI;

use num_complex::Complex64;
use phasor_nlos::phasor::{evaluate_at_time, pulse_spectrum, scene_response, FrequencyBand, IlluminationPulse, Imager};
use phasor_nlos::render::{render_bounce_separated, render_impulse_response, ImpulseResponse, RenderParams};
use phasor_nlos::scene::{PlanarSurface, RelayAperture, Scene, SurfaceKind, VoxelGrid};
use phasor_nlos::{Point3, C};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub const DT: f64 = 1e-11;

pub fn relay(n: usize) -> RelayAperture {
    RelayAperture::centered(Point3::zeros(), 0.8, 0.8, n, n)
}

fn small_grid() -> VoxelGrid {
    VoxelGrid::boxed(Point3::new(-0.3, -0.3, 0.2), Point3::new(0.3, 0.3, 0.6), [4, 4, 3])
}

fn pulse_band(n_bins: usize) -> FrequencyBand {
    let pulse = IlluminationPulse::new(0.03, 0.03).unwrap();
    pulse_spectrum(&pulse, DT, FrequencyBand::dft_len_for(n_bins), 1e-3).unwrap()
}

fn image(h: &ImpulseResponse, band: &FrequencyBand, t: f64) -> Vec<Complex64> {
    let img = Imager::with_band(h, band).unwrap().transient(&small_grid()).unwrap();
    evaluate_at_time(&img, t).complex
}

/// Relative L2 of the fast transient and confocal cameras against
/// time-domain backprojection: 4 x 4 relay, 5^3 grid, 8 frequencies.
pub fn camera_oracle_errors() -> (f64, f64) {
    let mut relay = RelayAperture::centered(Point3::zeros(), 0.6, 0.6, 4, 4);
    relay.laser_point = Point3::new(0.1, -0.05, 0.0);
    let n_bins = 64;
    let h = random_h(relay, DT, n_bins, 0, 11);
    let pulse = IlluminationPulse::new(0.03, 0.03).unwrap();
    let band = oracle_band(&pulse, DT, FrequencyBand::dft_len_for(n_bins), 9, 8);
    let grid = VoxelGrid::boxed(Point3::new(-0.2, -0.2, 0.05), Point3::new(0.2, 0.2, 0.15), [5, 5, 5]);
    let imager = Imager::with_band(&h, &band).unwrap();
    let (tc, cc) = (imager.transient(&grid).unwrap(), imager.confocal(&grid).unwrap());
    let (mut etc, mut ecc) = (0.0f64, 0.0f64);
    for t in [0.0, 1.3e-10, -0.7e-10] {
        etc = etc.max(rel_l2(
            &evaluate_at_time(&tc, t).complex,
            &td_backprojection(&h, &band, &grid.points(), t, false),
        ));
        ecc = ecc.max(rel_l2(
            &evaluate_at_time(&cc, t).complex,
            &td_backprojection(&h, &band, &grid.points(), t, true),
        ));
    }
    (etc, ecc)
}

/// Inverse DFT of the full-band scene response against H.
pub fn dft_round_trip_error(seed: u64, n_bins: usize) -> f64 {
    let h = random_h(relay(2), DT, n_bins, 0, seed);
    let n = FrequencyBand::dft_len_for(n_bins);
    let field = scene_response(&h, &FrequencyBand::from_bins(DT, n, 0, n)).unwrap();
    (0..h.n_points())
        .map(|s| {
            let row = field.row(s);
            let back: Vec<f64> = (0..n_bins)
                .map(|b| {
                    let z: Complex64 = row
                        .iter()
                        .enumerate()
                        .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (k * b) as f64 / n as f64))
                        .sum();
                    z.re / n as f64
                })
                .collect();
            rel_l2_real(&back, h.series(s))
        })
        .fold(0.0, f64::max)
}

/// Confocal image against the transient image times `e^{i k r} / r` of the
/// illumination leg.
pub fn factorization_error(seed: u64, lx: f64, ly: f64) -> f64 {
    let mut h = random_h(relay(3), DT, 48, 0, seed);
    h.relay.laser_point = Point3::new(lx, ly, 0.0);
    let imager = Imager::with_band(&h, &pulse_band(48)).unwrap();
    let grid = small_grid();
    let tc = imager.transient(&grid).unwrap();
    let cc = imager.confocal(&grid).unwrap();
    let nf = tc.band.len();
    let mut expect = Vec::with_capacity(tc.values.len());
    for (v, row) in tc.values.chunks(nf).enumerate() {
        let r = (grid.point_flat(v) - h.relay.laser_point).norm();
        for (x, w) in row.iter().zip(&tc.band.omegas) {
            expect.push(x * Complex64::from_polar(1.0 / r, 2.0 * PI * w * r / C));
        }
    }
    rel_l2(&cc.values, &expect)
}

/// Image of H delayed by `m` bins at `t + m dt` against the image of H at `t`.
pub fn shift_error(seed: u64, m: usize, t: f64) -> f64 {
    let h = random_h(relay(3), DT, 64, 12, seed);
    let band = pulse_band(64);
    rel_l2(&image(&h.delayed(m), &band, t + m as f64 * DT), &image(&h, &band, t))
}

pub fn linearity_error(s1: u64, s2: u64, a: f64, b: f64, t: f64) -> f64 {
    let band = pulse_band(40);
    let h1 = random_h(relay(3), DT, 40, 0, s1);
    let h2 = random_h(relay(3), DT, 40, 0, s2);
    let mix = h1.scaled(a).add(&h2.scaled(b)).unwrap();
    let rhs: Vec<Complex64> = image(&h1, &band, t)
        .iter()
        .zip(image(&h2, &band, t))
        .map(|(x, y)| x * a + y * b)
        .collect();
    rel_l2(&image(&mix, &band, t), &rhs)
}

pub fn two_facet_scene(z: f64, tilt: f64) -> Scene {
    let a = PlanarSurface::from_center(Point3::new(0.1, 0.0, z), 0.3, 0.3, [tilt, 0.0, 0.0], 0.8, SurfaceKind::Diffuse).unwrap();
    let b = PlanarSurface::from_center(Point3::new(-0.4, 0.0, z), 0.3, 0.3, [0.0, 70.0, 0.0], 0.6, SurfaceKind::Diffuse).unwrap();
    Scene::new(vec![a, b], RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 3, 3), 5).unwrap()
}

fn bits_equal(a: &ImpulseResponse, b: &ImpulseResponse) -> bool {
    a.values.len() == b.values.len() && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Renders on 1 and 3 worker threads; true when byte-identical and non-zero.
pub fn render_thread_invariant(seed: u64, z: f64, tilt: f64) -> bool {
    let s = two_facet_scene(z, tilt);
    let p = RenderParams::for_scene(&s, DT, 6000, seed);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| render_impulse_response(&s, &p).unwrap())
    };
    let a = run(1);
    a.total_energy() > 0.0 && bits_equal(&a, &run(3))
}

/// True when the per-bounce histograms add up to the full render exactly.
pub fn bounce_sum_exact(seed: u64, z: f64, tilt: f64) -> bool {
    let s = two_facet_scene(z, tilt);
    let p = RenderParams::for_scene(&s, DT, 6000, seed);
    let full = render_impulse_response(&s, &p).unwrap();
    let parts = render_bounce_separated(&s, &p).unwrap();
    if !parts.keys().all(|k| (p.min_bounces..=p.max_bounces).contains(k)) {
        return false;
    }
    let mut sum = ImpulseResponse::zeros(s.relay.clone(), DT, p.n_bins);
    for h in parts.values() {
        sum = sum.add(h).unwrap();
    }
    bits_equal(&sum, &full)
}

/// Peak bins of small random facets against the analytic three-bounce bin.
/// A neighbouring bin is accepted only when the facet's corner path lengths
/// straddle a bin boundary. Returns the number of arrivals checked.
pub fn tof_check(placements: u64, seed: u64) -> Result<usize, String> {
    const TOF_DT: f64 = 1e-10;
    // Small against the 3 cm bins, large enough for cosine-sampled laser rays.
    const FACET: f64 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    for trial in 0..placements {
        let center = Point3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(0.3..1.5));
        let rot = [rng.gen_range(-40.0..40.0), rng.gen_range(-40.0..40.0), 0.0];
        let facet = PlanarSurface::from_center(center, FACET, FACET, rot, 1.0, SurfaceKind::Diffuse).unwrap();
        let mut relay = RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 4, 4);
        relay.laser_point = Point3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), 0.0);
        let corners = [
            facet.origin,
            facet.origin + facet.edge_u,
            facet.origin + facet.edge_v,
            facet.origin + facet.edge_u + facet.edge_v,
        ];
        let n = facet.edge_u.cross(&facet.edge_v);
        let xl = relay.laser_point;
        let scene = Scene::new(vec![facet], relay, 3).unwrap();
        let h = render_impulse_response(&scene, &RenderParams::for_scene(&scene, TOF_DT, 2_000_000, trial)).unwrap();
        for (s, xs) in scene.relay.points().iter().enumerate() {
            // a relay point behind the facet's plane sees its back face
            if n.dot(&(xs - center)).signum() != n.dot(&(xl - center)).signum() {
                if h.peak_bin(s).is_some() {
                    return Err(format!("placement {trial}, xs {s}: energy through the back face"));
                }
                continue;
            }
            let peak = h.peak_bin(s).ok_or_else(|| format!("placement {trial}, xs {s}: no arrival"))?;
            let expect = tof_bin(&xl, &center, xs, TOF_DT);
            let lo = corners.iter().map(|c| tof_bin(&xl, c, xs, TOF_DT)).min().unwrap();
            let hi = corners.iter().map(|c| tof_bin(&xl, c, xs, TOF_DT)).max().unwrap();
            let ok = peak == expect || (lo != hi && peak.abs_diff(expect) == 1 && (lo..=hi).contains(&peak));
            if !ok {
                return Err(format!(
                    "placement {trial}, xs {s}: peak {peak}, analytic {expect}, corners {lo}..={hi}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

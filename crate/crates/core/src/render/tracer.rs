//! Light tracer with next-event estimation to every aperture point.
//!
//! Paths start at `x_l`, leave the relay with a cosine-weighted direction and
//! scatter diffusely off two-sided surfaces. At every scene vertex the path is
//! connected to all `x_s`; a connection from the `k`-th scene vertex is a
//! `(k + 2)`-bounce contribution (x_l and x_s count as one bounce each).
//!
//! With unit emitted power and a Lambertian emitter at `x_l`, the expected
//! deposit for a surface patch `dA` at `x` is
//! `cos_l cos_in / (pi r1^2) * rho / pi * cos_out cos_s / r2^2 * dA`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ImpulseResponse, LatePolicy, RenderParams};
use crate::error::{Error, Result};
use crate::scene::{PreparedSurface, Scene, Vec3, EDGE_EPS};
use crate::{Point3, C};

/// Paths per RNG stream.
const BATCH: u64 = 1024;
/// Fixed number of accumulation lanes; lane `j` owns batches `j, j + LANES, ...`.
/// Results depend on this constant, never on the thread count.
const LANES: u64 = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderStats {
    /// Connections that arrived after the window and were dropped.
    pub late_deposits: u64,
    pub late_energy: f64,
    pub longest_late_path: f64,
}

pub fn render_impulse_response(scene: &Scene, params: &RenderParams) -> Result<ImpulseResponse> {
    let parts = render_bounce_separated(scene, params)?;
    let mut out = ImpulseResponse::zeros(scene.relay.clone(), params.dt, params.n_bins);
    for h in parts.values() {
        for (a, b) in out.values.iter_mut().zip(&h.values) {
            *a += b;
        }
    }
    Ok(out)
}

/// Bounce range with its own path budget; see [`render_strata`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BounceStratum {
    pub min_bounces: u32,
    pub max_bounces: u32,
    pub n_paths: u64,
}

/// Sum of independent renders over disjoint bounce ranges, each with its own
/// path count. Stratum `i` uses seed `params.seed + i`. Every stratum is an
/// unbiased estimate of its bounce range, so the sum estimates `H` over their
/// union while spending paths where the variance is.
pub fn render_strata(scene: &Scene, params: &RenderParams, strata: &[BounceStratum]) -> Result<ImpulseResponse> {
    let mut ranges: Vec<(u32, u32)> = strata.iter().map(|s| (s.min_bounces, s.max_bounces)).collect();
    ranges.sort_unstable();
    if ranges.windows(2).any(|w| w[1].0 <= w[0].1) {
        return Err(Error::InvalidParams("bounce strata overlap".into()));
    }
    let mut out = ImpulseResponse::zeros(scene.relay.clone(), params.dt, params.n_bins);
    for (i, st) in strata.iter().enumerate() {
        let p = RenderParams {
            n_paths: st.n_paths,
            seed: params.seed.wrapping_add(i as u64),
            ..params.clone()
        }
        .with_bounces(st.min_bounces, st.max_bounces);
        out = out.add(&render_impulse_response(scene, &p)?)?;
    }
    Ok(out)
}

pub fn render_bounce_separated(scene: &Scene, params: &RenderParams) -> Result<BTreeMap<u32, ImpulseResponse>> {
    render_with_stats(scene, params).map(|(h, _)| h)
}

/// As [`render_bounce_separated`], also reporting dropped late arrivals.
pub fn render_with_stats(scene: &Scene, params: &RenderParams) -> Result<(BTreeMap<u32, ImpulseResponse>, RenderStats)> {
    params.validate()?;
    scene.validate()?;
    if let Err(e) = params.check_coverage(scene) {
        match params.late {
            LatePolicy::Fail => return Err(e),
            LatePolicy::Warn => log::warn!("{e}; late contributions will be dropped"),
        }
    }

    let tracer = Tracer::new(scene, params);
    let n_batches = params.n_paths.div_ceil(BATCH);
    let lanes: Vec<Lane> = (0..LANES)
        .into_par_iter()
        .map(|lane| {
            let mut acc = Lane::new(tracer.n_orders(), scene.relay.len() * params.n_bins);
            let mut b = lane;
            while b < n_batches {
                let count = BATCH.min(params.n_paths - b * BATCH);
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(b);
                for _ in 0..count {
                    tracer.trace(&mut rng, &mut acc);
                }
                b += LANES;
            }
            acc
        })
        .collect();

    let mut stats = RenderStats::default();
    for l in &lanes {
        stats.late_deposits += l.late_deposits;
        stats.late_energy += l.late_energy;
        stats.longest_late_path = stats.longest_late_path.max(l.longest_late);
    }
    if stats.late_deposits > 0 {
        let err = Error::Coverage {
            path_length: stats.longest_late_path,
            window: params.n_bins as f64 * params.dt * C,
        };
        match params.late {
            LatePolicy::Fail => return Err(err),
            LatePolicy::Warn => log::warn!(
                "{err}: dropped {} late deposits carrying {:.3e} of energy",
                stats.late_deposits,
                stats.late_energy
            ),
        }
    }

    let inv = 1.0 / params.n_paths.max(1) as f64;
    let mut out = BTreeMap::new();
    for (o, bounce) in (params.min_bounces..=params.max_bounces).enumerate() {
        let mut tm = lanes[0].hist[o].clone();
        for l in &lanes[1..] {
            for (a, b) in tm.iter_mut().zip(&l.hist[o]) {
                *a += b;
            }
        }
        // lanes accumulate time-major; the output is [s][t]
        let n_s = scene.relay.len();
        let mut values = vec![0.0; tm.len()];
        for (bin, row) in tm.chunks_exact(n_s).enumerate() {
            for (s, v) in row.iter().enumerate() {
                values[s * params.n_bins + bin] = v * inv;
            }
        }
        out.insert(
            bounce,
            ImpulseResponse {
                relay: scene.relay.clone(),
                dt: params.dt,
                n_bins: params.n_bins,
                t0: super::TimeOrigin::Relay,
                values,
            },
        );
    }
    Ok((out, stats))
}

struct Lane {
    hist: Vec<Vec<f64>>,
    late_deposits: u64,
    late_energy: f64,
    longest_late: f64,
}

impl Lane {
    fn new(orders: usize, len: usize) -> Self {
        Lane {
            hist: vec![vec![0.0; len]; orders],
            late_deposits: 0,
            late_energy: 0.0,
            longest_late: 0.0,
        }
    }
}

struct Tracer {
    surfaces: Vec<PreparedSurface>,
    /// Surfaces off the relay plane; only these can block a connection to `x_s`.
    occluders: Vec<usize>,
    xs: Vec<Point3>,
    xl: Point3,
    relay_origin: Point3,
    relay_n: Vec3,
    inv_cdt: f64,
    n_bins: usize,
    min_b: u32,
    max_b: u32,
}

impl Tracer {
    fn new(scene: &Scene, p: &RenderParams) -> Self {
        let surfaces = scene.prepared();
        let relay_n = scene.relay.normal.into_inner();
        let occluders = scene
            .surfaces
            .iter()
            .enumerate()
            .filter(|(_, s)| s.corners().iter().any(|c| scene.relay.plane_distance(c).abs() > 1e-9))
            .map(|(i, _)| i)
            .collect();
        Tracer {
            surfaces,
            occluders,
            xs: scene.relay.points(),
            xl: scene.relay.laser_point,
            relay_origin: scene.relay.grid_origin,
            relay_n,
            inv_cdt: 1.0 / (C * p.dt),
            n_bins: p.n_bins,
            min_b: p.min_bounces,
            max_b: p.max_bounces,
        }
    }

    fn n_orders(&self) -> usize {
        (self.max_b - self.min_b + 1) as usize
    }

    fn nearest(&self, o: &Point3, d: &Vec3, skip: Option<usize>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            let t_max = best.map_or(f64::INFINITY, |(_, t)| t);
            if let Some(t) = s.hit(o, d, EDGE_EPS, t_max) {
                best = Some((i, t));
            }
        }
        best
    }

    #[inline]
    fn occluded(&self, o: &Point3, d: &Vec3, len: f64, skip: usize) -> bool {
        self.occluders
            .iter()
            .any(|&i| i != skip && self.surfaces[i].hit(o, d, EDGE_EPS, len - EDGE_EPS).is_some())
    }

    fn trace(&self, rng: &mut ChaCha8Rng, acc: &mut Lane) {
        let mut o = self.xl;
        let mut side = self.relay_n;
        let mut skip = None;
        let mut beta = 1.0;
        let mut length = 0.0;
        for k in 1..=(self.max_b - 2) {
            let d = cosine_sample(&side, rng);
            let Some((idx, t)) = self.nearest(&o, &d, skip) else {
                return;
            };
            let surf = &self.surfaces[idx];
            if surf.absorber {
                return;
            }
            let p = o + d * t;
            length += t;
            let ns = if surf.normal.dot(&d) > 0.0 { -surf.normal } else { surf.normal };
            let bounce = k + 2;
            let on_relay = (p - self.relay_origin).dot(&self.relay_n).abs() < 1e-9;
            if bounce >= self.min_b && !on_relay {
                let hist = &mut acc.hist[(bounce - self.min_b) as usize];
                let w0 = beta * surf.albedo / PI;
                let n_s = self.xs.len();
                let may_block = self.occluders.iter().any(|&i| i != idx);
                for (s, xs) in self.xs.iter().enumerate() {
                    let v = xs - p;
                    let r2 = v.dot(&v);
                    let (a, b) = (v.dot(&ns), -v.dot(&self.relay_n));
                    if a <= 0.0 || b <= 0.0 {
                        continue;
                    }
                    let r = r2.sqrt();
                    if may_block && self.occluded(&p, &(v / r), r, idx) {
                        continue;
                    }
                    // cos_o cos_s / r^2 = a b / r^4
                    let w = w0 * a * b / (r2 * r2);
                    let total = length + r;
                    let bin = (total * self.inv_cdt) as usize;
                    if bin < self.n_bins {
                        hist[bin * n_s + s] += w;
                    } else {
                        acc.late_deposits += 1;
                        acc.late_energy += w;
                        acc.longest_late = acc.longest_late.max(total);
                    }
                }
            }
            beta *= surf.albedo;
            if beta == 0.0 {
                return;
            }
            o = p;
            side = ns;
            skip = Some(idx);
        }
    }
}

/// Cosine-weighted direction in the hemisphere around unit `n`.
fn cosine_sample(n: &Vec3, rng: &mut ChaCha8Rng) -> Vec3 {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let (t, b) = onb(n);
    let z = (1.0 - u1).max(0.0).sqrt();
    (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalize()
}

/// Orthonormal tangent pair for unit `n` (Duff et al. 2017).
fn onb(n: &Vec3) -> (Vec3, Vec3) {
    let sign = 1.0f64.copysign(n.z);
    let a = -1.0 / (sign + n.z);
    let b = n.x * n.y * a;
    (
        Vec3::new(1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x),
        Vec3::new(b, sign + n.y * n.y * a, -n.y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{PlanarSurface, RelayAperture, SurfaceKind};

    fn facet_scene(center: Point3, size: f64, rot: [f64; 3]) -> Scene {
        let f = PlanarSurface::from_center(center, size, size, rot, 1.0, SurfaceKind::Diffuse).unwrap();
        Scene::new(vec![f], RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 4, 4), 3).unwrap()
    }

    #[test]
    fn onb_is_orthonormal() {
        for n in [Vec3::z(), -Vec3::z(), Vec3::new(1.0, 2.0, -3.0).normalize()] {
            let (t, b) = onb(&n);
            assert!(t.dot(&b).abs() < 1e-12 && t.dot(&n).abs() < 1e-12 && b.dot(&n).abs() < 1e-12);
            assert!((t.norm() - 1.0).abs() < 1e-12 && (b.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_scene_renders_zero() {
        let s = Scene::new(vec![], RelayAperture::centered(Point3::zeros(), 1.0, 1.0, 3, 3), 4).unwrap();
        let p = RenderParams::for_scene(&s, 1e-11, 5000, 1);
        assert!(render_impulse_response(&s, &p).unwrap().is_zero());
    }

    #[test]
    fn facet_energy_matches_geometric_term() {
        let c = Point3::new(0.1, -0.05, 0.8);
        let a = 0.3;
        let s = facet_scene(c, a, [0.0; 3]);
        let p = RenderParams::for_scene(&s, 1e-11, 400_000, 3);
        let h = render_impulse_response(&s, &p).unwrap();
        let xl = s.relay.laser_point;
        let f = &s.surfaces[0];
        let n = Vec3::z();
        let m = 40;
        for (k, xs) in s.relay.points().iter().enumerate() {
            // midpoint quadrature of cos cos / (pi r1^2) * 1/pi * cos cos / r2^2 over the facet
            let mut expect = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let x = f.point_at((i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64);
                    let (v1, v2) = (x - xl, xs - x);
                    let (r1, r2) = (v1.norm(), v2.norm());
                    let c1 = v1.dot(&n) / r1;
                    let c2 = v2.dot(&n) / r2;
                    expect += c1 * c1 / (PI * r1 * r1) * c2 * c2 / (PI * r2 * r2);
                }
            }
            expect *= a * a / (m * m) as f64;
            let got: f64 = h.series(k).iter().sum();
            assert!((got - expect).abs() / expect < 0.03, "xs {k}: {got} vs {expect}");
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let s = facet_scene(Point3::new(0.0, 0.0, 0.6), 0.3, [20.0, 0.0, 0.0]);
        let p = RenderParams::for_scene(&s, 1e-11, 9000, 42);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| render_impulse_response(&s, &p).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn short_window_fails_under_fail_policy() {
        let s = facet_scene(Point3::new(0.0, 0.0, 1.0), 0.2, [0.0; 3]);
        let mut p = RenderParams::for_scene(&s, 1e-11, 20_000, 1);
        p.n_bins = 100;
        p.late = LatePolicy::Fail;
        assert!(matches!(render_impulse_response(&s, &p), Err(Error::Coverage { .. })));
        p.late = LatePolicy::Warn;
        let (_, stats) = render_with_stats(&s, &p).unwrap();
        assert!(stats.late_deposits > 0);
    }
}

use std::path::PathBuf;

use serde_json::{json, Map, Value};

use super::{ExperimentConfig, Pipeline};
use crate::error::{Error, Result};
use crate::io::{read_nlosh1, write_csv, write_nlosh1, write_png, write_raw, ToneMap};
use crate::mirrors::{
    confocal_camera_secondary, extract_with, footprint_mask, infer_plane_from_image, masked_sum, mirror_reflect_surface, ncc,
    threshold_image, transient_camera_secondary, two_corner_image, InferOptions, SecondaryAperture,
};
use crate::phasor::{evaluate_at_time, IlluminationPulse, Imager, TimeSlice};
use crate::render::{render_strata, ImpulseResponse};
use crate::scene::{mirror_reflect_point, Dir3, PlanarSurface, Scene, VoxelGrid};
use crate::wavesim::{arc, ray_at, simulate_ray_field, simulate_wave_field, specular_angle_deg, wave_at};
use crate::{Point3, Vec3, C};

use super::presets;

pub(super) struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: PathBuf,
    pub scene: Option<Scene>,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub results: Map<String, Value>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig, out: PathBuf) -> Self {
        Context {
            cfg,
            out,
            scene: None,
            artifacts: Vec::new(),
            warnings: Vec::new(),
            results: Map::new(),
        }
    }

    fn scene(&self) -> &Scene {
        self.scene.as_ref().expect("scene loaded before pipelines run")
    }

    fn path(&mut self, name: String) -> PathBuf {
        let p = self.out.join(&name);
        self.artifacts.push(name);
        p
    }

    fn set(&mut self, key: &str, v: Value) {
        self.results.insert(key.into(), v);
    }

    fn pulse(&self) -> Result<IlluminationPulse> {
        self.cfg.pulse.pulse()
    }

    fn imager(&self, h: &ImpulseResponse) -> Result<Imager> {
        Imager::with_truncation(h, &self.pulse()?, self.cfg.pulse.truncation)
    }

    fn grid(&self, name: &str) -> Result<VoxelGrid> {
        self.scene().grid(name).cloned()
    }

    fn surface(&self, name: &str) -> Result<PlanarSurface> {
        self.scene()
            .surface(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("scene declares no surface named {name:?}")))
    }

    /// Captured data when a dataset is configured, otherwise a fresh render
    /// saved as `h.nlosh1`.
    fn impulse_response(&mut self) -> Result<ImpulseResponse> {
        if let Some(path) = &self.cfg.dataset {
            let h = read_nlosh1(path).map_err(|e| Error::Config(format!("dataset {}: {e}", path.display())))?;
            self.set("dataset", json!(path.display().to_string()));
            return Ok(h);
        }
        let scene = self.scene().clone();
        let params = self.cfg.render.params(&scene, self.cfg.seed);
        let strata = self.cfg.render.strata(&scene);
        log::info!("rendering {} strata, {} bins of {:e} s", strata.len(), params.n_bins, params.dt);
        let h = render_strata(&scene, &params, &strata)?;
        let p = self.path("h.nlosh1".into());
        write_nlosh1(p, &h)?;
        self.set(
            "render",
            json!({ "dt": h.dt, "n_bins": h.n_bins, "total_energy": h.total_energy(),
                    "paths": strata.iter().map(|s| s.n_paths).sum::<u64>() }),
        );
        Ok(h)
    }

    /// PNG, raw float and optional CSV of a magnitude image.
    fn write_image(&mut self, stem: &str, grid: &VoxelGrid, values: &[f64], t: f64) -> Result<()> {
        let map = match self.cfg.image.log_decades {
            Some(decades) => ToneMap::Log { decades },
            None => ToneMap::Linear,
        };
        let p = self.path(format!("{stem}.png"));
        write_png(p, grid, values, map)?;
        let p = self.path(format!("{stem}.raw"));
        write_raw(p, grid, values, t)?;
        if self.cfg.image.csv {
            let p = self.path(format!("{stem}.csv"));
            write_csv(p, grid, values)?;
        }
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name.into());
        std::fs::write(p, text)?;
        Ok(())
    }
}

pub(super) fn dispatch(ctx: &mut Context) -> Result<()> {
    if ctx.cfg.pipeline.needs_scene() {
        ctx.scene = ctx.cfg.load_scene()?;
    }
    match ctx.cfg.pipeline {
        Pipeline::Render => ctx.impulse_response().map(|_| ()),
        Pipeline::ImageTransient => image(ctx, false),
        Pipeline::ImageConfocal => image(ctx, true),
        Pipeline::Infer => secondary(ctx, false),
        Pipeline::Secondary => secondary(ctx, true),
        Pipeline::TwoCorner => two_corner(ctx),
        Pipeline::Wavesim => wavesim(ctx),
        Pipeline::InfinityMirror => infinity_mirror(ctx),
        Pipeline::MissingCone => missing_cone(ctx),
    }
}

fn p3(p: &Point3) -> Value {
    json!([p.x, p.y, p.z])
}

fn slice_summary(s: &TimeSlice) -> Value {
    let (i, m) = s.argmax();
    json!({ "max": m, "argmax": p3(&s.grid.point_flat(i)), "median": s.median() })
}

fn image(ctx: &mut Context, confocal: bool) -> Result<()> {
    let h = ctx.impulse_response()?;
    let imager = ctx.imager(&h)?;
    let kind = if confocal { "confocal" } else { "transient" };
    let mut summary = Map::new();
    for name in ctx.cfg.image_grids(ctx.scene()) {
        let grid = ctx.grid(&name)?;
        let stack = if confocal {
            imager.confocal(&grid)?
        } else {
            imager.transient(&grid)?
        };
        for (k, &t) in ctx.cfg.image.times.clone().iter().enumerate() {
            let slice = evaluate_at_time(&stack, t);
            ctx.write_image(&format!("{kind}_{name}_{k}"), &grid, &slice.magnitude, t)?;
            if k == 0 {
                summary.insert(name.clone(), slice_summary(&slice));
            }
        }
    }
    ctx.set(kind, Value::Object(summary));
    Ok(())
}

/// Truth plane of a surface: `(center, normal)`.
fn plane_of(s: &PlanarSurface) -> (Point3, Dir3) {
    (s.center(), s.normal())
}

/// Plane inference, and with `image_g` the confocal image through the
/// secondary aperture.
fn secondary(ctx: &mut Context, image_g: bool) -> Result<()> {
    let m = ctx.cfg.mirror.clone();
    let h = ctx.impulse_response()?;
    let pulse = ctx.pulse()?;
    let imager = ctx.imager(&h)?;
    let volume = imager.confocal(&ctx.grid(&m.mirror_grid)?)?;
    let ap = extract_with(&imager, &volume, m.aperture_threshold)?;
    ctx.set("aperture", json!({ "points": ap.points.len(), "centroid": p3(&ap.centroid()) }));
    let w = ctx.grid(&m.image_grid)?;
    let xl = h.relay.laser_point;
    let truth = m.truth_surface.as_deref().map(|n| ctx.surface(n)).transpose()?;

    let tc = evaluate_at_time(&transient_camera_secondary(&ap, &w)?, 0.0);
    ctx.write_image(&format!("tcM_{}", m.image_grid), &w, &tc.magnitude, 0.0)?;
    // the secondary image stands on its own; a failed inference only warns
    match infer(ctx, &tc, &xl, &ap, &pulse, truth.as_ref()) {
        Err(e) if image_g => ctx.warnings.push(format!("plane inference failed: {e}")),
        r => r?,
    }

    if image_g {
        let cc = evaluate_at_time(&confocal_camera_secondary(&ap, &xl, &w)?, 0.0);
        ctx.write_image(&format!("ccM_{}", m.image_grid), &w, &cc.magnitude, 0.0)?;
        let mut r = Map::new();
        r.insert("image".into(), slice_summary(&cc));
        if let Some(g) = &truth {
            let tol = 0.5 * w.voxel_size();
            let on_g = masked_sum(&cc.magnitude, &footprint_mask(&w, std::slice::from_ref(g), tol));
            r.insert("footprint_sum".into(), json!(on_g));
            if let Some(off) = m.control_offset {
                let mut ctrl = g.clone();
                ctrl.origin += Vec3::from(off);
                let on_c = masked_sum(&cc.magnitude, &footprint_mask(&w, &[ctrl], tol));
                r.insert("control_sum".into(), json!(on_c));
                r.insert("footprint_ratio".into(), json!(on_g / on_c));
            }
        }
        ctx.set("secondary", Value::Object(r));
    }
    Ok(())
}

fn infer(
    ctx: &mut Context,
    tc: &TimeSlice,
    xl: &Point3,
    ap: &SecondaryAperture,
    pulse: &IlluminationPulse,
    truth: Option<&PlanarSurface>,
) -> Result<()> {
    let m = &ctx.cfg.mirror;
    let opts = InferOptions::new(pulse)
        .with_aperture_center(ap.centroid())
        .with_suppression_radius(m.suppression_radius)
        .with_rel_threshold(m.peak_threshold);
    let inf = match infer_plane_from_image(tc, xl, &opts) {
        Ok(i) => i,
        Err(e) => {
            ctx.set("inference", json!({ "error": e.to_string() }));
            return Err(e);
        }
    };
    let e = &inf.estimate;
    let tp = truth.map(plane_of);
    let mut record = e.record(tp.as_ref().map(|(p, n)| (p, n)));
    let mut r = json!({
        "center": p3(&e.center),
        "normal": p3(&e.normal),
        "mirror_image": p3(&e.source_pair.1),
        "anchored": inf.anchored,
        "peaks": inf.peaks.len(),
        "warnings": inf.warnings,
    });
    if let Some((p, n)) = tp {
        // x_G estimates the foot of x_l on the true plane
        let foot = xl - n.into_inner() * (xl - p).dot(&n);
        let center_error = (e.center - foot).norm();
        record.push_str(&format!("center_error_m {center_error:.6}\n"));
        r["center_error_m"] = json!(center_error);
        r["normal_error_deg"] = json!(e.normal_error_deg(&n));
    }
    for w in &inf.warnings {
        record.push_str(&format!("warning {w}\n"));
    }
    ctx.warnings.extend(inf.warnings.iter().cloned());
    ctx.write_text("plane.txt", &record)?;
    ctx.set("inference", r);
    Ok(())
}

/// Half turn of a set of coplanar surfaces about their common normal through
/// the center of their bounding box in that plane.
pub(crate) fn half_turn(surfaces: &[PlanarSurface]) -> Vec<PlanarSurface> {
    let Some(first) = surfaces.first() else {
        return Vec::new();
    };
    let n = first.normal().into_inner();
    let e1 = first.edge_u.normalize();
    let e2 = n.cross(&e1);
    let corners: Vec<Point3> = surfaces.iter().flat_map(|s| s.corners()).collect();
    let range = |e: &Vec3| {
        let d: Vec<f64> = corners.iter().map(|c| c.dot(e)).collect();
        let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    };
    let c = e1 * range(&e1) + e2 * range(&e2) + n * corners[0].dot(&n);
    // 180 degrees about n: R = 2 n n^T - I
    let rot = |v: &Vec3| n * (2.0 * v.dot(&n)) - v;
    surfaces
        .iter()
        .map(|s| {
            let mut r = s.clone();
            r.origin = c + rot(&(s.origin - c));
            r.edge_u = rot(&s.edge_u);
            r.edge_v = rot(&s.edge_v);
            r
        })
        .collect()
}

fn two_corner(ctx: &mut Context) -> Result<()> {
    let tcfg = ctx.cfg.two_corner.clone();
    let plane = match (tcfg.mirror_point, tcfg.mirror_normal) {
        (Some(p), Some(n)) => (Point3::from(p), Dir3::new_normalize(Vec3::from(n))),
        _ if tcfg.reference => (Point3::zeros(), Dir3::new_normalize(Vec3::z())),
        _ => plane_of(&ctx.surface(&tcfg.mirror_surface)?),
    };
    let h = ctx.impulse_response()?;
    let grid = ctx.grid(&tcfg.grid)?;
    let img = two_corner_image(&h, &ctx.pulse()?, plane, &grid)?;
    ctx.write_image("two_corner", &grid, &img.slice.magnitude, 0.0)?;
    let mut r = Map::new();
    r.insert("image".into(), slice_summary(&img.slice));
    r.insert("mirror_point".into(), p3(&plane.0));
    r.insert("mirror_normal".into(), p3(&plane.1));
    if !tcfg.truth_surfaces.is_empty() {
        let truth: Vec<PlanarSurface> = tcfg.truth_surfaces.iter().map(|n| ctx.surface(n)).collect::<Result<_>>()?;
        let imaged: Vec<PlanarSurface> = if tcfg.reference {
            truth
        } else {
            truth.iter().map(|s| mirror_reflect_surface(s, &plane.0, &plane.1)).collect()
        };
        let tol = 0.5 * grid.voxel_size();
        let mask = |s: &[PlanarSurface]| {
            footprint_mask(&grid, s, tol)
                .iter()
                .map(|&b| f64::from(u8::from(b)))
                .collect::<Vec<f64>>()
        };
        let th = threshold_image(&img.slice.magnitude, tcfg.ncc_threshold);
        let correct = ncc(&th, &mask(&imaged));
        let flipped = ncc(&th, &mask(&half_turn(&imaged)));
        let text = format!(
            "threshold {}\nncc_truth {correct:.6}\nncc_half_turn {flipped:.6}\norientation_ok {}\n",
            tcfg.ncc_threshold,
            correct > flipped
        );
        ctx.write_text("correlation.txt", &text)?;
        r.insert("ncc_truth".into(), json!(correct));
        r.insert("ncc_half_turn".into(), json!(flipped));
    }
    ctx.set("two_corner", Value::Object(r));
    Ok(())
}

fn wavesim(ctx: &mut Context) -> Result<()> {
    let w = ctx.cfg.wavesim.clone();
    let omega = C / w.wavelength;
    let steps = (w.arc_span_deg / w.arc_step_deg).round() as i64;
    let degs: Vec<f64> = (-steps..=steps).map(|i| i as f64 * w.arc_step_deg).collect();
    let mut rows = Vec::new();
    for (k, &tilt) in w.tilts_deg.iter().enumerate() {
        let (src, plate) = presets::specular_plate(tilt)?;
        let c = plate.center();
        let probes = arc(&c, &Vec3::z(), &Vec3::x(), w.arc_radius, &degs);
        let seed = ctx.cfg.seed.wrapping_add(k as u64);
        let wave = wave_at(&src, &plate, &probes, omega, w.samples, seed)?;
        let ray = ray_at(&src, &plate, &probes, w.samples, seed)?;
        let spec = specular_angle_deg(&src, &plate);
        let (ipk, _) = wave
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v.norm() > b.1 { (i, v.norm()) } else { b });
        let pair = arc(&c, &Vec3::z(), &Vec3::x(), w.arc_radius, &[spec, -spec]);
        let rp = ray_at(&src, &plate, &pair, w.samples, seed)?;
        let wp = wave_at(&src, &plate, &pair, omega, w.samples, seed)?;
        let mut csv = String::from("angle_deg,wave_magnitude,ray_magnitude\n");
        for ((d, a), b) in degs.iter().zip(&wave).zip(&ray) {
            csv.push_str(&format!("{d},{:e},{:e}\n", a.norm(), b.re));
        }
        ctx.write_text(&format!("arc_tilt{k}.csv"), &csv)?;
        rows.push(json!({
            "tilt_deg": tilt,
            "specular_deg": spec,
            "wave_peak_deg": degs[ipk],
            "peak_error_deg": (degs[ipk] - spec).abs(),
            "wave_specular_ratio": wp[0].norm() / wp[1].norm(),
            "ray_specular_ratio": rp[0].re / rp[1].re,
        }));
        if w.image_samples > 0 {
            let grid = presets::specular_field_grid();
            let wf = simulate_wave_field(&src, &plate, &grid, omega, w.image_samples, seed)?;
            ctx.write_image(&format!("wave_tilt{k}"), &grid, &wf.magnitude(), 0.0)?;
            let rf = simulate_ray_field(&src, &plate, &grid, w.image_samples, seed)?;
            ctx.write_image(&format!("ray_tilt{k}"), &grid, &rf.magnitude(), 0.0)?;
        }
    }
    ctx.set("wavesim", Value::Array(rows));
    Ok(())
}

fn infinity_mirror(ctx: &mut Context) -> Result<()> {
    let icfg = ctx.cfg.infinity.clone();
    let h = ctx.impulse_response()?;
    let imager = ctx.imager(&h)?;
    let (mp, mn) = plane_of(&ctx.surface(&icfg.mirror_surface)?);
    let xl = h.relay.laser_point;
    let first = mirror_reflect_point(&xl, &mp, &mn);
    let second = mirror_reflect_point(&mirror_reflect_point(&first, &h.relay.grid_origin, &h.relay.normal), &mp, &mn);
    let lc = ctx.cfg.pulse.lambda_c;
    let mut r = Map::new();
    for (name, target) in [(icfg.first_grid, first), (icfg.second_grid, second)] {
        let grid = ctx.grid(&name)?;
        let s = evaluate_at_time(&imager.transient(&grid)?, 0.0);
        ctx.write_image(&format!("transient_{name}"), &grid, &s.magnitude, 0.0)?;
        let (i, _) = s.argmax();
        r.insert(
            name,
            json!({
                "mirror_point": p3(&target),
                "argmax": p3(&grid.point_flat(i)),
                "argmax_error_m": (grid.point_flat(i) - target).norm(),
                "tolerance_m": lc / 2.0 + grid.voxel_size(),
                "contrast": s.nearest(&target) / s.median(),
            }),
        );
    }
    ctx.set("infinity_mirror", Value::Object(r));
    Ok(())
}

fn missing_cone(ctx: &mut Context) -> Result<()> {
    let h = ctx.impulse_response()?;
    let imager = ctx.imager(&h)?;
    let plates = ctx.cfg.missing_cone.plates.clone();
    let mut sums = Vec::new();
    for name in &plates {
        let grid = ctx.grid(name)?;
        let s = evaluate_at_time(&imager.confocal(&grid)?, 0.0);
        ctx.write_image(&format!("confocal_{name}"), &grid, &s.magnitude, 0.0)?;
        sums.push(s.magnitude.iter().sum::<f64>());
    }
    let mut r = Map::new();
    for (name, s) in plates.iter().zip(&sums) {
        r.insert(name.clone(), json!({ "integrated": s, "relative": s / sums[0] }));
    }
    ctx.set("missing_cone", Value::Object(r));
    for name in ctx.cfg.image.grids.clone() {
        let grid = ctx.grid(&name)?;
        let s = evaluate_at_time(&imager.confocal(&grid)?, 0.0);
        ctx.write_image(&format!("confocal_{name}"), &grid, &s.magnitude, 0.0)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_turn_of_t_is_flipped_t() {
        let rot = [0.0, presets::two_corner_tilt_deg(), 0.0];
        let c = Point3::from(presets::TWO_CORNER_TARGET);
        let t = presets::t_shape(c, rot, false).unwrap();
        let f = presets::t_shape(c, rot, true).unwrap();
        for (a, b) in half_turn(&t).iter().zip(&f) {
            assert!((a.center() - b.center()).norm() < 1e-12);
            assert!(a.normal().dot(&b.normal()) > 1.0 - 1e-12);
        }
    }
}

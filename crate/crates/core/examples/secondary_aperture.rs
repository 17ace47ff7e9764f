//! Confocal image of the occluded plane G through the secondary aperture on
//! M, and the same image with fourth-bounce light removed from the render.
//!
//! cargo run --release --example secondary_aperture -- [paths]

use phasor_nlos::experiment::presets;
use phasor_nlos::io::{write_png, ToneMap};
use phasor_nlos::mirrors::{extract_with, footprint_mask, masked_sum};
use phasor_nlos::phasor::Imager;
use phasor_nlos::prelude::*;

fn g_energy(scene: &Scene, max_bounces: u32, paths: u64, png: Option<&str>) -> Result<(f64, f64)> {
    let params = RenderParams::for_scene(scene, 1e-11, paths, 1).with_bounces(3, max_bounces);
    let h = render_impulse_response(scene, &params)?;
    let imager = Imager::new(&h, &IlluminationPulse::new(0.03, 0.03)?)?;
    let ap = extract_with(&imager, &imager.confocal(scene.grid("M")?)?, 0.2)?;
    let w = scene.grid("W")?;
    let img = evaluate_at_time(&confocal_camera_secondary(&ap, &scene.relay.laser_point, w)?, 0.0);
    if let Some(p) = png {
        write_png(p, w, &img.magnitude, ToneMap::Log { decades: 3.0 })?;
    }
    let g = scene.surface("G").unwrap().clone();
    let mut control = g.clone();
    control.origin += Vec3::new(-0.6, 0.0, 0.0);
    let tol = 0.5 * w.voxel_size();
    let on = |s: PlanarSurface| masked_sum(&img.magnitude, &footprint_mask(w, &[s], tol));
    Ok((on(g), on(control)))
}

fn main() -> Result<()> {
    let paths: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let scene = presets::mirror_and_occluded(90.0, 32)?;
    let (g4, c4) = g_energy(&scene, 4, paths, Some("secondary_G.png"))?;
    println!("max_bounces 4: G footprint {g4:.3e}, control {c4:.3e}, ratio {:.1}", g4 / c4);
    let (g3, _) = g_energy(&scene, 3, paths, None)?;
    println!("max_bounces 3: G footprint {g3:.3e} ({:.1}% drop)", 100.0 * (1.0 - g3 / g4));
    println!("wrote secondary_G.png");
    Ok(())
}

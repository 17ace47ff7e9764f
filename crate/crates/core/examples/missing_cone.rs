//! Three plates seen by the confocal camera. The plate perpendicular to the
//! relay returns no third-bounce light to the aperture and stays dark, while
//! turning it toward the aperture makes it visible.
//!
//! cargo run --release --example missing_cone -- [paths]

use phasor_nlos::experiment::presets;
use phasor_nlos::prelude::*;
use phasor_nlos::scene::SurfaceKind;

fn footprints(scene: &Scene, paths: u64) -> Result<Vec<f64>> {
    let h = render_impulse_response(scene, &RenderParams::for_scene(scene, 1e-11, paths, 5))?;
    let pulse = IlluminationPulse::new(0.03, 0.03)?;
    let imager = phasor_nlos::phasor::Imager::new(&h, &pulse)?;
    ["M1", "M2", "M3"]
        .iter()
        .map(|n| Ok(evaluate_at_time(&imager.confocal(scene.grid(n)?)?, 0.0).magnitude.iter().sum()))
        .collect()
}

fn main() -> Result<()> {
    let paths: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500_000);
    let scene = presets::missing_cone(32)?;
    let s = footprints(&scene, paths)?;
    println!("perpendicular M3: M2/M1 {:.3}, M3/M1 {:.4}", s[1] / s[0], s[2] / s[0]);

    // control: M3 turned to face the aperture, same footprint grid
    let mut turned = scene.clone();
    let m3 = turned.surface("M3").unwrap().clone();
    let c = m3.center();
    let facing =
        PlanarSurface::from_center(c, 0.4, 0.4, [0.0, (c.x / c.z).atan().to_degrees(), 0.0], 1.0, SurfaceKind::Diffuse)?.named("M3");
    turned.surfaces.retain(|x| x.name.as_deref() != Some("M3"));
    turned.surfaces.push(facing.clone());
    turned.grids.insert("M3".into(), VoxelGrid::on_surface(&facing, 20, 20));
    let s = footprints(&turned, paths)?;
    println!("facing M3:        M2/M1 {:.3}, M3/M1 {:.4}", s[1] / s[0], s[2] / s[0]);
    Ok(())
}

//! Position and orientation of an occluded plane G from the mirror image of
//! the laser spot. G is invisible from the relay; the image is formed through
//! a secondary aperture on the visible plane M.
//!
//! cargo run --release --example plane_inference -- [g_angle_deg] [paths]

use phasor_nlos::experiment::presets;
use phasor_nlos::mirrors::{extract_with, infer_plane_from_image, InferOptions};
use phasor_nlos::phasor::Imager;
use phasor_nlos::prelude::*;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let angle: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(100.0);
    let paths: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);

    let scene = presets::mirror_and_occluded(angle, 32)?;
    let h = render_impulse_response(&scene, &RenderParams::for_scene(&scene, 1e-11, paths, 1))?;
    let pulse = IlluminationPulse::new(0.03, 0.03)?;
    let imager = Imager::new(&h, &pulse)?;

    // secondary aperture: bright voxels of the confocal volume around M
    let ap = extract_with(&imager, &imager.confocal(scene.grid("M")?)?, 0.2)?;
    println!("secondary aperture: {} points around {:?}", ap.points.len(), ap.centroid());

    let xl = scene.relay.laser_point;
    let tc = evaluate_at_time(&transient_camera_secondary(&ap, scene.grid("W")?)?, 0.0);
    let opts = InferOptions::new(&pulse)
        .with_aperture_center(ap.centroid())
        .with_suppression_radius(0.25);
    let inf = infer_plane_from_image(&tc, &xl, &opts)?;
    for w in &inf.warnings {
        println!("note: {w}");
    }

    let g = scene.surface("G").unwrap();
    print!("{}", inf.estimate.record(Some((&g.center(), &g.normal()))));
    let n = g.normal();
    let foot = xl - n.into_inner() * (xl - g.center()).dot(&n);
    println!("center error {:.1} mm", 1e3 * (inf.estimate.center - foot).norm());
    Ok(())
}

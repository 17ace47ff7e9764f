//! A diffuse plane parallel to the relay wall acts as a mirror for the
//! transient camera: the laser spot reappears at 2d and, after another round
//! trip, at 4d.
//!
//! cargo run --release --example infinity_mirror -- [paths]

use phasor_nlos::experiment::presets;
use phasor_nlos::prelude::*;

fn main() -> Result<()> {
    let paths: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2_000_000);
    let d = 0.5;
    let scene = presets::infinity_mirror(d, 32)?;
    let h = render_impulse_response(&scene, &RenderParams::for_scene(&scene, 1e-11, paths, 3))?;
    let pulse = IlluminationPulse::new(0.03, 0.03)?;
    for (name, z) in [("S1", 2.0 * d), ("S2", 4.0 * d)] {
        let grid = scene.grid(name)?;
        let img = evaluate_at_time(&transient_camera(&h, &pulse, grid)?, 0.0);
        let (i, _) = img.argmax();
        let target = Point3::new(0.0, 0.0, z);
        println!(
            "{name} (z = {z}): argmax {:?} ({:.1} mm from the mirror point), contrast vs median {:.1}",
            grid.point_flat(i),
            1e3 * (grid.point_flat(i) - target).norm(),
            img.nearest(&target) / img.median()
        );
    }
    Ok(())
}

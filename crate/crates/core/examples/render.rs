//! Render a small hidden scene described in scene-file syntax, split the
//! impulse response by bounce count, save it as NLOSH1 and image it with the
//! confocal camera.
//!
//! cargo run --release --example render -- [paths] [out_dir]

use phasor_nlos::io::{write_nlosh1, write_png, ToneMap};
use phasor_nlos::prelude::*;

const SCENE: &str = r#"
max_bounces = 4

[relay]
center = [0.0, 0.0, 0.0]
size = [2.0, 2.0]
n = [24, 24]

[[surface]]
name = "patch"
center = [0.2, 0.1, 0.9]
size = [0.4, 0.4]

[[surface]]
name = "side"
center = [-0.5, 0.0, 0.8]
size = [0.3, 0.5]
rotate_deg = [0.0, 70.0, 0.0]

[grid.slice]
center = [0.0, 0.0, 1.0]
u_dir = [1.0, 0.0, 0.0]
v_dir = [0.0, 0.0, 1.0]
extent = [2.0, 1.2]
n = [81, 49]
"#;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let paths: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(300_000);
    let out = std::path::PathBuf::from(args.get(2).map(String::as_str).unwrap_or("out/render"));
    std::fs::create_dir_all(&out)?;

    let scene = Scene::from_toml(SCENE)?;
    let params = RenderParams::for_scene(&scene, 1e-11, paths, 7);
    println!(
        "{} bins of {:e} s, window {:.2} m",
        params.n_bins,
        params.dt,
        params.n_bins as f64 * params.dt * C
    );

    let by_bounce = render_bounce_separated(&scene, &params)?;
    for (k, h) in &by_bounce {
        println!("bounce {k}: energy {:.4e}", h.total_energy());
    }
    let h = render_impulse_response(&scene, &params)?;
    write_nlosh1(out.join("h.nlosh1"), &h)?;

    let pulse = IlluminationPulse::new(0.04, 0.04)?;
    let grid = scene.grid("slice")?;
    let img = evaluate_at_time(&confocal_camera(&h, &pulse, grid)?, 0.0);
    let (i, m) = img.argmax();
    println!("confocal t=0 peak {m:.3e} at {:?}", grid.point_flat(i));
    write_png(out.join("confocal_slice.png"), grid, &img.magnitude, ToneMap::Linear)?;
    println!("wrote {}", out.display());
    Ok(())
}

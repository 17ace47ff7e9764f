//! A T-shaped target hidden behind two corners, imaged through its mirror
//! image across a visible ceiling plane using fifth-bounce light.
//!
//! cargo run --release --example two_corner -- [fifth_bounce_paths]

use phasor_nlos::experiment::presets;
use phasor_nlos::io::{write_png, ToneMap};
use phasor_nlos::mirrors::{footprint_mask, ncc, threshold_image};
use phasor_nlos::prelude::*;

fn main() -> Result<()> {
    let n5: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000_000);
    let pulse = IlluminationPulse::new(0.12, 0.14)?;
    for flipped in [false, true] {
        let scene = presets::two_corner(flipped, 32)?;
        let params = RenderParams::for_scene(&scene, 3e-11, 0, 1);
        // fifth-bounce light is ~1% of H and gets its own path budget
        let strata = [
            BounceStratum {
                min_bounces: 3,
                max_bounces: 4,
                n_paths: 3_000_000,
            },
            BounceStratum {
                min_bounces: 5,
                max_bounces: 5,
                n_paths: n5,
            },
        ];
        let h = render_strata(&scene, &params, &strata)?;
        let grid = scene.grid("target")?;
        let img = two_corner_image(&h, &pulse, presets::two_corner_mirror_plane(), grid)?;
        let mask = |f: bool| -> Result<Vec<f64>> {
            let t = presets::two_corner_t_image(f)?;
            Ok(footprint_mask(grid, &t, 0.5 * grid.voxel_size())
                .into_iter()
                .map(|b| if b { 1.0 } else { 0.0 })
                .collect())
        };
        let th = threshold_image(&img.slice.magnitude, 0.2);
        println!(
            "flipped={flipped}: NCC with true T {:.3}, with half-turned T {:.3}",
            ncc(&th, &mask(flipped)?),
            ncc(&th, &mask(!flipped)?)
        );
        write_png(format!("two_corner_{flipped}.png"), grid, &img.slice.magnitude, ToneMap::Linear)?;
    }
    Ok(())
}

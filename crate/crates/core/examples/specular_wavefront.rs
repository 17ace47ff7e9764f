//! A diffuse plate lit by a point source. The single-frequency Huygens sum
//! peaks in the specular direction; the phase-free (steady-state) sum is
//! smooth and symmetric.
//!
//! cargo run --release --example specular_wavefront -- [samples]

use phasor_nlos::experiment::presets::specular_plate;
use phasor_nlos::prelude::*;
use phasor_nlos::wavesim::{arc, ray_at, specular_angle_deg, wave_at};

fn main() -> Result<()> {
    let samples: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let wavelength = 0.02;
    let degs: Vec<f64> = (-120..=120).map(|i| i as f64 * 0.5).collect();
    for tilt in [0.0, 10.0, 20.0] {
        let (src, plate) = specular_plate(tilt)?;
        let probes = arc(&plate.center(), &Vec3::z(), &Vec3::x(), 2.0, &degs);
        let wave = wave_at(&src, &plate, &probes, C / wavelength, samples, 1)?;
        let ray = ray_at(&src, &plate, &probes, samples, 1)?;
        let peak = |v: &[num_complex::Complex64]| {
            let i = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm())).unwrap();
            degs[i]
        };
        let spec = specular_angle_deg(&src, &plate);
        let at = |d: f64| degs.iter().position(|x| (x - d).abs() < 1e-9).unwrap();
        println!(
            "tilt {tilt:>4}: specular {spec:>5.1} deg, wave peak {:>5.1} deg, ray specular/anti-specular {:.3}",
            peak(&wave),
            ray[at(spec.round())].re / ray[at(-spec.round())].re
        );
    }
    Ok(())
}

//! NLOSH1 round trip and ingestion: render, save, reload, and run the
//! confocal pipeline on the file as if it were captured data.
//!
//! cargo run --release --example dataset_io -- [out_dir]

use phasor_nlos::experiment::{self, preset, ExperimentConfig, Pipeline, ScenePreset};
use phasor_nlos::io::{read_nlosh1, write_nlosh1};
use phasor_nlos::prelude::*;

fn main() -> Result<()> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/dataset_io".into()));
    std::fs::create_dir_all(&out)?;

    // render through the experiment layer; h.nlosh1 lands in the output dir
    let mut cfg = ExperimentConfig::new(Pipeline::Render);
    cfg.scene_preset = Some(ScenePreset::MissingCone { aperture: 16 });
    cfg.render.paths = 200_000;
    cfg.out = Some(out.join("render"));
    let report = experiment::run(&cfg)?;
    let path = report.out_dir.join("h.nlosh1");

    let h = read_nlosh1(&path)?;
    println!(
        "read {}: {}x{} points, {} bins of {:e} s",
        path.display(),
        h.relay.n_u,
        h.relay.n_v,
        h.n_bins,
        h.dt
    );
    write_nlosh1(out.join("copy.nlosh1"), &h)?;
    assert_eq!(std::fs::read(&path)?, std::fs::read(out.join("copy.nlosh1"))?);

    // captured-data template with our file as the dataset
    let mut cap = preset("captured-confocal")?;
    cap.dataset = Some(path);
    cap.image.grids = vec!["volume".into()];
    cap.scene_inline.as_mut().unwrap().grid.get_mut("volume").unwrap().n = Some(vec![32, 32, 32]);
    cap.out = Some(out.join("confocal"));
    let report = experiment::run(&cap)?;
    println!("{}", serde_json::to_string_pretty(&report.results).unwrap());
    Ok(())
}

//! `nlos`: run experiment pipelines from presets, config files or flags.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phasor_nlos::experiment::{self, preset, preset_names, ExperimentConfig, Pipeline, Severity, PRESETS};
use phasor_nlos::Error;

#[derive(Parser)]
#[command(name = "nlos", version, about = "Transient rendering and phasor-field NLOS imaging experiments")]
struct Cli {
    /// Log progress (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render H(x_l, x_s, t) and write it as NLOSH1.
    Render(RunArgs),
    /// Transient virtual camera on the scene's grids.
    ImageTransient(RunArgs),
    /// Confocal virtual camera on the scene's grids.
    ImageConfocal(RunArgs),
    /// Infer a hidden plane from the mirror image of the laser spot.
    Infer(RunArgs),
    /// Image an occluded surface through a secondary aperture.
    Secondary(RunArgs),
    /// Image a target behind two corners through a mirror plane.
    TwoCorner(RunArgs),
    /// Wave and ray field of a diffuse plate around the specular direction.
    Wavesim(RunArgs),
    /// Mirror images of the laser spot between two parallel planes.
    InfinityMirror(RunArgs),
    /// Footprint energy of plates inside and outside the missing cone.
    MissingCone(RunArgs),
    /// Dry-run checks of a config; writes nothing.
    Validate {
        /// Pipeline to check; defaults to the config's or preset's.
        #[arg(long)]
        pipeline: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List presets, or print one as TOML.
    Presets { name: Option<String> },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Experiment config (TOML), or a previous run's manifest.json.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Start from a shipped preset (see `nlos presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Scene file; overrides the config's scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// NLOSH1 dataset to image instead of rendering.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0: all cores). Never changes numeric output.
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory [default: $NLOS_OUT or ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pulse carrier wavelength in meters.
    #[arg(long)]
    lambda_c: Option<f64>,
    /// Pulse envelope width in meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Histogram bin width in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Path samples (single-stratum renders; samples per probe for wavesim).
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    max_bounces: Option<u32>,
    /// Histogram length; defaults to a window holding every path.
    #[arg(long)]
    n_bins: Option<usize>,
    /// Grid to image (repeatable).
    #[arg(long = "grid")]
    grids: Vec<String>,
    /// Image time in seconds (repeatable).
    #[arg(long = "time")]
    times: Vec<f64>,
    /// Relative threshold for secondary-aperture extraction.
    #[arg(long)]
    aperture_threshold: Option<f64>,
    /// Peak suppression radius for plane inference, meters.
    #[arg(long)]
    suppression_radius: Option<f64>,
    /// Relative peak threshold for plane inference.
    #[arg(long)]
    peak_threshold: Option<f64>,
    /// Relative image threshold for two-corner correlation.
    #[arg(long)]
    ncc_threshold: Option<f64>,
}

impl RunArgs {
    fn config(&self, pipeline: Option<Pipeline>) -> Result<ExperimentConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(Error::Config("give --config or --preset, not both".into())),
            (Some(path), None) if path.extension().is_some_and(|e| e == "json") => ExperimentConfig::from_manifest(path)?,
            (Some(path), None) => ExperimentConfig::load(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => ExperimentConfig::new(pipeline.unwrap_or(Pipeline::Render)),
        };
        if let Some(p) = pipeline {
            cfg.pipeline = p;
        }
        if let Some(s) = &self.scene {
            cfg.scene = Some(s.clone());
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = Some(d.clone());
        }
        macro_rules! set {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$src { cfg.$($dst).+ = v; })*
            };
        }
        set!(
            seed => seed,
            threads => threads,
            lambda_c => pulse.lambda_c,
            sigma => pulse.sigma,
            dt => render.dt,
            aperture_threshold => mirror.aperture_threshold,
            suppression_radius => mirror.suppression_radius,
            peak_threshold => mirror.peak_threshold,
            ncc_threshold => two_corner.ncc_threshold,
        );
        if let Some(n) = self.paths {
            cfg.render.paths = n;
            cfg.wavesim.samples = n;
            if cfg.render.strata.len() > 1 {
                log::warn!("--paths does not change a stratified render; edit render.strata in the config");
            }
        }
        if let Some(n) = self.n_bins {
            cfg.render.n_bins = Some(n);
        }
        if let Some(b) = self.max_bounces {
            cfg.render.max_bounces = Some(b);
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if !self.grids.is_empty() {
            cfg.image.grids = self.grids.clone();
        }
        if !self.times.is_empty() {
            cfg.image.times = self.times.clone();
        }
        Ok(cfg)
    }
}

fn run(cmd: Command) -> Result<(), Error> {
    let (pipeline, args) = match cmd {
        Command::Presets { name: None } => {
            for (name, text) in PRESETS {
                // first sentence of the leading comment block
                let comment: Vec<&str> = text.lines().map_while(|l| l.strip_prefix('#')).map(str::trim).collect();
                let comment = comment.join(" ");
                let about = comment.split_inclusive(". ").next().unwrap_or("").trim();
                println!("{name:22} {about}");
            }
            return Ok(());
        }
        Command::Presets { name: Some(n) } => {
            let (_, text) = PRESETS.iter().find(|(k, _)| *k == n).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {n:?}; known: {}",
                    preset_names().collect::<Vec<_>>().join(", ")
                ))
            })?;
            print!("{text}");
            return Ok(());
        }
        Command::Validate { pipeline, run } => {
            let p = pipeline.map(|s| s.parse()).transpose()?;
            let cfg = run.config(p)?;
            let issues = experiment::validate(&cfg);
            for i in &issues {
                println!("{i}");
            }
            if issues.is_empty() {
                println!("ok: {} config is valid", cfg.pipeline);
            }
            let has = |s: Severity| issues.iter().any(|i| i.severity == s);
            if has(Severity::Error) {
                return Err(Error::Config("config has errors".into()));
            }
            if let Some((need, window)) = issues.iter().find_map(|i| i.coverage) {
                return Err(Error::Coverage { path_length: need, window });
            }
            return Ok(());
        }
        Command::Render(a) => (Pipeline::Render, a),
        Command::ImageTransient(a) => (Pipeline::ImageTransient, a),
        Command::ImageConfocal(a) => (Pipeline::ImageConfocal, a),
        Command::Infer(a) => (Pipeline::Infer, a),
        Command::Secondary(a) => (Pipeline::Secondary, a),
        Command::TwoCorner(a) => (Pipeline::TwoCorner, a),
        Command::Wavesim(a) => (Pipeline::Wavesim, a),
        Command::InfinityMirror(a) => (Pipeline::InfinityMirror, a),
        Command::MissingCone(a) => (Pipeline::MissingCone, a),
    };
    let cfg = args.config(Some(pipeline))?;
    let report = experiment::run(&cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} artifacts to {}", report.artifacts.len(), report.out_dir.display());
    let results = serde_json::to_string_pretty(&report.results).unwrap_or_default();
    println!("{results}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

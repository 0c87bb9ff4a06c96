//! `voxbeam`: offline renderer, live frame service and environment and
//! denoiser tools.

mod server;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use voxbeam_core::denoise::BilateralParams;
use voxbeam_core::envlight::{
    estimate_hdr_with_regions, illumination_difference, stitch_with, Extremal, FisheyePair, HdrParams, IllumParams, MapFrame,
    MapKind, RadianceMap, DEFAULT_FOV_DEG, DEFAULT_PANO_HEIGHT,
};
use voxbeam_core::imageio::{read_pfm, read_png, write_pfm, write_png_ldr};
use voxbeam_core::pipeline::{redenoise, run_offline, RedenoiseOptions, SessionConfig};
use voxbeam_core::reproject::ValidityParams;

#[derive(Parser)]
#[command(name = "voxbeam", version, about = "Environment-lit stereo volume renderer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured camera path to image files.
    Render {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write G-buffers, cameras and HDR maps for `denoise`.
        #[arg(long)]
        dump_gbuffers: bool,
        /// Also write reprojection validity masks as PNG.
        #[arg(long)]
        dump_masks: bool,
    },
    /// Stream frames to one websocket viewer at a time.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Exit after the first session ends.
        #[arg(long)]
        once: bool,
    },
    /// Stitch a front/back fisheye pair into an equirectangular panorama.
    Stitch {
        #[arg(long)]
        front: PathBuf,
        #[arg(long)]
        back: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
        fov: f64,
        /// Panorama height; the width is twice this.
        #[arg(long, default_value_t = DEFAULT_PANO_HEIGHT)]
        height: usize,
        /// `.png` or `.pfm`.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Estimate an HDR map from an LDR panorama.
    EstimateHdr {
        input: PathBuf,
        /// PFM output.
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        hdr: HdrArgs,
    },
    /// Print the illumination difference between two HDR maps.
    DiffIllum {
        previous: PathBuf,
        current: PathBuf,
        #[arg(long, default_value_t = IllumParams::default().grid_n)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = ExtremalArg::Min)]
        extremal: ExtremalArg,
    },
    /// Denoise a sequence dumped by `render --dump-gbuffers`.
    Denoise {
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        params: DenoiseArgs,
        /// Recompute the illumination difference from the dumped HDR maps
        /// with this extremal instead of using the recorded values.
        #[arg(long, value_enum)]
        extremal: Option<ExtremalArg>,
        #[arg(long, default_value_t = IllumParams::default().grid_n)]
        grid: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtremalArg {
    Min,
    Max,
}

impl From<ExtremalArg> for Extremal {
    fn from(e: ExtremalArg) -> Self {
        match e {
            ExtremalArg::Min => Extremal::Min,
            ExtremalArg::Max => Extremal::Max,
        }
    }
}

#[derive(Args)]
struct HdrArgs {
    #[arg(long, default_value_t = HdrParams::default().percentile)]
    percentile: f64,
    #[arg(long, default_value_t = HdrParams::default().floor)]
    floor: f64,
    #[arg(long, default_value_t = HdrParams::default().boost)]
    boost: f64,
    #[arg(long, default_value_t = HdrParams::default().gamma)]
    gamma: f64,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(long, default_value_t = BilateralParams::default().radius)]
    radius: usize,
    #[arg(long, default_value_t = BilateralParams::default().sigma_albedo)]
    sigma_albedo: f64,
    #[arg(long, default_value_t = BilateralParams::default().sigma_gradient)]
    sigma_gradient: f64,
    #[arg(long, default_value_t = BilateralParams::default().sigma_depth)]
    sigma_depth: f64,
    #[arg(long, default_value_t = BilateralParams::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = BilateralParams::default().beta)]
    beta: f64,
    #[arg(long, default_value_t = BilateralParams::default().temporal_multiplier)]
    temporal_multiplier: f64,
    #[arg(long, default_value_t = ValidityParams::default().depth_tolerance)]
    depth_tolerance: f64,
    #[arg(long, default_value_t = ValidityParams::default().albedo_tolerance)]
    albedo_tolerance: f64,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Render { config, output, dump_gbuffers, dump_masks } => {
            let mut cfg = SessionConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            cfg.output.dump_gbuffers |= dump_gbuffers;
            cfg.output.dump_masks |= dump_masks;
            let manifest = run_offline(&cfg)?;
            println!("wrote {} frames to {}", manifest.frames.len(), cfg.output_dir.display());
            Ok(())
        }
        Command::Serve { config, port, host, once } => {
            let cfg = SessionConfig::load(&config)?;
            server::serve(&cfg, (host.as_str(), port), once)
        }
        Command::Stitch { front, back, fov, height, output } => {
            let pair = FisheyePair::new(read_png(&front)?, read_png(&back)?, fov, FisheyePair::back_to_back_rotation())?;
            let pano = stitch_with(&pair, height)?;
            write_map(&output, pano.image())?;
            println!("{}x{} panorama written to {}", pano.width(), pano.height(), output.display());
            Ok(())
        }
        Command::EstimateHdr { input, output, hdr } => {
            let params = HdrParams { percentile: hdr.percentile, floor: hdr.floor, boost: hdr.boost, gamma: hdr.gamma };
            let pano = RadianceMap::new(read_png(&input)?, MapKind::Ldr, MapFrame::World)?;
            let (map, regions) = estimate_hdr_with_regions(&pano, &params)?;
            write_pfm(&output, map.image())?;
            println!("{} light region(s)", regions.len());
            for r in &regions {
                let d = r.direction;
                println!("  {} px, direction ({:.3}, {:.3}, {:.3}), peak {:.3}", r.pixels, d.x, d.y, d.z, r.peak_luminance);
            }
            Ok(())
        }
        Command::DiffIllum { previous, current, grid, extremal } => {
            let load = |p: &Path| -> Result<RadianceMap> { Ok(RadianceMap::new(read_pfm(p)?, MapKind::Hdr, MapFrame::Warped)?) };
            let params = IllumParams { grid_n: grid, extremal: extremal.into() };
            let d = illumination_difference(&load(&previous)?, &load(&current)?, &params)?;
            println!("T = {:.6}", d.value);
            for row in d.per_patch.chunks(d.grid_n) {
                println!("{}", row.iter().map(|t| format!("{t:8.4}")).collect::<Vec<_>>().join(" "));
            }
            Ok(())
        }
        Command::Denoise { input, output, params, extremal, grid } => {
            let opts = RedenoiseOptions {
                bilateral: BilateralParams {
                    radius: params.radius,
                    sigma_albedo: params.sigma_albedo,
                    sigma_gradient: params.sigma_gradient,
                    sigma_depth: params.sigma_depth,
                    alpha: params.alpha,
                    beta: params.beta,
                    temporal_multiplier: params.temporal_multiplier,
                },
                validity: ValidityParams { depth_tolerance: params.depth_tolerance, albedo_tolerance: params.albedo_tolerance },
                illumination: extremal.map(|e| IllumParams { grid_n: grid, extremal: e.into() }),
            };
            let ts = redenoise(&input, &output, &opts)?;
            for (t, v) in ts.iter().enumerate() {
                println!("frame {t:05}: T = {v:.6}");
            }
            Ok(())
        }
    }
}

fn write_map(path: &Path, img: &voxbeam_core::imageio::Image) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pfm") => write_pfm(path, img)?,
        Some("png") => write_png_ldr(path, img)?,
        _ => bail!("output {} must end in .png or .pfm", path.display()),
    }
    Ok(())
}


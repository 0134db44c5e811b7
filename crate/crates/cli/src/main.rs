mod workflow;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use elf_core::config::{PipelineConfig, SaliencySource};
use elf_core::dataset::{derive_set, prepare_hpatches, DeriveMode, Manifest};
use elf_core::descriptor::write_descriptors;
use elf_core::detector::{read_keypoints, write_keypoints};
use elf_core::evalkit::DEFAULT_EPS;
use elf_core::gradcheck::{gradcheck_network, GradcheckOptions};
use elf_core::imageio::{load_image, save_saliency_png};
use elf_core::kernels::ReluMode;
use elf_core::netgraph::{DType, Network, WeightArchive};
use elf_core::pipeline::{describe_image, detect_image};

use workflow::{load_graph, Features};

#[derive(Parser)]
#[command(
    name = "elf",
    version,
    about = "Keypoints from CNN feature-map gradients"
)]
struct Cli {
    /// Worker threads for per-image parallelism (default: all cores).
    #[arg(long, global = true, env = "ELF_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Pipeline config: a JSON file or a preset name (vgg, alexnet, vgg_robust,
    /// vgg_components, sobel, laplacian).
    #[arg(long, short, default_value = "vgg")]
    config: String,
    /// Architecture file or bundled name; defaults to the config's `arch`.
    #[arg(long)]
    arch: Option<String>,
    /// ELFW weight archive.
    #[arg(long, short)]
    weights: Option<PathBuf>,
    /// Feature map whose gradient drives detection.
    #[arg(long)]
    layer: Option<String>,
    /// Feature map sampled for descriptors.
    #[arg(long)]
    describe_layer: Option<String>,
    #[arg(long, value_name = "identity|mask")]
    relu_mode: Option<ReluMode>,
    #[arg(long)]
    max_kp: Option<usize>,
    /// Replace the network saliency with an image-gradient baseline.
    #[arg(long, value_name = "sobel|laplacian")]
    baseline: Option<SaliencySource>,
}

impl ModelArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        if let Some(arch) = &self.arch {
            cfg.arch = Some(arch.clone());
        }
        if let Some(layer) = &self.layer {
            cfg.detect_layer = Some(layer.clone());
            cfg.saliency = SaliencySource::Network;
        }
        if let Some(layer) = &self.describe_layer {
            cfg.describe_layer = layer.clone();
        }
        if let Some(mode) = self.relu_mode {
            cfg.relu_mode = mode;
        }
        if let Some(n) = self.max_kp {
            cfg.detector.max_keypoints = n;
        }
        if let Some(b) = self.baseline {
            cfg.saliency = b;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The network named by the config, if weights were given.
    fn network(&self, cfg: &PipelineConfig) -> Result<Option<Network>> {
        let Some(weights) = &self.weights else {
            return Ok(None);
        };
        let arch = cfg
            .arch
            .as_deref()
            .context("no architecture given (use --arch or set `arch` in the config)")?;
        let graph = load_graph(arch)?;
        let archive = WeightArchive::read(weights)?;
        Ok(Some(Network::new(graph, archive)?))
    }

    fn require_network(&self, cfg: &PipelineConfig) -> Result<Network> {
        self.network(cfg)?
            .context("this command needs a weight archive (--weights)")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Detect keypoints in one image.
    Detect {
        image: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Keypoint file to write (stdout when absent).
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Also write the min-max stretched saliency map as PNG.
        #[arg(long)]
        save_saliency: Option<PathBuf>,
    },
    /// Sample descriptors at the keypoints of a keypoint file.
    Describe {
        image: PathBuf,
        keypoints: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Do not L2-normalize descriptors.
        #[arg(long)]
        raw: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Score a manifest of image pairs; writes the JSON report.
    Eval {
        manifest: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Read `<stem>.kp` and `<stem>.desc` from this directory instead of
        /// running the detector.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Write computed `<stem>.kp` / `<stem>.desc` files here.
        #[arg(long)]
        save_features: Option<PathBuf>,
        /// Correspondence threshold in pixels.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// Per-pair CSV for plotting.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Matching score of several description layers with detection held fixed.
    Sweep {
        manifest: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated description layers.
        #[arg(long, value_delimiter = ',', required = true)]
        layers: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        /// CSV output (stdout when absent).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Build the rotation or scale set from seed images.
    Derive {
        #[arg(required = true)]
        seeds: Vec<PathBuf>,
        #[arg(long, value_name = "rotation|scale")]
        mode: DeriveMode,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Resize an HPatches-style tree to 640 × 480 with rectified homographies.
    Hpatches {
        root: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Finite-difference check of every layer and of the saliency pass on random weights.
    Gradcheck {
        /// Architecture file or bundled name.
        #[arg(long, default_value = "tiny")]
        arch: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Probe image side length in pixels.
        #[arg(long, default_value_t = 16)]
        size: usize,
        /// Layer seeding the saliency check (default: last).
        #[arg(long)]
        layer: Option<String>,
        /// Write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Corrupt this layer's VJP to exercise the failure path.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Write a randomly initialized weight archive for an architecture.
    InitWeights {
        #[arg(long)]
        arch: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Store as 32-bit floats.
        #[arg(long)]
        f32: bool,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Print a preset config as JSON.
    Preset { name: String },
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn input_channels(network: Option<&Network>) -> usize {
    network.map_or(3, |n| n.graph().input_channels())
}

/// `Ok(true)` when the command succeeded and its checks passed.
fn run(cli: Cli) -> Result<bool> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Detect {
            image,
            model,
            output,
            save_saliency,
        } => {
            let cfg = model.config()?;
            let network = model.network(&cfg)?;
            if cfg.saliency == SaliencySource::Network && network.is_none() {
                bail!("network saliency needs a weight archive (--weights)");
            }
            let img = load_image(&image, input_channels(network.as_ref()))?;
            let (map, detection) = detect_image(&img, network.as_ref(), &cfg)?;
            if let Some(p) = &save_saliency {
                save_saliency_png(&map, p)?;
            }
            let (_, h, w) = img.chw()?;
            match &output {
                Some(p) => write_keypoints(p, w, h, &detection.keypoints)?,
                None => print!(
                    "{}",
                    elf_core::detector::format_keypoints(w, h, &detection.keypoints)
                ),
            }
            log::info!(
                "{} keypoints (level {:?}) in {}",
                detection.keypoints.len(),
                detection.level,
                image.display()
            );
        }
        Command::Describe {
            image,
            keypoints,
            model,
            raw,
            output,
        } => {
            let mut cfg = model.config()?;
            cfg.normalize_descriptors = !raw;
            let network = model.require_network(&cfg)?;
            let img = load_image(&image, network.graph().input_channels())?;
            let kps = read_keypoints(&keypoints)?;
            let (_, h, w) = img.chw()?;
            if (kps.width, kps.height) != (w, h) {
                bail!(
                    "keypoint file is for a {} × {} image, {} is {w} × {h}",
                    kps.width,
                    kps.height,
                    image.display()
                );
            }
            let set = describe_image(&img, &kps.keypoints, &network, &cfg)?;
            match &output {
                Some(p) => write_descriptors(p, &set)?,
                None => print!("{}", elf_core::descriptor::format_descriptors(&set)),
            }
        }
        Command::Eval {
            manifest,
            model,
            features,
            save_features,
            eps,
            output,
            csv,
        } => {
            let manifest = Manifest::load(&manifest)?;
            let feats = match &features {
                Some(dir) => Features::read_dir(&manifest, dir)?,
                None => {
                    let cfg = model.config()?;
                    let network = model.network(&cfg)?;
                    Features::compute(&manifest, network.as_ref(), &cfg)?
                }
            };
            if let Some(dir) = &save_features {
                feats.write_dir(dir)?;
            }
            let report = workflow::evaluate(&manifest, &feats, eps)?;
            write_or_print(
                output.as_ref(),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            if let Some(p) = &csv {
                std::fs::write(p, workflow::report_csv(&report))?;
            }
        }
        Command::Sweep {
            manifest,
            model,
            layers,
            eps,
            output,
        } => {
            let manifest = Manifest::load(&manifest)?;
            let cfg = model.config()?;
            let network = model.require_network(&cfg)?;
            let text = workflow::sweep(&manifest, &network, &cfg, &layers, eps)?;
            write_or_print(output.as_ref(), &text)?;
        }
        Command::Derive {
            seeds,
            mode,
            output,
        } => {
            let m = derive_set(&seeds, mode, &output)?;
            eprintln!(
                "{} pairs written to {} ({} seeds skipped)",
                m.pairs.len(),
                output.display(),
                m.skipped.len()
            );
        }
        Command::Hpatches { root, output } => {
            let m = prepare_hpatches(&root, &output)?;
            eprintln!("{} pairs written to {}", m.pairs.len(), output.display());
        }
        Command::Gradcheck {
            arch,
            seed,
            size,
            layer,
            json,
            inject_fault,
        } => {
            let graph = load_graph(&arch)?;
            let opts = GradcheckOptions {
                seed,
                image_size: (size, size),
                saliency_layer: layer,
                fault_layer: inject_fault,
                ..Default::default()
            };
            let network = Network::new(graph.clone(), WeightArchive::random(&graph, seed))?;
            let report = gradcheck_network(&network, &opts)?;
            print!("{}", report.to_text());
            if let Some(p) = &json {
                std::fs::write(p, serde_json::to_string_pretty(&report)?)?;
            }
            return Ok(report.passed);
        }
        Command::InitWeights {
            arch,
            seed,
            f32,
            output,
        } => {
            let graph = load_graph(&arch)?;
            let dtype = if f32 { DType::F32 } else { DType::F64 };
            WeightArchive::random(&graph, seed).write(&output, dtype)?;
        }
        Command::Preset { name } => {
            println!("{}", PipelineConfig::preset(&name)?.to_json());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

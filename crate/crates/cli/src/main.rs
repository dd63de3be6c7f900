use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod metrics;

use config::RunConfig;

/// Layout-object-position fields: synthetic scenes, feature clouds, field
/// training, queries, topometric maps and planning.
///
/// Every numeric setting comes from the `--config` TOML file (sections
/// `scene`, `provider`, `fusion`, `hashgrid`, `train`, `loss`, `eval`,
/// `query`, `mapper`, `planner`; unknown keys are errors). Run
/// `lopfield print-config` for every key with its default. Each command
/// writes `resolved_config.toml` beside its outputs.
#[derive(Debug, Parser)]
#[command(name = "lopfield", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Caps worker threads; overrides `threads` in the config.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Out {
    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the resolved configuration with every key.
    PrintConfig,
    /// Generate a synthetic apartment and render its frames.
    GenScene {
        /// Overrides `scene.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Out,
    },
    /// Fuse a scene directory into a feature point cloud (LOPF).
    BuildCloud {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Check an LOPF file against the format.
    CheckCloud {
        #[arg(long)]
        cloud: PathBuf,
    },
    /// Train a field on a feature cloud.
    Train {
        #[arg(long)]
        cloud: PathBuf,
        /// Scene directory supplying the field bounds; the cloud's own
        /// bounds are used otherwise.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Region label of one point.
    Infer {
        #[arg(long)]
        field: PathBuf,
        /// Point as `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        point: [f64; 3],
        #[command(flatten)]
        labels: Labels,
        #[command(flatten)]
        out: Out,
    },
    /// Heatmap and predicted position of a text or image query.
    Localize {
        #[arg(long)]
        field: PathBuf,
        #[arg(
            long,
            conflicts_with = "image_emb",
            required_unless_present = "image_emb"
        )]
        text: Option<String>,
        /// JSON array holding a vision-language embedding.
        #[arg(long)]
        image_emb: Option<PathBuf>,
        /// Cloud whose points are the samples; a grid over the field bounds
        /// otherwise.
        #[arg(long)]
        cloud: Option<PathBuf>,
        /// Scene directory used to name the region of the prediction.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Build a topometric map from a field and a scene's frames.
    BuildMap {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Fold further frames into an existing map.
    UpdateMap {
        /// Directory holding `topomap.json` and `map_state.json`.
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Scene directory with the new frames.
        #[arg(long)]
        scene: PathBuf,
        /// Index of the first frame to fold in.
        #[arg(long, default_value_t = 0)]
        first_frame: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Plan from a point to a described object.
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        field: PathBuf,
        /// Start point as `x,y,z`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: [f64; 3],
        /// Goal description, e.g. "sofa in the living room".
        #[arg(long)]
        goal: String,
        /// Region the goal object must belong to.
        #[arg(long)]
        region: Option<String>,
        #[command(flatten)]
        labels: Labels,
        #[command(flatten)]
        out: Out,
    },
    /// Region accuracy and per-region precision/recall/F1 on held-out points.
    EvalRegion {
        #[arg(long)]
        field: PathBuf,
        /// Held-out cloud.
        #[arg(long)]
        cloud: PathBuf,
        /// Scene directory with the ground-truth partition.
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        out: Out,
    },
}

/// Region label source: a scene directory or an explicit list.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Labels {
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Comma-separated region labels.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut p = [0.0; 3];
    for (v, t) in p.iter_mut().zip(parts) {
        *v = t
            .parse::<f64>()
            .map_err(|_| format!("bad coordinate {t:?}"))?;
        if !v.is_finite() {
            return Err(format!("non-finite coordinate {t:?}"));
        }
    }
    Ok(p)
}

fn run(cli: Cli) -> lopfield::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| lopfield::Error::InvalidConfig(e.to_string()))?;
    }
    use commands as c;
    match cli.command {
        Command::PrintConfig => {
            print!("{}", cfg.to_toml()?);
            Ok(())
        }
        Command::GenScene { seed, out } => {
            if let Some(s) = seed {
                cfg.scene.seed = s;
            }
            c::gen_scene(&cfg, &out.out)
        }
        Command::BuildCloud { scene, out } => c::build_cloud(&cfg, &scene, &out.out),
        Command::CheckCloud { cloud } => c::check_cloud(&cloud),
        Command::Train { cloud, scene, out } => c::train(&cfg, &cloud, scene.as_deref(), &out.out),
        Command::Infer {
            field,
            point,
            labels,
            out,
        } => c::infer(&cfg, &field, point, &labels.into(), &out.out),
        Command::Localize {
            field,
            text,
            image_emb,
            cloud,
            scene,
            out,
        } => {
            let query = match (text, image_emb) {
                (Some(t), _) => c::Query::Text(t),
                (None, Some(p)) => c::Query::Image(p),
                (None, None) => unreachable!("clap requires one of --text / --image-emb"),
            };
            c::localize(
                &cfg,
                &field,
                &query,
                cloud.as_deref(),
                scene.as_deref(),
                &out.out,
            )
        }
        Command::BuildMap { field, scene, out } => c::build_map(&cfg, &field, &scene, &out.out),
        Command::UpdateMap {
            map,
            field,
            scene,
            first_frame,
            out,
        } => c::update_map(&cfg, &map, &field, &scene, first_frame, &out.out),
        Command::Plan {
            map,
            field,
            start,
            goal,
            region,
            labels,
            out,
        } => c::plan(
            &cfg,
            &map,
            &field,
            start,
            &goal,
            region.as_deref(),
            &labels.into(),
            &out.out,
        ),
        Command::EvalRegion {
            field,
            cloud,
            scene,
            out,
        } => c::eval_region(&cfg, &field, &cloud, &scene, &out.out),
    }
}

impl From<Labels> for commands::LabelSource {
    fn from(l: Labels) -> Self {
        match (l.scene, l.labels) {
            (Some(s), _) => commands::LabelSource::Scene(s),
            (None, Some(v)) => commands::LabelSource::List(v),
            (None, None) => unreachable!("clap requires a label source"),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::FAILURE
        }
    }
}

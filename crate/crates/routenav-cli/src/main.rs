//! Command-line pipeline: dataset synthesis, descriptor reduction, policy
//! training, place-recognition evaluation, deployment, and SVG reports.
//!
//! Exit codes: 0 success, 2 usage error (bad flags), 3 invalid
//! configuration, 1 any other failure. Errors print one line to stderr as
//! `error: <kind>: <message>`.

mod config;
mod csvio;
mod runmeta;
mod svg;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{resolve_out_dir, RunConfig};
use routenav::env::{EnvConfig, ObsSource, ObservationMode};
use routenav::eval;
use routenav::features::{fit_pca_whitening, Projection};
use routenav::net::PolicyParams;
use routenav::ppo::{self, TrainSpec};
use routenav::traversal::{
    generate_synthetic, load_manifest, write_manifest, Condition, Traversal, TraversalSet,
};

#[derive(Parser)]
#[command(
    name = "routenav",
    about = "Route-traversal navigation lab: synthesize data, reduce descriptors, train and evaluate navigation policies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// JSON config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run identifier (defaults derive from the subcommand and seed).
    #[arg(long)]
    run_id: Option<String>,
    /// Output directory (default: $ROUTENAV_OUT/<run_id> or runs/<run_id>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic traversal set and write it as a manifest plus
    /// descriptor tables.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        walk_step: Option<f64>,
        #[arg(long)]
        moderate_beta: Option<f64>,
        #[arg(long)]
        moderate_sigma: Option<f64>,
        #[arg(long)]
        extreme_beta: Option<f64>,
        #[arg(long)]
        extreme_sigma: Option<f64>,
    },
    /// Fit PCA whitening on a manifest's reference traversal and write the
    /// projection plus projected descriptor tables.
    Reduce {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        manifest: PathBuf,
        /// Target dimensionality.
        #[arg(long)]
        dim: usize,
    },
    /// Train navigation agents (one per configured dim) on a dataset.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Observation mode: bimodal | position_baseline | raw_image.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        max_episodes: Option<u64>,
    },
    /// Single-frame place-recognition evaluation: AUC per condition and dim.
    EvalVpr {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        dims: Option<String>,
        /// Localization tolerance in frames.
        #[arg(long, default_value_t = 2)]
        tolerance: usize,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 5.0)]
        lr: f64,
    },
    /// Run deployment episodes from a checkpoint and report completion
    /// statistics.
    Deploy {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "reference")]
        condition: String,
        #[arg(long, default_value_t = 500)]
        episodes: usize,
        /// Observation mode the checkpoint was trained with.
        #[arg(long, default_value = "bimodal")]
        mode: String,
        /// Projection file; when omitted and the checkpoint dim is smaller
        /// than the native descriptors, the projection is refit on the
        /// reference traversal.
        #[arg(long)]
        projection: Option<PathBuf>,
    },
    /// Render smoothed training-curve SVGs from metrics CSV files.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated metrics CSV paths.
        #[arg(long)]
        metrics: String,
        #[arg(long, default_value_t = 0.9)]
        weight: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = format!("{e:#}");
            if msg.contains("config error") || msg.contains("invalid config") {
                eprintln!("error: config: {msg}");
                3
            } else {
                eprintln!("error: runtime: {msg}");
                1
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            common,
            frames,
            dim,
            walk_step,
            moderate_beta,
            moderate_sigma,
            extreme_beta,
            extreme_sigma,
        } => {
            let started = Instant::now();
            let mut cfg = load_config(&common)?;
            let mut synth = cfg.synth.unwrap_or_default();
            synth.seed = common.seed.unwrap_or(if cfg.seed != 0 { cfg.seed } else { synth.seed });
            if let Some(v) = frames {
                synth.n_frames = v;
            }
            if let Some(v) = dim {
                synth.dim = v;
            }
            if let Some(v) = walk_step {
                synth.walk_step = v;
            }
            if let Some(v) = moderate_beta {
                synth.moderate.beta = v;
            }
            if let Some(v) = moderate_sigma {
                synth.moderate.sigma = v;
            }
            if let Some(v) = extreme_beta {
                synth.extreme.beta = v;
            }
            if let Some(v) = extreme_sigma {
                synth.extreme.sigma = v;
            }
            synth.validate().map_err(|e| anyhow!("config error: {e}"))?;
            cfg.synth = Some(synth);
            cfg.seed = synth.seed;

            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| format!("synth-d{}-s{}", synth.dim, synth.seed));
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;

            let set = generate_synthetic(&synth)?;
            let manifest_path = out_dir.join("dataset.manifest.json");
            let mut outputs = write_manifest(&set, &manifest_path)?;
            outputs.push(manifest_path);
            println!(
                "synth: {} frames x {}d -> {}",
                synth.n_frames,
                synth.dim,
                out_dir.display()
            );
            runmeta::write_run_manifest(
                &out_dir,
                "synth",
                &run_id,
                synth.seed,
                &synth,
                &outputs,
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }

        Command::Reduce { common, manifest, dim } => {
            let started = Instant::now();
            let cfg = load_config(&common)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| format!("reduce-d{dim}-s{seed}"));
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;

            let set = load_manifest(&manifest)?;
            let projection = fit_pca_whitening(&set.reference.descriptor_matrix(), dim)?;
            let proj_path = out_dir.join(format!("projection_d{dim}.clpj"));
            projection.write(&proj_path)?;

            let reduced = project_set(&set, &projection)?;
            let manifest_path = out_dir.join(format!("reduced_d{dim}.manifest.json"));
            let mut outputs = write_manifest(&reduced, &manifest_path)?;
            outputs.push(manifest_path);
            outputs.push(proj_path);
            println!(
                "reduce: {}d -> {}d over {} traversals -> {}",
                set.reference.dim(),
                dim,
                1 + set.variants.len(),
                out_dir.display()
            );
            runmeta::write_run_manifest(
                &out_dir,
                "reduce",
                &run_id,
                seed,
                &serde_json::json!({"manifest": manifest, "dim": dim}),
                &outputs,
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }

        Command::Train { common, manifest, mode, dims, trials, max_episodes } => {
            let started = Instant::now();
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(m) = manifest {
                cfg.manifest = Some(m);
            }
            if let Some(m) = &mode {
                cfg.observation_mode = m.parse::<ObservationMode>()?;
            }
            if let Some(d) = &dims {
                cfg.dims = parse_dims(d)?;
            }
            if let Some(t) = trials {
                cfg.trainer.trials = t;
            }
            if let Some(m) = max_episodes {
                cfg.trainer.max_episodes = m;
            }
            cfg.validate()?;

            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| format!("train-{}-s{}", mode_tag(cfg.observation_mode), cfg.seed));
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;

            let set = load_dataset(&cfg)?;
            let n = set.reference.len();
            let mut all_rows = Vec::new();
            let mut outputs = Vec::new();

            let dims_to_run: Vec<usize> = match cfg.observation_mode {
                ObservationMode::Bimodal => cfg.dims.clone(),
                // Baseline and raw modes have a fixed observation width.
                _ => vec![0],
            };
            for &dim in &dims_to_run {
                let (source, dim_label) =
                    observation_source(&cfg, &set, dim, Condition::Reference)?;
                let env = EnvConfig::new(n, cfg.observation_mode);
                let mut spec = TrainSpec::new(cfg.trainer, env, cfg.seed);
                spec.curriculum_window = cfg.curriculum_window;
                spec.curriculum_threshold = cfg.curriculum_threshold;
                let results = ppo::train(&spec, &source)?;
                for trial in &results {
                    let ckpt = out_dir.join(format!("checkpoint_d{dim_label}_trial{}.clck", trial.trial));
                    trial.params.write_checkpoint(&ckpt)?;
                    outputs.push(ckpt);
                    for row in &trial.rows {
                        all_rows.push(csvio::MetricsRow {
                            run_id: run_id.clone(),
                            trial: trial.trial,
                            seed: trial.seed,
                            condition: cfg.condition.to_string(),
                            dim: dim_label,
                            episode: row.episode,
                            mean_reward: row.mean_reward,
                            mean_steps: row.mean_steps,
                            success_rate: row.success_rate,
                            policy_loss: row.policy_loss,
                            value_loss: row.value_loss,
                            entropy: row.entropy,
                            wall_clock_s: row.wall_clock_s,
                        });
                    }
                    println!(
                        "train: dim {dim_label} trial {} finished after {} episodes ({} rows)",
                        trial.trial,
                        trial.episodes,
                        trial.rows.len()
                    );
                }
            }
            let metrics_path = out_dir.join("metrics.csv");
            csvio::write_metrics(&metrics_path, &all_rows)?;
            outputs.push(metrics_path);
            runmeta::write_run_manifest(
                &out_dir,
                "train",
                &run_id,
                cfg.seed,
                &cfg,
                &outputs,
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }

        Command::EvalVpr { common, manifest, dims, tolerance, epochs, lr } => {
            let started = Instant::now();
            let mut cfg = load_config(&common)?;
            if let Some(seed) = common.seed {
                cfg.seed = seed;
            }
            if let Some(d) = &dims {
                cfg.dims = parse_dims(d)?;
            }
            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| format!("vpr-s{}", cfg.seed));
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;

            let set = load_manifest(&manifest)?;
            let native = set.reference.dim();
            let mut rows = Vec::new();
            for &dim in &cfg.dims {
                if dim > native {
                    bail!("config error: dim {dim} exceeds native descriptor dim {native}");
                }
                let (reference, queries) = if dim == native {
                    (set.reference.clone(), set.variants.clone())
                } else {
                    let projection =
                        fit_pca_whitening(&set.reference.descriptor_matrix(), dim)?;
                    let reduced = project_set(&set, &projection)?;
                    (reduced.reference, reduced.variants)
                };
                let clf = eval::train_place_classifier(&reference, epochs, lr, cfg.seed);
                for query in &queries {
                    let scores = eval::score_query(&clf, query)?;
                    let truth: Vec<usize> = (0..query.len()).collect();
                    let curve = eval::precision_recall(&scores, &truth, tolerance)?;
                    let auc = eval::auc(&curve);
                    println!(
                        "eval-vpr: dim {dim} condition {} auc {auc:.4}",
                        query.condition
                    );
                    rows.push(csvio::VprRow {
                        run_id: run_id.clone(),
                        seed: cfg.seed,
                        condition: query.condition.to_string(),
                        dim,
                        tolerance,
                        frames: query.len(),
                        auc,
                    });
                }
            }
            let csv_path = out_dir.join("vpr_auc.csv");
            csvio::write_vpr(&csv_path, &rows)?;
            runmeta::write_run_manifest(
                &out_dir,
                "eval-vpr",
                &run_id,
                cfg.seed,
                &serde_json::json!({
                    "manifest": manifest, "dims": cfg.dims, "tolerance": tolerance,
                    "epochs": epochs, "lr": lr
                }),
                &[csv_path],
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }

        Command::Deploy { common, checkpoint, manifest, condition, episodes, mode, projection } => {
            let started = Instant::now();
            let cfg = load_config(&common)?;
            let seed = common.seed.unwrap_or(cfg.seed);
            let condition: Condition = condition.parse()?;
            let mode: ObservationMode = mode.parse()?;
            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| format!("deploy-{condition}-s{seed}"));
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;

            let params = PolicyParams::read_checkpoint(&checkpoint)?;
            let set = load_manifest(&manifest)?;
            let traversal = set
                .variant(condition)
                .ok_or_else(|| anyhow!("manifest has no {condition} traversal"))?;
            let n = traversal.len();

            let source = match mode {
                ObservationMode::PositionBaseline => ObsSource::Position,
                ObservationMode::RawImage => {
                    ObsSource::RawImages { seed: cfg.seed, condition }
                }
                ObservationMode::Bimodal => {
                    let native = traversal.dim();
                    if params.visual_dim == native {
                        ObsSource::from_traversal(traversal)
                    } else {
                        let proj = match &projection {
                            Some(p) => Projection::read(p)?,
                            // Refit on the reference traversal only; query
                            // traversals are never used for fitting.
                            None => fit_pca_whitening(
                                &set.reference.descriptor_matrix(),
                                params.visual_dim,
                            )?,
                        };
                        ObsSource::Features(proj.project_all(&traversal.descriptor_matrix())?)
                    }
                }
            };
            let stats = eval::deploy(&params, &source, n, condition, episodes, seed)?;
            println!(
                "deploy: {} episodes on {condition}: {:.1}% completed, {:.1}% failed, mean steps {:.1}",
                stats.episodes, stats.completed_pct, stats.failed_pct, stats.mean_steps
            );
            let csv_path = out_dir.join("deploy.csv");
            csvio::write_deploy(
                &csv_path,
                &[csvio::DeployRow {
                    run_id: run_id.clone(),
                    seed,
                    condition: condition.to_string(),
                    dim: params.visual_dim,
                    episodes: stats.episodes,
                    completed_pct: stats.completed_pct,
                    failed_pct: stats.failed_pct,
                    mean_steps: stats.mean_steps,
                }],
            )?;
            runmeta::write_run_manifest(
                &out_dir,
                "deploy",
                &run_id,
                seed,
                &serde_json::json!({
                    "checkpoint": checkpoint, "manifest": manifest,
                    "condition": condition, "episodes": episodes, "mode": mode_tag(mode),
                    "projection": projection,
                }),
                &[csv_path],
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }

        Command::Report { common, metrics, weight } => {
            let started = Instant::now();
            let cfg = load_config(&common)?;
            if !(0.0..1.0).contains(&weight) {
                bail!("config error: smoothing weight must be in [0, 1), got {weight}");
            }
            let seed = common.seed.unwrap_or(cfg.seed);
            let run_id = common
                .run_id
                .clone()
                .or(cfg.run_id.clone())
                .unwrap_or_else(|| "report".to_string());
            let out_dir = prepare_out_dir(&common, &cfg, &run_id)?;
            let paths: Vec<PathBuf> = metrics.split(',').map(PathBuf::from).collect();
            let outputs = svg::render_training_curves(&paths, weight, &out_dir)?;
            for p in &outputs {
                println!("report: wrote {}", p.display());
            }
            runmeta::write_run_manifest(
                &out_dir,
                "report",
                &run_id,
                seed,
                &serde_json::json!({"metrics": paths, "weight": weight}),
                &outputs,
                started.elapsed().as_secs_f64(),
            )?;
            Ok(())
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn prepare_out_dir(common: &CommonArgs, cfg: &RunConfig, run_id: &str) -> Result<PathBuf> {
    let out_dir = resolve_out_dir(common.out.as_deref(), cfg, run_id);
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    Ok(out_dir)
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("config error: bad dim {p:?}"))
        })
        .collect()
}

fn mode_tag(mode: ObservationMode) -> &'static str {
    match mode {
        ObservationMode::Bimodal => "bimodal",
        ObservationMode::PositionBaseline => "position_baseline",
        ObservationMode::RawImage => "raw_image",
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<TraversalSet> {
    match (&cfg.manifest, &cfg.synth) {
        (Some(path), _) => Ok(load_manifest(path)?),
        (None, Some(synth)) => Ok(generate_synthetic(synth)?),
        (None, None) => bail!("config error: either manifest or synth must be configured"),
    }
}

fn project_set(set: &TraversalSet, projection: &Projection) -> Result<TraversalSet> {
    let project_traversal = |t: &Traversal| -> Result<Traversal> {
        let projected = projection.project_all(&t.descriptor_matrix())?;
        let frames = projected
            .into_iter()
            .enumerate()
            .map(|(index, descriptor)| routenav::traversal::Frame {
                index,
                descriptor,
                raw_image: None,
            })
            .collect();
        Ok(Traversal::new(
            format!("{}_d{}", t.name, projection.d_out),
            t.condition,
            frames,
        )?)
    };
    let reference = project_traversal(&set.reference)?;
    let variants =
        set.variants.iter().map(project_traversal).collect::<Result<Vec<_>>>()?;
    Ok(TraversalSet::new(reference, variants)?)
}

/// Observation source for training: the dim label pairs with the CSV rows.
fn observation_source(
    cfg: &RunConfig,
    set: &TraversalSet,
    dim: usize,
    condition: Condition,
) -> Result<(ObsSource, usize)> {
    match cfg.observation_mode {
        ObservationMode::PositionBaseline => Ok((ObsSource::Position, 1)),
        ObservationMode::RawImage => {
            Ok((ObsSource::RawImages { seed: cfg.seed, condition }, 512))
        }
        ObservationMode::Bimodal => {
            let traversal = set
                .variant(condition)
                .ok_or_else(|| anyhow!("dataset has no {condition} traversal"))?;
            let native = traversal.dim();
            if dim == native {
                Ok((ObsSource::from_traversal(traversal), dim))
            } else if dim < native {
                let projection = fit_pca_whitening(&set.reference.descriptor_matrix(), dim)?;
                Ok((
                    ObsSource::Features(projection.project_all(&traversal.descriptor_matrix())?),
                    dim,
                ))
            } else {
                bail!("config error: dim {dim} exceeds native descriptor dim {native}")
            }
        }
    }
}

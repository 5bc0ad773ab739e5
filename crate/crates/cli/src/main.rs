//! One binary for the whole pipeline: dataset generation, statistics,
//! entropy reports, rendering, training, retrieval evaluation, the
//! ablation harness, and the gradient verification suite.
//!
//! Every run writes an `effective_config.json` snapshot beside its outputs
//! so results can be reproduced from the snapshot alone. Usage and config
//! errors exit with code 2, runtime failures with code 1.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gait_eval::DistanceMetric;
use gait_model::{Model, ModelConfig};
use gait_train::TrainConfig;
use gait_synth::SynthConfig;
use gps_core::{
    dataset_stats, default_palette, entropy_bits, read_gpsq, render_ppm, DatasetManifest,
    GaitParsingSequence,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "gait", version, about = "Gait parsing sequences: data, training, evaluation")]
struct Cli {
    /// Cap the worker thread pool (default: machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled gait dataset.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Per-part occurrence statistics of a dataset.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pixel-level label entropy of a dataset, with per-frame summary.
    Entropy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one stored frame to a PPM image.
    Render {
        #[arg(long)]
        data: PathBuf,
        /// Sequence id from the manifest.
        #[arg(long)]
        sequence: String,
        /// Frame index within the sequence.
        #[arg(long, default_value_t = 0)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on the dataset's train split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Open-set retrieval evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "euclidean")]
        metric: DistanceMetric,
    },
    /// Train and evaluate the ablation grid (graphs x GCN, blend-factor
    /// sweep, parsing vs silhouette).
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "euclidean")]
        metric: DistanceMetric,
    },
    /// Finite-difference verification of every differentiable primitive.
    Gradcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum CliError {
    /// Bad invocation or unreadable/invalid config: exit code 2.
    Usage(String),
    /// Failure while running: exit code 1.
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Worker count affects throughput only; results are identical.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create output directory {}: {e}", dir.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(anyhow::Error::from)?;
    std::fs::write(path, text)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

/// Training/ablation config file: both sections optional, defaults apply.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ExperimentConfig {
    model: ModelConfig,
    train: TrainConfig,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth { config, out, seed } => {
            let mut cfg: SynthConfig = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            prepare_out(&out)?;
            write_json(&out.join("effective_config.json"), &cfg)?;
            let manifest = gait_synth::generate_dataset(&cfg, &out)?;
            println!(
                "generated {} sequences ({} train / {} test subjects) under {}",
                manifest.entries().len(),
                manifest.split().train_subjects.len(),
                manifest.split().test_subjects.len(),
                out.display()
            );
            Ok(())
        }
        Command::Stats { data, out } => {
            let manifest = DatasetManifest::load(&data)?;
            prepare_out(&out)?;
            write_json(
                &out.join("effective_config.json"),
                &serde_json::json!({ "command": "stats", "data": data }),
            )?;
            let stats = dataset_stats(&manifest)?;
            write_json(&out.join("stats.json"), &stats)?;
            println!(
                "{} sequences, {} frames; stats written to {}",
                stats.total_sequences,
                stats.total_frames,
                out.join("stats.json").display()
            );
            Ok(())
        }
        Command::Entropy { data, out } => {
            let manifest = DatasetManifest::load(&data)?;
            prepare_out(&out)?;
            write_json(
                &out.join("effective_config.json"),
                &serde_json::json!({ "command": "entropy", "data": data }),
            )?;
            let report = entropy_report(&manifest)?;
            write_json(&out.join("entropy.json"), &report)?;
            println!(
                "dataset entropy {:.4} bits (binarized {:.4}); report at {}",
                report.dataset_entropy_bits,
                report.binarized_entropy_bits,
                out.join("entropy.json").display()
            );
            Ok(())
        }
        Command::Render { data, sequence, frame, out } => {
            let manifest = DatasetManifest::load(&data)?;
            let entry = manifest
                .entry(&sequence)
                .ok_or_else(|| CliError::Usage(format!("sequence {sequence} not in manifest")))?;
            let frames = read_gpsq(&manifest.resolve(entry))?;
            let Some(target) = frames.get(frame) else {
                return Err(CliError::Usage(format!(
                    "frame {frame} out of range ({} frames)",
                    frames.len()
                )));
            };
            prepare_out(&out)?;
            write_json(
                &out.join("effective_config.json"),
                &serde_json::json!({ "command": "render", "sequence": sequence, "frame": frame }),
            )?;
            let path = out.join(format!("{sequence}-{frame:04}.ppm"));
            render_ppm(target, &default_palette(), &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Train { config, data, out, seed } => {
            let mut cfg: ExperimentConfig = load_config(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let manifest = DatasetManifest::load(&data)?;
            prepare_out(&out)?;
            write_json(&out.join("effective_config.json"), &cfg)?;
            let outcome = gait_train::train_run(cfg.model, &cfg.train, &manifest, Some(&out))?;
            let last = outcome.history.last().expect("at least one epoch");
            println!(
                "trained {} epochs (final mean loss {:.4}); checkpoint at {}",
                outcome.history.len(),
                last.mean_loss,
                outcome
                    .checkpoint_path
                    .as_ref()
                    .expect("out dir given")
                    .display()
            );
            Ok(())
        }
        Command::Eval { checkpoint, data, out, metric } => {
            let manifest = DatasetManifest::load(&data)?;
            let (model, _meta) = Model::<f32>::load(&checkpoint)?;
            prepare_out(&out)?;
            write_json(
                &out.join("effective_config.json"),
                &serde_json::json!({
                    "command": "eval",
                    "checkpoint": checkpoint,
                    "metric": metric,
                    "model": model.config(),
                }),
            )?;
            let report = gait_eval::evaluate(&model, &manifest, metric)?;
            write_json(&out.join("report.json"), &report)?;
            println!(
                "rank1 {:.2}  rank5 {:.2}  mAP {:.2}  ({} queries, {} gallery, {} excluded)",
                report.rank1,
                report.rank5,
                report.map,
                report.num_query,
                report.num_gallery,
                report.excluded_queries
            );
            Ok(())
        }
        Command::Ablate { config, data, out, seed, metric } => {
            let mut cfg: ExperimentConfig = load_config(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let manifest = DatasetManifest::load(&data)?;
            prepare_out(&out)?;
            write_json(&out.join("effective_config.json"), &cfg)?;
            let report = gait_eval::ablate(&manifest, &cfg.model, &cfg.train, metric, &out)?;
            write_json(&out.join("ablation.json"), &report)?;
            std::fs::write(out.join("ablation.csv"), report.to_csv())
                .map_err(|e| anyhow::anyhow!("cannot write ablation.csv: {e}"))?;
            println!("{}", report.to_csv());
            println!(
                "mask-independence (gamma = 0.5): {}",
                if report.mask_independence_pass { "pass" } else { "FAIL" }
            );
            Ok(())
        }
        Command::Gradcheck { out } => {
            let results = autodiff::check::standard_suite().map_err(anyhow::Error::from)?;
            let mut all_ok = true;
            for r in &results {
                println!("{r}");
                all_ok &= r.passed();
            }
            if let Some(dir) = out {
                prepare_out(&dir)?;
                write_json(
                    &dir.join("effective_config.json"),
                    &serde_json::json!({ "command": "gradcheck" }),
                )?;
                let rows: Vec<serde_json::Value> = results
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "name": r.name,
                            "max_rel_err": r.max_rel_err,
                            "checked": r.checked,
                            "passed": r.passed(),
                        })
                    })
                    .collect();
                write_json(&dir.join("gradcheck.json"), &rows)?;
            }
            if all_ok {
                println!("all {} checks passed", results.len());
                Ok(())
            } else {
                Err(CliError::Runtime(anyhow::anyhow!("gradient checks failed")))
            }
        }
    }
}

#[derive(Debug, Serialize)]
struct EntropyReport {
    dataset_entropy_bits: f64,
    binarized_entropy_bits: f64,
    num_sequences: usize,
    num_frames: usize,
    frame_entropy_mean: f64,
    frame_entropy_min: f64,
    frame_entropy_max: f64,
}

fn entropy_report(manifest: &DatasetManifest) -> Result<EntropyReport, CliError> {
    let mut dataset_hist: Option<gps_core::LabelHistogram> = None;
    let mut frame_entropies = Vec::new();
    let mut num_frames = 0usize;
    for e in manifest.entries() {
        let frames = read_gpsq(&manifest.resolve(e))?;
        let seq = GaitParsingSequence::new(
            e.subject_id.clone(),
            e.sequence_id.clone(),
            e.camera_id.clone(),
            frames,
        )?;
        for f in seq.frames() {
            frame_entropies.push(entropy_bits(&f.histogram())?);
        }
        num_frames += seq.len();
        match &mut dataset_hist {
            Some(h) => h.merge(&seq.histogram()),
            None => dataset_hist = Some(seq.histogram()),
        }
    }
    let hist = dataset_hist.ok_or_else(|| CliError::Usage("dataset is empty".into()))?;
    let binarized = {
        let counts = hist.counts();
        let background = counts[0];
        let foreground: u64 = counts[1..].iter().sum();
        gps_core::LabelHistogram::new(vec![background, foreground])
    };
    let mean = frame_entropies.iter().sum::<f64>() / frame_entropies.len() as f64;
    let min = frame_entropies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = frame_entropies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(EntropyReport {
        dataset_entropy_bits: entropy_bits(&hist)?,
        binarized_entropy_bits: entropy_bits(&binarized)?,
        num_sequences: manifest.entries().len(),
        num_frames,
        frame_entropy_mean: mean,
        frame_entropy_min: min,
        frame_entropy_max: max,
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use placerec_cli::commands;
use placerec_cli::config::RunConfig;
use placerec_cli::error::{CliError, Result};
use placerec_cli::ingest::parse_frame_range;
use placerec_cli::synth::{DisparityProfile, SynthOptions};

#[derive(Parser)]
#[command(
    name = "placerec",
    about = "Multisensory place recognition: train modality weights, match frames, evaluate loop closures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Shared {
    /// Plain-text key-value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Feature-block sparsity regularizer
    #[arg(long)]
    lambda1: Option<f64>,
    /// Sensor-block sparsity regularizer
    #[arg(long)]
    lambda2: Option<f64>,
    /// Same-place GPS radius in meters
    #[arg(long = "radius-m")]
    radius_m: Option<f64>,
    /// Acceptance threshold on match scores
    #[arg(long)]
    threshold: Option<f64>,
    /// Frame index range `a..b` applied after sorting by timestamp
    #[arg(long)]
    frames: Option<String>,
}

impl Shared {
    fn build_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.lambda1 {
            cfg.lambda1 = v;
        }
        if let Some(v) = self.lambda2 {
            cfg.lambda2 = v;
        }
        if let Some(v) = self.radius_m {
            cfg.radius_m = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if !(cfg.lambda1 >= 0.0 && cfg.lambda2 >= 0.0) {
            return Err(CliError::Validation("lambda1 and lambda2 must be >= 0".into()));
        }
        if !(cfg.radius_m > 0.0) {
            return Err(CliError::Validation("radius-m must be > 0".into()));
        }
        Ok(cfg)
    }

    fn frame_range(&self) -> Result<Option<std::ops::Range<usize>>> {
        self.frames.as_deref().map(parse_frame_range).transpose()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic benchmark dataset
    Synth {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        places: usize,
        #[arg(long, default_value_t = 3)]
        scenarios: usize,
        /// Disparity channel content: 'clean' or 'noise'
        #[arg(long, default_value = "noise")]
        profile: String,
        /// Also emit reversed traversals with mirrored frames
        #[arg(long)]
        flip: bool,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
    /// Validate a dataset manifest by fully ingesting it
    Ingest {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        manifest: PathBuf,
        /// Exit nonzero on any ingestion problem (full decode + pairing)
        #[arg(long)]
        check: bool,
    },
    /// Train modality weights on one run per scenario
    Train {
        #[command(flatten)]
        shared: Shared,
        /// One manifest per training scenario (repeat the flag)
        #[arg(long, required = true, num_args = 1..)]
        manifest: Vec<PathBuf>,
        /// External feature files (one per modality and sensor)
        #[arg(long)]
        external: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score queries against templates with a trained model
    Match {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        external: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute a PR curve from persisted score and ground-truth matrices
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the modality-importance report of a trained model
    Report {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { shared, out, places, scenarios, profile, flip, width, height } => {
            let cfg = shared.build_config()?;
            let opts = SynthOptions {
                seed: cfg.seed,
                places,
                scenarios,
                profile: DisparityProfile::parse(&profile)?,
                flip,
                width,
                height,
            };
            let manifests = commands::cmd_synth(&opts, &out)?;
            for m in manifests {
                println!("{}", m.display());
            }
        }
        Command::Ingest { shared, manifest, check: _ } => {
            let cfg = shared.build_config()?;
            let report = commands::cmd_ingest(&manifest, shared.frame_range()?, &cfg)?;
            println!(
                "ok: {} pairs at {}x{}, {} gps samples, {} dropped outside gps span, {} excluded by range",
                report.summary.pairs,
                report.width,
                report.height,
                report.gps_samples,
                report.summary.dropped_outside_gps,
                report.summary.excluded_by_range
            );
        }
        Command::Train { shared, manifest, external, out } => {
            let cfg = shared.build_config()?;
            let outcome =
                commands::cmd_train(&manifest, &external, shared.frame_range()?, &cfg, &out)?;
            println!(
                "model written to {} (iterations {}, converged {}, objective {})",
                outcome.model_path.display(),
                outcome.model.iterations,
                outcome.model.converged,
                outcome.model.final_objective
            );
        }
        Command::Match { shared, model, templates, queries, external, out } => {
            let cfg = shared.build_config()?;
            let outcome = commands::cmd_match(
                &model,
                &templates,
                &queries,
                &external,
                shared.frame_range()?,
                cfg.threshold,
                cfg.radius_m,
                &out,
            )?;
            println!(
                "weighted auc {} baseline auc {} top1 recall {}",
                outcome.weighted.auc, outcome.baseline.auc, outcome.top1_recall
            );
        }
        Command::Eval { shared: _, scores, gt, out } => {
            let curve = commands::cmd_eval(&scores, &gt, &out)?;
            println!("auc {}", curve.auc);
        }
        Command::Report { shared: _, model, out } => {
            let report = commands::cmd_report(&model, out.as_deref())?;
            for share in report {
                println!("{} {:.4}%", share.name, share.percent);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

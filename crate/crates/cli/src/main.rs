use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use capev::eval::{render_report, report_text};
use capev::neural::Optimizer;
use capev::pipeline::{
    audit_run, augment_manifest, build_dataset, evaluate_artifacts, generate_synthetic_dataset,
    parse_pairs, rebuild_report, run_experiment, train_artifacts, write_failures_csv,
    write_features_csv, DatasetManifest, Family, GridChoice, PipelineError, RunConfig, SynthConfig,
};

/// Voice quality assessment: acoustic features, noise augmentation and
/// per-attribute score regression.
#[derive(Parser)]
#[command(name = "capev", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract acoustic features for every manifest row.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for features.csv and failures.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8000)]
        working_rate: u32,
    },
    /// Write 14 noise-augmented copies of every manifest clip.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        /// Signal and noise weights, `a,b;c,d`.
        #[arg(long, default_value = "0.9,0.1;0.7,0.3")]
        pairs: String,
        /// Directory holding babble1.wav and babble2.wav.
        #[arg(long)]
        noise_dir: PathBuf,
        /// Output directory; defaults to `augmented/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8000)]
        working_rate: u32,
        /// Also write built-in log-spectral embeddings.
        #[arg(long)]
        embed: bool,
    },
    /// Fit one model per attribute on all rows and save them.
    Train(TrainArgs),
    /// Score saved models against a features table or manifest.
    Evaluate {
        /// Artifact file, models directory or run directory.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Manifest with embeddings, for neural models.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Also write the report files here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a run's report files and re-check its id audit.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Run the end-to-end experiment described by a config file.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `repeats`.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Generate the synthetic demonstration dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16000)]
        rate: u32,
        /// Also write built-in log-spectral embeddings.
        #[arg(long)]
        embeddings: bool,
        /// Also write babble recordings under noise/.
        #[arg(long)]
        babble: bool,
    },
}

#[derive(Args)]
struct TrainArgs {
    /// Features table (classical families).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Manifest (required for mlp and conv).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, default_value = "rf")]
    family: String,
    /// `none`, `default` or `name=v1,v2;name=...`.
    #[arg(long, default_value = "none")]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, default_value = "models")]
    out: PathBuf,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// `adam` or `momentum`.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Augmented manifest whose rows carry source_id (neural only).
    #[arg(long)]
    augmented_manifest: Option<PathBuf>,
}

fn train_config(a: TrainArgs) -> Result<RunConfig, PipelineError> {
    let family = Family::parse(&a.family)
        .ok_or_else(|| PipelineError::ConfigInvalid(format!("unknown family {:?}", a.family)))?;
    let mut c = RunConfig::new(a.out, family);
    c.features = a.features;
    c.manifest = a.manifest;
    c.augmented_manifest = a.augmented_manifest;
    c.grid = GridChoice::parse(&a.grid)?;
    c.seed = a.seed;
    c.cv_folds = a.cv_folds;
    c.train.epochs = a.epochs;
    c.train.batch_size = a.batch_size;
    c.train.learning_rate = a.learning_rate;
    c.train.optimizer = match a.optimizer.as_str() {
        "adam" => Optimizer::Adam,
        "momentum" => Optimizer::Momentum,
        other => {
            return Err(PipelineError::ConfigInvalid(format!(
                "unknown optimizer {other:?}"
            )))
        }
    };
    c.refresh_digest();
    c.validate()?;
    Ok(c)
}

fn load_manifest(p: &Path) -> Result<DatasetManifest, PipelineError> {
    if !p.is_file() {
        return Err(PipelineError::ManifestInvalid(format!(
            "{} does not exist",
            p.display()
        )));
    }
    DatasetManifest::load(p)
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Extract {
            manifest,
            out,
            working_rate,
        } => {
            let m = load_manifest(&manifest)?;
            let built = build_dataset(&m, working_rate)?;
            std::fs::create_dir_all(&out)?;
            write_features_csv(&built.rows, &out.join("features.csv"))?;
            write_failures_csv(&built.failures, &out.join("failures.csv"))?;
            println!(
                "extracted {} rows, {} failed, common length {} samples",
                built.rows.len(),
                built.failures.len(),
                built.target_len
            );
            for f in &built.failures {
                eprintln!("failed {}: {}", f.id, f.reason);
            }
        }
        Command::Augment {
            manifest,
            pairs,
            noise_dir,
            out,
            seed,
            working_rate,
            embed,
        } => {
            let pairs = parse_pairs(&pairs)?;
            if pairs.len() != 2 {
                return Err(PipelineError::ConfigInvalid(format!(
                    "expected 2 weight pairs, got {}",
                    pairs.len()
                )));
            }
            if !noise_dir.is_dir() {
                return Err(PipelineError::ConfigInvalid(format!(
                    "{} is not a directory",
                    noise_dir.display()
                )));
            }
            let m = load_manifest(&manifest)?;
            let out = out.unwrap_or_else(|| {
                manifest
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join("augmented")
            });
            let path =
                augment_manifest(&m.rows, &pairs, &noise_dir, &out, seed, working_rate, embed)?;
            println!(
                "wrote {} augmented rows to {}",
                m.rows.len() * 14,
                path.display()
            );
        }
        Command::Train(args) => {
            let c = train_config(args)?;
            let artifacts = train_artifacts(&c)?;
            for a in &artifacts {
                let selected = if a.selected.is_empty() {
                    String::new()
                } else {
                    format!(" ({})", a.selected.join(" "))
                };
                println!(
                    "{} {} on {} rows{selected}",
                    a.family,
                    a.attribute,
                    a.train_ids.len()
                );
            }
            println!(
                "models written to {}",
                c.output_dir.join("models").display()
            );
        }
        Command::Evaluate {
            model,
            features,
            manifest,
            out,
        } => {
            let report = evaluate_artifacts(&model, features.as_deref(), manifest.as_deref())?;
            print!("{}", report_text(&report));
            if let Some(out) = out {
                render_report(&report, &out)?;
            }
        }
        Command::Report { run } => {
            let report = rebuild_report(&run)?;
            print!("{}", report_text(&report));
            let audit = audit_run(&run)?;
            println!(
                "audit: {} fitting steps, {} fitted ids, {} test ids, no overlap",
                audit.steps, audit.fitted_ids, audit.test_ids
            );
        }
        Command::Experiment { config, repeats } => {
            let mut c = RunConfig::load(&config)?;
            if let Some(r) = repeats {
                c.repeats = r;
                c.refresh_digest();
            }
            let outcome = run_experiment(&c)?;
            if let [report] = outcome.reports.as_slice() {
                print!("{}", report_text(report));
            } else {
                print!(
                    "{}",
                    std::fs::read_to_string(outcome.output_dir.join("summary.txt"))?
                );
            }
            println!("results in {}", outcome.output_dir.display());
        }
        Command::Synth {
            out,
            n,
            seed,
            rate,
            embeddings,
            babble,
        } => {
            let config = SynthConfig {
                n_clips: n,
                sample_rate: rate,
                seed,
                embeddings,
                babble,
            };
            let p = generate_synthetic_dataset(&out, &config)?;
            println!("wrote {n} clips, manifest {}", p.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

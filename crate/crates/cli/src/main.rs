//! facephq: EMA-survey + facial-feature depression screening experiments.
//!
//! Every subcommand reads one declarative TOML config (flags override file
//! values), writes its artifacts plus a reproducibility manifest under the
//! output directory, and prints a JSON summary on stdout.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use facephq::registry::FeatureSet;

use commands::{CliError, CliResult};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "facephq",
    version,
    about = "Depression screening experiments over EMA surveys and facial features",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    flags: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    /// Run configuration file (TOML); omitted sections use the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override; applies to both the split plan and the generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 or omitted = machine parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Attention-item discrepancy tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Depression label threshold on session totals.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Feature spec: all | baseline | mi | a registry group key.
    #[arg(long = "feature-set", global = true)]
    feature_set: Option<String>,
    /// MI scoring mode: independence | relevance.
    #[arg(long = "mi-mode", global = true)]
    mi_mode: Option<String>,
    /// Fraction of features MI selection keeps.
    #[arg(long = "mi-fraction", global = true)]
    mi_fraction: Option<f64>,
    /// Model family: random_forest | logistic | elastic_net.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Outer cross-validation folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Fail on any malformed row instead of skipping it.
    #[arg(long, global = true)]
    strict: bool,
    /// EMA survey CSV.
    #[arg(long, global = true)]
    ema: Option<PathBuf>,
    /// Facial-feature CSV.
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Demographics CSV.
    #[arg(long, global = true)]
    demographics: Option<PathBuf>,
    /// Annotation CSV.
    #[arg(long, global = true)]
    annotations: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter, and join the input files into the analysis dataset.
    Ingest,
    /// Check the inputs against the schema and join invariants.
    Validate,
    /// Run the subject-disjoint cross-validated experiment.
    Experiment,
    /// Compare feature groups under the random-forest pipeline.
    Ablate,
    /// TreeSHAP attributions for one fold's fitted forest.
    Explain {
        /// Fold whose held-out rows are explained.
        #[arg(long)]
        fold: Option<usize>,
        /// Task to explain: classify | regress.
        #[arg(long)]
        task: Option<String>,
        /// Cap on explained rows (deterministic subsample above it).
        #[arg(long = "max-samples")]
        max_samples: Option<usize>,
        /// Ranked features kept in the importance report.
        #[arg(long = "top-k")]
        top_k: Option<usize>,
    },
    /// Score demographic subgroups separately on the held-out folds.
    Bias {
        /// Subgroup axis: gender | race.
        #[arg(long)]
        axis: Option<String>,
    },
    /// Label distributions and rater agreement for an annotation file.
    Annotations,
    /// Generate a synthetic cohort with ground truth and oracle metrics.
    Synth {
        /// Participant count.
        #[arg(long)]
        participants: Option<usize>,
        /// Latent-to-feature gain on carrier columns; 0 severs the link.
        #[arg(long = "signal-strength")]
        signal_strength: Option<f64>,
        /// Feature group that carries the signal.
        #[arg(long)]
        carrier: Option<String>,
        /// Mean surveys per participant.
        #[arg(long = "sessions-mean")]
        sessions_mean: Option<f64>,
    },
    /// Render existing artifacts into one report and print the defaults.
    Report,
}

fn apply_flags(cfg: &mut RunConfig, cli: &Cli) -> CliResult<()> {
    let f = &cli.flags;
    if let Some(v) = &f.out {
        cfg.output.dir = v.clone();
    }
    if let Some(v) = f.seed {
        cfg.split.seed = v;
        cfg.synth.seed = v;
    }
    if let Some(v) = f.tolerance {
        cfg.ingest.tolerance = v;
    }
    if let Some(v) = f.threshold {
        cfg.ingest.threshold = v;
    }
    if f.strict {
        cfg.ingest.strict = true;
    }
    if let Some(v) = &f.feature_set {
        cfg.features.set = v.clone();
    }
    if let Some(v) = &f.mi_mode {
        cfg.features.mi_mode = v.clone();
    }
    if let Some(v) = f.mi_fraction {
        cfg.features.mi_fraction = v;
    }
    if let Some(v) = &f.model {
        cfg.model.kind = v.clone();
    }
    if let Some(v) = f.folds {
        cfg.split.folds = v;
    }
    if let Some(v) = &f.ema {
        cfg.inputs.ema = Some(v.clone());
    }
    if let Some(v) = &f.features {
        cfg.inputs.features = Some(v.clone());
    }
    if let Some(v) = &f.demographics {
        cfg.inputs.demographics = Some(v.clone());
    }
    if let Some(v) = &f.annotations {
        cfg.inputs.annotations = Some(v.clone());
    }

    match &cli.command {
        Command::Explain {
            fold,
            task,
            max_samples,
            top_k,
        } => {
            if let Some(v) = fold {
                cfg.explain.fold = *v;
            }
            if let Some(v) = task {
                cfg.explain.task = v.clone();
            }
            if let Some(v) = max_samples {
                cfg.explain.max_samples = *v;
            }
            if let Some(v) = top_k {
                cfg.explain.top_k = *v;
            }
        }
        Command::Bias { axis } => {
            if let Some(v) = axis {
                cfg.bias.axis = v.clone();
            }
        }
        Command::Synth {
            participants,
            signal_strength,
            carrier,
            sessions_mean,
        } => {
            if let Some(v) = participants {
                cfg.synth.n_participants = *v;
            }
            if let Some(v) = signal_strength {
                cfg.synth.signal_strength = *v;
            }
            if let Some(v) = carrier {
                cfg.synth.signal_carrier =
                    FeatureSet::parse(v).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            if let Some(v) = sessions_mean {
                cfg.synth.sessions_mean = *v;
            }
        }
        _ => {}
    }
    Ok(())
}

fn run(cli: &Cli) -> CliResult<Value> {
    let mut cfg =
        RunConfig::load(cli.flags.config.as_deref()).map_err(|e| CliError::Usage(e.to_string()))?;
    apply_flags(&mut cfg, cli)?;

    if let Some(threads) = cli.flags.threads {
        if threads > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
        }
    }

    match &cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Validate => commands::validate(&cfg),
        Command::Experiment => commands::experiment(&cfg),
        Command::Ablate => commands::ablate(&cfg),
        Command::Explain { .. } => commands::explain(&cfg),
        Command::Bias { .. } => commands::bias(&cfg),
        Command::Annotations => commands::annotations(&cfg),
        Command::Synth { .. } => commands::synth(&cfg),
        Command::Report => commands::report(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too and should exit 0; genuine
            // usage mistakes exit 1.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

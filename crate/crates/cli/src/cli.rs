use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ovaug::{ModelMode, Technique};

use crate::commands::{augment, estimate, mix, reconstruct, spatialize, validate};
use crate::config::{FieldSelection, PipelineConfig};
use crate::{EXIT_IO, EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(
    name = "ovaug",
    version,
    about = "Own-voice data augmentation pipeline"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Number of talkers to draw for estimation.
    #[arg(long, global = true)]
    pub subset_talkers: Option<usize>,
    /// Number of utterances per talker to draw for estimation.
    #[arg(long, global = true)]
    pub subset_utterances: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate RTF models from recorded outer/in-ear pairs.
    Estimate {
        /// `recorded-pairs` manifest.
        #[arg(long)]
        pairs: PathBuf,
        /// Phoneme inventory; overrides the configuration.
        #[arg(long)]
        inventory: Option<PathBuf>,
        /// Model type; overrides the configuration.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Output directory for model files and models.jsonl.
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate in-ear own voice for a speech corpus.
    Augment {
        /// `speech-corpus` manifest.
        #[arg(long)]
        speech: PathBuf,
        /// Model file (OVRTF).
        #[arg(long)]
        model: PathBuf,
        /// Augmentation technique; overrides the configuration.
        #[arg(long, value_enum)]
        technique: Option<TechniqueArg>,
        /// RTF smoothing constant in [0, 1); overrides the configuration.
        #[arg(long)]
        alpha: Option<f64>,
        /// Output directory (audio/ and manifest.jsonl).
        #[arg(long)]
        out: PathBuf,
    },
    /// Spatialize single-channel noise with measured impulse responses.
    Spatialize {
        /// `noise` manifest of single-channel noise files.
        #[arg(long)]
        noise: PathBuf,
        /// `hrir` manifest of impulse-response sets.
        #[arg(long)]
        hrir: PathBuf,
        /// Output directory (audio/ and manifest.jsonl).
        #[arg(long)]
        out: PathBuf,
    },
    /// Mix own voice with spatialized noise into training examples.
    Mix {
        /// `recorded-pairs` manifest of own-voice pairs.
        #[arg(long)]
        own: PathBuf,
        /// `noise` manifest of single-channel noise files.
        #[arg(long)]
        noise: PathBuf,
        /// `hrir` manifest of impulse-response sets.
        #[arg(long)]
        hrir: PathBuf,
        /// Output directory (audio/ and manifest.jsonl).
        #[arg(long)]
        out: PathBuf,
        /// Use this sound field for every example.
        #[arg(long, value_enum)]
        force_mode: Option<FieldArg>,
        /// Direction index for point sources.
        #[arg(long)]
        force_direction: Option<usize>,
        /// Outer-microphone SNR in dB for every example.
        #[arg(long, allow_negative_numbers = true)]
        force_snr: Option<f64>,
    },
    /// Apply complex masks to a noisy pair.
    Reconstruct {
        /// Noisy outer-microphone WAV.
        #[arg(long)]
        outer: PathBuf,
        /// Noisy in-ear WAV.
        #[arg(long)]
        inear: PathBuf,
        /// Mask file (OVMSK).
        #[arg(long)]
        mask: PathBuf,
        /// Output WAV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check manifests, model, mask and config files; prints a JSON report.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    SpeechIndependent,
    SpeechDependent,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TechniqueArg {
    SpeechIndependent,
    SpeechDependent,
    RandomPhoneme,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FieldArg {
    Point,
    Diffuse,
    Random,
}

fn load_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if g.subset_talkers.is_some() {
        cfg.subset.talkers = g.subset_talkers;
    }
    if g.subset_utterances.is_some() {
        cfg.subset.utterances = g.subset_utterances;
    }
    Ok(cfg)
}

/// Runs one invocation and returns its exit status. Reports go to stdout,
/// errors to stderr.
pub fn run(cli: Cli) -> i32 {
    if let Command::Validate { files } = &cli.command {
        let report = validate::run(files);
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
        return if report.ok { EXIT_OK } else { EXIT_VALIDATION };
    }
    match dispatch(cli) {
        Ok(msg) => {
            println!("{msg}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<String> {
    let mut cfg = load_config(&cli.global)?;
    let jobs = cli.global.jobs;
    match cli.command {
        Command::Estimate {
            pairs,
            inventory,
            mode,
            out,
        } => {
            if inventory.is_some() {
                cfg.estimate.inventory = inventory;
            }
            if let Some(m) = mode {
                cfg.estimate.mode = match m {
                    ModeArg::SpeechIndependent => ModelMode::SpeechIndependent,
                    ModeArg::SpeechDependent => ModelMode::SpeechDependent,
                };
            }
            cfg.validate()?;
            let s = estimate::run(&cfg, jobs, &estimate::EstimateArgs { pairs, out })?;
            Ok(format!(
                "estimated {} model(s) from {} utterances of {} talker(s)",
                s.models.len(),
                s.utterances,
                s.talkers.len()
            ))
        }
        Command::Augment {
            speech,
            model,
            technique,
            alpha,
            out,
        } => {
            if let Some(t) = technique {
                cfg.augment.technique = match t {
                    TechniqueArg::SpeechIndependent => Technique::SpeechIndependent,
                    TechniqueArg::SpeechDependent => Technique::SpeechDependent,
                    TechniqueArg::RandomPhoneme => Technique::RandomPhoneme,
                };
            }
            if let Some(a) = alpha {
                cfg.augment.alpha = a;
            }
            cfg.validate()?;
            let n = augment::run(&cfg, jobs, &augment::AugmentArgs { speech, model, out })?;
            Ok(format!("augmented {n} utterances"))
        }
        Command::Spatialize { noise, hrir, out } => {
            cfg.validate()?;
            let n = spatialize::run(&cfg, jobs, &spatialize::SpatializeArgs { noise, hrir, out })?;
            Ok(format!("spatialized {n} noise signals"))
        }
        Command::Mix {
            own,
            noise,
            hrir,
            out,
            force_mode,
            force_direction,
            force_snr,
        } => {
            cfg.validate()?;
            let force = mix::Forcing {
                mode: force_mode.map(|m| match m {
                    FieldArg::Point => FieldSelection::Point,
                    FieldArg::Diffuse => FieldSelection::Diffuse,
                    FieldArg::Random => FieldSelection::Random,
                }),
                direction: force_direction,
                snr_db: force_snr,
            };
            let n = mix::run(
                &cfg,
                jobs,
                &mix::MixArgs {
                    own,
                    noise,
                    hrir,
                    out,
                    force,
                },
            )?;
            Ok(format!("mixed {n} examples"))
        }
        Command::Reconstruct {
            outer,
            inear,
            mask,
            out,
        } => {
            reconstruct::run(
                &cfg,
                &reconstruct::ReconstructArgs {
                    outer,
                    inear,
                    mask,
                    out,
                },
            )
            .context("reconstruction")?;
            Ok("reconstructed 1 signal".into())
        }
        Command::Validate { .. } => unreachable!("handled in run"),
    }
}

/// `EXIT_IO` when an I/O failure is anywhere in the error chain,
/// `EXIT_VALIDATION` otherwise.
pub fn exit_code(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(ovaug::Error::Io(_)) = cause.downcast_ref::<ovaug::Error>() {
            return EXIT_IO;
        }
        if let Some(hound::Error::IoError(_)) = cause.downcast_ref::<hound::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

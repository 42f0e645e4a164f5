//! Simulated in-ear own voice for a speech corpus.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ovaug::format::load_model;
use ovaug::phoneme::load_alignment;
use ovaug::{AugmentConfig, Augmentor, RtfModel64, Technique};
use serde_json::json;

use super::{absolute, read_at_rate, run_parallel};
use crate::audio;
use crate::config::PipelineConfig;
use crate::manifest::{check_unique_stems, file_stem, Entry, Manifest, Role};
use crate::seeds::derive_seed;

#[derive(Debug, Clone)]
pub struct AugmentArgs {
    pub speech: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
}

fn augment_one(
    manifest: &Manifest,
    entry: &Entry,
    aug: &Augmentor<'_, f64>,
    cfg: &PipelineConfig,
    model_path: &str,
    out: &std::path::Path,
) -> Result<Entry> {
    let source = manifest.resolve(entry.audio.as_deref().context("missing audio")?);
    let speech = read_at_rate(&source, cfg.pipeline_rate())?;
    let technique = aug.config().technique;
    let alignment = entry.alignment.as_ref().map(|a| manifest.resolve(a));
    let phonemes = match (technique, &alignment) {
        (Technique::SpeechDependent, Some(path)) => {
            let model = aug.model();
            let inv = model
                .inventory()
                .context("model has no phoneme inventory")?
                .clone();
            Some(
                load_alignment(path, inv, *model.spec(), aug.model_signal_len(speech.len()))
                    .with_context(|| format!("alignment {}", path.display()))?,
            )
        }
        (Technique::SpeechDependent, None) => {
            bail!("speech-dependent augmentation needs an alignment")
        }
        _ => None,
    };
    let seed = derive_seed(cfg.seed, "augment", &entry.id);
    let simulated = aug.augment_seeded(&speech, phonemes.as_ref(), seed)?;
    let rel = PathBuf::from("audio").join(format!("{}.wav", file_stem(&entry.id)));
    audio::write(&out.join(&rel), &[&simulated], cfg.output.sample_format)?;

    let mut e = Entry::new(&entry.id);
    e.talker = entry.talker.clone();
    e.outer = Some(absolute(&source));
    e.inear = Some(rel);
    e.alignment = alignment.as_deref().map(absolute);
    e.duration = Some(speech.duration_secs());
    e.meta = Some(json!({
        "source": entry.id,
        "model": model_path,
        "technique": technique,
        "alpha": aug.config().alpha,
        "seed": seed,
    }));
    Ok(e)
}

pub fn run(cfg: &PipelineConfig, jobs: usize, args: &AugmentArgs) -> Result<usize> {
    let manifest = Manifest::load_as(&args.speech, Role::SpeechCorpus)?;
    let model: RtfModel64 =
        load_model(&args.model).with_context(|| format!("model {}", args.model.display()))?;
    let aug_cfg = AugmentConfig::new(cfg.augment.technique).with_alpha(cfg.augment.alpha);
    let aug = Augmentor::new(&model, aug_cfg, cfg.pipeline_rate())?;
    let entries = manifest.sorted_entries();
    check_unique_stems(entries.iter().map(|e| e.id.as_str()))?;
    let model_path = absolute(&args.model).display().to_string();

    let out_entries = run_parallel(jobs, &entries, |e| {
        augment_one(&manifest, e, &aug, cfg, &model_path, &args.out)
            .with_context(|| format!("utterance {:?}", e.id))
    })?;
    let n = out_entries.len();
    Manifest::new(Role::RecordedPairs, out_entries, &args.out)
        .write(&args.out.join("manifest.jsonl"))?;
    Ok(n)
}

//! Model estimation from recorded outer/in-ear pairs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use ovaug::format::save_model;
use ovaug::phoneme::load_alignment;
use ovaug::{resample, FrameSpec, ModelMode, PhonemeInventory, RtfAccumulator64, WolaEngine};
use serde_json::json;

use super::{read_pair, run_parallel};
use crate::config::{PipelineConfig, ScopeSelection};
use crate::manifest::{check_unique_stems, file_stem, Entry, Manifest, Role};
use crate::subset;

#[derive(Debug, Clone)]
pub struct EstimateArgs {
    pub pairs: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub utterances: usize,
    pub talkers: Vec<String>,
    pub models: Vec<PathBuf>,
}

fn accumulate_one(
    manifest: &Manifest,
    entry: &Entry,
    cfg: &PipelineConfig,
    inventory: Option<&Arc<PhonemeInventory>>,
) -> Result<RtfAccumulator64> {
    let spec = FrameSpec::model();
    let outer = manifest.resolve(entry.outer.as_deref().context("missing outer")?);
    let inear = manifest.resolve(entry.inear.as_deref().context("missing inear")?);
    let (o, i) = read_pair(&outer, &inear, cfg.pipeline_rate())?;
    let o = resample(&o, spec.sample_rate())?;
    let i = resample(&i, spec.sample_rate())?;
    let engine = WolaEngine::new(spec);
    let (so, si) = (engine.analyze(&o)?, engine.analyze(&i)?);
    let mut acc = match inventory {
        None => RtfAccumulator64::speech_independent(spec)?,
        Some(inv) => RtfAccumulator64::speech_dependent(spec, inv.clone())?,
    }
    .for_talker(entry.talker_or_id());
    let phonemes = match inventory {
        None => None,
        Some(inv) => {
            let Some(a) = &entry.alignment else {
                bail!(
                    "entry {:?}: speech-dependent estimation needs an alignment",
                    entry.id
                );
            };
            let path = manifest.resolve(a);
            Some(
                load_alignment(&path, inv.clone(), spec, o.len())
                    .with_context(|| format!("alignment {}", path.display()))?,
            )
        }
    };
    acc.accumulate(&so, &si, phonemes.as_ref())?;
    Ok(acc)
}

fn model_entry(
    id: &str,
    talker: Option<&str>,
    rel: &Path,
    acc: &RtfAccumulator64,
    sources: &[&str],
) -> Entry {
    let mut e = Entry::new(id);
    e.talker = talker.map(str::to_string);
    e.model = Some(rel.to_path_buf());
    e.meta = Some(json!({
        "mode": acc.mode(),
        "talkers": acc.talkers(),
        "utterances": acc.utterances(),
        "frame_counts": acc.frame_counts(),
        "sources": sources,
    }));
    e
}

pub fn run(cfg: &PipelineConfig, jobs: usize, args: &EstimateArgs) -> Result<EstimateSummary> {
    let manifest = Manifest::load_as(&args.pairs, Role::RecordedPairs)?;
    let inventory = match cfg.estimate.mode {
        ModelMode::SpeechIndependent => None,
        ModelMode::SpeechDependent => {
            let path =
                cfg.estimate.inventory.as_deref().context(
                    "speech-dependent estimation needs estimate.inventory (or --inventory)",
                )?;
            Some(Arc::new(
                PhonemeInventory::load(path)
                    .with_context(|| format!("inventory {}", path.display()))?,
            ))
        }
    };
    let selected = subset::select(
        &manifest.sorted_entries(),
        cfg.subset.talkers,
        cfg.subset.utterances,
        cfg.seed,
    )?;
    if selected.is_empty() {
        bail!("empty subset: nothing to estimate from");
    }

    let accs = run_parallel(jobs, &selected, |e| {
        accumulate_one(&manifest, e, cfg, inventory.as_ref())
            .with_context(|| format!("utterance {:?}", e.id))
    })?;

    // Reduce in utterance-id order within each talker.
    let mut by_talker: BTreeMap<String, Vec<(&str, &RtfAccumulator64)>> = BTreeMap::new();
    for (e, acc) in selected.iter().zip(&accs) {
        by_talker
            .entry(e.talker_or_id().to_string())
            .or_default()
            .push((&e.id, acc));
    }
    let per_talker: Vec<(String, Vec<&str>, RtfAccumulator64)> = by_talker
        .into_iter()
        .map(|(t, v)| {
            let acc = RtfAccumulator64::merge(v.iter().map(|(_, a)| *a))?;
            Ok((t, v.into_iter().map(|(id, _)| id).collect(), acc))
        })
        .collect::<Result<_>>()?;
    check_unique_stems(per_talker.iter().map(|(t, _, _)| t.as_str()))?;

    let mut entries = Vec::new();
    let mut models = Vec::new();
    let finalize = |acc: &RtfAccumulator64| {
        acc.finalize(
            cfg.estimate.min_frames,
            acc.default_eps(cfg.estimate.min_frames),
        )
    };
    if matches!(
        cfg.estimate.scope,
        ScopeSelection::Individual | ScopeSelection::Both
    ) {
        for (talker, sources, acc) in &per_talker {
            let rel = PathBuf::from("individual").join(format!("{}.ovrtf", file_stem(talker)));
            let path = args.out.join(&rel);
            std::fs::create_dir_all(path.parent().unwrap_or(&args.out))?;
            let model = finalize(acc).with_context(|| format!("talker {talker:?}"))?;
            save_model(&model, &path)?;
            entries.push(model_entry(talker, Some(talker), &rel, acc, sources));
            models.push(path);
        }
    }
    if matches!(
        cfg.estimate.scope,
        ScopeSelection::TalkerAveraged | ScopeSelection::Both
    ) {
        let pooled = RtfAccumulator64::merge(per_talker.iter().map(|(_, _, a)| a))?;
        let sources: Vec<&str> = per_talker
            .iter()
            .flat_map(|(_, s, _)| s.iter().copied())
            .collect();
        let rel = PathBuf::from("talker-averaged.ovrtf");
        let path = args.out.join(&rel);
        std::fs::create_dir_all(&args.out)?;
        save_model(&finalize(&pooled)?, &path)?;
        entries.push(model_entry(
            "talker-averaged",
            None,
            &rel,
            &pooled,
            &sources,
        ));
        models.push(path);
    }
    Manifest::new(Role::Models, entries, &args.out).write(&args.out.join("models.jsonl"))?;
    Ok(EstimateSummary {
        utterances: selected.len(),
        talkers: per_talker.into_iter().map(|(t, _, _)| t).collect(),
        models,
    })
}

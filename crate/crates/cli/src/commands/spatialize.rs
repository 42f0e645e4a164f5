//! Two-microphone noise for every (impulse-response set, noise file) pair.

use std::path::PathBuf;

use anyhow::{Context, Result};
use ovaug::spatial::SpatializeConfig;
use ovaug::{spatialize, HrirSet64};
use serde_json::json;

use super::{read_at_rate, run_parallel};
use crate::audio;
use crate::config::PipelineConfig;
use crate::hrir;
use crate::manifest::{check_unique_stems, file_stem, Entry, Manifest, Role};
use crate::seeds::derive_seed;

#[derive(Debug, Clone)]
pub struct SpatializeArgs {
    pub noise: PathBuf,
    pub hrir: PathBuf,
    pub out: PathBuf,
}

pub fn run(cfg: &PipelineConfig, jobs: usize, args: &SpatializeArgs) -> Result<usize> {
    let noise = Manifest::load_as(&args.noise, Role::Noise)?;
    let hrir_manifest = Manifest::load_as(&args.hrir, Role::Hrir)?;
    let sets = hrir::load_all(&hrir_manifest)?;
    let items: Vec<(&HrirSet64, &Entry)> = sets
        .iter()
        .flat_map(|s| noise.sorted_entries().into_iter().map(move |e| (s, e)))
        .collect();
    let ids: Vec<String> = items
        .iter()
        .map(|(s, e)| format!("{}/{}", s.id(), e.id))
        .collect();
    check_unique_stems(ids.iter().map(String::as_str))?;

    let indexed: Vec<(usize, &(&HrirSet64, &Entry))> = items.iter().enumerate().collect();
    let entries = run_parallel(jobs, &indexed, |&(i, &(set, entry))| {
        let id = &ids[i];
        let path = noise.resolve(entry.audio.as_deref().context("missing audio")?);
        let x = read_at_rate(&path, cfg.pipeline_rate())?;
        let seed = derive_seed(cfg.seed, "spatialize", id);
        let sc = SpatializeConfig {
            mode: cfg.spatialize.field_mode(),
            direction: cfg.spatialize.direction,
            floor: cfg.spatialize.floor(),
            seed,
        };
        let s = spatialize(&x, set, &sc).with_context(|| format!("noise {id:?}"))?;
        let stem = file_stem(id);
        let outer = PathBuf::from("audio").join(format!("{stem}_outer.wav"));
        let inear = PathBuf::from("audio").join(format!("{stem}_inear.wav"));
        audio::write(
            &args.out.join(&outer),
            &[&s.outer],
            cfg.output.sample_format,
        )?;
        audio::write(
            &args.out.join(&inear),
            &[&s.inear],
            cfg.output.sample_format,
        )?;
        let mut e = Entry::new(id.clone());
        e.talker = Some(set.id().to_string());
        e.outer = Some(outer);
        e.inear = Some(inear);
        e.duration = Some(x.duration_secs());
        e.meta = Some(json!({
            "noise": entry.id,
            "hrir_set": set.id(),
            "seed": seed,
            "field": s.field,
            "floor_db": s.floor_db,
        }));
        Ok(e)
    })?;
    let n = entries.len();
    Manifest::new(Role::NoisePairs, entries, &args.out).write(&args.out.join("manifest.jsonl"))?;
    Ok(n)
}

//! Training examples: own voice + spatialized noise at a drawn SNR.
//!
//! Per example, from one seeded stream: the noise file, the noise segment
//! offset, the spatialization seed and the SNR. The own-voice pair is cut to
//! the first segment (zero-padded when shorter), the same length of noise is
//! spatialized with the talker's impulse responses, the two are mixed at the
//! outer microphone SNR, and the result is normalized.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use ovaug::mixer::{mix_at_snr, normalize};
use ovaug::spatial::{FieldMode, SpatializeConfig};
use ovaug::{spatialize, HrirSet64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{read_pair, run_parallel};
use crate::audio;
use crate::config::{FieldSelection, PipelineConfig};
use crate::hrir;
use crate::manifest::{check_unique_stems, file_stem, Entry, Manifest, Role};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, Default)]
pub struct Forcing {
    pub mode: Option<FieldSelection>,
    pub direction: Option<usize>,
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MixArgs {
    pub own: PathBuf,
    pub noise: PathBuf,
    pub hrir: PathBuf,
    pub out: PathBuf,
    pub force: Forcing,
}

struct NoiseFile {
    id: String,
    path: PathBuf,
    len: usize,
}

#[allow(clippy::too_many_arguments)]
fn mix_one(
    own: &Manifest,
    entry: &Entry,
    noises: &[NoiseFile],
    sets: &[HrirSet64],
    cfg: &PipelineConfig,
    force: &Forcing,
    seg_len: usize,
    out: &std::path::Path,
) -> Result<Entry> {
    let rate = cfg.pipeline_rate();
    let seed = derive_seed(cfg.seed, "mix", &entry.id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let outer_path = own.resolve(entry.outer.as_deref().context("missing outer")?);
    let inear_path = own.resolve(entry.inear.as_deref().context("missing inear")?);
    let (o, i) = read_pair(&outer_path, &inear_path, rate)?;
    let source_len = o.len();
    let (o, i) = (o.fit_to_len(seg_len), i.fit_to_len(seg_len));

    let noise = &noises[rng.random_range(0..noises.len())];
    if noise.len < seg_len {
        bail!(
            "insufficient noise duration: {:?} has {} samples, segments need {seg_len}",
            noise.id,
            noise.len
        );
    }
    let offset = rng.random_range(0..=noise.len - seg_len);
    let n = audio::read_mono_segment(&noise.path, offset, seg_len)?;
    if n.sample_rate() != rate {
        bail!(
            "noise {:?} is at {} Hz, the pipeline runs at {rate} Hz",
            noise.id,
            n.sample_rate()
        );
    }

    let set = hrir::for_talker(sets, entry.talker_or_id())?;
    let mode = match force.mode {
        Some(FieldSelection::Point) => FieldMode::Point,
        Some(FieldSelection::Diffuse) => FieldMode::Diffuse,
        Some(FieldSelection::Random) | None => cfg.spatialize.field_mode(),
    };
    let direction = force.direction.or(cfg.spatialize.direction);
    let sp_cfg = SpatializeConfig {
        mode,
        direction,
        floor: cfg.spatialize.floor(),
        seed: rng.random(),
    };
    let noise_pair = spatialize(&n, set, &sp_cfg)?;

    let snr = match force.snr_db {
        Some(v) => v,
        None => cfg.mix.snr.draw(&mut rng)?,
    };
    let mut mix =
        mix_at_snr((&o, &i), (&noise_pair.outer, &noise_pair.inear), snr).context("mixing")?;
    if cfg.mix.normalize {
        mix = normalize(mix)?;
    }

    let stem = file_stem(&entry.id);
    let rel = |suffix: &str| PathBuf::from("audio").join(format!("{stem}_{suffix}.wav"));
    let (ro, ri, rt) = (rel("noisy_outer"), rel("noisy_inear"), rel("target"));
    let fmt = cfg.output.sample_format;
    audio::write(&out.join(&ro), &[&mix.noisy_outer], fmt)?;
    audio::write(&out.join(&ri), &[&mix.noisy_inear], fmt)?;
    audio::write(&out.join(&rt), &[&mix.target_outer], fmt)?;

    let mut e = Entry::new(&entry.id);
    e.talker = entry.talker.clone();
    e.outer = Some(ro);
    e.inear = Some(ri);
    e.target = Some(rt);
    e.duration = Some(seg_len as f64 / rate as f64);
    e.meta = Some(json!({
        "seed": seed,
        "source_samples": source_len,
        "segment_samples": seg_len,
        "noise": noise.id,
        "noise_offset": offset,
        "hrir_set": set.id(),
        "field": noise_pair.field,
        "floor_db": noise_pair.floor_db,
        "snr_db": snr,
        "achieved_snr_db": mix.achieved_snr_db,
        "noise_gain": mix.noise_gain,
        "normalized": mix.normalized,
        "means": mix.means,
        "stds": mix.stds,
        "target_gain": mix.target_gain,
    }));
    Ok(e)
}

pub fn run(cfg: &PipelineConfig, jobs: usize, args: &MixArgs) -> Result<usize> {
    let own = Manifest::load_as(&args.own, Role::RecordedPairs)?;
    let noise_manifest = Manifest::load_as(&args.noise, Role::Noise)?;
    let sets = hrir::load_all(&Manifest::load_as(&args.hrir, Role::Hrir)?)?;
    if let Some(v) = args.force.snr_db {
        if !v.is_finite() {
            bail!("forced SNR must be finite");
        }
    }

    let noises: Vec<NoiseFile> = noise_manifest
        .sorted_entries()
        .into_iter()
        .map(|e| {
            let path = noise_manifest.resolve(e.audio.as_deref().context("missing audio")?);
            let (len, _, _) = audio::probe(&path)?;
            Ok(NoiseFile {
                id: e.id.clone(),
                path,
                len,
            })
        })
        .collect::<Result<_>>()?;
    let entries = own.sorted_entries();
    if !entries.is_empty() && noises.is_empty() {
        bail!("the noise manifest is empty");
    }
    check_unique_stems(entries.iter().map(|e| e.id.as_str()))?;
    let seg_len = (cfg.mix.segment_secs * cfg.pipeline_rate() as f64).round() as usize;

    let out_entries = run_parallel(jobs, &entries, |e| {
        mix_one(
            &own,
            e,
            &noises,
            &sets,
            cfg,
            &args.force,
            seg_len,
            &args.out,
        )
        .with_context(|| format!("example {:?}", e.id))
    })?;
    let n = out_entries.len();
    Manifest::new(Role::MixExamples, out_entries, &args.out)
        .write(&args.out.join("manifest.jsonl"))?;
    Ok(n)
}

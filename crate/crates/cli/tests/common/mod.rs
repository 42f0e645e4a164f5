#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use ovaug::{Waveform, Waveform64};
use ovaug_cli::audio::{self, OutputFormat};
use ovaug_cli::hrir;
use ovaug_cli::manifest::{Entry, Manifest, Role};
use ovaug_cli::PipelineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Binomial, Discrete};

pub const RATE: u32 = 16000;
pub const LABELS: [&str; 4] = ["aa", "iy", "s", "m"];

pub fn white_noise(len: usize, rate: u32, seed: u64) -> Waveform64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..len)
        .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Waveform::new(x, rate).unwrap()
}

/// Voiced-sounding test signal: a few harmonics of a drifting f0 over noise.
pub fn pseudo_speech(len: usize, seed: u64) -> Waveform64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f0 = rng.random_range(100.0..220.0);
    let tau = 2.0 * std::f64::consts::PI;
    let mut phase = 0.0;
    let x = (0..len)
        .map(|n| {
            let t = n as f64 / RATE as f64;
            phase += tau * f0 * (1.0 + 0.05 * (tau * 3.0 * t).sin()) / RATE as f64;
            let voiced: f64 = (1..6).map(|h| (h as f64 * phase).sin() / h as f64).sum();
            0.2 * voiced + 0.02 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Waveform::new(x, RATE).unwrap()
}

/// Causal FIR filtering truncated to the input length.
pub fn fir_filter(x: &Waveform64, h: &[f64]) -> Waveform64 {
    let s = x.samples();
    let y = (0..s.len())
        .map(|n| {
            h.iter()
                .take(n + 1)
                .enumerate()
                .map(|(m, &v)| v * s[n - m])
                .sum()
        })
        .collect();
    Waveform::new(y, x.sample_rate()).unwrap()
}

pub fn decaying_fir(taps: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..taps)
        .map(|n| 0.7f64.powi(n as i32) * rng.random_range(-1.0..1.0))
        .collect()
}

pub fn write_wav(path: &Path, w: &Waveform64) {
    audio::write(path, &[w], OutputFormat::Float32).unwrap();
}

pub fn write_manifest(path: &Path, role: Role, entries: Vec<Entry>) {
    let base = path.parent().unwrap().to_path_buf();
    Manifest::new(role, entries, base).write(path).unwrap();
}

pub fn write_inventory(path: &Path) {
    std::fs::write(path, LABELS.join("\n") + "\n").unwrap();
}

/// Consecutive intervals of `step` seconds cycling through a seeded label
/// order, covering `secs`.
pub fn alignment_text(secs: f64, step: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut t = 0.0;
    while t < secs {
        let end = (t + step).min(secs);
        let label = LABELS[rng.random_range(0..LABELS.len())];
        out.push_str(&format!("{t:.4}\t{end:.4}\t{label}\n"));
        t = end;
    }
    out
}

/// Recorded own-voice pairs: `talkers` x `utterances` items of `secs`
/// seconds, in-ear = talker-specific FIR of outer, with alignments.
pub fn recorded_pairs(dir: &Path, talkers: usize, utterances: usize, secs: f64) -> PathBuf {
    let len = (secs * RATE as f64) as usize;
    let mut entries = Vec::new();
    for t in 0..talkers {
        let h = decaying_fir(16, 1000 + t as u64);
        for u in 0..utterances {
            let id = format!("t{t:02}_u{u:03}");
            let seed = (t * 1000 + u) as u64;
            let outer = pseudo_speech(len, seed);
            let inear = fir_filter(&outer, &h);
            write_wav(&dir.join(format!("pairs/{id}_o.wav")), &outer);
            write_wav(&dir.join(format!("pairs/{id}_i.wav")), &inear);
            std::fs::write(
                dir.join(format!("pairs/{id}.txt")),
                alignment_text(secs, 0.08, seed),
            )
            .unwrap();
            let mut e = Entry::new(&id);
            e.talker = Some(format!("t{t:02}"));
            e.outer = Some(format!("pairs/{id}_o.wav").into());
            e.inear = Some(format!("pairs/{id}_i.wav").into());
            e.alignment = Some(format!("pairs/{id}.txt").into());
            e.duration = Some(secs);
            entries.push(e);
        }
    }
    let path = dir.join("pairs.jsonl");
    write_manifest(&path, Role::RecordedPairs, entries);
    path
}

/// Single-channel speech corpus with alignments.
pub fn speech_corpus(dir: &Path, count: usize, secs: f64) -> PathBuf {
    let len = (secs * RATE as f64) as usize;
    let entries = (0..count)
        .map(|u| {
            let id = format!("s{u:03}");
            write_wav(
                &dir.join(format!("speech/{id}.wav")),
                &pseudo_speech(len, 50_000 + u as u64),
            );
            std::fs::write(
                dir.join(format!("speech/{id}.txt")),
                alignment_text(secs, 0.08, 60_000 + u as u64),
            )
            .unwrap();
            let mut e = Entry::new(&id);
            e.talker = Some(format!("spk{}", u % 5));
            e.audio = Some(format!("speech/{id}.wav").into());
            e.alignment = Some(format!("speech/{id}.txt").into());
            e
        })
        .collect();
    let path = dir.join("speech.jsonl");
    write_manifest(&path, Role::SpeechCorpus, entries);
    path
}

pub fn noise_corpus(dir: &Path, count: usize, secs: f64) -> PathBuf {
    let len = (secs * RATE as f64) as usize;
    let entries = (0..count)
        .map(|k| {
            let id = format!("n{k}");
            write_wav(
                &dir.join(format!("noise/{id}.wav")),
                &white_noise(len, RATE, 90 + k as u64),
            );
            let mut e = Entry::new(&id);
            e.audio = Some(format!("noise/{id}.wav").into());
            e
        })
        .collect();
    let path = dir.join("noise.jsonl");
    write_manifest(&path, Role::Noise, entries);
    path
}

/// One impulse-response set with `directions` azimuths spread over the circle.
pub fn hrir_manifest(dir: &Path, directions: usize) -> PathBuf {
    let set_dir = dir.join("hrir/set0");
    let azimuths: Vec<f64> = (0..directions)
        .map(|d| (d * 360 / directions) as f64)
        .collect();
    for (d, &az) in azimuths.iter().enumerate() {
        let o = Waveform::new(decaying_fir(24, 7000 + d as u64), RATE).unwrap();
        let i = Waveform::new(decaying_fir(24, 8000 + d as u64), RATE).unwrap();
        audio::write(
            &set_dir.join(hrir::file_name(az)),
            &[&o, &i],
            OutputFormat::Float32,
        )
        .unwrap();
    }
    let mut e = Entry::new("set0");
    e.dir = Some("hrir/set0".into());
    e.directions = Some(azimuths);
    let path = dir.join("hrir.jsonl");
    write_manifest(&path, Role::Hrir, vec![e]);
    path
}

pub fn write_config(dir: &Path, cfg: &PipelineConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

pub fn ovaug(args: &[&dyn AsRef<std::ffi::OsStr>]) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ovaug"));
    for a in args {
        cmd.arg(a);
    }
    cmd.output().unwrap()
}

/// All regular files under `root`, relative, sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

pub fn read_entries(path: &Path) -> Vec<Entry> {
    Manifest::load(path).unwrap().entries
}

/// Two-sided one-sample Kolmogorov-Smirnov p-value against U(low, high),
/// asymptotic distribution with Stephens' small-sample correction.
pub fn ks_uniform_p(samples: &[f64], low: f64, high: f64) -> f64 {
    let mut x: Vec<f64> = samples.iter().map(|v| (v - low) / (high - low)).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &f)| ((i + 1) as f64 / n - f).max(f - i as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let p: f64 = (1..100)
        .map(|k| {
            let k = k as f64;
            2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum();
    p.clamp(0.0, 1.0)
}

/// Two-sided exact binomial test p-value (sum of outcomes no more likely).
pub fn binomial_p(successes: u64, n: u64, p: f64) -> f64 {
    let b = Binomial::new(p, n).unwrap();
    let observed = b.pmf(successes);
    (0..=n)
        .map(|k| b.pmf(k))
        .filter(|&q| q <= observed * (1.0 + 1e-7))
        .sum::<f64>()
        .min(1.0)
}

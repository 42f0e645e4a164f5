//! Invariant checks on manifests, models, masks and config files.

use std::io::Read;
use std::path::{Path, PathBuf};

use ovaug::format::{read_mask, read_model, read_model_record, MASK_MAGIC, MODEL_MAGIC};
use ovaug::{FrameSpec, MaskRecord64, RtfModel64};
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::hrir;
use crate::manifest::{Manifest, Role};

/// COLA deviations above this are violations.
const COLA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub path: PathBuf,
    pub kind: &'static str,
    pub status: &'static str,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub ok: bool,
    pub files: Vec<FileReport>,
}

fn check_cola(spec: &FrameSpec, what: &str, v: &mut Vec<String>) {
    let err = spec.cola_error();
    if err > COLA_TOLERANCE {
        v.push(format!(
            "{what} window violates w[n]^2 + w[n+hop]^2 = 1 by {err:e}"
        ));
    }
}

fn check_model(bytes: &[u8], v: &mut Vec<String>) {
    let rec = match read_model_record::<_, f64>(&mut &bytes[..]) {
        Ok(r) => r,
        Err(e) => {
            v.push(format!("unreadable model: {e}"));
            return;
        }
    };
    if rec.padding_bits != 0 {
        v.push("availability bitmap has padding bits set".into());
    }
    let slots = rec.available.len();
    if rec.meta.frame_counts.len() != slots {
        v.push(format!(
            "metadata lists {} frame counts for {slots} slots",
            rec.meta.frame_counts.len()
        ));
    } else {
        let min = rec.meta.min_frames.max(1);
        for (p, (&a, &c)) in rec.available.iter().zip(&rec.meta.frame_counts).enumerate() {
            if a != (c >= min) {
                v.push(format!(
                    "availability bit of slot {p} is {a} but its frame count is {c} (min {min})"
                ));
            }
        }
    }
    if !rec.available.iter().any(|&a| a) {
        v.push("no slot is available".into());
    }
    if rec.spec != FrameSpec::model() {
        v.push(format!(
            "model grid {:?} is not the 128-sample 5 kHz grid",
            rec.spec
        ));
    }
    check_cola(&rec.spec, "model", v);
    if v.is_empty() {
        if let Err(e) = read_model::<_, f64>(&mut &bytes[..]).map(|_: RtfModel64| ()) {
            v.push(format!("invalid model: {e}"));
        }
    }
}

fn check_mask(bytes: &[u8], v: &mut Vec<String>) {
    match read_mask::<_, f64>(&mut &bytes[..]) {
        Ok(m) => {
            let m: MaskRecord64 = m;
            check_cola(&m.spec, "mask", v);
            if m.outer
                .iter()
                .chain(&m.inear)
                .any(|c| !c.re.is_finite() || !c.im.is_finite())
            {
                v.push("mask contains non-finite values".into());
            }
        }
        Err(e) => v.push(format!("unreadable mask: {e}")),
    }
}

fn check_manifest(path: &Path, v: &mut Vec<String>) {
    let m = match Manifest::load(path) {
        Ok(m) => m,
        Err(e) => {
            v.push(format!("{e:#}"));
            return;
        }
    };
    for e in &m.entries {
        for (field, p) in e.paths() {
            let full = m.resolve(p);
            if !full.exists() {
                v.push(format!(
                    "entry {:?}: {field} {} does not exist",
                    e.id,
                    full.display()
                ));
            }
        }
        if m.role == Role::Hrir {
            if let Ok(files) = hrir::direction_files(&m, e) {
                for (az, f) in files {
                    if !f.exists() {
                        v.push(format!(
                            "entry {:?}: impulse response for {az} deg missing ({})",
                            e.id,
                            f.display()
                        ));
                    }
                }
            }
        }
    }
}

fn check_config(path: &Path, v: &mut Vec<String>) {
    match PipelineConfig::load(path) {
        Ok(cfg) => {
            for (what, grid) in [
                ("pipeline", cfg.frames.pipeline),
                ("model", cfg.frames.model),
            ] {
                if let Ok(spec) = grid.spec() {
                    check_cola(&spec, what, v);
                }
            }
            if let Some(inv) = &cfg.estimate.inventory {
                if !inv.exists() {
                    v.push(format!("inventory {} does not exist", inv.display()));
                }
            }
        }
        Err(e) => v.push(format!("{e:#}")),
    }
}

pub fn validate_file(path: &Path) -> FileReport {
    let mut v = Vec::new();
    let kind = match std::fs::File::open(path) {
        Err(e) => {
            v.push(format!("cannot open: {e}"));
            "unknown"
        }
        Ok(mut f) => {
            let mut bytes = Vec::new();
            if let Err(e) = f.read_to_end(&mut bytes) {
                v.push(format!("cannot read: {e}"));
                "unknown"
            } else if bytes.starts_with(MODEL_MAGIC) {
                check_model(&bytes, &mut v);
                "model"
            } else if bytes.starts_with(MASK_MAGIC) {
                check_mask(&bytes, &mut v);
                "mask"
            } else if path.extension().is_some_and(|e| e == "toml") {
                check_config(path, &mut v);
                "config"
            } else {
                check_manifest(path, &mut v);
                "manifest"
            }
        }
    };
    FileReport {
        path: path.to_path_buf(),
        kind,
        status: if v.is_empty() { "ok" } else { "violations" },
        violations: v,
    }
}

pub fn run(paths: &[PathBuf]) -> Report {
    let files: Vec<FileReport> = paths.iter().map(|p| validate_file(p)).collect();
    Report {
        ok: files.iter().all(|f| f.violations.is_empty()),
        files,
    }
}

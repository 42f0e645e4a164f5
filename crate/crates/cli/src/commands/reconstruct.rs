//! Own-voice estimate from a noisy pair and a mask file.

use std::path::PathBuf;

use anyhow::{Context, Result};
use ovaug::format::load_mask;
use ovaug::reconstruct::reconstruct;
use ovaug::MaskRecord64;

use super::read_pair;
use crate::audio;
use crate::config::PipelineConfig;

#[derive(Debug, Clone)]
pub struct ReconstructArgs {
    pub outer: PathBuf,
    pub inear: PathBuf,
    pub mask: PathBuf,
    pub out: PathBuf,
}

pub fn run(cfg: &PipelineConfig, args: &ReconstructArgs) -> Result<()> {
    let masks: MaskRecord64 =
        load_mask(&args.mask).with_context(|| format!("mask {}", args.mask.display()))?;
    let (o, i) = read_pair(&args.outer, &args.inear, masks.spec.sample_rate())?;
    let est = reconstruct(&o, &i, &masks)?;
    audio::write(&args.out, &[&est], cfg.output.sample_format)
}

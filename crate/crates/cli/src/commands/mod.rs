pub mod augment;
pub mod estimate;
pub mod mix;
pub mod reconstruct;
pub mod spatialize;
pub mod validate;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ovaug::Waveform64;
use rayon::prelude::*;

use crate::audio;

/// Runs `f` over `items` on `jobs` threads (0 = one per core) and returns the
/// results in item order. On failure the error of the first failing item is
/// returned, independent of scheduling.
pub fn run_parallel<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker threads")?;
    let results: Vec<Result<R>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

pub(crate) fn read_at_rate(path: &Path, rate: u32) -> Result<Waveform64> {
    let w = audio::read_mono(path)?;
    if w.sample_rate() != rate {
        bail!(
            "{}: sample rate {} Hz, the pipeline runs at {rate} Hz",
            path.display(),
            w.sample_rate()
        );
    }
    Ok(w)
}

pub(crate) fn read_pair(outer: &Path, inear: &Path, rate: u32) -> Result<(Waveform64, Waveform64)> {
    let o = read_at_rate(outer, rate)?;
    let i = read_at_rate(inear, rate)?;
    if o.len() != i.len() {
        bail!(
            "{} and {} differ in length ({} vs {} samples)",
            outer.display(),
            inear.display(),
            o.len(),
            i.len()
        );
    }
    Ok((o, i))
}

pub(crate) fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

//! Impulse-response sets on disk.
//!
//! A set is a directory holding one stereo WAV per direction, named by its
//! azimuth in whole degrees (`az000.wav`, `az045.wav`, ...). Channel 0 is the
//! response to the outer microphone, channel 1 to the in-ear microphone. The
//! `hrir` manifest entry lists the azimuths in direction-index order.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ovaug::spatial::Hrir;
use ovaug::HrirSet64;

use crate::audio;
use crate::manifest::{Entry, Manifest};

pub fn file_name(azimuth_deg: f64) -> String {
    format!("az{:03}.wav", azimuth_deg.round().rem_euclid(360.0) as u32)
}

pub fn direction_files(manifest: &Manifest, entry: &Entry) -> Result<Vec<(f64, PathBuf)>> {
    let dir = manifest.resolve(entry.dir.as_deref().context("hrir entry without `dir`")?);
    let dirs = entry
        .directions
        .as_deref()
        .context("hrir entry without `directions`")?;
    Ok(dirs
        .iter()
        .map(|&az| (az, dir.join(file_name(az))))
        .collect())
}

fn load_direction(az: f64, path: &Path) -> Result<(Hrir<f64>, u32)> {
    let (mut ch, rate) = audio::read_channels(path)?;
    if ch.len() != 2 {
        bail!(
            "{}: impulse responses must be stereo (outer, in-ear)",
            path.display()
        );
    }
    let inear = ch.pop().unwrap_or_default();
    let outer = ch.pop().unwrap_or_default();
    Ok((
        Hrir {
            azimuth_deg: az,
            outer,
            inear,
        },
        rate,
    ))
}

pub fn load_set(manifest: &Manifest, entry: &Entry) -> Result<HrirSet64> {
    let mut dirs = Vec::new();
    let mut rate = None;
    for (az, path) in direction_files(manifest, entry)? {
        let (h, r) = load_direction(az, &path)?;
        if *rate.get_or_insert(r) != r {
            bail!(
                "{}: sample rate {r} differs from the rest of the set",
                path.display()
            );
        }
        dirs.push(h);
    }
    let rate = rate.context("hrir set without directions")?;
    HrirSet64::new(entry.talker_or_id(), rate, dirs)
        .with_context(|| format!("hrir set {:?}", entry.id))
}

/// All sets of a manifest, keyed by talker (or entry id).
pub fn load_all(manifest: &Manifest) -> Result<Vec<HrirSet64>> {
    manifest
        .sorted_entries()
        .into_iter()
        .map(|e| load_set(manifest, e))
        .collect()
}

/// The set measured for `talker`, or the only set when there is just one.
pub fn for_talker<'a>(sets: &'a [HrirSet64], talker: &str) -> Result<&'a HrirSet64> {
    if let Some(s) = sets.iter().find(|s| s.id() == talker) {
        return Ok(s);
    }
    match sets {
        [only] => Ok(only),
        [] => bail!("no impulse-response sets available"),
        _ => bail!("no impulse-response set for talker {talker:?}"),
    }
}

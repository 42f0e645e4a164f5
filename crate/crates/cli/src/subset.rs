//! Seeded talker and utterance subsets, drawn uniformly without replacement.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::manifest::Entry;
use crate::seeds::derive_seed;

fn draw<'a, T>(items: &[&'a T], n: usize, seed: u64) -> Vec<&'a T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, items.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}

/// Picks `talkers` talkers, then `utterances` utterances of each, in id
/// order. The utterance draw of a talker depends only on the seed and that
/// talker, so growing the talker subset keeps earlier talkers' utterances.
pub fn select<'a>(
    entries: &[&'a Entry],
    talkers: Option<usize>,
    utterances: Option<usize>,
    seed: u64,
) -> Result<Vec<&'a Entry>> {
    let mut by_talker: BTreeMap<&str, Vec<&Entry>> = BTreeMap::new();
    for &e in entries {
        by_talker.entry(e.talker_or_id()).or_default().push(e);
    }
    let names: Vec<&str> = by_talker.keys().copied().collect();
    let chosen: Vec<&str> = match talkers {
        None => names.clone(),
        Some(n) if n > names.len() => {
            bail!(
                "talker subset of {n} requested, only {} talkers available",
                names.len()
            )
        }
        Some(n) => {
            let refs: Vec<&&str> = names.iter().collect();
            draw(&refs, n, derive_seed(seed, "subset-talkers", ""))
                .into_iter()
                .copied()
                .collect()
        }
    };
    let mut out = Vec::new();
    for t in chosen {
        let mut utts = by_talker[t].clone();
        utts.sort_by(|a, b| a.id.cmp(&b.id));
        match utterances {
            None => out.extend(utts),
            Some(n) if n > utts.len() => bail!(
                "utterance subset of {n} requested, talker {t:?} has only {}",
                utts.len()
            ),
            Some(n) => {
                let refs: Vec<&Entry> = utts.clone();
                let refs: Vec<&&Entry> = refs.iter().collect();
                out.extend(
                    draw(&refs, n, derive_seed(seed, "subset-utterances", t))
                        .into_iter()
                        .copied(),
                );
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Entry> {
        let mut v = Vec::new();
        for t in 0..5 {
            for u in 0..7 {
                let mut e = Entry::new(format!("t{t}-u{u}"));
                e.talker = Some(format!("t{t}"));
                v.push(e);
            }
        }
        v
    }

    #[test]
    fn sizes_and_determinism() {
        let c = corpus();
        let refs: Vec<&Entry> = c.iter().collect();
        let a = select(&refs, Some(3), Some(2), 11).unwrap();
        assert_eq!(a.len(), 6);
        let talkers: std::collections::BTreeSet<_> = a.iter().map(|e| e.talker_or_id()).collect();
        assert_eq!(talkers.len(), 3);
        assert_eq!(a, select(&refs, Some(3), Some(2), 11).unwrap());
        assert_eq!(select(&refs, None, None, 11).unwrap().len(), 35);
        assert!(select(&refs, Some(6), None, 1).is_err());
        assert!(select(&refs, None, Some(8), 1).is_err());
    }

    #[test]
    fn utterance_draw_is_per_talker() {
        let c = corpus();
        let refs: Vec<&Entry> = c.iter().collect();
        let all = select(&refs, None, Some(3), 5).unwrap();
        let two = select(&refs, Some(2), Some(3), 5).unwrap();
        for e in &two {
            assert!(all.contains(e));
        }
    }
}

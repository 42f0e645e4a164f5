//! Phoneme inventories, frame-wise phoneme sequences, and alignment files.
//!
//! Inventory file: one label per line in id order (first line is id 1).
//! Alignment file: one interval per line, `start<TAB>end<TAB>label`, times in
//! decimal seconds. Intervals are half-open `[start, end)`, so a frame centered
//! exactly on a shared boundary belongs to the later interval.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::wola::FrameSpec;

/// 1-based phoneme class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhonemeId(u16);

impl PhonemeId {
    pub fn get(self) -> u16 {
        self.0
    }

    /// Zero-based slot index into per-phoneme tables.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for PhonemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    labels: Vec<String>,
    index: HashMap<String, PhonemeId>,
}

impl PhonemeInventory {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidInventory("no labels".into()));
        }
        if labels.len() > u16::MAX as usize {
            return Err(Error::InvalidInventory(format!(
                "{} labels exceed the supported maximum",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() || label.contains(['\t', '\n']) {
                return Err(Error::InvalidInventory(format!(
                    "label {} is empty or contains a tab/newline",
                    i + 1
                )));
            }
            if index
                .insert(label.clone(), PhonemeId(i as u16 + 1))
                .is_some()
            {
                return Err(Error::InvalidInventory(format!(
                    "duplicate label {label:?}"
                )));
            }
        }
        Ok(Self { labels, index })
    }

    /// Inventory with labels `"1"..="P"`, for synthetic data.
    pub fn numbered(size: usize) -> Result<Self> {
        Self::new((1..=size).map(|i| i.to_string()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.split('\n').collect();
        if lines.last() == Some(&"") {
            lines.pop();
        }
        Self::new(lines)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_text(&self) -> String {
        let mut s = String::new();
        for label in &self.labels {
            s.push_str(label);
            s.push('\n');
        }
        s
    }

    /// Number of classes `P`.
    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn id(&self, label: &str) -> Option<PhonemeId> {
        self.index.get(label).copied()
    }

    pub fn id_from_index(&self, id: u16) -> Option<PhonemeId> {
        (id >= 1 && (id as usize) <= self.labels.len()).then_some(PhonemeId(id))
    }

    pub fn label(&self, id: PhonemeId) -> &str {
        &self.labels[id.slot()]
    }
}

/// Frame-wise phoneme labels; `None` marks frames with no known phoneme.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeSequence {
    ids: Vec<Option<PhonemeId>>,
    spec: FrameSpec,
    inventory: Arc<PhonemeInventory>,
}

impl PhonemeSequence {
    pub fn new(
        ids: Vec<Option<PhonemeId>>,
        spec: FrameSpec,
        inventory: Arc<PhonemeInventory>,
    ) -> Result<Self> {
        if let Some(bad) = ids
            .iter()
            .flatten()
            .find(|id| id.slot() >= inventory.size())
        {
            return Err(Error::InvalidParameter(format!(
                "phoneme id {bad} outside inventory of size {}",
                inventory.size()
            )));
        }
        Ok(Self {
            ids,
            spec,
            inventory,
        })
    }

    /// Every frame labeled with the same phoneme.
    pub fn constant(
        id: PhonemeId,
        num_frames: usize,
        spec: FrameSpec,
        inventory: Arc<PhonemeInventory>,
    ) -> Result<Self> {
        Self::new(vec![Some(id); num_frames], spec, inventory)
    }

    pub fn ids(&self) -> &[Option<PhonemeId>] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn inventory(&self) -> &Arc<PhonemeInventory> {
        &self.inventory
    }

    pub fn expect_frames(&self, frames: usize) -> Result<()> {
        if self.ids.len() != frames {
            return Err(Error::LengthMismatch {
                expected: frames,
                found: self.ids.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentInterval {
    pub start: f64,
    pub end: f64,
    pub label: String,
}

/// Parses and checks alignment text: times non-negative, `end >= start`, and
/// intervals sorted without overlap.
pub fn parse_alignment(text: &str) -> Result<Vec<AlignmentInterval>> {
    let mut out: Vec<AlignmentInterval> = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = i + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedAlignment {
                line,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let time = |s: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::MalformedAlignment {
                line,
                reason: format!("{s:?} is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedAlignment {
                    line,
                    reason: "non-finite time".into(),
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeTime { line });
            }
            Ok(v)
        };
        let start = time(fields[0])?;
        let end = time(fields[1])?;
        if end < start {
            return Err(Error::MalformedAlignment {
                line,
                reason: "interval ends before it starts".into(),
            });
        }
        if let Some(prev) = out.last() {
            if start < prev.end {
                return Err(Error::MalformedAlignment {
                    line,
                    reason: "interval overlaps or precedes the previous one".into(),
                });
            }
        }
        if fields[2].is_empty() {
            return Err(Error::MalformedAlignment {
                line,
                reason: "empty label".into(),
            });
        }
        out.push(AlignmentInterval {
            start,
            end,
            label: fields[2].to_string(),
        });
    }
    Ok(out)
}

pub fn format_alignment(intervals: &[AlignmentInterval]) -> String {
    let mut s = String::new();
    for iv in intervals {
        s.push_str(&format!("{}\t{}\t{}\n", iv.start, iv.end, iv.label));
    }
    s
}

/// Labels each frame of a `signal_len`-sample signal on `spec` by the interval
/// containing the frame's center time. The padded last frame is centered past
/// the final sample, so centers are clamped to the time of the last sample.
pub fn label_frames(
    intervals: &[AlignmentInterval],
    inventory: Arc<PhonemeInventory>,
    spec: FrameSpec,
    signal_len: usize,
) -> Result<PhonemeSequence> {
    let mut resolved = Vec::with_capacity(intervals.len());
    for (i, iv) in intervals.iter().enumerate() {
        let id = inventory.id(&iv.label).ok_or_else(|| Error::UnknownLabel {
            label: iv.label.clone(),
            line: i + 1,
        })?;
        resolved.push((iv.start, iv.end, id));
    }

    let frames = spec.frame_count(signal_len);
    let mut ids = Vec::with_capacity(frames);
    // Centers increase with l and intervals are sorted: one forward sweep.
    let last = signal_len.saturating_sub(1) as f64 / spec.sample_rate() as f64;
    let mut cursor = 0;
    for l in 0..frames {
        let t = spec.frame_center_secs(l).min(last);
        while cursor < resolved.len() && resolved[cursor].1 <= t {
            cursor += 1;
        }
        let id = resolved
            .get(cursor)
            .filter(|(start, end, _)| *start <= t && t < *end)
            .map(|&(_, _, id)| id);
        ids.push(id);
    }
    PhonemeSequence::new(ids, spec, inventory)
}

pub fn load_alignment(
    path: impl AsRef<Path>,
    inventory: Arc<PhonemeInventory>,
    spec: FrameSpec,
    signal_len: usize,
) -> Result<PhonemeSequence> {
    let text = std::fs::read_to_string(path)?;
    label_frames(&parse_alignment(&text)?, inventory, spec, signal_len)
}

/// Independent uniform phoneme ids per frame, reproducible from `seed`.
pub fn random_sequence(
    num_frames: usize,
    inventory: Arc<PhonemeInventory>,
    spec: FrameSpec,
    seed: u64,
) -> PhonemeSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = inventory.size() as u16;
    let ids = (0..num_frames)
        .map(|_| Some(PhonemeId(rng.random_range(1..=p))))
        .collect();
    PhonemeSequence {
        ids,
        spec,
        inventory,
    }
}

//! Line-delimited JSON manifests.
//!
//! The first line is a header `{"manifest": "<role>", "version": 1}`; every
//! further non-empty line is one entry. Relative paths in entries are resolved
//! against the manifest's directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    /// Single-channel speech to augment (`audio`, optional `alignment`).
    SpeechCorpus,
    /// Outer/in-ear own-voice pairs, recorded or simulated.
    RecordedPairs,
    /// Single-channel environmental noise (`audio`).
    Noise,
    /// One impulse-response set per entry (`dir`, `directions`).
    Hrir,
    /// Spatialized two-channel noise.
    NoisePairs,
    /// Mixed training examples with their metadata.
    MixExamples,
    /// Estimated model files.
    Models,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::SpeechCorpus => "speech-corpus",
            Role::RecordedPairs => "recorded-pairs",
            Role::Noise => "noise",
            Role::Hrir => "hrir",
            Role::NoisePairs => "noise-pairs",
            Role::MixExamples => "mix-examples",
            Role::Models => "models",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    manifest: Role,
    version: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub talker: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inear: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Azimuths in degrees, in direction-index order (HRIR sets).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<f64>>,
    /// Seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    /// Provenance and per-item parameters of generated entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

impl Entry {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn talker_or_id(&self) -> &str {
        self.talker.as_deref().unwrap_or(&self.id)
    }

    /// Every file or directory path the entry references.
    pub fn paths(&self) -> Vec<(&'static str, &Path)> {
        [
            ("audio", &self.audio),
            ("outer", &self.outer),
            ("inear", &self.inear),
            ("target", &self.target),
            ("alignment", &self.alignment),
            ("model", &self.model),
            ("dir", &self.dir),
        ]
        .into_iter()
        .filter_map(|(k, p)| p.as_deref().map(|p| (k, p)))
        .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub role: Role,
    pub entries: Vec<Entry>,
    base: PathBuf,
}

fn require(e: &Entry, field: &str, present: bool, role: Role) -> Result<()> {
    if !present {
        bail!("entry {:?}: {} manifests need `{field}`", e.id, role.name());
    }
    Ok(())
}

fn check_entry(role: Role, e: &Entry) -> Result<()> {
    if e.id.is_empty() {
        bail!("entry with empty id");
    }
    match role {
        Role::SpeechCorpus => {
            require(e, "audio", e.audio.is_some(), role)?;
            require(e, "talker", e.talker.is_some(), role)
        }
        Role::RecordedPairs | Role::NoisePairs => {
            require(e, "outer", e.outer.is_some(), role)?;
            require(e, "inear", e.inear.is_some(), role)
        }
        Role::Noise => require(e, "audio", e.audio.is_some(), role),
        Role::Hrir => {
            require(e, "dir", e.dir.is_some(), role)?;
            require(
                e,
                "directions",
                e.directions.as_ref().is_some_and(|d| !d.is_empty()),
                role,
            )
        }
        Role::MixExamples => {
            require(e, "outer", e.outer.is_some(), role)?;
            require(e, "inear", e.inear.is_some(), role)?;
            require(e, "target", e.target.is_some(), role)
        }
        Role::Models => require(e, "model", e.model.is_some(), role),
    }
}

impl Manifest {
    pub fn new(role: Role, entries: Vec<Entry>, base: impl Into<PathBuf>) -> Self {
        Self {
            role,
            entries,
            base: base.into(),
        }
    }

    pub fn parse(text: &str, base: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let Some((_, first)) = lines.next() else {
            bail!("empty manifest: missing header line");
        };
        let header: Header = serde_json::from_str(first).context("manifest header")?;
        if header.version != MANIFEST_VERSION {
            bail!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                header.version
            );
        }
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let e: Entry =
                serde_json::from_str(line).with_context(|| format!("manifest line {}", i + 1))?;
            check_entry(header.manifest, &e).with_context(|| format!("manifest line {}", i + 1))?;
            if !seen.insert(e.id.clone()) {
                bail!("manifest line {}: duplicate id {:?}", i + 1, e.id);
            }
            entries.push(e);
        }
        Ok(Self::new(header.manifest, entries, base))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).with_context(|| format!("manifest {}", path.display()))
    }

    /// Loads and checks the role.
    pub fn load_as(path: &Path, role: Role) -> Result<Self> {
        let m = Self::load(path)?;
        if m.role != role {
            bail!(
                "{} is a {} manifest, expected {}",
                path.display(),
                m.role.name(),
                role.name()
            );
        }
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Entries ordered by id.
    pub fn sorted_entries(&self) -> Vec<&Entry> {
        let mut v: Vec<&Entry> = self.entries.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn to_text(&self) -> String {
        let header = Header {
            manifest: self.role,
            version: MANIFEST_VERSION,
        };
        let mut s = serde_json::to_string(&header).expect("header serializes");
        s.push('\n');
        for e in &self.entries {
            let _ = writeln!(s, "{}", serde_json::to_string(e).expect("entry serializes"));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, self.to_text()).with_context(|| format!("writing {}", path.display()))
    }
}

/// File-name-safe form of an id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Fails when two ids map to the same file stem.
pub fn check_unique_stems<'a>(ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeMap::new();
    for id in ids {
        if let Some(prev) = seen.insert(file_stem(id), id) {
            bail!("ids {prev:?} and {id:?} map to the same output file name");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_round_trip() {
        let text = "{\"manifest\":\"recorded-pairs\",\"version\":1}\n\
                    {\"id\":\"u1\",\"talker\":\"t1\",\"outer\":\"a.wav\",\"inear\":\"b.wav\"}\n\n";
        let m = Manifest::parse(text, "/data").unwrap();
        assert_eq!(m.role, Role::RecordedPairs);
        assert_eq!(m.entries.len(), 1);
        assert_eq!(
            m.resolve(m.entries[0].outer.as_ref().unwrap()),
            PathBuf::from("/data/a.wav")
        );
        let again = Manifest::parse(&m.to_text(), "/data").unwrap();
        assert_eq!(again.entries, m.entries);
        assert_eq!(again.to_text(), m.to_text());
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(Manifest::parse("", ".").is_err());
        assert!(Manifest::parse("{\"manifest\":\"noise\",\"version\":2}\n", ".").is_err());
        assert!(Manifest::parse("{\"manifest\":\"bogus\",\"version\":1}\n", ".").is_err());
        let dup = "{\"manifest\":\"noise\",\"version\":1}\n{\"id\":\"a\",\"audio\":\"x\"}\n{\"id\":\"a\",\"audio\":\"y\"}\n";
        assert!(Manifest::parse(dup, ".").is_err());
        let missing =
            "{\"manifest\":\"recorded-pairs\",\"version\":1}\n{\"id\":\"a\",\"outer\":\"x\"}\n";
        assert!(Manifest::parse(missing, ".").is_err());
        let unknown =
            "{\"manifest\":\"noise\",\"version\":1}\n{\"id\":\"a\",\"audio\":\"x\",\"colour\":1}\n";
        assert!(Manifest::parse(unknown, ".").is_err());
    }

    #[test]
    fn file_stems() {
        assert_eq!(file_stem("t01/utt 3"), "t01_utt_3");
        assert!(check_unique_stems(["a/b", "a_b"]).is_err());
        assert!(check_unique_stems(["a", "b"]).is_ok());
    }
}

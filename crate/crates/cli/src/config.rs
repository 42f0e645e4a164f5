//! Pipeline configuration, read from TOML. Every field has a default, so an
//! empty file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ovaug::augment::DEFAULT_ALPHA;
use ovaug::rtf::DEFAULT_MIN_FRAMES;
use ovaug::spatial::{FieldMode, NoiseFloor, DEFAULT_DIFFUSE_PROBABILITY, DEFAULT_FLOOR_LOW_DB};
use ovaug::{FrameSpec, ModelMode, SnrDistribution, Technique};
use serde::{Deserialize, Serialize};

use crate::audio::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub frame_len: usize,
    pub sample_rate: u32,
}

impl GridConfig {
    pub fn spec(&self) -> Result<FrameSpec> {
        Ok(FrameSpec::new(self.frame_len, self.sample_rate)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FramesConfig {
    /// Analysis grid at the pipeline rate (masks, reconstruction).
    pub pipeline: GridConfig,
    /// Estimation/augmentation grid; fixed at 128 samples, 5 kHz.
    pub model: GridConfig,
}

impl Default for FramesConfig {
    fn default() -> Self {
        let p = FrameSpec::pipeline();
        let m = FrameSpec::model();
        Self {
            pipeline: GridConfig {
                frame_len: p.frame_len(),
                sample_rate: p.sample_rate(),
            },
            model: GridConfig {
                frame_len: m.frame_len(),
                sample_rate: m.sample_rate(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeSelection {
    /// One model per talker.
    #[default]
    Individual,
    /// One model pooled over all selected talkers.
    TalkerAveraged,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub mode: ModelMode,
    pub scope: ScopeSelection,
    pub min_frames: u64,
    /// Phoneme inventory file (speech-dependent mode).
    pub inventory: Option<PathBuf>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            mode: ModelMode::SpeechDependent,
            scope: ScopeSelection::Individual,
            min_frames: DEFAULT_MIN_FRAMES,
            inventory: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub technique: Technique,
    pub alpha: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        Self {
            technique: Technique::SpeechDependent,
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSelection {
    #[default]
    Random,
    Point,
    Diffuse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatializeSection {
    pub mode: FieldSelection,
    pub p_diffuse: f64,
    /// Fixed point-source direction index; random when absent.
    pub direction: Option<usize>,
    /// Adds the incoherent in-ear white-noise floor.
    pub white_noise: bool,
    pub white_noise_low_db: f64,
}

impl Default for SpatializeSection {
    fn default() -> Self {
        Self {
            mode: FieldSelection::Random,
            p_diffuse: DEFAULT_DIFFUSE_PROBABILITY,
            direction: None,
            white_noise: true,
            white_noise_low_db: DEFAULT_FLOOR_LOW_DB,
        }
    }
}

impl SpatializeSection {
    pub fn field_mode(&self) -> FieldMode {
        match self.mode {
            FieldSelection::Random => FieldMode::Random {
                p_diffuse: self.p_diffuse,
            },
            FieldSelection::Point => FieldMode::Point,
            FieldSelection::Diffuse => FieldMode::Diffuse,
        }
    }

    pub fn floor(&self) -> NoiseFloor {
        if self.white_noise {
            NoiseFloor::Uniform {
                low_db: self.white_noise_low_db,
            }
        } else {
            NoiseFloor::Off
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixSection {
    pub snr: SnrDistribution,
    /// Segment length in seconds; shorter utterances are zero-padded.
    pub segment_secs: f64,
    pub normalize: bool,
}

impl Default for MixSection {
    fn default() -> Self {
        Self {
            snr: SnrDistribution::training(),
            segment_secs: 3.0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetConfig {
    /// Number of talkers to draw.
    pub talkers: Option<usize>,
    /// Number of utterances to draw per talker.
    pub utterances: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub sample_format: OutputFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub frames: FramesConfig,
    pub estimate: EstimateConfig,
    pub augment: AugmentSection,
    pub spatialize: SpatializeSection,
    pub mix: MixSection,
    pub subset: SubsetConfig,
    pub output: OutputConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are made relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("config {}", path.display()))?;
        if let (Some(inv), Some(dir)) = (&cfg.estimate.inventory, path.parent()) {
            if inv.is_relative() {
                cfg.estimate.inventory = Some(dir.join(inv));
            }
        }
        Ok(cfg)
    }

    pub fn pipeline_spec(&self) -> Result<FrameSpec> {
        self.frames.pipeline.spec()
    }

    pub fn pipeline_rate(&self) -> u32 {
        self.frames.pipeline.sample_rate
    }

    pub fn validate(&self) -> Result<()> {
        self.frames.pipeline.spec().context("pipeline frame grid")?;
        if self.frames.model.spec().context("model frame grid")? != FrameSpec::model() {
            bail!("the model grid must be 128 samples at 5000 Hz");
        }
        if !(0.0..1.0).contains(&self.augment.alpha) {
            bail!("augment.alpha {} outside [0, 1)", self.augment.alpha);
        }
        if !(0.0..=1.0).contains(&self.spatialize.p_diffuse) {
            bail!(
                "spatialize.p_diffuse {} outside [0, 1]",
                self.spatialize.p_diffuse
            );
        }
        self.spatialize.floor().validate()?;
        self.mix.snr.validate()?;
        if !(self.mix.segment_secs.is_finite() && self.mix.segment_secs > 0.0) {
            bail!("mix.segment_secs must be positive");
        }
        if self.subset.talkers == Some(0) || self.subset.utterances == Some(0) {
            bail!("subset sizes must be at least 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

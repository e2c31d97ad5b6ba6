use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::{AugmentOp, AugmentTiming};
use crate::crop::{AspectRatioRange, CropScaleRange};
use crate::error::{Error, Result};
use crate::mix::MixMode;
use crate::resize::InterpolationMode;
use crate::rng::BetaParams;

/// Number of crops per sample: fixed, or drawn uniformly per sample from a
/// set of counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumCrops {
    Fixed(usize),
    Choice(Vec<usize>),
}

impl NumCrops {
    pub fn choices(&self) -> &[usize] {
        match self {
            NumCrops::Fixed(n) => std::slice::from_ref(n),
            NumCrops::Choice(v) => v,
        }
    }
}

/// Validated pipeline configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub crop_scale: CropScaleRange,
    pub aspect_ratio: AspectRatioRange,
    pub num_crops: NumCrops,
    pub single_scale: bool,
    pub mix_mode: MixMode,
    pub alpha_base: f64,
    pub scale_alpha_by_n: bool,
    pub resolution: usize,
    pub interpolation: InterpolationMode,
    pub intermediate: Vec<AugmentOp>,
    pub timing: AugmentTiming,
    pub baseline_rrc: bool,
}

impl Default for PipelineConfig {
    /// The classification setting: 2-4 crops over (0.01, 1.0), mixup with
    /// `α = 0.4 / N`, channel permutation before each mix, 224 px bilinear.
    fn default() -> Self {
        Self {
            crop_scale: CropScaleRange { lo: 0.01, hi: 1.0 },
            aspect_ratio: AspectRatioRange::default(),
            num_crops: NumCrops::Choice(vec![2, 3, 4]),
            single_scale: false,
            mix_mode: MixMode::Mixup,
            alpha_base: 0.4,
            scale_alpha_by_n: true,
            resolution: 224,
            interpolation: InterpolationMode::Bilinear,
            intermediate: vec![AugmentOp::ChannelPermute],
            timing: AugmentTiming::Before,
            baseline_rrc: false,
        }
    }
}

/// On-disk form. Every key is optional; omitted keys take the defaults,
/// except that `mix_mode = "cutmix"` defaults to `alpha_base = 1.0` without
/// scaling by `N`.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crop_scale: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aspect_ratio: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_crops: Option<NumCrops>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_scale: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mix_mode: Option<MixMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_base: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_alpha_by_n: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<InterpolationMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<Vec<AugmentOp>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<AugmentTiming>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_rrc: Option<bool>,
}

impl TryFrom<ConfigDocument> for PipelineConfig {
    type Error = Error;

    fn try_from(doc: ConfigDocument) -> Result<Self> {
        let d = PipelineConfig::default();
        let mix_mode = doc.mix_mode.unwrap_or(d.mix_mode);
        let (alpha_default, scale_default) = match mix_mode {
            MixMode::Mixup => (d.alpha_base, d.scale_alpha_by_n),
            MixMode::Cutmix => (1.0, false),
        };
        let crop_scale = match doc.crop_scale {
            Some([lo, hi]) => CropScaleRange { lo, hi },
            None => d.crop_scale,
        };
        let aspect_ratio = match doc.aspect_ratio {
            Some([lo, hi]) => AspectRatioRange { lo, hi },
            None => d.aspect_ratio,
        };
        let cfg = PipelineConfig {
            crop_scale,
            aspect_ratio,
            num_crops: doc.num_crops.unwrap_or(d.num_crops),
            single_scale: doc.single_scale.unwrap_or(d.single_scale),
            mix_mode,
            alpha_base: doc.alpha_base.unwrap_or(alpha_default),
            scale_alpha_by_n: doc.scale_alpha_by_n.unwrap_or(scale_default),
            resolution: doc.resolution.unwrap_or(d.resolution),
            interpolation: doc.interpolation.unwrap_or(d.interpolation),
            intermediate: doc.intermediate.unwrap_or(d.intermediate),
            timing: doc.timing.unwrap_or(d.timing),
            baseline_rrc: doc.baseline_rrc.unwrap_or(d.baseline_rrc),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&PipelineConfig> for ConfigDocument {
    fn from(c: &PipelineConfig) -> Self {
        ConfigDocument {
            crop_scale: Some([c.crop_scale.lo, c.crop_scale.hi]),
            aspect_ratio: Some([c.aspect_ratio.lo, c.aspect_ratio.hi]),
            num_crops: Some(c.num_crops.clone()),
            single_scale: Some(c.single_scale),
            mix_mode: Some(c.mix_mode),
            alpha_base: Some(c.alpha_base),
            scale_alpha_by_n: Some(c.scale_alpha_by_n),
            resolution: Some(c.resolution),
            interpolation: Some(c.interpolation),
            intermediate: Some(c.intermediate.clone()),
            timing: Some(c.timing),
            baseline_rrc: Some(c.baseline_rrc),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let s = self.crop_scale;
        if !(s.lo > 0.0 && s.lo < s.hi && s.hi <= 1.0) {
            return bad(format!("crop_scale {s} must satisfy 0 < lo < hi <= 1"));
        }
        AspectRatioRange::new(self.aspect_ratio.lo, self.aspect_ratio.hi)
            .map_err(|e| Error::Config(e.to_string()))?;
        let choices = self.num_crops.choices();
        if choices.is_empty() {
            return bad("num_crops choice set is empty".into());
        }
        if choices.contains(&0) {
            return bad("num_crops entries must be >= 1".into());
        }
        if self.resolution == 0 {
            return bad("resolution must be >= 1".into());
        }
        if !(self.alpha_base.is_finite() && self.alpha_base > 0.0) {
            return bad(format!("alpha_base must be > 0, got {}", self.alpha_base));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: ConfigDocument =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        doc.try_into()
    }

    /// Same keys as the TOML form, as a JSON object.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ConfigDocument =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        doc.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fully resolved TOML document (every key written out).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ConfigDocument::from(self)).expect("config serializes")
    }

    /// SHA-256 of the resolved config as compact JSON, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(&ConfigDocument::from(self)).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// The `α` used for every step of an `n`-view chain.
    pub fn alpha_effective(&self, n: usize) -> f64 {
        if self.scale_alpha_by_n {
            self.alpha_base / n as f64
        } else {
            self.alpha_base
        }
    }

    pub fn beta_params(&self, n: usize) -> Result<BetaParams> {
        BetaParams::new(self.alpha_effective(n))
    }

    /// This config with mixing bypassed: one crop over the whole range.
    pub fn as_baseline(&self) -> Self {
        Self {
            baseline_rrc: true,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
crop_scale = [0.01, 1.0]
num_crops = [2, 3, 4]
mix_mode = "mixup"
alpha_base = 0.4
scale_alpha_by_n = true
resolution = 224
interpolation = "bilinear"
intermediate = ["channel_permute"]
timing = "before"
single_scale = false
baseline_rrc = false
"#;

    #[test]
    fn parses_documented_example() {
        let cfg = PipelineConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert!((cfg.alpha_effective(2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(
            PipelineConfig::from_toml_str("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn cutmix_defaults_to_unscaled_alpha_one() {
        let cfg = PipelineConfig::from_toml_str("mix_mode = \"cutmix\"\nnum_crops = 3").unwrap();
        assert_eq!(cfg.alpha_effective(3), 1.0);
        assert_eq!(cfg.num_crops, NumCrops::Fixed(3));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let err = PipelineConfig::from_toml_str("resolutoin = 224").unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn invariant_violations_are_config_errors() {
        for doc in [
            "num_crops = []",
            "num_crops = [0, 2]",
            "num_crops = 0",
            "resolution = 0",
            "crop_scale = [0.5, 0.5]",
            "crop_scale = [0.0, 1.0]",
            "crop_scale = [0.2, 1.5]",
            "aspect_ratio = [2.0, 1.0]",
            "alpha_base = 0.0",
            "interpolation = \"lanczos\"",
            "intermediate = [\"autoaugment\"]",
            "timing = \"never\"",
        ] {
            assert!(
                matches!(PipelineConfig::from_toml_str(doc), Err(Error::Config(_))),
                "{doc}"
            );
        }
    }

    #[test]
    fn resolved_document_round_trips() {
        let cfg = PipelineConfig::from_toml_str(
            "mix_mode = \"cutmix\"\nintermediate = [\"hflip\", \"color_jitter:0.1,0.2,0.3\"]\ntiming = \"both\"",
        )
        .unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        let json = serde_json::to_string(&ConfigDocument::from(&cfg)).unwrap();
        assert_eq!(PipelineConfig::from_json_str(&json).unwrap(), cfg);
    }

    #[test]
    fn digest_tracks_resolved_content() {
        let a = PipelineConfig::from_toml_str("").unwrap();
        let b = PipelineConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
        let c = PipelineConfig::from_toml_str("resolution = 128").unwrap();
        assert_ne!(a.digest(), c.digest());
    }
}

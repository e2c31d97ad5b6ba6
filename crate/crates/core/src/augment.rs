//! Intermediate augmentations applied to mix operands or to the final image.
//!
//! Each op is split into a sampling half, which draws from an [`RngStream`]
//! and returns an [`AugmentRecord`], and an application half, which is a pure
//! function of the image and the record. Plans store records so replay never
//! touches the generator.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::ImageTensor;

/// Probability that a flip op fires when sampled.
pub const FLIP_PROBABILITY: f64 = 0.5;

const DEFAULT_JITTER: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterStrengths {
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
}

impl JitterStrengths {
    pub fn new(brightness: f64, contrast: f64, saturation: f64) -> Result<Self> {
        for (name, v) in [
            ("brightness", brightness),
            ("contrast", contrast),
            ("saturation", saturation),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Param(format!(
                    "jitter {name} strength {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            brightness,
            contrast,
            saturation,
        })
    }
}

impl Default for JitterStrengths {
    fn default() -> Self {
        Self {
            brightness: DEFAULT_JITTER,
            contrast: DEFAULT_JITTER,
            saturation: DEFAULT_JITTER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlipAxis {
    Horizontal,
    Vertical,
}

/// A configured intermediate augmentation.
///
/// Config spelling: `"channel_permute"`, `"hflip"`, `"vflip"`,
/// `"color_jitter"` (strengths 0.4 each) or
/// `"color_jitter:<brightness>,<contrast>,<saturation>"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AugmentOp {
    ChannelPermute,
    Flip(FlipAxis),
    ColorJitter(JitterStrengths),
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentOp::ChannelPermute => f.write_str("channel_permute"),
            AugmentOp::Flip(FlipAxis::Horizontal) => f.write_str("hflip"),
            AugmentOp::Flip(FlipAxis::Vertical) => f.write_str("vflip"),
            AugmentOp::ColorJitter(s) => write!(
                f,
                "color_jitter:{},{},{}",
                s.brightness, s.contrast, s.saturation
            ),
        }
    }
}

impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((name, args)) => (name.trim(), Some(args)),
            None => (s.trim(), None),
        };
        let op = match name {
            "channel_permute" => AugmentOp::ChannelPermute,
            "hflip" => AugmentOp::Flip(FlipAxis::Horizontal),
            "vflip" => AugmentOp::Flip(FlipAxis::Vertical),
            "color_jitter" => {
                let strengths = match args {
                    None => JitterStrengths::default(),
                    Some(args) => {
                        let vals = args
                            .split(',')
                            .map(|v| v.trim().parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|e| Error::Param(format!("color_jitter strengths: {e}")))?;
                        match vals[..] {
                            [b, c, s] => JitterStrengths::new(b, c, s)?,
                            _ => {
                                return Err(Error::Param(format!(
                                    "color_jitter takes 3 strengths, got {}",
                                    vals.len()
                                )))
                            }
                        }
                    }
                };
                return Ok(AugmentOp::ColorJitter(strengths));
            }
            other => return Err(Error::Param(format!("unknown augment op {other:?}"))),
        };
        match args {
            Some(_) => Err(Error::Param(format!("{name} takes no arguments"))),
            None => Ok(op),
        }
    }
}

impl Serialize for AugmentOp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AugmentOp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where intermediate ops fire relative to mixing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentTiming {
    #[default]
    Before,
    After,
    Both,
}

impl AugmentTiming {
    pub fn before(&self) -> bool {
        matches!(self, Self::Before | Self::Both)
    }

    pub fn after(&self) -> bool {
        matches!(self, Self::After | Self::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JitterKind {
    Brightness,
    Contrast,
    Saturation,
}

/// The sampled randomness of one augmentation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentRecord {
    ChannelPermute {
        permutation: Vec<usize>,
    },
    Flip {
        axis: FlipAxis,
        applied: bool,
    },
    ColorJitter {
        order: Vec<JitterKind>,
        brightness: f64,
        contrast: f64,
        saturation: f64,
    },
}

impl AugmentRecord {
    pub fn sample(op: &AugmentOp, channels: usize, rng: &mut RngStream) -> Self {
        match op {
            AugmentOp::ChannelPermute => AugmentRecord::ChannelPermute {
                permutation: rng.permutation(channels),
            },
            AugmentOp::Flip(axis) => AugmentRecord::Flip {
                axis: *axis,
                applied: rng.next_f64() < FLIP_PROBABILITY,
            },
            AugmentOp::ColorJitter(strengths) => sample_jitter(strengths, rng),
        }
    }

    pub fn apply(&self, img: &ImageTensor) -> Result<ImageTensor> {
        match self {
            AugmentRecord::ChannelPermute { permutation } => {
                apply_channel_permutation(img, permutation)
            }
            AugmentRecord::Flip { axis, applied } => Ok(if *applied {
                flip(img, *axis)
            } else {
                img.clone()
            }),
            AugmentRecord::ColorJitter {
                order,
                brightness,
                contrast,
                saturation,
            } => {
                let mut out = img.clone();
                for kind in order {
                    out = match kind {
                        JitterKind::Brightness => adjust_brightness(&out, *brightness),
                        JitterKind::Contrast => adjust_contrast(&out, *contrast),
                        JitterKind::Saturation => adjust_saturation(&out, *saturation),
                    };
                }
                Ok(out)
            }
        }
    }
}

/// Permutes channels uniformly at random (identity included).
/// Output channel `i` is input channel `permutation[i]`.
pub fn channel_permute(img: &ImageTensor, rng: &mut RngStream) -> (ImageTensor, Vec<usize>) {
    let permutation = rng.permutation(img.channels());
    let out = apply_channel_permutation(img, &permutation).expect("sampled permutation is valid");
    (out, permutation)
}

pub fn apply_channel_permutation(img: &ImageTensor, permutation: &[usize]) -> Result<ImageTensor> {
    let c = img.channels();
    let mut seen = vec![false; c];
    if permutation.len() != c
        || !permutation
            .iter()
            .all(|&p| p < c && !std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::Param(format!(
            "{permutation:?} is not a permutation of {c} channels"
        )));
    }
    let mut data = Vec::with_capacity(img.data().len());
    for &p in permutation {
        data.extend_from_slice(img.plane(p));
    }
    Ok(ImageTensor::from_parts(c, img.height(), img.width(), data))
}

pub fn flip(img: &ImageTensor, axis: FlipAxis) -> ImageTensor {
    let (c, h, w) = img.shape();
    let mut data = Vec::with_capacity(img.data().len());
    for ch in 0..c {
        let plane = img.plane(ch);
        match axis {
            FlipAxis::Horizontal => {
                for row in plane.chunks_exact(w) {
                    data.extend(row.iter().rev());
                }
            }
            FlipAxis::Vertical => {
                for row in plane.chunks_exact(w).rev() {
                    data.extend_from_slice(row);
                }
            }
        }
    }
    ImageTensor::from_parts(c, h, w, data)
}

/// Draws brightness, contrast and saturation factors from `[1 - d, 1 + d]`
/// and a random application order.
pub fn sample_jitter(strengths: &JitterStrengths, rng: &mut RngStream) -> AugmentRecord {
    let mut factor = |d: f64| {
        rng.uniform_range(1.0 - d, 1.0 + d)
            .expect("strength in [0, 1]")
    };
    let brightness = factor(strengths.brightness);
    let contrast = factor(strengths.contrast);
    let saturation = factor(strengths.saturation);
    let mut order = vec![
        JitterKind::Brightness,
        JitterKind::Contrast,
        JitterKind::Saturation,
    ];
    rng.shuffle(&mut order);
    AugmentRecord::ColorJitter {
        order,
        brightness,
        contrast,
        saturation,
    }
}

pub fn color_jitter(
    img: &ImageTensor,
    strengths: &JitterStrengths,
    rng: &mut RngStream,
) -> Result<ImageTensor> {
    sample_jitter(strengths, rng).apply(img)
}

fn map_values(img: &ImageTensor, f: impl Fn(f32) -> f32) -> ImageTensor {
    let data = img.data().iter().map(|&v| f(v).clamp(0.0, 1.0)).collect();
    ImageTensor::from_parts(img.channels(), img.height(), img.width(), data)
}

pub fn adjust_brightness(img: &ImageTensor, factor: f64) -> ImageTensor {
    if factor == 1.0 {
        return img.clone();
    }
    let f = factor as f32;
    map_values(img, |v| v * f)
}

/// Blends toward the image-wide mean of the per-pixel channel average.
pub fn adjust_contrast(img: &ImageTensor, factor: f64) -> ImageTensor {
    if factor == 1.0 {
        return img.clone();
    }
    let mean = (img.data().iter().map(|&v| v as f64).sum::<f64>() / img.data().len() as f64) as f32;
    let f = factor as f32;
    map_values(img, |v| mean + f * (v - mean))
}

/// Blends each pixel toward its channel average. Only defined for 3-channel
/// images; other channel counts pass through.
pub fn adjust_saturation(img: &ImageTensor, factor: f64) -> ImageTensor {
    if factor == 1.0 || img.channels() != 3 {
        return img.clone();
    }
    let f = factor as f32;
    let n = img.plane_len();
    let gray: Vec<f32> = (0..n)
        .map(|i| (img.plane(0)[i] + img.plane(1)[i] + img.plane(2)[i]) / 3.0)
        .collect();
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let g = gray[i % n];
            (g + f * (v - g)).clamp(0.0, 1.0)
        })
        .collect();
    ImageTensor::from_parts(3, img.height(), img.width(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn random_image(c: usize, h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = RngStream::split(seed, 0);
        let data = (0..c * h * w).map(|_| rng.next_f64() as f32).collect();
        ImageTensor::new(c, h, w, data).unwrap()
    }

    fn sorted_bits(v: &[f32]) -> Vec<u32> {
        let mut b: Vec<u32> = v.iter().map(|x| x.to_bits()).collect();
        b.sort_unstable();
        b
    }

    #[test]
    fn parses_op_names() {
        assert_eq!(
            "channel_permute".parse::<AugmentOp>().unwrap(),
            AugmentOp::ChannelPermute
        );
        assert_eq!(
            "vflip".parse::<AugmentOp>().unwrap(),
            AugmentOp::Flip(FlipAxis::Vertical)
        );
        assert_eq!(
            "color_jitter:0.1,0.2,0.3".parse::<AugmentOp>().unwrap(),
            AugmentOp::ColorJitter(JitterStrengths::new(0.1, 0.2, 0.3).unwrap())
        );
        assert!("color_jitter:0.1,2.0,0.3".parse::<AugmentOp>().is_err());
        assert!("color_jitter:0.1".parse::<AugmentOp>().is_err());
        assert!("hflip:1".parse::<AugmentOp>().is_err());
        assert!("autoaugment".parse::<AugmentOp>().is_err());
        for op in ["hflip", "color_jitter:0.4,0.4,0.4", "channel_permute"] {
            assert_eq!(op.parse::<AugmentOp>().unwrap().to_string(), op);
        }
    }

    #[test]
    fn single_channel_permutation_is_identity() {
        let img = random_image(1, 4, 4, 1);
        let mut rng = RngStream::split(0, 0);
        let (out, perm) = channel_permute(&img, &mut rng);
        assert_eq!(perm, vec![0]);
        assert_eq!(out, img);
    }

    #[test]
    fn permutation_moves_planes() {
        let img = random_image(3, 3, 5, 2);
        let out = apply_channel_permutation(&img, &[2, 0, 1]).unwrap();
        assert_eq!(out.plane(0), img.plane(2));
        assert_eq!(out.plane(1), img.plane(0));
        assert_eq!(out.plane(2), img.plane(1));
        assert!(apply_channel_permutation(&img, &[0, 0, 1]).is_err());
        assert!(apply_channel_permutation(&img, &[0, 1]).is_err());
    }

    #[test]
    fn permutations_are_uniform() {
        let img = random_image(3, 1, 1, 3);
        let mut rng = RngStream::split(4, 0);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..60_000 {
            let (out, perm) = channel_permute(&img, &mut rng);
            assert_eq!(sorted_bits(out.data()), sorted_bits(img.data()));
            *counts.entry(perm).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (perm, n) in counts {
            assert!(n.abs_diff(10_000) <= 400, "{perm:?}: {n}");
        }
    }

    #[test]
    fn flips() {
        let img = ImageTensor::new(1, 1, 2, vec![0.25, 0.75]).unwrap();
        assert_eq!(flip(&img, FlipAxis::Horizontal).data(), &[0.75, 0.25]);

        let sym = ImageTensor::new(1, 2, 3, vec![0.1, 0.5, 0.1, 0.9, 0.3, 0.9]).unwrap();
        assert_eq!(flip(&sym, FlipAxis::Horizontal), sym);

        let img = random_image(3, 7, 5, 5);
        for axis in [FlipAxis::Horizontal, FlipAxis::Vertical] {
            let once = flip(&img, axis);
            assert_eq!(sorted_bits(once.data()), sorted_bits(img.data()));
            assert_eq!(flip(&once, axis), img);
        }
        assert_eq!(
            flip(&img, FlipAxis::Vertical).get(1, 0, 2),
            img.get(1, 6, 2)
        );
    }

    #[test]
    fn zero_strength_jitter_is_identity() {
        let img = random_image(3, 6, 6, 6);
        let mut rng = RngStream::split(5, 0);
        let zero = JitterStrengths::new(0.0, 0.0, 0.0).unwrap();
        assert_eq!(color_jitter(&img, &zero, &mut rng).unwrap(), img);
    }

    #[test]
    fn brightness_scales() {
        let img = ImageTensor::filled(3, 2, 2, 0.25).unwrap();
        assert!(adjust_brightness(&img, 2.0)
            .data()
            .iter()
            .all(|&v| v == 0.5));
    }

    #[test]
    fn contrast_matches_per_pixel_oracle() {
        let img = random_image(3, 4, 4, 7);
        let f = 1.7;
        let out = adjust_contrast(&img, f);
        let n = 16;
        let mut mean = 0.0f64;
        for i in 0..n {
            mean += (0..3).map(|c| img.plane(c)[i] as f64).sum::<f64>() / 3.0;
        }
        mean /= n as f64;
        for c in 0..3 {
            for y in 0..4 {
                for x in 0..4 {
                    let v = img.get(c, y, x) as f64;
                    let expected = (mean + f * (v - mean)).clamp(0.0, 1.0);
                    assert!((out.get(c, y, x) as f64 - expected).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn saturation_zero_is_grayscale() {
        let img = random_image(3, 3, 3, 8);
        let out = adjust_saturation(&img, 0.0);
        for i in 0..9 {
            let g = (img.plane(0)[i] + img.plane(1)[i] + img.plane(2)[i]) / 3.0;
            for c in 0..3 {
                assert!((out.plane(c)[i] - g).abs() < 1e-6);
            }
        }
        let gray = random_image(1, 3, 3, 9);
        assert_eq!(adjust_saturation(&gray, 0.0), gray);
    }

    #[test]
    fn jitter_keeps_shape_and_range() {
        let img = random_image(3, 9, 11, 10);
        let mut rng = RngStream::split(6, 0);
        let strong = JitterStrengths::new(1.0, 1.0, 1.0).unwrap();
        for _ in 0..50 {
            let rec = sample_jitter(&strong, &mut rng);
            let out = rec.apply(&img).unwrap();
            assert_eq!(out.shape(), img.shape());
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert_eq!(rec.apply(&img).unwrap(), out);
        }
    }

    #[test]
    fn records_round_trip_through_json() {
        let mut rng = RngStream::split(7, 0);
        for op in [
            AugmentOp::ChannelPermute,
            AugmentOp::Flip(FlipAxis::Horizontal),
            AugmentOp::ColorJitter(JitterStrengths::default()),
        ] {
            let rec = AugmentRecord::sample(&op, 3, &mut rng);
            let json = serde_json::to_string(&rec).unwrap();
            assert_eq!(serde_json::from_str::<AugmentRecord>(&json).unwrap(), rec);
        }
    }
}

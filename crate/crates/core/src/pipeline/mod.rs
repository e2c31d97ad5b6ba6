//! End-to-end application of the crop-and-mix procedure to one sample.
//!
//! [`sample_plan`] draws every random choice for a sample into a [`MixPlan`]
//! without touching pixels; [`execute_plan`] renders a plan. [`apply`] is the
//! two in sequence and [`replay`] is the second alone, so a replayed plan
//! reproduces the original output bit for bit.
//!
//! Draw order within a sample's stream: crop count, crop rects (ascending
//! scale), view order, then per mix step `λ`, box and intermediate-op draws,
//! then after-mix op draws.

mod config;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use config::{ConfigDocument, NumCrops, PipelineConfig};

use crate::augment::AugmentRecord;
use crate::crop::{partition_scale, sample_crops_in, CropRect, CropScaleRange};
use crate::error::{Error, Result};
use crate::mix::{self, ChainPlan, MixStep};
use crate::resize::crop_and_resize;
use crate::rng::RngStream;
use crate::tensor::{validate_values, ImageTensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    pub scale: CropScaleRange,
    pub rect: CropRect,
}

/// The sampled randomness of one sample. Together with the source image and
/// config it determines the output exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub sample_index: u64,
    /// `[C, H, W]` of the source image.
    pub source_shape: [usize; 3],
    pub baseline_rrc: bool,
    pub n: usize,
    /// `None` when no mixing happens (`n == 1`).
    pub alpha_effective: Option<f64>,
    /// In ascending scale order; view `i` is rendered from `crops[i]`.
    pub crops: Vec<CropRecord>,
    pub view_order: Vec<usize>,
    pub steps: Vec<MixStep>,
    pub after_ops: Vec<AugmentRecord>,
    /// Per-view convex weights, mixup chains only.
    pub effective_weights: Option<Vec<f64>>,
}

impl MixPlan {
    pub fn chain(&self) -> ChainPlan {
        ChainPlan {
            order: self.view_order.clone(),
            steps: self.steps.clone(),
            after_ops: self.after_ops.clone(),
        }
    }
}

/// Wall time spent per stage. `decode` and `encode` are filled in by callers
/// that do file I/O.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub decode: Duration,
    pub crop: Duration,
    pub resize: Duration,
    pub mix: Duration,
    pub encode: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.decode + self.crop + self.resize + self.mix + self.encode
    }

    pub fn add(&mut self, other: &StageTimes) {
        self.decode += other.decode;
        self.crop += other.crop;
        self.resize += other.resize;
        self.mix += other.mix;
        self.encode += other.encode;
    }
}

/// The scale range assigned to each of `n` crops.
pub fn crop_ranges(cfg: &PipelineConfig, n: usize) -> Result<Vec<CropScaleRange>> {
    if cfg.single_scale || cfg.baseline_rrc {
        Ok(vec![cfg.crop_scale; n])
    } else {
        partition_scale(cfg.crop_scale, n)
    }
}

/// Draws the plan for `sample_index` on a source of shape `(C, H, W)`.
pub fn sample_plan(
    source_shape: (usize, usize, usize),
    cfg: &PipelineConfig,
    root_seed: u64,
    sample_index: u64,
) -> Result<MixPlan> {
    cfg.validate()?;
    let (c, h, w) = source_shape;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::Shape(format!("empty source {c}x{h}x{w}")));
    }
    let mut rng = RngStream::split(root_seed, sample_index);

    let choices = cfg.num_crops.choices();
    let drawn = choices[rng.below(choices.len())];
    let n = if cfg.baseline_rrc { 1 } else { drawn };

    let ranges = crop_ranges(cfg, n)?;
    let crops = sample_crops_in(w, h, &ranges, cfg.aspect_ratio, &mut rng)
        .into_iter()
        .map(|(scale, rect)| CropRecord { scale, rect })
        .collect();

    let alpha = cfg.beta_params(n)?;
    let chain = mix::plan_chain(
        n,
        c,
        cfg.resolution,
        cfg.resolution,
        cfg.mix_mode,
        alpha,
        &cfg.intermediate,
        cfg.timing,
        &mut rng,
    )?;
    let effective_weights = if n > 1 {
        mix::effective_weights(&chain)
    } else {
        None
    };
    Ok(MixPlan {
        sample_index,
        source_shape: [c, h, w],
        baseline_rrc: cfg.baseline_rrc,
        n,
        alpha_effective: (n > 1).then(|| alpha.alpha()),
        crops,
        view_order: chain.order,
        steps: chain.steps,
        after_ops: chain.after_ops,
        effective_weights,
    })
}

/// Renders the resized views of a plan, in crop order.
pub fn render_views(
    src: &ImageTensor,
    cfg: &PipelineConfig,
    plan: &MixPlan,
) -> Result<Vec<ImageTensor>> {
    plan.crops
        .iter()
        .map(|c| {
            crop_and_resize(
                src,
                c.rect,
                cfg.resolution,
                cfg.resolution,
                cfg.interpolation,
            )
        })
        .collect()
}

/// Renders a plan, recording per-stage time into `times`.
pub fn execute_plan_timed(
    src: &ImageTensor,
    cfg: &PipelineConfig,
    plan: &MixPlan,
    times: &mut StageTimes,
) -> Result<ImageTensor> {
    let t = Instant::now();
    let views = render_views(src, cfg, plan)?;
    times.resize += t.elapsed();

    let t = Instant::now();
    let out = mix::execute_chain(&views, &plan.chain())?;
    times.mix += t.elapsed();
    Ok(out)
}

pub fn execute_plan(
    src: &ImageTensor,
    cfg: &PipelineConfig,
    plan: &MixPlan,
) -> Result<ImageTensor> {
    execute_plan_timed(src, cfg, plan, &mut StageTimes::default())
}

/// Samples and renders one sample; records plan-sampling time as the crop
/// stage.
pub fn apply_timed(
    src: &ImageTensor,
    cfg: &PipelineConfig,
    root_seed: u64,
    sample_index: u64,
    times: &mut StageTimes,
) -> Result<(ImageTensor, MixPlan)> {
    let t = Instant::now();
    let plan = sample_plan(src.shape(), cfg, root_seed, sample_index)?;
    times.crop += t.elapsed();
    let out = execute_plan_timed(src, cfg, &plan, times)?;
    Ok((out, plan))
}

pub fn apply(
    src: &ImageTensor,
    cfg: &PipelineConfig,
    root_seed: u64,
    sample_index: u64,
) -> Result<(ImageTensor, MixPlan)> {
    apply_timed(
        src,
        cfg,
        root_seed,
        sample_index,
        &mut StageTimes::default(),
    )
}

/// Checks that `plan` could have been produced by `cfg` for `src`.
pub fn check_plan(src: &ImageTensor, cfg: &PipelineConfig, plan: &MixPlan) -> Result<()> {
    cfg.validate()?;
    let bad = |msg: String| Err(Error::Replay(msg));
    let (c, h, w) = src.shape();
    if plan.source_shape != [c, h, w] {
        return bad(format!(
            "plan was made for a {:?} source, got [{c}, {h}, {w}]",
            plan.source_shape
        ));
    }
    if plan.baseline_rrc != cfg.baseline_rrc {
        return bad("baseline_rrc flag differs from config".into());
    }
    if plan.n == 0 || plan.crops.len() != plan.n {
        return bad(format!(
            "n = {} but {} crops recorded",
            plan.n,
            plan.crops.len()
        ));
    }
    if plan.baseline_rrc && plan.n != 1 {
        return bad(format!("baseline plan with n = {}", plan.n));
    }
    if !plan.baseline_rrc && !cfg.num_crops.choices().contains(&plan.n) {
        return bad(format!("n = {} is not an allowed crop count", plan.n));
    }
    let ranges = crop_ranges(cfg, plan.n)?;
    for (i, (rec, range)) in plan.crops.iter().zip(&ranges).enumerate() {
        if rec.scale != *range {
            return bad(format!(
                "crop {i} scale {} but config assigns {range}",
                rec.scale
            ));
        }
        if !rec.rect.fits(w, h) {
            return bad(format!("crop {i} rect {} outside {w}x{h} source", rec.rect));
        }
    }
    mix::validate_chain(&plan.chain(), plan.n, cfg.mix_mode)?;
    let expected_alpha = (plan.n > 1).then(|| cfg.alpha_effective(plan.n));
    if plan.alpha_effective != expected_alpha {
        return bad(format!(
            "alpha {:?} but config gives {expected_alpha:?}",
            plan.alpha_effective
        ));
    }
    Ok(())
}

/// Re-renders a recorded plan without drawing any randomness.
pub fn replay(src: &ImageTensor, cfg: &PipelineConfig, plan: &MixPlan) -> Result<ImageTensor> {
    check_plan(src, cfg, plan)?;
    execute_plan(src, cfg, plan)
}

/// A config bound to a root seed, taking images as flat `(C, H, W)` buffers.
/// This is the surface host-language bindings wrap: it validates inputs with
/// field names and forwards to [`apply`] and [`sample_plan`].
#[derive(Clone, Debug)]
pub struct SeededPipeline {
    config: PipelineConfig,
    root_seed: u64,
}

impl SeededPipeline {
    pub fn new(config: PipelineConfig, root_seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, root_seed })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    fn tensor_from(data: &[f32], shape: &[usize]) -> Result<ImageTensor> {
        let &[c, h, w] = shape else {
            return Err(Error::Shape(format!(
                "image: expected a 3-d (C, H, W) shape, got {} dims",
                shape.len()
            )));
        };
        if c * h * w != data.len() {
            return Err(Error::Shape(format!(
                "image: shape {shape:?} needs {} values, buffer has {}",
                c * h * w,
                data.len()
            )));
        }
        validate_values("image", data)?;
        ImageTensor::new(c, h, w, data.to_vec())
    }

    pub fn apply(&self, image: &ImageTensor, sample_index: u64) -> Result<(ImageTensor, MixPlan)> {
        apply(image, &self.config, self.root_seed, sample_index)
    }

    /// Output is a fresh `(C, resolution, resolution)` buffer.
    pub fn apply_buffer(
        &self,
        data: &[f32],
        shape: &[usize],
        sample_index: u64,
    ) -> Result<Vec<f32>> {
        let src = Self::tensor_from(data, shape)?;
        Ok(self.apply(&src, sample_index)?.0.into_data())
    }

    /// The plan as the JSON value stored under `plan` in sample manifests.
    pub fn plan_buffer(
        &self,
        data: &[f32],
        shape: &[usize],
        sample_index: u64,
    ) -> Result<serde_json::Value> {
        let src = Self::tensor_from(data, shape)?;
        let plan = sample_plan(src.shape(), &self.config, self.root_seed, sample_index)?;
        Ok(serde_json::to_value(plan)?)
    }
}

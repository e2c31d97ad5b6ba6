//! Mixup and CutMix combiners and the sequential mixing chain.
//!
//! A chain over `N` views picks the views in a random order without
//! replacement. Step 1 mixes the first two picks; every later step mixes the
//! running result (left operand) with the next pick (right operand), each with
//! a fresh `λ ~ Beta(α, α)`. All randomness is drawn up front into a
//! [`ChainPlan`], which [`execute_chain`] then applies to pixels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentOp, AugmentRecord, AugmentTiming};
use crate::crop::CropRect;
use crate::error::{Error, Result};
use crate::rng::{BetaParams, RngStream};
use crate::tensor::ImageTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixMode {
    Mixup,
    Cutmix,
}

impl MixMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MixMode::Mixup => "mixup",
            MixMode::Cutmix => "cutmix",
        }
    }
}

impl fmt::Display for MixMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixup" => Ok(MixMode::Mixup),
            "cutmix" => Ok(MixMode::Cutmix),
            other => Err(Error::Param(format!("unknown mix mode {other:?}"))),
        }
    }
}

/// CutMix box: real-valued center and size, plus the integer rect left after
/// intersecting with the frame. The rect may be empty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixBox {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub h: f64,
    pub rect: CropRect,
    pub effective_fraction: f64,
}

/// An input to a mix step: one of the cropped views, or the output of an
/// earlier step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operand {
    View(usize),
    Mix(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixStep {
    pub left: Operand,
    pub right: Operand,
    pub lambda: f64,
    pub mode: MixMode,
    #[serde(rename = "box")]
    pub mix_box: Option<MixBox>,
    /// The smaller-weight operand, when intermediate ops fired on it.
    pub permuted: Option<Operand>,
    pub ops: Vec<AugmentRecord>,
}

impl MixStep {
    /// Share of the output taken from the left operand: `λ` for mixup, the
    /// pixel fraction outside the box for cutmix.
    pub fn left_weight(&self) -> f64 {
        match &self.mix_box {
            Some(b) => 1.0 - b.effective_fraction,
            None => self.lambda,
        }
    }
}

/// Everything random about one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub order: Vec<usize>,
    pub steps: Vec<MixStep>,
    pub after_ops: Vec<AugmentRecord>,
}

/// `λ·x + (1-λ)·y` per pixel.
pub fn mixup(x: &ImageTensor, y: &ImageTensor, lambda: f64) -> Result<ImageTensor> {
    x.check_same_shape(y)?;
    check_lambda(lambda)?;
    let r = 1.0 - lambda;
    // f64 accumulation, one rounding to f32
    let data = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| ((lambda * a as f64 + r * b as f64) as f32).clamp(0.0, 1.0))
        .collect();
    Ok(ImageTensor::from_parts(
        x.channels(),
        x.height(),
        x.width(),
        data,
    ))
}

/// Samples a box with center uniform over the frame and size
/// `W·√λ × H·√λ`, then rounds its edges and clips it to the frame.
pub fn sample_cutmix_box(
    frame_w: usize,
    frame_h: usize,
    lambda: f64,
    rng: &mut RngStream,
) -> Result<MixBox> {
    check_lambda(lambda)?;
    let a = rng.uniform_range(0.0, frame_w as f64)?;
    let b = rng.uniform_range(0.0, frame_h as f64)?;
    Ok(box_at(frame_w, frame_h, lambda, a, b))
}

/// The box of weight `lambda` centered at `(a, b)`.
pub fn box_at(frame_w: usize, frame_h: usize, lambda: f64, a: f64, b: f64) -> MixBox {
    let side = lambda.sqrt();
    let w = frame_w as f64 * side;
    let h = frame_h as f64 * side;
    let edge = |v: f64, max: usize| (v.round().max(0.0) as usize).min(max);
    let (x0, x1) = (edge(a - w / 2.0, frame_w), edge(a + w / 2.0, frame_w));
    let (y0, y1) = (edge(b - h / 2.0, frame_h), edge(b + h / 2.0, frame_h));
    let rect = CropRect {
        x: x0,
        y: y0,
        w: x1 - x0,
        h: y1 - y0,
    };
    MixBox {
        a,
        b,
        w,
        h,
        rect,
        effective_fraction: rect.area() as f64 / (frame_w * frame_h) as f64,
    }
}

/// Pixels inside the box come from `y`, all others from `x`.
pub fn cutmix(x: &ImageTensor, y: &ImageTensor, mix_box: &MixBox) -> Result<ImageTensor> {
    x.check_same_shape(y)?;
    let r = mix_box.rect;
    let (c, h, w) = x.shape();
    if r.x + r.w > w || r.y + r.h > h {
        return Err(Error::Bounds(format!("{r} (frame {w}x{h})")));
    }
    let mut data = x.data().to_vec();
    for ch in 0..c {
        for row in r.y..r.y + r.h {
            let start = (ch * h + row) * w + r.x;
            data[start..start + r.w].copy_from_slice(&y.data()[start..start + r.w]);
        }
    }
    Ok(ImageTensor::from_parts(c, h, w, data))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Param(format!(
            "mixing weight {lambda} outside [0, 1]"
        )))
    }
}

/// Draws the full randomness of a chain over `n` views of shape
/// `(channels, frame_h, frame_w)`.
///
/// Draw order: view order, then per step `λ`, the cutmix box, and the
/// intermediate-op records, then the after-mix op records. With `timing`
/// covering "before", the ops fire on the smaller-weight operand of each
/// step (the right operand when the left weight is at least 0.5). A chain of
/// one view draws nothing.
#[allow(clippy::too_many_arguments)]
pub fn plan_chain(
    n: usize,
    channels: usize,
    frame_w: usize,
    frame_h: usize,
    mode: MixMode,
    alpha: BetaParams,
    ops: &[AugmentOp],
    timing: AugmentTiming,
    rng: &mut RngStream,
) -> Result<ChainPlan> {
    if n == 0 {
        return Err(Error::Param("mixing chain needs at least one view".into()));
    }
    if n == 1 {
        return Ok(ChainPlan {
            order: vec![0],
            ..ChainPlan::default()
        });
    }
    let order = rng.permutation(n);
    let mut steps = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let left = if k == 0 {
            Operand::View(order[0])
        } else {
            Operand::Mix(k - 1)
        };
        let right = Operand::View(order[k + 1]);
        let lambda = rng.beta(alpha);
        let mix_box = match mode {
            MixMode::Mixup => None,
            MixMode::Cutmix => Some(sample_cutmix_box(frame_w, frame_h, lambda, rng)?),
        };
        let mut step = MixStep {
            left,
            right,
            lambda,
            mode,
            mix_box,
            permuted: None,
            ops: Vec::new(),
        };
        if timing.before() && !ops.is_empty() {
            step.permuted = Some(if step.left_weight() >= 0.5 {
                right
            } else {
                left
            });
            step.ops = ops
                .iter()
                .map(|op| AugmentRecord::sample(op, channels, rng))
                .collect();
        }
        steps.push(step);
    }
    let after_ops = if timing.after() {
        ops.iter()
            .map(|op| AugmentRecord::sample(op, channels, rng))
            .collect()
    } else {
        Vec::new()
    };
    Ok(ChainPlan {
        order,
        steps,
        after_ops,
    })
}

/// Checks that `plan` is a well-formed chain over `n` views in `mode`.
pub fn validate_chain(plan: &ChainPlan, n: usize, mode: MixMode) -> Result<()> {
    let bad = |msg: String| Err(Error::Replay(msg));
    let mut sorted = plan.order.clone();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return bad(format!(
            "view order {:?} is not a permutation of {n} views",
            plan.order
        ));
    }
    if plan.steps.len() != n - 1 {
        return bad(format!(
            "{} mix steps recorded for {n} views (expected {})",
            plan.steps.len(),
            n - 1
        ));
    }
    if n == 1 && !plan.after_ops.is_empty() {
        return bad("single-view chain carries after-mix ops".into());
    }
    for (k, step) in plan.steps.iter().enumerate() {
        let left = if k == 0 {
            Operand::View(plan.order[0])
        } else {
            Operand::Mix(k - 1)
        };
        if step.left != left || step.right != Operand::View(plan.order[k + 1]) {
            return bad(format!("step {k} operands disagree with the view order"));
        }
        if step.mode != mode {
            return bad(format!(
                "step {k} mode {} but config says {mode}",
                step.mode
            ));
        }
        if step.mix_box.is_some() != (mode == MixMode::Cutmix) {
            return bad(format!("step {k}: box must be present iff mode is cutmix"));
        }
        if !(0.0..=1.0).contains(&step.lambda) {
            return bad(format!("step {k}: lambda {} outside [0, 1]", step.lambda));
        }
        if step.ops.is_empty() != step.permuted.is_none() {
            return bad(format!("step {k}: ops and permuted operand disagree"));
        }
        if let Some(p) = step.permuted {
            if p != step.left && p != step.right {
                return bad(format!("step {k}: permuted operand {p:?} is not an input"));
            }
        }
    }
    Ok(())
}

/// Applies a chain plan to its views.
pub fn execute_chain(views: &[ImageTensor], plan: &ChainPlan) -> Result<ImageTensor> {
    let first = views
        .first()
        .ok_or_else(|| Error::Param("mixing chain needs at least one view".into()))?;
    if let Some(v) = views.iter().find(|v| !v.same_shape(first)) {
        first.check_same_shape(v)?;
    }
    let mode = plan.steps.first().map_or(MixMode::Mixup, |s| s.mode);
    validate_chain(plan, views.len(), mode)?;
    if views.len() == 1 {
        return Ok(first.clone());
    }

    let mut running: Option<ImageTensor> = None;
    for step in &plan.steps {
        let mut left = match running.take() {
            Some(img) => img,
            None => views[plan.order[0]].clone(),
        };
        let Operand::View(r) = step.right else {
            unreachable!("validated");
        };
        let mut right = views[r].clone();
        if let Some(target) = step.permuted {
            let img = if target == step.right {
                &mut right
            } else {
                &mut left
            };
            for op in &step.ops {
                *img = op.apply(img)?;
            }
        }
        running = Some(match &step.mix_box {
            None => mixup(&left, &right, step.lambda)?,
            Some(b) => cutmix(&left, &right, b)?,
        });
    }
    let mut out = running.expect("n >= 2");
    for op in &plan.after_ops {
        out = op.apply(&out)?;
    }
    Ok(out)
}

/// Samples and applies a chain in one call.
pub fn mix_chain(
    views: &[ImageTensor],
    mode: MixMode,
    alpha: BetaParams,
    ops: &[AugmentOp],
    timing: AugmentTiming,
    rng: &mut RngStream,
) -> Result<(ImageTensor, ChainPlan)> {
    let first = views
        .first()
        .ok_or_else(|| Error::Param("mixing chain needs at least one view".into()))?;
    let (c, h, w) = first.shape();
    let plan = plan_chain(views.len(), c, w, h, mode, alpha, ops, timing, rng)?;
    let out = execute_chain(views, &plan)?;
    Ok((out, plan))
}

/// Total convex weight each view contributes to a mixup chain, indexed by
/// view id. Cutmix chains have no per-view scalar weight and return `None`.
pub fn effective_weights(plan: &ChainPlan) -> Option<Vec<f64>> {
    let n = plan.order.len();
    if plan.steps.iter().any(|s| s.mode != MixMode::Mixup) {
        return None;
    }
    let mut weights = vec![0.0; n];
    weights[plan.order[0]] = 1.0;
    for (k, step) in plan.steps.iter().enumerate() {
        for &v in &plan.order[..=k] {
            weights[v] *= step.lambda;
        }
        weights[plan.order[k + 1]] = 1.0 - step.lambda;
    }
    Some(weights)
}

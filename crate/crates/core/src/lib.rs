//! Multi-scale crop-and-mix image preprocessing.
//!
//! A source image is cropped `N` times, each crop drawn from its own slice of
//! the crop-scale range, the crops are resized to a common resolution, and
//! the resulting views are folded into one image by a chain of `N - 1`
//! Mixup or CutMix steps. With `N = 1` (or `baseline_rrc`) this is plain
//! random-resized-crop.
//!
//! All randomness for a sample comes from a stream keyed by
//! `(root_seed, sample_index)` and is recorded in a [`MixPlan`], so outputs do
//! not depend on thread count and can be replayed exactly.

pub mod augment;
pub mod crop;
pub mod dataset;
mod error;
pub mod mix;
pub mod pipeline;
pub mod resize;
pub mod rng;
pub mod tensor;

pub use augment::{AugmentOp, AugmentRecord, AugmentTiming, FlipAxis, JitterStrengths};
pub use crop::{AspectRatioRange, CropRect, CropScaleRange};
pub use dataset::{OutputFormat, SampleManifest};
pub use error::{Error, Result};
pub use mix::{MixBox, MixMode, MixStep, Operand};
pub use pipeline::{MixPlan, NumCrops, PipelineConfig, SeededPipeline, StageTimes};
pub use resize::InterpolationMode;
pub use rng::{BetaParams, RngStream};
pub use tensor::ImageTensor;

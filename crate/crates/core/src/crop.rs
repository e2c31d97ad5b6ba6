//! Random-resized-crop parameter sampling and scale partitioning.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const MAX_ATTEMPTS: usize = 10;

/// Interval of crop area as a fraction of the source area.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropScaleRange {
    pub lo: f64,
    pub hi: f64,
}

impl CropScaleRange {
    /// Accepts `0 < lo <= hi <= 1`. A degenerate `lo == hi` pins the area
    /// fraction; pipeline configs additionally require `lo < hi`.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo > 0.0 && lo <= hi && hi <= 1.0 {
            Ok(Self { lo, hi })
        } else {
            Err(Error::Param(format!(
                "crop scale ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
            )))
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Half-open membership, closed at `hi` when `closed_hi` is set (the last
    /// range of a partition).
    pub fn contains(&self, v: f64, closed_hi: bool) -> bool {
        v >= self.lo && (v < self.hi || (closed_hi && v == self.hi))
    }

    /// Membership widened by a relative `slack` on both ends.
    pub fn contains_with_slack(&self, v: f64, slack: f64) -> bool {
        v >= self.lo * (1.0 - slack) && v <= self.hi * (1.0 + slack)
    }
}

impl fmt::Display for CropScaleRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Interval of crop width/height ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspectRatioRange {
    pub lo: f64,
    pub hi: f64,
}

impl AspectRatioRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo > 0.0 && lo <= hi && hi.is_finite() {
            Ok(Self { lo, hi })
        } else {
            Err(Error::Param(format!(
                "aspect ratio ({lo}, {hi}) must satisfy 0 < lo <= hi"
            )))
        }
    }
}

impl Default for AspectRatioRange {
    fn default() -> Self {
        Self {
            lo: 3.0 / 4.0,
            hi: 4.0 / 3.0,
        }
    }
}

/// Pixel rectangle inside a source frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl CropRect {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x: 0,
            y: 0,
            w: width,
            h: height,
        }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x + self.w <= width && self.y + self.h <= height
    }

    pub fn area_fraction(&self, width: usize, height: usize) -> f64 {
        self.area() as f64 / (width * height) as f64
    }
}

impl fmt::Display for CropRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.w, self.h, self.x, self.y)
    }
}

/// Splits `whole` into `n` equal, contiguous sub-ranges in ascending order.
/// Adjacent ranges share their boundary; the last one ends exactly at
/// `whole.hi`.
pub fn partition_scale(whole: CropScaleRange, n: usize) -> Result<Vec<CropScaleRange>> {
    if n == 0 {
        return Err(Error::Param(
            "cannot partition a scale range into 0 parts".into(),
        ));
    }
    let step = whole.width() / n as f64;
    let bound = |i: usize| {
        if i == n {
            whole.hi
        } else {
            whole.lo + i as f64 * step
        }
    };
    Ok((0..n)
        .map(|i| CropScaleRange {
            lo: bound(i),
            hi: bound(i + 1),
        })
        .collect())
}

/// Samples one crop rectangle.
///
/// Draws an area uniformly from `scale` and a log-uniform aspect ratio from
/// `ratio`, retrying up to ten times until the rounded rect fits. If none
/// fits, returns a centered crop at the last drawn area, with the ratio
/// clamped toward the source's own ratio and the size clamped to the frame.
pub fn sample_crop(
    src_w: usize,
    src_h: usize,
    scale: CropScaleRange,
    ratio: AspectRatioRange,
    rng: &mut RngStream,
) -> CropRect {
    assert!(src_w >= 1 && src_h >= 1, "empty source frame");
    let area = (src_w * src_h) as f64;
    let (log_lo, log_hi) = (ratio.lo.ln(), ratio.hi.ln());
    let mut target = area * scale.lo;

    for _ in 0..MAX_ATTEMPTS {
        target = area * rng.uniform_range(scale.lo, scale.hi).expect("valid scale");
        let r = rng
            .uniform_range(log_lo, log_hi)
            .expect("valid ratio")
            .exp();
        let w = (target * r).sqrt().round() as usize;
        let h = (target / r).sqrt().round() as usize;
        if (1..=src_w).contains(&w) && (1..=src_h).contains(&h) {
            let x = rng.int_inclusive(0, src_w - w);
            let y = rng.int_inclusive(0, src_h - h);
            return CropRect { x, y, w, h };
        }
    }

    let r = (src_w as f64 / src_h as f64).clamp(ratio.lo, ratio.hi);
    let mut w = (target * r).sqrt();
    let mut h = (target / r).sqrt();
    if w > src_w as f64 {
        w = src_w as f64;
        h = w / r;
    }
    if h > src_h as f64 {
        h = src_h as f64;
        w = h * r;
    }
    let w = (w.round() as usize).clamp(1, src_w);
    let h = (h.round() as usize).clamp(1, src_h);
    CropRect {
        x: (src_w - w) / 2,
        y: (src_h - h) / 2,
        w,
        h,
    }
}

/// Samples one rect per range, in the order given.
pub fn sample_crops_in(
    src_w: usize,
    src_h: usize,
    ranges: &[CropScaleRange],
    ratio: AspectRatioRange,
    rng: &mut RngStream,
) -> Vec<(CropScaleRange, CropRect)> {
    ranges
        .iter()
        .map(|&range| (range, sample_crop(src_w, src_h, range, ratio, rng)))
        .collect()
}

/// Partitions `whole` into `n` ranges and samples one crop per range, from
/// the smallest scale up.
pub fn sample_n_crops(
    src_w: usize,
    src_h: usize,
    whole: CropScaleRange,
    ratio: AspectRatioRange,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<(CropScaleRange, CropRect)>> {
    let ranges = partition_scale(whole, n)?;
    Ok(sample_crops_in(src_w, src_h, &ranges, ratio, rng))
}

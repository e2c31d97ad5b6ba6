//! Nearest, bilinear, and bicubic resampling.
//!
//! Sample positions use half-pixel centers, `src = (dst + 0.5) * scale - 0.5`,
//! and taps that fall outside the sampled region repeat its edge pixels.
//! Interpolated values are accumulated as offsets from a reference tap, so a
//! constant region resamples to exactly the same constant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crop::CropRect;
use crate::error::{Error, Result};
use crate::tensor::ImageTensor;

const BICUBIC_A: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolationMode {
    Nearest,
    Bilinear,
    Bicubic,
}

impl InterpolationMode {
    pub const ALL: [InterpolationMode; 3] = [Self::Nearest, Self::Bilinear, Self::Bicubic];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nearest => "nearest",
            Self::Bilinear => "bilinear",
            Self::Bicubic => "bicubic",
        }
    }
}

impl fmt::Display for InterpolationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterpolationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Self::Nearest),
            "bilinear" => Ok(Self::Bilinear),
            "bicubic" => Ok(Self::Bicubic),
            other => Err(Error::Param(format!(
                "unknown interpolation mode {other:?}"
            ))),
        }
    }
}

/// Keys cubic convolution kernel.
fn keys_cubic(x: f64) -> f64 {
    let a = BICUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Per-output-sample taps along one axis. Indices are relative to the start
/// of the sampled region and already clamped to it.
struct AxisTaps {
    width: usize,
    reference: Vec<usize>,
    index: Vec<[usize; 4]>,
    weight: Vec<[f32; 4]>,
}

impl AxisTaps {
    fn new(mode: InterpolationMode, len_in: usize, len_out: usize) -> Self {
        let scale = len_in as f64 / len_out as f64;
        let last = len_in as isize - 1;
        let clamp = |i: isize| i.clamp(0, last) as usize;
        let width = match mode {
            InterpolationMode::Nearest => 1,
            InterpolationMode::Bilinear => 2,
            InterpolationMode::Bicubic => 4,
        };
        let mut taps = AxisTaps {
            width,
            reference: Vec::with_capacity(len_out),
            index: Vec::with_capacity(len_out),
            weight: Vec::with_capacity(len_out),
        };
        for d in 0..len_out {
            let center = (d as f64 + 0.5) * scale;
            let (index, weight, reference) = match mode {
                InterpolationMode::Nearest => {
                    let i = clamp(center.floor() as isize);
                    ([i, 0, 0, 0], [1.0, 0.0, 0.0, 0.0], 0)
                }
                InterpolationMode::Bilinear => {
                    let s = center - 0.5;
                    let i0 = s.floor();
                    let t = s - i0;
                    let i0 = i0 as isize;
                    (
                        [clamp(i0), clamp(i0 + 1), 0, 0],
                        [(1.0 - t) as f32, t as f32, 0.0, 0.0],
                        0,
                    )
                }
                InterpolationMode::Bicubic => {
                    let s = center - 0.5;
                    let i0 = s.floor();
                    let t = s - i0;
                    let i0 = i0 as isize;
                    let w = [
                        keys_cubic(t + 1.0),
                        keys_cubic(t),
                        keys_cubic(1.0 - t),
                        keys_cubic(2.0 - t),
                    ];
                    (
                        [clamp(i0 - 1), clamp(i0), clamp(i0 + 1), clamp(i0 + 2)],
                        w.map(|v| v as f32),
                        if t < 0.5 { 1 } else { 2 },
                    )
                }
            };
            taps.index.push(index);
            taps.weight.push(weight);
            taps.reference.push(reference);
        }
        taps
    }

    #[inline]
    fn combine(&self, d: usize, fetch: impl Fn(usize) -> f32) -> f32 {
        let idx = &self.index[d];
        match self.width {
            1 => fetch(idx[0]),
            2 => {
                let (a, b) = (fetch(idx[0]), fetch(idx[1]));
                let v = a + self.weight[d][1] * (b - a);
                v.clamp(a.min(b), a.max(b))
            }
            _ => {
                let r = self.reference[d];
                let base = fetch(idx[r]);
                let w = &self.weight[d];
                let mut acc = 0.0f32;
                for k in 0..4 {
                    if k != r {
                        acc += w[k] * (fetch(idx[k]) - base);
                    }
                }
                base + acc
            }
        }
    }
}

fn check_out_dims(out_w: usize, out_h: usize) -> Result<()> {
    if out_w == 0 || out_h == 0 {
        Err(Error::Param(format!(
            "output size must be >= 1, got {out_w}x{out_h}"
        )))
    } else {
        Ok(())
    }
}

/// Resamples `src` to `(C, out_h, out_w)`.
pub fn resize(
    src: &ImageTensor,
    out_w: usize,
    out_h: usize,
    mode: InterpolationMode,
) -> Result<ImageTensor> {
    check_out_dims(out_w, out_h)?;
    Ok(resample_region(
        src,
        CropRect::full(src.width(), src.height()),
        out_w,
        out_h,
        mode,
    ))
}

/// Resamples the `rect` region of `src` in one pass, without materializing
/// the crop. Value-identical to [`extract`] followed by [`resize`].
pub fn crop_and_resize(
    src: &ImageTensor,
    rect: CropRect,
    out_w: usize,
    out_h: usize,
    mode: InterpolationMode,
) -> Result<ImageTensor> {
    check_out_dims(out_w, out_h)?;
    if !rect.fits(src.width(), src.height()) {
        return Err(Error::Bounds(format!(
            "{rect} (frame {}x{})",
            src.width(),
            src.height()
        )));
    }
    Ok(resample_region(src, rect, out_w, out_h, mode))
}

/// Copies the `rect` region out of `src`.
pub fn extract(src: &ImageTensor, rect: CropRect) -> Result<ImageTensor> {
    if !rect.fits(src.width(), src.height()) {
        return Err(Error::Bounds(format!(
            "{rect} (frame {}x{})",
            src.width(),
            src.height()
        )));
    }
    let mut data = Vec::with_capacity(src.channels() * rect.area());
    for c in 0..src.channels() {
        let plane = src.plane(c);
        for y in rect.y..rect.y + rect.h {
            let row = y * src.width() + rect.x;
            data.extend_from_slice(&plane[row..row + rect.w]);
        }
    }
    Ok(ImageTensor::from_parts(
        src.channels(),
        rect.h,
        rect.w,
        data,
    ))
}

fn resample_region(
    src: &ImageTensor,
    rect: CropRect,
    out_w: usize,
    out_h: usize,
    mode: InterpolationMode,
) -> ImageTensor {
    let channels = src.channels();
    let src_w = src.width();
    let xt = AxisTaps::new(mode, rect.w, out_w);
    let yt = AxisTaps::new(mode, rect.h, out_h);
    let mut out = vec![0.0f32; channels * out_w * out_h];

    if mode == InterpolationMode::Nearest {
        for c in 0..channels {
            let plane = src.plane(c);
            let dst = &mut out[c * out_w * out_h..(c + 1) * out_w * out_h];
            for (oy, dst_row) in dst.chunks_exact_mut(out_w).enumerate() {
                let row = (rect.y + yt.index[oy][0]) * src_w + rect.x;
                let src_row = &plane[row..row + rect.w];
                for (ox, v) in dst_row.iter_mut().enumerate() {
                    *v = src_row[xt.index[ox][0]];
                }
            }
        }
        return ImageTensor::from_parts(channels, out_h, out_w, out);
    }

    // Horizontal pass over the region rows the vertical taps touch.
    let mut needed = vec![false; rect.h];
    for oy in 0..out_h {
        for k in 0..yt.width {
            needed[yt.index[oy][k]] = true;
        }
    }
    let mut tmp = vec![0.0f32; rect.h * out_w];
    for c in 0..channels {
        let plane = src.plane(c);
        for (ry, tmp_row) in tmp.chunks_exact_mut(out_w).enumerate() {
            if !needed[ry] {
                continue;
            }
            let row = (rect.y + ry) * src_w + rect.x;
            let src_row = &plane[row..row + rect.w];
            for (ox, v) in tmp_row.iter_mut().enumerate() {
                *v = xt.combine(ox, |i| src_row[i]);
            }
        }

        let dst = &mut out[c * out_w * out_h..(c + 1) * out_w * out_h];
        for (oy, dst_row) in dst.chunks_exact_mut(out_w).enumerate() {
            for (ox, v) in dst_row.iter_mut().enumerate() {
                *v = yt.combine(oy, |i| tmp[i * out_w + ox]).clamp(0.0, 1.0);
            }
        }
    }
    ImageTensor::from_parts(channels, out_h, out_w, out)
}

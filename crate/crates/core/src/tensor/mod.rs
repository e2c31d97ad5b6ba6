//! Channel-major `f32` image tensors and the raw `.cmtx` file format.

mod raw;

pub use raw::{raw_len, read_raw, write_raw, RAW_HEADER_LEN, RAW_MAGIC, RAW_VERSION};

use crate::error::{Error, Result};

/// An image of shape `(C, H, W)` with values in `[0, 1]`, stored channel by
/// channel, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    /// Builds a tensor, checking the length and that every value is finite
    /// and inside `[0, 1]`.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(channels, height, width)?;
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data has {} values, expected {channels}x{height}x{width} = {expected}",
                data.len()
            )));
        }
        validate_values("data", &data)?;
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        check_dims(channels, height, width)?;
        validate_values("value", &[value])?;
        Ok(Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        })
    }

    /// Internal constructor for kernels whose output is in range by
    /// construction.
    pub(crate) fn from_parts(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), channels * height * width);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(C, H, W)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    /// One channel as a row-major `H * W` slice.
    pub fn plane(&self, channel: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * self.height + y) * self.width + x]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> bool {
        self.shape() == other.shape()
    }

    pub(crate) fn check_same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )))
        }
    }
}

fn check_dims(channels: usize, height: usize, width: usize) -> Result<()> {
    if channels == 0 || height == 0 || width == 0 {
        return Err(Error::Shape(format!(
            "dimensions must be >= 1, got {channels}x{height}x{width}"
        )));
    }
    Ok(())
}

/// Rejects the first value that is non-finite or outside `[0, 1]`.
pub fn validate_values(field: &'static str, values: &[f32]) -> Result<()> {
    match values.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(index) => Err(Error::DataRange {
            field,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            ImageTensor::new(3, 2, 2, vec![0.0; 11]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_and_nan() {
        let err = ImageTensor::new(1, 1, 3, vec![0.0, 1.5, 0.2]).unwrap_err();
        assert!(matches!(err, Error::DataRange { index: 1, .. }));
        let err = ImageTensor::new(1, 1, 2, vec![f32::NAN, 0.2]).unwrap_err();
        assert!(matches!(err, Error::DataRange { index: 0, .. }));
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(ImageTensor::new(0, 1, 1, vec![]).is_err());
        assert!(ImageTensor::filled(1, 0, 1, 0.5).is_err());
    }

    #[test]
    fn indexing_is_channel_major() {
        let data: Vec<f32> = (0..12).map(|i| i as f32 / 12.0).collect();
        let t = ImageTensor::new(3, 2, 2, data).unwrap();
        assert_eq!(t.get(1, 0, 1), 5.0 / 12.0);
        assert_eq!(t.plane(2), &t.data()[8..12]);
    }
}

//! Shared fixtures for the benchmarks.

use cropmix_core::ImageTensor;

/// A smooth, non-constant test image with values in `[0, 1]`.
pub fn gradient(channels: usize, height: usize, width: usize) -> ImageTensor {
    let mut data = Vec::with_capacity(channels * height * width);
    for c in 0..channels {
        for y in 0..height {
            for x in 0..width {
                let v =
                    (x as f32 / width as f32 + y as f32 / height as f32 + c as f32 * 0.25) % 1.0;
                data.push(v);
            }
        }
    }
    ImageTensor::new(channels, height, width, data).expect("gradient values are in range")
}

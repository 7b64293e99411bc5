//! Row-major raster containers shared by every stage.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("buffer length {got} does not match {width}x{height}x{channels}")]
    BadLength {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("unsupported channel count {0}")]
    BadChannelCount(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// Interleaved `height x width x channels` float raster.
///
/// Display images hold values in `[0, 1]`; the same container also carries
/// latents and noise draws, so the range is not enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f32>,
    ) -> Result<Self, RasterError> {
        if channels == 0 {
            return Err(RasterError::BadChannelCount(channels));
        }
        if data.len() != width * height * channels {
            return Err(RasterError::BadLength {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds an image by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y) + c;
        self.data[i] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<(), RasterError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(RasterError::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, &v) in acc.iter_mut().zip(px) {
                *a += v as f64;
            }
        }
        let n = (self.width * self.height).max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Bilinear resize using pixel-center alignment with edge clamping.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let max_x = self.width.saturating_sub(1) as f64;
        let max_y = self.height.saturating_sub(1) as f64;
        let mut out = Image::zeros(width, height, self.channels);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let wy = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let wx = fx - x0 as f64;
                for c in 0..self.channels {
                    let top = self.get(x0, y0, c) as f64 * (1.0 - wx) + self.get(x1, y0, c) as f64 * wx;
                    let bot = self.get(x0, y1, c) as f64 * (1.0 - wx) + self.get(x1, y1, c) as f64 * wx;
                    out.set(x, y, c, (top * (1.0 - wy) + bot * wy) as f32);
                }
            }
        }
        out
    }
}

/// Per-pixel depth in scene units. Non-finite or non-positive samples are
/// invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Value stored at invalid depth pixels.
pub const INVALID_DEPTH: f64 = 0.0;

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::BadLength {
                width,
                height,
                channels: 1,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![INVALID_DEPTH; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub fn is_valid_value(v: f64) -> bool {
        v.is_finite() && v > 0.0
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        Self::is_valid_value(self.get(x, y))
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&v| Self::is_valid_value(v)).count()
    }

    /// Nearest-pixel lookup at a continuous position, `None` outside the
    /// raster or at invalid pixels.
    pub fn sample_nearest(&self, u: f64, v: f64) -> Option<f64> {
        let x = u.round();
        let y = v.round();
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return None;
        }
        let d = self.get(x as usize, y as usize);
        Self::is_valid_value(d).then_some(d)
    }

    /// Single-channel `f32` image, as stored in PFM files.
    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn from_image(img: &Image) -> Result<Self, RasterError> {
        if img.channels() != 1 {
            return Err(RasterError::BadChannelCount(img.channels()));
        }
        Ok(Self {
            width: img.width(),
            height: img.height(),
            data: img.data().iter().map(|&v| v as f64).collect(),
        })
    }
}

/// Boolean raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, RasterError> {
        if data.len() != width * height {
            return Err(RasterError::BadLength {
                width,
                height,
                channels: 1,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn fraction(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.data.len() as f64
        }
    }
}

/// Dense optical flow from frame k to k+1, interleaved `(du, dv)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        if data.len() != width * height * 2 {
            return Err(RasterError::BadLength {
                width,
                height,
                channels: 2,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> (f32, f32),
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 2);
        for y in 0..height {
            for x in 0..width {
                let (du, dv) = f(x, y);
                data.push(du);
                data.push(dv);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f32, f32) {
        let i = (y * self.width + x) * 2;
        (self.data[i], self.data[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_rejects_bad_length() {
        assert!(Image::new(2, 2, 3, vec![0.0; 11]).is_err());
        assert!(Image::new(2, 2, 0, vec![]).is_err());
    }

    #[test]
    fn resize_same_size_is_identity() {
        let img = Image::from_fn(5, 4, 3, |x, y, c| (x * 7 + y * 3 + c) as f32 / 50.0);
        assert_eq!(img.resize_bilinear(5, 4), img);
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Image::filled(9, 7, 1, 0.25);
        let out = img.resize_bilinear(4, 3);
        assert!(out.data().iter().all(|&v| (v - 0.25).abs() < 1e-7));
    }

    #[test]
    fn depth_validity() {
        let d = DepthMap::new(3, 1, vec![1.0, 0.0, f64::NAN]).unwrap();
        assert!(d.is_valid(0, 0));
        assert!(!d.is_valid(1, 0));
        assert!(!d.is_valid(2, 0));
        assert_eq!(d.sample_nearest(0.4, 0.0), Some(1.0));
        assert_eq!(d.sample_nearest(-0.6, 0.0), None);
    }
}

//! Planar (channel-major) float images and PNG I/O.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use liveview_tensor::{Scalar, Tensor};

use crate::error::{contract, Result};

/// `channels×height×width` image, values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return contract(format!(
                "image {channels}×{height}×{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: T) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        f: impl Fn(usize, usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
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

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn plane(&self, c: usize) -> &[T] {
        &self.data[c * self.height * self.width..(c + 1) * self.height * self.width]
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::from_f64c(v.to_f64c())).collect(),
        }
    }

    pub fn to_tensor(&self) -> Tensor<T> {
        Tensor::from_vec(
            vec![self.channels, self.height, self.width],
            self.data.clone(),
        )
        .expect("image buffer matches its dims")
    }

    pub fn from_tensor(t: &Tensor<T>) -> Result<Self> {
        match *t.shape() {
            [c, h, w] => Self::new(c, h, w, t.data().to_vec()),
            [h, w] => Self::new(1, h, w, t.data().to_vec()),
            _ => contract(format!("tensor {:?} is not an image", t.shape())),
        }
    }

    pub fn clamp01(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.max(T::zero()).min(T::one());
        }
        out
    }

    pub fn same_dims(&self, other: &Image<T>) -> bool {
        self.dims() == other.dims()
    }

    pub fn max_abs_diff(&self, other: &Image<T>) -> Option<f64> {
        self.same_dims(other).then(|| {
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a.to_f64c() - b.to_f64c()).abs())
                .fold(0.0, f64::max)
        })
    }

    /// Interleaved 8-bit RGB (or gray replicated) with rounding.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let hw = self.height * self.width;
        let mut out = Vec::with_capacity(hw * 3);
        for i in 0..hw {
            for c in 0..3 {
                let src = if self.channels >= 3 { c } else { 0 };
                out.push(quantize8(self.data[src * hw + i].to_f64c()));
            }
        }
        out
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return contract("rgb8 buffer does not match dimensions");
        }
        let hw = height * width;
        let mut data = vec![T::zero(); 3 * hw];
        for i in 0..hw {
            for c in 0..3 {
                data[c * hw + i] = T::from_f64c(bytes[i * 3 + c] as f64 / 255.0);
            }
        }
        Self::new(3, height, width, data)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let buf: ImageBuffer<Rgb<u8>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
                .expect("buffer sized for image");
        buf.save(path)?;
        Ok(())
    }

    /// Single-channel lossless 16-bit PNG of channel 0.
    pub fn save_png16_gray(&self, path: impl AsRef<Path>) -> Result<()> {
        let px: Vec<u16> = self
            .plane(0)
            .iter()
            .map(|v| (v.to_f64c().clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect();
        let buf: ImageBuffer<Luma<u16>, _> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, px)
                .expect("buffer sized for image");
        buf.save(path)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_rgb8(h as usize, w as usize, img.as_raw())
    }

    pub fn load_png16_gray(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma16();
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&v| T::from_f64c(v as f64 / 65535.0)).collect();
        Self::new(1, h as usize, w as usize, data)
    }
}

fn quantize8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

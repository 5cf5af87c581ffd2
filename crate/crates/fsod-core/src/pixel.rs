//! Pixel tensors and bilinear resampling shared by the augmentation and
//! support-extraction modules.
//!
//! Images are channel-major (channel, row, column) with values in [0, 1].
//! Continuous coordinates place the center of pixel (ix, iy) at
//! (ix + 0.5, iy + 0.5); resampling between regions uses the half-pixel
//!-center convention throughout.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PixelImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PixelImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::arg("image dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "image data length {} != {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        if !data.iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::arg("pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f64 {
        self.data[channel * self.height * self.width + y * self.width + x]
    }

    pub fn set(&mut self, channel: usize, y: usize, x: usize, value: f64) {
        self.data[channel * self.height * self.width + y * self.width + x] = value;
    }

    fn texel(&self, channel: usize, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return 0.0;
        }
        self.get(channel, y as usize, x as usize)
    }

    /// Bilinear sample at continuous (x, y); outside the image reads zero.
    pub fn sample(&self, channel: usize, x: f64, y: f64) -> f64 {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = self.texel(channel, x0, y0);
        let v10 = self.texel(channel, x0 + 1, y0);
        let v01 = self.texel(channel, x0, y0 + 1);
        let v11 = self.texel(channel, x0 + 1, y0 + 1);
        (v00 * (1.0 - tx) + v10 * tx) * (1.0 - ty) + (v01 * (1.0 - tx) + v11 * tx) * ty
    }
}

/// Builds an image by mapping each output pixel center to a source point;
/// `None` leaves the pixel at zero.
pub fn resample_with(
    src: &PixelImage,
    out_height: usize,
    out_width: usize,
    map: impl Fn(f64, f64) -> Option<(f64, f64)>,
) -> PixelImage {
    let channels = src.channels();
    let mut data = vec![0.0; channels * out_height * out_width];
    for y in 0..out_height {
        for x in 0..out_width {
            let cx = x as f64 + 0.5;
            let cy = y as f64 + 0.5;
            if let Some((sx, sy)) = map(cx, cy) {
                for c in 0..channels {
                    data[c * out_height * out_width + y * out_width + x] = src.sample(c, sx, sy);
                }
            }
        }
    }
    PixelImage {
        channels,
        height: out_height,
        width: out_width,
        data,
    }
}

/// Resamples the axis-aligned source region (x0, y0, x1, y1) onto an
/// `out_height` x `out_width` grid.
pub fn resample_region(
    src: &PixelImage,
    region: (f64, f64, f64, f64),
    out_height: usize,
    out_width: usize,
) -> PixelImage {
    let (x0, y0, x1, y1) = region;
    let sx = (x1 - x0) / out_width as f64;
    let sy = (y1 - y0) / out_height as f64;
    resample_with(src, out_height, out_width, |cx, cy| {
        Some((x0 + cx * sx, y0 + cy * sy))
    })
}

//! PNG <-> pixel tensor conversion and the boxes-document format.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use image::{DynamicImage, ImageBuffer, Rgb};
use serde::{Deserialize, Serialize};

use fsod_core::augment::{AnnotatedImage, BoundingBox};
use fsod_core::pixel::PixelImage;

/// One annotated object in the external JSON format (x, y, w, h).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxEntry {
    pub category_id: u32,
    pub bbox: [f64; 4],
}

impl BoxEntry {
    pub fn to_bounding_box(&self) -> Result<BoundingBox> {
        let [x, y, w, h] = self.bbox;
        BoundingBox::new(x, y, x + w, y + h, self.category_id)
            .map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn from_bounding_box(b: &BoundingBox) -> Self {
        Self {
            category_id: b.category,
            bbox: [b.x_min, b.y_min, b.width(), b.height()],
        }
    }
}

pub fn parse_boxes(json: &str) -> Result<Vec<BoxEntry>> {
    serde_json::from_str(json).context("parsing boxes JSON")
}

pub fn load_annotated(image_path: &Path, boxes_json: &str) -> Result<AnnotatedImage> {
    let image = load_image(image_path)?;
    let boxes = parse_boxes(boxes_json)?
        .iter()
        .map(BoxEntry::to_bounding_box)
        .collect::<Result<Vec<_>>>()?;
    AnnotatedImage::new(image, boxes).map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn load_image(path: &Path) -> Result<PixelImage> {
    let img = image::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut data = vec![0.0; 3 * h * w];
    for (x, y, pixel) in rgb.enumerate_pixels() {
        for c in 0..3 {
            data[c * h * w + y as usize * w + x as usize] = pixel[c] as f64 / 255.0;
        }
    }
    PixelImage::new(3, h, w, data).map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn save_image(img: &PixelImage, path: &PathBuf) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    let buffer = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        let sample = |c: usize| -> u8 {
            // single-channel inputs replicate to gray
            let ch = c.min(img.channels() - 1);
            (img.get(ch, y as usize, x as usize) * 255.0).round().clamp(0.0, 255.0) as u8
        };
        Rgb([sample(0), sample(1), sample(2)])
    });
    DynamicImage::ImageRgb8(buffer)
        .save(path)
        .with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

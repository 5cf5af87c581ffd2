//! Object-preserving augmentation: flips, color jitter, crop-resize that
//! keeps a randomly sampled subset of objects fully visible, and cut-out
//! applied per object so no object is ever fully erased.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pixel::{resample_region, PixelImage};

/// Axis-aligned box in continuous pixel coordinates with a class label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub category: u32,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, category: u32) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
            category,
        };
        if !(x_max > x_min && y_max > y_min)
            || [x_min, y_min, x_max, y_max].iter().any(|v| !v.is_finite())
        {
            return Err(Error::InvalidBox(format!("degenerate box {b:?}")));
        }
        Ok(b)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min.min(other.x_min),
            y_min: self.y_min.min(other.y_min),
            x_max: self.x_max.max(other.x_max),
            y_max: self.y_max.max(other.y_max),
            category: self.category,
        }
    }
}

/// Pixel image plus its box annotations; every box lies inside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedImage {
    pub image: PixelImage,
    pub boxes: Vec<BoundingBox>,
}

impl AnnotatedImage {
    pub fn new(image: PixelImage, boxes: Vec<BoundingBox>) -> Result<Self> {
        let (w, h) = (image.width() as f64, image.height() as f64);
        for b in &boxes {
            if !(b.x_max > b.x_min && b.y_max > b.y_min) {
                return Err(Error::InvalidBox(format!("non-positive area: {b:?}")));
            }
            if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > w || b.y_max > h {
                return Err(Error::InvalidBox(format!(
                    "box {b:?} exceeds image bounds {w}x{h}"
                )));
            }
        }
        Ok(Self { image, boxes })
    }

    pub fn width(&self) -> f64 {
        self.image.width() as f64
    }

    pub fn height(&self) -> f64 {
        self.image.height() as f64
    }
}

/// Probabilities and ranges for the augmentation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub p_hflip: f64,
    pub p_vflip: f64,
    pub p_jitter: f64,
    pub p_crop: f64,
    pub p_cutout: f64,
    /// Symmetric ranges for the multiplicative jitter factors (1 +- delta).
    pub brightness_delta: f64,
    pub contrast_delta: f64,
    pub saturation_delta: f64,
    /// Largest fraction of a box's pixels a cut-out may erase.
    pub cutout_max_box_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            p_hflip: 0.5,
            p_vflip: 0.5,
            p_jitter: 0.5,
            p_crop: 0.5,
            p_cutout: 0.5,
            brightness_delta: 0.2,
            contrast_delta: 0.2,
            saturation_delta: 0.2,
            cutout_max_box_fraction: 0.5,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_hflip", self.p_hflip),
            ("p_vflip", self.p_vflip),
            ("p_jitter", self.p_jitter),
            ("p_crop", self.p_crop),
            ("p_cutout", self.p_cutout),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if [self.brightness_delta, self.contrast_delta, self.saturation_delta]
            .iter()
            .any(|d| !(0.0..1.0).contains(d))
        {
            return Err(Error::arg("jitter deltas must lie in [0, 1)"));
        }
        if !(self.cutout_max_box_fraction > 0.0 && self.cutout_max_box_fraction <= 1.0) {
            return Err(Error::arg("cutout_max_box_fraction must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn parse(json: &str, context: &str) -> Result<Self> {
        let cfg: AugmentConfig = serde_json::from_str(json).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Which flips were applied, so tests can invert them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FlipRecord {
    pub hflip: bool,
    pub vflip: bool,
}

fn flip_image(image: &PixelImage, hflip: bool, vflip: bool) -> PixelImage {
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let mut out = image.clone();
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                let sx = if hflip { w - 1 - x } else { x };
                let sy = if vflip { h - 1 - y } else { y };
                out.set(ch, y, x, image.get(ch, sy, sx));
            }
        }
    }
    out
}

/// Mirrors pixels and boxes, then applies per-image color jitter.
///
/// A horizontal flip maps x to `width - x` (box min/max swap); vertical
/// flips mirror y. Jitter scales brightness, contrast (around the image
/// mean) and saturation (around the per-pixel channel mean), clamped to
/// [0, 1]. Factors equal to 1 leave pixels bit-identical.
pub fn flip_and_jitter<R: Rng>(
    a: &AnnotatedImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(AnnotatedImage, FlipRecord)> {
    cfg.validate()?;
    let record = FlipRecord {
        hflip: rng.gen_bool(cfg.p_hflip),
        vflip: rng.gen_bool(cfg.p_vflip),
    };
    let (w, h) = (a.width(), a.height());

    let mut image = if record.hflip || record.vflip {
        flip_image(&a.image, record.hflip, record.vflip)
    } else {
        a.image.clone()
    };
    let boxes: Vec<BoundingBox> = a
        .boxes
        .iter()
        .map(|b| {
            let mut out = *b;
            if record.hflip {
                out.x_min = w - b.x_max;
                out.x_max = w - b.x_min;
            }
            if record.vflip {
                out.y_min = h - b.y_max;
                out.y_max = h - b.y_min;
            }
            out
        })
        .collect();

    if rng.gen_bool(cfg.p_jitter) {
        let brightness = 1.0 + rng.gen_range(-cfg.brightness_delta..=cfg.brightness_delta);
        let contrast = 1.0 + rng.gen_range(-cfg.contrast_delta..=cfg.contrast_delta);
        let saturation = 1.0 + rng.gen_range(-cfg.saturation_delta..=cfg.saturation_delta);
        image = apply_jitter(&image, brightness, contrast, saturation);
    }

    Ok((AnnotatedImage::new(image, boxes)?, record))
}

fn apply_jitter(
    image: &PixelImage,
    brightness: f64,
    contrast: f64,
    saturation: f64,
) -> PixelImage {
    let (c, h, w) = (image.channels(), image.height(), image.width());
    let mut data = image.data().to_vec();
    if brightness != 1.0 {
        for v in &mut data {
            *v *= brightness;
        }
    }
    if contrast != 1.0 {
        let mean = data.iter().sum::<f64>() / data.len() as f64;
        for v in &mut data {
            *v = mean + (*v - mean) * contrast;
        }
    }
    if saturation != 1.0 {
        let plane = h * w;
        for y in 0..h {
            for x in 0..w {
                let idx = y * w + x;
                let gray = (0..c).map(|ch| data[ch * plane + idx]).sum::<f64>() / c as f64;
                for ch in 0..c {
                    let v = &mut data[ch * plane + idx];
                    *v = gray + (*v - gray) * saturation;
                }
            }
        }
    }
    for v in &mut data {
        *v = v.clamp(0.0, 1.0);
    }
    PixelImage::new(c, h, w, data).expect("clamped values are valid")
}

/// Crop rectangle in source-image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl CropRect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn contains(&self, b: &BoundingBox) -> bool {
        b.x_min >= self.x0 && b.y_min >= self.y0 && b.x_max <= self.x1 && b.y_max <= self.y1
    }
}

/// Crop-resize output plus the sampled geometry, so callers can audit the
/// containment guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct CropOutcome {
    pub augmented: AnnotatedImage,
    pub crop: CropRect,
    /// Indices of the boxes whose full visibility the crop guarantees.
    pub selected: Vec<usize>,
}

// boxes outside the sampled subset are dropped when the crop leaves them
// less than this fraction of their area
const CROP_KEEP_AREA_RATIO: f64 = 0.2;

/// Crops to a rectangle drawn around a random non-empty subset of the
/// objects, then resizes back to the original image size.
///
/// The crop edges are drawn uniformly between the subset's union box and the
/// image borders, so every selected object stays fully visible. Other boxes
/// are clipped and dropped if less than 20% of their area survives.
pub fn object_preserving_crop_resize<R: Rng>(
    a: &AnnotatedImage,
    rng: &mut R,
) -> Result<CropOutcome> {
    if a.boxes.is_empty() {
        return Err(Error::EmptyInput("boxes for crop-resize"));
    }
    // each box in or out with probability 1/2, rejected until non-empty:
    // uniform over non-empty subsets
    let selected: Vec<usize> = loop {
        let chosen: Vec<usize> = (0..a.boxes.len()).filter(|_| rng.gen_bool(0.5)).collect();
        if !chosen.is_empty() {
            break chosen;
        }
    };
    let union = selected[1..]
        .iter()
        .fold(a.boxes[selected[0]], |acc, &i| acc.union(&a.boxes[i]));

    let crop = CropRect {
        x0: rng.gen_range(0.0..=union.x_min),
        y0: rng.gen_range(0.0..=union.y_min),
        x1: rng.gen_range(union.x_max..=a.width()),
        y1: rng.gen_range(union.y_max..=a.height()),
    };
    let augmented = apply_crop_resize(a, crop)?;
    Ok(CropOutcome {
        augmented,
        crop,
        selected,
    })
}

/// Deterministic geometry of the crop-resize: crop, translate and clip the
/// boxes, then scale image and boxes back to the original size.
pub fn apply_crop_resize(a: &AnnotatedImage, crop: CropRect) -> Result<AnnotatedImage> {
    if !(crop.width() > 0.0 && crop.height() > 0.0) {
        return Err(Error::InvalidBox(format!("degenerate crop {crop:?}")));
    }
    let (w, h) = (a.image.width(), a.image.height());
    let scale_x = w as f64 / crop.width();
    let scale_y = h as f64 / crop.height();

    let image = resample_region(&a.image, (crop.x0, crop.y0, crop.x1, crop.y1), h, w);

    let mut boxes = Vec::new();
    for b in &a.boxes {
        let clipped = BoundingBox {
            x_min: b.x_min.max(crop.x0),
            y_min: b.y_min.max(crop.y0),
            x_max: b.x_max.min(crop.x1),
            y_max: b.y_max.min(crop.y1),
            category: b.category,
        };
        if clipped.x_max <= clipped.x_min || clipped.y_max <= clipped.y_min {
            continue;
        }
        if clipped.area() / b.area() < CROP_KEEP_AREA_RATIO {
            continue;
        }
        boxes.push(BoundingBox {
            x_min: (clipped.x_min - crop.x0) * scale_x,
            y_min: (clipped.y_min - crop.y0) * scale_y,
            x_max: (clipped.x_max - crop.x0) * scale_x,
            y_max: (clipped.y_max - crop.y0) * scale_y,
            category: b.category,
        });
    }
    AnnotatedImage::new(image, boxes)
}

const CUTOUT_FILL: f64 = 0.5;

/// Integer pixel grid covered by a box: pixels whose centers fall inside.
fn pixel_grid(b: &BoundingBox) -> (i64, i64, i64, i64) {
    let c0 = (b.x_min - 0.5).ceil() as i64;
    let c1 = (b.x_max - 0.5).ceil() as i64; // exclusive
    let r0 = (b.y_min - 0.5).ceil() as i64;
    let r1 = (b.y_max - 0.5).ceil() as i64;
    (c0, r0, c1, r1)
}

/// Erases, independently per box with probability `p_cutout`, a gray
/// rectangle fully inside the box covering at most
/// `cutout_max_box_fraction` of the box's pixels. Boxes are unchanged and
/// never fully erased.
pub fn object_preserving_cutout<R: Rng>(
    a: &AnnotatedImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<AnnotatedImage> {
    cfg.validate()?;
    let mut image = a.image.clone();
    for b in &a.boxes {
        if !rng.gen_bool(cfg.p_cutout) {
            continue;
        }
        let (c0, r0, c1, r1) = pixel_grid(b);
        let cols = (c1 - c0).max(0) as usize;
        let rows = (r1 - r0).max(0) as usize;
        let box_pixels = cols * rows;
        if box_pixels == 0 {
            continue;
        }
        // pixel-exact budget, and always at least one pixel left intact
        let budget = ((cfg.cutout_max_box_fraction * box_pixels as f64).floor() as usize)
            .min(box_pixels - 1);
        if budget == 0 {
            continue;
        }
        let erase_w = rng.gen_range(1..=cols.min(budget));
        let erase_h = rng.gen_range(1..=rows.min(budget / erase_w));
        let off_x = rng.gen_range(0..=cols - erase_w);
        let off_y = rng.gen_range(0..=rows - erase_h);
        for y in 0..erase_h {
            for x in 0..erase_w {
                let px = (c0 + (off_x + x) as i64) as usize;
                let py = (r0 + (off_y + y) as i64) as usize;
                for ch in 0..image.channels() {
                    image.set(ch, py, px, CUTOUT_FILL);
                }
            }
        }
    }
    AnnotatedImage::new(image, a.boxes.clone())
}

/// Full pipeline: flips and jitter, then crop-resize with probability
/// `p_crop`, then per-object cut-out.
pub fn augment<R: Rng>(
    a: &AnnotatedImage,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<AnnotatedImage> {
    cfg.validate()?;
    let (mut out, _) = flip_and_jitter(a, cfg, rng)?;
    if !out.boxes.is_empty() && rng.gen_bool(cfg.p_crop) {
        out = object_preserving_crop_resize(&out, rng)?.augmented;
    }
    if !out.boxes.is_empty() {
        out = object_preserving_cutout(&out, cfg, rng)?;
    }
    Ok(out)
}

/// Pixels of `image` that differ from `reference` within the box grid.
pub fn modified_pixels_in_box(
    image: &PixelImage,
    reference: &PixelImage,
    b: &BoundingBox,
) -> usize {
    let (c0, r0, c1, r1) = pixel_grid(b);
    let mut modified = BTreeSet::new();
    for y in r0.max(0)..r1.min(image.height() as i64) {
        for x in c0.max(0)..c1.min(image.width() as i64) {
            for ch in 0..image.channels() {
                if image.get(ch, y as usize, x as usize)
                    != reference.get(ch, y as usize, x as usize)
                {
                    modified.insert((x, y));
                    break;
                }
            }
        }
    }
    modified.len()
}

/// Pixel count of the box grid (pixels whose centers fall inside the box).
pub fn box_pixel_count(b: &BoundingBox) -> usize {
    let (c0, r0, c1, r1) = pixel_grid(b);
    ((c1 - c0).max(0) as usize) * ((r1 - r0).max(0) as usize)
}

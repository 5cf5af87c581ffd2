//! Support-patch extraction: turns an annotated image plus one object box
//! into fixed-size patches under six strategies (default crop, context
//! padding, reflection, same-size, multi-scale, mixed).

use serde::{Deserialize, Serialize};

use crate::augment::{AnnotatedImage, BoundingBox};
use crate::error::{Error, Result};
use crate::pixel::{resample_region, resample_with, PixelImage};

/// Objects with `sqrt(wh)` below this are treated as small by the mixed
/// strategy.
pub const SMALL_OBJECT_SIZE: f64 = 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Fixed-size crop centered on the object; oversized objects are resized
    /// to fit, context beyond the image is zero.
    Default,
    /// Default crop with everything outside the object box zeroed.
    ContextPadding,
    /// Default geometry with context replaced by mirror-tiling of the object.
    Reflection,
    /// Object resized to fill the patch, aspect ratio preserved, zero-padded.
    SameSize,
    /// Object rendered at three target sizes, one patch per scale.
    Multiscale,
    /// Default below `sqrt(wh) = 32`, same-size at or above.
    Mixed,
}

/// Strategy plus output geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionStrategy {
    pub kind: StrategyKind,
    pub patch_size: usize,
    /// Rendered longest side per multiscale patch.
    pub multiscale_targets: [usize; 3],
}

impl ExtractionStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            patch_size: 128,
            multiscale_targets: [32, 64, 128],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::arg("patch_size must be positive"));
        }
        if self.multiscale_targets.iter().any(|&t| t == 0 || t > self.patch_size) {
            return Err(Error::arg(
                "multiscale targets must lie in 1..=patch_size",
            ));
        }
        Ok(())
    }
}

/// One extracted patch: always exactly `patch_size` square.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPatch {
    pub image: PixelImage,
    pub source_box: BoundingBox,
    pub strategy: StrategyKind,
    /// 0 except for multiscale patches (0, 1, 2).
    pub scale_index: usize,
}

fn validate_box(img: &AnnotatedImage, b: &BoundingBox) -> Result<()> {
    if !(b.x_max > b.x_min && b.y_max > b.y_min) {
        return Err(Error::InvalidBox(format!("degenerate box {b:?}")));
    }
    if b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > img.width() || b.y_max > img.height() {
        return Err(Error::InvalidBox(format!(
            "box {b:?} outside image {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Square crop region centered on the box: the patch itself, or the object's
/// longest side when it exceeds the patch.
fn default_region(b: &BoundingBox, patch: f64) -> (f64, f64, f64, f64) {
    let side = b.width().max(b.height()).max(patch);
    let cx = (b.x_min + b.x_max) / 2.0;
    let cy = (b.y_min + b.y_max) / 2.0;
    (
        cx - side / 2.0,
        cy - side / 2.0,
        cx + side / 2.0,
        cy + side / 2.0,
    )
}

fn default_patch(img: &AnnotatedImage, b: &BoundingBox, patch: usize) -> PixelImage {
    let region = default_region(b, patch as f64);
    resample_region(&img.image, region, patch, patch)
}

/// Box corners mapped into default-patch coordinates.
fn transformed_box(b: &BoundingBox, patch: f64) -> (f64, f64, f64, f64) {
    let (x0, y0, x1, _) = default_region(b, patch);
    let scale = patch / (x1 - x0);
    (
        (b.x_min - x0) * scale,
        (b.y_min - y0) * scale,
        (b.x_max - x0) * scale,
        (b.y_max - y0) * scale,
    )
}

fn context_padding_patch(img: &AnnotatedImage, b: &BoundingBox, patch: usize) -> PixelImage {
    let mut out = default_patch(img, b, patch);
    let (bx0, by0, bx1, by1) = transformed_box(b, patch as f64);
    for y in 0..patch {
        for x in 0..patch {
            let cx = x as f64 + 0.5;
            let cy = y as f64 + 0.5;
            if cx < bx0 || cx >= bx1 || cy < by0 || cy >= by1 {
                for c in 0..out.channels() {
                    out.set(c, y, x, 0.0);
                }
            }
        }
    }
    out
}

/// Triangular-wave fold of `v` into [lo, hi]: inside is identity, outside
/// alternates mirror images of the interval.
fn fold(v: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    let period = 2.0 * len;
    let mut t = (v - lo) % period;
    if t < 0.0 {
        t += period;
    }
    lo + if t <= len { t } else { period - t }
}

fn reflection_patch(img: &AnnotatedImage, b: &BoundingBox, patch: usize) -> PixelImage {
    let (x0, y0, x1, y1) = default_region(b, patch as f64);
    let sx = (x1 - x0) / patch as f64;
    let sy = (y1 - y0) / patch as f64;
    resample_with(&img.image, patch, patch, |cx, cy| {
        let src_x = x0 + cx * sx;
        let src_y = y0 + cy * sy;
        Some((fold(src_x, b.x_min, b.x_max), fold(src_y, b.y_min, b.y_max)))
    })
}

/// Renders the box at `target` pixels on its longest side, centered in the
/// patch with zero padding.
fn scaled_object_patch(
    img: &AnnotatedImage,
    b: &BoundingBox,
    patch: usize,
    target: f64,
) -> PixelImage {
    let scale = target / b.width().max(b.height());
    let rendered_w = b.width() * scale;
    let rendered_h = b.height() * scale;
    let off_x = (patch as f64 - rendered_w) / 2.0;
    let off_y = (patch as f64 - rendered_h) / 2.0;
    resample_with(&img.image, patch, patch, |cx, cy| {
        if cx >= off_x && cx < off_x + rendered_w && cy >= off_y && cy < off_y + rendered_h {
            Some((
                b.x_min + (cx - off_x) / scale,
                b.y_min + (cy - off_y) / scale,
            ))
        } else {
            None
        }
    })
}

fn same_size_patch(img: &AnnotatedImage, b: &BoundingBox, patch: usize) -> PixelImage {
    scaled_object_patch(img, b, patch, patch as f64)
}

/// Extracts the support patch(es) for one object.
///
/// Multiscale emits three patches (scale indices 0, 1, 2); every other
/// strategy emits exactly one.
pub fn extract_support(
    img: &AnnotatedImage,
    b: &BoundingBox,
    strategy: &ExtractionStrategy,
) -> Result<Vec<SupportPatch>> {
    strategy.validate()?;
    validate_box(img, b)?;
    let patch = strategy.patch_size;
    let one = |image: PixelImage| SupportPatch {
        image,
        source_box: *b,
        strategy: strategy.kind,
        scale_index: 0,
    };
    let patches = match strategy.kind {
        StrategyKind::Default => vec![one(default_patch(img, b, patch))],
        StrategyKind::ContextPadding => vec![one(context_padding_patch(img, b, patch))],
        StrategyKind::Reflection => vec![one(reflection_patch(img, b, patch))],
        StrategyKind::SameSize => vec![one(same_size_patch(img, b, patch))],
        StrategyKind::Multiscale => strategy
            .multiscale_targets
            .iter()
            .enumerate()
            .map(|(scale_index, &target)| SupportPatch {
                image: scaled_object_patch(img, b, patch, target as f64),
                source_box: *b,
                strategy: strategy.kind,
                scale_index,
            })
            .collect(),
        StrategyKind::Mixed => {
            let image = if (b.width() * b.height()).sqrt() < SMALL_OBJECT_SIZE {
                default_patch(img, b, patch)
            } else {
                same_size_patch(img, b, patch)
            };
            vec![one(image)]
        }
    };
    Ok(patches)
}

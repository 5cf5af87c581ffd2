//! Detection metrics: IoU, score-ordered greedy matching, average precision,
//! mAP at one or several IoU thresholds, size-bucketed mAP, base/novel
//! aggregation and relative mAP against a non-few-shot baseline.
//!
//! Conventions, kept identical in the brute-force test oracle:
//! - detections are ranked by descending score, ties broken by insertion
//!   order (recorded in the report);
//! - each detection greedily takes the unmatched ground truth with the
//!   highest IoU at or above the threshold, earlier ground truth winning
//!   exact IoU ties;
//! - average precision integrates the monotone precision envelope over all
//!   recall points (101-point interpolation is available as an option);
//! - classes with no ground truth and no detections are excluded from mAP
//!   means; no ground truth with detections scores 0.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episodes::ClassSplit;
use crate::error::{Error, Result};

/// Annotated object: axis-aligned box in (x, y, width, height) pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub image_id: u64,
    pub category_id: u32,
    pub bbox: [f64; 4],
}

/// Scored detection in the same box convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: u64,
    pub category_id: u32,
    pub bbox: [f64; 4],
    pub score: f64,
}

fn validate_bbox(bbox: &[f64; 4], what: &str) -> Result<()> {
    if !(bbox[2] > 0.0 && bbox[3] > 0.0) || bbox.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidBox(format!(
            "{what} has non-positive or non-finite dimensions: {bbox:?}"
        )));
    }
    Ok(())
}

/// Object size class on `sqrt(width * height)` with cut points 32 and 96.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
    All,
}

impl SizeBucket {
    /// Bucket of a box: S if sqrt(wh) < 32, M if 32 <= sqrt(wh) < 96, else L.
    pub fn of(width: f64, height: f64) -> SizeBucket {
        let s = (width * height).sqrt();
        if s < 32.0 {
            SizeBucket::Small
        } else if s < 96.0 {
            SizeBucket::Medium
        } else {
            SizeBucket::Large
        }
    }

    pub fn contains(self, bucket: SizeBucket) -> bool {
        self == SizeBucket::All || self == bucket
    }
}

/// Intersection-over-union of two (x, y, w, h) boxes; 0 when disjoint.
pub fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = a[0].max(b[0]);
    let iy = a[1].max(b[1]);
    let ix2 = (a[0] + a[2]).min(b[0] + b[2]);
    let iy2 = (a[1] + a[3]).min(b[1] + b[3]);
    let iw = (ix2 - ix).max(0.0);
    let ih = (iy2 - iy).max(0.0);
    let inter = iw * ih;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// One detection after matching, in rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedDetection {
    /// Index into the input detection slice.
    pub det_index: usize,
    pub tp: bool,
    /// Index into the input ground-truth slice, for true positives.
    pub matched_gt: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    /// Detections sorted by descending score (ties by input order).
    pub detections: Vec<MatchedDetection>,
    pub unmatched_gt: usize,
}

/// Greedy one-to-one matching of one image+class group at IoU threshold
/// `threshold` (inclusive).
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    threshold: f64,
) -> MatchOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let mut gt_taken = vec![false; gts.len()];
    let mut detections = Vec::with_capacity(dets.len());
    for det_index in order {
        let mut best: Option<(f64, usize)> = None;
        for (gt_index, gt) in gts.iter().enumerate() {
            if gt_taken[gt_index] {
                continue;
            }
            let overlap = iou(&dets[det_index].bbox, &gt.bbox);
            if overlap < threshold {
                continue;
            }
            // strictly-greater keeps the earlier ground truth on exact ties
            if best.map_or(true, |(b, _)| overlap > b) {
                best = Some((overlap, gt_index));
            }
        }
        match best {
            Some((_, gt_index)) => {
                gt_taken[gt_index] = true;
                detections.push(MatchedDetection {
                    det_index,
                    tp: true,
                    matched_gt: Some(gt_index),
                });
            }
            None => detections.push(MatchedDetection {
                det_index,
                tp: false,
                matched_gt: None,
            }),
        }
    }
    let unmatched_gt = gt_taken.iter().filter(|&&t| !t).count();
    MatchOutcome {
        detections,
        unmatched_gt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// Area under the monotone precision envelope over all recall points.
    #[default]
    AllPoint,
    /// Mean envelope precision at the 101 recall grid points 0.00..=1.00.
    Point101,
}

/// Average precision from rank-ordered TP/FP labels.
///
/// With no ground truth: 1 if there are no detections (callers skip such
/// classes in mAP means), otherwise 0.
pub fn average_precision(labels: &[bool], total_gt: usize) -> f64 {
    average_precision_with(labels, total_gt, ApInterpolation::AllPoint)
}

pub fn average_precision_with(
    labels: &[bool],
    total_gt: usize,
    interpolation: ApInterpolation,
) -> f64 {
    if total_gt == 0 {
        return if labels.is_empty() { 1.0 } else { 0.0 };
    }
    if labels.is_empty() {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(labels.len());
    let mut recall = Vec::with_capacity(labels.len());
    let mut tp = 0usize;
    for (rank, &is_tp) in labels.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / total_gt as f64);
    }
    // monotone envelope: precision at recall r is the best precision at any
    // recall >= r
    for i in (0..precision.len() - 1).rev() {
        if precision[i + 1] > precision[i] {
            precision[i] = precision[i + 1];
        }
    }
    match interpolation {
        ApInterpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for i in 0..labels.len() {
                ap += (recall[i] - prev_recall) * precision[i];
                prev_recall = recall[i];
            }
            ap
        }
        ApInterpolation::Point101 => {
            let mut ap = 0.0;
            for step in 0..=100 {
                let r = step as f64 / 100.0;
                let p = recall
                    .iter()
                    .position(|&rc| rc >= r - 1e-12)
                    .map_or(0.0, |idx| precision[idx]);
                ap += p;
            }
            ap / 101.0
        }
    }
}

/// Single IoU threshold 0.5.
pub fn voc_thresholds() -> Vec<f64> {
    vec![0.5]
}

/// The ten thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub thresholds: Vec<f64>,
    /// Also compute per-size-bucket APs.
    pub buckets: bool,
    pub interpolation: ApInterpolation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            thresholds: voc_thresholds(),
            buckets: false,
            interpolation: ApInterpolation::AllPoint,
        }
    }
}

impl EvalOptions {
    pub fn coco() -> Self {
        Self {
            thresholds: coco_thresholds(),
            buckets: false,
            interpolation: ApInterpolation::AllPoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Base,
    Novel,
}

/// Per-bucket APs; `None` marks a bucket with nothing to score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BucketAps {
    pub all: Option<f64>,
    pub small: Option<f64>,
    pub medium: Option<f64>,
    pub large: Option<f64>,
}

impl BucketAps {
    fn get(&self, bucket: SizeBucket) -> Option<f64> {
        match bucket {
            SizeBucket::All => self.all,
            SizeBucket::Small => self.small,
            SizeBucket::Medium => self.medium,
            SizeBucket::Large => self.large,
        }
    }

    fn set(&mut self, bucket: SizeBucket, value: Option<f64>) {
        match bucket {
            SizeBucket::All => self.all = value,
            SizeBucket::Small => self.small = value,
            SizeBucket::Medium => self.medium = value,
            SizeBucket::Large => self.large = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEval {
    pub threshold: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub missed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buckets: Option<BucketAps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub category_id: u32,
    pub split: SplitSide,
    pub gt_count: usize,
    pub det_count: usize,
    pub per_threshold: Vec<ThresholdEval>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MapSummary {
    pub map50: Option<f64>,
    /// Mean of the per-threshold mAPs when evaluating the 0.50:0.95 ladder.
    pub map50_95: Option<f64>,
    pub per_threshold_map: Vec<PerThresholdMap>,
    pub base_map50: Option<f64>,
    pub novel_map50: Option<f64>,
    pub base_map50_95: Option<f64>,
    pub novel_map50_95: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bucket_map50: Option<BucketAps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_bucket_map50: Option<BucketAps>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub novel_bucket_map50: Option<BucketAps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerThresholdMap {
    pub threshold: f64,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub thresholds: Vec<f64>,
    /// Score-tie policy, recorded for reproducibility.
    pub tie_break: String,
    pub classes: Vec<ClassEval>,
    pub summary: MapSummary,
}

// one pooled detection of a class, already matched within its image
struct PooledDet {
    score: f64,
    insertion: usize,
    tp: bool,
    matched_gt_bucket: Option<SizeBucket>,
    det_bucket: SizeBucket,
}

/// Evaluates detections against ground truth over the split's classes.
///
/// Unknown category ids are rejected. Per-class work runs on the rayon pool;
/// the report is assembled in ascending category order regardless of worker
/// count.
pub fn compute_map_report(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    split: &ClassSplit,
    options: &EvalOptions,
) -> Result<MetricReport> {
    for gt in gts {
        validate_bbox(&gt.bbox, "ground truth")?;
        if split.side(gt.category_id).is_none() {
            return Err(Error::UnknownCategory(gt.category_id));
        }
    }
    for det in dets {
        validate_bbox(&det.bbox, "detection")?;
        if !(0.0..=1.0).contains(&det.score) {
            return Err(Error::arg(format!("detection score {} not in [0,1]", det.score)));
        }
        if split.side(det.category_id).is_none() {
            return Err(Error::UnknownCategory(det.category_id));
        }
    }
    if options.thresholds.is_empty() {
        return Err(Error::arg("at least one IoU threshold required"));
    }

    let mut active: BTreeSet<u32> = BTreeSet::new();
    active.extend(gts.iter().map(|g| g.category_id));
    active.extend(dets.iter().map(|d| d.category_id));

    let classes: Vec<ClassEval> = active
        .par_iter()
        .map(|&category| evaluate_class(category, gts, dets, split, options))
        .collect();

    let summary = summarize(&classes, options);
    Ok(MetricReport {
        thresholds: options.thresholds.clone(),
        tie_break: "input-order".into(),
        classes,
        summary,
    })
}

fn evaluate_class(
    category: u32,
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    split: &ClassSplit,
    options: &EvalOptions,
) -> ClassEval {
    let class_gts: Vec<&GroundTruthRecord> =
        gts.iter().filter(|g| g.category_id == category).collect();
    let class_dets: Vec<(usize, &DetectionRecord)> = dets
        .iter()
        .enumerate()
        .filter(|(_, d)| d.category_id == category)
        .collect();
    let total_gt = class_gts.len();

    let mut images: BTreeSet<u64> = class_gts.iter().map(|g| g.image_id).collect();
    images.extend(class_dets.iter().map(|(_, d)| d.image_id));

    let per_threshold = options
        .thresholds
        .iter()
        .map(|&threshold| {
            let mut pooled: Vec<PooledDet> = Vec::with_capacity(class_dets.len());
            for &image in &images {
                let image_gts: Vec<GroundTruthRecord> = class_gts
                    .iter()
                    .filter(|g| g.image_id == image)
                    .map(|g| (*g).clone())
                    .collect();
                let image_dets: Vec<(usize, DetectionRecord)> = class_dets
                    .iter()
                    .filter(|(_, d)| d.image_id == image)
                    .map(|(i, d)| (*i, (*d).clone()))
                    .collect();
                let records: Vec<DetectionRecord> =
                    image_dets.iter().map(|(_, d)| d.clone()).collect();
                let outcome = match_detections(&records, &image_gts, threshold);
                for m in outcome.detections {
                    let (insertion, det) = &image_dets[m.det_index];
                    pooled.push(PooledDet {
                        score: det.score,
                        insertion: *insertion,
                        tp: m.tp,
                        matched_gt_bucket: m.matched_gt.map(|g| {
                            SizeBucket::of(image_gts[g].bbox[2], image_gts[g].bbox[3])
                        }),
                        det_bucket: SizeBucket::of(det.bbox[2], det.bbox[3]),
                    });
                }
            }
            pooled.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.insertion.cmp(&b.insertion))
            });

            let labels: Vec<bool> = pooled.iter().map(|p| p.tp).collect();
            let ap = average_precision_with(&labels, total_gt, options.interpolation);
            let tp = labels.iter().filter(|&&t| t).count();
            let fp = labels.len() - tp;
            let buckets = options.buckets.then(|| {
                let mut aps = BucketAps::default();
                for bucket in [
                    SizeBucket::All,
                    SizeBucket::Small,
                    SizeBucket::Medium,
                    SizeBucket::Large,
                ] {
                    aps.set(bucket, bucket_ap(&pooled, &class_gts, bucket, options));
                }
                aps
            });
            ThresholdEval {
                threshold,
                ap,
                tp,
                fp,
                missed: total_gt - tp,
                buckets,
            }
        })
        .collect();

    ClassEval {
        category_id: category,
        split: split.side(category).expect("validated above"),
        gt_count: total_gt,
        det_count: class_dets.len(),
        per_threshold,
    }
}

/// AP restricted to one size bucket. Ground truth is filtered by its own
/// size; detections matched to out-of-bucket ground truth are ignored and
/// unmatched detections count as false positives only when their own size
/// falls in the bucket.
fn bucket_ap(
    pooled: &[PooledDet],
    class_gts: &[&GroundTruthRecord],
    bucket: SizeBucket,
    options: &EvalOptions,
) -> Option<f64> {
    let total_gt = class_gts
        .iter()
        .filter(|g| bucket.contains(SizeBucket::of(g.bbox[2], g.bbox[3])))
        .count();
    let labels: Vec<bool> = pooled
        .iter()
        .filter_map(|p| match (p.tp, p.matched_gt_bucket) {
            (true, Some(b)) if bucket.contains(b) => Some(true),
            (true, _) => None,
            (false, _) if bucket.contains(p.det_bucket) => Some(false),
            (false, _) => None,
        })
        .collect();
    if total_gt == 0 && labels.is_empty() {
        return None;
    }
    Some(average_precision_with(&labels, total_gt, options.interpolation))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let collected: Vec<f64> = values.collect();
    if collected.is_empty() {
        None
    } else {
        Some(collected.iter().sum::<f64>() / collected.len() as f64)
    }
}

fn summarize(classes: &[ClassEval], options: &EvalOptions) -> MapSummary {
    let threshold_index = |t: f64| {
        options
            .thresholds
            .iter()
            .position(|&x| (x - t).abs() < 1e-9)
    };
    let map_at = |idx: usize, side: Option<SplitSide>| {
        mean(
            classes
                .iter()
                .filter(|c| side.map_or(true, |s| c.split == s))
                .map(|c| c.per_threshold[idx].ap),
        )
    };

    let per_threshold_map: Vec<PerThresholdMap> = options
        .thresholds
        .iter()
        .enumerate()
        .map(|(idx, &threshold)| PerThresholdMap {
            threshold,
            map: map_at(idx, None),
        })
        .collect();

    let over_thresholds = |side: Option<SplitSide>| {
        if options.thresholds.len() < 2 {
            return None;
        }
        mean(
            (0..options.thresholds.len()).filter_map(|idx| map_at(idx, side)),
        )
    };

    let idx50 = threshold_index(0.5);
    let bucket_summary = |side: Option<SplitSide>| -> Option<BucketAps> {
        if !options.buckets {
            return None;
        }
        let idx = idx50?;
        let mut aps = BucketAps::default();
        for bucket in [
            SizeBucket::All,
            SizeBucket::Small,
            SizeBucket::Medium,
            SizeBucket::Large,
        ] {
            let value = mean(
                classes
                    .iter()
                    .filter(|c| side.map_or(true, |s| c.split == s))
                    .filter_map(|c| c.per_threshold[idx].buckets.as_ref()?.get(bucket)),
            );
            aps.set(bucket, value);
        }
        Some(aps)
    };

    MapSummary {
        map50: idx50.and_then(|idx| map_at(idx, None)),
        map50_95: over_thresholds(None),
        base_map50: idx50.and_then(|idx| map_at(idx, Some(SplitSide::Base))),
        novel_map50: idx50.and_then(|idx| map_at(idx, Some(SplitSide::Novel))),
        base_map50_95: over_thresholds(Some(SplitSide::Base)),
        novel_map50_95: over_thresholds(Some(SplitSide::Novel)),
        bucket_map50: bucket_summary(None),
        base_bucket_map50: bucket_summary(Some(SplitSide::Base)),
        novel_bucket_map50: bucket_summary(Some(SplitSide::Novel)),
        per_threshold_map,
    }
}

fn csv_value(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

impl MetricReport {
    /// Rows of (class_id, split, threshold, bucket, ap) plus summary rows
    /// with class_id `mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_id,split,threshold,bucket,ap\n");
        let side = |s: SplitSide| match s {
            SplitSide::Base => "base",
            SplitSide::Novel => "novel",
        };
        for class in &self.classes {
            for te in &class.per_threshold {
                let mut push = |bucket: &str, ap: Option<f64>| {
                    out.push_str(&format!(
                        "{},{},{:.2},{},{}\n",
                        class.category_id,
                        side(class.split),
                        te.threshold,
                        bucket,
                        csv_value(ap)
                    ));
                };
                push("all", Some(te.ap));
                if let Some(buckets) = &te.buckets {
                    push("small", buckets.small);
                    push("medium", buckets.medium);
                    push("large", buckets.large);
                }
            }
        }
        let s = &self.summary;
        let mut push_mean = |split: &str, threshold: &str, bucket: &str, ap: Option<f64>| {
            out.push_str(&format!("mean,{split},{threshold},{bucket},{}\n", csv_value(ap)));
        };
        push_mean("all", "0.50", "all", s.map50);
        push_mean("base", "0.50", "all", s.base_map50);
        push_mean("novel", "0.50", "all", s.novel_map50);
        if s.map50_95.is_some() {
            push_mean("all", "0.50:0.95", "all", s.map50_95);
            push_mean("base", "0.50:0.95", "all", s.base_map50_95);
            push_mean("novel", "0.50:0.95", "all", s.novel_map50_95);
        }
        if let Some(buckets) = &s.bucket_map50 {
            push_mean("all", "0.50", "small", buckets.small);
            push_mean("all", "0.50", "medium", buckets.medium);
            push_mean("all", "0.50", "large", buckets.large);
        }
        out
    }
}

/// Relative mAP `(map_fsod - map_baseline) / map_baseline`.
///
/// Undefined for a non-positive baseline.
pub fn rmap(map_fsod: f64, map_baseline: f64) -> Result<f64> {
    if !(map_baseline > 0.0) || !map_baseline.is_finite() || !map_fsod.is_finite() {
        return Err(Error::UndefinedMetric(format!(
            "relative mAP needs a positive baseline, got {map_baseline}"
        )));
    }
    Ok((map_fsod - map_baseline) / map_baseline)
}

/// One (fsod, baseline) comparison, as a signed percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmapEntry {
    pub label: String,
    pub map_fsod: f64,
    pub map_baseline: f64,
    pub rmap_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RmapReport {
    pub entries: Vec<RmapEntry>,
}

impl RmapReport {
    /// Compares the overall, base and novel mAP@0.5 of two reports wherever
    /// both sides carry a value.
    pub fn from_summaries(fsod: &MapSummary, baseline: &MapSummary) -> Result<RmapReport> {
        let mut entries = Vec::new();
        let pairs = [
            ("all", fsod.map50, baseline.map50),
            ("base", fsod.base_map50, baseline.base_map50),
            ("novel", fsod.novel_map50, baseline.novel_map50),
        ];
        for (label, f, b) in pairs {
            if let (Some(f), Some(b)) = (f, b) {
                entries.push(RmapEntry {
                    label: label.into(),
                    map_fsod: f,
                    map_baseline: b,
                    rmap_percent: 100.0 * rmap(f, b)?,
                });
            }
        }
        if entries.is_empty() {
            return Err(Error::UndefinedMetric(
                "no comparable mAP@0.5 values in the two reports".into(),
            ));
        }
        Ok(RmapReport { entries })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("split,map_fsod,map_baseline,rmap_percent\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.2}\n",
                e.label, e.map_fsod, e.map_baseline, e.rmap_percent
            ));
        }
        out
    }
}

/// Ground-truth JSON document: images, annotations and categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub images: Vec<ImageInfo>,
    pub annotations: Vec<GtAnnotation>,
    pub categories: Vec<CategoryInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtAnnotation {
    pub image_id: u64,
    pub category_id: u32,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub id: u32,
    pub name: String,
}

impl GroundTruthFile {
    pub fn parse(json: &str, context: &str) -> Result<Self> {
        let file: GroundTruthFile = serde_json::from_str(json).map_err(|source| Error::Json {
            context: context.to_string(),
            source,
        })?;
        for ann in &file.annotations {
            validate_bbox(&ann.bbox, "annotation")?;
        }
        Ok(file)
    }

    pub fn records(&self) -> Vec<GroundTruthRecord> {
        self.annotations
            .iter()
            .map(|a| GroundTruthRecord {
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: a.bbox,
            })
            .collect()
    }

    pub fn category_ids(&self) -> Vec<u32> {
        self.categories.iter().map(|c| c.id).collect()
    }
}

/// Parses the detections document: a JSON list of scored records.
pub fn parse_detections(json: &str, context: &str) -> Result<Vec<DetectionRecord>> {
    let dets: Vec<DetectionRecord> = serde_json::from_str(json).map_err(|source| Error::Json {
        context: context.to_string(),
        source,
    })?;
    for det in &dets {
        validate_bbox(&det.bbox, "detection")?;
    }
    Ok(dets)
}

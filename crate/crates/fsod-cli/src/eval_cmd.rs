//! `eval`: detection metrics from ground-truth and detection JSON files.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};

use fsod_core::episodes::ClassSplit;
use fsod_core::eval::{
    compute_map_report, parse_detections, ApInterpolation, EvalOptions, GroundTruthFile,
};

use crate::{read_to_string, write_json, write_out, Ctx};

#[derive(Clone, Copy, ValueEnum)]
pub enum ThresholdSet {
    /// Single IoU threshold 0.5.
    Voc,
    /// Thresholds 0.50:0.05:0.95.
    Coco,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Interpolation {
    /// Area under the monotone precision envelope.
    AllPoint,
    /// 101-point interpolation.
    Point101,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Ground-truth JSON (images/annotations/categories).
    #[arg(long)]
    gt: PathBuf,

    /// Detections JSON (list of scored records).
    #[arg(long)]
    det: PathBuf,

    /// IoU threshold set.
    #[arg(long, value_enum, default_value_t = ThresholdSet::Voc)]
    thresholds: ThresholdSet,

    /// Also compute small/medium/large bucket APs.
    #[arg(long)]
    buckets: bool,

    #[arg(long, value_enum, default_value_t = Interpolation::AllPoint)]
    interpolation: Interpolation,

    /// Canonical dataset split for base/novel aggregation.
    #[arg(long, conflicts_with = "novel")]
    dataset: Option<String>,

    /// Comma-separated novel class ids (base = remaining categories).
    #[arg(long)]
    novel: Option<String>,
}

pub(crate) fn parse_id_list(spec: &str) -> Result<BTreeSet<u32>> {
    spec.split(',')
        .map(|token| token.trim().parse::<u32>().context("parsing class id list"))
        .collect()
}

/// Split selection shared with `sample-episodes`: canonical dataset, novel
/// id list against the file's categories, or everything as base.
pub(crate) fn resolve_split(
    file: &GroundTruthFile,
    dataset: Option<&str>,
    novel: Option<&str>,
) -> Result<ClassSplit> {
    if let Some(name) = dataset {
        return ClassSplit::canonical(name).map_err(|e| anyhow::anyhow!("{e}"));
    }
    let categories: BTreeSet<u32> = file.category_ids().into_iter().collect();
    let novel_ids = match novel {
        Some(spec) => parse_id_list(spec)?,
        None => BTreeSet::new(),
    };
    let base: BTreeSet<u32> = categories.difference(&novel_ids).copied().collect();
    ClassSplit::new("custom", base, novel_ids).map_err(|e| anyhow::anyhow!("{e}"))
}

pub fn run(ctx: &Ctx, args: EvalArgs) -> Result<()> {
    let gt_text = read_to_string(&args.gt)?;
    let det_text = read_to_string(&args.det)?;
    let gt_file = GroundTruthFile::parse(&gt_text, &args.gt.display().to_string())
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let dets = parse_detections(&det_text, &args.det.display().to_string())
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let split = resolve_split(&gt_file, args.dataset.as_deref(), args.novel.as_deref())?;

    let options = EvalOptions {
        thresholds: match args.thresholds {
            ThresholdSet::Voc => fsod_core::eval::voc_thresholds(),
            ThresholdSet::Coco => fsod_core::eval::coco_thresholds(),
        },
        buckets: args.buckets,
        interpolation: match args.interpolation {
            Interpolation::AllPoint => ApInterpolation::AllPoint,
            Interpolation::Point101 => ApInterpolation::Point101,
        },
    };

    let report = compute_map_report(&gt_file.records(), &dets, &split, &options)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    write_json(ctx, "report.json", &report)?;
    write_out(ctx, "report.csv", &report.to_csv())?;

    if let Some(map50) = report.summary.map50 {
        println!("mAP@0.5 = {map50:.6}");
    }
    if let Some(map) = report.summary.map50_95 {
        println!("mAP@0.5:0.95 = {map:.6}");
    }
    Ok(())
}

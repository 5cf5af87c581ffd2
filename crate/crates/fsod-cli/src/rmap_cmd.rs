//! `rmap`: relative mAP of a few-shot report against a baseline report.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use fsod_core::eval::{MetricReport, RmapReport};

use crate::{read_to_string, svg, write_json, write_out, Ctx};

#[derive(Args)]
pub struct RmapArgs {
    /// Metric report of the few-shot method.
    #[arg(long)]
    fsod: PathBuf,

    /// Metric report of the non-few-shot baseline.
    #[arg(long)]
    baseline: PathBuf,
}

pub fn run(ctx: &Ctx, args: RmapArgs) -> Result<()> {
    let fsod: MetricReport = serde_json::from_str(&read_to_string(&args.fsod)?)
        .with_context(|| format!("parsing {}", args.fsod.display()))?;
    let baseline: MetricReport = serde_json::from_str(&read_to_string(&args.baseline)?)
        .with_context(|| format!("parsing {}", args.baseline.display()))?;

    let report = RmapReport::from_summaries(&fsod.summary, &baseline.summary)
        .map_err(|e| anyhow::anyhow!("{e}"))?;

    write_json(ctx, "rmap.json", &report)?;
    write_out(ctx, "rmap.csv", &report.to_csv())?;
    write_out(ctx, "rmap.svg", &svg::rmap_bar_chart(&report))?;

    for entry in &report.entries {
        println!(
            "{}: mAP {:.3} vs baseline {:.3} -> RmAP {:+.2}%",
            entry.label, entry.map_fsod, entry.map_baseline, entry.rmap_percent
        );
    }
    Ok(())
}

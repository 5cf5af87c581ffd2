//! `fsod` — command-line toolkit around the few-shot detection building
//! blocks: attention forward demos, detection metrics and relative-mAP
//! reports, episode sampling, augmentation, support-patch extraction and
//! gradient checking.
//!
//! Every command is deterministic given `--seed`; per-item randomness is
//! derived through the library's seed-mixing rule, and re-running a command
//! overwrites its outputs byte-identically.

mod augment_cmd;
mod demo;
mod episodes_cmd;
mod eval_cmd;
mod grad_check;
mod imageio;
mod rmap_cmd;
mod support_cmd;
mod svg;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fsod", version, about = "Few-shot object detection toolkit")]
struct Cli {
    /// Master seed; all randomness derives from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for evaluation (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Output directory for files this command writes.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an attention pipeline on seeded synthetic pyramids and print
    /// per-class output statistics.
    DemoForward(demo::DemoArgs),
    /// Evaluate detections against ground truth; writes report.json/.csv.
    Eval(eval_cmd::EvalArgs),
    /// Compare two metric reports; writes rmap.json/.csv and a bar chart.
    Rmap(rmap_cmd::RmapArgs),
    /// Sample training or evaluation episodes; writes one JSON per episode.
    SampleEpisodes(episodes_cmd::EpisodesArgs),
    /// Apply the object-preserving augmentation pipeline to an image.
    Augment(augment_cmd::AugmentArgs),
    /// Extract support patches for every annotated box.
    ExtractSupport(support_cmd::SupportArgs),
    /// Verify analytic attention gradients against finite differences.
    GradCheck(grad_check::GradCheckArgs),
}

/// Common context handed to every command.
pub(crate) struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
    };
    match cli.command {
        Command::DemoForward(args) => demo::run(&ctx, args),
        Command::Eval(args) => eval_cmd::run(&ctx, args),
        Command::Rmap(args) => rmap_cmd::run(&ctx, args),
        Command::SampleEpisodes(args) => episodes_cmd::run(&ctx, args),
        Command::Augment(args) => augment_cmd::run(&ctx, args),
        Command::ExtractSupport(args) => support_cmd::run(&ctx, args),
        Command::GradCheck(args) => grad_check::run(&ctx, args),
    }
}

/// Shared options for commands that read an image plus a boxes document.
#[derive(Args)]
pub(crate) struct AnnotatedInput {
    /// Input image (PNG).
    #[arg(long)]
    pub image: PathBuf,

    /// Box annotations: JSON list of {"category_id", "bbox": [x, y, w, h]}.
    #[arg(long)]
    pub boxes: PathBuf,
}

pub(crate) fn read_to_string(path: &PathBuf) -> Result<String> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn ensure_out_dir(ctx: &Ctx) -> Result<()> {
    std::fs::create_dir_all(&ctx.out)
        .with_context(|| format!("creating output directory {}", ctx.out.display()))
}

pub(crate) fn write_out(ctx: &Ctx, name: &str, contents: &str) -> Result<PathBuf> {
    ensure_out_dir(ctx)?;
    let path = ctx.out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(path)
}

pub(crate) fn write_json<T: serde::Serialize>(ctx: &Ctx, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_out(ctx, name, &text)
}

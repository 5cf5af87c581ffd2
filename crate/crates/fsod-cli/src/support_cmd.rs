//! `extract-support`: fixed-size support patches for every annotated box.

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;

use fsod_core::support::{extract_support, ExtractionStrategy, StrategyKind};

use crate::imageio::{load_annotated, save_image, BoxEntry};
use crate::{ensure_out_dir, read_to_string, write_json, AnnotatedInput, Ctx};

#[derive(Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Default,
    ContextPadding,
    Reflection,
    SameSize,
    Multiscale,
    Mixed,
}

impl StrategyArg {
    fn kind(self) -> StrategyKind {
        match self {
            StrategyArg::Default => StrategyKind::Default,
            StrategyArg::ContextPadding => StrategyKind::ContextPadding,
            StrategyArg::Reflection => StrategyKind::Reflection,
            StrategyArg::SameSize => StrategyKind::SameSize,
            StrategyArg::Multiscale => StrategyKind::Multiscale,
            StrategyArg::Mixed => StrategyKind::Mixed,
        }
    }
}

#[derive(Args)]
pub struct SupportArgs {
    #[command(flatten)]
    input: AnnotatedInput,

    #[arg(long, value_enum, default_value_t = StrategyArg::SameSize)]
    strategy: StrategyArg,

    #[arg(long, default_value_t = 128)]
    patch_size: usize,
}

#[derive(Serialize)]
struct ManifestEntry {
    output: String,
    category_id: u32,
    bbox: [f64; 4],
    strategy: StrategyKind,
    scale_index: usize,
}

pub fn run(ctx: &Ctx, args: SupportArgs) -> Result<()> {
    let boxes_text = read_to_string(&args.input.boxes)?;
    let annotated = load_annotated(&args.input.image, &boxes_text)?;
    let strategy = ExtractionStrategy {
        patch_size: args.patch_size,
        ..ExtractionStrategy::new(args.strategy.kind())
    };

    ensure_out_dir(ctx)?;
    let mut manifest = Vec::new();
    for (i, b) in annotated.boxes.iter().enumerate() {
        let patches =
            extract_support(&annotated, b, &strategy).map_err(|e| anyhow::anyhow!("{e}"))?;
        for patch in patches {
            let name = format!("patch_{i:03}_s{}.png", patch.scale_index);
            save_image(&patch.image, &ctx.out.join(&name))?;
            let entry = BoxEntry::from_bounding_box(&patch.source_box);
            manifest.push(ManifestEntry {
                output: name,
                category_id: entry.category_id,
                bbox: entry.bbox,
                strategy: patch.strategy,
                scale_index: patch.scale_index,
            });
        }
    }
    write_json(ctx, "support_manifest.json", &manifest)?;
    Ok(())
}

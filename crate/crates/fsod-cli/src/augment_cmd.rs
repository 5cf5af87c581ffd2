//! `augment`: object-preserving augmentation of an annotated image.

use anyhow::Result;
use clap::Args;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use fsod_core::augment::{augment, AugmentConfig};
use fsod_core::episodes::mix_seed;

use crate::imageio::{load_annotated, save_image, BoxEntry};
use crate::{ensure_out_dir, read_to_string, write_json, AnnotatedInput, Ctx};

#[derive(Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    input: AnnotatedInput,

    /// Augmentation configuration JSON (defaults apply when omitted).
    #[arg(long)]
    config: Option<std::path::PathBuf>,

    /// Number of augmented variants to emit.
    #[arg(long, default_value_t = 1)]
    count: usize,
}

#[derive(Serialize)]
struct ManifestEntry {
    output: String,
    seed: u64,
    boxes: Vec<BoxEntry>,
}

pub fn run(ctx: &Ctx, args: AugmentArgs) -> Result<()> {
    let boxes_text = read_to_string(&args.input.boxes)?;
    let annotated = load_annotated(&args.input.image, &boxes_text)?;
    let cfg = match &args.config {
        Some(path) => AugmentConfig::parse(&read_to_string(path)?, &path.display().to_string())
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        None => AugmentConfig::default(),
    };

    ensure_out_dir(ctx)?;
    let mut manifest = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let seed = mix_seed(ctx.seed, i as u64);
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let out = augment(&annotated, &cfg, &mut rng).map_err(|e| anyhow::anyhow!("{e}"))?;
        let name = format!("aug_{i:03}.png");
        save_image(&out.image, &ctx.out.join(&name))?;
        manifest.push(ManifestEntry {
            output: name,
            seed,
            boxes: out.boxes.iter().map(BoxEntry::from_bounding_box).collect(),
        });
    }
    write_json(ctx, "augment_manifest.json", &manifest)?;
    Ok(())
}

//! `sample-episodes`: seeded episode generation from a ground-truth index.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use fsod_core::episodes::{
    mix_seed, sample_episode, sample_eval_suite, sample_support_pool, DatasetIndex, EpisodeSpec,
};
use fsod_core::eval::GroundTruthFile;

use crate::eval_cmd::resolve_split;
use crate::{read_to_string, write_json, Ctx};

#[derive(Clone, Copy, ValueEnum)]
pub enum PhaseArg {
    /// Base training: episode classes come from the base set only, one shot.
    Base,
    /// Fine-tuning: at least one novel class, novel supports frozen.
    Finetune,
    /// Evaluation suite: all classes, 500 instances requested per class.
    Eval,
}

#[derive(Args)]
pub struct EpisodesArgs {
    /// Ground-truth JSON backing the sampler.
    #[arg(long)]
    gt: PathBuf,

    /// Canonical dataset split (dota, dior, pascal_voc, coco).
    #[arg(long, conflicts_with = "novel")]
    dataset: Option<String>,

    /// Comma-separated novel class ids (base = remaining categories).
    #[arg(long)]
    novel: Option<String>,

    #[arg(long, value_enum, default_value_t = PhaseArg::Base)]
    phase: PhaseArg,

    #[arg(long, default_value_t = 5)]
    episodes: usize,

    /// Support examples per class (base phase forces 1 unless overridden).
    #[arg(long)]
    shots: Option<usize>,

    #[arg(long, default_value_t = 100)]
    query_per_class: usize,
}

pub fn run(ctx: &Ctx, args: EpisodesArgs) -> Result<()> {
    let gt_text = read_to_string(&args.gt)?;
    let gt_file = GroundTruthFile::parse(&gt_text, &args.gt.display().to_string())
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let index = DatasetIndex::from_ground_truth(&gt_file).map_err(|e| anyhow::anyhow!("{e}"))?;
    let split = resolve_split(&gt_file, args.dataset.as_deref(), args.novel.as_deref())?;

    match args.phase {
        PhaseArg::Base => {
            let mut spec = EpisodeSpec::base_training();
            if let Some(shots) = args.shots {
                spec.shots = shots;
            }
            spec.query_images_per_class = args.query_per_class;
            for i in 0..args.episodes {
                let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(ctx.seed, 1 + i as u64));
                let episode = sample_episode(&index, &split, &spec, None, &mut rng)
                    .map_err(|e| anyhow::anyhow!("episode {i}: {e}"))?;
                write_json(ctx, &format!("episode_{i:04}.json"), &episode)?;
            }
        }
        PhaseArg::Finetune => {
            if split.novel.is_empty() {
                bail!("fine-tuning needs novel classes; pass --dataset or --novel");
            }
            let shots = args.shots.unwrap_or(5);
            let mut spec = EpisodeSpec::fine_tuning(shots);
            spec.query_images_per_class = args.query_per_class;
            // the frozen pool is drawn once, on its own seed stream
            let mut pool_rng = ChaCha20Rng::seed_from_u64(mix_seed(ctx.seed, 0));
            let pool = sample_support_pool(&index, &split, shots, &mut pool_rng)
                .map_err(|e| anyhow::anyhow!("support pool: {e}"))?;
            write_json(ctx, "novel_pool.json", &pool)?;
            for i in 0..args.episodes {
                let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(ctx.seed, 1 + i as u64));
                let episode = sample_episode(&index, &split, &spec, Some(&pool), &mut rng)
                    .map_err(|e| anyhow::anyhow!("episode {i}: {e}"))?;
                write_json(ctx, &format!("episode_{i:04}.json"), &episode)?;
            }
        }
        PhaseArg::Eval => {
            let shots = args.shots.unwrap_or(5);
            let mut rng = ChaCha20Rng::seed_from_u64(mix_seed(ctx.seed, 1));
            let suite = sample_eval_suite(&index, &split, shots, args.episodes, &mut rng)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            for (i, episode) in suite.iter().enumerate() {
                write_json(ctx, &format!("episode_{i:04}.json"), episode)?;
            }
        }
    }
    println!("sampled {} episode(s)", args.episodes);
    Ok(())
}

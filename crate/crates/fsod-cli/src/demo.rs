//! `demo-forward`: run an attention preset or configuration on seeded
//! synthetic pyramids and print per-class output statistics.

use anyhow::{bail, Context, Result};
use clap::Args;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use fsod_core::aaf::{preset_by_name, run_pipeline, AafConfig};
use fsod_core::episodes::mix_seed;
use fsod_core::features::{FeatureMap, PyramidFeatures};
use fsod_core::xqsa::{xqsa_forward, XqsaConfig, XqsaWeights};

use crate::{read_to_string, Ctx};

#[derive(Args)]
pub struct DemoArgs {
    /// Preset name: identity, frw, dana_like, drl or mfrcn_fusion.
    #[arg(long, conflicts_with_all = ["config", "xqsa_config"])]
    preset: Option<String>,

    /// Attention configuration document (alignment/attention/fusion/order).
    #[arg(long, conflicts_with = "xqsa_config")]
    config: Option<std::path::PathBuf>,

    /// Cross-scale alignment configuration document.
    #[arg(long)]
    xqsa_config: Option<std::path::PathBuf>,

    /// Channels of the synthetic feature pyramids.
    #[arg(long, default_value_t = 8)]
    channels: usize,

    /// Query pyramid spatial shapes, e.g. "8x8,4x4,2x2".
    #[arg(long, default_value = "8x8,4x4,2x2")]
    shape: String,

    /// Support pyramid spatial shapes (defaults to the query's).
    #[arg(long)]
    support_shape: Option<String>,

    /// Number of classes to condition on.
    #[arg(long, default_value_t = 2)]
    classes: usize,

    /// Support examples per class (averaged before the pipeline).
    #[arg(long, default_value_t = 1)]
    shots: usize,
}

fn parse_shapes(spec: &str) -> Result<Vec<(usize, usize)>> {
    spec.split(',')
        .map(|level| {
            let (h, w) = level
                .trim()
                .split_once('x')
                .with_context(|| format!("bad level shape '{level}', expected HxW"))?;
            Ok((h.parse()?, w.parse()?))
        })
        .collect()
}

fn synthetic_pyramid(seed: u64, channels: usize, shapes: &[(usize, usize)]) -> PyramidFeatures {
    use rand_chacha::rand_core::RngCore;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let levels = shapes
        .iter()
        .map(|&(h, w)| {
            let data = (0..channels * h * w)
                // uniform in [-1, 1)
                .map(|_| rng.next_u64() as f64 / (u64::MAX as f64 / 2.0) - 1.0)
                .collect();
            FeatureMap::new(channels, h, w, data).expect("synthetic values are finite")
        })
        .collect();
    PyramidFeatures::new(levels).expect("at least one level")
}

fn level_stats(level: &FeatureMap) -> (f64, f64, f64) {
    let data = level.data();
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    (min, max, mean)
}

fn print_outputs(query: &PyramidFeatures, outputs: &[PyramidFeatures]) {
    println!(
        "query: {} levels, {} channels",
        query.level_count(),
        query.channels()
    );
    for (l, level) in query.levels().iter().enumerate() {
        println!(
            "  level {l}: shape {}x{}x{}",
            level.channels(),
            level.height(),
            level.width()
        );
    }
    for (c, pyramid) in outputs.iter().enumerate() {
        println!("class {c}:");
        for (l, level) in pyramid.levels().iter().enumerate() {
            let (min, max, mean) = level_stats(level);
            println!(
                "  level {l}: shape {}x{}x{} min {min:.6} max {max:.6} mean {mean:.6}",
                level.channels(),
                level.height(),
                level.width()
            );
        }
    }
}

pub fn run(ctx: &Ctx, args: DemoArgs) -> Result<()> {
    if args.classes == 0 || args.shots == 0 {
        bail!("classes and shots must be at least 1");
    }
    let query_shapes = parse_shapes(&args.shape)?;
    let support_shapes = match &args.support_shape {
        Some(spec) => parse_shapes(spec)?,
        None => query_shapes.clone(),
    };

    let query = synthetic_pyramid(mix_seed(ctx.seed, 0), args.channels, &query_shapes);
    let supports: Vec<Vec<PyramidFeatures>> = (0..args.classes)
        .map(|class| {
            (0..args.shots)
                .map(|shot| {
                    let stream = 1 + (class * args.shots + shot) as u64;
                    synthetic_pyramid(mix_seed(ctx.seed, stream), args.channels, &support_shapes)
                })
                .collect()
        })
        .collect();

    let outputs = if let Some(path) = &args.xqsa_config {
        let config: XqsaConfig =
            serde_json::from_str(&read_to_string(path)?).context("parsing XQSA config")?;
        let weights = XqsaWeights::seeded(args.channels, &config);
        xqsa_forward(&query, &supports, &weights, &config).map_err(|e| anyhow::anyhow!("{e}"))?
    } else {
        let config: AafConfig = if let Some(path) = &args.config {
            let doc = serde_json::from_str(&read_to_string(path)?)
                .context("parsing attention config")?;
            AafConfig::from_json(&doc, args.channels, ctx.seed)
                .map_err(|e| anyhow::anyhow!("{e}"))?
        } else {
            let name = args.preset.as_deref().unwrap_or("identity");
            preset_by_name(name, args.channels, ctx.seed).map_err(|e| anyhow::anyhow!("{e}"))?
        };
        run_pipeline(&query, &supports, &config).map_err(|e| anyhow::anyhow!("{e}"))?
    };

    print_outputs(&query, &outputs);
    Ok(())
}

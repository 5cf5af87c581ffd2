//! Cross-scale query-support alignment.
//!
//! All pyramid levels are flattened and concatenated, projected to queries,
//! keys and values, and aligned through a softmax affinity that lets every
//! query position attend to support positions at every scale. The aligned
//! features pass through a two-layer MLP with skip connections; layer
//! normalization is applied before the alignment projections and before the
//! MLP. An analytic backward pass for the attention core supports gradient
//! verification against finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::aaf::{background_attenuate, BgaWeights};
use crate::error::{Error, Result};
use crate::features::{
    flatten_spatial, layer_norm, mlp_forward, row_softmax, unflatten_spatial, FeatureMap,
    FlatFeatures, LayerNormParams, MlpWeights, PyramidFeatures,
};
use crate::init;

/// Flattened pyramid plus the bookkeeping needed to un-concatenate it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcatenatedLevels {
    pub features: FlatFeatures,
    /// Starting row of each level block, in pyramid order.
    pub offsets: Vec<usize>,
    /// Spatial shape (height, width) of each level.
    pub shapes: Vec<(usize, usize)>,
}

impl ConcatenatedLevels {
    pub fn level_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn level_rows(&self, level: usize) -> usize {
        let (h, w) = self.shapes[level];
        h * w
    }

    /// Splits a matrix with the same row layout back into pyramid levels.
    pub fn split(&self, features: &FlatFeatures) -> Result<PyramidFeatures> {
        if features.rows() != self.features.rows() {
            return Err(Error::shape(format!(
                "cannot split {} rows with offsets built for {}",
                features.rows(),
                self.features.rows()
            )));
        }
        let levels = self
            .offsets
            .iter()
            .zip(&self.shapes)
            .map(|(&start, &(h, w))| {
                unflatten_spatial(&features.row_slice(start, h * w), h, w)
            })
            .collect::<Result<Vec<FeatureMap>>>()?;
        PyramidFeatures::new(levels)
    }
}

/// Flattens every level and stacks the blocks in pyramid order.
pub fn concat_levels(pyramid: &PyramidFeatures) -> ConcatenatedLevels {
    let mut offsets = Vec::with_capacity(pyramid.level_count());
    let mut shapes = Vec::with_capacity(pyramid.level_count());
    let mut rows = Vec::new();
    let mut next = 0;
    let cols = pyramid.channels();
    for level in pyramid.levels() {
        offsets.push(next);
        shapes.push((level.height(), level.width()));
        next += level.positions();
        rows.extend_from_slice(flatten_spatial(level).data());
    }
    ConcatenatedLevels {
        features: FlatFeatures::new(next, cols, rows).expect("level data already validated"),
        offsets,
        shapes,
    }
}

/// Softmax affinity `softmax(q * k^T / sqrt(d))`, one row per query position.
pub fn cross_scale_affinity(q: &FlatFeatures, k: &FlatFeatures) -> Result<FlatFeatures> {
    if q.cols() != k.cols() {
        return Err(Error::ChannelMismatch {
            left: q.cols(),
            right: k.cols(),
        });
    }
    if q.cols() == 0 {
        return Err(Error::arg("affinity requires at least one channel"));
    }
    let logits = q.matmul_transposed(k)?.scale(1.0 / (q.cols() as f64).sqrt());
    row_softmax(&logits, 1.0)
}

/// Component toggles and initialization seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XqsaConfig {
    /// Affinity across all levels at once; when off, each query level
    /// attends only to the same support level.
    pub multiscale_alignment: bool,
    pub mlp_fusion: bool,
    pub skip_connections: bool,
    pub background_attenuation: bool,
    /// Apply the pre-alignment layer norm to the value projection input too.
    pub layer_norm_values: bool,
    pub seed: u64,
    /// Hidden width of the MLP; defaults to the channel count.
    pub mlp_hidden: Option<usize>,
}

impl Default for XqsaConfig {
    fn default() -> Self {
        Self {
            multiscale_alignment: true,
            mlp_fusion: true,
            skip_connections: true,
            background_attenuation: true,
            layer_norm_values: false,
            seed: 0,
            mlp_hidden: None,
        }
    }
}

/// Learnable parameters: Q/K/V projections, fusion MLP, layer norms and the
/// optional support attenuation matrix. Projections are shared across
/// classes; only the support features vary per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XqsaWeights {
    pub w_q: FlatFeatures,
    pub w_k: FlatFeatures,
    pub w_v: FlatFeatures,
    pub mlp: MlpWeights,
    pub ln_pre_align: LayerNormParams,
    pub ln_pre_mlp: LayerNormParams,
    pub bga: Option<BgaWeights>,
}

impl XqsaWeights {
    /// Seeded initialization for `channels`-deep features, uniform in
    /// [-1/sqrt(d), 1/sqrt(d)]. Identical seeds give bit-identical weights.
    pub fn seeded(channels: usize, config: &XqsaConfig) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let hidden = config.mlp_hidden.unwrap_or(channels);
        Self {
            w_q: init::uniform_matrix(channels, channels, channels, &mut rng),
            w_k: init::uniform_matrix(channels, channels, channels, &mut rng),
            w_v: init::uniform_matrix(channels, channels, channels, &mut rng),
            mlp: init::seeded_mlp(channels, hidden, channels, channels, &mut rng),
            ln_pre_align: LayerNormParams::identity(channels),
            ln_pre_mlp: LayerNormParams::identity(channels),
            bga: config.background_attenuation.then(|| BgaWeights {
                w: init::uniform_matrix(channels, channels, channels, &mut rng),
            }),
        }
    }

    pub fn channels(&self) -> usize {
        self.w_q.rows()
    }

    fn validate(&self, channels: usize) -> Result<()> {
        let square = |m: &FlatFeatures, name: &str| -> Result<()> {
            if m.rows() != channels || m.cols() != channels {
                return Err(Error::shape(format!(
                    "{name} is {}x{}, expected {channels}x{channels}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(())
        };
        square(&self.w_q, "w_q")?;
        square(&self.w_k, "w_k")?;
        square(&self.w_v, "w_v")?;
        if self.mlp.input_dim() != channels || self.mlp.output_dim() != channels {
            return Err(Error::shape(format!(
                "MLP maps {} -> {}, expected {channels} -> {channels}",
                self.mlp.input_dim(),
                self.mlp.output_dim()
            )));
        }
        Ok(())
    }
}

/// Runs the alignment over a query pyramid and per-class support pyramids,
/// returning one class-specific query pyramid per class.
pub fn xqsa_forward(
    query: &PyramidFeatures,
    supports: &[Vec<PyramidFeatures>],
    weights: &XqsaWeights,
    config: &XqsaConfig,
) -> Result<Vec<PyramidFeatures>> {
    if supports.is_empty() {
        return Err(Error::EmptyInput("support classes"));
    }
    let channels = query.channels();
    weights.validate(channels)?;
    if config.background_attenuation && weights.bga.is_none() {
        return Err(Error::arg(
            "background attenuation enabled but weights carry no attenuation matrix",
        ));
    }
    let concat_query = concat_levels(query);

    let mut outputs = Vec::with_capacity(supports.len());
    for class_supports in supports {
        let support = PyramidFeatures::mean(class_supports)?;
        if support.channels() != channels {
            return Err(Error::ChannelMismatch {
                left: channels,
                right: support.channels(),
            });
        }
        let concat_support = concat_levels(&support);
        let fused = forward_one_class(&concat_query, &concat_support, weights, config)?;
        outputs.push(concat_query.split(&fused)?);
    }
    Ok(outputs)
}

fn forward_one_class(
    query: &ConcatenatedLevels,
    support: &ConcatenatedLevels,
    weights: &XqsaWeights,
    config: &XqsaConfig,
) -> Result<FlatFeatures> {
    let x_q = &query.features;
    let x_s = if config.background_attenuation {
        let bga = weights.bga.as_ref().expect("presence checked by caller");
        background_attenuate(&support.features, bga)?
    } else {
        support.features.clone()
    };

    let q = layer_norm(x_q, &weights.ln_pre_align)?.matmul(&weights.w_q)?;
    let k = layer_norm(&x_s, &weights.ln_pre_align)?.matmul(&weights.w_k)?;
    let v = if config.layer_norm_values {
        layer_norm(&x_s, &weights.ln_pre_align)?.matmul(&weights.w_v)?
    } else {
        x_s.matmul(&weights.w_v)?
    };

    let mut aligned = if config.multiscale_alignment {
        cross_scale_affinity(&q, &k)?.matmul(&v)?
    } else {
        per_level_alignment(query, support, &q, &k, &v)?
    };

    if config.skip_connections {
        aligned = aligned.add(x_q)?;
    }
    if config.mlp_fusion {
        let refined = mlp_forward(&layer_norm(&aligned, &weights.ln_pre_mlp)?, &weights.mlp)?;
        if config.skip_connections {
            aligned.add(&refined)
        } else {
            Ok(refined)
        }
    } else {
        Ok(aligned)
    }
}

// Level l of the query attends only to level l of the support.
fn per_level_alignment(
    query: &ConcatenatedLevels,
    support: &ConcatenatedLevels,
    q: &FlatFeatures,
    k: &FlatFeatures,
    v: &FlatFeatures,
) -> Result<FlatFeatures> {
    if query.level_count() != support.level_count() {
        return Err(Error::shape(format!(
            "per-level alignment needs equal level counts, got {} vs {}",
            query.level_count(),
            support.level_count()
        )));
    }
    let mut data = Vec::with_capacity(q.rows() * v.cols());
    for level in 0..query.level_count() {
        let q_block = q.row_slice(query.offsets[level], query.level_rows(level));
        let k_block = k.row_slice(support.offsets[level], support.level_rows(level));
        let v_block = v.row_slice(support.offsets[level], support.level_rows(level));
        let aligned = cross_scale_affinity(&q_block, &k_block)?.matmul(&v_block)?;
        data.extend_from_slice(aligned.data());
    }
    FlatFeatures::new(q.rows(), v.cols(), data)
}

/// Gradients of the attention core `A = softmax(q k^T / sqrt(d)) v` with
/// respect to `q`, `k` and `v`, given the upstream gradient of a scalar loss
/// with respect to `A`.
pub fn xqsa_backward(
    q: &FlatFeatures,
    k: &FlatFeatures,
    v: &FlatFeatures,
    upstream: &FlatFeatures,
) -> Result<(FlatFeatures, FlatFeatures, FlatFeatures)> {
    if q.cols() != k.cols() {
        return Err(Error::ChannelMismatch {
            left: q.cols(),
            right: k.cols(),
        });
    }
    if k.rows() != v.rows() {
        return Err(Error::shape(format!(
            "{} key rows vs {} value rows",
            k.rows(),
            v.rows()
        )));
    }
    if upstream.rows() != q.rows() || upstream.cols() != v.cols() {
        return Err(Error::shape(format!(
            "upstream is {}x{}, expected {}x{}",
            upstream.rows(),
            upstream.cols(),
            q.rows(),
            v.cols()
        )));
    }
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let affinity = cross_scale_affinity(q, k)?;

    let grad_v = affinity.transpose().matmul(upstream)?;
    let grad_affinity = upstream.matmul_transposed(v)?;

    // softmax Jacobian: dS_ij = a_ij * (dA_ij - sum_k dA_ik a_ik)
    let n = affinity.rows();
    let m = affinity.cols();
    let mut grad_logits = vec![0.0; n * m];
    for i in 0..n {
        let a_row = affinity.row(i);
        let g_row = grad_affinity.row(i);
        let dot: f64 = a_row.iter().zip(g_row).map(|(a, g)| a * g).sum();
        for j in 0..m {
            grad_logits[i * m + j] = a_row[j] * (g_row[j] - dot);
        }
    }
    let grad_logits = FlatFeatures::new(n, m, grad_logits)?;

    let grad_q = grad_logits.matmul(k)?.scale(scale);
    let grad_k = grad_logits.transpose().matmul(q)?.scale(scale);
    Ok((grad_q, grad_k, grad_v))
}

/// Outcome of one finite-difference verification run.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub trials: usize,
    pub epsilon: f64,
    pub max_relative_error: f64,
    /// Worst relative error observed per trial.
    pub per_trial: Vec<f64>,
}

/// Compares the analytic attention-core gradients against central finite
/// differences on random instances with n, m <= 6 and d <= 4.
pub fn gradient_check(trials: usize, seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut per_trial = Vec::with_capacity(trials);
    for _ in 0..trials {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=6);
        let d = rng.gen_range(1..=4);
        let sample = |rng: &mut ChaCha20Rng, rows: usize, cols: usize| {
            FlatFeatures::new(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .expect("finite draws")
        };
        let q = sample(&mut rng, n, d);
        let k = sample(&mut rng, m, d);
        let v = sample(&mut rng, m, d);
        let upstream = sample(&mut rng, n, d);

        let loss = |q: &FlatFeatures, k: &FlatFeatures, v: &FlatFeatures| -> f64 {
            let out = cross_scale_affinity(q, k).unwrap().matmul(v).unwrap();
            out.data()
                .iter()
                .zip(upstream.data())
                .map(|(o, u)| o * u)
                .sum()
        };

        let (grad_q, grad_k, grad_v) = xqsa_backward(&q, &k, &v, &upstream)?;
        let mut worst = 0.0f64;
        let mut check = |target: &FlatFeatures, analytic: &FlatFeatures, which: usize| {
            for idx in 0..target.data().len() {
                let mut plus = target.data().to_vec();
                let mut minus = target.data().to_vec();
                plus[idx] += epsilon;
                minus[idx] -= epsilon;
                let plus = FlatFeatures::new(target.rows(), target.cols(), plus).unwrap();
                let minus = FlatFeatures::new(target.rows(), target.cols(), minus).unwrap();
                let (lp, lm) = match which {
                    0 => (loss(&plus, &k, &v), loss(&minus, &k, &v)),
                    1 => (loss(&q, &plus, &v), loss(&q, &minus, &v)),
                    _ => (loss(&q, &k, &plus), loss(&q, &k, &minus)),
                };
                let numeric = (lp - lm) / (2.0 * epsilon);
                let a = analytic.data()[idx];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max(rel);
            }
        };
        check(&q, &grad_q, 0);
        check(&k, &grad_k, 1);
        check(&v, &grad_v, 2);
        per_trial.push(worst);
    }
    let max_relative_error = per_trial.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport {
        trials,
        epsilon,
        max_relative_error,
        per_trial,
    })
}

//! Composable query-support attention pipeline.
//!
//! The pipeline has three stages: spatial alignment, global attention and a
//! fusion layer. Alignment and attention may run in either order; fusion,
//! when present, always runs last. Running the pipeline over a query pyramid
//! and per-class support pyramids yields one class-specific query pyramid per
//! class.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::features::{
    flatten_spatial, mlp_forward, row_softmax, unflatten_spatial, FlatFeatures, MlpWeights,
    PyramidFeatures,
};
use crate::init;

/// How support features are spatially re-organized against the query.
#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentKind {
    /// Both maps pass through unchanged.
    Identity,
    /// Support rows are re-expressed in query geometry through the affinity
    /// `query * support^T`; the query passes through unchanged.
    QueryKeySupport { normalize_rows: bool },
}

/// Pooling used to build the class re-weighting vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    #[default]
    Max,
    Average,
}

/// Single learned matrix driving the support self-attention refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgaWeights {
    pub w: FlatFeatures,
}

impl BgaWeights {
    /// Uniform init in [-1/sqrt(d), 1/sqrt(d)].
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        Self {
            w: init::uniform_matrix(dim, dim, dim, &mut rng),
        }
    }
}

/// How global information from the support set is injected.
#[derive(Debug, Clone, PartialEq)]
pub enum GlobalAttentionKind {
    None,
    /// Channel-wise re-weighting of the query by the pooled support vector.
    CrwGlobalPool { pool: PoolKind },
    /// Self-attention refinement of the support features.
    BackgroundAttenuation(BgaWeights),
}

/// How highlighted query and support maps are combined.
#[derive(Debug, Clone, PartialEq)]
pub enum FusionKind {
    None,
    /// Channel concatenation `[h_q, h_s]`.
    Concat,
    /// `[h_q + h_s, h_q - h_s]`.
    AddSubConcat,
    /// `[psi_dot(h_q * h_s), psi_sub(h_q - h_s), psi_cat([h_q, h_s])]` with
    /// per-position two-layer MLPs.
    LearnedPointwiseConcat {
        psi_dot: MlpWeights,
        psi_sub: MlpWeights,
        psi_cat: MlpWeights,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    AlignThenAttend,
    AttendThenAlign,
}

/// Declarative description of one attention composition.
#[derive(Debug, Clone, PartialEq)]
pub struct AafConfig {
    pub alignment: AlignmentKind,
    pub attention: GlobalAttentionKind,
    pub fusion: FusionKind,
    pub order: StageOrder,
}

impl AafConfig {
    /// Identity pipeline: query features pass through untouched.
    pub fn identity() -> Self {
        Self {
            alignment: AlignmentKind::Identity,
            attention: GlobalAttentionKind::None,
            fusion: FusionKind::None,
            order: StageOrder::AlignThenAttend,
        }
    }

    /// Channel count of the pipeline output for a `channels`-deep input.
    pub fn output_channels(&self, channels: usize) -> usize {
        match &self.fusion {
            FusionKind::None => channels,
            FusionKind::Concat | FusionKind::AddSubConcat => 2 * channels,
            FusionKind::LearnedPointwiseConcat { psi_dot, .. } => 3 * psi_dot.output_dim(),
        }
    }

    /// Structural JSON document describing this configuration. Learned
    /// weights are not carried; [`AafConfig::from_json`] re-seeds them.
    pub fn to_json(&self) -> Value {
        let (alignment, normalize_rows) = match &self.alignment {
            AlignmentKind::Identity => ("identity", false),
            AlignmentKind::QueryKeySupport { normalize_rows } => {
                ("query_key_support", *normalize_rows)
            }
        };
        let (attention, pool) = match &self.attention {
            GlobalAttentionKind::None => ("none", None),
            GlobalAttentionKind::CrwGlobalPool { pool } => ("crw_global_pool", Some(*pool)),
            GlobalAttentionKind::BackgroundAttenuation(_) => ("background_attenuation", None),
        };
        let fusion = match &self.fusion {
            FusionKind::None => "none",
            FusionKind::Concat => "concat",
            FusionKind::AddSubConcat => "add_sub_concat",
            FusionKind::LearnedPointwiseConcat { .. } => "learned_pointwise_concat",
        };
        let mut doc = json!({
            "alignment": alignment,
            "normalize_rows": normalize_rows,
            "attention": attention,
            "fusion": fusion,
            "order": match self.order {
                StageOrder::AlignThenAttend => "align_then_attend",
                StageOrder::AttendThenAlign => "attend_then_align",
            },
        });
        if let Some(pool) = pool {
            doc["pool"] = json!(pool);
        }
        doc
    }

    /// Parses the structural document, seeding any learned weights for
    /// channel count `channels` from `seed`.
    pub fn from_json(doc: &Value, channels: usize, seed: u64) -> Result<Self> {
        let field = |name: &str| -> Result<&str> {
            doc.get(name)
                .and_then(Value::as_str)
                .ok_or_else(|| Error::arg(format!("config field '{name}' missing or not a string")))
        };
        let normalize_rows = doc
            .get("normalize_rows")
            .and_then(Value::as_bool)
            .unwrap_or(false);
        let alignment = match field("alignment")? {
            "identity" => AlignmentKind::Identity,
            "query_key_support" => AlignmentKind::QueryKeySupport { normalize_rows },
            other => return Err(Error::arg(format!("unknown alignment '{other}'"))),
        };
        let attention = match field("attention")? {
            "none" => GlobalAttentionKind::None,
            "crw_global_pool" => {
                let pool = match doc.get("pool").and_then(Value::as_str) {
                    None | Some("max") => PoolKind::Max,
                    Some("average") => PoolKind::Average,
                    Some(other) => return Err(Error::arg(format!("unknown pool '{other}'"))),
                };
                GlobalAttentionKind::CrwGlobalPool { pool }
            }
            "background_attenuation" => {
                GlobalAttentionKind::BackgroundAttenuation(BgaWeights::seeded(channels, seed))
            }
            other => return Err(Error::arg(format!("unknown attention '{other}'"))),
        };
        let fusion = match field("fusion")? {
            "none" => FusionKind::None,
            "concat" => FusionKind::Concat,
            "add_sub_concat" => FusionKind::AddSubConcat,
            "learned_pointwise_concat" => learned_fusion(channels, seed),
            other => return Err(Error::arg(format!("unknown fusion '{other}'"))),
        };
        let order = match field("order")? {
            "align_then_attend" => StageOrder::AlignThenAttend,
            "attend_then_align" => StageOrder::AttendThenAlign,
            other => return Err(Error::arg(format!("unknown order '{other}'"))),
        };
        Ok(Self {
            alignment,
            attention,
            fusion,
            order,
        })
    }
}

/// Named attention compositions mirroring reimplemented methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodPreset {
    Frw,
    DanaLike,
    Drl,
    MfrcnFusion,
}

impl MethodPreset {
    /// Builds the preset's configuration; learned weights are seeded for the
    /// given channel count.
    pub fn config(self, channels: usize, seed: u64) -> AafConfig {
        match self {
            MethodPreset::Frw => AafConfig {
                alignment: AlignmentKind::Identity,
                attention: GlobalAttentionKind::CrwGlobalPool { pool: PoolKind::Max },
                fusion: FusionKind::None,
                order: StageOrder::AlignThenAttend,
            },
            MethodPreset::DanaLike => AafConfig {
                alignment: AlignmentKind::QueryKeySupport {
                    normalize_rows: true,
                },
                attention: GlobalAttentionKind::BackgroundAttenuation(BgaWeights::seeded(
                    channels, seed,
                )),
                fusion: FusionKind::Concat,
                // attenuation refines the supports before they are aligned
                order: StageOrder::AttendThenAlign,
            },
            MethodPreset::Drl => AafConfig {
                alignment: AlignmentKind::Identity,
                attention: GlobalAttentionKind::None,
                fusion: FusionKind::AddSubConcat,
                order: StageOrder::AlignThenAttend,
            },
            MethodPreset::MfrcnFusion => AafConfig {
                alignment: AlignmentKind::QueryKeySupport {
                    normalize_rows: true,
                },
                attention: GlobalAttentionKind::None,
                fusion: learned_fusion(channels, seed),
                order: StageOrder::AlignThenAttend,
            },
        }
    }
}

fn learned_fusion(channels: usize, seed: u64) -> FusionKind {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    FusionKind::LearnedPointwiseConcat {
        psi_dot: init::seeded_mlp(channels, channels, channels, channels, &mut rng),
        psi_sub: init::seeded_mlp(channels, channels, channels, channels, &mut rng),
        psi_cat: init::seeded_mlp(2 * channels, channels, channels, channels, &mut rng),
    }
}

/// Resolves a preset by name. `identity` yields the pass-through pipeline.
pub fn preset_by_name(name: &str, channels: usize, seed: u64) -> Result<AafConfig> {
    let normalized = name.to_ascii_lowercase().replace('-', "_");
    match normalized.as_str() {
        "identity" => Ok(AafConfig::identity()),
        "frw" => Ok(MethodPreset::Frw.config(channels, seed)),
        "dana_like" => Ok(MethodPreset::DanaLike.config(channels, seed)),
        "drl" => Ok(MethodPreset::Drl.config(channels, seed)),
        "mfrcn_fusion" => Ok(MethodPreset::MfrcnFusion.config(channels, seed)),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

/// Raw or row-normalized affinity `query * support^T` (n x m).
pub fn query_support_affinity(
    query: &FlatFeatures,
    support: &FlatFeatures,
    normalize_rows: bool,
) -> Result<FlatFeatures> {
    if query.cols() != support.cols() {
        return Err(Error::ChannelMismatch {
            left: query.cols(),
            right: support.cols(),
        });
    }
    let affinity = query.matmul_transposed(support)?;
    if normalize_rows {
        row_softmax(&affinity, 1.0)
    } else {
        Ok(affinity)
    }
}

/// Spatial alignment stage.
pub fn align(
    query: &FlatFeatures,
    support: &FlatFeatures,
    kind: &AlignmentKind,
) -> Result<(FlatFeatures, FlatFeatures)> {
    if query.cols() != support.cols() {
        return Err(Error::ChannelMismatch {
            left: query.cols(),
            right: support.cols(),
        });
    }
    match kind {
        AlignmentKind::Identity => Ok((query.clone(), support.clone())),
        AlignmentKind::QueryKeySupport { normalize_rows } => {
            let affinity = query_support_affinity(query, support, *normalize_rows)?;
            let aligned_support = affinity.matmul(support)?;
            Ok((query.clone(), aligned_support))
        }
    }
}

/// Support self-attention: `x + row_softmax(x * w * x^T / sqrt(d)) * x`.
pub fn background_attenuate(x: &FlatFeatures, weights: &BgaWeights) -> Result<FlatFeatures> {
    if weights.w.rows() != x.cols() || weights.w.cols() != x.cols() {
        return Err(Error::shape(format!(
            "attenuation matrix {}x{} for {} channels",
            weights.w.rows(),
            weights.w.cols(),
            x.cols()
        )));
    }
    let scale = 1.0 / (x.cols() as f64).sqrt();
    let logits = x.matmul(&weights.w)?.matmul_transposed(x)?.scale(scale);
    let attended = row_softmax(&logits, 1.0)?.matmul(x)?;
    x.add(&attended)
}

/// Global attention stage.
pub fn global_attend(
    query: &FlatFeatures,
    support: &FlatFeatures,
    kind: &GlobalAttentionKind,
) -> Result<(FlatFeatures, FlatFeatures)> {
    if query.cols() != support.cols() {
        return Err(Error::ChannelMismatch {
            left: query.cols(),
            right: support.cols(),
        });
    }
    match kind {
        GlobalAttentionKind::None => Ok((query.clone(), support.clone())),
        GlobalAttentionKind::CrwGlobalPool { pool } => {
            let pooled = match pool {
                PoolKind::Max => support.column_max(),
                PoolKind::Average => support.column_mean(),
            };
            let mut data = Vec::with_capacity(query.rows() * query.cols());
            for p in 0..query.rows() {
                for (c, &v) in query.row(p).iter().enumerate() {
                    data.push(v * pooled[c]);
                }
            }
            Ok((
                FlatFeatures::new(query.rows(), query.cols(), data)?,
                support.clone(),
            ))
        }
        GlobalAttentionKind::BackgroundAttenuation(weights) => {
            Ok((query.clone(), background_attenuate(support, weights)?))
        }
    }
}

/// Fusion stage, always last.
pub fn fuse(
    query: &FlatFeatures,
    support: &FlatFeatures,
    kind: &FusionKind,
) -> Result<FlatFeatures> {
    match kind {
        FusionKind::None => Ok(query.clone()),
        FusionKind::Concat => query.concat_cols(support),
        FusionKind::AddSubConcat => query.add(support)?.concat_cols(&query.sub(support)?),
        FusionKind::LearnedPointwiseConcat {
            psi_dot,
            psi_sub,
            psi_cat,
        } => {
            let dot = mlp_forward(&query.hadamard(support)?, psi_dot)?;
            let sub = mlp_forward(&query.sub(support)?, psi_sub)?;
            let cat = mlp_forward(&query.concat_cols(support)?, psi_cat)?;
            dot.concat_cols(&sub)?.concat_cols(&cat)
        }
    }
}

/// Runs the configured pipeline per class and per level.
///
/// `supports[c]` holds the support pyramids for class `c`; several shots are
/// averaged element-wise before the pipeline. Each returned pyramid holds the
/// class-specific query features for the class at the same index.
pub fn run_pipeline(
    query: &PyramidFeatures,
    supports: &[Vec<PyramidFeatures>],
    config: &AafConfig,
) -> Result<Vec<PyramidFeatures>> {
    if supports.is_empty() {
        return Err(Error::EmptyInput("support classes"));
    }
    let mut outputs = Vec::with_capacity(supports.len());
    for class_supports in supports {
        let support = PyramidFeatures::mean(class_supports)?;
        if support.level_count() != query.level_count() {
            return Err(Error::shape(format!(
                "support has {} levels, query has {}",
                support.level_count(),
                query.level_count()
            )));
        }
        if support.channels() != query.channels() {
            return Err(Error::ChannelMismatch {
                left: query.channels(),
                right: support.channels(),
            });
        }
        let levels = query
            .levels()
            .iter()
            .zip(support.levels())
            .map(|(q_level, s_level)| {
                let fused = run_level(
                    &flatten_spatial(q_level),
                    &flatten_spatial(s_level),
                    config,
                )?;
                unflatten_spatial(&fused, q_level.height(), q_level.width())
            })
            .collect::<Result<Vec<_>>>()?;
        outputs.push(PyramidFeatures::new(levels)?);
    }
    Ok(outputs)
}

fn run_level(
    query: &FlatFeatures,
    support: &FlatFeatures,
    config: &AafConfig,
) -> Result<FlatFeatures> {
    let (h_q, h_s) = match config.order {
        StageOrder::AlignThenAttend => {
            let (a_q, a_s) = align(query, support, &config.alignment)?;
            global_attend(&a_q, &a_s, &config.attention)?
        }
        StageOrder::AttendThenAlign => {
            let (g_q, g_s) = global_attend(query, support, &config.attention)?;
            align(&g_q, &g_s, &config.alignment)?
        }
    };
    fuse(&h_q, &h_s, &config.fusion)
}

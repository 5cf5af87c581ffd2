//! Independent naive re-implementations used as oracles by the integration
//! tests. Everything here is deliberately written with plain loops and its
//! own arithmetic, sharing only data types with the crate under test.

use std::collections::{BTreeMap, BTreeSet};

use fsod_core::aaf::{AafConfig, AlignmentKind, FusionKind, GlobalAttentionKind, PoolKind, StageOrder};
use fsod_core::eval::{DetectionRecord, GroundTruthRecord};
use fsod_core::features::{Activation, FeatureMap, MlpWeights, PyramidFeatures};
use fsod_core::xqsa::{XqsaConfig, XqsaWeights};

pub type Rows = Vec<Vec<f64>>;

/// Reads a feature map into row-major (position, channel) form using raw
/// index arithmetic.
pub fn map_rows(map: &FeatureMap) -> Rows {
    let n = map.height() * map.width();
    let d = map.channels();
    (0..n)
        .map(|p| (0..d).map(|c| map.data()[c * n + p]).collect())
        .collect()
}

fn matmul(a: &Rows, b: &Rows) -> Rows {
    let rows = a.len();
    let inner = b.len();
    let cols = b[0].len();
    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let mut acc = 0.0;
            for k in 0..inner {
                acc += a[i][k] * b[k][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn transpose(a: &Rows) -> Rows {
    let rows = a.len();
    let cols = a[0].len();
    (0..cols)
        .map(|j| (0..rows).map(|i| a[i][j]).collect())
        .collect()
}

fn softmax_rows(a: &Rows) -> Rows {
    a.iter()
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.iter().map(|e| e / sum).collect()
        })
        .collect()
}

fn add(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

fn sub(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

fn hadamard(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * y).collect())
        .collect()
}

fn concat_cols(a: &Rows, b: &Rows) -> Rows {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect()
}

fn weight_rows(w: &fsod_core::features::FlatFeatures) -> Rows {
    (0..w.rows()).map(|i| w.row(i).to_vec()).collect()
}

fn mlp(x: &Rows, w: &MlpWeights) -> Rows {
    let w1 = weight_rows(&w.w1);
    let w2 = weight_rows(&w.w2);
    let mut hidden = matmul(x, &w1);
    for row in &mut hidden {
        for (j, v) in row.iter_mut().enumerate() {
            *v += w.b1[j];
            if w.activation == Activation::Rectifier && *v < 0.0 {
                *v = 0.0;
            }
        }
    }
    let mut out = matmul(&hidden, &w2);
    for row in &mut out {
        for (j, v) in row.iter_mut().enumerate() {
            *v += w.b2[j];
        }
    }
    out
}

fn layer_norm(x: &Rows, params: &fsod_core::features::LayerNormParams) -> Rows {
    x.iter()
        .map(|row| {
            let d = row.len() as f64;
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + params.epsilon).sqrt();
            row.iter()
                .enumerate()
                .map(|(c, v)| params.gamma[c] * (v - mean) * inv + params.beta[c])
                .collect()
        })
        .collect()
}

fn attenuate(s: &Rows, w: &Rows) -> Rows {
    let d = s[0].len() as f64;
    let mut logits = matmul(&matmul(s, w), &transpose(s));
    for row in &mut logits {
        for v in row.iter_mut() {
            *v /= d.sqrt();
        }
    }
    add(s, &matmul(&softmax_rows(&logits), s))
}

fn mean_pyramid_rows(pyramids: &[PyramidFeatures], level: usize) -> Rows {
    let shots = pyramids.len() as f64;
    let mut acc = map_rows(&pyramids[0].levels()[level]);
    for p in &pyramids[1..] {
        let rows = map_rows(&p.levels()[level]);
        for (ra, rb) in acc.iter_mut().zip(&rows) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }
    for row in &mut acc {
        for v in row.iter_mut() {
            *v *= 1.0 / shots;
        }
    }
    acc
}

fn aaf_align(q: &Rows, s: &Rows, kind: &AlignmentKind) -> (Rows, Rows) {
    match kind {
        AlignmentKind::Identity => (q.clone(), s.clone()),
        AlignmentKind::QueryKeySupport { normalize_rows } => {
            let mut affinity = matmul(q, &transpose(s));
            if *normalize_rows {
                affinity = softmax_rows(&affinity);
            }
            (q.clone(), matmul(&affinity, s))
        }
    }
}

fn aaf_attend(q: &Rows, s: &Rows, kind: &GlobalAttentionKind) -> (Rows, Rows) {
    match kind {
        GlobalAttentionKind::None => (q.clone(), s.clone()),
        GlobalAttentionKind::CrwGlobalPool { pool } => {
            let d = s[0].len();
            let pooled: Vec<f64> = (0..d)
                .map(|c| match pool {
                    PoolKind::Max => s.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max),
                    PoolKind::Average => s.iter().map(|r| r[c]).sum::<f64>() / s.len() as f64,
                })
                .collect();
            let reweighted = q
                .iter()
                .map(|row| row.iter().enumerate().map(|(c, v)| v * pooled[c]).collect())
                .collect();
            (reweighted, s.clone())
        }
        GlobalAttentionKind::BackgroundAttenuation(w) => {
            (q.clone(), attenuate(s, &weight_rows(&w.w)))
        }
    }
}

fn aaf_fuse(q: &Rows, s: &Rows, kind: &FusionKind) -> Rows {
    match kind {
        FusionKind::None => q.clone(),
        FusionKind::Concat => concat_cols(q, s),
        FusionKind::AddSubConcat => concat_cols(&add(q, s), &sub(q, s)),
        FusionKind::LearnedPointwiseConcat {
            psi_dot,
            psi_sub,
            psi_cat,
        } => {
            let dot = mlp(&hadamard(q, s), psi_dot);
            let diff = mlp(&sub(q, s), psi_sub);
            let cat = mlp(&concat_cols(q, s), psi_cat);
            concat_cols(&concat_cols(&dot, &diff), &cat)
        }
    }
}

/// Naive re-implementation of the full attention pipeline; returns, per
/// class and per level, the fused rows.
pub fn naive_run_pipeline(
    query: &PyramidFeatures,
    supports: &[Vec<PyramidFeatures>],
    config: &AafConfig,
) -> Vec<Vec<Rows>> {
    supports
        .iter()
        .map(|shots| {
            (0..query.level_count())
                .map(|level| {
                    let q = map_rows(&query.levels()[level]);
                    let s = mean_pyramid_rows(shots, level);
                    let (h_q, h_s) = match config.order {
                        StageOrder::AlignThenAttend => {
                            let (a_q, a_s) = aaf_align(&q, &s, &config.alignment);
                            aaf_attend(&a_q, &a_s, &config.attention)
                        }
                        StageOrder::AttendThenAlign => {
                            let (g_q, g_s) = aaf_attend(&q, &s, &config.attention);
                            aaf_align(&g_q, &g_s, &config.alignment)
                        }
                    };
                    aaf_fuse(&h_q, &h_s, &config.fusion)
                })
                .collect()
        })
        .collect()
}

fn concat_pyramid_rows(p: &PyramidFeatures) -> (Rows, Vec<usize>) {
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for level in p.levels() {
        let level_rows = map_rows(level);
        counts.push(level_rows.len());
        rows.extend(level_rows);
    }
    (rows, counts)
}

fn scaled_affinity(q: &Rows, k: &Rows) -> Rows {
    let d = (q[0].len() as f64).sqrt();
    let mut logits = matmul(q, &transpose(k));
    for row in &mut logits {
        for v in row.iter_mut() {
            *v /= d;
        }
    }
    softmax_rows(&logits)
}

/// Naive re-implementation of the cross-scale alignment; returns per-class
/// concatenated output rows (query row layout).
pub fn naive_xqsa_forward(
    query: &PyramidFeatures,
    supports: &[Vec<PyramidFeatures>],
    weights: &XqsaWeights,
    config: &XqsaConfig,
) -> Vec<Rows> {
    let (x_q, q_counts) = concat_pyramid_rows(query);
    supports
        .iter()
        .map(|shots| {
            let mean = PyramidFeatures::mean(shots).expect("shapes agree");
            let (mut x_s, s_counts) = concat_pyramid_rows(&mean);
            if config.background_attenuation {
                x_s = attenuate(&x_s, &weight_rows(&weights.bga.as_ref().unwrap().w));
            }
            let q = matmul(&layer_norm(&x_q, &weights.ln_pre_align), &weight_rows(&weights.w_q));
            let k = matmul(&layer_norm(&x_s, &weights.ln_pre_align), &weight_rows(&weights.w_k));
            let v_in = if config.layer_norm_values {
                layer_norm(&x_s, &weights.ln_pre_align)
            } else {
                x_s.clone()
            };
            let v = matmul(&v_in, &weight_rows(&weights.w_v));

            let mut aligned = if config.multiscale_alignment {
                matmul(&scaled_affinity(&q, &k), &v)
            } else {
                let mut out = Vec::new();
                let mut q_at = 0;
                let mut s_at = 0;
                for (qc, sc) in q_counts.iter().zip(&s_counts) {
                    let q_block: Rows = q[q_at..q_at + qc].to_vec();
                    let k_block: Rows = k[s_at..s_at + sc].to_vec();
                    let v_block: Rows = v[s_at..s_at + sc].to_vec();
                    out.extend(matmul(&scaled_affinity(&q_block, &k_block), &v_block));
                    q_at += qc;
                    s_at += sc;
                }
                out
            };
            if config.skip_connections {
                aligned = add(&aligned, &x_q);
            }
            if config.mlp_fusion {
                let refined = mlp(&layer_norm(&aligned, &weights.ln_pre_mlp), &weights.mlp);
                if config.skip_connections {
                    aligned = add(&aligned, &refined);
                }
                else {
                    aligned = refined;
                }
            }
            aligned
        })
        .collect()
}

fn naive_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
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

fn naive_ap(labels: &[bool], total_gt: usize) -> f64 {
    if total_gt == 0 {
        return if labels.is_empty() { 1.0 } else { 0.0 };
    }
    if labels.is_empty() {
        return 0.0;
    }
    let mut precision = Vec::new();
    let mut recall = Vec::new();
    let mut tp = 0usize;
    for (rank, &is_tp) in labels.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        precision.push(tp as f64 / (rank + 1) as f64);
        recall.push(tp as f64 / total_gt as f64);
    }
    let envelope: Vec<f64> = (0..labels.len())
        .map(|i| precision[i..].iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for i in 0..labels.len() {
        ap += (recall[i] - prev) * envelope[i];
        prev = recall[i];
    }
    ap
}

/// Naive evaluator at one IoU threshold: per-class all-point AP and the mean
/// over classes in ascending id order.
pub fn naive_evaluate(
    gts: &[GroundTruthRecord],
    dets: &[DetectionRecord],
    threshold: f64,
) -> (BTreeMap<u32, f64>, Option<f64>) {
    let mut classes: BTreeSet<u32> = gts.iter().map(|g| g.category_id).collect();
    classes.extend(dets.iter().map(|d| d.category_id));

    let mut per_class = BTreeMap::new();
    for &class in &classes {
        let class_gts: Vec<(usize, &GroundTruthRecord)> = gts
            .iter()
            .enumerate()
            .filter(|(_, g)| g.category_id == class)
            .collect();
        let mut matched = vec![false; class_gts.len()];

        // select detections one by one: highest score, then lowest index
        let mut pending: Vec<(usize, &DetectionRecord)> = dets
            .iter()
            .enumerate()
            .filter(|(_, d)| d.category_id == class)
            .collect();
        let mut labels = Vec::with_capacity(pending.len());
        while !pending.is_empty() {
            let mut pick = 0;
            for i in 1..pending.len() {
                if pending[i].1.score > pending[pick].1.score {
                    pick = i;
                }
            }
            let (_, det) = pending.remove(pick);
            let mut best: Option<(f64, usize)> = None;
            for (slot, (_, gt)) in class_gts.iter().enumerate() {
                if matched[slot] || gt.image_id != det.image_id {
                    continue;
                }
                let overlap = naive_iou(&det.bbox, &gt.bbox);
                if overlap < threshold {
                    continue;
                }
                if best.map_or(true, |(b, _)| overlap > b) {
                    best = Some((overlap, slot));
                }
            }
            if let Some((_, slot)) = best {
                matched[slot] = true;
                labels.push(true);
            } else {
                labels.push(false);
            }
        }
        per_class.insert(class, naive_ap(&labels, class_gts.len()));
    }

    let map = if per_class.is_empty() {
        None
    } else {
        let values: Vec<f64> = per_class.values().copied().collect();
        Some(values.iter().sum::<f64>() / values.len() as f64)
    };
    (per_class, map)
}

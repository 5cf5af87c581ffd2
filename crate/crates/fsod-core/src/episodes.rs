//! Episodic task construction: base/novel class splits, seeded episode
//! sampling for base training and fine-tuning, and evaluation-suite sampling.
//!
//! Sampling is a pure function of (index, split, spec, seed): feed a freshly
//! seeded RNG to get an identical episode. Per-episode seeds derive from a
//! master seed through [`mix_seed`].

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{GroundTruthFile, SplitSide};

/// Disjoint base/novel partition of a dataset's category ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub dataset: String,
    pub base: BTreeSet<u32>,
    pub novel: BTreeSet<u32>,
}

impl ClassSplit {
    pub fn new(
        dataset: impl Into<String>,
        base: BTreeSet<u32>,
        novel: BTreeSet<u32>,
    ) -> Result<Self> {
        if !base.is_disjoint(&novel) {
            return Err(Error::arg("base and novel class sets overlap"));
        }
        if base.is_empty() && novel.is_empty() {
            return Err(Error::EmptyInput("class split"));
        }
        Ok(Self {
            dataset: dataset.into(),
            base,
            novel,
        })
    }

    /// The published split for `dota`, `dior`, `pascal_voc` or `coco`.
    pub fn canonical(dataset: &str) -> Result<Self> {
        let normalized = dataset.to_ascii_lowercase().replace(['-', ' '], "_");
        let (classes, novel): (Vec<u32>, Vec<u32>) = match normalized.as_str() {
            "dota" => ((1..=16).collect(), vec![3, 5, 15]),
            "dior" => ((1..=20).collect(), vec![1, 3, 17, 18, 20]),
            "voc" | "pascal_voc" | "pascalvoc" => ((1..=20).collect(), vec![3, 6, 10, 14, 18]),
            "coco" | "ms_coco" | "mscoco" => (
                (1..=80).collect(),
                vec![
                    1, 2, 3, 4, 5, 6, 7, 9, 15, 16, 17, 18, 19, 20, 40, 57, 58, 59, 61, 63,
                ],
            ),
            _ => return Err(Error::UnknownDataset(dataset.to_string())),
        };
        let novel: BTreeSet<u32> = novel.into_iter().collect();
        let base: BTreeSet<u32> = classes.into_iter().filter(|c| !novel.contains(c)).collect();
        Self::new(normalized, base, novel)
    }

    /// Draws `novel_count` novel classes uniformly without replacement.
    pub fn seeded_random<R: Rng>(
        dataset: impl Into<String>,
        classes: &[u32],
        novel_count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let unique: BTreeSet<u32> = classes.iter().copied().collect();
        if novel_count >= unique.len() {
            return Err(Error::arg(format!(
                "cannot reserve {novel_count} novel classes out of {}",
                unique.len()
            )));
        }
        let mut pool: Vec<u32> = unique.iter().copied().collect();
        pool.shuffle(rng);
        let novel: BTreeSet<u32> = pool[..novel_count].iter().copied().collect();
        let base: BTreeSet<u32> = unique.difference(&novel).copied().collect();
        Self::new(dataset, base, novel)
    }

    pub fn side(&self, category: u32) -> Option<SplitSide> {
        if self.base.contains(&category) {
            Some(SplitSide::Base)
        } else if self.novel.contains(&category) {
            Some(SplitSide::Novel)
        } else {
            None
        }
    }

    /// All category ids, base then novel, ascending within each.
    pub fn all_classes(&self) -> Vec<u32> {
        let mut all: Vec<u32> = self.base.iter().copied().collect();
        all.extend(self.novel.iter().copied());
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    BaseTraining,
    FineTuning,
}

/// Episode shape requested from the sampler.
///
/// `learning_rate` is carried as protocol metadata only; nothing in this
/// crate optimizes anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub phase: Phase,
    pub classes_per_episode: usize,
    pub shots: usize,
    pub query_images_per_class: usize,
    pub learning_rate: f64,
}

impl EpisodeSpec {
    /// Base-training default: 3 classes, one shot, 100 query images per class.
    pub fn base_training() -> Self {
        Self {
            phase: Phase::BaseTraining,
            classes_per_episode: 3,
            shots: 1,
            query_images_per_class: 100,
            learning_rate: 1e-3,
        }
    }

    /// Fine-tuning default: 3 classes, `shots` examples per class, tenth of
    /// the base learning rate.
    pub fn fine_tuning(shots: usize) -> Self {
        Self {
            phase: Phase::FineTuning,
            classes_per_episode: 3,
            shots,
            query_images_per_class: 100,
            learning_rate: 1e-4,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes_per_episode == 0 || self.shots == 0 {
            return Err(Error::arg("classes_per_episode and shots must be at least 1"));
        }
        Ok(())
    }
}

/// One annotated object usable as a support example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportExample {
    pub image_id: u64,
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSupport {
    pub category_id: u32,
    pub examples: Vec<SupportExample>,
}

/// Sampled few-shot task: episode classes, per-class supports and the query
/// image list (de-duplicated across classes, first-draw order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub phase: Phase,
    pub classes: Vec<u32>,
    pub support: Vec<ClassSupport>,
    pub query: Vec<u64>,
    /// Query images (training) or object instances (evaluation) drawn per
    /// class before de-duplication.
    pub per_class_query_count: BTreeMap<u32, usize>,
    /// Evaluation-suite deficit per class against the 500-instance target.
    pub shortfall: BTreeMap<u32, usize>,
}

impl Episode {
    pub fn support_for(&self, category: u32) -> Option<&[SupportExample]> {
        self.support
            .iter()
            .find(|s| s.category_id == category)
            .map(|s| s.examples.as_slice())
    }

    pub fn support_image_ids(&self) -> BTreeSet<u64> {
        self.support
            .iter()
            .flat_map(|s| s.examples.iter().map(|e| e.image_id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ImageEntry {
    id: u64,
    annotations: Vec<(u32, [f64; 4])>,
}

/// Queryable view of a ground-truth file: per-class instance and image lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    images: Vec<ImageEntry>,
    /// (image id, bbox) per annotated instance, in file order.
    class_instances: BTreeMap<u32, Vec<(u64, [f64; 4])>>,
    /// (image id, instance count) per class, ascending image id.
    class_images: BTreeMap<u32, Vec<(u64, usize)>>,
}

impl DatasetIndex {
    pub fn from_ground_truth(file: &GroundTruthFile) -> Result<Self> {
        let mut images: Vec<ImageEntry> = file
            .images
            .iter()
            .map(|i| ImageEntry {
                id: i.id,
                annotations: Vec::new(),
            })
            .collect();
        let position: BTreeMap<u64, usize> = images
            .iter()
            .enumerate()
            .map(|(idx, img)| (img.id, idx))
            .collect();
        if position.len() != images.len() {
            return Err(Error::arg("duplicate image ids in ground truth"));
        }

        let mut class_instances: BTreeMap<u32, Vec<(u64, [f64; 4])>> = BTreeMap::new();
        for category in file.category_ids() {
            class_instances.entry(category).or_default();
        }
        for ann in &file.annotations {
            let idx = *position
                .get(&ann.image_id)
                .ok_or_else(|| Error::arg(format!("annotation references unknown image {}", ann.image_id)))?;
            images[idx].annotations.push((ann.category_id, ann.bbox));
            class_instances
                .entry(ann.category_id)
                .or_default()
                .push((ann.image_id, ann.bbox));
        }

        let class_images = class_instances
            .iter()
            .map(|(&category, instances)| {
                let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
                for (image, _) in instances {
                    *counts.entry(*image).or_insert(0) += 1;
                }
                (category, counts.into_iter().collect::<Vec<_>>())
            })
            .collect();

        Ok(Self {
            images,
            class_instances,
            class_images,
        })
    }

    pub fn class_ids(&self) -> Vec<u32> {
        self.class_instances.keys().copied().collect()
    }

    pub fn instances_of(&self, category: u32) -> &[(u64, [f64; 4])] {
        self.class_instances
            .get(&category)
            .map_or(&[], Vec::as_slice)
    }

    /// Images containing the class, with per-image instance counts.
    pub fn images_with(&self, category: u32) -> &[(u64, usize)] {
        self.class_images.get(&category).map_or(&[], Vec::as_slice)
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    fn ensure_known(&self, split: &ClassSplit) -> Result<()> {
        for &category in self.class_instances.keys() {
            if split.side(category).is_none() {
                return Err(Error::UnknownCategory(category));
            }
        }
        Ok(())
    }
}

/// Frozen per-class support examples, sampled once before fine-tuning.
pub type SupportPool = BTreeMap<u32, Vec<SupportExample>>;

/// Draws `shots` support instances for every novel class.
pub fn sample_support_pool<R: Rng>(
    index: &DatasetIndex,
    split: &ClassSplit,
    shots: usize,
    rng: &mut R,
) -> Result<SupportPool> {
    index.ensure_known(split)?;
    let mut pool = SupportPool::new();
    for &category in &split.novel {
        pool.insert(category, draw_supports(index, category, shots, rng)?);
    }
    Ok(pool)
}

fn draw_supports<R: Rng>(
    index: &DatasetIndex,
    category: u32,
    shots: usize,
    rng: &mut R,
) -> Result<Vec<SupportExample>> {
    let instances = index.instances_of(category);
    if instances.len() < shots {
        return Err(Error::InsufficientData {
            category,
            needed: shots,
            available: instances.len(),
        });
    }
    let chosen = rand::seq::index::sample(rng, instances.len(), shots);
    Ok(chosen
        .iter()
        .map(|i| SupportExample {
            image_id: instances[i].0,
            bbox: instances[i].1,
        })
        .collect())
}

fn draw_classes<R: Rng>(
    candidates: &[u32],
    count: usize,
    rng: &mut R,
) -> Result<Vec<u32>> {
    if candidates.len() < count {
        return Err(Error::arg(format!(
            "episode needs {count} classes but only {} are available",
            candidates.len()
        )));
    }
    let chosen = rand::seq::index::sample(rng, candidates.len(), count);
    let mut classes: Vec<u32> = chosen.iter().map(|i| candidates[i]).collect();
    classes.sort_unstable();
    Ok(classes)
}

/// Samples one training episode.
///
/// Base training draws episode classes from the base set only. Fine-tuning
/// draws from base and novel with at least one novel class, and takes the
/// novel supports verbatim from `novel_pool`. Support and query image sets
/// are disjoint.
pub fn sample_episode<R: Rng>(
    index: &DatasetIndex,
    split: &ClassSplit,
    spec: &EpisodeSpec,
    novel_pool: Option<&SupportPool>,
    rng: &mut R,
) -> Result<Episode> {
    spec.validate()?;
    index.ensure_known(split)?;

    let classes = match spec.phase {
        Phase::BaseTraining => {
            let base: Vec<u32> = split.base.iter().copied().collect();
            draw_classes(&base, spec.classes_per_episode, rng)?
        }
        Phase::FineTuning => {
            if split.novel.is_empty() {
                return Err(Error::EmptyInput("novel classes for fine-tuning"));
            }
            let all = split.all_classes();
            // rejection keeps the draw uniform over class subsets with >= 1
            // novel class
            let mut attempts = 0;
            loop {
                let candidate = draw_classes(&all, spec.classes_per_episode, rng)?;
                if candidate.iter().any(|c| split.novel.contains(c)) {
                    break candidate;
                }
                attempts += 1;
                if attempts > 10_000 {
                    return Err(Error::arg(
                        "could not sample an episode with a novel class",
                    ));
                }
            }
        }
    };

    let pool = match spec.phase {
        Phase::FineTuning => Some(novel_pool.ok_or_else(|| {
            Error::arg("fine-tuning episodes need the frozen novel support pool")
        })?),
        Phase::BaseTraining => None,
    };

    let mut support = Vec::with_capacity(classes.len());
    for &category in &classes {
        let examples = match (spec.phase, split.side(category)) {
            (Phase::FineTuning, Some(SplitSide::Novel)) => {
                let pooled = pool
                    .unwrap()
                    .get(&category)
                    .ok_or_else(|| Error::InsufficientData {
                        category,
                        needed: spec.shots,
                        available: 0,
                    })?;
                if pooled.len() != spec.shots {
                    return Err(Error::InsufficientData {
                        category,
                        needed: spec.shots,
                        available: pooled.len(),
                    });
                }
                pooled.clone()
            }
            _ => draw_supports(index, category, spec.shots, rng)?,
        };
        support.push(ClassSupport {
            category_id: category,
            examples,
        });
    }

    let support_images: BTreeSet<u64> = support
        .iter()
        .flat_map(|s| s.examples.iter().map(|e| e.image_id))
        .collect();

    let mut query = Vec::new();
    let mut seen = BTreeSet::new();
    let mut per_class_query_count = BTreeMap::new();
    for &category in &classes {
        let candidates: Vec<u64> = index
            .images_with(category)
            .iter()
            .map(|(image, _)| *image)
            .filter(|image| !support_images.contains(image))
            .collect();
        if candidates.len() < spec.query_images_per_class {
            return Err(Error::InsufficientData {
                category,
                needed: spec.query_images_per_class,
                available: candidates.len(),
            });
        }
        let chosen = rand::seq::index::sample(rng, candidates.len(), spec.query_images_per_class);
        per_class_query_count.insert(category, spec.query_images_per_class);
        for i in chosen.iter() {
            let image = candidates[i];
            if seen.insert(image) {
                query.push(image);
            }
        }
    }

    Ok(Episode {
        phase: spec.phase,
        classes,
        support,
        query,
        per_class_query_count,
        shortfall: BTreeMap::new(),
    })
}

/// Number of object instances each evaluation episode requests per class.
pub const EVAL_INSTANCES_PER_CLASS: usize = 500;

/// Samples evaluation episodes over every class of the split.
///
/// Each episode re-samples the support sets and accumulates query images per
/// class until 500 object instances are covered; deficits are recorded in
/// [`Episode::shortfall`] rather than failing.
pub fn sample_eval_suite<R: Rng>(
    index: &DatasetIndex,
    split: &ClassSplit,
    shots: usize,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<Episode>> {
    if shots == 0 {
        return Err(Error::arg("shots must be at least 1"));
    }
    index.ensure_known(split)?;
    let classes = split.all_classes();
    let mut suite = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut support = Vec::with_capacity(classes.len());
        for &category in &classes {
            let instances = index.instances_of(category);
            let take = shots.min(instances.len());
            let examples = if take == 0 {
                Vec::new()
            } else {
                let chosen = rand::seq::index::sample(rng, instances.len(), take);
                chosen
                    .iter()
                    .map(|i| SupportExample {
                        image_id: instances[i].0,
                        bbox: instances[i].1,
                    })
                    .collect()
            };
            support.push(ClassSupport {
                category_id: category,
                examples,
            });
        }
        let support_images: BTreeSet<u64> = support
            .iter()
            .flat_map(|s| s.examples.iter().map(|e| e.image_id))
            .collect();

        let mut query = Vec::new();
        let mut seen = BTreeSet::new();
        let mut per_class_query_count = BTreeMap::new();
        let mut shortfall = BTreeMap::new();
        for &category in &classes {
            let mut candidates: Vec<(u64, usize)> = index
                .images_with(category)
                .iter()
                .filter(|(image, _)| !support_images.contains(image))
                .copied()
                .collect();
            candidates.shuffle(rng);
            let mut covered = 0;
            for (image, count) in candidates {
                if covered >= EVAL_INSTANCES_PER_CLASS {
                    break;
                }
                covered += count;
                if seen.insert(image) {
                    query.push(image);
                }
            }
            per_class_query_count.insert(category, covered);
            if covered < EVAL_INSTANCES_PER_CLASS {
                shortfall.insert(category, EVAL_INSTANCES_PER_CLASS - covered);
            }
        }
        suite.push(Episode {
            phase: Phase::FineTuning,
            classes: classes.clone(),
            support,
            query,
            per_class_query_count,
            shortfall,
        });
    }
    Ok(suite)
}

/// Derives the seed for episode `index` from a master seed (SplitMix64
/// finalizer over `master ^ index * golden-gamma`).
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

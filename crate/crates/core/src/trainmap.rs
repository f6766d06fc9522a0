//! Similarity-mapped synthetic augmentation.
//!
//! For each sampled real anchor, the oracle scans `eta` random synthetic
//! samples, scores each against the anchor's class by cosine similarity and
//! keeps the `beta` best. Admitted synthetic samples are relabelled to the
//! anchor class and appended to the real training set.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifest::{ClassLabel, DatasetManifest, Sample, Source, Split};
use crate::rng::{derive_seed, Pcg32};
use crate::simmap::{anchor_vector, class_vector, cosine_similarity, EmbeddingStore, EmbeddingVector};

pub const DEFAULT_BETA: usize = 210;
pub const DEFAULT_ETA: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Synthetic candidates scanned per oracle call.
    pub eta: usize,
    /// Candidates kept per call.
    pub beta: usize,
    pub dims: usize,
    pub seed: u64,
}

impl OracleConfig {
    pub fn new(eta: usize, beta: usize, dims: usize, seed: u64) -> Result<Self> {
        let cfg = Self { eta, beta, dims, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta == 0 || self.beta == 0 || self.dims == 0 {
            return Err(Error::validation("eta, beta and dims must be positive"));
        }
        if self.beta > self.eta {
            return Err(Error::validation(format!(
                "beta ({}) must not exceed eta ({})",
                self.beta, self.eta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    pub sample: Sample,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationSet {
    pub source_class: ClassLabel,
    /// Sorted by score descending, then id ascending.
    pub members: Vec<ScoredSample>,
}

/// Precomputed synthetic vectors; `None` marks unscorable samples.
struct SyntheticIndex<'a> {
    samples: &'a [Sample],
    vectors: Vec<Option<EmbeddingVector>>,
}

impl<'a> SyntheticIndex<'a> {
    fn build(synthetic: &'a DatasetManifest, store: &EmbeddingStore, dims: usize) -> Self {
        let vectors = synthetic
            .samples()
            .iter()
            .map(|s| class_vector(s, store, dims).ok().filter(|v| v.norm() > 0.0))
            .collect();
        Self {
            samples: synthetic.samples(),
            vectors,
        }
    }

    fn scorable(&self) -> usize {
        self.vectors.iter().filter(|v| v.is_some()).count()
    }
}

fn rank(members: &mut [ScoredSample]) {
    members.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.sample.id.cmp(&b.sample.id))
    });
}

fn run_oracle(
    anchor_class: &ClassLabel,
    anchor: &EmbeddingVector,
    index: &SyntheticIndex<'_>,
    eta: usize,
    beta: usize,
    seed: u64,
) -> Result<AugmentationSet> {
    let mut rng = Pcg32::seed_from_u64(seed);
    let picks = rng.sample_without_replacement(index.samples.len(), eta);
    let mut members = Vec::with_capacity(picks.len());
    for j in picks {
        if let Some(v) = &index.vectors[j] {
            members.push(ScoredSample {
                sample: index.samples[j].clone(),
                score: cosine_similarity(v, anchor)?,
            });
        }
    }
    if members.is_empty() {
        return Err(Error::EmptyOracle(anchor_class.to_string()));
    }
    rank(&mut members);
    members.truncate(beta);
    Ok(AugmentationSet {
        source_class: anchor_class.clone(),
        members,
    })
}

/// Maps one real class to its `beta` most similar synthetic samples.
pub fn oracle(
    anchor_class: &ClassLabel,
    synthetic: &DatasetManifest,
    store: &EmbeddingStore,
    cfg: &OracleConfig,
) -> Result<AugmentationSet> {
    cfg.validate()?;
    let anchor = anchor_vector(anchor_class, store, cfg.dims)?;
    let index = SyntheticIndex::build(synthetic, store, cfg.dims);
    run_oracle(anchor_class, &anchor, &index, cfg.eta, cfg.beta, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreQuantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl ScoreQuantiles {
    /// Linear-interpolation quantiles; `None` for an empty slice.
    pub fn from_scores(scores: &[f64]) -> Option<Self> {
        if scores.is_empty() {
            return None;
        }
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Some(Self {
            min: sorted[0],
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassAugmentation {
    pub anchors_drawn: usize,
    pub admitted: usize,
    pub scores: Option<ScoreQuantiles>,
}

/// A synthetic sample admitted by one class and later proposed by another.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub sample_id: String,
    pub kept_class: String,
    pub rejected_class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentationReport {
    pub iterations: usize,
    pub eta: usize,
    pub beta: usize,
    pub seed: u64,
    pub per_class: BTreeMap<String, ClassAugmentation>,
    pub zero_augmentation: Vec<String>,
    pub duplicates_skipped: usize,
    pub conflicts: Vec<Conflict>,
    /// Synthetic ids rejected because a real sample already uses them.
    pub id_collisions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmentation {
    pub manifest: DatasetManifest,
    pub report: AugmentationReport,
}

/// Runs the augmentation loop and returns the real manifest plus every
/// admitted synthetic sample (relabelled, `source = synthetic`, `split = train`).
///
/// `iterations` defaults to the real training-set size. Anchor `i` is drawn
/// from the stream seeded by `cfg.seed`; its oracle call uses
/// `derive_seed(cfg.seed, i)`.
pub fn t_rain(
    real: &DatasetManifest,
    synthetic: &DatasetManifest,
    store: &EmbeddingStore,
    cfg: &OracleConfig,
    iterations: Option<usize>,
) -> Result<Augmentation> {
    cfg.validate()?;
    let anchors: Vec<&Sample> = real.split(Split::Train).collect();
    if anchors.is_empty() {
        return Err(Error::validation(format!(
            "real manifest '{}' has no training samples",
            real.name()
        )));
    }
    let iterations = iterations.unwrap_or(anchors.len());
    if iterations == 0 {
        return Err(Error::validation("iterations must be positive"));
    }

    let anchor_vectors = real
        .classes()
        .iter()
        .map(|c| Ok((c.clone(), anchor_vector(c, store, cfg.dims)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let index = SyntheticIndex::build(synthetic, store, cfg.dims);
    let any_scorable = index.scorable() > 0;

    let real_ids: HashSet<&str> = real.samples().iter().map(|s| s.id.as_str()).collect();
    let mut admitted: HashMap<String, ClassLabel> = HashMap::new();
    let mut out: Vec<Sample> = real.samples().to_vec();
    let mut scores: BTreeMap<&ClassLabel, Vec<f64>> = BTreeMap::new();
    let mut anchors_drawn: BTreeMap<&ClassLabel, usize> = BTreeMap::new();
    let mut duplicates_skipped = 0;
    let mut conflicts = Vec::new();
    let mut id_collisions = Vec::new();

    let mut rng = Pcg32::seed_from_u64(cfg.seed);
    for i in 0..iterations {
        let anchor = anchors[rng.index(anchors.len())];
        *anchors_drawn.entry(&anchor.class).or_default() += 1;
        if !any_scorable {
            continue;
        }
        let set = match run_oracle(
            &anchor.class,
            &anchor_vectors[&anchor.class],
            &index,
            cfg.eta,
            cfg.beta,
            derive_seed(cfg.seed, i as u64),
        ) {
            Ok(set) => set,
            Err(Error::EmptyOracle(_)) => continue,
            Err(e) => return Err(e),
        };
        for member in set.members {
            let id = member.sample.id.as_str();
            if real_ids.contains(id) {
                if !id_collisions.iter().any(|c| c == id) {
                    id_collisions.push(id.to_owned());
                }
                continue;
            }
            match admitted.get(id) {
                Some(kept) if *kept == anchor.class => duplicates_skipped += 1,
                Some(kept) => conflicts.push(Conflict {
                    sample_id: id.to_owned(),
                    kept_class: kept.to_string(),
                    rejected_class: anchor.class.to_string(),
                }),
                None => {
                    admitted.insert(id.to_owned(), anchor.class.clone());
                    scores.entry(&anchor.class).or_default().push(member.score);
                    let mut sample = member.sample;
                    sample.class = anchor.class.clone();
                    sample.source = Source::Synthetic;
                    sample.split = Split::Train;
                    out.push(sample);
                }
            }
        }
    }

    let per_class: BTreeMap<String, ClassAugmentation> = real
        .classes()
        .iter()
        .map(|c| {
            let s = scores.get(c).map(Vec::as_slice).unwrap_or(&[]);
            (
                c.to_string(),
                ClassAugmentation {
                    anchors_drawn: anchors_drawn.get(c).copied().unwrap_or(0),
                    admitted: s.len(),
                    scores: ScoreQuantiles::from_scores(s),
                },
            )
        })
        .collect();
    let zero_augmentation = per_class
        .iter()
        .filter(|(_, a)| a.admitted == 0)
        .map(|(c, _)| c.clone())
        .collect();

    Ok(Augmentation {
        manifest: DatasetManifest::new(real.name(), out)?,
        report: AugmentationReport {
            iterations,
            eta: cfg.eta,
            beta: cfg.beta,
            seed: cfg.seed,
            per_class,
            zero_augmentation,
            duplicates_skipped,
            conflicts,
            id_collisions,
        },
    })
}

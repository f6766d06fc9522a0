//! Label-shift scenarios and seeded resampling.
//!
//! A scenario boosts one weather class and jitters the rest with a random
//! affine map `a * n + b`. Five scenarios are standard: 1 none, 2 rain,
//! 3 fog, 4 snow, 5 dust.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{ClassLabel, DatasetManifest, LabelDistribution, Sample, Split};
use crate::rng::Pcg32;

pub const DEFAULT_BOOST_FACTOR: f64 = 2.0;
pub const DEFAULT_A_RANGE: (f64, f64) = (0.6, 1.0);
pub const DEFAULT_B_RANGE: (i64, i64) = (0, 0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftName {
    None,
    Rain,
    Fog,
    Snow,
    Dust,
}

impl ShiftName {
    pub const ALL: [ShiftName; 5] = [
        ShiftName::None,
        ShiftName::Rain,
        ShiftName::Fog,
        ShiftName::Snow,
        ShiftName::Dust,
    ];

    pub fn id(self) -> u8 {
        match self {
            ShiftName::None => 1,
            ShiftName::Rain => 2,
            ShiftName::Fog => 3,
            ShiftName::Snow => 4,
            ShiftName::Dust => 5,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.iter().copied().find(|n| n.id() == id)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftName::None => "none",
            ShiftName::Rain => "rain",
            ShiftName::Fog => "fog",
            ShiftName::Snow => "snow",
            ShiftName::Dust => "dust",
        }
    }

    /// The class this scenario makes dominant.
    pub fn boosted_class(self) -> Option<ClassLabel> {
        match self {
            ShiftName::None => None,
            other => Some(ClassLabel::new(other.as_str()).expect("static name")),
        }
    }
}

impl fmt::Display for ShiftName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ShiftName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|n| n.as_str() == lower)
            .ok_or_else(|| Error::validation(format!("unknown shift '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioFile", into = "ScenarioFile")]
pub struct ShiftScenario {
    id: u8,
    name: ShiftName,
    boosted_class: Option<ClassLabel>,
    boost_factor: f64,
    a_range: (f64, f64),
    b_range: (i64, i64),
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    id: u8,
    name: ShiftName,
    #[serde(default = "default_boost")]
    boost_factor: f64,
    #[serde(default = "default_a_range")]
    a_range: [f64; 2],
    #[serde(default = "default_b_range")]
    b_range: [i64; 2],
}

fn default_boost() -> f64 {
    DEFAULT_BOOST_FACTOR
}

fn default_a_range() -> [f64; 2] {
    [DEFAULT_A_RANGE.0, DEFAULT_A_RANGE.1]
}

fn default_b_range() -> [i64; 2] {
    [DEFAULT_B_RANGE.0, DEFAULT_B_RANGE.1]
}

impl TryFrom<ScenarioFile> for ShiftScenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let scenario = ShiftScenario::new(
            f.name,
            f.boost_factor,
            (f.a_range[0], f.a_range[1]),
            (f.b_range[0], f.b_range[1]),
        )?;
        if scenario.id != f.id {
            return Err(Error::validation(format!(
                "scenario id {} does not match name '{}' (expected id {})",
                f.id, f.name, scenario.id
            )));
        }
        Ok(scenario)
    }
}

impl From<ShiftScenario> for ScenarioFile {
    fn from(s: ShiftScenario) -> Self {
        ScenarioFile {
            id: s.id,
            name: s.name,
            boost_factor: s.boost_factor,
            a_range: [s.a_range.0, s.a_range.1],
            b_range: [s.b_range.0, s.b_range.1],
        }
    }
}

impl ShiftScenario {
    pub fn new(
        name: ShiftName,
        boost_factor: f64,
        a_range: (f64, f64),
        b_range: (i64, i64),
    ) -> Result<Self> {
        if !boost_factor.is_finite() || boost_factor < 1.0 {
            return Err(Error::validation(format!(
                "boost_factor must be a finite value >= 1, got {boost_factor}"
            )));
        }
        let (a_lo, a_hi) = a_range;
        if !(a_lo.is_finite() && a_hi.is_finite()) || a_lo < 0.0 || a_lo > a_hi {
            return Err(Error::validation(format!(
                "a_range must be a finite non-negative interval, got [{a_lo}, {a_hi}]"
            )));
        }
        let (b_lo, b_hi) = b_range;
        if b_lo < 0 || b_lo > b_hi || b_hi - b_lo >= i64::from(u32::MAX) {
            return Err(Error::validation(format!(
                "b_range must be a non-negative integer interval, got [{b_lo}, {b_hi}]"
            )));
        }
        Ok(Self {
            id: name.id(),
            name,
            boosted_class: name.boosted_class(),
            boost_factor,
            a_range,
            b_range,
        })
    }

    /// Scenario with the default boost and jitter.
    pub fn standard(name: ShiftName) -> Self {
        Self::new(name, DEFAULT_BOOST_FACTOR, DEFAULT_A_RANGE, DEFAULT_B_RANGE)
            .expect("defaults are valid")
    }

    pub fn standard_set() -> Vec<Self> {
        ShiftName::ALL.iter().map(|&n| Self::standard(n)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn name(&self) -> ShiftName {
        self.name
    }

    pub fn boosted_class(&self) -> Option<&ClassLabel> {
        self.boosted_class.as_ref()
    }

    pub fn boost_factor(&self) -> f64 {
        self.boost_factor
    }

    pub fn a_range(&self) -> (f64, f64) {
        self.a_range
    }

    pub fn b_range(&self) -> (i64, i64) {
        self.b_range
    }
}

/// Builds the target distribution for `scenario` from `base`.
///
/// The boosted class gets `round(boost * n)`; every other class, visited in
/// class-name order, gets `max(0, round(a * n + b))` with `a` then `b` drawn
/// from the scenario's ranges. If a jittered class ties or beats the boosted
/// one, all non-boosted counts are scaled by `(boosted - 1) / max_other`
/// (floored) so the boosted class is the strict mode.
pub fn make_shift(
    scenario: &ShiftScenario,
    base: &LabelDistribution,
    seed: u64,
) -> Result<LabelDistribution> {
    if base.total() == 0 {
        return Err(Error::validation("base distribution is empty"));
    }
    let Some(boosted) = scenario.boosted_class() else {
        return Ok(base.clone());
    };
    let boosted_base = base.get(boosted).ok_or_else(|| {
        Error::validation(format!("base distribution has no class '{boosted}'"))
    })?;
    if boosted_base == 0 {
        return Err(Error::DegenerateScenario(boosted.to_string()));
    }

    let mut rng = Pcg32::seed_from_u64(seed);
    let (a_lo, a_hi) = scenario.a_range;
    let (b_lo, b_hi) = scenario.b_range;
    let mut counts = BTreeMap::new();
    for (class, n) in base.iter() {
        if class == boosted {
            continue;
        }
        let a = rng.uniform_f64(a_lo, a_hi);
        let b = rng.uniform_i64(b_lo, b_hi);
        let jittered = (a * n as f64 + b as f64).round().max(0.0);
        counts.insert(class.clone(), jittered as u64);
    }
    let boosted_count = (scenario.boost_factor * boosted_base as f64).round() as u64;

    let max_other = counts.values().copied().max().unwrap_or(0);
    if max_other >= boosted_count {
        let numer = u128::from(boosted_count - 1);
        let denom = u128::from(max_other);
        for n in counts.values_mut() {
            *n = (u128::from(*n) * numer / denom) as u64;
        }
    }
    counts.insert(boosted.clone(), boosted_count);
    Ok(LabelDistribution::new(counts))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResamplePlan {
    pub target: LabelDistribution,
    pub with_replacement: bool,
    pub seed: u64,
}

/// Separator used for the extra copies a with-replacement draw produces:
/// the second copy of `img_1` is `img_1#1`, the third `img_1#2`, and so on.
pub const DUPLICATE_SEPARATOR: char = '#';

/// Strips a `#k` duplicate suffix, if any.
pub fn base_id(id: &str) -> &str {
    match id.rsplit_once(DUPLICATE_SEPARATOR) {
        Some((head, tail)) if !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => id,
    }
}

/// Resamples `split` so its per-class counts equal `plan.target`.
///
/// Samples outside `split` pass through untouched and manifest order is
/// preserved. Classes are processed in name order from one seeded stream.
pub fn resample(
    manifest: &DatasetManifest,
    plan: &ResamplePlan,
    split: Split,
) -> Result<DatasetManifest> {
    for class in plan.target.classes() {
        if !manifest.classes().contains(class) {
            return Err(Error::validation(format!(
                "target class '{class}' is not in manifest '{}'",
                manifest.name()
            )));
        }
    }

    let mut by_class: BTreeMap<&ClassLabel, Vec<usize>> = BTreeMap::new();
    for (idx, s) in manifest.samples().iter().enumerate() {
        if s.split == split {
            by_class.entry(&s.class).or_default().push(idx);
        }
    }

    let mut rng = Pcg32::seed_from_u64(plan.seed);
    let mut copies = vec![0u64; manifest.len()];
    for class in manifest.classes() {
        let want = plan.target.get(class).unwrap_or(0);
        let pool = by_class.get(class).map(Vec::as_slice).unwrap_or(&[]);
        let capacity_error = || Error::Capacity {
            class: class.to_string(),
            available: pool.len(),
            requested: want,
        };
        if want == 0 {
            continue;
        }
        if plan.with_replacement {
            if pool.is_empty() {
                return Err(capacity_error());
            }
            for _ in 0..want {
                copies[pool[rng.index(pool.len())]] += 1;
            }
        } else {
            if want > pool.len() as u64 {
                return Err(capacity_error());
            }
            for pick in rng.sample_without_replacement(pool.len(), want as usize) {
                copies[pool[pick]] += 1;
            }
        }
    }

    let mut out = Vec::new();
    for (idx, s) in manifest.samples().iter().enumerate() {
        if s.split != split {
            out.push(s.clone());
            continue;
        }
        for k in 0..copies[idx] {
            let mut copy: Sample = s.clone();
            if k > 0 {
                copy.id = format!("{}{DUPLICATE_SEPARATOR}{k}", s.id);
            }
            out.push(copy);
        }
    }
    DatasetManifest::new(manifest.name(), out)
}

/// Total-variation distance between two normalized label distributions.
pub fn shift_divergence(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if !p.classes().eq(q.classes()) {
        return Err(Error::validation("distributions have different class sets"));
    }
    let (tp, tq) = (p.total(), q.total());
    if tp == 0 || tq == 0 {
        return Err(Error::validation("distribution total is zero"));
    }
    let l1: f64 = p
        .iter()
        .zip(q.iter())
        .map(|((_, a), (_, b))| (a as f64 / tp as f64 - b as f64 / tq as f64).abs())
        .sum();
    Ok((0.5 * l1).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::{label_distribution, Source};

    fn uniform(n: u64) -> LabelDistribution {
        LabelDistribution::from_pairs([("rain", n), ("fog", n), ("snow", n), ("dust", n)]).unwrap()
    }

    fn label(s: &str) -> ClassLabel {
        ClassLabel::new(s).unwrap()
    }

    #[test]
    fn ids_follow_table_order() {
        let names: Vec<_> = (1..=5).map(|i| ShiftName::from_id(i).unwrap()).collect();
        assert_eq!(names, ShiftName::ALL);
        assert_eq!(ShiftName::from_id(1), Some(ShiftName::None));
        assert_eq!(ShiftName::from_id(5), Some(ShiftName::Dust));
        assert_eq!(ShiftName::from_id(6), None);
    }

    #[test]
    fn no_shift_is_identity() {
        let base = uniform(40);
        for seed in [0, 1, 99] {
            let out = make_shift(&ShiftScenario::standard(ShiftName::None), &base, seed).unwrap();
            assert_eq!(out, base);
        }
    }

    #[test]
    fn degenerate_jitter_doubles_boosted_class() {
        let sc = ShiftScenario::new(ShiftName::Rain, 2.0, (1.0, 1.0), (0, 0)).unwrap();
        let out = make_shift(&sc, &uniform(40), 5).unwrap();
        assert_eq!(
            out,
            LabelDistribution::from_pairs([("rain", 80), ("fog", 40), ("snow", 40), ("dust", 40)])
                .unwrap()
        );
    }

    #[test]
    fn tie_is_rescaled_to_strict_mode() {
        let sc = ShiftScenario::new(ShiftName::Fog, 1.0, (1.0, 1.0), (0, 0)).unwrap();
        let out = make_shift(&sc, &uniform(10), 0).unwrap();
        assert_eq!(out.get(&label("fog")), Some(10));
        for c in ["rain", "snow", "dust"] {
            assert_eq!(out.get(&label(c)), Some(9));
        }
    }

    #[test]
    fn boosting_an_empty_class_is_degenerate() {
        let base = LabelDistribution::from_pairs([("rain", 0), ("fog", 3)]).unwrap();
        let err = make_shift(&ShiftScenario::standard(ShiftName::Rain), &base, 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateScenario(c) if c == "rain"));
    }

    #[test]
    fn scenario_file_round_trip_and_validation() {
        let sc: ShiftScenario = serde_json::from_str(
            r#"{"id": 3, "name": "fog", "boost_factor": 1.5, "a_range": [0.8, 1.0], "b_range": [0, 2]}"#,
        )
        .unwrap();
        assert_eq!(sc.boosted_class(), Some(&label("fog")));
        assert_eq!(sc.b_range(), (0, 2));
        let back: ShiftScenario =
            serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(back, sc);

        let bad_id = r#"{"id": 2, "name": "fog", "boost_factor": 2, "a_range": [1,1], "b_range": [0,0]}"#;
        assert!(serde_json::from_str::<ShiftScenario>(bad_id).is_err());
        let bad_boost = r#"{"id": 3, "name": "fog", "boost_factor": 0.5, "a_range": [1,1], "b_range": [0,0]}"#;
        assert!(serde_json::from_str::<ShiftScenario>(bad_boost).is_err());
    }

    fn rain_fog_manifest(rain: usize, fog: usize) -> DatasetManifest {
        let mut samples = Vec::new();
        for i in 0..rain {
            samples.push(Sample::new(format!("r{i}"), label("rain"), Split::Test, Source::Real));
        }
        for i in 0..fog {
            samples.push(Sample::new(format!("f{i}"), label("fog"), Split::Test, Source::Real));
        }
        samples.push(Sample::new("t0", label("fog"), Split::Train, Source::Real));
        DatasetManifest::new("rf", samples).unwrap()
    }

    #[test]
    fn identity_target_keeps_every_sample() {
        let m = rain_fog_manifest(3, 2);
        let plan = ResamplePlan {
            target: label_distribution(&m, Split::Test),
            with_replacement: false,
            seed: 11,
        };
        let out = resample(&m, &plan, Split::Test).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn capacity_error_names_class() {
        let m = rain_fog_manifest(2, 1);
        let plan = ResamplePlan {
            target: LabelDistribution::from_pairs([("rain", 3)]).unwrap(),
            with_replacement: false,
            seed: 0,
        };
        match resample(&m, &plan, Split::Test) {
            Err(Error::Capacity { class, available, requested }) => {
                assert_eq!((class.as_str(), available, requested), ("rain", 2, 3));
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn with_replacement_suffixes_duplicates() {
        let m = rain_fog_manifest(2, 0);
        let plan = ResamplePlan {
            target: LabelDistribution::from_pairs([("rain", 4)]).unwrap(),
            with_replacement: true,
            seed: 42,
        };
        let out = resample(&m, &plan, Split::Test).unwrap();
        let test: Vec<_> = out.split(Split::Test).collect();
        assert_eq!(test.len(), 4);
        let mut by_origin: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &test {
            *by_origin.entry(base_id(&s.id)).or_default() += 1;
        }
        assert_eq!(by_origin.values().sum::<usize>(), 4);
        assert!(by_origin.keys().all(|k| *k == "r0" || *k == "r1"));
        // Train split untouched.
        assert_eq!(out.split(Split::Train).count(), 1);
    }

    #[test]
    fn unknown_target_class_rejected() {
        let m = rain_fog_manifest(2, 2);
        let plan = ResamplePlan {
            target: LabelDistribution::from_pairs([("snow", 1)]).unwrap(),
            with_replacement: true,
            seed: 0,
        };
        assert!(matches!(resample(&m, &plan, Split::Test), Err(Error::Validation(_))));
    }

    #[test]
    fn base_id_strips_numeric_suffix_only() {
        assert_eq!(base_id("img_1#3"), "img_1");
        assert_eq!(base_id("img_1"), "img_1");
        assert_eq!(base_id("a#b"), "a#b");
        assert_eq!(base_id("a#"), "a#");
    }

    #[test]
    fn divergence_cases() {
        let p = LabelDistribution::from_pairs([("a", 3), ("b", 1)]).unwrap();
        let q = LabelDistribution::from_pairs([("a", 1), ("b", 3)]).unwrap();
        assert_eq!(shift_divergence(&p, &p).unwrap(), 0.0);
        assert!((shift_divergence(&p, &q).unwrap() - 0.5).abs() < 1e-15);
        let x = LabelDistribution::from_pairs([("a", 5), ("b", 0)]).unwrap();
        let y = LabelDistribution::from_pairs([("a", 0), ("b", 2)]).unwrap();
        assert_eq!(shift_divergence(&x, &y).unwrap(), 1.0);
        let z = LabelDistribution::from_pairs([("a", 1), ("c", 1)]).unwrap();
        assert!(shift_divergence(&p, &z).is_err());
    }
}

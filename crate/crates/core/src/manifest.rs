//! Dataset data model and JSON-Lines persistence.
//!
//! One sample per line:
//!
//! ```text
//! {"id": str, "class": str, "split": "train"|"test", "source": "real"|"synthetic",
//!  "prompt_keywords": [str]?, "embedding_ref": str?,
//!  "boxes": [{"class": str, "x1": num, "y1": num, "x2": num, "y2": num}]?}
//! ```
//!
//! Optional keys are omitted when absent. Class names are trimmed and lower-cased.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClassLabel(String);

impl ClassLabel {
    pub fn new(name: &str) -> Result<Self> {
        let canonical = name.trim().to_lowercase();
        if canonical.is_empty() {
            return Err(Error::validation("class name is empty"));
        }
        Ok(Self(canonical))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ClassLabel {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        ClassLabel::new(&value)
    }
}

impl From<ClassLabel> for String {
    fn from(label: ClassLabel) -> Self {
        label.0
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::validation(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let b = Self { x1, y1, x2, y2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite());
        if !finite || self.x2 <= self.x1 || self.y2 <= self.y1 {
            return Err(Error::validation(format!(
                "malformed box ({}, {}, {}, {})",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthBox {
    pub class: ClassLabel,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl GroundTruthBox {
    pub fn bbox(&self) -> BBox {
        BBox {
            x1: self.x1,
            y1: self.y1,
            x2: self.x2,
            y2: self.y2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub class: ClassLabel,
    pub split: Split,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<GroundTruthBox>>,
}

impl Sample {
    pub fn new(id: impl Into<String>, class: ClassLabel, split: Split, source: Source) -> Self {
        Self {
            id: id.into(),
            class,
            split,
            source,
            prompt_keywords: None,
            embedding_ref: None,
            boxes: None,
        }
    }

    pub fn with_keywords<I, S>(mut self, keywords: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.prompt_keywords = Some(keywords.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_embedding_ref(mut self, key: impl Into<String>) -> Self {
        self.embedding_ref = Some(key.into());
        self
    }

    pub fn with_boxes(mut self, boxes: Vec<GroundTruthBox>) -> Self {
        self.boxes = Some(boxes);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("sample id is empty"));
        }
        if self.source == Source::Synthetic
            && self.prompt_keywords.is_none()
            && self.embedding_ref.is_none()
        {
            return Err(Error::validation(format!(
                "synthetic sample '{}' needs prompt_keywords or embedding_ref",
                self.id
            )));
        }
        for b in self.boxes.iter().flatten() {
            b.bbox()
                .validate()
                .map_err(|e| Error::validation(format!("sample '{}': {e}", self.id)))?;
        }
        Ok(())
    }
}

/// An ordered, validated collection of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    name: String,
    classes: BTreeSet<ClassLabel>,
    samples: Vec<Sample>,
}

impl DatasetManifest {
    /// Builds a manifest; the class set is the set of sample classes.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for s in &samples {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        let classes = samples.iter().map(|s| s.class.clone()).collect();
        Ok(Self {
            name: name.into(),
            classes,
            samples,
        })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            classes: BTreeSet::new(),
            samples: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &BTreeSet<ClassLabel> {
        &self.classes
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.split == split)
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }
}

/// Per-class counts over a fixed class set.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelDistribution {
    counts: BTreeMap<ClassLabel, u64>,
}

impl LabelDistribution {
    pub fn new(counts: BTreeMap<ClassLabel, u64>) -> Self {
        Self { counts }
    }

    pub fn zeros<'a>(classes: impl IntoIterator<Item = &'a ClassLabel>) -> Self {
        Self {
            counts: classes.into_iter().map(|c| (c.clone(), 0)).collect(),
        }
    }

    /// Convenience constructor from `(name, count)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for (name, n) in pairs {
            if counts.insert(ClassLabel::new(name)?, n).is_some() {
                return Err(Error::validation(format!("class '{name}' listed twice")));
            }
        }
        Ok(Self { counts })
    }

    pub fn get(&self, class: &ClassLabel) -> Option<u64> {
        self.counts.get(class).copied()
    }

    pub fn counts(&self) -> &BTreeMap<ClassLabel, u64> {
        &self.counts
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassLabel> {
        self.counts.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ClassLabel, u64)> {
        self.counts.iter().map(|(c, &n)| (c, n))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn label_distribution(manifest: &DatasetManifest, split: Split) -> LabelDistribution {
    let mut dist = LabelDistribution::zeros(manifest.classes());
    for s in manifest.split(split) {
        *dist.counts.get_mut(&s.class).expect("class set covers samples") += 1;
    }
    dist
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_manifest(&text, name, path)
}

/// Parses JSON-Lines text. `origin` is only used in error messages.
pub fn parse_manifest(text: &str, name: impl Into<String>, origin: &Path) -> Result<DatasetManifest> {
    let mut samples = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let sample: Sample = serde_json::from_value(value).map_err(|e| {
            Error::validation(format!("{}: line {line_no}: {e}", origin.display()))
        })?;
        sample
            .validate()
            .map_err(|e| Error::validation(format!("{}: line {line_no}: {e}", origin.display())))?;
        samples.push(sample);
    }
    DatasetManifest::new(name, samples)
}

pub fn manifest_to_jsonl(manifest: &DatasetManifest) -> String {
    let mut out = String::new();
    for s in manifest.samples() {
        out.push_str(&serde_json::to_string(s).expect("samples always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), manifest_to_jsonl(manifest).as_bytes())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> ClassLabel {
        ClassLabel::new(s).unwrap()
    }

    fn real(id: &str, class: &str, split: Split) -> Sample {
        Sample::new(id, label(class), split, Source::Real)
    }

    #[test]
    fn class_names_are_canonical() {
        assert_eq!(label(" Rain ").as_str(), "rain");
        assert!(ClassLabel::new("   ").is_err());
    }

    #[test]
    fn four_line_file() {
        let text = r#"{"id":"a","class":"rain","split":"train","source":"real"}
{"id":"b","class":"Fog","split":"train","source":"real"}
{"id":"c","class":"rain","split":"test","source":"real"}
{"id":"d","class":"fog","split":"test","source":"real"}
"#;
        let m = parse_manifest(text, "four", Path::new("four.jsonl")).unwrap();
        assert_eq!(m.len(), 4);
        assert_eq!(m.classes().len(), 2);
        let ids: Vec<_> = m.samples().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c", "d"]);
    }

    #[test]
    fn empty_file() {
        let m = parse_manifest("", "e", Path::new("e.jsonl")).unwrap();
        assert!(m.is_empty());
        assert!(m.classes().is_empty());
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = r#"{"id":"img_007","class":"rain","split":"train","source":"real"}
{"id":"img_007","class":"fog","split":"train","source":"real"}"#;
        match parse_manifest(text, "d", Path::new("d.jsonl")) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "img_007"),
            other => panic!("expected duplicate id error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = "{\"id\":\"a\",\"class\":\"rain\",\"split\":\"train\",\"source\":\"real\"}\n\n{oops\n";
        match parse_manifest(text, "m", Path::new("m.jsonl")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_enum_value_is_validation_error() {
        let text = r#"{"id":"a","class":"rain","split":"validation","source":"real"}"#;
        let err = parse_manifest(text, "m", Path::new("m.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
        let text = r#"{"id":"a","class":"rain","split":"train","source":"rendered"}"#;
        let err = parse_manifest(text, "m", Path::new("m.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn synthetic_needs_a_scoring_source() {
        let text = r#"{"id":"s","class":"rain","split":"train","source":"synthetic"}"#;
        assert!(matches!(
            parse_manifest(text, "m", Path::new("m.jsonl")),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn optional_fields_are_omitted() {
        let m = DatasetManifest::new("x", vec![real("a", "rain", Split::Train)]).unwrap();
        let text = manifest_to_jsonl(&m);
        assert_eq!(
            text,
            "{\"id\":\"a\",\"class\":\"rain\",\"split\":\"train\",\"source\":\"real\"}\n"
        );
    }

    #[test]
    fn malformed_box_rejected() {
        let s = real("a", "rain", Split::Test).with_boxes(vec![GroundTruthBox {
            class: label("car"),
            x1: 5.0,
            y1: 0.0,
            x2: 5.0,
            y2: 3.0,
        }]);
        assert!(DatasetManifest::new("x", vec![s]).is_err());
    }

    #[test]
    fn distribution_counts() {
        let m = DatasetManifest::new(
            "x",
            vec![
                real("1", "rain", Split::Train),
                real("2", "rain", Split::Train),
                real("3", "fog", Split::Train),
                real("4", "snow", Split::Test),
            ],
        )
        .unwrap();
        let d = label_distribution(&m, Split::Train);
        assert_eq!(d, LabelDistribution::from_pairs([("rain", 2), ("fog", 1), ("snow", 0)]).unwrap());
        assert_eq!(d.total(), 3);
    }

    #[test]
    fn empty_split_gives_zero_counts() {
        let m = DatasetManifest::new("x", vec![real("1", "rain", Split::Train)]).unwrap();
        let d = label_distribution(&m, Split::Test);
        assert_eq!(d.total(), 0);
        assert_eq!(d.get(&label("rain")), Some(0));
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dawn.jsonl");
        let samples = (0..766)
            .map(|i| {
                real(&format!("dawn_{i:04}"), ["rain", "fog", "snow", "dust"][i % 4], Split::Test)
            })
            .collect();
        let m = DatasetManifest::new("dawn", samples).unwrap();
        save_manifest(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 766);
        assert_eq!(load_manifest(&path).unwrap(), m);
    }

    #[test]
    fn save_into_missing_directory_is_io_error() {
        let m = DatasetManifest::empty("x");
        let err = save_manifest(&m, "/nonexistent-dir/for/sure/x.jsonl").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}

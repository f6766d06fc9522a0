use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::ClassLabel;

/// `cells[t][p]` counts samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: Vec<ClassLabel>,
    cells: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn cells(&self) -> &[Vec<u64>] {
        &self.cells
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.cells[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.cells[i][i]).sum()
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.cells[class].iter().sum()
    }

    pub fn col_sum(&self, class: usize) -> u64 {
        self.cells.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion_matrix(
    truths: &[ClassLabel],
    preds: &[ClassLabel],
    classes: &[ClassLabel],
) -> Result<ConfusionMatrix> {
    if truths.len() != preds.len() {
        return Err(Error::validation(format!(
            "{} truths but {} predictions",
            truths.len(),
            preds.len()
        )));
    }
    let mut position = HashMap::with_capacity(classes.len());
    for (i, c) in classes.iter().enumerate() {
        if position.insert(c, i).is_some() {
            return Err(Error::validation(format!("class '{c}' listed twice")));
        }
    }
    let lookup = |label: &ClassLabel| {
        position
            .get(label)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown class '{label}'")))
    };
    let mut cells = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, p) in truths.iter().zip(preds) {
        cells[lookup(t)?][lookup(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub per_class: BTreeMap<ClassLabel, ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Accuracy plus per-class and macro precision/recall/F1. Zero denominators give 0.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyReport);
    }
    let mut per_class = BTreeMap::new();
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for (i, class) in cm.classes.iter().enumerate() {
        let hit = cm.get(i, i);
        let precision = ratio(hit, cm.col_sum(i));
        let recall = ratio(hit, cm.row_sum(i));
        let f1 = harmonic(precision, recall);
        sp += precision;
        sr += recall;
        sf += f1;
        per_class.insert(class.clone(), ClassMetrics { precision, recall, f1 });
    }
    let k = cm.classes.len() as f64;
    Ok(ClassificationReport {
        accuracy: cm.trace() as f64 / total as f64,
        per_class,
        macro_precision: sp / k,
        macro_recall: sr / k,
        macro_f1: sf / k,
    })
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    sample_id: String,
    predicted_class: String,
}

/// Loads `sample_id,predicted_class` CSV into an id → class map.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<BTreeMap<String, ClassLabel>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_predictions(&text, path)
}

pub fn parse_predictions(text: &str, origin: &Path) -> Result<BTreeMap<String, ClassLabel>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::validation(format!(
                "{}: line {line}: duplicate prediction for '{}'",
                origin.display(),
                row.sample_id
            )));
        }
        let class = ClassLabel::new(&row.predicted_class)
            .map_err(|e| Error::validation(format!("{}: line {line}: {e}", origin.display())))?;
        out.insert(row.sample_id, class);
    }
    Ok(out)
}

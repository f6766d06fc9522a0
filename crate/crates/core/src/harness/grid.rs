use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::write_atomic;
use crate::metrics::ClassificationReport;

/// Compares strings so embedded numbers order numerically (`M2 < M10`).
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, sa), (db, sb)) in ca.iter().zip(&cb) {
        let ord = if *da && *db {
            let (ta, tb) = (sa.trim_start_matches('0'), sb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            sa.cmp(sb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridKey {
    pub split: String,
    pub shift: u8,
    pub model: String,
}

impl GridKey {
    pub fn new(split: impl Into<String>, shift: u8, model: impl Into<String>) -> Self {
        Self {
            split: split.into(),
            shift,
            model: model.into(),
        }
    }
}

impl Ord for GridKey {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.split, &other.split)
            .then_with(|| self.shift.cmp(&other.shift))
            .then_with(|| natural_cmp(&self.model, &other.model))
    }
}

impl PartialOrd for GridKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Summary metrics for one grid row. Fixture rows may carry accuracy only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub accuracy: f64,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

impl GridCell {
    pub fn accuracy_only(accuracy: f64) -> Self {
        Self {
            accuracy,
            macro_precision: None,
            macro_recall: None,
            macro_f1: None,
        }
    }
}

impl From<&ClassificationReport> for GridCell {
    fn from(r: &ClassificationReport) -> Self {
        Self {
            accuracy: r.accuracy,
            macro_precision: Some(r.macro_precision),
            macro_recall: Some(r.macro_recall),
            macro_f1: Some(r.macro_f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridMetadata {
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    /// Seconds since the Unix epoch.
    pub created_unix: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsGrid {
    rows: BTreeMap<GridKey, GridCell>,
    pub metadata: GridMetadata,
}

/// Accuracies of one split keyed by `(shift, model)`.
pub type GridSlice = BTreeMap<(u8, String), f64>;

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    split: String,
    shift: u8,
    model: String,
    accuracy: f64,
    macro_precision: Option<f64>,
    macro_recall: Option<f64>,
    macro_f1: Option<f64>,
}

impl ResultsGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: GridKey, cell: GridCell) -> Result<()> {
        if self.rows.contains_key(&key) {
            return Err(Error::validation(format!(
                "duplicate grid row (split {}, shift {}, model {})",
                key.split, key.shift, key.model
            )));
        }
        self.rows.insert(key, cell);
        Ok(())
    }

    pub fn get(&self, key: &GridKey) -> Option<&GridCell> {
        self.rows.get(key)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&GridKey, &GridCell)> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn splits(&self) -> Vec<String> {
        let mut splits: Vec<String> = Vec::new();
        for k in self.rows.keys() {
            if splits.last() != Some(&k.split) {
                splits.push(k.split.clone());
            }
        }
        splits
    }

    pub fn models(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.keys().map(|k| k.model.as_str()).collect();
        let mut models: Vec<String> = set.into_iter().map(str::to_owned).collect();
        models.sort_by(|a, b| natural_cmp(a, b));
        models
    }

    pub fn shifts(&self) -> Vec<u8> {
        let set: BTreeSet<u8> = self.rows.keys().map(|k| k.shift).collect();
        set.into_iter().collect()
    }

    pub fn slice(&self, split: &str) -> GridSlice {
        self.rows
            .iter()
            .filter(|(k, _)| k.split == split)
            .map(|(k, c)| ((k.shift, k.model.clone()), c.accuracy))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for (k, c) in &self.rows {
            w.serialize(CsvRow {
                split: k.split.clone(),
                shift: k.shift,
                model: k.model.clone(),
                accuracy: c.accuracy,
                macro_precision: c.macro_precision,
                macro_recall: c.macro_recall,
                macro_f1: c.macro_f1,
            })
            .expect("in-memory csv write");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut grid = Self::new();
        for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line,
                message: e.to_string(),
            })?;
            let cell = GridCell {
                accuracy: row.accuracy,
                macro_precision: row.macro_precision,
                macro_recall: row.macro_recall,
                macro_f1: row.macro_f1,
            };
            grid.insert(GridKey::new(row.split, row.shift, row.model), cell)
                .map_err(|e| Error::validation(format!("{}: line {line}: {e}", origin.display())))?;
        }
        Ok(grid)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftDelta {
    pub shift: u8,
    /// Mean accuracy gain in percentage points, rounded to 0.1.
    pub delta_pp: f64,
    pub raw_delta_pp: f64,
    pub models: usize,
}

pub fn round_tenth(x: f64) -> f64 {
    let r = (x * 10.0).round() / 10.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Per-shift mean of `treated - baseline` accuracy over models, in percentage points.
pub fn improvement_summary(baseline: &GridSlice, treated: &GridSlice) -> Result<Vec<ShiftDelta>> {
    if baseline.is_empty() {
        return Err(Error::validation("baseline slice is empty"));
    }
    if !baseline.keys().eq(treated.keys()) {
        let b: BTreeSet<_> = baseline.keys().collect();
        let t: BTreeSet<_> = treated.keys().collect();
        let describe = |keys: Vec<&&(u8, String)>| {
            keys.iter()
                .map(|(s, m)| format!("shift {s}/{m}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        return Err(Error::validation(format!(
            "baseline and treated slices cover different rows; only in baseline: [{}]; only in treated: [{}]",
            describe(b.difference(&t).collect()),
            describe(t.difference(&b).collect()),
        )));
    }
    let mut per_shift: BTreeMap<u8, (f64, usize)> = BTreeMap::new();
    for ((shift, model), base) in baseline {
        let treat = treated[&(*shift, model.clone())];
        let acc = per_shift.entry(*shift).or_default();
        acc.0 += treat - base;
        acc.1 += 1;
    }
    Ok(per_shift
        .into_iter()
        .map(|(shift, (sum, n))| {
            let raw = 100.0 * sum / n as f64;
            ShiftDelta {
                shift,
                delta_pp: round_tenth(raw),
                raw_delta_pp: raw,
                models: n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            other => Err(Error::validation(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    split: &'a str,
    shift: u8,
    model: &'a str,
    #[serde(flatten)]
    cell: &'a GridCell,
}

fn to_markdown(grid: &ResultsGrid) -> String {
    let models = grid.models();
    let mut out = String::from("| Split | Shift |");
    for m in &models {
        write!(out, " {m} |").unwrap();
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(models.len()));
    out.push('\n');
    for split in grid.splits() {
        for shift in grid.shifts() {
            let cells: Vec<String> = models
                .iter()
                .map(|m| match grid.get(&GridKey::new(split.clone(), shift, m.clone())) {
                    Some(c) => format!("{:.2}", 100.0 * c.accuracy),
                    None => "-".to_owned(),
                })
                .collect();
            if cells.iter().all(|c| c == "-") {
                continue;
            }
            write!(out, "| {split} | {shift} |").unwrap();
            for c in cells {
                write!(out, " {c} |").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

pub fn render_report(grid: &ResultsGrid, format: ReportFormat) -> Result<String> {
    if grid.is_empty() {
        return Err(Error::validation("cannot report an empty grid"));
    }
    Ok(match format {
        ReportFormat::Csv => grid.to_csv(),
        ReportFormat::Json => {
            let rows: Vec<JsonRow<'_>> = grid
                .rows()
                .map(|(k, cell)| JsonRow {
                    split: &k.split,
                    shift: k.shift,
                    model: &k.model,
                    cell,
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&rows).expect("grid serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => to_markdown(grid),
    })
}

pub fn emit_report(grid: &ResultsGrid, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let text = render_report(grid, format)?;
    write_atomic(path.as_ref(), text.as_bytes())
}

/// Plot-ready `series,x,y` CSV.
///
/// One accuracy series per `(split, model)` named `split/model` with x = shift
/// id and y = accuracy in percent. When both `baseline` and `treated` splits are
/// present, adds `delta/mean` and one `delta/<model>` series in percentage points.
pub fn plot_data(grid: &ResultsGrid, baseline: &str, treated: &str) -> Result<String> {
    if grid.is_empty() {
        return Err(Error::validation("cannot plot an empty grid"));
    }
    let mut out = String::from("series,x,y\n");
    let mut series: BTreeMap<(String, String), Vec<(u8, f64)>> = BTreeMap::new();
    for (k, c) in grid.rows() {
        series
            .entry((k.split.clone(), k.model.clone()))
            .or_default()
            .push((k.shift, c.accuracy));
    }
    let mut keys: Vec<&(String, String)> = series.keys().collect();
    keys.sort_by(|a, b| natural_cmp(&a.0, &b.0).then_with(|| natural_cmp(&a.1, &b.1)));
    for key in keys {
        for (x, acc) in &series[key] {
            writeln!(out, "{}/{},{x},{:.2}", key.0, key.1, 100.0 * acc).unwrap();
        }
    }

    let (b, t) = (grid.slice(baseline), grid.slice(treated));
    if !b.is_empty() && !t.is_empty() {
        for d in improvement_summary(&b, &t)? {
            writeln!(out, "delta/mean,{},{:.1}", d.shift, d.delta_pp).unwrap();
        }
        for model in grid.models() {
            for shift in grid.shifts() {
                let k = (shift, model.clone());
                if let (Some(bv), Some(tv)) = (b.get(&k), t.get(&k)) {
                    writeln!(out, "delta/{model},{shift},{:.1}", round_tenth(100.0 * (tv - bv))).unwrap();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(rows: &[(&str, u8, &str, f64)]) -> ResultsGrid {
        let mut g = ResultsGrid::new();
        for (s, sh, m, a) in rows {
            g.insert(GridKey::new(*s, *sh, *m), GridCell::accuracy_only(*a)).unwrap();
        }
        g
    }

    #[test]
    fn natural_order() {
        let mut v = vec!["M10", "M2", "M1", "t-rain", "20", "80", "50"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, ["20", "50", "80", "M1", "M2", "M10", "t-rain"]);
        assert_eq!(natural_cmp("a01", "a1"), Ordering::Less);
        assert_eq!(natural_cmp("", "a"), Ordering::Less);
    }

    #[test]
    fn duplicate_rows_rejected() {
        let mut g = grid(&[("20", 1, "M1", 0.5)]);
        assert!(g.insert(GridKey::new("20", 1, "M1"), GridCell::accuracy_only(0.1)).is_err());
    }

    #[test]
    fn identical_slices_give_zero_deltas() {
        let g = grid(&[("20", 1, "M1", 0.61), ("20", 2, "M1", 0.7), ("20", 2, "M2", 0.33)]);
        let s = g.slice("20");
        let d = improvement_summary(&s, &s).unwrap();
        assert!(d.iter().all(|x| x.delta_pp == 0.0 && x.delta_pp.is_sign_positive()));
    }

    #[test]
    fn single_model_delta() {
        let g = grid(&[("a", 1, "M1", 0.5), ("b", 1, "M1", 0.62)]);
        let d = improvement_summary(&g.slice("a"), &g.slice("b")).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].delta_pp, 12.0);
    }

    #[test]
    fn mismatched_slices_rejected() {
        let g = grid(&[("a", 1, "M1", 0.5), ("b", 1, "M2", 0.6)]);
        assert!(improvement_summary(&g.slice("a"), &g.slice("b")).is_err());
        assert!(improvement_summary(&g.slice("zzz"), &g.slice("zzz")).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut g = grid(&[("20", 1, "M1", 0.1 + 0.2), ("t-rain", 5, "M10", 2.0 / 3.0)]);
        g.insert(
            GridKey::new("80", 3, "M2"),
            GridCell {
                accuracy: 0.75,
                macro_precision: Some(0.7),
                macro_recall: Some(1.0 / 3.0),
                macro_f1: None,
            },
        )
        .unwrap();
        let back = ResultsGrid::from_csv(&g.to_csv(), Path::new("g.csv")).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn markdown_layout() {
        let g = grid(&[("20", 1, "M2", 0.5), ("20", 1, "M10", 0.25), ("20", 2, "M2", 1.0)]);
        let md = render_report(&g, ReportFormat::Markdown).unwrap();
        let lines: Vec<_> = md.lines().collect();
        assert_eq!(lines[0], "| Split | Shift | M2 | M10 |");
        assert_eq!(lines[2], "| 20 | 1 | 50.00 | 25.00 |");
        assert_eq!(lines[3], "| 20 | 2 | 100.00 | - |");
    }

    #[test]
    fn empty_grid_cannot_be_reported() {
        let g = ResultsGrid::new();
        for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
            assert!(render_report(&g, f).is_err());
        }
        assert!(plot_data(&g, "a", "b").is_err());
    }

    #[test]
    fn plot_series_counts() {
        let mut rows = Vec::new();
        for m in ["M1", "M2"] {
            for s in 1..=5 {
                rows.push(("80", s, m, 0.5 + f64::from(s) / 100.0));
            }
        }
        let g = grid(&rows);
        let csv = plot_data(&g, "20", "t-rain").unwrap();
        let series: BTreeSet<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(series.len(), 2);
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.contains("80/M1,3,53.00\n"));
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::harness::grid::{
    emit_report, improvement_summary, plot_data, GridCell, GridKey, GridMetadata, ReportFormat,
    ResultsGrid, ShiftDelta,
};
use crate::manifest::{
    label_distribution, load_manifest, save_manifest, write_atomic, ClassLabel, LabelDistribution,
    Split,
};
use crate::metrics::{classification_report, confusion_matrix, load_predictions, ClassificationReport};
use crate::rng::derive_seed;
use crate::shift::{base_id, make_shift, resample, shift_divergence, ResamplePlan, ShiftScenario};
use crate::simmap::{EmbeddingStore, DEFAULT_DIMS};
use crate::trainmap::{t_rain, OracleConfig, DEFAULT_BETA, DEFAULT_ETA};

pub const DEFAULT_BASELINE_SPLIT: &str = "20";
pub const DEFAULT_TREATED_SPLIT: &str = "t-rain";

/// One prediction file: the model `model` trained under `split`, evaluated on `shift`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionSource {
    pub split: String,
    pub shift: u8,
    pub model: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub synthetic: PathBuf,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_eta")]
    pub eta: usize,
    #[serde(default = "default_beta")]
    pub beta: usize,
    #[serde(default)]
    pub dims: Option<usize>,
    #[serde(default)]
    pub iterations: Option<usize>,
}

fn default_eta() -> usize {
    DEFAULT_ETA
}

fn default_beta() -> usize {
    DEFAULT_BETA
}

fn default_eval_split() -> Split {
    Split::Test
}

fn default_true() -> bool {
    true
}

fn default_baseline() -> String {
    DEFAULT_BASELINE_SPLIT.to_owned()
}

fn default_treated() -> String {
    DEFAULT_TREATED_SPLIT.to_owned()
}

fn default_output() -> PathBuf {
    PathBuf::from("suite-out")
}

/// Experiment description, stored as a single JSON document.
///
/// Relative paths resolve against `base_dir` (the config file's directory).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Real manifest whose `eval_split` is shifted and scored.
    pub manifest: PathBuf,
    #[serde(default = "default_eval_split")]
    pub eval_split: Split,
    #[serde(default = "default_true")]
    pub with_replacement: bool,
    #[serde(default)]
    pub scenarios: Option<Vec<ShiftScenario>>,
    pub predictions: Vec<PredictionSource>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_baseline")]
    pub baseline_split: String,
    #[serde(default = "default_treated")]
    pub treated_split: String,
    /// Optional augmentation run over the real manifest's training split.
    #[serde(default)]
    pub augment: Option<AugmentConfig>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn scenarios(&self) -> Vec<ShiftScenario> {
        self.scenarios.clone().unwrap_or_else(ShiftScenario::standard_set)
    }

    pub fn validate(&self) -> Result<()> {
        let scenarios = self.scenarios();
        let mut ids = BTreeSet::new();
        for s in &scenarios {
            if !ids.insert(s.id()) {
                return Err(Error::validation(format!("scenario id {} listed twice", s.id())));
            }
        }
        let mut keys = BTreeSet::new();
        for p in &self.predictions {
            if !ids.contains(&p.shift) {
                return Err(Error::validation(format!(
                    "prediction for model {} references unknown shift {}",
                    p.model, p.shift
                )));
            }
            if !keys.insert(GridKey::new(p.split.clone(), p.shift, p.model.clone())) {
                return Err(Error::validation(format!(
                    "prediction (split {}, shift {}, model {}) listed twice",
                    p.split, p.shift, p.model
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub id: u8,
    pub name: String,
    pub base: LabelDistribution,
    pub target: LabelDistribution,
    pub divergence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub grid: ResultsGrid,
    pub reports: BTreeMap<GridKey, ClassificationReport>,
    pub scenarios: Vec<ScenarioOutcome>,
}

/// Scores every prediction file against its shifted evaluation split.
///
/// Scenario `k` uses `derive_seed(seed, k)` for the target draw and
/// `derive_seed(seed, 1000 + k)` for resampling.
pub fn run_shift_suite(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    cfg.validate()?;
    let manifest = load_manifest(cfg.resolve(&cfg.manifest))?;
    let classes: Vec<ClassLabel> = manifest.classes().iter().cloned().collect();
    let base = label_distribution(&manifest, cfg.eval_split);

    let mut predictions: BTreeMap<PathBuf, BTreeMap<String, ClassLabel>> = BTreeMap::new();
    let mut grid = ResultsGrid::new();
    grid.metadata.seed = Some(cfg.seed);
    let mut reports = BTreeMap::new();
    let mut scenarios = Vec::new();

    let mut ordered = cfg.scenarios();
    ordered.sort_by_key(ShiftScenario::id);
    for scenario in &ordered {
        let id = u64::from(scenario.id());
        let target = make_shift(scenario, &base, derive_seed(cfg.seed, id))?;
        let plan = ResamplePlan {
            target: target.clone(),
            with_replacement: cfg.with_replacement,
            seed: derive_seed(cfg.seed, 1000 + id),
        };
        let shifted = resample(&manifest, &plan, cfg.eval_split)?;
        scenarios.push(ScenarioOutcome {
            id: scenario.id(),
            name: scenario.name().to_string(),
            divergence: shift_divergence(&base, &target)?,
            base: base.clone(),
            target,
        });

        let mut sources: Vec<&PredictionSource> =
            cfg.predictions.iter().filter(|p| p.shift == scenario.id()).collect();
        sources.sort_by(|a, b| {
            GridKey::new(a.split.clone(), a.shift, a.model.clone())
                .cmp(&GridKey::new(b.split.clone(), b.shift, b.model.clone()))
        });
        for src in sources {
            let path = cfg.resolve(&src.path);
            if !predictions.contains_key(&path) {
                predictions.insert(path.clone(), load_predictions(&path)?);
            }
            let preds = &predictions[&path];

            let mut truths = Vec::new();
            let mut guesses = Vec::new();
            let mut missing = BTreeSet::new();
            for s in shifted.split(cfg.eval_split) {
                let pred = preds.get(&s.id).or_else(|| preds.get(base_id(&s.id)));
                match pred {
                    Some(p) => {
                        truths.push(s.class.clone());
                        guesses.push(p.clone());
                    }
                    None => {
                        missing.insert(base_id(&s.id).to_owned());
                    }
                }
            }
            if !missing.is_empty() {
                return Err(Error::Coverage(missing.into_iter().collect()));
            }
            let cm = confusion_matrix(&truths, &guesses, &classes).map_err(|e| {
                Error::validation(format!("{}: {e}", path.display()))
            })?;
            let report = classification_report(&cm)?;
            let key = GridKey::new(src.split.clone(), src.shift, src.model.clone());
            grid.insert(key.clone(), GridCell::from(&report))?;
            reports.insert(key, report);
        }
    }
    Ok(SuiteOutcome {
        grid,
        reports,
        scenarios,
    })
}

#[derive(Serialize)]
struct ReportRow<'a> {
    split: &'a str,
    shift: u8,
    model: &'a str,
    report: &'a ClassificationReport,
}

#[derive(Serialize)]
struct Metadata<'a> {
    tool: &'static str,
    version: &'static str,
    #[serde(flatten)]
    grid: &'a GridMetadata,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Runs the suite and writes its output directory.
///
/// Everything except `metadata.json` is a pure function of the config and seed.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<SuiteOutcome> {
    let mut outcome = run_shift_suite(cfg)?;
    let out = cfg.resolve(&cfg.output_dir);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    if !outcome.grid.is_empty() {
        emit_report(&outcome.grid, ReportFormat::Csv, out.join("grid.csv"))?;
        emit_report(&outcome.grid, ReportFormat::Json, out.join("grid.json"))?;
        emit_report(&outcome.grid, ReportFormat::Markdown, out.join("grid.md"))?;
        let plot = plot_data(&outcome.grid, &cfg.baseline_split, &cfg.treated_split)?;
        write_atomic(&out.join("plot.csv"), plot.as_bytes())?;
    }

    let rows: Vec<ReportRow<'_>> = outcome
        .reports
        .iter()
        .map(|(k, r)| ReportRow {
            split: &k.split,
            shift: k.shift,
            model: &k.model,
            report: r,
        })
        .collect();
    write_json(&out.join("reports.json"), &rows)?;
    write_json(&out.join("shifts.json"), &outcome.scenarios)?;

    let (b, t) = (
        outcome.grid.slice(&cfg.baseline_split),
        outcome.grid.slice(&cfg.treated_split),
    );
    if !b.is_empty() && !t.is_empty() {
        let deltas: Vec<ShiftDelta> = improvement_summary(&b, &t)?;
        write_json(&out.join("summary.json"), &deltas)?;
    }

    if let Some(aug) = &cfg.augment {
        let real = load_manifest(cfg.resolve(&cfg.manifest))?;
        let synthetic = load_manifest(cfg.resolve(&aug.synthetic))?;
        let store = match &aug.embeddings {
            Some(p) => EmbeddingStore::load_csv(cfg.resolve(p))?,
            None => EmbeddingStore::new(aug.dims.unwrap_or(DEFAULT_DIMS))?,
        };
        let dims = aug.dims.unwrap_or(store.dims());
        let oracle_cfg = OracleConfig::new(aug.eta, aug.beta, dims, cfg.seed)?;
        let result = t_rain(&real, &synthetic, &store, &oracle_cfg, aug.iterations)?;
        save_manifest(&result.manifest, out.join("augmented.jsonl"))?;
        write_json(&out.join("augmentation_report.json"), &result.report)?;
    }

    outcome.grid.metadata.config_hash = Some(cfg.hash());
    outcome.grid.metadata.created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .ok()
        .map(|d| d.as_secs());
    write_json(
        &out.join("metadata.json"),
        &Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            grid: &outcome.grid.metadata,
        },
    )?;
    Ok(outcome)
}

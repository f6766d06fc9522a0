use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shiftbench::harness::{
    self, fixtures, improvement_summary, plot_data, ExperimentConfig, ReportFormat, ResultsGrid,
};
use shiftbench::manifest::{label_distribution, load_manifest, save_manifest, LabelDistribution, Split};
use shiftbench::metrics::{
    classification_report, confusion_matrix, evaluate_detections, ground_truths, load_detections,
    load_predictions, mean_ap, top4_subset, ApMode, PrPoint,
};
use shiftbench::shift::{
    make_shift, resample, shift_divergence, ResamplePlan, ShiftName, ShiftScenario,
    DEFAULT_BOOST_FACTOR,
};
use shiftbench::simmap::{EmbeddingStore, DEFAULT_DIMS};
use shiftbench::trainmap::{t_rain, OracleConfig, DEFAULT_BETA, DEFAULT_ETA};
use shiftbench::{Error, Result};

#[derive(Parser)]
#[command(name = "shiftbench", version, about = "Label-shift robustness tooling for weather datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect dataset manifests
    #[command(subcommand)]
    Manifest(ManifestCmd),
    /// Simulate label shift
    #[command(subcommand)]
    Shift(ShiftCmd),
    /// Similarity-mapped synthetic augmentation
    #[command(subcommand)]
    Trainmap(TrainmapCmd),
    /// Score predictions
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run and compare experiment grids
    #[command(subcommand)]
    Suite(SuiteCmd),
    /// Write grid reports
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Args)]
struct SeedArg {
    /// PRNG seed
    #[arg(long, env = "SHIFTBENCH_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum ManifestCmd {
    /// Per-split label distributions
    Stats { path: PathBuf },
}

#[derive(Subcommand)]
enum ShiftCmd {
    /// Resample a manifest split to a shifted label distribution
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Scenario JSON file; overrides --shift/--boost/--a-range/--b-range
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "rain")]
    shift: String,
    #[arg(long, default_value_t = DEFAULT_BOOST_FACTOR)]
    boost: f64,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.6, 1.0])]
    a_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0, 0])]
    b_range: Vec<i64>,
    #[arg(long, default_value = "test")]
    split: Split,
    /// Sample without replacement (fails if a class is too small)
    #[arg(long)]
    without_replacement: bool,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum TrainmapCmd {
    /// Merge the most class-similar synthetic samples into the real training set
    Augment(AugmentArgs),
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    real: PathBuf,
    #[arg(long)]
    synthetic: PathBuf,
    /// Embedding CSV (key,dim,v0,...); keyword embeddings are used otherwise
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: usize,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: usize,
    /// Keyword embedding dimension (defaults to the store's, else 256)
    #[arg(long)]
    dims: Option<usize>,
    /// Anchor draws (defaults to the real training-set size)
    #[arg(long)]
    iterations: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long)]
    out: PathBuf,
    /// Augmentation report JSON (stdout when absent)
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Accuracy and per-class precision/recall/F1
    Classify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
    },
    /// Per-class AP, mAP and T-4 AP
    Detect {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Restrict ground truth to one split
        #[arg(long)]
        split: Option<Split>,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::AllPoint)]
        mode: ModeArg,
        /// Include precision/recall points in the output
        #[arg(long)]
        pr: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    AllPoint,
    ElevenPoint,
}

#[derive(Subcommand)]
enum SuiteCmd {
    /// Evaluate every (split, shift, model) prediction file in a config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
        /// Output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean accuracy change per shift between two splits of a grid
    Compare {
        #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
        grid: Option<PathBuf>,
        #[arg(long, value_enum)]
        fixture: Option<FixtureArg>,
        #[arg(long, default_value = harness::DEFAULT_BASELINE_SPLIT)]
        baseline: String,
        #[arg(long, default_value = harness::DEFAULT_TREATED_SPLIT)]
        treated: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    ClassifierGrid,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Render a grid CSV as csv, json or markdown
    Emit {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
        /// Also write plot series CSV here
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value = harness::DEFAULT_BASELINE_SPLIT)]
        baseline: String,
        #[arg(long, default_value = harness::DEFAULT_TREATED_SPLIT)]
        treated: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

fn print_json<T: Serialize + ?Sized>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn manifest_stats(path: PathBuf) -> Result<()> {
    #[derive(Serialize)]
    struct Stats {
        name: String,
        samples: usize,
        classes: Vec<String>,
        train: LabelDistribution,
        test: LabelDistribution,
    }
    let m = load_manifest(&path)?;
    print_json(&Stats {
        name: m.name().to_owned(),
        samples: m.len(),
        classes: m.classes().iter().map(ToString::to_string).collect(),
        train: label_distribution(&m, Split::Train),
        test: label_distribution(&m, Split::Test),
    });
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(p) => ShiftScenario::load(p)?,
        None => ShiftScenario::new(
            args.shift.parse::<ShiftName>()?,
            args.boost,
            (args.a_range[0], args.a_range[1]),
            (args.b_range[0], args.b_range[1]),
        )?,
    };
    let seed = args.seed.seed.unwrap_or(0);
    let manifest = load_manifest(&args.manifest)?;
    let base = label_distribution(&manifest, args.split);
    let target = make_shift(&scenario, &base, seed)?;
    let plan = ResamplePlan {
        target: target.clone(),
        with_replacement: !args.without_replacement,
        seed,
    };
    let shifted = resample(&manifest, &plan, args.split)?;
    save_manifest(&shifted, &args.out)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        scenario: &'a ShiftScenario,
        seed: u64,
        base: LabelDistribution,
        target: LabelDistribution,
        divergence: f64,
        output: PathBuf,
    }
    print_json(&Summary {
        scenario: &scenario,
        seed,
        divergence: shift_divergence(&base, &target)?,
        base,
        target,
        output: args.out,
    });
    Ok(())
}

fn augment(args: AugmentArgs) -> Result<()> {
    let real = load_manifest(&args.real)?;
    let synthetic = load_manifest(&args.synthetic)?;
    let store = match &args.embeddings {
        Some(p) => EmbeddingStore::load_csv(p)?,
        None => EmbeddingStore::new(args.dims.unwrap_or(DEFAULT_DIMS))?,
    };
    let dims = args.dims.unwrap_or(store.dims());
    let cfg = OracleConfig::new(args.eta, args.beta, dims, args.seed.seed.unwrap_or(0))?;
    let result = t_rain(&real, &synthetic, &store, &cfg, args.iterations)?;
    for c in &result.report.conflicts {
        eprintln!(
            "warning: synthetic sample '{}' kept under '{}', also proposed for '{}'",
            c.sample_id, c.kept_class, c.rejected_class
        );
    }
    for class in &result.report.zero_augmentation {
        eprintln!("warning: class '{class}' received no augmentation");
    }
    save_manifest(&result.manifest, &args.out)?;
    match &args.report {
        Some(p) => {
            let mut text = serde_json::to_string_pretty(&result.report).expect("report serializes");
            text.push('\n');
            shiftbench::manifest::write_atomic(p, text.as_bytes())?;
        }
        None => print_json(&result.report),
    }
    Ok(())
}

fn eval_classify(manifest: PathBuf, predictions: PathBuf, split: Split) -> Result<()> {
    let m = load_manifest(&manifest)?;
    let preds = load_predictions(&predictions)?;
    let mut truths = Vec::new();
    let mut guesses = Vec::new();
    let mut missing = Vec::new();
    for s in m.split(split) {
        match preds.get(&s.id) {
            Some(p) => {
                truths.push(s.class.clone());
                guesses.push(p.clone());
            }
            None => missing.push(s.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let classes: Vec<_> = m.classes().iter().cloned().collect();
    let cm = confusion_matrix(&truths, &guesses, &classes)?;
    let report = classification_report(&cm)?;

    #[derive(Serialize)]
    struct Out<'a> {
        samples: usize,
        confusion: &'a shiftbench::metrics::ConfusionMatrix,
        report: &'a shiftbench::metrics::ClassificationReport,
    }
    print_json(&Out {
        samples: truths.len(),
        confusion: &cm,
        report: &report,
    });
    Ok(())
}

fn eval_detect(
    manifest: PathBuf,
    detections: PathBuf,
    split: Option<Split>,
    iou: f64,
    mode: ModeArg,
    pr: bool,
) -> Result<()> {
    let m = load_manifest(&manifest)?;
    let gts = ground_truths(&m, split);
    let dets = load_detections(&detections)?;
    let mode = match mode {
        ModeArg::AllPoint => ApMode::AllPoint,
        ModeArg::ElevenPoint => ApMode::ElevenPoint,
    };
    let results = evaluate_detections(&dets, &gts, iou, mode)?;

    #[derive(Serialize)]
    struct ClassRow {
        class: String,
        ap: Option<f64>,
        tp: u64,
        fp: u64,
        num_gt: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        warning: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pr_points: Option<Vec<PrPoint>>,
    }
    #[derive(Serialize)]
    struct Out {
        iou_threshold: f64,
        mode: ApMode,
        per_class: Vec<ClassRow>,
        map: Option<f64>,
        t4_ap: Option<f64>,
    }
    for r in &results {
        if let Some(w) = &r.warning {
            eprintln!("warning: {w}");
        }
    }
    let out = Out {
        iou_threshold: iou,
        mode,
        map: mean_ap(&results, None).ok(),
        t4_ap: mean_ap(&results, Some(&top4_subset())).ok(),
        per_class: results
            .into_iter()
            .map(|r| ClassRow {
                class: r.class.to_string(),
                ap: r.ap,
                tp: r.tp,
                fp: r.fp,
                num_gt: r.num_gt,
                warning: r.warning,
                pr_points: pr.then_some(r.pr_points),
            })
            .collect(),
    };
    print_json(&out);
    Ok(())
}

fn suite_run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.output_dir = std::env::current_dir()
            .map(|cwd| cwd.join(&o))
            .unwrap_or(o);
    }
    let outcome = harness::run_and_write(&cfg)?;
    eprintln!(
        "{} grid rows written to {}",
        outcome.grid.len(),
        cfg.resolve(&cfg.output_dir).display()
    );
    Ok(())
}

fn suite_compare(
    grid: Option<PathBuf>,
    fixture: Option<FixtureArg>,
    baseline: &str,
    treated: &str,
    json: bool,
) -> Result<()> {
    let grid = match (grid, fixture) {
        (Some(p), _) => ResultsGrid::load_csv(p)?,
        (None, Some(FixtureArg::ClassifierGrid)) => fixtures::classifier_grid(),
        (None, None) => return Err(Error::Validation("need --grid or --fixture".into())),
    };
    let deltas = improvement_summary(&grid.slice(baseline), &grid.slice(treated))?;
    if json {
        print_json(&deltas);
    } else {
        println!("shift\tname\tdelta_pp");
        for d in &deltas {
            let name = ShiftName::from_id(d.shift).map_or("-", ShiftName::as_str);
            println!("{}\t{}\t{:.1}", d.shift, name, d.delta_pp);
        }
    }
    Ok(())
}

fn report_emit(
    grid: PathBuf,
    format: FormatArg,
    out: PathBuf,
    plot: Option<PathBuf>,
    baseline: &str,
    treated: &str,
) -> Result<()> {
    let grid = ResultsGrid::load_csv(grid)?;
    harness::emit_report(&grid, format.into(), &out)?;
    if let Some(p) = plot {
        let data = plot_data(&grid, baseline, treated)?;
        shiftbench::manifest::write_atomic(&p, data.as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Manifest(ManifestCmd::Stats { path }) => manifest_stats(path),
        Command::Shift(ShiftCmd::Simulate(args)) => simulate(args),
        Command::Trainmap(TrainmapCmd::Augment(args)) => augment(args),
        Command::Eval(EvalCmd::Classify {
            manifest,
            predictions,
            split,
        }) => eval_classify(manifest, predictions, split),
        Command::Eval(EvalCmd::Detect {
            manifest,
            detections,
            split,
            iou,
            mode,
            pr,
        }) => eval_detect(manifest, detections, split, iou, mode, pr),
        Command::Suite(SuiteCmd::Run { config, seed, out }) => suite_run(config, seed.seed, out),
        Command::Suite(SuiteCmd::Compare {
            grid,
            fixture,
            baseline,
            treated,
            json,
        }) => suite_compare(grid, fixture, &baseline, &treated, json),
        Command::Report(ReportCmd::Emit {
            grid,
            format,
            out,
            plot,
            baseline,
            treated,
        }) => report_emit(grid, format, out, plot, &baseline, &treated),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

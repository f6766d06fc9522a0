use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::{BBox, ClassLabel, DatasetManifest, Split};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// The `car, person, bus, truck` subset averaged by "T-4 AP".
pub const TOP4_CLASSES: [&str; 4] = ["car", "person", "bus", "truck"];

pub fn top4_subset() -> Vec<ClassLabel> {
    TOP4_CLASSES
        .iter()
        .map(|c| ClassLabel::new(c).expect("static name"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class: ClassLabel,
    pub bbox: BBox,
    pub confidence: f64,
}

impl DetectionRecord {
    pub fn new(image_id: impl Into<String>, class: ClassLabel, bbox: BBox, confidence: f64) -> Result<Self> {
        bbox.validate()?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::validation(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(Self {
            image_id: image_id.into(),
            class,
            bbox,
            confidence,
        })
    }

    /// Total order: confidence descending, then image id and box coordinates ascending.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .confidence
            .total_cmp(&self.confidence)
            .then_with(|| self.image_id.cmp(&other.image_id))
            .then_with(|| self.bbox.x1.total_cmp(&other.bbox.x1))
            .then_with(|| self.bbox.y1.total_cmp(&other.bbox.y1))
            .then_with(|| self.bbox.x2.total_cmp(&other.bbox.x2))
            .then_with(|| self.bbox.y2.total_cmp(&other.bbox.y2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub class: ClassLabel,
    pub bbox: BBox,
}

/// Ground-truth boxes from a manifest, keyed by sample id.
pub fn ground_truths(manifest: &DatasetManifest, split: Option<Split>) -> Vec<GroundTruth> {
    manifest
        .samples()
        .iter()
        .filter(|s| split.is_none_or(|sp| s.split == sp))
        .flat_map(|s| {
            s.boxes.iter().flatten().map(move |b| GroundTruth {
                image_id: s.id.clone(),
                class: b.class.clone(),
                bbox: b.bbox(),
            })
        })
        .collect()
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = w * h;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApMode {
    /// Area under the monotone precision envelope at every recall step.
    #[default]
    AllPoint,
    /// Mean envelope precision at recall 0.0, 0.1, ..., 1.0.
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct APResult {
    pub class: ClassLabel,
    /// `None` when the class has neither ground truth nor detections.
    pub ap: Option<f64>,
    pub pr_points: Vec<PrPoint>,
    pub tp: u64,
    pub fp: u64,
    pub num_gt: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

pub fn average_precision(
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    class: &ClassLabel,
    iou_threshold: f64,
) -> Result<APResult> {
    average_precision_with(dets, gts, class, iou_threshold, ApMode::AllPoint)
}

/// AP for one class with greedy confidence-ordered matching.
///
/// Each detection claims the unmatched same-image ground truth with the
/// highest IoU (lowest index on ties); it is a true positive when that IoU
/// reaches `iou_threshold`.
pub fn average_precision_with(
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    class: &ClassLabel,
    iou_threshold: f64,
    mode: ApMode,
) -> Result<APResult> {
    if !(iou_threshold > 0.0 && iou_threshold < 1.0) {
        return Err(Error::validation(format!(
            "IoU threshold must be in (0, 1), got {iou_threshold}"
        )));
    }
    let mut ranked: Vec<&DetectionRecord> = dets.iter().filter(|d| &d.class == class).collect();
    ranked.sort_by(|a, b| a.rank_cmp(b));

    let mut by_image: HashMap<&str, Vec<(BBox, bool)>> = HashMap::new();
    let mut num_gt = 0u64;
    for g in gts.iter().filter(|g| &g.class == class) {
        by_image.entry(g.image_id.as_str()).or_default().push((g.bbox, false));
        num_gt += 1;
    }

    if num_gt == 0 {
        let fp = ranked.len() as u64;
        let (ap, warning) = if fp > 0 {
            (Some(0.0), Some(format!("class '{class}' has {fp} detection(s) but no ground truth")))
        } else {
            (None, None)
        };
        return Ok(APResult {
            class: class.clone(),
            ap,
            pr_points: Vec::new(),
            tp: 0,
            fp,
            num_gt: 0,
            warning,
        });
    }

    let (mut tp, mut fp) = (0u64, 0u64);
    let mut pr_points = Vec::with_capacity(ranked.len());
    for det in ranked {
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = by_image.get(det.image_id.as_str()) {
            for (i, (gt_box, matched)) in candidates.iter().enumerate() {
                if *matched {
                    continue;
                }
                let overlap = iou(&det.bbox, gt_box);
                if best.is_none_or(|(_, b)| overlap > b) {
                    best = Some((i, overlap));
                }
            }
        }
        match best {
            Some((i, overlap)) if overlap >= iou_threshold => {
                by_image.get_mut(det.image_id.as_str()).expect("image seen")[i].1 = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        pr_points.push(PrPoint {
            recall: tp as f64 / num_gt as f64,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }

    let ap = match mode {
        ApMode::AllPoint => all_point_ap(&pr_points),
        ApMode::ElevenPoint => eleven_point_ap(&pr_points),
    };
    Ok(APResult {
        class: class.clone(),
        ap: Some(ap),
        pr_points,
        tp,
        fp,
        num_gt,
        warning: None,
    })
}

/// `sum (r_i - r_{i-1}) * max_{j >= i} p_j` with `r_0 = 0`.
fn all_point_ap(points: &[PrPoint]) -> f64 {
    let mut envelope = vec![0.0; points.len()];
    let mut running = 0.0f64;
    for (i, p) in points.iter().enumerate().rev() {
        running = running.max(p.precision);
        envelope[i] = running;
    }
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for (p, env) in points.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    ap
}

fn eleven_point_ap(points: &[PrPoint]) -> f64 {
    (0..=10)
        .map(|t| {
            let level = t as f64 / 10.0;
            points
                .iter()
                .filter(|p| p.recall >= level)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Per-class AP over the union of classes present in detections and ground truth.
pub fn evaluate_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruth],
    iou_threshold: f64,
    mode: ApMode,
) -> Result<Vec<APResult>> {
    let classes: BTreeSet<&ClassLabel> =
        dets.iter().map(|d| &d.class).chain(gts.iter().map(|g| &g.class)).collect();
    classes
        .into_iter()
        .map(|c| average_precision_with(dets, gts, c, iou_threshold, mode))
        .collect()
}

/// Unweighted mean AP, optionally restricted to `subset`. Undefined results are skipped.
pub fn mean_ap(results: &[APResult], subset: Option<&[ClassLabel]>) -> Result<f64> {
    let included: Vec<f64> = results
        .iter()
        .filter(|r| subset.is_none_or(|s| s.contains(&r.class)))
        .filter_map(|r| r.ap)
        .collect();
    if included.is_empty() {
        return Err(Error::validation("no defined AP values to average"));
    }
    Ok(included.iter().sum::<f64>() / included.len() as f64)
}

#[derive(Debug, Deserialize)]
struct DetectionRow {
    image_id: String,
    class: String,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    confidence: f64,
}

/// Loads `image_id,class,x1,y1,x2,y2,confidence` CSV.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, path)
}

pub fn parse_detections(text: &str, origin: &Path) -> Result<Vec<DetectionRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<DetectionRow>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        let at_line = |e: Error| Error::validation(format!("{}: line {line}: {e}", origin.display()));
        let class = ClassLabel::new(&row.class).map_err(at_line)?;
        let bbox = BBox::new(row.x1, row.y1, row.x2, row.y2).map_err(at_line)?;
        out.push(DetectionRecord::new(row.image_id, class, bbox, row.confidence).map_err(at_line)?);
    }
    Ok(out)
}

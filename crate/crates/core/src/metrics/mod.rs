//! Classification and detection metrics.

mod classification;
mod detection;

pub use classification::{
    classification_report, confusion_matrix, load_predictions, parse_predictions, ClassMetrics,
    ClassificationReport, ConfusionMatrix,
};
pub use detection::{
    average_precision, average_precision_with, evaluate_detections, ground_truths, iou,
    load_detections, mean_ap, parse_detections, top4_subset, APResult, ApMode, DetectionRecord,
    GroundTruth, PrPoint, DEFAULT_IOU_THRESHOLD, TOP4_CLASSES,
};

//! Published benchmark tables shipped with the crate.
//!
//! Model accuracies and APs come from trained networks and are data here,
//! not computed. Accuracies are fractions; AP values are percentages as printed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::harness::grid::ResultsGrid;

pub const CLASSIFIER_GRID_CSV: &str = include_str!("../../fixtures/classifier_grid.csv");
pub const DETECTOR_BENCHMARKS_JSON: &str = include_str!("../../fixtures/detector_benchmarks.json");
pub const PEDESTRIAN_AP_JSON: &str = include_str!("../../fixtures/pedestrian_ap.json");

/// Weather-classification accuracy under the five shifts for models M1..M10,
/// split tags `80`, `50`, `20` (train percentage) and `t-rain`.
pub fn classifier_grid() -> ResultsGrid {
    ResultsGrid::from_csv(CLASSIFIER_GRID_CSV, Path::new("classifier_grid.csv"))
        .expect("shipped fixture parses")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DetectionBlock {
    pub per_class: BTreeMap<String, f64>,
    /// Printed mean over car, person, bus and truck, when the table has the column.
    #[serde(default)]
    pub t4_ap: Option<f64>,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DetectionRow {
    pub model: String,
    /// `coco` (good-weather pretraining) or `wedge-finetuned`.
    pub training: String,
    pub dawn: DetectionBlock,
    pub wedge: DetectionBlock,
}

/// Fully populated detector rows (real and synthetic evaluation).
pub fn detector_rows() -> Vec<DetectionRow> {
    serde_json::from_str(DETECTOR_BENCHMARKS_JSON).expect("shipped fixture parses")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PedestrianRow {
    pub weather: String,
    pub dawn: f64,
    pub wedge: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PedestrianTable {
    pub model: String,
    pub images: BTreeMap<String, u64>,
    pub rows: Vec<PedestrianRow>,
}

/// Pedestrian AP per weather condition.
pub fn pedestrian_ap() -> PedestrianTable {
    serde_json::from_str(PEDESTRIAN_AP_JSON).expect("shipped fixture parses")
}

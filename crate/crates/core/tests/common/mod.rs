//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use shiftbench::rng::Pcg32;

pub const WEATHER: [&str; 5] = ["clear", "dust", "fog", "rain", "snow"];

const VOCAB: [&str; 12] = [
    "puddle", "umbrella", "haze", "mist", "drift", "sand", "glare", "wet", "cold", "storm",
    "road", "night",
];

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_shiftbench")
}

/// Real manifest: `per_class` samples per weather class, alternating train/test.
pub fn real_manifest(per_class: usize) -> String {
    let mut out = String::new();
    for class in WEATHER {
        for i in 0..per_class {
            let split = if i % 2 == 0 { "train" } else { "test" };
            writeln!(
                out,
                r#"{{"id":"{class}-{i:03}","class":"{class}","split":"{split}","source":"real"}}"#
            )
            .unwrap();
        }
    }
    out
}

/// Synthetic manifest whose prompts mix the class name with vocabulary noise.
pub fn synthetic_manifest(n: usize, seed: u64) -> String {
    let mut rng = Pcg32::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n {
        let class = WEATHER[rng.index(WEATHER.len())];
        let mut kw = vec![format!("\"{class}\"")];
        for _ in 0..rng.index(3) {
            kw.push(format!("\"{}\"", VOCAB[rng.index(VOCAB.len())]));
        }
        writeln!(
            out,
            r#"{{"id":"syn-{i:04}","class":"{class}","split":"train","source":"synthetic","prompt_keywords":[{}]}}"#,
            kw.join(",")
        )
        .unwrap();
    }
    out
}

/// Prediction CSV covering every real test sample, correct with probability `skill`.
pub fn predictions(per_class: usize, skill: f64, seed: u64) -> String {
    let mut rng = Pcg32::seed_from_u64(seed);
    let mut out = String::from("sample_id,predicted_class\n");
    for class in WEATHER {
        for i in (1..per_class).step_by(2) {
            let pred = if rng.unit_f64() < skill {
                class
            } else {
                WEATHER[rng.index(WEATHER.len())]
            };
            writeln!(out, "{class}-{i:03},{pred}").unwrap();
        }
    }
    out
}

/// Writes a complete suite workspace under `dir` and returns the config path.
pub fn suite_workspace(dir: &Path, per_class: usize) -> PathBuf {
    fs::write(dir.join("real.jsonl"), real_manifest(per_class)).unwrap();
    fs::write(dir.join("synthetic.jsonl"), synthetic_manifest(300, 5)).unwrap();
    fs::create_dir_all(dir.join("preds")).unwrap();
    let mut sources = Vec::new();
    let mut seed = 100;
    for (split, skill) in [("20", 0.6), ("t-rain", 0.7)] {
        for model in ["M1", "M2", "M10"] {
            for shift in 1..=5 {
                seed += 1;
                let name = format!("{split}_{model}_{shift}.csv");
                fs::write(dir.join("preds").join(&name), predictions(per_class, skill, seed)).unwrap();
                sources.push(format!(
                    r#"{{"split":"{split}","shift":{shift},"model":"{model}","path":"preds/{name}"}}"#
                ));
            }
        }
    }
    let config = format!(
        r#"{{
  "manifest": "real.jsonl",
  "predictions": [{}],
  "output_dir": "out",
  "seed": 17,
  "augment": {{"synthetic": "synthetic.jsonl", "eta": 120, "beta": 6, "dims": 64, "iterations": 40}}
}}
"#,
        sources.join(",\n    ")
    );
    let path = dir.join("suite.json");
    fs::write(&path, config).unwrap();
    path
}

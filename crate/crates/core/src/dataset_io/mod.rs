//! File formats: YOLO labels, per-image metadata, encounters, simulation
//! results and summaries.
//!
//! Encounter, result and summary documents carry a `schemaVersion` field;
//! readers refuse documents without it or with another version.

mod labels;
mod metadata;
mod synthetic;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::encounters::Encounter;
use crate::metrics::{
    alert_frequency, nmac_frequency, safety_slices, DetectionRecord, Facet, ImageDetections, MetricsError, Rate,
    SliceAttributes, SliceReport, Sliceable,
};
use crate::simulator::{BatchResult, EncounterResult, SimConfig};

pub use labels::{parse_predictions, parse_yolo_label, write_predictions, write_yolo_label, LabelRecord, PredictionRecord};
pub use metadata::{parse_metadata, parse_metadata_with, write_metadata, ImageMetadata, MetadataAdapter};
pub use synthetic::{generate_synthetic_dataset, strata, SyntheticConfig, SyntheticSample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("line {line}: {message}")]
    Label { line: usize, message: String },
    #[error("field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("schema version {found:?} not supported (expected {expected})")]
    SchemaVersion { found: Option<Value>, expected: u32 },
    #[error("invalid JSON{}: {message}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Json { line: Option<usize>, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {error}", path.display())]
    Io { path: PathBuf, error: std::io::Error },
    #[error("{}: {error}", path.display())]
    File {
        path: PathBuf,
        error: Box<DatasetIoError>,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl DatasetIoError {
    fn in_file(self, path: &Path) -> Self {
        Self::File { path: path.to_path_buf(), error: Box::new(self) }
    }
}

pub fn read_text(path: &Path) -> Result<String, DatasetIoError> {
    fs::read_to_string(path).map_err(|error| DatasetIoError::Io { path: path.to_path_buf(), error })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), DatasetIoError> {
    let io = |error| DatasetIoError::Io { path: path.to_path_buf(), error };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    inner: &'a T,
}

fn versioned_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(&Versioned { schema_version: SCHEMA_VERSION, inner: value }).expect("serializable")
}

fn parse_versioned<T: DeserializeOwned>(text: &str, line: Option<usize>) -> Result<T, DatasetIoError> {
    let mut doc: Value = serde_json::from_str(text).map_err(|e| DatasetIoError::Json { line, message: e.to_string() })?;
    let found = doc.as_object_mut().and_then(|m| m.remove("schemaVersion"));
    if found.as_ref().and_then(Value::as_u64) != Some(u64::from(SCHEMA_VERSION)) {
        return Err(DatasetIoError::SchemaVersion { found, expected: SCHEMA_VERSION });
    }
    serde_path_to_error::deserialize(doc).map_err(|e| DatasetIoError::Schema {
        field: e.path().to_string(),
        message: match line {
            Some(l) => format!("line {l}: {}", e.inner()),
            None => e.inner().to_string(),
        },
    })
}

pub fn write_encounter(encounter: &Encounter) -> String {
    versioned_json(encounter) + "\n"
}

pub fn read_encounter(text: &str) -> Result<Encounter, DatasetIoError> {
    parse_versioned(text, None)
}

/// One `EncounterResult` per line.
pub fn write_results_jsonl(results: &[EncounterResult]) -> String {
    results.iter().map(|r| versioned_json(r) + "\n").collect()
}

pub fn read_results_jsonl(text: &str) -> Result<Vec<EncounterResult>, DatasetIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_versioned(l, Some(i + 1)))
        .collect()
}

/// Batch-level safety metrics, overall and per facet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSummary {
    pub master_seed: Option<u64>,
    pub config: SimConfig,
    pub encounters: usize,
    pub failures: usize,
    pub nmac: Rate,
    pub alert: Rate,
    /// Slice reports of every requested facet, in request order.
    pub slices: Vec<SliceReport>,
}

pub fn summarize(batch: &BatchResult, facets: &[Facet]) -> Result<SimulationSummary, MetricsError> {
    let mut slices = Vec::new();
    for &f in facets {
        slices.extend(safety_slices(&batch.results, f)?);
    }
    Ok(SimulationSummary {
        master_seed: batch.master_seed,
        config: batch.config.clone(),
        encounters: batch.results.len(),
        failures: batch.failures.len(),
        nmac: nmac_frequency(&batch.results)?,
        alert: alert_frequency(&batch.results)?,
        slices,
    })
}

pub fn write_summary(summary: &SimulationSummary) -> String {
    let v: Value = serde_json::from_str(&versioned_json(summary)).expect("round trip");
    serde_json::to_string_pretty(&v).expect("serializable") + "\n"
}

pub fn read_summary(text: &str) -> Result<SimulationSummary, DatasetIoError> {
    parse_versioned(text, None)
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>, DatasetIoError> {
    let io = |error| DatasetIoError::Io { path: dir.to_path_buf(), error };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// File name of encounter `id` inside an encounter directory.
pub fn encounter_file_name(id: u64) -> String {
    format!("encounter_{id:06}.json")
}

pub fn write_encounter_dir(dir: &Path, encounters: &[Encounter]) -> Result<(), DatasetIoError> {
    for e in encounters {
        write_text(&dir.join(encounter_file_name(e.id)), &write_encounter(e))?;
    }
    Ok(())
}

/// Every `encounter_*.json` file in a directory, ordered by id.
pub fn read_encounter_dir(dir: &Path) -> Result<Vec<Encounter>, DatasetIoError> {
    let mut out = Vec::new();
    for path in sorted_files(dir, "json")? {
        if !stem(&path).starts_with("encounter_") {
            continue;
        }
        out.push(read_encounter(&read_text(&path)?).map_err(|e| e.in_file(&path))?);
    }
    out.sort_by_key(|e| e.id);
    Ok(out)
}

/// Writes `<stem>.txt` labels and `<stem>.json` metadata side by side.
pub fn write_dataset_dir(dir: &Path, samples: &[SyntheticSample]) -> Result<(), DatasetIoError> {
    for s in samples {
        write_text(&dir.join(format!("{}.txt", s.stem)), &write_yolo_label(&[s.label]))?;
        write_text(&dir.join(format!("{}.json", s.stem)), &write_metadata(&s.metadata))?;
    }
    Ok(())
}

/// Images paired for evaluation plus the stems that could not be paired.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDetections {
    pub records: Vec<DetectionRecord>,
    /// Labels without a prediction file; evaluated as images with no predictions.
    pub missing_predictions: Vec<String>,
    /// Prediction files without a label file; ignored.
    pub orphan_predictions: Vec<String>,
}

/// Pairs `<stem>.txt` labels (with optional `<stem>.json` metadata) with
/// `<stem>.txt` prediction files. In strict mode any unpaired stem is an
/// error.
pub fn load_detections(
    labels_dir: &Path,
    predictions_dir: &Path,
    adapter: &MetadataAdapter,
    strict: bool,
) -> Result<LoadedDetections, DatasetIoError> {
    let label_files = sorted_files(labels_dir, "txt")?;
    let pred_stems: BTreeSet<String> = sorted_files(predictions_dir, "txt")?.iter().map(|p| stem(p)).collect();
    let label_stems: BTreeSet<String> = label_files.iter().map(|p| stem(p)).collect();
    let mut out = LoadedDetections {
        records: Vec::with_capacity(label_files.len()),
        missing_predictions: label_stems.difference(&pred_stems).cloned().collect(),
        orphan_predictions: pred_stems.difference(&label_stems).cloned().collect(),
    };
    if strict && !(out.missing_predictions.is_empty() && out.orphan_predictions.is_empty()) {
        return Err(DatasetIoError::Invalid(format!(
            "unpaired stems: labels without predictions {:?}, predictions without labels {:?}",
            out.missing_predictions, out.orphan_predictions
        )));
    }
    for path in label_files {
        let s = stem(&path);
        let gts = parse_yolo_label(&read_text(&path)?).map_err(|e| e.in_file(&path))?;
        let meta_path = labels_dir.join(format!("{s}.json"));
        let attributes = if meta_path.is_file() {
            parse_metadata_with(&read_text(&meta_path)?, adapter).map_err(|e| e.in_file(&meta_path))?.slice_attributes()
        } else {
            SliceAttributes::default()
        };
        let pred_path = predictions_dir.join(format!("{s}.txt"));
        let preds = if pred_stems.contains(&s) {
            parse_predictions(&read_text(&pred_path)?).map_err(|e| e.in_file(&pred_path))?
        } else {
            Vec::new()
        };
        out.records.push(DetectionRecord {
            stem: s,
            attributes,
            detections: ImageDetections {
                predictions: preds.iter().map(PredictionRecord::to_box).collect(),
                ground_truth: gts.iter().map(LabelRecord::to_box).collect(),
            },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encounters::{generate_encounters, ConditionGrid, EncounterConfig};
    use crate::perception::PerfectPerception;
    use crate::simulator::{run_encounter, Policy};

    fn encounter() -> Encounter {
        generate_encounters(5, ConditionGrid::Iid { count: 1 }, &EncounterConfig::default()).unwrap().remove(0)
    }

    #[test]
    fn encounter_round_trip() {
        let e = encounter();
        assert_eq!(e.steps(), 51);
        let text = write_encounter(&e);
        assert!(text.starts_with("{\"schemaVersion\":1,"));
        assert_eq!(read_encounter(&text).unwrap(), e);
    }

    #[test]
    fn schema_version_required() {
        let text = write_encounter(&encounter());
        let missing = text.replacen("\"schemaVersion\":1,", "", 1);
        assert!(matches!(read_encounter(&missing), Err(DatasetIoError::SchemaVersion { found: None, .. })));
        let wrong = text.replacen("\"schemaVersion\":1", "\"schemaVersion\":2", 1);
        assert!(matches!(read_encounter(&wrong), Err(DatasetIoError::SchemaVersion { found: Some(_), .. })));
    }

    #[test]
    fn result_lines() {
        let e = encounter();
        let cfg = SimConfig::default();
        let r = run_encounter(&e, &mut PerfectPerception { camera: cfg.camera }, &Policy::AlwaysCoc, &cfg).unwrap();
        assert!(r.nmac);
        let text = write_results_jsonl(&[r.clone(), r.clone()]);
        assert_eq!(text.lines().count(), 2);
        let back = read_results_jsonl(&text).unwrap();
        assert_eq!(back, vec![r.clone(), r]);
        assert!(back[0].nmac);
        match read_results_jsonl(&format!("{text}{{\"schemaVersion\":1,\"id\":3}}\n")) {
            Err(DatasetIoError::Schema { message, .. }) => assert!(message.starts_with("line 3")),
            other => panic!("{other:?}"),
        }
    }
}

//! YOLO label text (`class cx cy w h`) and predictions with a sixth
//! confidence column.

use serde::{Deserialize, Serialize};

use super::DatasetIoError;
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelRecord {
    pub class_id: u32,
    pub center_x: f64,
    pub center_y: f64,
    pub width: f64,
    pub height: f64,
}

impl LabelRecord {
    pub fn from_box(b: &BoundingBox) -> Self {
        Self { class_id: b.class_id, center_x: b.center_x, center_y: b.center_y, width: b.width, height: b.height }
    }

    pub fn to_box(&self) -> BoundingBox {
        BoundingBox {
            center_x: self.center_x,
            center_y: self.center_y,
            width: self.width,
            height: self.height,
            class_id: self.class_id,
            confidence: 1.0,
        }
    }

    fn coords(&self) -> [(&'static str, f64); 4] {
        [("center_x", self.center_x), ("center_y", self.center_y), ("width", self.width), ("height", self.height)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionRecord {
    pub label: LabelRecord,
    pub confidence: f64,
}

impl PredictionRecord {
    pub fn to_box(&self) -> BoundingBox {
        self.label.to_box().with_confidence(self.confidence)
    }
}

fn parse_line(line: &str, lineno: usize, fields: usize) -> Result<Vec<f64>, DatasetIoError> {
    let err = |message: String| DatasetIoError::Label { line: lineno, message };
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != fields {
        return Err(err(format!("expected {fields} fields, found {}", parts.len())));
    }
    let mut out = Vec::with_capacity(fields);
    for (i, p) in parts.iter().enumerate() {
        let v: f64 = if i == 0 {
            p.parse::<u32>().map(f64::from).map_err(|_| err(format!("class id {p:?} is not a non-negative integer")))?
        } else {
            p.parse().map_err(|_| err(format!("{p:?} is not a number")))?
        };
        out.push(v);
    }
    Ok(out)
}

fn label_from(v: &[f64], lineno: usize) -> Result<LabelRecord, DatasetIoError> {
    let rec = LabelRecord { class_id: v[0] as u32, center_x: v[1], center_y: v[2], width: v[3], height: v[4] };
    for (name, x) in rec.coords() {
        if !(0.0..=1.0).contains(&x) {
            return Err(DatasetIoError::Label { line: lineno, message: format!("{name} {x} outside [0, 1]") });
        }
    }
    Ok(rec)
}

/// One record per non-empty line; line numbers in errors start at 1.
pub fn parse_yolo_label(text: &str) -> Result<Vec<LabelRecord>, DatasetIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| label_from(&parse_line(l, i + 1, 5)?, i + 1))
        .collect()
}

fn format_label(r: &LabelRecord) -> String {
    format!("{} {:.6} {:.6} {:.6} {:.6}", r.class_id, r.center_x, r.center_y, r.width, r.height)
}

/// Six decimal places per coordinate.
pub fn write_yolo_label(records: &[LabelRecord]) -> String {
    records.iter().map(|r| format_label(r) + "\n").collect()
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, DatasetIoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v = parse_line(l, i + 1, 6)?;
            let label = label_from(&v[..5], i + 1)?;
            if !(0.0..=1.0).contains(&v[5]) {
                return Err(DatasetIoError::Label { line: i + 1, message: format!("confidence {} outside [0, 1]", v[5]) });
            }
            Ok(PredictionRecord { label, confidence: v[5] })
        })
        .collect()
}

pub fn write_predictions(records: &[PredictionRecord]) -> String {
    records.iter().map(|r| format!("{} {:.6}\n", format_label(&r.label), r.confidence)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_simple() {
        let r = parse_yolo_label("0 0.5 0.5 0.1 0.2\n\n").unwrap();
        assert_eq!(r, vec![LabelRecord { class_id: 0, center_x: 0.5, center_y: 0.5, width: 0.1, height: 0.2 }]);
        assert!(parse_yolo_label("").unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        match parse_yolo_label("0 0.5 0.5 0.1") {
            Err(DatasetIoError::Label { line: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_yolo_label("0 0.5 0.5 0.1 0.2\n\n0 0.5 x 0.1 0.2") {
            Err(DatasetIoError::Label { line: 3, message }) => assert!(message.contains("\"x\"")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_yolo_label("0 1.2 0.5 0.1 0.2"), Err(DatasetIoError::Label { line: 1, .. })));
        assert!(matches!(parse_yolo_label("-1 0.5 0.5 0.1 0.2"), Err(DatasetIoError::Label { .. })));
        assert!(matches!(parse_yolo_label("0.5 0.5 0.5 0.1 0.2"), Err(DatasetIoError::Label { .. })));
        assert!(matches!(parse_yolo_label("0 NaN 0.5 0.1 0.2"), Err(DatasetIoError::Label { .. })));
    }

    #[test]
    fn predictions_need_confidence() {
        let p = parse_predictions("0 0.5 0.5 0.1 0.2 0.75\n").unwrap();
        assert_eq!(p[0].confidence, 0.75);
        assert_eq!(write_predictions(&p), "0 0.500000 0.500000 0.100000 0.200000 0.750000\n");
        assert!(parse_predictions("0 0.5 0.5 0.1 0.2\n").is_err());
        assert!(parse_predictions("0 0.5 0.5 0.1 0.2 1.5\n").is_err());
    }
}

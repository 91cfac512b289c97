//! Safety and detection metrics, sliced by metadata.

mod detection;
mod slices;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RelativeGeometry;
use crate::simulator::EncounterResult;
use crate::units::{NMAC_HORIZONTAL_M, NMAC_VERTICAL_M};

pub use detection::{
    average_precision, evaluate_detections, iou, match_detections, pr_curve, precision_recall, DetectionCounts,
    DetectionEvalConfig, DetectionSummary, ImageDetections, ImageMatching, Interpolation, IouRegime,
};
pub use slices::{
    compare_reports, detection_slices, partition, plot_data, reports_to_csv, reports_to_markdown, safety_slices,
    Comparison, DetectionRecord, Facet, RangeBucket, RelativeAltitude, SliceAttributes, SliceKey, SliceMetrics,
    SliceReport, SliceValue, Sliceable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cannot compute {0} over an empty set")]
    Empty(&'static str),
    #[error("no ground-truth boxes")]
    NoGroundTruth,
    #[error("IoU threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown facet {0:?}")]
    UnknownFacet(String),
    #[error("record {index} has no value for facet {facet}")]
    FacetUnavailable { facet: Facet, index: usize },
    #[error("reports disagree: {0}")]
    Mismatch(String),
}

/// Simultaneous loss of horizontal and vertical separation (both strict).
pub fn is_nmac(rel: &RelativeGeometry) -> bool {
    rel.horizontal_range < NMAC_HORIZONTAL_M && rel.vertical_offset.abs() < NMAC_VERTICAL_M
}

/// A binomial frequency with its normal-approximation standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Rate {
    pub count: u64,
    pub n: u64,
    pub value: f64,
    pub standard_error: f64,
}

impl Rate {
    pub fn new(count: u64, n: u64) -> Option<Self> {
        if n == 0 || count > n {
            return None;
        }
        let p = count as f64 / n as f64;
        Some(Self { count, n, value: p, standard_error: (p * (1.0 - p) / n as f64).sqrt() })
    }
}

/// Fraction of encounters with an NMAC.
pub fn nmac_frequency(results: &[EncounterResult]) -> Result<Rate, MetricsError> {
    let k = results.iter().filter(|r| r.nmac).count() as u64;
    Rate::new(k, results.len() as u64).ok_or(MetricsError::Empty("NMAC frequency"))
}

/// Fraction of all simulated steps carrying an alert; the standard error
/// treats steps as the trials.
pub fn alert_frequency(results: &[EncounterResult]) -> Result<Rate, MetricsError> {
    let k: usize = results.iter().map(|r| r.alert_steps).sum();
    let n: usize = results.iter().map(|r| r.total_steps).sum();
    Rate::new(k as u64, n as u64).ok_or(MetricsError::Empty("alert frequency"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(range: f64, dz: f64) -> RelativeGeometry {
        RelativeGeometry {
            horizontal_range: range,
            vertical_offset: dz,
            bearing: 0.0,
            elevation: 0.0,
            horizontal_closing_speed: 0.0,
        }
    }

    fn result(nmac: bool, alerts: usize, total: usize) -> EncounterResult {
        EncounterResult {
            id: 0,
            seed: 0,
            conditions: None,
            steps: vec![],
            nmac,
            min_horizontal_sep: 0.0,
            min_vertical_sep_at_min_horizontal: 0.0,
            alert_steps: alerts,
            total_steps: total,
        }
    }

    #[test]
    fn nmac_predicate() {
        assert!(!is_nmac(&rel(152.4, 0.0)));
        assert!(is_nmac(&rel(100.0, 20.0)));
        assert!(is_nmac(&rel(100.0, -20.0)));
        assert!(!is_nmac(&rel(100.0, 40.0)));
        assert!(!is_nmac(&rel(100.0, 30.48)));
    }

    #[test]
    fn frequencies() {
        let all = vec![result(true, 0, 51); 4];
        assert_eq!(nmac_frequency(&all).unwrap().value, 1.0);
        assert_eq!(nmac_frequency(&all).unwrap().standard_error, 0.0);
        let none = vec![result(false, 0, 51); 4];
        assert_eq!(nmac_frequency(&none).unwrap().value, 0.0);
        assert_eq!(alert_frequency(&none).unwrap().value, 0.0);
        assert_eq!(alert_frequency(&[result(false, 10, 50)]).unwrap().value, 0.2);
        assert!(nmac_frequency(&[]).is_err());
        assert!(alert_frequency(&[]).is_err());
        let half = [result(true, 0, 1), result(false, 0, 1)];
        assert!((nmac_frequency(&half).unwrap().standard_error - (0.25f64 / 2.0).sqrt()).abs() < 1e-15);
    }
}

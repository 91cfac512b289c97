//! Single-class detection metrics on normalized boxes.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::geometry::BoundingBox;

/// Intersection over union; 0 when the union is empty.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (ax0, ay0, ax1, ay1) = a.corners();
    let (bx0, by0, bx1, by1) = b.corners();
    let iw = (ax1.min(bx1) - ax0.max(bx0)).max(0.0);
    let ih = (ay1.min(by1) - ay0.max(by0)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Matching of one image's predictions against its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageMatching {
    /// Confidence of each prediction, in input order.
    pub confidences: Vec<f64>,
    /// Ground-truth index matched by each prediction, in input order.
    pub matched: Vec<Option<usize>>,
    pub num_gt: usize,
}

impl ImageMatching {
    pub fn true_positives(&self) -> usize {
        self.matched.iter().filter(|m| m.is_some()).count()
    }

    /// `(confidence, is_true_positive)` per prediction.
    pub fn outcomes(&self) -> impl Iterator<Item = (f64, bool)> + '_ {
        self.confidences.iter().copied().zip(self.matched.iter().map(Option::is_some))
    }
}

fn check_threshold(t: f64) -> Result<(), MetricsError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidThreshold(t))
    }
}

/// Greedy matching in descending confidence (ties keep input order); each
/// prediction takes the unmatched ground truth of highest IoU at or above
/// the threshold (ties go to the lower index).
pub fn match_detections(
    preds: &[BoundingBox],
    gts: &[BoundingBox],
    iou_threshold: f64,
) -> Result<ImageMatching, MetricsError> {
    check_threshold(iou_threshold)?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence.total_cmp(&preds[a].confidence));
    let mut taken = vec![false; gts.len()];
    let mut matched = vec![None; preds.len()];
    for &p in &order {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let v = iou(&preds[p], gt);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            matched[p] = Some(g);
        }
    }
    Ok(ImageMatching { confidences: preds.iter().map(|p| p.confidence).collect(), matched, num_gt: gts.len() })
}

/// Counts at a confidence threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionCounts {
    pub tp: usize,
    pub fp: usize,
    pub num_gt: usize,
}

impl DetectionCounts {
    pub fn at_threshold(matchings: &[ImageMatching], confidence_threshold: f64) -> Self {
        let mut c = Self { tp: 0, fp: 0, num_gt: 0 };
        for m in matchings {
            c.num_gt += m.num_gt;
            for (conf, tp) in m.outcomes() {
                if conf >= confidence_threshold {
                    if tp {
                        c.tp += 1;
                    } else {
                        c.fp += 1;
                    }
                }
            }
        }
        c
    }

    /// `TP / (TP + FP)`, or 1.0 with no predictions.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        self.tp as f64 / self.num_gt as f64
    }
}

/// Precision and recall over predictions with confidence at or above
/// `confidence_threshold`.
pub fn precision_recall(matchings: &[ImageMatching], confidence_threshold: f64) -> Result<(f64, f64), MetricsError> {
    let c = DetectionCounts::at_threshold(matchings, confidence_threshold);
    if c.num_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    Ok((c.precision(), c.recall()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Interpolation {
    /// Exact area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean envelope precision at recalls 0, 0.01, ..., 1.
    Points101,
}

/// Precision-recall curve points, one per distinct confidence level in
/// descending order. Predictions sharing a confidence enter together.
pub fn pr_curve(matchings: &[ImageMatching]) -> Result<Vec<(f64, f64)>, MetricsError> {
    let num_gt: usize = matchings.iter().map(|m| m.num_gt).sum();
    if num_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let mut scored: Vec<(f64, bool)> = matchings.iter().flat_map(|m| m.outcomes()).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let conf = scored[i].0;
        while i < scored.len() && scored[i].0 == conf {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp as f64 / num_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    Ok(points)
}

/// Average precision of one class from per-image matchings.
pub fn average_precision(matchings: &[ImageMatching], interpolation: Interpolation) -> Result<f64, MetricsError> {
    let points = pr_curve(matchings)?;
    // precision envelope: best precision at any recall at or beyond each point
    let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    Ok(match interpolation {
        Interpolation::AllPoint => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (&(recall, _), &p) in points.iter().zip(&envelope) {
                ap += (recall - prev_recall) * p;
                prev_recall = recall;
            }
            ap
        }
        Interpolation::Points101 => {
            let mut sum = 0.0;
            for k in 0..=100 {
                let r = k as f64 / 100.0;
                let idx = points.partition_point(|&(recall, _)| recall < r);
                sum += envelope.get(idx).copied().unwrap_or(0.0);
            }
            sum / 101.0
        }
    })
}

/// Which IoU thresholds mAP averages over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum IouRegime {
    Single { threshold: f64 },
    /// 0.50, 0.55, ..., 0.95.
    Coco,
}

impl Default for IouRegime {
    fn default() -> Self {
        Self::Single { threshold: 0.5 }
    }
}

impl IouRegime {
    pub fn thresholds(&self) -> Vec<f64> {
        match *self {
            Self::Single { threshold } => vec![threshold],
            Self::Coco => (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
        }
    }
}

/// Predictions and ground truth of one image.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageDetections {
    pub predictions: Vec<BoundingBox>,
    pub ground_truth: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DetectionEvalConfig {
    /// IoU threshold for precision/recall matching.
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub map_iou: IouRegime,
    pub interpolation: Interpolation,
}

impl Default for DetectionEvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            confidence_threshold: 0.25,
            map_iou: IouRegime::default(),
            interpolation: Interpolation::default(),
        }
    }
}

/// Counts plus mAP for a set of images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionSummary {
    pub counts: DetectionCounts,
    pub precision: f64,
    pub recall: f64,
    pub map: f64,
}

pub fn evaluate_detections<'a, I>(images: I, config: &DetectionEvalConfig) -> Result<DetectionSummary, MetricsError>
where
    I: IntoIterator<Item = &'a ImageDetections> + Clone,
{
    let matchings = |t: f64| -> Result<Vec<ImageMatching>, MetricsError> {
        images.clone().into_iter().map(|im| match_detections(&im.predictions, &im.ground_truth, t)).collect()
    };
    let base = matchings(config.iou_threshold)?;
    let counts = DetectionCounts::at_threshold(&base, config.confidence_threshold);
    if counts.num_gt == 0 {
        return Err(MetricsError::NoGroundTruth);
    }
    let thresholds = config.map_iou.thresholds();
    let mut map = 0.0;
    for &t in &thresholds {
        let m = if t == config.iou_threshold { base.clone() } else { matchings(t)? };
        map += average_precision(&m, config.interpolation)?;
    }
    map /= thresholds.len() as f64;
    Ok(DetectionSummary { counts, precision: counts.precision(), recall: counts.recall(), map })
}

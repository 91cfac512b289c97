//! Partitioning records by metadata facet and emitting slice reports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::detection::{evaluate_detections, DetectionCounts, DetectionEvalConfig, ImageDetections};
use super::{alert_frequency, nmac_frequency, MetricsError, Rate};
use crate::encounters::{Conditions, Region, TimeWindow, Weather};
use crate::geometry::AircraftKind;
use crate::simulator::EncounterResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Facet {
    #[serde(rename = "all")]
    All,
    #[serde(rename = "weather")]
    Weather,
    #[serde(rename = "region")]
    Region,
    #[serde(rename = "aircraft")]
    AircraftType,
    #[serde(rename = "timeofday")]
    TimeOfDay,
    #[serde(rename = "range")]
    RangeBucket,
    #[serde(rename = "relativealtitude")]
    RelativeAltitude,
}

impl Facet {
    pub const ALL: [Facet; 7] = [
        Self::All,
        Self::Weather,
        Self::Region,
        Self::AircraftType,
        Self::TimeOfDay,
        Self::RangeBucket,
        Self::RelativeAltitude,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::All => "all",
            Self::Weather => "weather",
            Self::Region => "region",
            Self::AircraftType => "aircraft",
            Self::TimeOfDay => "timeofday",
            Self::RangeBucket => "range",
            Self::RelativeAltitude => "relativealtitude",
        }
    }

    /// Every value of the facet's domain, in display order.
    pub fn values(self) -> Vec<SliceValue> {
        match self {
            Self::All => vec![SliceValue::All],
            Self::Weather => Weather::ALL.into_iter().map(SliceValue::Weather).collect(),
            Self::Region => Region::ALL.into_iter().map(SliceValue::Region).collect(),
            Self::AircraftType => AircraftKind::ALL.into_iter().map(SliceValue::Aircraft).collect(),
            Self::TimeOfDay => TimeWindow::ALL.into_iter().map(SliceValue::TimeOfDay).collect(),
            Self::RangeBucket => RangeBucket::ALL.into_iter().map(SliceValue::Range).collect(),
            Self::RelativeAltitude => RelativeAltitude::ALL.into_iter().map(SliceValue::RelativeAltitude).collect(),
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Facet {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| !matches!(c, '_' | '-' | ' ')).collect::<String>().to_lowercase();
        Ok(match norm.as_str() {
            "all" | "overall" => Self::All,
            "weather" | "clouds" => Self::Weather,
            "region" => Self::Region,
            "aircraft" | "aircrafttype" => Self::AircraftType,
            "timeofday" | "time" => Self::TimeOfDay,
            "range" | "rangebucket" => Self::RangeBucket,
            "relativealtitude" | "relalt" | "intruderrelalt" => Self::RelativeAltitude,
            _ => return Err(MetricsError::UnknownFacet(s.to_string())),
        })
    }
}

/// Slant-range buckets, half-open ascending: `[0, 150)`, `[150, 500)`, `[500, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RangeBucket {
    Near,
    Mid,
    Far,
}

impl RangeBucket {
    pub const ALL: [RangeBucket; 3] = [Self::Near, Self::Mid, Self::Far];

    pub fn from_range(range: f64) -> Self {
        if range < 150.0 {
            Self::Near
        } else if range < 500.0 {
            Self::Mid
        } else {
            Self::Far
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Near => "0-150m",
            Self::Mid => "150-500m",
            Self::Far => ">500m",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelativeAltitude {
    Below,
    Above,
}

impl RelativeAltitude {
    pub const ALL: [RelativeAltitude; 2] = [Self::Below, Self::Above];

    /// Intruder altitude minus ownship altitude; level counts as above.
    pub fn from_offset(vertical_offset: f64) -> Self {
        if vertical_offset < 0.0 {
            Self::Below
        } else {
            Self::Above
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Below => "Below",
            Self::Above => "Above",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SliceValue {
    All,
    Weather(Weather),
    Region(Region),
    Aircraft(AircraftKind),
    TimeOfDay(TimeWindow),
    Range(RangeBucket),
    RelativeAltitude(RelativeAltitude),
}

impl SliceValue {
    pub fn label(&self) -> &'static str {
        match self {
            Self::All => "all",
            Self::Weather(w) => w.as_str(),
            Self::Region(r) => r.as_str(),
            Self::Aircraft(a) => a.as_str(),
            Self::TimeOfDay(t) => t.as_str(),
            Self::Range(r) => r.as_str(),
            Self::RelativeAltitude(r) => r.as_str(),
        }
    }

    pub fn facet(&self) -> Facet {
        match self {
            Self::All => Facet::All,
            Self::Weather(_) => Facet::Weather,
            Self::Region(_) => Facet::Region,
            Self::Aircraft(_) => Facet::AircraftType,
            Self::TimeOfDay(_) => Facet::TimeOfDay,
            Self::Range(_) => Facet::RangeBucket,
            Self::RelativeAltitude(_) => Facet::RelativeAltitude,
        }
    }
}

/// One slice of one facet. Serialized as `{"facet": ..., "value": label}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawKey", into = "RawKey")]
pub struct SliceKey {
    pub facet: Facet,
    pub value: SliceValue,
}

#[derive(Serialize, Deserialize)]
struct RawKey {
    facet: Facet,
    value: String,
}

impl From<SliceKey> for RawKey {
    fn from(k: SliceKey) -> Self {
        Self { facet: k.facet, value: k.value.label().to_string() }
    }
}

impl TryFrom<RawKey> for SliceKey {
    type Error = String;

    fn try_from(raw: RawKey) -> Result<Self, String> {
        raw.facet
            .values()
            .into_iter()
            .find(|v| v.label() == raw.value)
            .map(|value| SliceKey { facet: raw.facet, value })
            .ok_or_else(|| format!("{:?} is not a value of facet {}", raw.value, raw.facet))
    }
}

impl SliceKey {
    pub fn all() -> Self {
        Self { facet: Facet::All, value: SliceValue::All }
    }
}

impl fmt::Display for SliceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.facet, self.value.label())
    }
}

/// Metadata a record offers for slicing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SliceAttributes {
    pub conditions: Option<Conditions>,
    /// Slant range to the intruder, meters.
    pub range: Option<f64>,
    /// Intruder altitude minus ownship altitude, meters.
    pub vertical_offset: Option<f64>,
}

impl SliceAttributes {
    pub fn value(&self, facet: Facet) -> Option<SliceValue> {
        let c = self.conditions;
        match facet {
            Facet::All => Some(SliceValue::All),
            Facet::Weather => c.map(|c| SliceValue::Weather(c.weather)),
            Facet::Region => c.map(|c| SliceValue::Region(c.region)),
            Facet::AircraftType => c.map(|c| SliceValue::Aircraft(c.aircraft)),
            Facet::TimeOfDay => c.and_then(|c| c.time_window()).map(SliceValue::TimeOfDay),
            Facet::RangeBucket => self.range.map(|r| SliceValue::Range(RangeBucket::from_range(r))),
            Facet::RelativeAltitude => {
                self.vertical_offset.map(|v| SliceValue::RelativeAltitude(RelativeAltitude::from_offset(v)))
            }
        }
    }
}

pub trait Sliceable {
    fn slice_attributes(&self) -> SliceAttributes;
}

impl Sliceable for EncounterResult {
    fn slice_attributes(&self) -> SliceAttributes {
        SliceAttributes { conditions: self.conditions, range: None, vertical_offset: None }
    }
}

/// One evaluated image with its metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectionRecord {
    pub stem: String,
    pub attributes: SliceAttributes,
    pub detections: ImageDetections,
}

impl Sliceable for DetectionRecord {
    fn slice_attributes(&self) -> SliceAttributes {
        self.attributes
    }
}

/// Splits records into every slice of `facet`, including empty ones.
pub fn partition<T: Sliceable>(records: &[T], facet: Facet) -> Result<Vec<(SliceKey, Vec<&T>)>, MetricsError> {
    let mut slices: Vec<(SliceKey, Vec<&T>)> =
        facet.values().into_iter().map(|value| (SliceKey { facet, value }, Vec::new())).collect();
    for (index, r) in records.iter().enumerate() {
        let v = r.slice_attributes().value(facet).ok_or(MetricsError::FacetUnavailable { facet, index })?;
        let slot = slices.iter_mut().find(|(k, _)| k.value == v).expect("facet values cover the domain");
        slot.1.push(r);
    }
    Ok(slices)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum SliceMetrics {
    /// Rates are absent for empty slices.
    Safety { nmac: Option<Rate>, alert: Option<Rate> },
    #[serde(rename_all = "camelCase")]
    Detection {
        counts: DetectionCounts,
        precision: Option<f64>,
        precision_se: Option<f64>,
        recall: Option<f64>,
        recall_se: Option<f64>,
        map: Option<f64>,
    },
}

impl SliceMetrics {
    pub fn columns(&self) -> Vec<(&'static str, Option<f64>)> {
        match self {
            Self::Safety { nmac, alert } => vec![
                ("nmac_freq", nmac.map(|r| r.value)),
                ("nmac_se", nmac.map(|r| r.standard_error)),
                ("alert_freq", alert.map(|r| r.value)),
                ("alert_se", alert.map(|r| r.standard_error)),
            ],
            Self::Detection { precision, precision_se, recall, recall_se, map, .. } => vec![
                ("precision", *precision),
                ("precision_se", *precision_se),
                ("recall", *recall),
                ("recall_se", *recall_se),
                ("map", *map),
            ],
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Safety { .. } => "safety",
            Self::Detection { .. } => "detection",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SliceReport {
    pub key: SliceKey,
    pub n: usize,
    pub metrics: SliceMetrics,
}

/// NMAC and alert frequency per slice.
pub fn safety_slices(results: &[EncounterResult], facet: Facet) -> Result<Vec<SliceReport>, MetricsError> {
    partition(results, facet)?
        .into_iter()
        .map(|(key, members)| {
            let owned: Vec<EncounterResult> = members.into_iter().cloned().collect();
            Ok(SliceReport {
                key,
                n: owned.len(),
                metrics: SliceMetrics::Safety { nmac: nmac_frequency(&owned).ok(), alert: alert_frequency(&owned).ok() },
            })
        })
        .collect()
}

fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

/// Precision, recall and mAP per slice. Slices without ground truth carry
/// no metric values.
pub fn detection_slices(
    records: &[DetectionRecord],
    facet: Facet,
    config: &DetectionEvalConfig,
) -> Result<Vec<SliceReport>, MetricsError> {
    partition(records, facet)?
        .into_iter()
        .map(|(key, members)| {
            let n = members.len();
            let images = members.iter().map(|r| &r.detections);
            let metrics = match evaluate_detections(images, config) {
                Ok(s) => SliceMetrics::Detection {
                    counts: s.counts,
                    precision: Some(s.precision),
                    precision_se: Some(binomial_se(s.precision, s.counts.tp + s.counts.fp)),
                    recall: Some(s.recall),
                    recall_se: Some(binomial_se(s.recall, s.counts.num_gt)),
                    map: Some(s.map),
                },
                Err(MetricsError::NoGroundTruth) => SliceMetrics::Detection {
                    counts: DetectionCounts::at_threshold(&[], 0.0),
                    precision: None,
                    precision_se: None,
                    recall: None,
                    recall_se: None,
                    map: None,
                },
                Err(e) => return Err(e),
            };
            Ok(SliceReport { key, n, metrics })
        })
        .collect()
}

fn check_uniform(reports: &[SliceReport]) -> Result<Option<&SliceReport>, MetricsError> {
    let Some(first) = reports.first() else { return Ok(None) };
    if let Some(r) = reports.iter().find(|r| r.metrics.kind() != first.metrics.kind()) {
        return Err(MetricsError::Mismatch(format!(
            "{} report mixed with {} report",
            r.metrics.kind(),
            first.metrics.kind()
        )));
    }
    Ok(Some(first))
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map(|x| format!("{x:.decimals$}")).unwrap_or_default()
}

/// One CSV row per slice.
pub fn reports_to_csv(reports: &[SliceReport]) -> Result<String, MetricsError> {
    let mut out = String::from("facet,value,n");
    let Some(first) = check_uniform(reports)? else { return Ok(out + "\n") };
    for (name, _) in first.metrics.columns() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!("{},{},{}", r.key.facet, r.key.value.label(), r.n));
        for (_, v) in r.metrics.columns() {
            out.push(',');
            out.push_str(&cell(v, 6));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn reports_to_markdown(reports: &[SliceReport]) -> Result<String, MetricsError> {
    let Some(first) = check_uniform(reports)? else { return Ok(String::new()) };
    let names: Vec<&str> = first.metrics.columns().into_iter().map(|c| c.0).collect();
    let mut out = format!("| facet | value | n | {} |\n", names.join(" | "));
    out.push_str(&format!("|---|---|---:|{}\n", "---:|".repeat(names.len())));
    for r in reports {
        let cells: Vec<String> = r.metrics.columns().into_iter().map(|(_, v)| cell(v, 4)).collect();
        out.push_str(&format!("| {} | {} | {} | {} |\n", r.key.facet, r.key.value.label(), r.n, cells.join(" | ")));
    }
    Ok(out)
}

/// Plot-ready series: `{facet: {labels, n, series: {metric: [..]}}}`.
pub fn plot_data(reports: &[SliceReport]) -> Value {
    let mut root = Map::new();
    for r in reports {
        let entry = root
            .entry(r.key.facet.as_str())
            .or_insert_with(|| json!({"labels": [], "n": [], "series": {}}));
        entry["labels"].as_array_mut().unwrap().push(json!(r.key.value.label()));
        entry["n"].as_array_mut().unwrap().push(json!(r.n));
        let series = entry["series"].as_object_mut().unwrap();
        for (name, v) in r.metrics.columns() {
            series.entry(name).or_insert_with(|| json!([])).as_array_mut().unwrap().push(json!(v));
        }
    }
    Value::Object(root)
}

/// Reports from several runs aligned by slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Comparison {
    pub names: Vec<String>,
    pub rows: Vec<(SliceKey, Vec<SliceReport>)>,
}

/// Aligns runs slice by slice; every run must cover the same slices.
pub fn compare_reports(runs: &[(String, Vec<SliceReport>)]) -> Result<Comparison, MetricsError> {
    let Some((_, first)) = runs.first() else { return Err(MetricsError::Empty("comparison")) };
    let keys: Vec<SliceKey> = first.iter().map(|r| r.key).collect();
    for (name, reports) in runs {
        let other: Vec<SliceKey> = reports.iter().map(|r| r.key).collect();
        if other != keys {
            return Err(MetricsError::Mismatch(format!("{name} covers different slices than {}", runs[0].0)));
        }
        check_uniform(reports)?;
        if let (Some(a), Some(b)) = (reports.first(), first.first()) {
            if a.metrics.kind() != b.metrics.kind() {
                return Err(MetricsError::Mismatch(format!("{name} holds {} metrics", a.metrics.kind())));
            }
        }
    }
    let rows = keys
        .iter()
        .enumerate()
        .map(|(i, k)| (*k, runs.iter().map(|(_, r)| r[i]).collect()))
        .collect();
    Ok(Comparison { names: runs.iter().map(|(n, _)| n.clone()).collect(), rows })
}

impl Comparison {
    fn header(&self) -> Vec<String> {
        let mut cols = vec!["facet".to_string(), "value".to_string()];
        if let Some((_, reports)) = self.rows.first() {
            for (name, r) in self.names.iter().zip(reports) {
                cols.push(format!("{name}:n"));
                for (c, _) in r.metrics.columns() {
                    cols.push(format!("{name}:{c}"));
                }
            }
        }
        cols
    }

    fn body(&self, decimals: usize) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|(key, reports)| {
                let mut row = vec![key.facet.to_string(), key.value.label().to_string()];
                for r in reports {
                    row.push(r.n.to_string());
                    row.extend(r.metrics.columns().into_iter().map(|(_, v)| cell(v, decimals)));
                }
                row
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header().join(",") + "\n";
        for row in self.body(6) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let header = self.header();
        let mut out = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
        for row in self.body(4) {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn result(id: u64, hour: f64, nmac: bool) -> EncounterResult {
        EncounterResult {
            id,
            seed: 0,
            conditions: Some(Conditions { local_time: hour, ..Conditions::default() }),
            steps: vec![],
            nmac,
            min_horizontal_sep: 0.0,
            min_vertical_sep_at_min_horizontal: 0.0,
            alert_steps: 1,
            total_steps: 10,
        }
    }

    #[test]
    fn facet_parsing() {
        assert_eq!("timeofday".parse::<Facet>().unwrap(), Facet::TimeOfDay);
        assert_eq!("Time_Of_Day".parse::<Facet>().unwrap(), Facet::TimeOfDay);
        assert!(matches!("colour".parse::<Facet>(), Err(MetricsError::UnknownFacet(_))));
        for f in Facet::ALL {
            assert_eq!(f.as_str().parse::<Facet>().unwrap(), f);
        }
    }

    #[test]
    fn time_and_range_buckets() {
        let a = SliceAttributes {
            conditions: Some(Conditions { local_time: 9.5, ..Conditions::default() }),
            range: Some(150.0),
            vertical_offset: Some(-1.0),
        };
        assert_eq!(a.value(Facet::TimeOfDay), Some(SliceValue::TimeOfDay(TimeWindow::Morning)));
        assert_eq!(a.value(Facet::RangeBucket), Some(SliceValue::Range(RangeBucket::Mid)));
        assert_eq!(RangeBucket::from_range(500.0), RangeBucket::Far);
        assert_eq!(RangeBucket::from_range(149.99), RangeBucket::Near);
        assert_eq!(a.value(Facet::RelativeAltitude), Some(SliceValue::RelativeAltitude(RelativeAltitude::Below)));
    }

    #[test]
    fn safety_partition() {
        let rs: Vec<_> = [9.0, 9.5, 12.0, 16.5, 16.9].iter().enumerate().map(|(i, &h)| result(i as u64, h, i % 2 == 0)).collect();
        let slices = safety_slices(&rs, Facet::TimeOfDay).unwrap();
        assert_eq!(slices.len(), 4);
        assert_eq!(slices.iter().map(|s| s.n).sum::<usize>(), rs.len());
        assert!(matches!(
            safety_slices(&rs, Facet::RangeBucket),
            Err(MetricsError::FacetUnavailable { facet: Facet::RangeBucket, index: 0 })
        ));
    }

    #[test]
    fn empty_slices_have_no_values() {
        let rs = vec![result(0, 9.0, true)];
        let slices = safety_slices(&rs, Facet::Weather).unwrap();
        assert_eq!(slices.len(), 6);
        assert_eq!(slices[1].metrics, SliceMetrics::Safety { nmac: None, alert: None });
        let csv = reports_to_csv(&slices).unwrap();
        assert!(csv.starts_with("facet,value,n,nmac_freq,nmac_se,alert_freq,alert_se\n"));
        assert!(csv.contains("weather,Clear,1,1.000000,0.000000,0.100000,0.094868\n"));
        assert!(csv.contains("weather,Stratus,0,,,,\n"));
        let md = reports_to_markdown(&slices).unwrap();
        assert_eq!(md.lines().count(), 8);
    }

    #[test]
    fn key_serde() {
        let k = SliceKey { facet: Facet::RangeBucket, value: SliceValue::Range(RangeBucket::Far) };
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"facet":"range","value":">500m"}"#);
        assert_eq!(serde_json::from_str::<SliceKey>(&s).unwrap(), k);
        assert!(serde_json::from_str::<SliceKey>(r#"{"facet":"weather","value":"Fog"}"#).is_err());
    }

    #[test]
    fn detection_slices_perfect() {
        let b = BoundingBox::ground_truth(0.5, 0.5, 0.1, 0.1);
        let records: Vec<_> = TimeWindow::ALL
            .iter()
            .enumerate()
            .map(|(i, tw)| DetectionRecord {
                stem: format!("img{i}"),
                attributes: SliceAttributes {
                    conditions: Some(Conditions { local_time: tw.bounds().0 + 0.1, ..Conditions::default() }),
                    range: Some(300.0),
                    vertical_offset: Some(1.0),
                },
                detections: ImageDetections { predictions: vec![b], ground_truth: vec![b] },
            })
            .collect();
        let slices = detection_slices(&records, Facet::TimeOfDay, &DetectionEvalConfig::default()).unwrap();
        assert_eq!(slices.len(), 4);
        for s in &slices {
            let SliceMetrics::Detection { precision, recall, map, .. } = s.metrics else { panic!() };
            assert_eq!((precision, recall, map), (Some(1.0), Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn comparisons() {
        let rs = vec![result(0, 9.0, true), result(1, 10.0, false)];
        let a = safety_slices(&rs, Facet::Region).unwrap();
        let c = compare_reports(&[("base".into(), a.clone()), ("alt".into(), a.clone())]).unwrap();
        for (_, cols) in &c.rows {
            assert_eq!(cols[0], cols[1]);
        }
        assert!(c.to_csv().starts_with("facet,value,base:n,base:nmac_freq"));
        let single = compare_reports(&[("only".into(), a.clone())]).unwrap();
        assert_eq!(single.names.len(), 1);
        let b = safety_slices(&rs, Facet::Weather).unwrap();
        assert!(compare_reports(&[("a".into(), a), ("b".into(), b)]).is_err());
    }

    #[test]
    fn plot_json_shape() {
        let rs = vec![result(0, 9.0, true)];
        let v = plot_data(&safety_slices(&rs, Facet::Region).unwrap());
        assert_eq!(v["region"]["labels"].as_array().unwrap().len(), 4);
        assert_eq!(v["region"]["series"]["nmac_freq"][0], json!(1.0));
    }
}

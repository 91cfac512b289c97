//! Per-image metadata JSON.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::labels::LabelRecord;
use super::DatasetIoError;
use crate::encounters::{Conditions, Region, SceneConfig, Weather, EARLIEST_HOUR, LATEST_HOUR};
use crate::geometry::{project_to_image, AircraftKind, AircraftState, CameraModel};
use crate::metrics::{SliceAttributes, Sliceable};

/// Metadata of one image. Keys are lowerCamelCase; unknown keys are kept
/// in `extra` and written back unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageMetadata {
    pub weather: Weather,
    pub region: Region,
    pub aircraft: AircraftKind,
    /// Hours, `[8, 17]`.
    pub local_time: f64,
    pub ownship_east: f64,
    pub ownship_north: f64,
    pub ownship_up: f64,
    pub heading: f64,
    pub pitch: f64,
    pub roll: f64,
    /// Slant range to the intruder, meters.
    pub intruder_range: f64,
    /// Intruder altitude minus ownship altitude, meters.
    pub intruder_vertical_offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<LabelRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intruder_east: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intruder_north: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intruder_up: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intruder_heading: Option<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ImageMetadata {
    pub fn conditions(&self) -> Conditions {
        Conditions { weather: self.weather, region: self.region, aircraft: self.aircraft, local_time: self.local_time }
    }

    pub fn ownship(&self) -> AircraftState {
        AircraftState {
            east: self.ownship_east,
            north: self.ownship_north,
            up: self.ownship_up,
            heading: self.heading,
            pitch: self.pitch,
            roll: self.roll,
            ground_speed: 0.0,
            vertical_rate: 0.0,
        }
    }

    /// Intruder state when its position was recorded.
    pub fn intruder(&self) -> Option<AircraftState> {
        Some(AircraftState::level(
            self.intruder_east?,
            self.intruder_north?,
            self.intruder_up?,
            self.intruder_heading.unwrap_or(0.0),
            0.0,
        ))
    }

    /// The clipped label implied by the recorded geometry.
    pub fn reproject(&self, cam: &CameraModel) -> Option<LabelRecord> {
        let b = project_to_image(cam, &self.ownship(), &self.intruder()?, &self.aircraft.class())?;
        Some(LabelRecord::from_box(&b.clipped()))
    }

    pub fn validate(&self) -> Result<(), DatasetIoError> {
        let bad = |field: &str, message: String| Err(DatasetIoError::Schema { field: field.into(), message });
        if !(EARLIEST_HOUR..=LATEST_HOUR).contains(&self.local_time) {
            return bad("localTime", format!("{} outside [8, 17]", self.local_time));
        }
        let (_, _, min_range) = SceneConfig::default().range_params(self.aircraft);
        if !(self.intruder_range > min_range && self.intruder_range.is_finite()) {
            return bad("intruderRange", format!("{} not above the {min_range} m minimum", self.intruder_range));
        }
        if let Some(b) = &self.bbox {
            for (name, v) in [("centerX", b.center_x), ("centerY", b.center_y), ("width", b.width), ("height", b.height)] {
                if !(0.0..=1.0).contains(&v) {
                    return bad(&format!("bbox.{name}"), format!("{v} outside [0, 1]"));
                }
            }
        }
        Ok(())
    }
}

impl Sliceable for ImageMetadata {
    fn slice_attributes(&self) -> SliceAttributes {
        SliceAttributes {
            conditions: Some(self.conditions()),
            range: Some(self.intruder_range),
            vertical_offset: Some(self.intruder_vertical_offset),
        }
    }
}

/// Renames foreign metadata keys to ours before parsing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetadataAdapter {
    /// Foreign key → native key.
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
}

impl MetadataAdapter {
    pub fn apply(&self, mut doc: Value) -> Value {
        if let Value::Object(map) = &mut doc {
            for (from, to) in &self.rename {
                if let Some(v) = map.remove(from) {
                    map.insert(to.clone(), v);
                }
            }
        }
        doc
    }
}

fn from_value_named<T: serde::de::DeserializeOwned>(doc: Value) -> Result<T, DatasetIoError> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let field = e.path().to_string();
        DatasetIoError::Schema { field, message: e.into_inner().to_string() }
    })
}

pub fn parse_metadata(text: &str) -> Result<ImageMetadata, DatasetIoError> {
    parse_metadata_with(text, &MetadataAdapter::default())
}

pub fn parse_metadata_with(text: &str, adapter: &MetadataAdapter) -> Result<ImageMetadata, DatasetIoError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| DatasetIoError::Json { line: None, message: e.to_string() })?;
    let meta: ImageMetadata = from_value_named(adapter.apply(doc))?;
    meta.validate()?;
    Ok(meta)
}

pub fn write_metadata(meta: &ImageMetadata) -> String {
    serde_json::to_string_pretty(meta).expect("metadata serializes") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "weather": "Clear", "region": "PAO", "aircraft": "CessnaSkyhawk", "localTime": 9.5,
        "ownshipEast": 0, "ownshipNorth": 0, "ownshipUp": 100, "heading": 10, "pitch": 0, "roll": 0,
        "intruderRange": 300, "intruderVerticalOffset": -5
    }"#;

    #[test]
    fn minimal_document() {
        let m = parse_metadata(MINIMAL).unwrap();
        assert_eq!(m.weather, Weather::Clear);
        assert_eq!(m.local_time, 9.5);
        assert!(m.bbox.is_none() && m.extra.is_empty() && m.intruder().is_none());
    }

    #[test]
    fn unknown_enum_names_field() {
        let doc = MINIMAL.replace("\"Clear\"", "\"Tornado\"");
        match parse_metadata(&doc) {
            Err(DatasetIoError::Schema { field, message }) => {
                assert_eq!(field, "weather");
                assert!(message.contains("Tornado"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_named() {
        let doc = MINIMAL.replace("\"region\": \"PAO\",", "");
        match parse_metadata(&doc) {
            Err(DatasetIoError::Schema { message, .. }) => assert!(message.contains("region")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn range_and_time_validated() {
        assert!(parse_metadata(&MINIMAL.replace("9.5", "18.0")).is_err());
        assert!(parse_metadata(&MINIMAL.replace("\"intruderRange\": 300", "\"intruderRange\": 15")).is_err());
    }

    #[test]
    fn unknown_fields_survive_round_trip() {
        let doc = MINIMAL.replace("\"localTime\"", "\"sunAngle\": [1, 2], \"localTime\"");
        let m = parse_metadata(&doc).unwrap();
        assert_eq!(m.extra["sunAngle"], serde_json::json!([1, 2]));
        let again = parse_metadata(&write_metadata(&m)).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn adapter_renames() {
        let doc = MINIMAL.replace("\"localTime\"", "\"time_hours\"");
        assert!(parse_metadata(&doc).is_err());
        let adapter = MetadataAdapter { rename: [("time_hours".to_string(), "localTime".to_string())].into() };
        assert_eq!(parse_metadata_with(&doc, &adapter).unwrap().local_time, 9.5);
    }
}

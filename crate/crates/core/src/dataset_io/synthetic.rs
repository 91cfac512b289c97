//! Label-and-metadata datasets generated from sampled image geometry.

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use super::labels::LabelRecord;
use super::metadata::ImageMetadata;
use super::DatasetIoError;
use crate::encounters::{sample_image_scene, Conditions, Region, SceneConfig, Weather, EARLIEST_HOUR, LATEST_HOUR};
use crate::geometry::{project_to_image, AircraftKind, CameraModel};
use crate::rng::{item_seed, stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SyntheticConfig {
    pub camera: CameraModel,
    pub scene: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SyntheticSample {
    pub stem: String,
    pub label: LabelRecord,
    pub metadata: ImageMetadata,
}

/// The 72 (weather, region, aircraft) strata, weather-major.
pub fn strata() -> Vec<(Weather, Region, AircraftKind)> {
    let mut out = Vec::with_capacity(72);
    for w in Weather::ALL {
        for r in Region::ALL {
            for a in AircraftKind::ALL {
                out.push((w, r, a));
            }
        }
    }
    out
}

/// Generates `n` samples; sample `i` belongs to stratum `i mod 72`, so any
/// remainder goes one each to the leading strata. Each sample is seeded
/// independently from `master_seed`.
pub fn generate_synthetic_dataset(
    n: usize,
    master_seed: u64,
    config: &SyntheticConfig,
) -> Result<Vec<SyntheticSample>, DatasetIoError> {
    if n == 0 {
        return Err(DatasetIoError::Invalid("dataset size must be positive".into()));
    }
    config.camera.validate().map_err(|e| DatasetIoError::Invalid(e.to_string()))?;
    let strata = strata();
    let width = n.to_string().len().max(6);
    (0..n)
        .map(|i| {
            let (weather, region, aircraft) = strata[i % strata.len()];
            let mut rng = stream_rng(item_seed(master_seed, i as u64), Stream::Scene);
            let local_time = rng.gen_range(EARLIEST_HOUR..=LATEST_HOUR);
            let conditions = Conditions { weather, region, aircraft, local_time };
            let scene = sample_image_scene(&mut rng, &config.scene, conditions)
                .map_err(|e| DatasetIoError::Invalid(e.to_string()))?;
            let intruder = scene.intruder_state(&config.camera);
            let bbox = project_to_image(&config.camera, &scene.ownship, &intruder, &aircraft.class())
                .ok_or_else(|| DatasetIoError::Invalid(format!("sample {i}: intruder left the field of view")))?;
            let label = LabelRecord::from_box(&bbox.clipped());
            let own = scene.ownship;
            let metadata = ImageMetadata {
                weather,
                region,
                aircraft,
                local_time,
                ownship_east: own.east,
                ownship_north: own.north,
                ownship_up: own.up,
                heading: own.heading,
                pitch: own.pitch,
                roll: own.roll,
                intruder_range: scene.intruder_range,
                intruder_vertical_offset: intruder.up - own.up,
                bbox: Some(label),
                intruder_east: Some(intruder.east),
                intruder_north: Some(intruder.north),
                intruder_up: Some(intruder.up),
                intruder_heading: Some(intruder.heading),
                extra: Map::new(),
            };
            Ok(SyntheticSample { stem: format!("{i:0width$}"), label, metadata })
        })
        .collect()
}

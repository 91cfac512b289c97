//! Pluggable intruder detection.
//!
//! Every backend draws exactly one uniform variate per call, whether or not
//! it uses it. Perception streams are thereby coupled across backends and
//! detection probabilities: with a shared seed, raising a probability can
//! only turn misses into detections.

mod external;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encounters::{Conditions, Region, TimeWindow, Weather};
use crate::geometry::{
    camera_geometry, estimate_relative_from_box, in_field_of_view, project_to_image, relative_geometry,
    AircraftClass, AircraftKind, AircraftState, BoundingBox, CameraModel, GeometryError, RelativeGeometry,
};
use crate::rng::{stream_rng, SimRng, Stream};

pub use external::{
    DetectorClient, DEFAULT_TIMEOUT, DetectorRequest, DetectorResponse, ExternalDetector, SceneDescription, TimeoutPolicy, WireBox,
    WireCamera,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("detector did not answer request {id} within {timeout_ms} ms")]
    Timeout { id: u64, timeout_ms: u64 },
    #[error("detector protocol error: {message} (line: {line:?})")]
    Protocol { message: String, line: String },
    #[error("detector I/O error: {0}")]
    Io(String),
    #[error("detector closed its output")]
    Closed,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid detector profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PerceptionSource {
    Perfect,
    Stochastic,
    BoxGeometry,
    External,
}

/// What the perception layer hands to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IntruderEstimate {
    /// Level-frame relative geometry; closing speed is not estimated here.
    pub rel: RelativeGeometry,
    pub detected_box: Option<BoundingBox>,
    pub source: PerceptionSource,
}

/// One perception backend. Implementations keep per-encounter state only
/// between [`Perception::begin_encounter`] calls.
pub trait Perception: Send {
    /// Resets any per-encounter state; `seed` is the encounter's seed.
    fn begin_encounter(&mut self, _seed: u64) {}

    fn perceive(
        &mut self,
        ownship: &AircraftState,
        intruder: &AircraftState,
        conditions: &Conditions,
        rng: &mut SimRng,
    ) -> Result<Option<IntruderEstimate>, PerceptionError>;
}

fn visible(cam: &CameraModel, ownship: &AircraftState, intruder: &AircraftState) -> bool {
    in_field_of_view(cam, &camera_geometry(ownship, intruder))
}

/// Detects every intruder inside the camera frustum and reports truth.
#[derive(Debug, Clone)]
pub struct PerfectPerception {
    pub camera: CameraModel,
}

impl Perception for PerfectPerception {
    fn perceive(
        &mut self,
        ownship: &AircraftState,
        intruder: &AircraftState,
        _conditions: &Conditions,
        rng: &mut SimRng,
    ) -> Result<Option<IntruderEstimate>, PerceptionError> {
        let _: f64 = rng.gen();
        Ok(visible(&self.camera, ownship, intruder).then(|| IntruderEstimate {
            rel: relative_geometry(ownship, intruder),
            detected_box: None,
            source: PerceptionSource::Perfect,
        }))
    }
}

/// Per-facet multipliers on the range-bucket detection probability.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ConditionMultipliers {
    pub weather: BTreeMap<Weather, f64>,
    pub region: BTreeMap<Region, f64>,
    pub aircraft: BTreeMap<AircraftKind, f64>,
    pub time_of_day: BTreeMap<TimeWindow, f64>,
}

impl ConditionMultipliers {
    pub fn factor(&self, c: &Conditions) -> f64 {
        let w = self.weather.get(&c.weather).copied().unwrap_or(1.0);
        let r = self.region.get(&c.region).copied().unwrap_or(1.0);
        let a = self.aircraft.get(&c.aircraft).copied().unwrap_or(1.0);
        let t = c.time_window().and_then(|tw| self.time_of_day.get(&tw)).copied().unwrap_or(1.0);
        w * r * a * t
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weather
            .values()
            .chain(self.region.values())
            .chain(self.aircraft.values())
            .chain(self.time_of_day.values())
            .copied()
    }
}

/// Baseline detector recall: 0.983 below 150 m, 0.960 below 500 m, 0.818 beyond.
pub const BASELINE_RANGE_BOUNDS: [f64; 2] = [150.0, 500.0];
pub const BASELINE_RECALL: [f64; 3] = [0.983, 0.960, 0.818];
/// Overall recall of the baseline detector.
pub const BASELINE_OVERALL_RECALL: f64 = 0.907;

/// Detection probability as a function of slant range and conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct DetectorProfile {
    /// Strictly increasing upper bounds; bucket `i` is `[bounds[i-1], bounds[i])`.
    pub range_bounds: Vec<f64>,
    /// One more entry than `range_bounds`; the last covers everything beyond.
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub condition_multipliers: ConditionMultipliers,
}

impl Default for DetectorProfile {
    fn default() -> Self {
        Self::baseline()
    }
}

impl DetectorProfile {
    pub fn baseline() -> Self {
        Self {
            range_bounds: BASELINE_RANGE_BOUNDS.to_vec(),
            probabilities: BASELINE_RECALL.to_vec(),
            condition_multipliers: ConditionMultipliers::default(),
        }
    }

    /// A single probability at every range.
    pub fn constant(p: f64) -> Self {
        Self { range_bounds: vec![], probabilities: vec![p], condition_multipliers: ConditionMultipliers::default() }
    }

    /// Baseline profile with facet multipliers equal to each facet's recall
    /// over the overall recall of the reference detector.
    pub fn baseline_with_conditions() -> Self {
        let ratio = |r: f64| r / BASELINE_OVERALL_RECALL;
        let weather = [0.905, 0.930, 0.923, 0.921, 0.920, 0.846];
        let region = [0.930, 0.922, 0.866, 0.912];
        let aircraft = [0.844, 0.988, 0.897];
        let time = [0.911, 0.907, 0.914, 0.897];
        let mut m = ConditionMultipliers::default();
        m.weather = Weather::ALL.into_iter().zip(weather).map(|(k, r)| (k, ratio(r))).collect();
        m.region = Region::ALL.into_iter().zip(region).map(|(k, r)| (k, ratio(r))).collect();
        m.aircraft = AircraftKind::ALL.into_iter().zip(aircraft).map(|(k, r)| (k, ratio(r))).collect();
        m.time_of_day = TimeWindow::ALL.into_iter().zip(time).map(|(k, r)| (k, ratio(r))).collect();
        Self { condition_multipliers: m, ..Self::baseline() }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let bad = |m: String| Err(PerceptionError::InvalidProfile(m));
        if self.probabilities.len() != self.range_bounds.len() + 1 {
            return bad(format!(
                "{} probabilities for {} range bounds",
                self.probabilities.len(),
                self.range_bounds.len()
            ));
        }
        if self.range_bounds.windows(2).any(|w| w[1] <= w[0]) || self.range_bounds.iter().any(|b| !b.is_finite()) {
            return bad("range bounds must be finite and strictly increasing".into());
        }
        if self.probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if self.condition_multipliers.values().any(|f| !(f.is_finite() && f >= 0.0)) {
            return bad("condition multipliers must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn bucket(&self, range: f64) -> usize {
        self.range_bounds.partition_point(|&b| b <= range)
    }

    /// Composed probability, clamped to `[0, 1]`.
    pub fn probability(&self, range: f64, conditions: &Conditions) -> f64 {
        (self.probabilities[self.bucket(range)] * self.condition_multipliers.factor(conditions)).clamp(0.0, 1.0)
    }
}

/// Gaussian error added to detected positions (off by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PositionNoise {
    pub bearing_sd: f64,
    pub elevation_sd: f64,
    /// Standard deviation as a fraction of the slant range.
    pub range_sd_fraction: f64,
}

/// Bernoulli detector calibrated per range bucket and conditions.
#[derive(Debug, Clone)]
pub struct StochasticPerception {
    pub camera: CameraModel,
    pub profile: DetectorProfile,
    /// Multiplies every detection probability before clamping.
    pub scale: f64,
    pub noise: Option<PositionNoise>,
    noise_rng: SimRng,
}

impl StochasticPerception {
    pub fn new(camera: CameraModel, profile: DetectorProfile, scale: f64) -> Result<Self, PerceptionError> {
        profile.validate()?;
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(PerceptionError::InvalidProfile(format!("probability scale {scale}")));
        }
        Ok(Self { camera, profile, scale, noise: None, noise_rng: stream_rng(0, Stream::PerceptionNoise) })
    }

    pub fn with_noise(mut self, noise: PositionNoise) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn detection_probability(&self, range: f64, conditions: &Conditions) -> f64 {
        (self.profile.probability(range, conditions) * self.scale).clamp(0.0, 1.0)
    }

    fn perturb(&mut self, rel: RelativeGeometry) -> RelativeGeometry {
        let Some(n) = self.noise else { return rel };
        let draw = |rng: &mut SimRng, sd: f64| {
            if sd > 0.0 {
                Normal::new(0.0, sd).map(|d| d.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            }
        };
        let bearing = rel.bearing + draw(&mut self.noise_rng, n.bearing_sd);
        let elevation = (rel.elevation + draw(&mut self.noise_rng, n.elevation_sd)).clamp(-90.0, 90.0);
        let slant = rel.slant_range();
        let slant = (slant + draw(&mut self.noise_rng, n.range_sd_fraction * slant)).max(0.0);
        let el = elevation.to_radians();
        RelativeGeometry {
            horizontal_range: slant * el.cos(),
            vertical_offset: slant * el.sin(),
            bearing: crate::units::wrap_180(bearing),
            elevation,
            horizontal_closing_speed: rel.horizontal_closing_speed,
        }
    }
}

impl Perception for StochasticPerception {
    fn begin_encounter(&mut self, seed: u64) {
        self.noise_rng = stream_rng(seed, Stream::PerceptionNoise);
    }

    fn perceive(
        &mut self,
        ownship: &AircraftState,
        intruder: &AircraftState,
        conditions: &Conditions,
        rng: &mut SimRng,
    ) -> Result<Option<IntruderEstimate>, PerceptionError> {
        let u: f64 = rng.gen();
        if !visible(&self.camera, ownship, intruder) {
            return Ok(None);
        }
        let rel = relative_geometry(ownship, intruder);
        if u >= self.detection_probability(rel.slant_range(), conditions) {
            return Ok(None);
        }
        Ok(Some(IntruderEstimate { rel: self.perturb(rel), detected_box: None, source: PerceptionSource::Stochastic }))
    }
}

/// Which aircraft extents a box-based estimator assumes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum AssumedClass {
    /// Use the encounter's true intruder type.
    #[default]
    FromConditions,
    Fixed { class: AircraftClass },
}

impl AssumedClass {
    pub fn resolve(&self, conditions: &Conditions) -> AircraftClass {
        match self {
            Self::FromConditions => conditions.aircraft.class(),
            Self::Fixed { class } => *class,
        }
    }
}

/// Projects truth into the camera and estimates geometry from the box alone.
#[derive(Debug, Clone)]
pub struct BoxGeometryPerception {
    pub camera: CameraModel,
    pub assumed: AssumedClass,
}

impl Perception for BoxGeometryPerception {
    fn perceive(
        &mut self,
        ownship: &AircraftState,
        intruder: &AircraftState,
        conditions: &Conditions,
        rng: &mut SimRng,
    ) -> Result<Option<IntruderEstimate>, PerceptionError> {
        let _: f64 = rng.gen();
        let Some(bbox) = project_to_image(&self.camera, ownship, intruder, &conditions.aircraft.class()) else {
            return Ok(None);
        };
        let rel = estimate_relative_from_box(&self.camera, &bbox, &self.assumed.resolve(conditions), ownship)?;
        Ok(Some(IntruderEstimate { rel, detected_box: Some(bbox), source: PerceptionSource::BoxGeometry }))
    }
}

/// Declarative backend selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum PerceptionConfig {
    Perfect,
    /// Never detects.
    Blind,
    #[serde(rename_all = "camelCase")]
    Stochastic {
        #[serde(default)]
        profile: DetectorProfile,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        noise: Option<PositionNoise>,
    },
    #[serde(rename_all = "camelCase")]
    BoxGeometry {
        #[serde(default)]
        assumed: AssumedClass,
    },
    #[serde(rename_all = "camelCase")]
    External {
        /// Shell command speaking the protocol on stdin/stdout.
        #[serde(default)]
        command: Option<String>,
        /// `host:port` of a TCP endpoint; used when `command` is absent.
        #[serde(default)]
        address: Option<String>,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default)]
        on_timeout: TimeoutPolicy,
        #[serde(default)]
        min_confidence: f64,
        #[serde(default)]
        assumed: AssumedClass,
    },
}

fn one() -> f64 {
    1.0
}

fn default_timeout_ms() -> u64 {
    external::DEFAULT_TIMEOUT.as_millis() as u64
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self::Perfect
    }
}

impl PerceptionConfig {
    /// Builds a fresh backend; external detectors open a new endpoint per call.
    pub fn build(&self, camera: CameraModel, dt: f64) -> Result<Box<dyn Perception>, PerceptionError> {
        Ok(match self {
            Self::Perfect => Box::new(PerfectPerception { camera }),
            Self::Blind => Box::new(StochasticPerception::new(camera, DetectorProfile::constant(0.0), 0.0)?),
            Self::Stochastic { profile, scale, noise } => {
                let p = StochasticPerception::new(camera, profile.clone(), *scale)?;
                Box::new(match noise {
                    Some(n) => p.with_noise(*n),
                    None => p,
                })
            }
            Self::BoxGeometry { assumed } => Box::new(BoxGeometryPerception { camera, assumed: *assumed }),
            Self::External { command, address, timeout_ms, on_timeout, min_confidence, assumed } => {
                let client = match (command, address) {
                    (Some(cmd), _) => DetectorClient::spawn(cmd)?,
                    (None, Some(addr)) => DetectorClient::connect(addr)?,
                    (None, None) => {
                        return Err(PerceptionError::Io("external detector needs a command or an address".into()))
                    }
                };
                let mut d = ExternalDetector::new(client.with_timeout(std::time::Duration::from_millis(*timeout_ms)), camera);
                d.on_timeout = *on_timeout;
                d.min_confidence = *min_confidence;
                d.assumed = *assumed;
                d.dt = dt;
                Box::new(d)
            }
        })
    }
}

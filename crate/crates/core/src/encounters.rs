//! Pairwise encounter model and image-scene sampling.
//!
//! Encounters are two straight, level, constant-speed tracks built so that
//! the closest point of approach lands exactly on the sampled horizontal and
//! vertical miss distances. Scenes are single-frame ownship/intruder
//! placements used to generate detection labels.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{point_along_image_ray, AircraftKind, AircraftState, CameraModel};
use crate::rng::{item_seed, stream_rng, Stream};
use crate::units::wrap_360;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncounterError {
    #[error("invalid range for {name}: [{min}, {max}]")]
    InvalidRange { name: &'static str, min: f64, max: f64 },
    #[error("invalid timing: cpa at {cpa_time} s, duration {duration} s, step {dt} s")]
    InvalidTiming { duration: f64, cpa_time: f64, dt: f64 },
    #[error("encounter {0} is already placed")]
    AlreadyPlaced(u64),
    #[error("invalid scene configuration: {0}")]
    InvalidScene(String),
}

/// Closed interval `[min, max]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, name: &'static str) -> Result<(), EncounterError> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(EncounterError::InvalidRange { name, min: self.min, max: self.max })
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.gen_range(self.min..=self.max)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Uniform sampling ranges for the encounter features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct FeatureRanges {
    pub ownship_speed: Interval,
    pub intruder_speed: Interval,
    pub hmd: Interval,
    pub vmd: Interval,
    pub relative_heading: Interval,
}

impl Default for FeatureRanges {
    fn default() -> Self {
        Self {
            ownship_speed: Interval::new(60.0, 70.0),
            intruder_speed: Interval::new(60.0, 70.0),
            hmd: Interval::new(0.0, 100.0),
            vmd: Interval::new(-30.0, 30.0),
            relative_heading: Interval::new(100.0, 260.0),
        }
    }
}

impl FeatureRanges {
    pub fn validate(&self) -> Result<(), EncounterError> {
        self.ownship_speed.check("ownship_speed")?;
        self.intruder_speed.check("intruder_speed")?;
        self.hmd.check("hmd")?;
        self.vmd.check("vmd")?;
        self.relative_heading.check("relative_heading")?;
        if self.ownship_speed.min < 0.0 || self.intruder_speed.min < 0.0 || self.hmd.min < 0.0 {
            return Err(EncounterError::InvalidRange {
                name: "speeds and hmd must be non-negative",
                min: self.ownship_speed.min.min(self.intruder_speed.min).min(self.hmd.min),
                max: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncounterFeatures {
    pub ownship_speed: f64,
    pub intruder_speed: f64,
    /// Horizontal miss distance at CPA, meters.
    pub hmd: f64,
    /// Intruder minus ownship altitude at CPA, meters.
    pub vmd: f64,
    /// Intruder track relative to the ownship track, degrees.
    pub relative_heading: f64,
}

/// Draws each feature independently and uniformly from its range.
pub fn sample_features<R: Rng + ?Sized>(
    rng: &mut R,
    ranges: &FeatureRanges,
) -> Result<EncounterFeatures, EncounterError> {
    ranges.validate()?;
    Ok(EncounterFeatures {
        ownship_speed: ranges.ownship_speed.sample(rng),
        intruder_speed: ranges.intruder_speed.sample(rng),
        hmd: ranges.hmd.sample(rng),
        vmd: ranges.vmd.sample(rng),
        relative_heading: ranges.relative_heading.sample(rng),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Weather {
    Clear,
    HighCirrus,
    Scattered,
    Broken,
    Overcast,
    Stratus,
}

impl Weather {
    pub const ALL: [Weather; 6] = [
        Self::Clear,
        Self::HighCirrus,
        Self::Scattered,
        Self::Broken,
        Self::Overcast,
        Self::Stratus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Clear => "Clear",
            Self::HighCirrus => "HighCirrus",
            Self::Scattered => "Scattered",
            Self::Broken => "Broken",
            Self::Overcast => "Overcast",
            Self::Stratus => "Stratus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    PAO,
    BOS,
    OSH,
    RNO,
}

impl Region {
    pub const ALL: [Region; 4] = [Self::PAO, Self::BOS, Self::OSH, Self::RNO];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PAO => "PAO",
            Self::BOS => "BOS",
            Self::OSH => "OSH",
            Self::RNO => "RNO",
        }
    }
}

/// Local-time evaluation windows: morning [8,10), midday [10,13),
/// afternoon [13,15), late afternoon [15,17].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TimeWindow {
    Morning,
    Midday,
    Afternoon,
    LateAfternoon,
}

pub const EARLIEST_HOUR: f64 = 8.0;
pub const LATEST_HOUR: f64 = 17.0;

impl TimeWindow {
    pub const ALL: [TimeWindow; 4] = [Self::Morning, Self::Midday, Self::Afternoon, Self::LateAfternoon];

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Self::Morning => (8.0, 10.0),
            Self::Midday => (10.0, 13.0),
            Self::Afternoon => (13.0, 15.0),
            Self::LateAfternoon => (15.0, 17.0),
        }
    }

    pub fn from_hour(hour: f64) -> Option<Self> {
        if !(EARLIEST_HOUR..=LATEST_HOUR).contains(&hour) {
            return None;
        }
        Some(if hour < 10.0 {
            Self::Morning
        } else if hour < 13.0 {
            Self::Midday
        } else if hour < 15.0 {
            Self::Afternoon
        } else {
            Self::LateAfternoon
        })
    }

    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        let (lo, hi) = self.bounds();
        if self == Self::LateAfternoon {
            rng.gen_range(lo..=hi)
        } else {
            rng.gen_range(lo..hi)
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Morning => "Morning",
            Self::Midday => "Midday",
            Self::Afternoon => "Afternoon",
            Self::LateAfternoon => "LateAfternoon",
        }
    }
}

macro_rules! display_via_as_str {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    )*};
}
display_via_as_str!(Weather, Region, TimeWindow);

/// Environmental conditions of an encounter or image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Conditions {
    pub weather: Weather,
    pub region: Region,
    pub aircraft: AircraftKind,
    /// Local time in hours, `[8, 17]`.
    pub local_time: f64,
}

impl Default for Conditions {
    fn default() -> Self {
        Self {
            weather: Weather::Clear,
            region: Region::PAO,
            aircraft: AircraftKind::CessnaSkyhawk,
            local_time: 12.0,
        }
    }
}

impl Conditions {
    pub fn time_window(&self) -> Option<TimeWindow> {
        TimeWindow::from_hour(self.local_time)
    }
}

/// Independent uniform draw over every facet, time uniform on `[8, 17]`.
pub fn sample_conditions<R: Rng + ?Sized>(rng: &mut R) -> Conditions {
    Conditions {
        weather: Weather::ALL[rng.gen_range(0..Weather::ALL.len())],
        region: Region::ALL[rng.gen_range(0..Region::ALL.len())],
        aircraft: AircraftKind::ALL[rng.gen_range(0..AircraftKind::ALL.len())],
        local_time: rng.gen_range(EARLIEST_HOUR..=LATEST_HOUR),
    }
}

/// One cell of the weather × region × time window × aircraft grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionCell {
    pub weather: Weather,
    pub region: Region,
    pub window: TimeWindow,
    pub aircraft: AircraftKind,
}

impl ConditionCell {
    /// Conditions in this cell with the local time drawn inside its window.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Conditions {
        Conditions {
            weather: self.weather,
            region: self.region,
            aircraft: self.aircraft,
            local_time: self.window.sample(rng),
        }
    }
}

/// All 288 cells in a fixed order (weather-major, aircraft-minor).
pub fn factorial_cells() -> Vec<ConditionCell> {
    let mut cells = Vec::with_capacity(288);
    for weather in Weather::ALL {
        for region in Region::ALL {
            for window in TimeWindow::ALL {
                for aircraft in AircraftKind::ALL {
                    cells.push(ConditionCell { weather, region, window, aircraft });
                }
            }
        }
    }
    cells
}

/// How conditions are assigned across a batch of encounters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ConditionGrid {
    /// Every encounter draws its conditions independently.
    Iid { count: usize },
    /// `per_cell` fresh encounters for each of the 288 cells.
    Factorial { per_cell: usize },
}

/// Rigid placement applied to both tracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Placement {
    pub rotation: f64,
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PlacementConfig {
    pub rotate: bool,
    /// Half-width of the uniform east/north shift, meters.
    pub horizontal_extent: f64,
    /// Half-width of the uniform altitude shift, meters.
    pub vertical_extent: f64,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { rotate: true, horizontal_extent: 5000.0, vertical_extent: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EncounterConfig {
    pub features: FeatureRanges,
    pub duration: f64,
    pub cpa_time: f64,
    pub dt: f64,
    /// Constant intruder climb rate; zero keeps both aircraft level.
    pub intruder_vertical_rate: f64,
    pub placement: PlacementConfig,
}

impl Default for EncounterConfig {
    fn default() -> Self {
        Self {
            features: FeatureRanges::default(),
            duration: 50.0,
            cpa_time: 40.0,
            dt: 1.0,
            intruder_vertical_rate: 0.0,
            placement: PlacementConfig::default(),
        }
    }
}

/// Two scripted tracks sampled every `dt` seconds from `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Encounter {
    pub id: u64,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub cpa_time: f64,
    pub features: EncounterFeatures,
    pub conditions: Option<Conditions>,
    pub placement: Option<Placement>,
    pub ownship_script: Vec<AircraftState>,
    pub intruder_script: Vec<AircraftState>,
}

impl Encounter {
    pub fn steps(&self) -> usize {
        self.ownship_script.len()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Builds the two level tracks whose closest approach, at `cpa_time`, is
/// exactly `hmd` apart horizontally and `vmd` apart vertically.
///
/// The ownship flies north through the origin at `cpa_time`; the intruder
/// offset at CPA is perpendicular to the relative velocity, so horizontal
/// separation is minimized there.
pub fn build_trajectories(
    features: &EncounterFeatures,
    duration: f64,
    cpa_time: f64,
    dt: f64,
    intruder_vertical_rate: f64,
) -> Result<Encounter, EncounterError> {
    if !(dt > 0.0 && cpa_time > 0.0 && cpa_time < duration) {
        return Err(EncounterError::InvalidTiming { duration, cpa_time, dt });
    }
    let steps = (duration / dt).round() as usize + 1;
    let chi = features.relative_heading.to_radians();
    let vo = features.ownship_speed;
    let vi = features.intruder_speed;
    let vr = [vi * chi.sin(), vi * chi.cos() - vo];
    let vr_norm = vr[0].hypot(vr[1]);
    // Zero relative velocity leaves separation constant; any offset direction works.
    let normal = if vr_norm > 0.0 { [vr[1] / vr_norm, -vr[0] / vr_norm] } else { [1.0, 0.0] };
    let miss = [features.hmd * normal[0], features.hmd * normal[1]];

    let mut ownship_script = Vec::with_capacity(steps);
    let mut intruder_script = Vec::with_capacity(steps);
    for k in 0..steps {
        let s = k as f64 * dt - cpa_time;
        let own = AircraftState::level(0.0, vo * s, 0.0, 0.0, vo);
        let mut int = AircraftState::level(
            own.east + miss[0] + vr[0] * s,
            own.north + miss[1] + vr[1] * s,
            features.vmd + intruder_vertical_rate * s,
            features.relative_heading,
            vi,
        );
        int.vertical_rate = intruder_vertical_rate;
        ownship_script.push(own);
        intruder_script.push(int);
    }
    Ok(Encounter {
        id: 0,
        seed: 0,
        dt,
        duration,
        cpa_time,
        features: *features,
        conditions: None,
        placement: None,
        ownship_script,
        intruder_script,
    })
}

fn apply_placement(state: &AircraftState, p: &Placement) -> AircraftState {
    let (s, c) = p.rotation.to_radians().sin_cos();
    AircraftState {
        east: state.east * c + state.north * s + p.east,
        north: -state.east * s + state.north * c + p.north,
        up: state.up + p.up,
        heading: wrap_360(state.heading + p.rotation),
        ..*state
    }
}

/// Applies one shared rotation about the vertical axis and one shared shift
/// to both tracks.
pub fn place_in_region<R: Rng + ?Sized>(
    mut encounter: Encounter,
    rng: &mut R,
    config: &PlacementConfig,
) -> Result<Encounter, EncounterError> {
    if encounter.placement.is_some() {
        return Err(EncounterError::AlreadyPlaced(encounter.id));
    }
    let h = config.horizontal_extent.abs();
    let v = config.vertical_extent.abs();
    let placement = Placement {
        rotation: if config.rotate { rng.gen_range(0.0..360.0) } else { 0.0 },
        east: if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 },
        north: if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 },
        up: if v > 0.0 { rng.gen_range(-v..=v) } else { 0.0 },
    };
    for s in encounter.ownship_script.iter_mut().chain(encounter.intruder_script.iter_mut()) {
        *s = apply_placement(s, &placement);
    }
    encounter.placement = Some(placement);
    Ok(encounter)
}

/// Samples, builds and places one encounter from its own seed.
pub fn sample_encounter(
    id: u64,
    seed: u64,
    config: &EncounterConfig,
    cell: Option<&ConditionCell>,
) -> Result<Encounter, EncounterError> {
    let mut rng = stream_rng(seed, Stream::Encounter);
    let features = sample_features(&mut rng, &config.features)?;
    let enc = build_trajectories(
        &features,
        config.duration,
        config.cpa_time,
        config.dt,
        config.intruder_vertical_rate,
    )?;
    let mut enc = place_in_region(enc, &mut rng, &config.placement)?;
    enc.id = id;
    enc.seed = seed;
    enc.conditions = Some(match cell {
        Some(c) => c.sample(&mut rng),
        None => sample_conditions(&mut rng),
    });
    Ok(enc)
}

/// A batch of encounters; encounter `i` is seeded by `item_seed(master_seed, i)`.
pub fn generate_encounters(
    master_seed: u64,
    grid: ConditionGrid,
    config: &EncounterConfig,
) -> Result<Vec<Encounter>, EncounterError> {
    config.features.validate()?;
    match grid {
        ConditionGrid::Iid { count } => (0..count as u64)
            .map(|id| sample_encounter(id, item_seed(master_seed, id), config, None))
            .collect(),
        ConditionGrid::Factorial { per_cell } => {
            let cells = factorial_cells();
            let mut out = Vec::with_capacity(cells.len() * per_cell);
            for (ci, cell) in cells.iter().enumerate() {
                for j in 0..per_cell {
                    let id = (ci * per_cell + j) as u64;
                    out.push(sample_encounter(id, item_seed(master_seed, id), config, Some(cell))?);
                }
            }
            Ok(out)
        }
    }
}

/// Distribution parameters for single-frame image scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SceneConfig {
    pub small_range_shape: f64,
    pub small_range_scale: f64,
    pub small_min_range: f64,
    pub large_range_shape: f64,
    pub large_range_scale: f64,
    pub large_min_range: f64,
    pub pitch_sd: f64,
    pub pitch_limit: f64,
    pub roll_sd: f64,
    pub roll_limit: f64,
    pub horizontal_extent: f64,
    pub vertical_extent: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            small_range_shape: 2.0,
            small_range_scale: 200.0,
            small_min_range: 20.0,
            large_range_shape: 3.0,
            large_range_scale: 200.0,
            large_min_range: 50.0,
            pitch_sd: 5.0,
            pitch_limit: 30.0,
            roll_sd: 10.0,
            roll_limit: 45.0,
            horizontal_extent: 5000.0,
            vertical_extent: 1000.0,
        }
    }
}

impl SceneConfig {
    /// `(shape, scale, minimum)` of the range distribution for a type.
    pub fn range_params(&self, kind: AircraftKind) -> (f64, f64, f64) {
        match kind {
            AircraftKind::Boeing737 => (self.large_range_shape, self.large_range_scale, self.large_min_range),
            _ => (self.small_range_shape, self.small_range_scale, self.small_min_range),
        }
    }
}

/// One sampled image geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneSpec {
    pub ownship: AircraftState,
    /// Slant distance to the intruder, meters.
    pub intruder_range: f64,
    /// Horizontal image position, 0 = left edge.
    pub intruder_bearing_frac: f64,
    /// Vertical image position, 0 = bottom edge.
    pub intruder_elevation_frac: f64,
    pub intruder_heading: f64,
    pub conditions: Conditions,
}

impl SceneSpec {
    pub fn intruder_state(&self, cam: &CameraModel) -> AircraftState {
        let p = point_along_image_ray(
            cam,
            &self.ownship,
            self.intruder_bearing_frac,
            1.0 - self.intruder_elevation_frac,
            self.intruder_range,
        );
        AircraftState::level(p[0], p[1], p[2], self.intruder_heading, 0.0)
    }
}

const MAX_REJECTIONS: usize = 100_000;

/// Samples an image scene for fixed weather, region and aircraft type.
///
/// Range is gamma distributed and resampled until it exceeds the type's
/// minimum; the intruder is uniform over the image; pitch and roll are
/// clipped normals.
pub fn sample_image_scene<R: Rng + ?Sized>(
    rng: &mut R,
    config: &SceneConfig,
    conditions: Conditions,
) -> Result<SceneSpec, EncounterError> {
    let (shape, scale, min_range) = config.range_params(conditions.aircraft);
    let gamma = Gamma::new(shape, scale).map_err(|e| EncounterError::InvalidScene(e.to_string()))?;
    let pitch = Normal::new(0.0, config.pitch_sd).map_err(|e| EncounterError::InvalidScene(e.to_string()))?;
    let roll = Normal::new(0.0, config.roll_sd).map_err(|e| EncounterError::InvalidScene(e.to_string()))?;

    let mut range = gamma.sample(rng);
    let mut tries = 0;
    while range <= min_range {
        tries += 1;
        if tries > MAX_REJECTIONS {
            return Err(EncounterError::InvalidScene(format!(
                "no range above {min_range} m after {MAX_REJECTIONS} draws"
            )));
        }
        range = gamma.sample(rng);
    }

    let h = config.horizontal_extent.abs();
    let v = config.vertical_extent.abs();
    let ownship = AircraftState {
        east: if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 },
        north: if h > 0.0 { rng.gen_range(-h..=h) } else { 0.0 },
        up: if v > 0.0 { rng.gen_range(-v..=v) } else { 0.0 },
        heading: rng.gen_range(0.0..360.0),
        pitch: pitch.sample(rng).clamp(-config.pitch_limit, config.pitch_limit),
        roll: roll.sample(rng).clamp(-config.roll_limit, config.roll_limit),
        ground_speed: 0.0,
        vertical_rate: 0.0,
    };
    Ok(SceneSpec {
        ownship,
        intruder_range: range,
        intruder_bearing_frac: rng.gen_range(0.0..=1.0),
        intruder_elevation_frac: rng.gen_range(0.0..=1.0),
        intruder_heading: rng.gen_range(0.0..360.0),
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::relative_geometry;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    #[test]
    fn features_stay_in_range() {
        let ranges = FeatureRanges::default();
        let mut r = rng(1);
        let mut heading_sum = 0.0;
        for _ in 0..10_000 {
            let f = sample_features(&mut r, &ranges).unwrap();
            assert!(ranges.ownship_speed.contains(f.ownship_speed));
            assert!(ranges.intruder_speed.contains(f.intruder_speed));
            assert!(ranges.hmd.contains(f.hmd));
            assert!(ranges.vmd.contains(f.vmd));
            assert!(ranges.relative_heading.contains(f.relative_heading));
            heading_sum += f.relative_heading;
        }
        // U(100, 260): mean 180, standard error of the mean ≈ 0.46
        assert!((heading_sum / 10_000.0 - 180.0).abs() < 2.0);
    }

    #[test]
    fn features_are_deterministic() {
        let ranges = FeatureRanges::default();
        let a = sample_features(&mut rng(9), &ranges).unwrap();
        let b = sample_features(&mut rng(9), &ranges).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn inverted_range_is_rejected() {
        let mut ranges = FeatureRanges::default();
        ranges.hmd = Interval::new(10.0, 5.0);
        assert!(matches!(
            sample_features(&mut rng(1), &ranges),
            Err(EncounterError::InvalidRange { name: "hmd", .. })
        ));
    }

    #[test]
    fn head_on_kinematics() {
        let f = EncounterFeatures {
            ownship_speed: 60.0,
            intruder_speed: 60.0,
            hmd: 0.0,
            vmd: 0.0,
            relative_heading: 180.0,
        };
        let enc = build_trajectories(&f, 50.0, 40.0, 1.0, 0.0).unwrap();
        assert_eq!(enc.steps(), 51);
        let start = relative_geometry(&enc.ownship_script[0], &enc.intruder_script[0]);
        assert!((start.horizontal_range - 4800.0).abs() < 1e-9);
        let cpa = relative_geometry(&enc.ownship_script[40], &enc.intruder_script[40]);
        assert!(cpa.horizontal_range < 1e-9);
    }

    #[test]
    fn level_flight_keeps_vmd() {
        let f = EncounterFeatures {
            ownship_speed: 65.0,
            intruder_speed: 61.0,
            hmd: 40.0,
            vmd: 30.0,
            relative_heading: 150.0,
        };
        let enc = build_trajectories(&f, 50.0, 40.0, 1.0, 0.0).unwrap();
        for (o, i) in enc.ownship_script.iter().zip(&enc.intruder_script) {
            assert_eq!(i.up - o.up, 30.0);
        }
    }

    #[test]
    fn bad_timing_is_rejected() {
        let f = sample_features(&mut rng(1), &FeatureRanges::default()).unwrap();
        assert!(build_trajectories(&f, 50.0, 50.0, 1.0, 0.0).is_err());
        assert!(build_trajectories(&f, 50.0, 40.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn identity_placement_changes_nothing() {
        let f = sample_features(&mut rng(3), &FeatureRanges::default()).unwrap();
        let enc = build_trajectories(&f, 50.0, 40.0, 1.0, 0.0).unwrap();
        let cfg = PlacementConfig { rotate: false, horizontal_extent: 0.0, vertical_extent: 0.0 };
        let placed = place_in_region(enc.clone(), &mut rng(4), &cfg).unwrap();
        assert_eq!(placed.ownship_script, enc.ownship_script);
        assert_eq!(placed.intruder_script, enc.intruder_script);
        assert!(matches!(
            place_in_region(placed, &mut rng(4), &cfg),
            Err(EncounterError::AlreadyPlaced(_))
        ));
    }

    #[test]
    fn placement_offsets_within_bounds() {
        let cfg = PlacementConfig::default();
        let f = sample_features(&mut rng(3), &FeatureRanges::default()).unwrap();
        let enc = build_trajectories(&f, 50.0, 40.0, 1.0, 0.0).unwrap();
        let mut r = rng(5);
        for _ in 0..10_000 {
            let p = place_in_region(enc.clone(), &mut r, &cfg).unwrap().placement.unwrap();
            assert!(p.east.abs() <= 5000.0 && p.north.abs() <= 5000.0 && p.up.abs() <= 1000.0);
            assert!((0.0..360.0).contains(&p.rotation));
        }
    }

    #[test]
    fn factorial_grid() {
        let cells = factorial_cells();
        assert_eq!(cells.len(), 288);
        let mut sorted = cells.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 288);
        let encs = generate_encounters(7, ConditionGrid::Factorial { per_cell: 30 }, &EncounterConfig::default()).unwrap();
        assert_eq!(encs.len(), 8640);
        for e in &encs {
            let t = e.conditions.unwrap().local_time;
            assert!((8.0..=17.0).contains(&t));
        }
        // cell order is preserved: encounter 30 belongs to the second cell
        let c = encs[30].conditions.unwrap();
        assert_eq!(c.aircraft, AircraftKind::Boeing737);
        assert_eq!(c.time_window(), Some(TimeWindow::Morning));
    }

    #[test]
    fn iid_conditions_in_range() {
        let mut r = rng(11);
        for _ in 0..5000 {
            let c = sample_conditions(&mut r);
            assert!((8.0..=17.0).contains(&c.local_time));
            assert!(c.time_window().is_some());
        }
    }

    #[test]
    fn time_windows() {
        assert_eq!(TimeWindow::from_hour(9.5), Some(TimeWindow::Morning));
        assert_eq!(TimeWindow::from_hour(10.0), Some(TimeWindow::Midday));
        assert_eq!(TimeWindow::from_hour(15.0), Some(TimeWindow::LateAfternoon));
        assert_eq!(TimeWindow::from_hour(17.0), Some(TimeWindow::LateAfternoon));
        assert_eq!(TimeWindow::from_hour(7.99), None);
    }

    fn mean_range(kind: AircraftKind, n: usize) -> (f64, f64) {
        let cfg = SceneConfig::default();
        let cond = Conditions { aircraft: kind, ..Conditions::default() };
        let mut r = rng(21);
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for _ in 0..n {
            let s = sample_image_scene(&mut r, &cfg, cond).unwrap();
            sum += s.intruder_range;
            min = min.min(s.intruder_range);
        }
        (sum / n as f64, min)
    }

    #[test]
    fn scene_range_means() {
        // Gamma(2,200) mean 400, sd 283: standard error ≈ 0.9 at n = 100k.
        // Truncation at 20 m shifts the mean up by ≈ 0.1 m.
        let (m, min) = mean_range(AircraftKind::CessnaSkyhawk, 100_000);
        assert!((m - 400.0).abs() < 5.0, "{m}");
        assert!(min > 20.0);
        let (m, min) = mean_range(AircraftKind::Boeing737, 100_000);
        assert!((m - 600.0).abs() < 5.0, "{m}");
        assert!(min > 50.0);
    }

    #[test]
    fn scene_attitude_limits() {
        let cfg = SceneConfig { pitch_sd: 100.0, roll_sd: 100.0, ..SceneConfig::default() };
        let mut r = rng(2);
        for _ in 0..1000 {
            let s = sample_image_scene(&mut r, &cfg, Conditions::default()).unwrap();
            assert!(s.ownship.pitch.abs() <= 30.0 && s.ownship.roll.abs() <= 45.0);
        }
    }
}

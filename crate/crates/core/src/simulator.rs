//! Closed-loop encounter simulation: perception, policy, ownship dynamics.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cas::{advisory_command, compute_tau, query_policy, Advisory, CasState, PolicyTable, TauConfig, VerticalCommand};
use crate::encounters::{Conditions, Encounter};
use crate::geometry::{relative_geometry, AircraftState, CameraModel, GeometryError, RelativeGeometry};
use crate::metrics::is_nmac;
use crate::perception::{Perception, PerceptionConfig, PerceptionError};
use crate::rng::{stream_rng, Stream};
use crate::units::{NMAC_HORIZONTAL_M, NMAC_VERTICAL_M};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("encounter {id}: {reason}")]
    InvalidEncounter { id: u64, reason: String },
    #[error("encounter {id}, step {step}: {error}")]
    Perception { id: u64, step: usize, error: PerceptionError },
    #[error("could not start perception backend: {0}")]
    Setup(PerceptionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SimConfig {
    /// Decision interval, seconds; must match the encounter sampling.
    pub dt: f64,
    /// Maximum ownship vertical acceleration, m/s².
    pub vertical_accel_limit: f64,
    pub camera: CameraModel,
    pub tau: TauConfig,
    pub perception: PerceptionConfig,
    /// Also flag NMACs occurring between steps along straight segments.
    pub interpolate_nmac: bool,
    /// Abort a batch at the first failing encounter.
    pub fail_fast: bool,
}

/// Simulator camera: 90° wide so both aircraft stay in view through CPA.
pub const SIM_CAMERA_HFOV: f64 = 90.0;

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            vertical_accel_limit: 2.45,
            camera: CameraModel { hfov: SIM_CAMERA_HFOV, ..CameraModel::default() },
            tau: TauConfig::default(),
            perception: PerceptionConfig::default(),
            interpolate_nmac: false,
            fail_fast: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.vertical_accel_limit > 0.0 && self.vertical_accel_limit.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "vertical acceleration limit must be positive, got {}",
                self.vertical_accel_limit
            )));
        }
        if !(self.tau.tau_max > 0.0) {
            return Err(SimError::InvalidConfig(format!("tau_max must be positive, got {}", self.tau.tau_max)));
        }
        self.camera.validate()?;
        Ok(())
    }
}

/// The controller in the loop.
#[derive(Debug, Clone)]
pub enum Policy {
    Table(Arc<PolicyTable>),
    /// Never alerts.
    AlwaysCoc,
}

impl Policy {
    pub fn advise(&self, state: &CasState) -> Advisory {
        match self {
            Self::Table(t) => query_policy(t, state),
            Self::AlwaysCoc => Advisory::COC,
        }
    }
}

/// Advances the ownship one step under a vertical command.
///
/// The rate moves toward the command by at most `accel_limit * dt`
/// (toward level flight when unconstrained), altitude integrates the
/// trapezoid of old and new rates, and the horizontal track continues
/// straight along the current heading.
pub fn step_ownship(state: &AircraftState, command: VerticalCommand, dt: f64, accel_limit: f64) -> AircraftState {
    let rate = command.next_rate(state.vertical_rate, 0.0, accel_limit * dt);
    let [ve, vn, _] = state.velocity();
    AircraftState {
        east: state.east + ve * dt,
        north: state.north + vn * dt,
        up: state.up + 0.5 * (state.vertical_rate + rate) * dt,
        vertical_rate: rate,
        ..*state
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub time: f64,
    pub ownship: AircraftState,
    pub intruder: AircraftState,
    pub detected: bool,
    /// Tau fed to the policy; absent when nothing was detected.
    pub tau: Option<f64>,
    pub advisory: Advisory,
    /// Ownship vertical rate the advisory produces for the next step.
    pub commanded_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncounterResult {
    pub id: u64,
    pub seed: u64,
    pub conditions: Option<Conditions>,
    pub steps: Vec<StepRecord>,
    pub nmac: bool,
    pub min_horizontal_sep: f64,
    /// Absolute vertical separation at the step of minimum horizontal separation.
    pub min_vertical_sep_at_min_horizontal: f64,
    pub alert_steps: usize,
    pub total_steps: usize,
}

impl EncounterResult {
    pub fn alert_fraction(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.alert_steps as f64 / self.total_steps as f64
        }
    }
}

/// True if the straight segment between two relative positions (east,
/// north, up) enters the NMAC cylinder.
fn segment_nmac(a: [f64; 3], b: [f64; 3]) -> bool {
    let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    // horizontal: |a + s d|² < R² on an interval of s
    let qa = d[0] * d[0] + d[1] * d[1];
    let qb = 2.0 * (a[0] * d[0] + a[1] * d[1]);
    let qc = a[0] * a[0] + a[1] * a[1] - NMAC_HORIZONTAL_M * NMAC_HORIZONTAL_M;
    let (h0, h1) = if qa == 0.0 {
        if qc < 0.0 {
            (0.0, 1.0)
        } else {
            return false;
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc <= 0.0 {
            return false;
        }
        let r = disc.sqrt();
        ((-qb - r) / (2.0 * qa), (-qb + r) / (2.0 * qa))
    };
    let (v0, v1) = if d[2] == 0.0 {
        if a[2].abs() < NMAC_VERTICAL_M {
            (0.0, 1.0)
        } else {
            return false;
        }
    } else {
        let s0 = (-NMAC_VERTICAL_M - a[2]) / d[2];
        let s1 = (NMAC_VERTICAL_M - a[2]) / d[2];
        (s0.min(s1), s0.max(s1))
    };
    let lo = h0.max(v0).max(0.0);
    let hi = h1.min(v1).min(1.0);
    // open intervals on both predicates; touching endpoints do not count
    lo < hi || (lo == hi && lo > h0 && lo < h1 && lo > v0 && lo < v1)
}

fn relative_position(own: &AircraftState, int: &AircraftState) -> [f64; 3] {
    [int.east - own.east, int.north - own.north, int.up - own.up]
}

struct Track {
    time: f64,
    range: f64,
    intruder_up: f64,
}

/// Runs one encounter in closed loop.
pub fn run_encounter(
    encounter: &Encounter,
    perception: &mut dyn Perception,
    policy: &Policy,
    config: &SimConfig,
) -> Result<EncounterResult, SimError> {
    config.validate()?;
    let invalid = |reason: String| SimError::InvalidEncounter { id: encounter.id, reason };
    let n = encounter.steps();
    if n == 0 || encounter.intruder_script.len() != n {
        return Err(invalid(format!(
            "script lengths {} and {}",
            encounter.ownship_script.len(),
            encounter.intruder_script.len()
        )));
    }
    if (encounter.dt - config.dt).abs() > 1e-9 {
        return Err(invalid(format!("encounter dt {} differs from simulation dt {}", encounter.dt, config.dt)));
    }
    let conditions = encounter.conditions.unwrap_or_default();
    let dt = config.dt;
    let mut rng = stream_rng(encounter.seed, Stream::Perception);
    perception.begin_encounter(encounter.seed);

    let mut own = encounter.ownship_script[0];
    let mut prev = Advisory::COC;
    let mut last: Option<Track> = None;
    let mut steps = Vec::with_capacity(n);
    let mut nmac = false;
    let mut min_h = f64::INFINITY;
    let mut min_v = f64::INFINITY;
    let mut alert_steps = 0;

    for k in 0..n {
        let time = encounter.time(k);
        let int = encounter.intruder_script[k];
        let truth = relative_geometry(&own, &int);
        nmac |= is_nmac(&truth);
        if truth.horizontal_range < min_h {
            min_h = truth.horizontal_range;
            min_v = truth.vertical_offset.abs();
        }

        let estimate = perception
            .perceive(&own, &int, &conditions, &mut rng)
            .map_err(|error| SimError::Perception { id: encounter.id, step: k, error })?;
        let (advisory, tau) = match estimate {
            None => (Advisory::COC, None),
            Some(est) => {
                let intruder_up = own.up + est.rel.vertical_offset;
                let (closing, dh_int) = match &last {
                    Some(t) if time > t.time => {
                        let span = time - t.time;
                        ((t.range - est.rel.horizontal_range) / span, (intruder_up - t.intruder_up) / span)
                    }
                    _ => (0.0, 0.0),
                };
                last = Some(Track { time, range: est.rel.horizontal_range, intruder_up });
                let rel = RelativeGeometry { horizontal_closing_speed: closing, ..est.rel };
                let tau = compute_tau(&rel, &config.tau);
                let state = CasState {
                    h: est.rel.vertical_offset,
                    dh_own: own.vertical_rate,
                    dh_int,
                    tau,
                    prev_advisory: prev,
                };
                (policy.advise(&state), Some(tau))
            }
        };
        if advisory.is_alert() {
            alert_steps += 1;
        }
        prev = advisory;

        let next = step_ownship(&own, advisory_command(advisory), dt, config.vertical_accel_limit);
        steps.push(StepRecord {
            time,
            ownship: own,
            intruder: int,
            detected: estimate.is_some(),
            tau,
            advisory,
            commanded_rate: next.vertical_rate,
        });
        if k + 1 < n {
            let script = encounter.ownship_script[k + 1];
            let stepped = AircraftState { up: next.up, vertical_rate: next.vertical_rate, ..script };
            if config.interpolate_nmac && !nmac {
                let next_int = encounter.intruder_script[k + 1];
                nmac = segment_nmac(relative_position(&own, &int), relative_position(&stepped, &next_int));
            }
            own = stepped;
        }
    }

    Ok(EncounterResult {
        id: encounter.id,
        seed: encounter.seed,
        conditions: encounter.conditions,
        steps,
        nmac,
        min_horizontal_sep: min_h,
        min_vertical_sep_at_min_horizontal: min_v,
        alert_steps,
        total_steps: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EncounterFailure {
    pub id: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BatchResult {
    pub master_seed: Option<u64>,
    pub config: SimConfig,
    /// Ordered by encounter id.
    pub results: Vec<EncounterResult>,
    pub failures: Vec<EncounterFailure>,
}

/// Worker count to use when the caller asks for 0.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Runs encounters on `workers` threads, each with its own perception
/// backend from `make_perception`.
///
/// Each encounter draws from its own seeded streams, so results do not
/// depend on the worker count or scheduling.
pub fn run_batch<F>(
    encounters: &[Encounter],
    make_perception: F,
    policy: &Policy,
    config: &SimConfig,
    workers: usize,
) -> Result<BatchResult, SimError>
where
    F: Fn() -> Result<Box<dyn Perception>, PerceptionError> + Sync,
{
    config.validate()?;
    let workers = if workers == 0 { default_workers() } else { workers }.min(encounters.len()).max(1);
    let slots: Vec<Mutex<Option<Result<EncounterResult, SimError>>>> =
        encounters.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let setup_error: Mutex<Option<PerceptionError>> = Mutex::new(None);

    if !encounters.is_empty() {
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| {
                    let mut perception = match make_perception() {
                        Ok(p) => p,
                        Err(e) => {
                            setup_error.lock().unwrap().get_or_insert(e);
                            abort.store(true, Ordering::SeqCst);
                            return;
                        }
                    };
                    loop {
                        if abort.load(Ordering::SeqCst) {
                            return;
                        }
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        let Some(enc) = encounters.get(i) else { return };
                        let r = run_encounter(enc, perception.as_mut(), policy, config);
                        if r.is_err() && config.fail_fast {
                            abort.store(true, Ordering::SeqCst);
                        }
                        *slots[i].lock().unwrap() = Some(r);
                    }
                });
            }
        });
    }
    if let Some(e) = setup_error.into_inner().unwrap() {
        return Err(SimError::Setup(e));
    }

    let mut results = Vec::with_capacity(encounters.len());
    let mut failures = Vec::new();
    for (enc, slot) in encounters.iter().zip(slots) {
        match slot.into_inner().unwrap() {
            Some(Ok(r)) => results.push(r),
            Some(Err(e)) => {
                if config.fail_fast {
                    return Err(e);
                }
                log::warn!("{e}");
                failures.push(EncounterFailure { id: enc.id, message: e.to_string() });
            }
            None => {}
        }
    }
    results.sort_by_key(|r| r.id);
    failures.sort_by_key(|f| f.id);
    Ok(BatchResult { master_seed: None, config: config.clone(), results, failures })
}

/// [`run_batch`] with backends built from `config.perception`.
pub fn run_batch_configured(
    encounters: &[Encounter],
    policy: &Policy,
    config: &SimConfig,
    workers: usize,
) -> Result<BatchResult, SimError> {
    run_batch(encounters, || config.perception.build(config.camera, config.dt), policy, config, workers)
}

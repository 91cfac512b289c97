use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::{advisory_command, Advisory, CasError};
use crate::units::{FPM_TO_MPS, NMAC_VERTICAL_M, STANDARD_GRAVITY};

/// One grid axis, either evenly spaced or listed explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisConfig {
    Linspace { min: f64, max: f64, points: usize },
    Values(Vec<f64>),
}

impl AxisConfig {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Values(v) => v.clone(),
            Self::Linspace { min, max, points } => match points {
                0 => Vec::new(),
                1 => vec![*min],
                n => (0..*n).map(|i| min + (max - min) * i as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

/// Per-step rewards; penalties and costs are negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct RewardWeights {
    pub nmac_penalty: f64,
    pub alert_cost: f64,
    pub reversal_cost: f64,
    pub strengthen_cost: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { nmac_penalty: -1.0, alert_cost: -0.005, reversal_cost: -0.01, strengthen_cost: -0.008 }
    }
}

impl RewardWeights {
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            nmac_penalty: self.nmac_penalty * k,
            alert_cost: self.alert_cost * k,
            reversal_cost: self.reversal_cost * k,
            strengthen_cost: self.strengthen_cost * k,
        }
    }
}

/// Ownship response and intruder disturbance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Compliance {
    /// Ownship vertical acceleration toward the commanded rate, m/s².
    pub ownship_accel: f64,
    /// Magnitude of the intruder's random vertical acceleration, m/s².
    pub intruder_accel: f64,
    /// Probability of each of `+intruder_accel` and `-intruder_accel`.
    pub intruder_accel_prob: f64,
}

impl Default for Compliance {
    fn default() -> Self {
        Self { ownship_accel: STANDARD_GRAVITY / 4.0, intruder_accel: 1.0, intruder_accel_prob: 0.25 }
    }
}

/// Declarative MDP configuration (grids as ranges or explicit lists).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct MdpConfig {
    pub h: AxisConfig,
    pub dh_own: AxisConfig,
    pub dh_int: AxisConfig,
    pub tau: AxisConfig,
    pub advisories: Vec<Advisory>,
    pub discount: f64,
    pub rewards: RewardWeights,
    pub compliance: Compliance,
    pub nmac_vertical: f64,
    /// Decision interval: tau counts down by this much per transition.
    pub step: f64,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            h: AxisConfig::Linspace { min: -3000.0 * 0.3048, max: 3000.0 * 0.3048, points: 33 },
            dh_own: AxisConfig::Linspace { min: -3000.0 * FPM_TO_MPS, max: 3000.0 * FPM_TO_MPS, points: 9 },
            dh_int: AxisConfig::Linspace { min: -10.0, max: 10.0, points: 5 },
            tau: AxisConfig::Linspace { min: 0.0, max: 40.0, points: 41 },
            advisories: Advisory::ALL.to_vec(),
            discount: 1.0,
            rewards: RewardWeights::default(),
            compliance: Compliance::default(),
            nmac_vertical: NMAC_VERTICAL_M,
            step: 1.0,
        }
    }
}

/// Validated MDP: grids over (h, dh_own, dh_int, tau), action set and rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MdpSpec {
    pub h: Vec<f64>,
    pub dh_own: Vec<f64>,
    pub dh_int: Vec<f64>,
    pub tau: Vec<f64>,
    pub advisories: Vec<Advisory>,
    pub discount: f64,
    pub rewards: RewardWeights,
    pub compliance: Compliance,
    pub nmac_vertical: f64,
    pub step: f64,
}

pub fn build_mdp(config: &MdpConfig) -> Result<MdpSpec, CasError> {
    let spec = MdpSpec {
        h: config.h.values(),
        dh_own: config.dh_own.values(),
        dh_int: config.dh_int.values(),
        tau: config.tau.values(),
        advisories: config.advisories.clone(),
        discount: config.discount,
        rewards: config.rewards,
        compliance: config.compliance,
        nmac_vertical: config.nmac_vertical,
        step: config.step,
    };
    spec.validate()?;
    Ok(spec)
}

impl Default for MdpSpec {
    fn default() -> Self {
        build_mdp(&MdpConfig::default()).expect("default MDP config is valid")
    }
}

impl MdpSpec {
    pub fn validate(&self) -> Result<(), CasError> {
        self.grid()?;
        let bad = |msg: String| Err(CasError::InvalidSpec(msg));
        if self.tau[0] != 0.0 {
            return bad(format!("tau grid must start at 0, starts at {}", self.tau[0]));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount {} outside (0, 1]", self.discount));
        }
        let r = &self.rewards;
        if !(r.nmac_penalty < 0.0 && r.nmac_penalty.is_finite()) {
            return bad(format!("nmac penalty {} must be negative", r.nmac_penalty));
        }
        if ![r.alert_cost, r.reversal_cost, r.strengthen_cost].iter().all(|c| c.is_finite()) {
            return bad("reward weights must be finite".into());
        }
        if self.advisories.first() != Some(&Advisory::COC) {
            return bad("advisory list must start with COC".into());
        }
        let mut seen = self.advisories.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.advisories.len() {
            return bad("duplicate advisories".into());
        }
        let c = &self.compliance;
        if !(c.ownship_accel > 0.0 && c.intruder_accel >= 0.0 && (0.0..=0.5).contains(&c.intruder_accel_prob)) {
            return bad(format!("invalid compliance model {c:?}"));
        }
        if !(self.step > 0.0 && self.nmac_vertical > 0.0) {
            return bad("step and nmac_vertical must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CasError> {
        Grid::new(vec![
            ("h", self.h.clone()),
            ("dh_own", self.dh_own.clone()),
            ("dh_int", self.dh_int.clone()),
            ("tau", self.tau.clone()),
        ])
    }

    pub fn num_nodes(&self) -> usize {
        self.h.len() * self.dh_own.len() * self.dh_int.len() * self.tau.len()
    }

    pub fn num_actions(&self) -> usize {
        self.advisories.len()
    }

    /// Number of Q entries: nodes × previous advisories × actions.
    pub fn q_len(&self) -> usize {
        self.num_nodes() * self.num_actions() * self.num_actions()
    }

    pub fn advisory_index(&self, advisory: Advisory) -> Option<usize> {
        self.advisories.iter().position(|&a| a == advisory)
    }

    pub fn is_terminal(&self, tau: f64) -> bool {
        tau <= 0.0
    }

    /// Value of a terminal state: the NMAC penalty inside the vertical band.
    pub fn terminal_value(&self, h: f64) -> f64 {
        if h.abs() < self.nmac_vertical {
            self.rewards.nmac_penalty
        } else {
            0.0
        }
    }

    /// Immediate reward of taking `action` after `prev`.
    pub fn reward(&self, prev: Advisory, action: Advisory) -> f64 {
        let r = &self.rewards;
        let mut total = 0.0;
        if action.is_alert() {
            total += r.alert_cost;
        }
        if action.is_reversal_from(prev) {
            total += r.reversal_cost;
        }
        if action.is_strengthening_from(prev) {
            total += r.strengthen_cost;
        }
        total
    }

    /// Successor points `(probability, [h, dh_own, dh_int, tau])` of a
    /// non-terminal point under an action.
    pub fn successors(&self, point: [f64; 4], action: Advisory) -> impl Iterator<Item = (f64, [f64; 4])> {
        let [h, dh_own, dh_int, tau] = point;
        let dt = self.step;
        let c = self.compliance;
        let own_next = advisory_command(action).next_rate(dh_own, 0.0, c.ownship_accel * dt);
        let p = c.intruder_accel_prob;
        [(p, -c.intruder_accel), (1.0 - 2.0 * p, 0.0), (p, c.intruder_accel)]
            .into_iter()
            .filter(|(prob, _)| *prob > 0.0)
            .map(move |(prob, accel)| {
                let int_next = dh_int + accel * dt;
                let h_next = h + 0.5 * dt * ((dh_int + int_next) - (dh_own + own_next));
                (prob, [h_next, own_next, int_next, tau - dt])
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let spec = MdpSpec::default();
        assert_eq!(spec.num_nodes(), 33 * 9 * 5 * 41);
        assert_eq!(spec.q_len(), 33 * 9 * 5 * 41 * 9 * 9);
        assert!((spec.h[32] - 914.4).abs() < 1e-9);
        assert!((spec.dh_own[8] - 15.24).abs() < 1e-9);
        assert_eq!(spec.tau[40], 40.0);
    }

    #[test]
    fn zero_alert_cost_accepted() {
        let mut cfg = MdpConfig::default();
        cfg.rewards.alert_cost = 0.0;
        assert!(build_mdp(&cfg).is_ok());
    }

    #[test]
    fn descending_grid_rejected() {
        let cfg = MdpConfig { h: AxisConfig::Values(vec![100.0, 0.0, -100.0]), ..MdpConfig::default() };
        assert!(matches!(build_mdp(&cfg), Err(CasError::InvalidGrid { axis: "h", .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut cfg = MdpConfig::default();
        cfg.rewards.nmac_penalty = 0.0;
        assert!(build_mdp(&cfg).is_err());
        let cfg = MdpConfig { discount: 1.5, ..MdpConfig::default() };
        assert!(build_mdp(&cfg).is_err());
        let cfg = MdpConfig { advisories: vec![Advisory::CL1500], ..MdpConfig::default() };
        assert!(build_mdp(&cfg).is_err());
        let cfg = MdpConfig { tau: AxisConfig::Values(vec![1.0, 2.0]), ..MdpConfig::default() };
        assert!(build_mdp(&cfg).is_err());
    }

    #[test]
    fn successor_kinematics() {
        let spec = MdpSpec::default();
        let next: Vec<_> = spec.successors([0.0, 0.0, 0.0, 10.0], Advisory::CL1500).collect();
        assert_eq!(next.len(), 3);
        let total: f64 = next.iter().map(|(p, _)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let (_, mid) = next[1];
        let a = STANDARD_GRAVITY / 4.0;
        assert!((mid[1] - a).abs() < 1e-12);
        // ownship climbs a/2 meters, so the intruder drops by that much relative
        assert!((mid[0] + a / 2.0).abs() < 1e-12);
        assert_eq!(mid[3], 9.0);
    }

    #[test]
    fn rewards() {
        let spec = MdpSpec::default();
        assert_eq!(spec.reward(Advisory::COC, Advisory::COC), 0.0);
        assert_eq!(spec.reward(Advisory::COC, Advisory::CL1500), -0.005);
        assert_eq!(spec.reward(Advisory::CL1500, Advisory::DES1500), -0.005 - 0.01);
        assert_eq!(spec.reward(Advisory::CL1500, Advisory::SCL2500), -0.005 - 0.008);
        assert_eq!(spec.terminal_value(10.0), -1.0);
        assert_eq!(spec.terminal_value(30.48), 0.0);
    }
}

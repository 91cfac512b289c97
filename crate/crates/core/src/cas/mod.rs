//! Vertical collision-avoidance logic: advisory set, MDP definition,
//! offline value-iteration solver and the interpolated Q-value table.

mod grid;
mod io;
mod mdp;
mod solver;
mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RelativeGeometry;
use crate::units::{FPM_TO_MPS, NMAC_HORIZONTAL_M};

pub use grid::{Grid, Interpolant};
pub use io::{export_csv, load_table, read_table, save_table, write_table, TableIoError, TABLE_MAGIC, TABLE_VERSION};
pub use mdp::{build_mdp, AxisConfig, Compliance, MdpConfig, MdpSpec, RewardWeights};
pub use solver::{
    bellman_residual, solve_finite_mdp, value_iteration, value_iteration_with, FiniteMdp, FiniteSolution,
    SolveOptions, TabularMdp,
};
pub use table::{query_policy, PolicyTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CasError {
    #[error("invalid {axis} grid: {reason}")]
    InvalidGrid { axis: &'static str, reason: String },
    #[error("invalid MDP: {0}")]
    InvalidSpec(String),
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: u32, residual: f64 },
}

/// Advisory issued to the ownship. Declaration order is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(clippy::upper_case_acronyms)]
pub enum Advisory {
    COC,
    DNC,
    DND,
    DES1500,
    CL1500,
    SDES1500,
    SCL1500,
    SDES2500,
    SCL2500,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Up,
    Down,
}

impl Advisory {
    pub const ALL: [Advisory; 9] = [
        Self::COC,
        Self::DNC,
        Self::DND,
        Self::DES1500,
        Self::CL1500,
        Self::SDES1500,
        Self::SCL1500,
        Self::SDES2500,
        Self::SCL2500,
    ];

    pub fn is_alert(self) -> bool {
        self != Self::COC
    }

    pub fn sense(self) -> Option<Sense> {
        match self {
            Self::COC => None,
            Self::DND | Self::CL1500 | Self::SCL1500 | Self::SCL2500 => Some(Sense::Up),
            Self::DNC | Self::DES1500 | Self::SDES1500 | Self::SDES2500 => Some(Sense::Down),
        }
    }

    /// Ordinal strength within a sense; 0 for COC.
    pub fn strength(self) -> u8 {
        match self {
            Self::COC => 0,
            Self::DNC | Self::DND => 1,
            Self::DES1500 | Self::CL1500 => 2,
            Self::SDES1500 | Self::SCL1500 => 3,
            Self::SDES2500 | Self::SCL2500 => 4,
        }
    }

    /// Opposite-sense alert following an alert.
    pub fn is_reversal_from(self, prev: Advisory) -> bool {
        matches!((prev.sense(), self.sense()), (Some(a), Some(b)) if a != b)
    }

    /// Same-sense alert of greater strength following an alert.
    pub fn is_strengthening_from(self, prev: Advisory) -> bool {
        prev.is_alert() && prev.sense() == self.sense() && self.strength() > prev.strength()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::COC => "COC",
            Self::DNC => "DNC",
            Self::DND => "DND",
            Self::DES1500 => "DES1500",
            Self::CL1500 => "CL1500",
            Self::SDES1500 => "SDES1500",
            Self::SCL1500 => "SCL1500",
            Self::SDES2500 => "SDES2500",
            Self::SCL2500 => "SCL2500",
        }
    }
}

impl fmt::Display for Advisory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Advisory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown advisory {s:?}"))
    }
}

/// What an advisory demands of the ownship vertical rate (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VerticalCommand {
    Unconstrained,
    AtMost(f64),
    AtLeast(f64),
    Target(f64),
}

impl VerticalCommand {
    /// Rate after one step of at most `max_change`. Unconstrained flight
    /// relaxes toward `nominal_rate`.
    pub fn next_rate(self, rate: f64, nominal_rate: f64, max_change: f64) -> f64 {
        let toward = |target: f64| rate + (target - rate).clamp(-max_change, max_change);
        match self {
            Self::Unconstrained => toward(nominal_rate),
            Self::AtMost(bound) if rate > bound => toward(bound),
            Self::AtLeast(bound) if rate < bound => toward(bound),
            Self::AtMost(_) | Self::AtLeast(_) => rate,
            Self::Target(target) => toward(target),
        }
    }
}

pub const RATE_1500_FPM: f64 = 1500.0 * FPM_TO_MPS;
pub const RATE_2500_FPM: f64 = 2500.0 * FPM_TO_MPS;

pub fn advisory_command(advisory: Advisory) -> VerticalCommand {
    match advisory {
        Advisory::COC => VerticalCommand::Unconstrained,
        Advisory::DNC => VerticalCommand::AtMost(0.0),
        Advisory::DND => VerticalCommand::AtLeast(0.0),
        Advisory::DES1500 | Advisory::SDES1500 => VerticalCommand::Target(-RATE_1500_FPM),
        Advisory::CL1500 | Advisory::SCL1500 => VerticalCommand::Target(RATE_1500_FPM),
        Advisory::SDES2500 => VerticalCommand::Target(-RATE_2500_FPM),
        Advisory::SCL2500 => VerticalCommand::Target(RATE_2500_FPM),
    }
}

/// Continuous state seen by the controller plus the previous advisory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CasState {
    /// Intruder altitude minus ownship altitude, meters.
    pub h: f64,
    pub dh_own: f64,
    pub dh_int: f64,
    /// Seconds until horizontal separation drops below the NMAC radius.
    pub tau: f64,
    pub prev_advisory: Advisory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TauConfig {
    pub horizontal_radius: f64,
    pub tau_max: f64,
    /// Closing speeds at or below this count as diverging.
    pub min_closing_speed: f64,
}

impl Default for TauConfig {
    fn default() -> Self {
        Self { horizontal_radius: NMAC_HORIZONTAL_M, tau_max: 40.0, min_closing_speed: 1e-6 }
    }
}

/// Time to horizontal conflict from range and closing speed.
pub fn compute_tau(rel: &RelativeGeometry, config: &TauConfig) -> f64 {
    if rel.horizontal_range <= config.horizontal_radius {
        return 0.0;
    }
    if rel.horizontal_closing_speed <= config.min_closing_speed {
        return config.tau_max;
    }
    ((rel.horizontal_range - config.horizontal_radius) / rel.horizontal_closing_speed).min(config.tau_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(range: f64, closing: f64) -> RelativeGeometry {
        RelativeGeometry {
            horizontal_range: range,
            vertical_offset: 0.0,
            bearing: 0.0,
            elevation: 0.0,
            horizontal_closing_speed: closing,
        }
    }

    #[test]
    fn tau_cases() {
        let cfg = TauConfig::default();
        assert!((compute_tau(&rel(452.4, 100.0), &cfg) - 3.0).abs() < 1e-12);
        assert_eq!(compute_tau(&rel(100.0, 100.0), &cfg), 0.0);
        assert_eq!(compute_tau(&rel(1000.0, 0.0), &cfg), 40.0);
        assert_eq!(compute_tau(&rel(1000.0, -5.0), &cfg), 40.0);
        assert_eq!(compute_tau(&rel(1e6, 1.0), &cfg), 40.0);
    }

    #[test]
    fn commands() {
        assert_eq!(advisory_command(Advisory::COC), VerticalCommand::Unconstrained);
        assert_eq!(advisory_command(Advisory::CL1500), VerticalCommand::Target(RATE_1500_FPM));
        assert_eq!(advisory_command(Advisory::SDES2500), VerticalCommand::Target(-RATE_2500_FPM));
        assert!((RATE_1500_FPM - 7.62).abs() < 1e-12 && (RATE_2500_FPM - 12.7).abs() < 1e-12);
        let dnc = advisory_command(Advisory::DNC);
        assert_eq!(dnc.next_rate(-3.0, 0.0, 2.45), -3.0);
        assert!((dnc.next_rate(3.0, 0.0, 2.45) - 0.55).abs() < 1e-12);
        assert_eq!(VerticalCommand::Target(7.62).next_rate(0.0, 0.0, 2.45), 2.45);
        assert_eq!(VerticalCommand::Target(7.62).next_rate(7.62, 0.0, 2.45), 7.62);
        assert_eq!(VerticalCommand::Unconstrained.next_rate(-1.0, 0.0, 2.45), 0.0);
    }

    #[test]
    fn advisory_relations() {
        assert!(Advisory::DES1500.is_reversal_from(Advisory::CL1500));
        assert!(!Advisory::DES1500.is_reversal_from(Advisory::COC));
        assert!(Advisory::SCL2500.is_strengthening_from(Advisory::CL1500));
        assert!(!Advisory::CL1500.is_strengthening_from(Advisory::COC));
        assert!(!Advisory::CL1500.is_strengthening_from(Advisory::SCL2500));
        assert_eq!(Advisory::ALL.iter().filter(|a| !a.is_alert()).count(), 1);
        assert_eq!("scl2500".parse::<Advisory>(), Ok(Advisory::SCL2500));
    }
}

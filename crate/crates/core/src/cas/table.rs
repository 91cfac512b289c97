use super::grid::Grid;
use super::mdp::MdpSpec;
use super::{Advisory, CasError, CasState};

/// Solved Q values on the MDP grid.
///
/// `q` is row-major: grid node (h, dh_own, dh_int, tau with tau fastest),
/// then previous advisory, then action.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub spec: MdpSpec,
    pub q: Vec<f32>,
    pub iterations: u32,
    pub residual: f64,
    grid: Grid,
}

impl PolicyTable {
    pub fn new(spec: MdpSpec, q: Vec<f32>, iterations: u32, residual: f64) -> Result<Self, CasError> {
        spec.validate()?;
        if q.len() != spec.q_len() {
            return Err(CasError::InvalidSpec(format!(
                "Q array has {} entries, expected {}",
                q.len(),
                spec.q_len()
            )));
        }
        let grid = spec.grid()?;
        Ok(Self { spec, q, iterations, residual, grid })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn num_actions(&self) -> usize {
        self.spec.advisories.len()
    }

    /// Stored Q values of all actions at a node for a previous advisory index.
    pub fn q_row(&self, node: usize, prev: usize) -> &[f32] {
        let na = self.num_actions();
        let start = (node * na + prev) * na;
        &self.q[start..start + na]
    }

    /// Interpolated Q of every action at a state.
    pub fn q_values(&self, state: &CasState) -> Vec<f64> {
        let na = self.num_actions();
        let prev = self.spec.advisory_index(state.prev_advisory).unwrap_or(0);
        let stencil = self.grid.interpolant(&[state.h, state.dh_own, state.dh_int, state.tau]);
        let mut out = vec![0.0; na];
        for (node, w) in stencil.iter() {
            for (slot, &q) in out.iter_mut().zip(self.q_row(node, prev)) {
                *slot += w * f64::from(q);
            }
        }
        out
    }

    /// Greedy advisory given a Q row; first maximum in advisory order wins.
    pub fn argmax(&self, q: &[f64]) -> Advisory {
        let mut best = 0;
        for (i, &v) in q.iter().enumerate().skip(1) {
            if v > q[best] {
                best = i;
            }
        }
        self.spec.advisories[best]
    }

    /// Number of (node, prev) pairs whose greedy action is an alert.
    pub fn alerting_count(&self) -> usize {
        let na = self.num_actions();
        self.q
            .chunks(na)
            .filter(|row| {
                let row: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
                self.argmax(&row).is_alert()
            })
            .count()
    }
}

/// Greedy advisory at a state, interpolating Q over the continuous
/// dimensions (clamped to the grid) with the previous advisory exact.
pub fn query_policy(table: &PolicyTable, state: &CasState) -> Advisory {
    table.argmax(&table.q_values(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cas::mdp::{build_mdp, AxisConfig, MdpConfig};

    fn toy_table() -> PolicyTable {
        let spec = build_mdp(&MdpConfig {
            h: AxisConfig::Values(vec![-100.0, 0.0, 100.0]),
            dh_own: AxisConfig::Values(vec![0.0]),
            dh_int: AxisConfig::Values(vec![0.0]),
            tau: AxisConfig::Values(vec![0.0, 1.0]),
            advisories: vec![Advisory::COC, Advisory::CL1500],
            ..MdpConfig::default()
        })
        .unwrap();
        // node order: (h0,t0) (h0,t1) (h1,t0) (h1,t1) (h2,t0) (h2,t1); 2 prev × 2 actions each
        let mut q = Vec::new();
        for node in 0..6 {
            for _prev in 0..2 {
                let n = node as f32;
                q.extend_from_slice(&[n, 5.0 - n]);
            }
        }
        PolicyTable::new(spec, q, 1, 0.0).unwrap()
    }

    fn state(h: f64, tau: f64) -> CasState {
        CasState { h, dh_own: 0.0, dh_int: 0.0, tau, prev_advisory: Advisory::COC }
    }

    #[test]
    fn node_queries_match_stored_rows() {
        let t = toy_table();
        assert_eq!(query_policy(&t, &state(-100.0, 0.0)), Advisory::CL1500);
        assert_eq!(query_policy(&t, &state(100.0, 1.0)), Advisory::COC);
        assert_eq!(t.q_values(&state(0.0, 1.0)), vec![3.0, 2.0]);
    }

    #[test]
    fn midpoint_is_average() {
        let t = toy_table();
        let q = t.q_values(&state(-50.0, 0.0));
        assert_eq!(q, vec![1.0, 4.0]);
    }

    #[test]
    fn ties_prefer_coc() {
        let t = toy_table();
        // node 2 and 3 give (2,3) and (3,2); halfway along tau both are 2.5
        assert_eq!(t.q_values(&state(0.0, 0.5)), vec![2.5, 2.5]);
        assert_eq!(query_policy(&t, &state(0.0, 0.5)), Advisory::COC);
    }

    #[test]
    fn out_of_grid_states_clamp() {
        let t = toy_table();
        assert_eq!(t.q_values(&state(-1e6, -3.0)), t.q_values(&state(-100.0, 0.0)));
    }

    #[test]
    fn wrong_q_length_rejected() {
        let t = toy_table();
        assert!(PolicyTable::new(t.spec.clone(), vec![0.0; 3], 0, 0.0).is_err());
    }
}

//! Value iteration: a generic tabular solver and the structured solver for
//! the collision-avoidance MDP.
//!
//! The structured solver exploits that a transition's successor depends on
//! the action but not on the previous advisory: with
//! `E(node, a) = Σ p · V(successor, prev = a)` every Q entry is
//! `R(prev, a) + γ·E(node, a)`, so one sweep costs nodes × actions
//! interpolations instead of nodes × actions².

use rayon::prelude::*;

use super::grid::Grid;
use super::mdp::MdpSpec;
use super::table::PolicyTable;
use super::CasError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-6, max_iterations: 1000 }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<(), CasError> {
        if self.tolerance > 0.0 && self.tolerance.is_finite() {
            Ok(())
        } else {
            Err(CasError::InvalidTolerance(self.tolerance))
        }
    }
}

/// A finite MDP with dense state and action indices.
pub trait FiniteMdp: Sync {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn discount(&self) -> f64;
    /// `Some(value)` for absorbing terminal states.
    fn terminal_value(&self, state: usize) -> Option<f64>;
    fn reward(&self, state: usize, action: usize) -> f64;
    /// Calls `f(next_state, probability)` for each successor.
    fn successors(&self, state: usize, action: usize, f: &mut dyn FnMut(usize, f64));
}

/// Explicitly enumerated MDP, mostly for tests and small models.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub terminal: Vec<Option<f64>>,
    /// Indexed `state * num_actions + action`.
    pub rewards: Vec<f64>,
    /// Indexed `state * num_actions + action`; `(next_state, probability)`.
    pub transitions: Vec<Vec<(usize, f64)>>,
}

impl FiniteMdp for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn discount(&self) -> f64 {
        self.discount
    }
    fn terminal_value(&self, state: usize) -> Option<f64> {
        self.terminal[state]
    }
    fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.num_actions + action]
    }
    fn successors(&self, state: usize, action: usize, f: &mut dyn FnMut(usize, f64)) {
        for &(next, p) in &self.transitions[state * self.num_actions + action] {
            f(next, p);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSolution {
    /// Indexed `state * num_actions + action`.
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: u32,
    pub residual: f64,
}

fn max_of(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Jacobi value iteration from `Q = 0` until the largest Q change in a
/// sweep is at most the tolerance.
pub fn solve_finite_mdp<M: FiniteMdp>(mdp: &M, options: &SolveOptions) -> Result<FiniteSolution, CasError> {
    options.validate()?;
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.discount();
    let mut q = vec![0.0; ns * na];
    let mut values = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for iteration in 1..=options.max_iterations {
        let next: Vec<f64> = (0..ns)
            .into_par_iter()
            .flat_map_iter(|s| {
                let values = &values;
                (0..na).map(move |a| match mdp.terminal_value(s) {
                    Some(v) => v,
                    None => {
                        let mut expected = 0.0;
                        mdp.successors(s, a, &mut |n, p| expected += p * values[n]);
                        mdp.reward(s, a) + gamma * expected
                    }
                })
            })
            .collect();
        residual = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        for (s, v) in values.iter_mut().enumerate() {
            *v = max_of(&q[s * na..(s + 1) * na]);
        }
        if residual <= options.tolerance {
            return Ok(FiniteSolution { q, values, iterations: iteration, residual });
        }
    }
    Err(CasError::NotConverged { iterations: options.max_iterations, residual })
}

/// Precomputed pieces of the collision-avoidance MDP.
pub(crate) struct CasModel<'a> {
    pub spec: &'a MdpSpec,
    pub grid: Grid,
    /// `prev * A + action`.
    pub rewards: Vec<f64>,
    /// Per node: terminal value if the node is terminal.
    pub terminal: Vec<Option<f64>>,
}

impl<'a> CasModel<'a> {
    pub fn new(spec: &'a MdpSpec) -> Result<Self, CasError> {
        spec.validate()?;
        let grid = spec.grid()?;
        let advs = &spec.advisories;
        let rewards = advs.iter().flat_map(|&p| advs.iter().map(move |&a| spec.reward(p, a))).collect();
        let terminal = (0..grid.len())
            .map(|n| {
                let [h, _, _, tau] = grid.point(n);
                spec.is_terminal(tau).then(|| spec.terminal_value(h))
            })
            .collect();
        Ok(Self { spec, grid, rewards, terminal })
    }

    pub fn num_actions(&self) -> usize {
        self.spec.advisories.len()
    }

    /// `Σ_noise p · Σ_corner w · values[corner * A + action]` for a non-terminal node.
    pub fn expected_next(&self, node: usize, action: usize, values: &[f64]) -> f64 {
        let na = self.num_actions();
        let point = self.grid.point(node);
        let mut total = 0.0;
        for (p, next) in self.spec.successors(point, self.spec.advisories[action]) {
            let stencil = self.grid.interpolant(&next);
            let v: f64 = stencil.iter().map(|(n, w)| w * values[n * na + action]).sum();
            total += p * v;
        }
        total
    }

    /// Per-(node, prev) state values given per-(node, action) expectations.
    fn values_from_expectations(&self, expected: &[f64], out: &mut [f64]) {
        let na = self.num_actions();
        let gamma = self.spec.discount;
        out.par_chunks_mut(na).enumerate().for_each(|(node, row)| match self.terminal[node] {
            Some(v) => row.fill(v),
            None => {
                let e = &expected[node * na..(node + 1) * na];
                for (prev, slot) in row.iter_mut().enumerate() {
                    let r = &self.rewards[prev * na..(prev + 1) * na];
                    *slot = r.iter().zip(e).map(|(r, e)| r + gamma * e).fold(f64::NEG_INFINITY, f64::max);
                }
            }
        });
    }
}

impl FiniteMdp for CasModel<'_> {
    fn num_states(&self) -> usize {
        self.grid.len() * self.num_actions()
    }
    fn num_actions(&self) -> usize {
        self.spec.advisories.len()
    }
    fn discount(&self) -> f64 {
        self.spec.discount
    }
    fn terminal_value(&self, state: usize) -> Option<f64> {
        self.terminal[state / self.num_actions()]
    }
    fn reward(&self, state: usize, action: usize) -> f64 {
        let na = self.num_actions();
        self.rewards[(state % na) * na + action]
    }
    fn successors(&self, state: usize, action: usize, f: &mut dyn FnMut(usize, f64)) {
        let na = self.num_actions();
        let point = self.grid.point(state / na);
        for (p, next) in self.spec.successors(point, self.spec.advisories[action]) {
            for (n, w) in self.grid.interpolant(&next).iter() {
                f(n * na + action, p * w);
            }
        }
    }
}

/// Solves the collision-avoidance MDP with the default iteration cap.
pub fn value_iteration(spec: &MdpSpec, tolerance: f64) -> Result<PolicyTable, CasError> {
    value_iteration_with(spec, &SolveOptions { tolerance, ..SolveOptions::default() })
}

pub fn value_iteration_with(spec: &MdpSpec, options: &SolveOptions) -> Result<PolicyTable, CasError> {
    options.validate()?;
    let model = CasModel::new(spec)?;
    let na = model.num_actions();
    let nodes = model.grid.len();
    let gamma = spec.discount;

    // Start from Q = R (E = 0); terminal nodes are fixed at their value.
    let mut expected = vec![0.0; nodes * na];
    let mut next = vec![0.0; nodes * na];
    let mut values = vec![0.0; nodes * na];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        model.values_from_expectations(&expected, &mut values);
        next.par_chunks_mut(na).enumerate().for_each(|(node, row)| {
            if model.terminal[node].is_some() {
                row.fill(0.0);
            } else {
                for (a, slot) in row.iter_mut().enumerate() {
                    *slot = model.expected_next(node, a, &values);
                }
            }
        });
        residual = gamma
            * next
                .par_iter()
                .zip(expected.par_iter())
                .map(|(a, b)| (a - b).abs())
                .reduce(|| 0.0, f64::max);
        std::mem::swap(&mut expected, &mut next);
        log::debug!("value iteration sweep {iterations}: residual {residual:e}");
        if residual <= options.tolerance {
            break;
        }
    }
    if residual > options.tolerance {
        return Err(CasError::NotConverged { iterations, residual });
    }

    let mut q = vec![0f32; nodes * na * na];
    q.par_chunks_mut(na * na).enumerate().for_each(|(node, block)| {
        for prev in 0..na {
            for a in 0..na {
                block[prev * na + a] = match model.terminal[node] {
                    Some(v) => v as f32,
                    None => (model.rewards[prev * na + a] + gamma * expected[node * na + a]) as f32,
                };
            }
        }
    });
    PolicyTable::new(spec.clone(), q, iterations, residual)
}

/// Largest change a fresh Bellman backup would make to the stored Q values.
pub fn bellman_residual(table: &PolicyTable) -> f64 {
    let model = CasModel::new(&table.spec).expect("table spec was validated on construction");
    let na = model.num_actions();
    let gamma = table.spec.discount;
    let values: Vec<f64> = table
        .q
        .chunks(na)
        .map(|row| row.iter().map(|&v| f64::from(v)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    (0..model.grid.len())
        .into_par_iter()
        .map(|node| {
            let mut worst: f64 = 0.0;
            for a in 0..na {
                let backed = match model.terminal[node] {
                    Some(_) => None,
                    None => Some(gamma * model.expected_next(node, a, &values)),
                };
                for prev in 0..na {
                    let fresh = match (model.terminal[node], backed) {
                        (Some(v), _) => v,
                        (None, Some(e)) => model.rewards[prev * na + a] + e,
                        (None, None) => unreachable!(),
                    };
                    let stored = f64::from(table.q[(node * na + prev) * na + a]);
                    worst = worst.max((fresh - stored).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cas::mdp::{build_mdp, AxisConfig, MdpConfig};

    /// Two-state chain: "go" reaches the absorbing goal with probability
    /// `p`, otherwise stays; "wait" always stays. Every step costs 1.
    fn chain(p: f64, discount: f64) -> TabularMdp {
        TabularMdp {
            num_states: 2,
            num_actions: 2,
            discount,
            terminal: vec![None, Some(0.0)],
            rewards: vec![-1.0, -1.0, 0.0, 0.0],
            transitions: vec![vec![(1, p), (0, 1.0 - p)], vec![(0, 1.0)], vec![], vec![]],
        }
    }

    #[test]
    fn chain_matches_geometric_series() {
        let sol = solve_finite_mdp(&chain(0.5, 0.9), &SolveOptions { tolerance: 1e-13, max_iterations: 10_000 })
            .unwrap();
        // V = -1 / (1 - 0.9 · 0.5)
        let closed = -1.0 / (1.0 - 0.9 * 0.5);
        assert!((sol.values[0] - closed).abs() < 1e-9, "{}", sol.values[0]);
        assert_eq!(sol.values[1], 0.0);
    }

    #[test]
    fn rejects_bad_tolerance_and_reports_non_convergence() {
        assert_eq!(
            solve_finite_mdp(&chain(0.5, 0.9), &SolveOptions { tolerance: 0.0, max_iterations: 10 }),
            Err(CasError::InvalidTolerance(0.0))
        );
        let err = solve_finite_mdp(&chain(0.5, 0.999), &SolveOptions { tolerance: 1e-12, max_iterations: 5 });
        assert!(matches!(err, Err(CasError::NotConverged { iterations: 5, .. })));
    }

    fn small_spec() -> MdpSpec {
        build_mdp(&MdpConfig {
            h: AxisConfig::Linspace { min: -200.0, max: 200.0, points: 9 },
            dh_own: AxisConfig::Linspace { min: -12.7, max: 12.7, points: 5 },
            dh_int: AxisConfig::Linspace { min: -5.0, max: 5.0, points: 3 },
            tau: AxisConfig::Linspace { min: 0.0, max: 12.0, points: 13 },
            ..MdpConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn structured_solver_matches_generic_solver() {
        let spec = small_spec();
        let table = value_iteration(&spec, 1e-10).unwrap();
        let model = CasModel::new(&spec).unwrap();
        let generic = solve_finite_mdp(&model, &SolveOptions { tolerance: 1e-12, max_iterations: 500 }).unwrap();
        for (fast, slow) in table.q.iter().zip(&generic.q) {
            assert!((f64::from(*fast) - slow).abs() < 1e-6, "{fast} vs {slow}");
        }
    }

    #[test]
    fn converged_table_is_bellman_consistent() {
        let table = value_iteration(&small_spec(), 1e-8).unwrap();
        assert!(table.residual <= 1e-8);
        // f32 storage rounds each entry by at most ~6e-8 relative
        assert!(bellman_residual(&table) < 1e-6);
    }

    #[test]
    fn finite_horizon_converges_in_horizon_sweeps() {
        let table = value_iteration(&small_spec(), 1e-9).unwrap();
        // one sweep per tau layer, plus one confirming sweep
        assert!(table.iterations <= 14, "{}", table.iterations);
    }
}

//! Value iteration for the state-dependent optimum.
//!
//! With state `(x, y)` the optimal discounted waiting cost satisfies
//!
//! ```text
//! V(x, y) = lambda + min( gamma E[V(Z1, Z2 + y)] + y,
//!                         gamma E[V(Z1 + x, Z2)] + x )
//! ```
//!
//! where `Z1 ~ Poisson(lambda1)` and `Z2 ~ Poisson(lambda2)` are the arrivals
//! of one period. The grid is truncated at `xmax` in both coordinates and
//! transitions past the edge are clamped onto it.
//!
//! The first expectation depends on `y` only and the second on `x` only, so a
//! sweep tabulates two vectors of length `xmax + 1` and then fills the grid
//! with a pointwise minimum.

mod persist;

pub use persist::{cache_file_name, load_or_solve, load_table, save_table, FORMAT_NAME, FORMAT_VERSION};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{poisson_pmf, Action, ModelParams, QueueState, TruncatedPmf, DEFAULT_TAIL_CUTOFF};
use crate::par::{self, Execution};

pub const DEFAULT_MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub xmax: usize,
    /// Target distance to the fixed point of the truncated problem.
    pub epsilon: f64,
    pub tail_cutoff: f64,
    pub max_sweeps: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl SolverConfig {
    /// Defaults used for the published table: a 40-wide grid for
    /// `gamma <= 0.8` and 80 above, scaled by the larger arrival rate;
    /// `epsilon` of 1e-3 and 1e-2 respectively.
    pub fn for_params(params: &ModelParams) -> Self {
        let long_horizon = params.gamma() > 0.8;
        let base = if long_horizon { 80 } else { 40 };
        let scale = params.lambda2().ceil().max(1.0) as usize;
        SolverConfig {
            xmax: base * scale,
            epsilon: if long_horizon { 1e-2 } else { 1e-3 },
            tail_cutoff: DEFAULT_TAIL_CUTOFF,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            execution: Execution::default(),
        }
    }

    pub fn with_xmax(mut self, xmax: usize) -> Self {
        self.xmax = xmax;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let min_xmax = (5.0 * params.lambda2()).ceil() as usize;
        if self.xmax < min_xmax {
            return Err(Error::param(
                "xmax",
                format!("must be at least 5 * max(lambda1, lambda2) = {min_xmax}, got {}", self.xmax),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if !(self.tail_cutoff > 0.0 && self.tail_cutoff < 1.0) {
            return Err(Error::param(
                "tail_cutoff",
                format!("must lie in (0, 1), got {}", self.tail_cutoff),
            ));
        }
        if self.max_sweeps == 0 {
            return Err(Error::param("max_sweeps", "must be at least 1"));
        }
        Ok(())
    }

    /// Sup-norm change below which the iterate is within `epsilon` of the
    /// fixed point.
    pub fn stopping_delta(&self, gamma: f64) -> f64 {
        self.epsilon * (1.0 - gamma) / (2.0 * gamma)
    }
}

/// Arrival pmfs of both queues for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct PmfPair {
    pub q1: TruncatedPmf,
    pub q2: TruncatedPmf,
}

impl PmfPair {
    pub fn new(params: &ModelParams, tail_cutoff: f64) -> Result<Self> {
        Ok(PmfPair {
            q1: poisson_pmf(params.lambda1(), tail_cutoff)?,
            q2: poisson_pmf(params.lambda2(), tail_cutoff)?,
        })
    }
}

/// Result of applying the Bellman operator once.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub values: Vec<f64>,
    pub sup_delta: f64,
    /// Value of serving Q1, indexed by `y`.
    pub serve_q1: Vec<f64>,
    /// Value of serving Q2, indexed by `x`.
    pub serve_q2: Vec<f64>,
}

impl Sweep {
    /// Greedy action grid of this sweep, ties to Q1.
    pub fn actions(&self) -> Vec<Action> {
        greedy_actions(&self.serve_q1, &self.serve_q2)
    }
}

fn greedy_actions(serve_q1: &[f64], serve_q2: &[f64]) -> Vec<Action> {
    let mut actions = Vec::with_capacity(serve_q1.len() * serve_q2.len());
    for &q2 in serve_q2 {
        for &q1 in serve_q1 {
            actions.push(if q1 <= q2 { Action::ServeQ1 } else { Action::ServeQ2 });
        }
    }
    actions
}

/// Expected continuation values `E[V(Z1, Z2 + y)]` (serve Q1) indexed by
/// `y`, and `E[V(Z1 + x, Z2)]` (serve Q2) indexed by `x`.
fn continuation(values: &[f64], xmax: usize, pmfs: &PmfPair, exec: Execution) -> (Vec<f64>, Vec<f64>) {
    let n = xmax + 1;
    let at = |x: usize, y: usize| values[x.min(xmax) * n + y.min(xmax)];
    let p1 = &pmfs.q1.probs;
    let p2 = &pmfs.q2.probs;
    let serve_q1 = par::map_indexed(exec, n, |y| {
        let mut acc = 0.0;
        for (z1, &a) in p1.iter().enumerate() {
            let mut inner = 0.0;
            for (z2, &b) in p2.iter().enumerate() {
                inner += b * at(z1, z2 + y);
            }
            acc += a * inner;
        }
        acc
    });
    let serve_q2 = par::map_indexed(exec, n, |x| {
        let mut acc = 0.0;
        for (z1, &a) in p1.iter().enumerate() {
            let mut inner = 0.0;
            for (z2, &b) in p2.iter().enumerate() {
                inner += b * at(z1 + x, z2);
            }
            acc += a * inner;
        }
        acc
    });
    (serve_q1, serve_q2)
}

/// Action values `gamma E[...] + carried` for serving Q1 (by `y`) and Q2
/// (by `x`).
fn action_values(params: &ModelParams, values: &[f64], xmax: usize, pmfs: &PmfPair, exec: Execution) -> (Vec<f64>, Vec<f64>) {
    let g = params.gamma();
    let (e1, e2) = continuation(values, xmax, pmfs, exec);
    let q1 = e1.iter().enumerate().map(|(y, e)| g * e + y as f64).collect();
    let q2 = e2.iter().enumerate().map(|(x, e)| g * e + x as f64).collect();
    (q1, q2)
}

/// One application of the Bellman operator to the row-major grid `values`
/// (`values[x * (xmax + 1) + y]`). Ties go to serving Q1.
pub fn bellman_sweep(
    params: &ModelParams,
    xmax: usize,
    values: &[f64],
    pmfs: &PmfPair,
    exec: Execution,
) -> Sweep {
    let n = xmax + 1;
    assert_eq!(values.len(), n * n, "grid does not match xmax");
    let lam = params.lambda_bar();
    let (q1, q2) = action_values(params, values, xmax, pmfs, exec);

    let mut next = vec![0.0; n * n];
    let row_deltas = par::for_each_row(exec, &mut next, n, |x, row| {
        let old = &values[x * n..(x + 1) * n];
        let mut delta = 0.0f64;
        for y in 0..n {
            row[y] = lam + q1[y].min(q2[x]);
            delta = delta.max((row[y] - old[y]).abs());
        }
        delta
    });
    Sweep {
        values: next,
        sup_delta: row_deltas.into_iter().fold(0.0, f64::max),
        serve_q1: q1,
        serve_q2: q2,
    }
}

/// Solved value grid with the greedy actions of the final sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    params: ModelParams,
    config: SolverConfig,
    values: Vec<f64>,
    actions: Vec<Action>,
    iterations: usize,
    sup_delta: f64,
    delta_log: Vec<f64>,
}

impl ValueTable {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn xmax(&self) -> usize {
        self.config.xmax
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.values[x * (self.xmax() + 1) + y]
    }

    pub fn action(&self, x: usize, y: usize) -> Action {
        self.actions[x * (self.xmax() + 1) + y]
    }

    /// Row-major values, `x` major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn sup_delta(&self) -> f64 {
        self.sup_delta
    }

    /// Sup-norm change of every sweep, in order. Empty for tables loaded
    /// from disk.
    pub fn delta_log(&self) -> &[f64] {
        &self.delta_log
    }

    pub fn opt_cost(&self) -> Result<f64> {
        opt_cost(self)
    }

    pub(crate) fn from_parts(
        params: ModelParams,
        config: SolverConfig,
        values: Vec<f64>,
        actions: Vec<Action>,
        iterations: usize,
        sup_delta: f64,
    ) -> Self {
        ValueTable {
            params,
            config,
            values,
            actions,
            iterations,
            sup_delta,
            delta_log: Vec::new(),
        }
    }
}

/// Value iteration from `V = 0` until the sup-norm change drops to
/// `epsilon (1 - gamma) / (2 gamma)`.
pub fn solve(params: &ModelParams, config: &SolverConfig) -> Result<ValueTable> {
    config.validate(params)?;
    let pmfs = PmfPair::new(params, config.tail_cutoff)?;
    let n = config.xmax + 1;
    let target = config.stopping_delta(params.gamma());

    let mut values = vec![0.0; n * n];
    let mut delta_log = Vec::new();
    for sweep_no in 1..=config.max_sweeps {
        let sweep = bellman_sweep(params, config.xmax, &values, &pmfs, config.execution);
        delta_log.push(sweep.sup_delta);
        if sweep.sup_delta <= target {
            let actions = sweep.actions();
            return Ok(ValueTable {
                params: *params,
                config: *config,
                values: sweep.values,
                actions,
                iterations: sweep_no,
                sup_delta: sweep.sup_delta,
                delta_log,
            });
        }
        values = sweep.values;
    }
    Err(Error::NoConvergence {
        iterations: config.max_sweeps,
        last_delta: delta_log.last().copied().unwrap_or(f64::NAN),
    })
}

/// Greedy actions for a grid of values, used to drive the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMap {
    xmax: usize,
    actions: Vec<Action>,
}

impl ActionMap {
    pub fn new(xmax: usize, actions: Vec<Action>) -> Result<Self> {
        if actions.len() != (xmax + 1) * (xmax + 1) {
            return Err(Error::param("actions", "grid size does not match xmax"));
        }
        Ok(ActionMap { xmax, actions })
    }

    pub fn xmax(&self) -> usize {
        self.xmax
    }

    /// Action at `(x, y)`, clamping onto the grid. The flag reports whether
    /// clamping happened.
    pub fn get(&self, x: u64, y: u64) -> (Action, bool) {
        let cap = self.xmax as u64;
        let clamped = x > cap || y > cap;
        let (cx, cy) = (x.min(cap) as usize, y.min(cap) as usize);
        (self.actions[cx * (self.xmax + 1) + cy], clamped)
    }
}

/// Serve Q1 when `gamma E[V(Z1, Z2 + y)] + y <= gamma E[V(Z1 + x, Z2)] + x`,
/// evaluated on the table's final values.
pub fn extract_policy(table: &ValueTable) -> Result<ActionMap> {
    let pmfs = PmfPair::new(&table.params, table.config.tail_cutoff)?;
    let xmax = table.xmax();
    let (q1, q2) = action_values(&table.params, &table.values, xmax, &pmfs, table.config.execution);
    ActionMap::new(xmax, greedy_actions(&q1, &q2))
}

/// Big-M initial state on a grid: `(xmax, round(lambda2))`.
pub fn big_m_state(params: &ModelParams, xmax: usize) -> QueueState {
    QueueState::new(xmax as u64, params.lambda2().round() as u64)
}

/// Whether `lambda2` had to be rounded to place the big-M state on the grid.
pub fn big_m_is_rounded(params: &ModelParams) -> bool {
    params.lambda2().fract() != 0.0
}

/// `V(M, round(lambda2))` with `M = xmax`.
///
/// Under serve-Q1 the first coordinate drops out of the Bellman equation, so
/// the value at the grid edge equals the value for any larger `M` as long as
/// serving Q1 is optimal there.
pub fn opt_cost(table: &ValueTable) -> Result<f64> {
    let xmax = table.xmax();
    let s = big_m_state(&table.params, xmax);
    let y = s.y as usize;
    if y > xmax {
        return Err(Error::OutsideGrid { x: s.x, y: s.y, xmax });
    }
    if table.action(xmax, y) != Action::ServeQ1 {
        return Err(Error::TruncationTooSmall { x: xmax, y });
    }
    Ok(table.value(xmax, y))
}

//! Monte Carlo estimates of the discounted waiting cost of a policy.
//!
//! Accounting follows the Bellman recursion period by period: customers
//! queued at the served queue leave during the period and cost nothing, the
//! unserved queue costs its full length, and each arrival waits from its
//! arrival instant to the end of the period. Arrivals are never served in the
//! period they arrive in.
//!
//! Episode `i` draws from its own ChaCha stream `(seed, i)`, so estimates do
//! not depend on the number of workers, and two policies run with the same
//! config see the same arrivals (common random numbers).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cyclic::CyclicPolicy;
use crate::error::{Error, Result};
use crate::mdp::ActionMap;
use crate::model::{Action, ModelParams, PoissonSampler, QueueState};
use crate::par::{self, Execution};

/// How the in-period wait of new arrivals is charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Its expectation, `(lambda1 + lambda2) / 2`.
    #[default]
    ExpectedArrivalWait,
    /// `1 - u` per arrival with `u` a uniform arrival time.
    SampledArrivalWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub episodes: u64,
    pub horizon: u64,
    pub seed: u64,
    pub cost_mode: CostMode,
    #[serde(skip)]
    pub execution: Execution,
}

impl SimConfig {
    /// Expected-mode config with the default horizon for `params`.
    pub fn new(params: &ModelParams, episodes: u64, seed: u64) -> Self {
        SimConfig {
            episodes,
            horizon: default_horizon(params),
            seed,
            cost_mode: CostMode::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_cost_mode(mut self, mode: CostMode) -> Self {
        self.cost_mode = mode;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Smallest `T` with `gamma^T (lambda2 T + lambda / (1 - gamma))` below
/// `1e-3 * lambda / (1 - gamma)`, the discounted arrival cost alone.
pub fn default_horizon(params: &ModelParams) -> u64 {
    let g = params.gamma();
    let scale = params.lambda_bar() / (1.0 - g);
    let mut disc = 1.0;
    let mut t = 0u64;
    while disc * (params.lambda2() * t as f64 + scale) >= 1e-3 * scale {
        disc *= g;
        t += 1;
    }
    t
}

/// Upper bound on the expected cost a cyclic policy accrues after `horizon`
/// periods: each period costs at most `lambda + max(lambda2, k lambda1)` in
/// expectation.
pub fn cyclic_tail_bound(params: &ModelParams, policy: CyclicPolicy, horizon: u64) -> f64 {
    let per_period = params.lambda_bar()
        + params.lambda2().max(f64::from(policy.k()) * params.lambda1());
    params.gamma().powf(horizon as f64) * per_period / (1.0 - params.gamma())
}

#[derive(Debug, Clone, Copy)]
pub enum SimPolicy<'a> {
    Cyclic(CyclicPolicy),
    Table(&'a ActionMap),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub episodes: u64,
    pub seed: u64,
    /// Periods in which a table policy was queried off its grid.
    pub clamp_warnings: u64,
}

impl SimEstimate {
    fn from_samples(samples: &[f64], seed: u64, clamp_warnings: u64) -> Self {
        let n = samples.len() as f64;
        let mean = par::pairwise_sum(samples) / n;
        let stderr = if samples.len() > 1 {
            let sq: Vec<f64> = samples.iter().map(|c| (c - mean) * (c - mean)).collect();
            (par::pairwise_sum(&sq) / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        SimEstimate {
            mean,
            stderr,
            episodes: samples.len() as u64,
            seed,
            clamp_warnings,
        }
    }
}

struct Episode {
    cost: f64,
    clamps: u64,
}

struct Arrivals {
    q1: PoissonSampler,
    q2: PoissonSampler,
}

fn run_episode(
    params: &ModelParams,
    policy: &SimPolicy<'_>,
    init: QueueState,
    config: &SimConfig,
    arrivals: &Arrivals,
    episode: u64,
) -> Episode {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(episode);

    let g = params.gamma();
    let lam = params.lambda_bar();
    let (mut x, mut y) = (init.x, init.y);
    let mut disc = 1.0;
    let mut cost = 0.0;
    let mut clamps = 0;
    for t in 0..config.horizon {
        let action = match policy {
            SimPolicy::Cyclic(p) => p.action_at(t),
            SimPolicy::Table(map) => {
                let (a, clamped) = map.get(x, y);
                clamps += u64::from(clamped);
                a
            }
        };
        let z1 = arrivals.q1.sample(&mut rng);
        let z2 = arrivals.q2.sample(&mut rng);
        let arrival_wait = match config.cost_mode {
            CostMode::ExpectedArrivalWait => lam,
            CostMode::SampledArrivalWait => {
                (0..z1 + z2).map(|_| 1.0 - rng.random::<f64>()).sum()
            }
        };
        let carried = match action {
            Action::ServeQ1 => y,
            Action::ServeQ2 => x,
        };
        cost += disc * (arrival_wait + carried as f64);
        disc *= g;
        match action {
            Action::ServeQ1 => {
                x = z1;
                y += z2;
            }
            Action::ServeQ2 => {
                x += z1;
                y = z2;
            }
        }
    }
    Episode { cost, clamps }
}

fn check(policy: &SimPolicy<'_>, init: QueueState, config: &SimConfig) -> Result<()> {
    if config.episodes == 0 {
        return Err(Error::param("episodes", "must be at least 1"));
    }
    if let SimPolicy::Table(map) = policy {
        let cap = map.xmax() as u64;
        if init.x > cap || init.y > cap {
            return Err(Error::OutsideGrid {
                x: init.x,
                y: init.y,
                xmax: map.xmax(),
            });
        }
    }
    Ok(())
}

fn episode_costs(
    params: &ModelParams,
    policy: &SimPolicy<'_>,
    init: QueueState,
    config: &SimConfig,
) -> Result<(Vec<f64>, u64)> {
    check(policy, init, config)?;
    let arrivals = Arrivals {
        q1: PoissonSampler::new(params.lambda1())?,
        q2: PoissonSampler::new(params.lambda2())?,
    };
    let episodes = par::map_indexed(config.execution, config.episodes as usize, |i| {
        run_episode(params, policy, init, config, &arrivals, i as u64)
    });
    let clamps = episodes.iter().map(|e| e.clamps).sum();
    Ok((episodes.into_iter().map(|e| e.cost).collect(), clamps))
}

/// Mean discounted cost of `policy` from `init` over `config.episodes`
/// independent episodes.
pub fn simulate(
    params: &ModelParams,
    policy: &SimPolicy<'_>,
    init: QueueState,
    config: &SimConfig,
) -> Result<SimEstimate> {
    let (costs, clamps) = episode_costs(params, policy, init, config)?;
    Ok(SimEstimate::from_samples(&costs, config.seed, clamps))
}

/// One estimate per policy, all driven by the same arrival streams.
pub fn compare_policies(
    params: &ModelParams,
    policies: &[SimPolicy<'_>],
    init: QueueState,
    config: &SimConfig,
) -> Result<Vec<SimEstimate>> {
    policies
        .iter()
        .map(|p| simulate(params, p, init, config))
        .collect()
}

/// Estimate of `cost(a) - cost(b)` from paired episodes under common random
/// numbers; far tighter than differencing two independent estimates.
pub fn paired_difference(
    params: &ModelParams,
    a: &SimPolicy<'_>,
    b: &SimPolicy<'_>,
    init: QueueState,
    config: &SimConfig,
) -> Result<SimEstimate> {
    let (ca, wa) = episode_costs(params, a, init, config)?;
    let (cb, wb) = episode_costs(params, b, init, config)?;
    let diffs: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
    Ok(SimEstimate::from_samples(&diffs, config.seed, wa + wb))
}

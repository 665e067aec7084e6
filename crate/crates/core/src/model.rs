//! Parameters, states, actions and the Poisson toolkit shared by the solvers.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default probability mass dropped from the right tail of a truncated pmf.
pub const DEFAULT_TAIL_CUTOFF: f64 = 1e-12;

/// Arrival rates and discount factor, normalised so that `lambda1 <= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    swapped: bool,
}

#[derive(Deserialize)]
struct RawParams {
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    #[serde(default)]
    swapped: bool,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let mut p = ModelParams::new(raw.lambda1, raw.lambda2, raw.gamma)?;
        p.swapped |= raw.swapped;
        Ok(p)
    }
}

impl ModelParams {
    /// Validates the inputs and orders the queues so that Q1 is the slow one.
    /// `swapped()` reports whether the labels were exchanged.
    pub fn new(lambda1: f64, lambda2: f64, gamma: f64) -> Result<Self> {
        check_rate("lambda1", lambda1)?;
        check_rate("lambda2", lambda2)?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(
                "gamma",
                format!("discount factor must lie in (0, 1), got {gamma}"),
            ));
        }
        let swapped = lambda1 > lambda2;
        let (lambda1, lambda2) = if swapped {
            (lambda2, lambda1)
        } else {
            (lambda1, lambda2)
        };
        Ok(ModelParams {
            lambda1,
            lambda2,
            gamma,
            swapped,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn swapped(&self) -> bool {
        self.swapped
    }

    /// Mean of the two rates; the expected in-period wait of new arrivals.
    pub fn lambda_bar(&self) -> f64 {
        0.5 * (self.lambda1 + self.lambda2)
    }

    /// Rate ratio `lambda2 / lambda1 >= 1`.
    pub fn ratio(&self) -> f64 {
        self.lambda2 / self.lambda1
    }

    /// Arrival rate of the given queue.
    pub fn rate(&self, queue: Action) -> f64 {
        match queue {
            Action::ServeQ1 => self.lambda1,
            Action::ServeQ2 => self.lambda2,
        }
    }

    /// Same discount factor, both rates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        ModelParams::new(self.lambda1 * factor, self.lambda2 * factor, self.gamma)
    }
}

fn check_rate(field: &'static str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            field,
            format!("arrival rate must be positive and finite, got {rate}"),
        ))
    }
}

/// Queue lengths at the start of a period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QueueState {
    pub x: u64,
    pub y: u64,
}

impl QueueState {
    pub fn new(x: u64, y: u64) -> Self {
        QueueState { x, y }
    }
}

/// Which queue the server empties during a period. Doubles as a queue label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    ServeQ1,
    ServeQ2,
}

impl Action {
    /// The queue left waiting while this one is served.
    pub fn other(self) -> Action {
        match self {
            Action::ServeQ1 => Action::ServeQ2,
            Action::ServeQ2 => Action::ServeQ1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Action::ServeQ1 => 0,
            Action::ServeQ2 => 1,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::ServeQ1 => "Q1",
            Action::ServeQ2 => "Q2",
        })
    }
}

/// Poisson pmf restricted to `0..=zmax`, with the dropped tail reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPmf {
    pub rate: f64,
    pub probs: Vec<f64>,
    pub tail_mass: f64,
}

impl TruncatedPmf {
    pub fn zmax(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

/// Tabulates the Poisson(`rate`) pmf up to the smallest `zmax` whose CDF
/// reaches `1 - tail_cutoff`.
pub fn poisson_pmf(rate: f64, tail_cutoff: f64) -> Result<TruncatedPmf> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::param("rate", format!("must be >= 0, got {rate}")));
    }
    if !(tail_cutoff > 0.0 && tail_cutoff < 1.0) {
        return Err(Error::param(
            "tail_cutoff",
            format!("must lie in (0, 1), got {tail_cutoff}"),
        ));
    }
    if rate == 0.0 {
        return Ok(TruncatedPmf {
            rate,
            probs: vec![1.0],
            tail_mass: 0.0,
        });
    }

    // log-space keeps e^{-rate} from underflowing for large rates
    let ln_rate = rate.ln();
    let hard_stop = (rate + 40.0 * rate.sqrt() + 60.0).ceil() as usize;
    let mut probs = Vec::new();
    let mut ln_fact = 0.0;
    let mut cdf = 0.0;
    for k in 0..=hard_stop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let p = (-rate + k as f64 * ln_rate - ln_fact).exp();
        probs.push(p);
        cdf += p;
        if cdf >= 1.0 - tail_cutoff {
            break;
        }
    }
    Ok(TruncatedPmf {
        rate,
        probs,
        tail_mass: (1.0 - cdf).max(0.0),
    })
}

/// Poisson sampler that also accepts a zero rate.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler {
    dist: Option<Poisson<f64>>,
}

impl PoissonSampler {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::param("rate", format!("must be >= 0, got {rate}")));
        }
        let dist = if rate == 0.0 {
            None
        } else {
            Some(Poisson::new(rate).map_err(|e| Error::param("rate", e.to_string()))?)
        };
        Ok(PoissonSampler { dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.dist {
            Some(d) => d.sample(rng) as u64,
            None => 0,
        }
    }
}

/// Draws one Poisson(`rate`) count from `rng`.
pub fn sample_poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<u64> {
    Ok(PoissonSampler::new(rate)?.sample(rng))
}

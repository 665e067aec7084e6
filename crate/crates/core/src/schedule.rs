//! Arbitrary periodic service schedules: steady-cycle cost evaluation and
//! exhaustive search over short cycles.
//!
//! A schedule is repeated forever. The cost of position `t` is the in-period
//! wait of new arrivals plus the wait of everybody queued at the unserved
//! queue, whose expected size is its rate times the number of periods since
//! it was last emptied. Ages wrap around the cycle, so the evaluated cost is
//! that of a cycle embedded in an infinite repetition of itself.
//!
//! Discounting makes the cost depend on the phase at which the cycle is
//! entered. [`enumerate_best_cycle`] only compares phases that begin with Q1
//! right after a Q2, which is the phase reached from the big-M initial state
//! `(M, lambda2)`: Q1 is served first and Q2 was emptied one period earlier.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ModelParams};
use crate::par::{self, Execution};

/// Longest cycle [`enumerate_best_cycle`] accepts.
pub const MAX_ENUMERATION_LEN: usize = 24;

/// A finite service sequence interpreted cyclically; serves both queues.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Action>", into = "Vec<Action>")]
pub struct Schedule {
    actions: Vec<Action>,
}

impl TryFrom<Vec<Action>> for Schedule {
    type Error = Error;

    fn try_from(actions: Vec<Action>) -> Result<Self> {
        Schedule::new(actions)
    }
}

impl From<Schedule> for Vec<Action> {
    fn from(s: Schedule) -> Self {
        s.actions
    }
}

impl Schedule {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        if actions.len() < 2 {
            return Err(Error::InvalidSchedule(format!(
                "a cycle needs at least two periods, got {}",
                actions.len()
            )));
        }
        for queue in [Action::ServeQ1, Action::ServeQ2] {
            if !actions.contains(&queue) {
                return Err(Error::InvalidSchedule(format!(
                    "{queue} is never served, so its backlog grows without bound"
                )));
            }
        }
        Ok(Schedule { actions })
    }

    /// `[Q1, Q2 x k]`.
    pub fn cyclic(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCycle(k));
        }
        let mut actions = vec![Action::ServeQ1];
        actions.extend(std::iter::repeat_n(Action::ServeQ2, k as usize));
        Schedule::new(actions)
    }

    /// `[Q1 x k1, Q2 x k2]`.
    pub fn blocks(k1: usize, k2: usize) -> Result<Self> {
        let mut actions = vec![Action::ServeQ1; k1];
        actions.extend(std::iter::repeat_n(Action::ServeQ2, k2));
        Schedule::new(actions)
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// The same cycle entered `shift` periods later.
    pub fn rotated(&self, shift: usize) -> Schedule {
        let mut actions = self.actions.clone();
        actions.rotate_left(shift % self.len());
        Schedule { actions }
    }

    pub fn rotations(&self) -> impl Iterator<Item = Schedule> + '_ {
        (0..self.len()).map(move |s| self.rotated(s))
    }

    pub fn is_rotation_of(&self, other: &Schedule) -> bool {
        self.len() == other.len() && other.rotations().any(|r| r == *self)
    }

    /// Starts with Q1 and ends with Q2, i.e. is entered right after a
    /// (Q2, Q1) switch.
    pub fn starts_after_switch(&self) -> bool {
        self.actions[0] == Action::ServeQ1 && self.actions[self.len() - 1] == Action::ServeQ2
    }

    /// For each position, the number of periods since the unserved queue was
    /// last emptied.
    pub fn waiting_ages(&self) -> Vec<u32> {
        let len = self.len();
        let mut last = [0usize; 2];
        let mut ages = vec![0u32; len];
        for pass in 0..2 {
            for (t, action) in self.actions.iter().enumerate() {
                let now = pass * len + t;
                if pass == 1 {
                    ages[t] = (now - last[action.other().index()]) as u32;
                }
                last[action.index()] = now;
            }
        }
        ages
    }

    /// `Some(k)` if this is a rotation of `[Q1, Q2 x k]`.
    pub fn as_cyclic(&self) -> Option<u32> {
        let ones = self.actions.iter().filter(|&&a| a == Action::ServeQ1).count();
        if ones != 1 {
            return None;
        }
        Some((self.len() - 1) as u32)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// Expected discounted waiting cost of one pass through the cycle,
/// discounted to its first period.
pub fn schedule_cycle_cost(params: &ModelParams, schedule: &Schedule) -> f64 {
    let g = params.gamma();
    let lam = params.lambda_bar();
    let mut disc = 1.0;
    let mut cost = 0.0;
    for (action, age) in schedule.actions.iter().zip(schedule.waiting_ages()) {
        cost += disc * (lam + params.rate(action.other()) * f64::from(age));
        disc *= g;
    }
    cost
}

/// Total discounted cost of repeating the cycle forever.
pub fn schedule_total_cost(params: &ModelParams, schedule: &Schedule) -> f64 {
    let len = schedule.len() as i32;
    schedule_cycle_cost(params, schedule) / (1.0 - params.gamma().powi(len))
}

/// Winner of an exhaustive cycle search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCycle {
    pub schedule: Schedule,
    pub cost: f64,
    /// Rotation classes (aperiodic necklaces) examined.
    pub classes: usize,
}

/// Exhaustive search over all cycles of length `2..=max_len`, one
/// representative per rotation class, comparing the phases that start right
/// after a (Q2, Q1) switch. Ties go to the shorter, then lexicographically
/// smaller, schedule.
pub fn enumerate_best_cycle(params: &ModelParams, max_len: usize) -> Result<BestCycle> {
    enumerate_best_cycle_with(params, max_len, Execution::default())
}

pub fn enumerate_best_cycle_with(
    params: &ModelParams,
    max_len: usize,
    exec: Execution,
) -> Result<BestCycle> {
    if max_len < 2 {
        return Err(Error::param(
            "max_len",
            format!("cycles need at least two periods, got {max_len}"),
        ));
    }
    if max_len > MAX_ENUMERATION_LEN {
        return Err(Error::param(
            "max_len",
            format!("at most {MAX_ENUMERATION_LEN} supported, got {max_len}"),
        ));
    }

    let classes = lyndon_words(max_len);
    let winners = par::map_slice(exec, &classes, |word| best_phase(params, word));

    let mut best: Option<(Schedule, f64)> = None;
    for (schedule, cost) in winners {
        best = match best {
            None => Some((schedule, cost)),
            Some(cur) => Some(if better(&(schedule.clone(), cost), &cur) {
                (schedule, cost)
            } else {
                cur
            }),
        };
    }
    let (schedule, cost) = best.expect("length-2 class always exists");
    Ok(BestCycle {
        schedule,
        cost,
        classes: classes.len(),
    })
}

fn better(cand: &(Schedule, f64), cur: &(Schedule, f64)) -> bool {
    let tol = 1e-12 * cur.1.abs().max(cand.1.abs());
    if cand.1 < cur.1 - tol {
        return true;
    }
    if cand.1 > cur.1 + tol {
        return false;
    }
    match cand.0.len().cmp(&cur.0.len()) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => cand.0 < cur.0,
    }
}

fn best_phase(params: &ModelParams, word: &Schedule) -> (Schedule, f64) {
    word.rotations()
        .filter(Schedule::starts_after_switch)
        .map(|s| {
            let c = schedule_total_cost(params, &s);
            (s, c)
        })
        .reduce(|cur, cand| if better(&cand, &cur) { cand } else { cur })
        .expect("every class with both queues has a (Q2, Q1) switch")
}

/// Binary Lyndon words of length `2..=n` in lexicographic order (Duval's
/// generator). Each is the least rotation of exactly one aperiodic cycle.
fn lyndon_words(n: usize) -> Vec<Schedule> {
    let mut out = Vec::new();
    let mut w: Vec<u8> = vec![0];
    loop {
        if w.len() >= 2 {
            let actions = w
                .iter()
                .map(|&b| if b == 0 { Action::ServeQ1 } else { Action::ServeQ2 })
                .collect();
            out.push(Schedule { actions });
        }
        let m = w.len();
        while w.len() < n {
            let next = w[w.len() - m];
            w.push(next);
        }
        while w.last() == Some(&1) {
            w.pop();
        }
        match w.last_mut() {
            Some(last) => *last = 1,
            None => break,
        }
    }
    out
}

//! Closed forms for the cyclic policy (Q1, Q2, ..., Q2) with `k` services of
//! Q2 per cycle.
//!
//! All sums are accumulated term by term. The geometric closed forms lose
//! accuracy through the `1 - gamma` cancellation as `gamma -> 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, ModelParams};

/// Serve Q1 once, then Q2 `k` times, forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CyclicPolicy {
    k: u32,
}

impl CyclicPolicy {
    pub fn new(k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidCycle(k));
        }
        Ok(CyclicPolicy { k })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn cycle_len(&self) -> u64 {
        u64::from(self.k) + 1
    }

    /// Action taken in period `t` (cycles start with Q1 at `t = 0`).
    pub fn action_at(&self, t: u64) -> Action {
        if t.is_multiple_of(self.cycle_len()) {
            Action::ServeQ1
        } else {
            Action::ServeQ2
        }
    }
}

/// Optimal cycle length and the thresholds that bracket the rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStarResult {
    pub k_star: u32,
    /// `threshold_g(gamma, k_star - 1)`
    pub threshold_low: f64,
    /// `threshold_g(gamma, k_star)`
    pub threshold_high: f64,
    /// `r` sits on `threshold_high`, so `k_star` and `k_star + 1` cost the same.
    pub tie: bool,
}

/// Which end of the discount range [`asymptotic_k`] approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscountLimit {
    GammaToOne,
    GammaToZero,
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidCycle(k))
    } else {
        Ok(())
    }
}

/// Expected discounted waiting cost accrued within one cycle, discounted to
/// the cycle start.
pub fn cycle_cost(params: &ModelParams, k: u32) -> Result<f64> {
    check_k(k)?;
    let g = params.gamma();
    let mut arrivals = 0.0;
    let mut q1_wait = 0.0;
    let mut disc = 1.0;
    for i in 0..=k {
        arrivals += disc;
        if i >= 1 {
            q1_wait += f64::from(i) * disc;
        }
        disc *= g;
    }
    Ok(params.lambda_bar() * arrivals + params.lambda2() + params.lambda1() * q1_wait)
}

/// Total discounted cost `C(k)` of repeating the cycle from the big-M state.
pub fn total_cost(params: &ModelParams, k: u32) -> Result<f64> {
    let per_cycle = cycle_cost(params, k)?;
    Ok(per_cycle / (1.0 - params.gamma().powi(k as i32 + 1)))
}

/// `sum_{i=0}^{k} (k + 1 - i) gamma^i`. `C(k + 1) >= C(k)` exactly when
/// `r <= threshold_g(gamma, k)`.
pub fn threshold_g(gamma: f64, k: u32) -> f64 {
    let mut acc = 0.0;
    let mut disc = 1.0;
    for i in 0..=k {
        acc += f64::from(k + 1 - i) * disc;
        disc *= gamma;
    }
    acc
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Smallest `k >= 1` with `r <= threshold_g(gamma, k)`.
///
/// The threshold grows at least linearly in `k`, so the scan ends after
/// roughly `r` steps.
pub fn optimal_k(params: &ModelParams) -> KStarResult {
    optimal_k_for(params.gamma(), params.ratio())
}

/// [`optimal_k`] from the ratio directly; `k*` depends on nothing else.
pub fn optimal_k_for(gamma: f64, r: f64) -> KStarResult {
    let mut k = 1u32;
    let mut low = threshold_g(gamma, 0);
    let mut high = threshold_g(gamma, 1);
    while r > high {
        k += 1;
        low = high;
        high = threshold_g(gamma, k);
    }
    KStarResult {
        k_star: k,
        threshold_low: low,
        threshold_high: high,
        tie: same_value(r, high),
    }
}

/// Limiting approximation of `k*`: `sqrt(2r) - 1` as `gamma -> 1`, `r` as
/// `gamma -> 0`.
pub fn asymptotic_k(params: &ModelParams, limit: DiscountLimit) -> f64 {
    let r = params.ratio();
    match limit {
        DiscountLimit::GammaToOne => (2.0 * r).sqrt() - 1.0,
        DiscountLimit::GammaToZero => r,
    }
}

/// `(k, C(k))` for `k = 1..=k_max`.
pub fn cost_curve(params: &ModelParams, k_max: u32) -> Result<Vec<(u32, f64)>> {
    check_k(k_max)?;
    (1..=k_max)
        .map(|k| total_cost(params, k).map(|c| (k, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(l1: f64, l2: f64, g: f64) -> ModelParams {
        ModelParams::new(l1, l2, g).unwrap()
    }

    #[test]
    fn cycle_cost_by_hand() {
        // 1*(1 + 0.6) + 1 + 1*0.6
        assert_relative_eq!(cycle_cost(&params(1.0, 1.0, 0.6), 1).unwrap(), 3.2, epsilon = 1e-12);
        // 5*3.3616 + 9 + (0.8 + 2*0.64 + 3*0.512 + 4*0.4096)
        assert_relative_eq!(
            cycle_cost(&params(1.0, 9.0, 0.8), 4).unwrap(),
            31.0624,
            epsilon = 1e-12
        );
        let p = params(2.0, 7.0, 1e-9);
        assert!((cycle_cost(&p, 1).unwrap() - (p.lambda_bar() + 7.0)).abs() < 1e-8);
    }

    #[test]
    fn zero_k_is_rejected() {
        let p = params(1.0, 2.0, 0.5);
        assert!(matches!(cycle_cost(&p, 0), Err(Error::InvalidCycle(0))));
        assert!(total_cost(&p, 0).is_err());
        assert!(CyclicPolicy::new(0).is_err());
        assert!(cost_curve(&p, 0).is_err());
    }

    #[test]
    fn table_values() {
        let round2 = |x: f64| (x * 100.0).round() / 100.0;
        assert_eq!(round2(total_cost(&params(1.0, 1.0, 0.6), 1).unwrap()), 5.00);
        assert_eq!(round2(total_cost(&params(1.0, 9.0, 0.8), 4).unwrap()), 46.20);
        assert_eq!(round2(total_cost(&params(1.0, 1.0, 0.99), 1).unwrap()), 200.00);
    }

    #[test]
    fn thresholds() {
        for g in [0.1, 0.5, 0.99] {
            assert_eq!(threshold_g(g, 0), 1.0);
        }
        let g = 0.8f64;
        let expanded = 5.0 + 4.0 * g + 3.0 * g * g + 2.0 * g.powi(3) + g.powi(4);
        assert_relative_eq!(threshold_g(0.8, 4), expanded, epsilon = 1e-12);
        assert_relative_eq!(threshold_g(0.8, 4), 11.5536, epsilon = 1e-12);
        assert_relative_eq!(threshold_g(0.99, 2), 5.9601, epsilon = 1e-12);
    }

    #[test]
    fn optimal_k_table_rows() {
        assert_eq!(optimal_k(&params(1.0, 9.0, 0.8)).k_star, 4);
        assert_eq!(optimal_k(&params(1.0, 9.0, 0.99)).k_star, 3);
        let unit = optimal_k(&params(1.0, 1.0, 0.6));
        assert_eq!(unit.k_star, 1);
        assert_eq!(unit.threshold_low, 1.0);
        assert!(!unit.tie);
    }

    #[test]
    fn optimal_k_brackets_ratio() {
        let res = optimal_k(&params(1.0, 9.0, 0.8));
        assert!(res.threshold_low < 9.0 && 9.0 <= res.threshold_high);
    }

    #[test]
    fn tie_takes_the_shorter_cycle() {
        let g = 0.5;
        let r = threshold_g(g, 2);
        let res = optimal_k_for(g, r);
        assert_eq!(res.k_star, 2);
        assert!(res.tie);
        let p = params(1.0, r, g);
        assert_relative_eq!(
            total_cost(&p, 2).unwrap(),
            total_cost(&p, 3).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn asymptotics() {
        let k = asymptotic_k(&params(1.0, 9.0, 0.5), DiscountLimit::GammaToOne);
        assert_relative_eq!(k, 18f64.sqrt() - 1.0);
        assert!((k - 3.243).abs() < 1e-3);
        assert_eq!(asymptotic_k(&params(1.0, 2.0, 0.5), DiscountLimit::GammaToOne), 1.0);
        assert_eq!(asymptotic_k(&params(1.0, 5.0, 0.5), DiscountLimit::GammaToZero), 5.0);
    }

    #[test]
    fn curves() {
        let p = params(1.0, 9.0, 0.8);
        let curve = cost_curve(&p, 4).unwrap();
        assert_eq!(curve.len(), 4);
        assert_eq!(curve[3].0, 4);
        assert!((curve[3].1 - 46.20).abs() < 5e-3);

        let unit = cost_curve(&params(1.0, 1.0, 0.6), 1).unwrap();
        assert_eq!(unit.len(), 1);
        assert!((unit[0].1 - 5.0).abs() < 1e-12);

        let long = cost_curve(&p, 10).unwrap();
        let argmin = long
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmin, 4);
    }

    #[test]
    fn policy_actions() {
        let pol = CyclicPolicy::new(3).unwrap();
        let acts: Vec<Action> = (0..8).map(|t| pol.action_at(t)).collect();
        use Action::*;
        assert_eq!(acts, vec![ServeQ1, ServeQ2, ServeQ2, ServeQ2, ServeQ1, ServeQ2, ServeQ2, ServeQ2]);
    }
}

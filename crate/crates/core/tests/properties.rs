use approx::assert_relative_eq;
use batchq::cyclic::{self, optimal_k_for, threshold_g, total_cost};
use batchq::model::{poisson_pmf, Action};
use batchq::schedule::{schedule_cycle_cost, schedule_total_cost, Schedule};
use batchq::ModelParams;
use proptest::prelude::*;
use statrs::distribution::{Discrete, Poisson};

const GAMMAS: [f64; 7] = [0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.99];

fn p(l1: f64, l2: f64, g: f64) -> ModelParams {
    ModelParams::new(l1, l2, g).unwrap()
}

/// Cost of `[Q1, Q2 x k]` repeated forever from the big-M start, summed
/// period by period: the unserved queue holds every arrival since its last
/// visit, and Q2 starts with one period's worth.
fn brute_force_cost(params: &ModelParams, k: u32) -> f64 {
    let g = params.gamma();
    let (l1, l2) = (params.lambda1(), params.lambda2());
    let lam = (l1 + l2) / 2.0;
    let cycle = u64::from(k) + 1;
    let mut disc = 1.0;
    let mut cost = 0.0;
    let mut t = 0u64;
    while disc > 1e-16 {
        let pos = t % cycle;
        let carried = if pos == 0 { l2 } else { l1 * pos as f64 };
        cost += disc * (lam + carried);
        disc *= g;
        t += 1;
    }
    cost
}

#[test]
fn total_cost_matches_period_sum() {
    for g in GAMMAS {
        for (l1, l2) in [(1.0, 1.0), (1.0, 3.0), (0.4, 2.9), (2.0, 7.5)] {
            let params = p(l1, l2, g);
            for k in 1..=12 {
                assert_relative_eq!(
                    total_cost(&params, k).unwrap(),
                    brute_force_cost(&params, k),
                    max_relative = 1e-10
                );
            }
        }
    }
}

#[test]
fn unimodal_with_minimizer_k_star() {
    let gammas = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
    for g in gammas {
        for r in 1..=50 {
            let params = p(1.0, f64::from(r), g);
            let k_star = cyclic::optimal_k(&params).k_star;
            let big_k = 4 * (k_star + 2);
            let costs: Vec<f64> = (1..=big_k).map(|k| total_cost(&params, k).unwrap()).collect();
            let slack = 1e-12 * costs[0];
            for k in 1..big_k as usize {
                let (c0, c1) = (costs[k - 1], costs[k]);
                if (k as u32) < k_star {
                    assert!(c1 <= c0 + slack, "gamma {g} r {r}: C({}) > C({k})", k + 1);
                } else {
                    assert!(c1 >= c0 - slack, "gamma {g} r {r}: C({}) < C({k})", k + 1);
                }
            }
        }
    }
}

#[test]
fn increment_sign_follows_threshold() {
    for g in GAMMAS {
        for r in 1..=50 {
            let rf = f64::from(r);
            let params = p(1.0, rf, g);
            for k in 1..=30u32 {
                let diff = total_cost(&params, k + 1).unwrap() - total_cost(&params, k).unwrap();
                let thr = threshold_g(g, k);
                let scale = total_cost(&params, k).unwrap();
                if (thr - rf).abs() < 1e-9 * rf {
                    assert!(diff.abs() < 1e-9 * scale);
                } else if rf < thr {
                    assert!(diff > -1e-12 * scale, "gamma {g} r {r} k {k}");
                } else {
                    assert!(diff < 1e-12 * scale, "gamma {g} r {r} k {k}");
                }
            }
        }
    }
}

#[test]
fn k_star_nonincreasing_in_gamma() {
    let gammas = [0.001, 0.1, 0.3, 0.5, 0.7, 0.8, 0.9, 0.99, 0.999];
    for r in 1..=50 {
        let ks: Vec<u32> = gammas.iter().map(|&g| optimal_k_for(g, f64::from(r)).k_star).collect();
        assert!(ks.windows(2).all(|w| w[1] <= w[0]), "r {r}: {ks:?}");
    }
}

#[test]
fn threshold_strictly_increasing() {
    for g in GAMMAS {
        for k in 0..60 {
            assert!(threshold_g(g, k + 1) > threshold_g(g, k));
        }
    }
}

#[test]
fn schedule_evaluator_matches_closed_form() {
    for g in GAMMAS {
        for (l1, l2) in [(1.0, 1.0), (1.0, 9.0), (0.3, 0.8)] {
            let params = p(l1, l2, g);
            for k in 1..=30 {
                let s = Schedule::cyclic(k).unwrap();
                assert_relative_eq!(
                    schedule_total_cost(&params, &s),
                    total_cost(&params, k).unwrap(),
                    max_relative = 1e-9
                );
            }
        }
    }
}

fn seq(parts: &[(Action, usize)]) -> Schedule {
    let actions = parts
        .iter()
        .flat_map(|&(a, n)| std::iter::repeat_n(a, n))
        .collect();
    Schedule::new(actions).unwrap()
}

#[test]
fn splitting_a_long_q1_block_saves_the_expected_amount() {
    use Action::{ServeQ1 as A, ServeQ2 as B};
    for g in GAMMAS {
        for (l1, l2) in [(1.0, 3.0), (1.0, 1.0), (0.5, 4.0)] {
            let params = p(l1, l2, g);
            for k1 in 3..=7 {
                for k2 in 1..=5 {
                    let first = seq(&[(A, k1), (B, k2)]);
                    let second = seq(&[(A, 1), (B, 1), (A, k1 - 2), (B, k2)]);
                    let delta = schedule_cycle_cost(&params, &first) - schedule_cycle_cost(&params, &second);
                    let expected = l2 * (2..=k1).map(|i| 2.0 * g.powi(i as i32 - 1)).sum::<f64>() - l1 * g;
                    assert!((delta - expected).abs() < 1e-9, "k1 {k1} k2 {k2}: {delta} vs {expected}");
                    if l2 > l1 {
                        assert!(delta > 0.0);
                    }
                }
            }
        }
    }
}

#[test]
fn splitting_a_double_q1_visit_saves_the_expected_amount() {
    use Action::{ServeQ1 as A, ServeQ2 as B};
    for g in GAMMAS {
        for (l1, l2) in [(1.0, 3.0), (0.5, 4.0), (2.0, 2.5)] {
            let params = p(l1, l2, g);
            for k2 in 2..=8 {
                let first = seq(&[(A, 2), (B, k2)]);
                let second = seq(&[(A, 1), (B, 1), (A, 1), (B, k2 - 1)]);
                let delta = schedule_cycle_cost(&params, &first) - schedule_cycle_cost(&params, &second);
                let expected = 2.0 * l2 * g - l1 * g - l2 * g * g
                    + l1 * (1..=k2).map(|i| g.powi(i as i32 + 1)).sum::<f64>();
                assert!((delta - expected).abs() < 1e-9);
                assert!(delta > 0.0);
            }
        }
    }
}

#[test]
fn pmf_matches_reference_distribution() {
    for rate in [0.1, 0.5, 1.0, 3.0, 9.0, 27.5] {
        let pmf = poisson_pmf(rate, 1e-12).unwrap();
        let reference = Poisson::new(rate).unwrap();
        for (k, &m) in pmf.probs.iter().enumerate() {
            assert!((m - reference.pmf(k as u64)).abs() < 1e-12, "rate {rate} k {k}");
        }
        let kept: f64 = pmf.probs.iter().sum();
        assert!((kept + pmf.tail_mass - 1.0).abs() < 1e-12);
        assert!(pmf.tail_mass < 1e-12);
    }
}

#[test]
fn limits_of_k_star() {
    for r in 2..=50 {
        let rf = f64::from(r);
        let high = optimal_k_for(0.999, rf).k_star as f64;
        assert!((high - ((2.0 * rf).sqrt() - 1.0).round()).abs() <= 1.0, "r {r}");
        let low = optimal_k_for(0.001, rf).k_star;
        assert!(low == r - 1 || low == r, "r {r}: {low}");
    }
}

proptest! {
    #[test]
    fn cost_scales_with_rates(
        l1 in 0.05f64..20.0,
        l2 in 0.05f64..20.0,
        g in 0.01f64..0.995,
        c in 0.1f64..10.0,
        k in 1u32..40,
    ) {
        let base = p(l1, l2, g);
        let scaled = p(c * l1, c * l2, g);
        let a = total_cost(&base, k).unwrap();
        let b = total_cost(&scaled, k).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-10 * b.abs());
        prop_assert_eq!(cyclic::optimal_k(&base).k_star, cyclic::optimal_k(&scaled).k_star);
    }

    #[test]
    fn normalization_is_idempotent(l1 in 0.01f64..50.0, l2 in 0.01f64..50.0, g in 0.001f64..0.999) {
        let once = p(l1, l2, g);
        let twice = p(once.lambda1(), once.lambda2(), once.gamma());
        prop_assert_eq!(once.lambda1(), twice.lambda1());
        prop_assert_eq!(once.lambda2(), twice.lambda2());
        prop_assert!(once.lambda1() <= once.lambda2());
        prop_assert_eq!(once.swapped(), l1 > l2);
        prop_assert!(!twice.swapped());
    }

    #[test]
    fn k_star_is_the_argmin(g in 0.01f64..0.995, r in 1.0f64..60.0) {
        let params = p(1.0, r, g);
        let res = cyclic::optimal_k(&params);
        let best = total_cost(&params, res.k_star).unwrap();
        for k in 1..=(4 * res.k_star + 8) {
            prop_assert!(best <= total_cost(&params, k).unwrap() * (1.0 + 1e-12));
        }
        prop_assert!(r <= res.threshold_high);
        if res.k_star > 1 {
            prop_assert!(r > res.threshold_low);
        }
    }

    #[test]
    fn block_schedules_never_beat_k_star(g in 0.05f64..0.99, r in 1.0f64..12.0, k1 in 1usize..5, k2 in 1usize..8) {
        let params = p(1.0, r, g);
        let best = total_cost(&params, cyclic::optimal_k(&params).k_star).unwrap();
        let s = Schedule::blocks(k1, k2).unwrap();
        prop_assert!(schedule_total_cost(&params, &s) >= best * (1.0 - 1e-12));
    }
}

//! Table and figure data for the published experiment grid.
//!
//! Every row uses `lambda1 = 1`, `lambda2 = r`. Closed-form columns come from
//! [`crate::cyclic`], the optimum from [`crate::mdp`] at the big-M state, and
//! gaps are `(C - OPT) / OPT` in percent.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cyclic::{optimal_k, optimal_k_for, total_cost};
use crate::error::Result;
use crate::mdp::{self, SolverConfig};
use crate::model::ModelParams;
use crate::par::Execution;

pub const TABLE1_GAMMAS: [f64; 3] = [0.6, 0.8, 0.99];
pub const TABLE1_RATIOS: [u32; 4] = [1, 3, 5, 9];

pub const FIGURE1A_GAMMAS: [f64; 4] = [0.6, 0.8, 0.9, 0.99];
pub const FIGURE1A_MAX_RATIO: f64 = 50.0;
pub const FIGURE1B_K_MAX: u32 = 20;

/// Round half away from zero to `decimals` places. The scaled value is
/// snapped to 1e-6 first so decimal halves stored just below the half in
/// binary (10.625 is exact, 1.005 is not) still round away from zero.
pub fn round_decimals(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    let scaled = ((value * scale) * 1e6).round() / 1e6;
    scaled.round() / scale
}

/// Two-decimal presentation used throughout the tables.
pub fn fmt2(value: f64) -> String {
    format!("{:.2}", round_decimals(value, 2))
}

/// `(cost - opt) / opt` in percent.
pub fn gap_percent(cost: f64, opt: f64) -> f64 {
    100.0 * (cost - opt) / opt
}

/// The `(gamma, r)` pairs of the published table, in print order.
pub fn table1_grid() -> Vec<(f64, u32)> {
    TABLE1_GAMMAS
        .iter()
        .flat_map(|&g| TABLE1_RATIOS.iter().map(move |&r| (g, r)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRow {
    pub gamma: f64,
    pub r: u32,
    pub k_star: u32,
    pub c1: f64,
    pub cr: f64,
    pub ck_star: f64,
}

pub fn closed_form_row(gamma: f64, r: u32) -> Result<ClosedFormRow> {
    let params = ModelParams::new(1.0, f64::from(r), gamma)?;
    let k_star = optimal_k(&params).k_star;
    Ok(ClosedFormRow {
        gamma,
        r,
        k_star,
        c1: total_cost(&params, 1)?,
        cr: total_cost(&params, r)?,
        ck_star: total_cost(&params, k_star)?,
    })
}

pub fn closed_form_rows() -> Result<Vec<ClosedFormRow>> {
    table1_grid()
        .into_iter()
        .map(|(g, r)| closed_form_row(g, r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub gamma: f64,
    pub r: u32,
    pub k_star: u32,
    pub c1: f64,
    pub cr: f64,
    pub ck_star: f64,
    /// `None` when the solver failed for this row.
    pub opt: Option<f64>,
    pub gap1: Option<f64>,
    pub gapr: Option<f64>,
    pub gapk: Option<f64>,
}

impl Table1Row {
    fn new(cf: ClosedFormRow, opt: Option<f64>) -> Self {
        let gap = |c: f64| opt.map(|o| gap_percent(c, o));
        Table1Row {
            gamma: cf.gamma,
            r: cf.r,
            k_star: cf.k_star,
            c1: cf.c1,
            cr: cf.cr,
            ck_star: cf.ck_star,
            opt,
            gap1: gap(cf.c1),
            gapr: gap(cf.cr),
            gapk: gap(cf.ck_star),
        }
    }
}

/// How the optimum of one row was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub gamma: f64,
    pub r: u32,
    pub xmax: usize,
    pub epsilon: f64,
    pub tail_cutoff: f64,
    pub iterations: Option<usize>,
    pub sup_delta: Option<f64>,
    pub cache_hit: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: Vec<SolverRecord>,
    pub seeds: Vec<u64>,
    pub rounding: String,
    pub gap_definition: String,
    pub lambda1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub complete: bool,
    pub rows: Vec<Table1Row>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default)]
pub struct Table1Options {
    /// Overrides the per-row default grid size.
    pub xmax: Option<usize>,
    /// Overrides the per-row default accuracy.
    pub epsilon: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub execution: Execution,
    pub command: String,
}

impl Table1Options {
    pub fn solver_config(&self, params: &ModelParams) -> SolverConfig {
        let mut cfg = SolverConfig::for_params(params).with_execution(self.execution);
        if let Some(x) = self.xmax {
            cfg.xmax = x;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        cfg
    }
}

/// Builds the full table. Solver failures leave the row's optimum empty and
/// mark the report incomplete rather than aborting.
pub fn table1(opts: &Table1Options) -> Result<RunReport> {
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for cf in closed_form_rows()? {
        let params = ModelParams::new(1.0, f64::from(cf.r), cf.gamma)?;
        let cfg = opts.solver_config(&params);
        let mut record = SolverRecord {
            gamma: cf.gamma,
            r: cf.r,
            xmax: cfg.xmax,
            epsilon: cfg.epsilon,
            tail_cutoff: cfg.tail_cutoff,
            iterations: None,
            sup_delta: None,
            cache_hit: false,
            error: None,
        };
        let opt = match mdp::load_or_solve(&params, &cfg, opts.cache_dir.as_deref())
            .and_then(|(t, hit)| t.opt_cost().map(|o| (t, hit, o)))
        {
            Ok((table, hit, opt)) => {
                record.iterations = Some(table.iterations());
                record.sup_delta = Some(table.sup_delta());
                record.cache_hit = hit;
                Some(opt)
            }
            Err(e) => {
                record.error = Some(e.to_string());
                None
            }
        };
        rows.push(Table1Row::new(cf, opt));
        records.push(record);
    }
    Ok(RunReport {
        command: opts.command.clone(),
        complete: rows.iter().all(|r| r.opt.is_some()),
        rows,
        provenance: Provenance {
            solver: records,
            seeds: Vec::new(),
            rounding: "half away from zero, 2 decimals".to_string(),
            gap_definition: "(C - OPT) / OPT".to_string(),
            lambda1: 1.0,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KStarPoint {
    pub gamma: f64,
    pub r: f64,
    pub k_star: u32,
}

/// `k*` against `r` in steps of 0.5 from 1 to [`FIGURE1A_MAX_RATIO`] for each
/// discount factor in [`FIGURE1A_GAMMAS`].
pub fn figure1a() -> Vec<KStarPoint> {
    let steps = ((FIGURE1A_MAX_RATIO - 1.0) * 2.0) as u32;
    FIGURE1A_GAMMAS
        .iter()
        .flat_map(|&gamma| {
            (0..=steps).map(move |i| {
                let r = 1.0 + 0.5 * f64::from(i);
                KStarPoint {
                    gamma,
                    r,
                    k_star: optimal_k_for(gamma, r).k_star,
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub k: u32,
    pub cost: f64,
}

/// `C(k)` for `k = 1..=`[`FIGURE1B_K_MAX`] at `lambda1 = 1, lambda2 = 9,
/// gamma = 0.8`.
pub fn figure1b() -> Result<Vec<CostPoint>> {
    let params = ModelParams::new(1.0, 9.0, 0.8)?;
    Ok(crate::cyclic::cost_curve(&params, FIGURE1B_K_MAX)?
        .into_iter()
        .map(|(k, cost)| CostPoint { k, cost })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_halves_go_up() {
        assert_eq!(fmt2(10.625), "10.63");
        assert_eq!(fmt2(10.625 - 1e-13), "10.63");
        assert_eq!(fmt2(10.6249), "10.62");
        assert_eq!(fmt2(46.2018), "46.20");
        assert_eq!(fmt2(-1.005), "-1.01");
    }

    #[test]
    fn gap_definition() {
        assert!((gap_percent(5.0, 4.617) - 8.295).abs() < 1e-3);
    }

    #[test]
    fn grid_order() {
        let g = table1_grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], (0.6, 1));
        assert_eq!(g[7], (0.8, 9));
    }

    #[test]
    fn closed_form_row_example() {
        let row = closed_form_row(0.8, 9).unwrap();
        assert_eq!(row.k_star, 4);
        assert_eq!(fmt2(row.c1), "52.22");
        assert_eq!(fmt2(row.cr), "49.07");
        assert_eq!(fmt2(row.ck_star), "46.20");
    }

    #[test]
    fn figure_data() {
        let a = figure1a();
        assert!(a.contains(&KStarPoint { gamma: 0.99, r: 9.0, k_star: 3 }));
        for g in FIGURE1A_GAMMAS {
            assert!(a.contains(&KStarPoint { gamma: g, r: 1.0, k_star: 1 }));
        }
        let b = figure1b().unwrap();
        let min = b.iter().min_by(|x, y| x.cost.partial_cmp(&y.cost).unwrap()).unwrap();
        assert_eq!(min.k, 4);
        assert_eq!(fmt2(min.cost), "46.20");
    }
}

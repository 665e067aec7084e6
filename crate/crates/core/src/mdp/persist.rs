//! Versioned JSON files for solved value tables.
//!
//! ```text
//! {
//!   "format": "batchq-value-table",
//!   "version": 1,
//!   "lambda1": .., "lambda2": .., "gamma": ..,      normalised, lambda1 <= lambda2
//!   "xmax": .., "epsilon": .., "tail_cutoff": .., "max_sweeps": ..,
//!   "iterations": .., "sup_delta": ..,
//!   "values": [V(0,0), V(0,1), .., V(0,xmax), V(1,0), ..],   row-major, x major
//!   "actions": [1, 2, ..]                                    same layout, 1 = serve Q1
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{solve, SolverConfig, ValueTable};
use crate::error::{Error, Result};
use crate::model::{Action, ModelParams};

pub const FORMAT_NAME: &str = "batchq-value-table";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TableFile {
    format: String,
    version: u32,
    lambda1: f64,
    lambda2: f64,
    gamma: f64,
    xmax: usize,
    epsilon: f64,
    tail_cutoff: f64,
    max_sweeps: usize,
    iterations: usize,
    sup_delta: f64,
    values: Vec<f64>,
    actions: Vec<u8>,
}

pub fn save_table(table: &ValueTable, path: &Path) -> Result<()> {
    let p = table.params();
    let c = table.config();
    let file = TableFile {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        lambda1: p.lambda1(),
        lambda2: p.lambda2(),
        gamma: p.gamma(),
        xmax: c.xmax,
        epsilon: c.epsilon,
        tail_cutoff: c.tail_cutoff,
        max_sweeps: c.max_sweeps,
        iterations: table.iterations(),
        sup_delta: table.sup_delta(),
        values: table.values().to_vec(),
        actions: table
            .actions()
            .iter()
            .map(|a| match a {
                Action::ServeQ1 => 1,
                Action::ServeQ2 => 2,
            })
            .collect(),
    };
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&file)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<ValueTable> {
    let file: TableFile = serde_json::from_slice(&fs::read(path)?)?;
    if file.format != FORMAT_NAME {
        return Err(Error::TableFormat(format!("unknown format tag {:?}", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::TableFormat(format!(
            "unsupported version {} (expected {FORMAT_VERSION})",
            file.version
        )));
    }
    let n = file.xmax + 1;
    if file.values.len() != n * n || file.actions.len() != n * n {
        return Err(Error::TableFormat(format!("grid size does not match xmax = {}", file.xmax)));
    }
    let actions = file
        .actions
        .iter()
        .map(|&a| match a {
            1 => Ok(Action::ServeQ1),
            2 => Ok(Action::ServeQ2),
            other => Err(Error::TableFormat(format!("bad action code {other}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams::new(file.lambda1, file.lambda2, file.gamma)?;
    let config = SolverConfig {
        xmax: file.xmax,
        epsilon: file.epsilon,
        tail_cutoff: file.tail_cutoff,
        max_sweeps: file.max_sweeps,
        execution: Default::default(),
    };
    Ok(ValueTable::from_parts(
        params,
        config,
        file.values,
        actions,
        file.iterations,
        file.sup_delta,
    ))
}

/// File name keyed by `(lambda1, lambda2, gamma, xmax, epsilon)`.
pub fn cache_file_name(params: &ModelParams, config: &SolverConfig) -> String {
    format!(
        "vt_l1={}_l2={}_g={}_x={}_e={}.json",
        params.lambda1(),
        params.lambda2(),
        params.gamma(),
        config.xmax,
        config.epsilon
    )
}

/// Loads the cached table for this key from `cache_dir`, or solves and
/// writes it. The flag is `true` on a cache hit.
pub fn load_or_solve(
    params: &ModelParams,
    config: &SolverConfig,
    cache_dir: Option<&Path>,
) -> Result<(ValueTable, bool)> {
    let Some(dir) = cache_dir else {
        return Ok((solve(params, config)?, false));
    };
    let path: PathBuf = dir.join(cache_file_name(params, config));
    if path.exists() {
        let table = load_table(&path)?;
        let same = table.params().lambda1() == params.lambda1()
            && table.params().lambda2() == params.lambda2()
            && table.params().gamma() == params.gamma()
            && table.config().xmax == config.xmax
            && table.config().epsilon == config.epsilon
            && table.config().tail_cutoff == config.tail_cutoff;
        if same {
            return Ok((table, true));
        }
    }
    let table = solve(params, config)?;
    fs::create_dir_all(dir)?;
    save_table(&table, &path)?;
    Ok((table, false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let p = ModelParams::new(1.0, 3.0, 0.7).unwrap();
        let cfg = SolverConfig::for_params(&p).with_xmax(30);
        let table = solve(&p, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        save_table(&table, &path).unwrap();
        let back = load_table(&path).unwrap();
        assert_eq!(back.values(), table.values());
        assert_eq!(back.actions(), table.actions());
        assert_eq!(back.iterations(), table.iterations());
        assert_eq!(back.opt_cost().unwrap(), table.opt_cost().unwrap());
    }

    #[test]
    fn cache_hit_on_second_call() {
        let p = ModelParams::new(1.0, 2.0, 0.5).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let dir = tempfile::tempdir().unwrap();
        let (a, hit_a) = load_or_solve(&p, &cfg, Some(dir.path())).unwrap();
        let (b, hit_b) = load_or_solve(&p, &cfg, Some(dir.path())).unwrap();
        assert!(!hit_a && hit_b);
        assert_eq!(a.values(), b.values());
        assert_eq!(cache_file_name(&p, &cfg), "vt_l1=1_l2=2_g=0.5_x=80_e=0.001.json");
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(
            &path,
            r#"{"format":"other","version":1,"lambda1":1,"lambda2":1,"gamma":0.5,"xmax":0,
               "epsilon":0.1,"tail_cutoff":1e-12,"max_sweeps":1,"iterations":1,"sup_delta":0,
               "values":[0],"actions":[1]}"#,
        )
        .unwrap();
        assert!(matches!(load_table(&path), Err(Error::TableFormat(_))));
        fs::write(&path, "{").unwrap();
        assert!(matches!(load_table(&path), Err(Error::Json(_))));
    }
}

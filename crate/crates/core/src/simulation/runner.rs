//! Monte Carlo replications of the simulation design and their summaries.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dgp::{apply_two_phase, generate_complete, true_ate};
use crate::error::DataError;
use crate::estimators::{estimate_methods, EstimateOptions};
use crate::types::{Estimand, MethodTag, ScenarioConfig};

/// Seed of replication `rep` under `master_seed`. Depends only on the pair,
/// so serial and parallel runs draw the same data.
pub fn rep_seed(master_seed: u64, rep: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update((rep as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One method's ATE estimate in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEstimate {
    pub method: MethodTag,
    pub point: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Set when the method failed in this replication.
    pub error: Option<String>,
}

impl MethodEstimate {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.point.is_some_and(f64::is_finite) && self.se.is_some_and(f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub n: usize,
    pub rho: f64,
    pub rep: usize,
    pub seed: u64,
    pub estimates: Vec<MethodEstimate>,
}

impl ReplicationResult {
    pub fn get(&self, m: MethodTag) -> Option<&MethodEstimate> {
        self.estimates.iter().find(|e| e.method == m)
    }
}

/// Draws one dataset for `config` and runs every method in the simulation
/// roster on it. Method failures are recorded, not propagated.
pub fn run_replication(config: &ScenarioConfig, rep: usize) -> ReplicationResult {
    let seed = rep_seed(config.master_seed, rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complete = generate_complete(&config.dgp, config.n, &mut rng);
    let d = apply_two_phase(&complete, config.rho, &config.dgp.theta, &mut rng);
    debug_assert!(d.rows().iter().all(|o| o.r || (o.a.is_none() && o.y.is_none())));
    let oracle = complete.fully_observed();
    let opts = EstimateOptions::from_config(config, rng.random());
    let estimates = estimate_methods(&d, Some(&oracle), &MethodTag::SIMULATION_ROSTER, &opts)
        .into_iter()
        .map(|(method, r)| match r {
            Ok(rs) => {
                let ate = rs.iter().find(|e| e.estimand == Estimand::Ate).expect("ate present");
                MethodEstimate {
                    method,
                    point: Some(ate.point),
                    se: Some(ate.se),
                    ci_low: Some(ate.ci_low),
                    ci_high: Some(ate.ci_high),
                    error: None,
                }
            }
            Err(e) => {
                log::debug!("rep {rep}: {method} failed: {e}");
                MethodEstimate { method, point: None, se: None, ci_low: None, ci_high: None, error: Some(e.to_string()) }
            }
        })
        .collect();
    ReplicationResult { n: config.n, rho: config.rho, rep, seed, estimates }
}

/// Monte Carlo performance of one method in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub method: MethodTag,
    pub n: usize,
    pub rho: f64,
    pub pct_bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_se: f64,
    pub reps_completed: usize,
}

/// Percent bias, RMSE, interval coverage and mean standard error of the
/// successful replications of each roster method, in roster order.
pub fn summarize(n: usize, rho: f64, truth: f64, reps: &[ReplicationResult]) -> Vec<MonteCarloSummary> {
    MethodTag::SIMULATION_ROSTER
        .iter()
        .map(|&m| {
            let ok: Vec<&MethodEstimate> = reps.iter().filter_map(|r| r.get(m)).filter(|e| e.ok()).collect();
            let k = ok.len() as f64;
            let points: Vec<f64> = ok.iter().map(|e| e.point.expect("ok")).collect();
            let mean_est = points.iter().sum::<f64>() / k;
            let mse = points.iter().map(|p| (p - truth) * (p - truth)).sum::<f64>() / k;
            let covered =
                ok.iter().filter(|e| e.ci_low.expect("ok") <= truth && truth <= e.ci_high.expect("ok")).count();
            MonteCarloSummary {
                method: m,
                n,
                rho,
                pct_bias: 100.0 * (mean_est - truth) / truth,
                rmse: mse.sqrt(),
                coverage: covered as f64 / k,
                mean_se: ok.iter().map(|e| e.se.expect("ok")).sum::<f64>() / k,
                reps_completed: ok.len(),
            }
        })
        .collect()
}

/// Replications of one scenario, run in parallel on the current rayon
/// pool and returned in replication order.
pub fn run_scenario(config: &ScenarioConfig) -> Vec<ReplicationResult> {
    (0..config.reps).into_par_iter().map(|rep| run_replication(config, rep)).collect()
}

/// Runs each scenario and summarises it against the closed-form ATE.
pub fn run_grid(configs: &[ScenarioConfig]) -> (Vec<MonteCarloSummary>, Vec<ReplicationResult>) {
    let mut summary = Vec::new();
    let mut raw = Vec::new();
    for c in configs {
        let reps = run_scenario(c);
        summary.extend(summarize(c.n, c.rho, true_ate(&c.dgp), &reps));
        raw.extend(reps);
    }
    (summary, raw)
}

pub fn write_summary_csv<W: Write>(rows: &[MonteCarloSummary], w: W) -> Result<(), DataError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| DataError::Io(e.to_string()))?;
    }
    wr.flush().map_err(|e| DataError::Io(e.to_string()))
}

pub fn read_summary_csv<R: Read>(r: R) -> Result<Vec<MonteCarloSummary>, DataError> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| DataError::BadField { row: i + 1, message: e.to_string() }))
        .collect()
}

/// One JSON object per replication.
pub fn write_replications_jsonl<W: Write>(reps: &[ReplicationResult], mut w: W) -> Result<(), DataError> {
    for r in reps {
        let line = serde_json::to_string(r).map_err(|e| DataError::Io(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| DataError::Io(e.to_string()))?;
    }
    Ok(())
}

//! Monte Carlo and ergodic verification experiments.
//!
//! Every experiment takes an [`ExperimentConfig`] and returns a
//! [`StatReport`]. Replicas run in parallel with seeds derived from the
//! replica index; aggregation is sequential in index order, so reports do
//! not depend on the number of worker threads.

pub mod compare;
pub mod config;
pub mod embed;
pub mod ergodic;
pub mod report;
pub mod stats;
pub mod tail;

use rayon::prelude::*;

use crate::embedding::{stream_t_star, ChargeTable, EmbeddingResult, Mode};
use crate::error::{Error, Result};
use crate::measure::MeasurePair;
use crate::rng;

pub use compare::{run_cost_compare, run_excursion_cost};
pub use config::{ComparatorKind, Experiment, ExperimentConfig, HorizonPolicy, Thresholds};
pub use embed::{run_embed_law, run_unbiased_test};
pub use ergodic::run_ergodic;
pub use report::StatReport;
pub use tail::run_tail;

/// Flag set when too many replicas are censored under the fixed policy.
pub const FLAG_CENSORING: &str = "censoring_excessive";
/// Flag set when the doubling policy reached `max_horizon` with too many
/// replicas still censored.
pub const FLAG_HORIZON_EXHAUSTED: &str = "horizon_exhausted";

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<StatReport> {
    match cfg.experiment {
        Experiment::EmbedLaw => run_embed_law(cfg),
        Experiment::Unbiased => run_unbiased_test(cfg),
        Experiment::CostCompare => run_cost_compare(cfg),
        Experiment::ExcursionCost => run_excursion_cost(cfg),
        Experiment::Ergodic => run_ergodic(cfg),
        Experiment::Tail => run_tail(cfg),
    }
}

/// One embedding replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub index: u64,
    pub seed: u64,
    pub start: i64,
    pub result: EmbeddingResult,
    /// Sites at `T* - w ..= T* + w` when a window was requested.
    pub window: Option<Vec<i64>>,
    /// Forward horizon of the last attempt.
    pub horizon: u64,
}

/// Runs `cfg.replicas` embeddings. Under the doubling policy a censored
/// replica is rerun with twice the horizon until `max_horizon`; the
/// increments are addressed by step, so reruns extend the same path.
pub fn run_replicas(cfg: &ExperimentConfig, pair: &MeasurePair, mode: Mode, window: usize) -> Result<Vec<Replica>> {
    let table = ChargeTable::new(&pair.mu_tilde, &pair.nu_tilde);
    let dt = cfg.dt();
    let max = cfg.max_horizon();
    (0..cfg.replicas)
        .into_par_iter()
        .map(|index| {
            let seed = rng::replica_seed(cfg.walk.seed, index);
            let mut horizon = cfg.walk.horizon_fwd;
            loop {
                let out = stream_t_star(seed, pair, &table, mode, horizon, dt, window)?;
                if out.result.censored && horizon < max {
                    horizon = horizon.saturating_mul(2).min(max);
                    continue;
                }
                return Ok(Replica { index, seed, start: out.start, result: out.result, window: out.window, horizon });
            }
        })
        .collect()
}

/// Fills the replica counts and censoring flags of a report.
pub fn tally(report: &mut StatReport, cfg: &ExperimentConfig, replicas: &[Replica]) {
    let censored = replicas.iter().filter(|r| r.result.censored).count() as u64;
    let total = replicas.len() as u64;
    report.replicas = report::Counts { total, completed: total - censored, censored };
    report.horizon = replicas.iter().map(|r| r.horizon).max().unwrap_or(cfg.walk.horizon_fwd);
    if total > 0 && censored as f64 > cfg.thresholds.censor_fraction * total as f64 {
        report.flag(match cfg.horizon_policy {
            HorizonPolicy::Fixed => FLAG_CENSORING,
            HorizonPolicy::Doubling => FLAG_HORIZON_EXHAUSTED,
        });
    }
}

/// Exact mode with unit atoms: the setting in which unit-mass slots can be
/// rematched one to one.
pub(crate) fn require_unit_exact(cfg: &ExperimentConfig, pair: &MeasurePair) -> Result<Mode> {
    let mode = cfg.mode(pair);
    if mode != Mode::Exact || !pair.unit_atoms() {
        return Err(Error::Precondition(
            "this experiment needs exact mode with unit atoms (every atom of mu and nu equal to 1/q)".into(),
        ));
    }
    Ok(mode)
}

pub(crate) fn require_exact(cfg: &ExperimentConfig, pair: &MeasurePair) -> Result<Mode> {
    let mode = cfg.mode(pair);
    if mode != Mode::Exact || !pair.exact_mode_ok() {
        return Err(Error::Precondition("this experiment needs exact mode (nu atoms of mass 1/q)".into()));
    }
    Ok(mode)
}

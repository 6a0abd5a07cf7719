//! Tail of `T*`: censored survival curve, fitted exponent, partial moments.

use super::config::ExperimentConfig;
use super::report::{fmt, StatReport, Table};
use super::stats::{bootstrap_ci, kaplan_meier, linear_fit, Observation};
use super::{run_replicas, tally};
use crate::error::Result;

/// Moments `E T^alpha` are infinite for every unbiased embedding when
/// `alpha >= 1/4` and finite for `T*` below.
pub const CRITICAL_MOMENT: f64 = 0.25;

/// Geometric grid `dt * 2^(k/4)` up to `top`.
pub fn geometric_grid(dt: f64, top: f64) -> Vec<f64> {
    (0..).map(|k| dt * 2f64.powf(f64::from(k) / 4.0)).take_while(|&t| t <= top * (1.0 + 1e-12)).collect()
}

/// Exponent `-d log S / d log t` fitted over `[top / 10, top]`.
fn fit_exponent(obs: &[Observation], fit_grid: &[f64]) -> Option<f64> {
    let s = kaplan_meier(obs, fit_grid);
    let (x, y): (Vec<f64>, Vec<f64>) = fit_grid.iter().zip(&s).filter(|(_, s)| **s > 0.0).map(|(t, s)| (t.ln(), s.ln())).unzip();
    if x.len() < 3 {
        return None;
    }
    linear_fit(&x, &y).map(|(slope, _)| -slope)
}

pub fn run_tail(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = cfg.mode(&pair);
    let reps = run_replicas(cfg, &pair, mode, 0)?;
    let mut report = StatReport::new("tail", cfg.walk.seed);
    tally(&mut report, cfg, &reps);
    let dt = cfg.dt();
    let obs: Vec<Observation> =
        reps.iter().map(|r| Observation { time: r.result.t_star_time, observed: !r.result.censored }).collect();

    // Beyond the largest horizon every replica still at risk is censored.
    let top = report.horizon as f64 * dt;
    let grid = geometric_grid(dt, top);
    let surv = kaplan_meier(&obs, &grid);
    let fit_grid: Vec<f64> = grid.iter().copied().filter(|&t| t >= top / 10.0).collect();
    let mut table = Table::new("survival", &["t", "survival", "in_fit"]);
    for (t, s) in grid.iter().zip(&surv) {
        table.push([fmt(*t), fmt(*s), (*t >= top / 10.0).to_string()]);
    }
    report.tables.push(table);
    let empty_cells = grid.iter().zip(&surv).filter(|(_, s)| **s == 0.0).count();
    if empty_cells > 0 {
        report.flag("empty_grid_cells_excluded");
    }

    let [lo, hi] = cfg.exponent_range;
    match fit_exponent(&obs, &fit_grid) {
        Some(e) => {
            report.estimate("tail_exponent", e, None);
            let ci = bootstrap_ci(&obs, cfg.bootstrap, 0.95, cfg.walk.seed, |d| fit_exponent(d, &fit_grid));
            if let Some((a, b)) = ci {
                report.statistic("tail_exponent_ci_low", a);
                report.statistic("tail_exponent_ci_high", b);
            }
            report.check("tail_exponent", (lo..=hi).contains(&e), format!("fitted {e:.4}, accepted [{lo}, {hi}]"));
        }
        None => report.check("tail_exponent", false, "fewer than 3 grid points with positive survival in the fit range"),
    }

    let mut checkpoints: Vec<u64> = cfg.checkpoints.iter().copied().filter(|&c| c >= 1 && c <= cfg.replicas).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if checkpoints.len() < cfg.checkpoints.len() {
        report.flag("checkpoints_beyond_replicas");
    }
    // Checkpoint `c` truncates at a horizon proportional to `c`, reaching
    // the largest horizon at the last checkpoint: the truncation follows
    // the sample, as an untruncated run's sample maximum would. Means at the
    // common largest horizon are reported alongside.
    let c_max = checkpoints.last().copied().unwrap_or(1) as f64;
    let mut table = Table::new(
        "partial_means",
        &["moment", "checkpoint", "horizon", "mean", "censored_in_prefix", "mean_at_max_horizon"],
    );
    for &alpha in &cfg.moments {
        let mut means = Vec::new();
        for &c in &checkpoints {
            let h = ((report.horizon as f64 * c as f64 / c_max).floor() as u64).max(cfg.walk.horizon_fwd.min(report.horizon));
            let cut = h as f64 * dt;
            let prefix = &obs[..c as usize];
            let mean = prefix.iter().map(|o| o.time.min(cut).powf(alpha)).sum::<f64>() / c as f64;
            let fixed = prefix.iter().map(|o| o.time.powf(alpha)).sum::<f64>() / c as f64;
            let censored = prefix.iter().filter(|o| !o.observed || o.time > cut).count();
            report.estimate(format!("partial_mean[{alpha},{c}]"), mean, None);
            report.estimate(format!("partial_mean_max_horizon[{alpha},{c}]"), fixed, None);
            table.push([alpha.to_string(), c.to_string(), h.to_string(), fmt(mean), censored.to_string(), fmt(fixed)]);
            means.push(mean);
        }
        if means.len() < 2 {
            continue;
        }
        if alpha >= CRITICAL_MOMENT {
            let rising = means.windows(2).all(|w| w[1] > w[0]);
            report.check(format!("partial_mean_drift[{alpha}]"), rising, format!("partial means {means:?}"));
        } else {
            let (a, b) = (means[means.len() - 2], means[means.len() - 1]);
            let change = (b - a).abs() / a.abs();
            report.check(
                format!("partial_mean_stable[{alpha}]"),
                change < cfg.thresholds.rel_gap,
                format!("relative change {change:.4} over the last checkpoint"),
            );
        }
    }
    report.notes.push("values beyond a checkpoint horizon enter partial means at that horizon (a lower bound)".into());
    report.tables.push(table);
    Ok(report)
}

//! Time averages of `psi(tau*(s) - s)` along one long path against the
//! ensemble mean of `psi(T*)`.
//!
//! The path is scanned once from `S^{-r}` to past `S^{r}` (levels of the
//! `mu + nu` local time, `r` in units of mass). A stack of open `mu_tilde`
//! slots yields `tau*` for every source: a `nu_tilde` unit closes the most
//! recent open slot, and a source is resolved when its last slot closes.

use super::config::{ExperimentConfig, HorizonPolicy};
use super::report::{fmt, StatReport, Table};
use super::stats::mean_se;
use super::{require_exact, run_replicas, tally};
use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, MeasurePair};
use crate::rng;
use crate::walk::{draw_start, WindowVisits};

/// A `mu_tilde`-charged step and the step where its charge is balanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Source {
    pub time: i64,
    pub units: u64,
    /// `mu + nu` local time, in units, between step 0 and `time` inclusive.
    pub level: u64,
    pub tau: Option<i64>,
}

/// Sources on both sides of step 0 after one sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    /// Sources at steps `>= 0`, in time order.
    pub forward: Vec<Source>,
    /// Sources at steps `<= 0`, in reverse time order (nearest first).
    pub backward: Vec<Source>,
    /// Last forward step examined; unresolved sources have `tau*` beyond it.
    pub end: i64,
    /// Units of local time reached on each side (capped by the horizon).
    pub reached_fwd: u64,
    pub reached_bwd: u64,
}

fn support_span(m: &DiscreteMeasure) -> (i64, i64) {
    m.span().unwrap_or((0, 0))
}

/// Scans the two-sided walk of `seed` (start drawn from `mu`) until the
/// `mu + nu` local time on each side exceeds `units` (forward: `extend`
/// times that, to resolve late sources) or the horizon is hit.
pub fn sweep(seed: u64, pair: &MeasurePair, units: u64, extend: u64, horizon: u64) -> Sweep {
    let sum = pair.sum();
    let (lo, hi) = support_span(&sum);
    let start = draw_start(seed, &pair.mu);

    let mut back = Vec::new();
    let mut reached_bwd = sum.units_at(start);
    for (m, x) in WindowVisits::new(seed, rng::STREAM_BWD, start, lo, hi, horizon) {
        if reached_bwd > units {
            break;
        }
        reached_bwd += sum.units_at(x);
        back.push((-(m as i64), x));
    }
    let mut events: Vec<(i64, i64)> = back.into_iter().rev().collect();
    events.push((0, start));
    let mut reached_fwd = sum.units_at(start);
    let mut end = 0;
    let fwd = WindowVisits::new(seed, rng::STREAM_FWD, start, lo, hi, horizon);
    let mut fwd_steps = 0;
    for (n, x) in fwd {
        if reached_fwd > units * extend {
            break;
        }
        reached_fwd += sum.units_at(x);
        events.push((n as i64, x));
        fwd_steps = n;
    }
    if reached_fwd <= units * extend {
        end = horizon as i64;
    } else if fwd_steps > 0 {
        end = fwd_steps as i64;
    }

    // Sweep left to right.
    let (mu, nu) = (&pair.mu_tilde, &pair.nu_tilde);
    let mut sources: Vec<Source> = Vec::new();
    let mut open: Vec<(usize, u64)> = Vec::new();
    for &(t, x) in &events {
        for _ in 0..nu.units_at(x) {
            if let Some(top) = open.last_mut() {
                top.1 -= 1;
                if top.1 == 0 {
                    sources[top.0].tau = Some(t);
                    open.pop();
                }
            }
        }
        let a = mu.units_at(x);
        if a > 0 {
            open.push((sources.len(), a));
            sources.push(Source { time: t, units: a, level: 0, tau: None });
        }
    }

    // Local-time levels measured outward from step 0.
    let zero = sources.partition_point(|s| s.time < 0);
    let mut backward: Vec<Source> = sources[..zero].iter().rev().copied().collect();
    let mut forward: Vec<Source> = sources[zero..].to_vec();
    if let Some(s0) = forward.first().filter(|s| s.time == 0) {
        backward.insert(0, *s0);
    }
    let mut level = 0;
    let mut k = 0;
    for &(t, x) in events.iter().filter(|e| e.0 >= 0) {
        level += sum.units_at(x);
        while k < forward.len() && forward[k].time == t {
            forward[k].level = level;
            k += 1;
        }
    }
    let mut level = 0;
    let mut k = 0;
    for &(t, x) in events.iter().rev().filter(|e| e.0 <= 0) {
        level += sum.units_at(x);
        while k < backward.len() && backward[k].time == t {
            backward[k].level = level;
            k += 1;
        }
    }
    Sweep { forward, backward, end, reached_fwd, reached_bwd }
}

/// Time average at level `units` with block standard error.
struct Average {
    value: f64,
    se: f64,
    /// Upper bound `sup(psi) * mu_tilde mass / r` through the identity.
    mu_mass: f64,
}

fn average(sources: &[Source], units: u64, q: u64, blocks: u64, contrib: impl Fn(&Source) -> f64) -> Average {
    let r = units as f64 / q as f64;
    let mut block_sums = vec![0.0; blocks as usize];
    let mut mu_mass = 0.0;
    for s in sources.iter().filter(|s| s.level <= units) {
        let b = (((s.level.max(1) - 1) * blocks) / units.max(1)) as usize;
        block_sums[b.min(blocks as usize - 1)] += contrib(s);
        mu_mass += s.units as f64 / q as f64;
    }
    let block_r = r / blocks as f64;
    let values: Vec<f64> = block_sums.iter().map(|v| v / block_r).collect();
    let (value, se) = mean_se(&values);
    Average { value, se, mu_mass: mu_mass / r }
}

pub fn run_ergodic(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = require_exact(cfg, &pair)?;
    if cfg.r_grid.is_empty() {
        return Err(Error::Config("ergodic runs need a non-empty r_grid".into()));
    }
    let q = pair.denominator();
    let dt = cfg.dt();
    let mut grid: Vec<u64> = cfg.r_grid.iter().map(|r| (r * q as f64).ceil() as u64).collect();
    grid.sort_unstable();
    grid.dedup();
    let r_max = *grid.last().expect("non-empty grid");
    let seed = cfg.walk.seed;
    let sw = sweep(seed, &pair, r_max, 2, cfg.max_horizon());

    let mut report = StatReport::new("ergodic", seed);
    let attained = sw.reached_fwd.min(sw.reached_bwd);
    let kept: Vec<u64> = grid.iter().copied().filter(|&u| u < attained).collect();
    if kept.len() < grid.len() {
        report.flag("grid_truncated");
    }
    let unresolved = sw.forward.iter().chain(&sw.backward).filter(|s| s.level <= r_max && s.tau.is_none()).count();
    report.statistic("unresolved_sources", unresolved as f64);
    report.statistic("sweep_end_step", sw.end as f64);

    // Independent ensemble estimate of E psi(T*), at the fixed horizon
    // `walk.horizon_fwd`; `max_horizon` only bounds the long sweep.
    let mut ens = cfg.clone();
    ens.horizon_policy = HorizonPolicy::Fixed;
    let reps = run_replicas(&ens, &pair, mode, 0)?;
    tally(&mut report, &ens, &reps);
    report.horizon = report.horizon.max(sw.end.max(0) as u64);

    let mut table = Table::new(
        "ergodic",
        &["gauge", "r", "forward", "se_forward", "backward", "se_backward", "half_ensemble", "se_half", "rel_gap_forward_backward"],
    );
    let sigma = cfg.thresholds.sigma;
    for g in &cfg.gauges {
        let label = g.label();
        let psi: Vec<f64> = reps.iter().map(|r| g.apply(r.result.t_star_time)).collect();
        let (m, se) = mean_se(&psi);
        let (half, half_se) = (m / 2.0, se / 2.0);
        report.estimate(format!("half_ensemble[{label}]"), half, Some(half_se));
        let contrib = |s: &Source| {
            let gap = s.tau.unwrap_or(sw.end + 1) - s.time;
            s.units as f64 / q as f64 * g.apply(gap as f64 * dt)
        };
        let mut last = None;
        let mut cap_ok = true;
        for &u in &kept {
            let f = average(&sw.forward, u, q, cfg.blocks, contrib);
            let b = average(&sw.backward, u, q, cfg.blocks, contrib);
            if let Some(c) = g.sup() {
                cap_ok &= f.value <= c * f.mu_mass + 1e-12 && b.value <= c * b.mu_mass + 1e-12;
            }
            let gap = (f.value - b.value).abs() / half;
            table.push([
                label.clone(),
                fmt(u as f64 / q as f64),
                fmt(f.value),
                fmt(f.se),
                fmt(b.value),
                fmt(b.se),
                fmt(half),
                fmt(half_se),
                fmt(gap),
            ]);
            last = Some((u, f, b, gap));
        }
        let Some((u, f, b, gap)) = last else {
            report.check(format!("ergodic[{label}]"), false, "no grid level was attained");
            continue;
        };
        let r = u as f64 / q as f64;
        report.estimate(format!("forward[{label}]"), f.value, Some(f.se));
        report.estimate(format!("backward[{label}]"), b.value, Some(b.se));
        for (side, avg) in [("forward", &f), ("backward", &b)] {
            let combined = (avg.se.powi(2) + half_se.powi(2)).sqrt();
            let z = (avg.value - half) / combined;
            report.statistic(format!("z_{side}[{label}]"), z);
            report.check(
                format!("{side}_vs_ensemble[{label}]"),
                z.abs() <= sigma,
                format!("r = {r}: {:.6} vs {half:.6} ({z:.2} combined se)", avg.value),
            );
        }
        report.check(
            format!("forward_backward_gap[{label}]"),
            gap <= cfg.thresholds.rel_gap,
            format!("relative gap {gap:.4} at r = {r}"),
        );
        if let Some(c) = g.sup() {
            let limit_ok = f.value <= c / 2.0 + sigma * f.se && b.value <= c / 2.0 + sigma * b.se;
            report.check(format!("cap_bound[{label}]"), cap_ok && limit_ok, format!("averages against sup/2 = {}", c / 2.0));
        }
    }
    report.tables.push(table);
    Ok(report)
}

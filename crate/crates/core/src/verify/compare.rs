//! Per-excursion comparators: alternative forward-looking balancing
//! rematchings of the unit-mass slots of the excursion `[0, T*]`.

use rand::Rng;
use rayon::prelude::*;

use super::config::{ComparatorKind, ExperimentConfig};
use super::report::{fmt, StatReport, Table};
use super::stats::mean_se;
use super::{require_unit_exact, run_replicas, tally, Replica};
use crate::alloc::PointConfig;
use crate::error::Result;
use crate::gauge::Gauge;
use crate::measure::MeasurePair;
use crate::rng;
use crate::transport::sample_feasible_matrix;
use crate::walk::WindowVisits;

const COMPARATOR_CLASS: &str =
    "per-excursion forward-looking balancing rematchings of unit-mass slots (stable, fifo, random); \
     costs are per-excursion sums, the pathwise form of the expectation inequality";

/// Unit-mass slots of one excursion, as step indices in increasing order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExcursionTokens {
    pub sources: Vec<u64>,
    pub targets: Vec<u64>,
}

/// Slots of `[0, T*]` for a replica: `mu_tilde` units are sources,
/// `nu_tilde` units targets. Empty when `T* = 0`.
pub fn excursion_tokens(seed: u64, pair: &MeasurePair, start: i64, t_star: u64) -> ExcursionTokens {
    let mut tok = ExcursionTokens::default();
    if t_star == 0 {
        return tok;
    }
    let (mu, nu) = (&pair.mu_tilde, &pair.nu_tilde);
    let span = match (mu.span(), nu.span()) {
        (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
        (a, b) => a.or(b).unwrap_or((0, 0)),
    };
    let mut add = |n: u64, x: i64| {
        tok.sources.extend(std::iter::repeat_n(n, mu.units_at(x) as usize));
        tok.targets.extend(std::iter::repeat_n(n, nu.units_at(x) as usize));
    };
    add(0, start);
    for (n, x) in WindowVisits::new(seed, rng::STREAM_FWD, start, span.0, span.1, t_star) {
        add(n, x);
    }
    tok
}

/// `m[i] = j`: source `i` is sent to target `j`.
pub type Pairing = Vec<usize>;

/// Last-in first-out matching, which is `tau*` on unit slots.
pub fn stable_pairs(tok: &ExcursionTokens) -> Pairing {
    let mut m = vec![usize::MAX; tok.sources.len()];
    let mut open = Vec::new();
    let mut i = 0;
    for (j, &t) in tok.targets.iter().enumerate() {
        while i < tok.sources.len() && tok.sources[i] < t {
            open.push(i);
            i += 1;
        }
        if let Some(s) = open.pop() {
            m[s] = j;
        }
    }
    m
}

/// First-in first-out: the `k`-th source goes to the `k`-th target.
pub fn fifo_pairs(tok: &ExcursionTokens) -> Pairing {
    (0..tok.sources.len()).collect()
}

/// Each target, in time order, takes a uniformly chosen unmatched earlier source.
pub fn random_pairs<R: Rng>(tok: &ExcursionTokens, rng: &mut R) -> Pairing {
    let mut m = vec![usize::MAX; tok.sources.len()];
    let mut open = Vec::new();
    let mut i = 0;
    for (j, &t) in tok.targets.iter().enumerate() {
        while i < tok.sources.len() && tok.sources[i] < t {
            open.push(i);
            i += 1;
        }
        if !open.is_empty() {
            let k = rng.random_range(0..open.len());
            m[open.swap_remove(k)] = j;
        }
    }
    m
}

/// Bijection between sources and targets that never sends mass backwards.
pub fn is_feasible(tok: &ExcursionTokens, m: &Pairing) -> bool {
    if m.len() != tok.targets.len() {
        return false;
    }
    let mut seen = vec![false; tok.targets.len()];
    m.iter().enumerate().all(|(i, &j)| {
        j < seen.len() && !std::mem::replace(&mut seen[j], true) && tok.targets[j] > tok.sources[i]
    })
}

pub fn pairing_cost(tok: &ExcursionTokens, m: &Pairing, g: &Gauge, dt: f64, q: u64) -> f64 {
    m.iter().enumerate().map(|(i, &j)| g.apply((tok.targets[j] - tok.sources[i]) as f64 * dt)).sum::<f64>() / q as f64
}

/// Total gap in steps; what a linear gauge sees.
pub fn gap_sum(tok: &ExcursionTokens, m: &Pairing) -> u64 {
    m.iter().enumerate().map(|(i, &j)| tok.targets[j] - tok.sources[i]).sum()
}

fn comparator_pairs(kind: ComparatorKind, tok: &ExcursionTokens, seed: u64, slot: usize) -> Pairing {
    match kind {
        ComparatorKind::Stable => stable_pairs(tok),
        ComparatorKind::Fifo => fifo_pairs(tok),
        ComparatorKind::Random => random_pairs(tok, &mut rng::stream_rng(seed, rng::STREAM_AUX + 2 + slot as u64)),
    }
}

fn kind_name(kind: ComparatorKind) -> &'static str {
    match kind {
        ComparatorKind::Stable => "stable",
        ComparatorKind::Fifo => "fifo",
        ComparatorKind::Random => "random",
    }
}

struct PathCosts {
    stable: Vec<f64>,
    stable_gap: u64,
    /// Per comparator: `None` when the construction was infeasible.
    comps: Vec<Option<(Vec<f64>, u64)>>,
    psi_t_star: Vec<f64>,
}

/// Paired comparison of per-excursion costs of `tau*` and each comparator
/// on the same paths, asserted pathwise for every gauge.
pub fn run_cost_compare(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = require_unit_exact(cfg, &pair)?;
    let reps = run_replicas(cfg, &pair, mode, 0)?;
    let mut report = StatReport::new("cost_compare", cfg.walk.seed);
    tally(&mut report, cfg, &reps);
    let (dt, q) = (cfg.dt(), pair.denominator());

    let paths: Vec<PathCosts> = reps
        .par_iter()
        .filter(|r| !r.result.censored)
        .map(|r| {
            let tok = excursion_tokens(r.seed, &pair, r.start, r.result.t_star_steps);
            let stable = stable_pairs(&tok);
            let costs = |m: &Pairing| cfg.gauges.iter().map(|g| pairing_cost(&tok, m, g, dt, q)).collect::<Vec<_>>();
            let comps = cfg
                .comparators
                .iter()
                .enumerate()
                .map(|(slot, &kind)| {
                    let m = comparator_pairs(kind, &tok, r.seed, slot);
                    is_feasible(&tok, &m).then(|| (costs(&m), gap_sum(&tok, &m)))
                })
                .collect();
            PathCosts {
                stable: costs(&stable),
                stable_gap: gap_sum(&tok, &stable),
                comps,
                psi_t_star: cfg.gauges.iter().map(|g| g.apply(r.result.t_star_time)).collect(),
            }
        })
        .collect();

    report.notes.push(format!("comparator class: {COMPARATOR_CLASS}"));
    report.statistic("paths", paths.len() as f64);
    let mut table = Table::new(
        "compare",
        &["gauge", "comparator", "paths", "skipped", "mean_stable", "se_stable", "mean_comparator", "se_comparator", "mean_diff", "se_diff", "t_stat", "min_diff", "violations"],
    );
    for (gi, g) in cfg.gauges.iter().enumerate() {
        let label = g.label();
        let stable: Vec<f64> = paths.iter().map(|p| p.stable[gi]).collect();
        let (ms, ses) = mean_se(&stable);
        report.estimate(format!("stable[{label}]"), ms, Some(ses));
        let (mt, set) = mean_se(&paths.iter().map(|p| p.psi_t_star[gi]).collect::<Vec<_>>());
        report.estimate(format!("psi_t_star[{label}]"), mt, Some(set));
    }
    let mut linear_mismatch = 0u64;
    for (slot, &kind) in cfg.comparators.iter().enumerate() {
        let name = kind_name(kind);
        let ok: Vec<&PathCosts> = paths.iter().filter(|p| p.comps[slot].is_some()).collect();
        let skipped = paths.len() - ok.len();
        report.statistic(format!("skipped[{name}]"), skipped as f64);
        linear_mismatch += ok.iter().filter(|p| p.comps[slot].as_ref().unwrap().1 != p.stable_gap).count() as u64;
        let mut total_violations = 0;
        for (gi, g) in cfg.gauges.iter().enumerate() {
            let label = g.label();
            let comp: Vec<f64> = ok.iter().map(|p| p.comps[slot].as_ref().unwrap().0[gi]).collect();
            let stable: Vec<f64> = ok.iter().map(|p| p.stable[gi]).collect();
            let diff: Vec<f64> = comp.iter().zip(&stable).map(|(c, s)| c - s).collect();
            let violations = diff
                .iter()
                .zip(&stable)
                .filter(|(d, s)| **d < -cfg.thresholds.cost_tol * s.abs().max(1.0))
                .count();
            total_violations += violations;
            let (ms, ses) = mean_se(&stable);
            let (mc, sec) = mean_se(&comp);
            let (md, sed) = mean_se(&diff);
            let t = if sed > 0.0 { md / sed } else { 0.0 };
            let min_diff = diff.iter().copied().fold(f64::INFINITY, f64::min);
            report.estimate(format!("comparator[{name},{label}]"), mc, Some(sec));
            report.estimate(format!("diff[{name},{label}]"), md, Some(sed));
            report.statistic(format!("t_stat[{name},{label}]"), t);
            report.statistic(format!("min_diff[{name},{label}]"), min_diff);
            report.check(
                format!("expectation_order[{name},{label}]"),
                ok.is_empty() || md >= -cfg.thresholds.cost_tol * ms.abs().max(1.0),
                format!("mean stable {ms:.6} vs {name} {mc:.6}"),
            );
            table.push([
                label.clone(),
                name.into(),
                ok.len().to_string(),
                skipped.to_string(),
                fmt(ms),
                fmt(ses),
                fmt(mc),
                fmt(sec),
                fmt(md),
                fmt(sed),
                fmt(t),
                fmt(min_diff),
                violations.to_string(),
            ]);
        }
        report.check(
            format!("pathwise[{name}]"),
            total_violations == 0,
            format!("{total_violations} path/gauge pairs where {name} undercuts tau*"),
        );
    }
    report.check("linear_identity", linear_mismatch == 0, format!("{linear_mismatch} paths where total gaps differ"));
    report.tables.push(table);
    Ok(report)
}

struct ExcursionMargins {
    tokens: usize,
    /// Per gauge: smallest margin over the random matrices, their sum, and
    /// the residual at the stable indicator.
    min: Vec<f64>,
    sum: Vec<f64>,
    equality: Vec<f64>,
    rhs: Vec<f64>,
    matrices: u64,
}

fn excursion_margins(cfg: &ExperimentConfig, pair: &MeasurePair, r: &Replica) -> Result<Option<ExcursionMargins>> {
    let tok = excursion_tokens(r.seed, pair, r.start, r.result.t_star_steps);
    let k = tok.sources.len();
    if k == 0 || k > cfg.max_tokens {
        return Ok(None);
    }
    let (dt, q) = (cfg.dt(), pair.denominator() as f64);
    let a: Vec<f64> = tok.sources.iter().rev().map(|&s| s as f64).collect();
    let b: Vec<f64> = tok.targets.iter().map(|&t| t as f64).collect();
    let pts = PointConfig::new(a, b)?;
    let stable = stable_pairs(&tok);
    let rhs: Vec<f64> = cfg.gauges.iter().map(|g| 2.0 * pairing_cost(&tok, &stable, g, dt, q as u64)).collect();
    let n = cfg.gauges.len();
    let mut out = ExcursionMargins {
        tokens: k,
        min: vec![f64::INFINITY; n],
        sum: vec![0.0; n],
        equality: vec![0.0; n],
        rhs: rhs.clone(),
        matrices: 0,
    };
    for d in 0..=cfg.comparator_draws {
        let perturb = if d == 0 { 0 } else { 4 * k };
        let pi = sample_feasible_matrix(&pts, k, rng::replica_seed(r.seed, d), perturb)?;
        for (gi, g) in cfg.gauges.iter().enumerate() {
            let margin = pi.window_cost(&pts, g, dt) / q - rhs[gi];
            if d == 0 {
                out.equality[gi] = margin.abs();
            } else {
                out.min[gi] = out.min[gi].min(margin);
                out.sum[gi] += margin;
            }
        }
        if d > 0 {
            out.matrices += 1;
        }
    }
    Ok(Some(out))
}

/// Both sides of the excursion inequality for random feasible transport
/// matrices on the slots of `[0, T*]`, with the double-count convention.
pub fn run_excursion_cost(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = require_unit_exact(cfg, &pair)?;
    let reps = run_replicas(cfg, &pair, mode, 0)?;
    let mut report = StatReport::new("excursion_cost", cfg.walk.seed);
    tally(&mut report, cfg, &reps);
    let evaluated: Vec<Option<ExcursionMargins>> = reps
        .par_iter()
        .filter(|r| !r.result.censored)
        .map(|r| excursion_margins(cfg, &pair, r))
        .collect::<Result<_>>()?;
    let done: Vec<&ExcursionMargins> = evaluated.iter().flatten().collect();
    let skipped = evaluated.len() - done.len();
    report.statistic("excursions", done.len() as f64);
    report.statistic("skipped", skipped as f64);
    report.statistic("single_slot_excursions", done.iter().filter(|e| e.tokens == 1).count() as f64);
    report.notes.push(format!(
        "excursions with no slots (T* = 0) or more than {} slots are skipped",
        cfg.max_tokens
    ));
    let mut table = Table::new("excursion_cost", &["gauge", "excursions", "matrices", "min_margin", "mean_margin", "max_equality_residual"]);
    let tol = cfg.thresholds.cost_tol;
    for (gi, g) in cfg.gauges.iter().enumerate() {
        let label = g.label();
        let matrices: u64 = done.iter().map(|e| e.matrices).sum();
        let min = done.iter().map(|e| e.min[gi]).fold(f64::INFINITY, f64::min);
        let mean = done.iter().map(|e| e.sum[gi]).sum::<f64>() / matrices.max(1) as f64;
        let eq = done.iter().map(|e| e.equality[gi]).fold(0.0, f64::max);
        let bad = done.iter().filter(|e| e.min[gi] < -tol * e.rhs[gi].max(1.0)).count();
        let eq_bad = done.iter().filter(|e| e.equality[gi] > tol * e.rhs[gi].max(1.0)).count();
        report.statistic(format!("min_margin[{label}]"), min);
        report.statistic(format!("mean_margin[{label}]"), mean);
        report.check(format!("margin[{label}]"), bad == 0, format!("{bad} excursions with a negative margin; min {min:.3e}"));
        report.check(format!("equality_at_tau_star[{label}]"), eq_bad == 0, format!("largest residual {eq:.3e}"));
        table.push([label, done.len().to_string(), matrices.to_string(), fmt(min), fmt(mean), fmt(eq)]);
    }
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(sources: &[u64], targets: &[u64]) -> ExcursionTokens {
        ExcursionTokens { sources: sources.to_vec(), targets: targets.to_vec() }
    }

    #[test]
    fn pairings_on_nested_excursion() {
        // Sources 0, 2; targets 3, 5: tau* nests (2 -> 3, 0 -> 5).
        let t = tok(&[0, 2], &[3, 5]);
        assert_eq!(stable_pairs(&t), vec![1, 0]);
        assert_eq!(fifo_pairs(&t), vec![0, 1]);
        for m in [stable_pairs(&t), fifo_pairs(&t)] {
            assert!(is_feasible(&t, &m));
            assert_eq!(gap_sum(&t, &m), 6);
        }
        assert!(!is_feasible(&tok(&[0, 4], &[3, 5]), &vec![1, 0]));
        let sqrt = Gauge::sqrt();
        // sqrt(5) + 1 against sqrt(3) + sqrt(3)
        assert!((pairing_cost(&t, &stable_pairs(&t), &sqrt, 1.0, 1) - (5f64.sqrt() + 1.0)).abs() < 1e-12);
        assert!(pairing_cost(&t, &fifo_pairs(&t), &sqrt, 1.0, 1) > pairing_cost(&t, &stable_pairs(&t), &sqrt, 1.0, 1));
    }

    #[test]
    fn random_pairs_are_feasible() {
        let t = tok(&[0, 1, 2, 6, 7], &[3, 4, 8, 9, 10]);
        for seed in 0..50 {
            let m = random_pairs(&t, &mut rng::stream_rng(seed, rng::STREAM_AUX));
            assert!(is_feasible(&t, &m));
            assert_eq!(gap_sum(&t, &m), gap_sum(&t, &stable_pairs(&t)));
        }
    }
}

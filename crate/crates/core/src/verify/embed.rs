//! Law of `B_{T*}` and unbiasedness of the shifted walk.

use std::collections::BTreeMap;

use super::config::ExperimentConfig;
use super::report::{fmt, StatReport, Table};
use super::stats::{binomial_se, chi_square, ks_critical, ks_discrete, total_variation, walk_increment_law};
use super::{require_exact, run_replicas, tally};
use crate::error::{Error, Result};
use crate::rational;

/// Empirical law of the embedded site against `nu` (or a committed
/// reference law), with per-atom binomial z-scores.
pub fn run_embed_law(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = require_exact(cfg, &pair)?;
    let reps = run_replicas(cfg, &pair, mode, 0)?;
    let mut report = StatReport::new("embed_law", cfg.walk.seed);
    tally(&mut report, cfg, &reps);
    let n = report.replicas.completed;
    if n == 0 {
        report.check("completed_replicas", false, "every replica was censored");
        return Ok(report);
    }

    let mut counts: BTreeMap<i64, u64> = cfg.nu.support().into_iter().map(|x| (x, 0)).collect();
    for r in reps.iter().filter(|r| !r.result.censored) {
        *counts.entry(r.result.site).or_default() += 1;
    }
    let sites: Vec<i64> = counts.keys().copied().collect();
    let count: Vec<u64> = counts.values().copied().collect();
    let freq: Vec<f64> = count.iter().map(|&c| c as f64 / n as f64).collect();
    let target: Vec<f64> = sites.iter().map(|&x| rational::to_f64(&cfg.nu.weight(x))).collect();
    let reference: Vec<f64> = match &cfg.reference {
        Some(r) => sites
            .iter()
            .map(|x| r.atoms.iter().find(|a| a.0 == *x).map_or(0.0, |a| a.1))
            .collect(),
        None => target.clone(),
    };
    let ref_replicas = cfg.reference.as_ref().map(|r| r.replicas);

    let tv = total_variation(&freq, &target);
    let tv_se = 0.5 * freq.iter().map(|&p| binomial_se(p, n)).sum::<f64>();
    report.estimate("tv_to_nu", tv, Some(tv_se));
    if cfg.reference.is_some() {
        report.estimate("tv_to_reference", total_variation(&freq, &reference), Some(tv_se));
    }
    let (chi, dof) = chi_square(&count, &reference);
    report.statistic("chi_square", chi);
    report.statistic("chi_square_dof", dof as f64);

    let off_support: u64 = sites.iter().zip(&count).filter(|(&x, _)| cfg.nu.units_at(x) == 0).map(|(_, c)| c).sum();
    report.check("support", off_support == 0, format!("{off_support} replicas ended off the support of nu"));

    let mut table = Table::new("law", &["site", "count", "frequency", "se", "nu", "reference", "z"]);
    let mut worst: f64 = 0.0;
    let mut degenerate_ok = true;
    for (k, &x) in sites.iter().enumerate() {
        let p = reference[k];
        let mut var = p * (1.0 - p) / n as f64;
        if let Some(m) = ref_replicas {
            var += p * (1.0 - p) / m as f64;
        }
        let z = if var > 0.0 { (freq[k] - p) / var.sqrt() } else { 0.0 };
        if var == 0.0 && freq[k] != p {
            degenerate_ok = false;
        }
        worst = worst.max(z.abs());
        report.estimate(format!("frequency[{x}]"), freq[k], Some(binomial_se(freq[k], n)));
        table.push([x.to_string(), count[k].to_string(), fmt(freq[k]), fmt(binomial_se(freq[k], n)), fmt(target[k]), fmt(p), fmt(z)]);
    }
    report.statistic("max_abs_z", worst);
    report.check(
        "atom_frequencies",
        degenerate_ok && worst <= cfg.thresholds.sigma,
        format!("largest |z| = {worst:.3} against {} (limit {})", if ref_replicas.is_some() { "the reference" } else { "nu" }, cfg.thresholds.sigma),
    );
    if report.replicas.censored > 0 {
        report.notes.push("frequencies are over completed replicas only".into());
    }
    report.tables.push(table);
    Ok(report)
}

/// Increments of the shifted walk `B_{T*+t} - B_{T*}` for `t` in the
/// configured lags, forward and backward, against the walk's own law.
pub fn run_unbiased_test(cfg: &ExperimentConfig) -> Result<StatReport> {
    let pair = cfg.pair()?;
    let mode = require_exact(cfg, &pair)?;
    let max_lag = cfg.lags.iter().copied().max().unwrap_or(1);
    let reps = run_replicas(cfg, &pair, mode, max_lag as usize)?;
    let mut report = StatReport::new("unbiased", cfg.walk.seed);
    tally(&mut report, cfg, &reps);
    let windows: Vec<&Vec<i64>> = reps.iter().filter_map(|r| r.window.as_ref()).collect();
    let n = windows.len() as u64;
    let batch = n / cfg.batches;
    if batch < 10 {
        return Err(Error::Config(format!(
            "{n} completed replicas give fewer than 10 per batch for {} batches",
            cfg.batches
        )));
    }
    let c = max_lag as usize;
    let sigma = cfg.thresholds.sigma;

    for (dir, sign) in [("forward", 1i64), ("backward", -1)] {
        let up = windows
            .iter()
            .filter(|w| if sign > 0 { w[c + 1] > w[c] } else { w[c] > w[c - 1] })
            .count() as f64
            / n as f64;
        let se = binomial_se(0.5, n);
        report.estimate(format!("lag1_up_fraction_{dir}"), up, Some(binomial_se(up, n)));
        let z = (up - 0.5) / se;
        report.check(format!("lag1_sign_{dir}"), z.abs() <= sigma, format!("z = {z:.3}"));
    }

    let critical = ks_critical(cfg.thresholds.ks_alpha, batch as usize);
    let needed = (cfg.thresholds.ks_pass_fraction * cfg.batches as f64).ceil() as u64;
    let mut table = Table::new("ks", &["lag", "direction", "batches", "passed", "max_ks", "critical"]);
    for &lag in &cfg.lags {
        let law = walk_increment_law(lag);
        let k = lag as usize;
        for (dir, forward) in [("forward", true), ("backward", false)] {
            let incs: Vec<i64> =
                windows.iter().map(|w| if forward { w[c + k] - w[c] } else { w[c] - w[c - k] }).collect();
            let mut passed = 0;
            let mut max_ks: f64 = 0.0;
            for b in 0..cfg.batches as usize {
                let d = ks_discrete(&incs[b * batch as usize..(b + 1) * batch as usize], &law);
                max_ks = max_ks.max(d);
                if d <= critical {
                    passed += 1;
                }
            }
            report.statistic(format!("ks_passed[lag={lag},{dir}]"), passed as f64);
            report.check(
                format!("ks[lag={lag},{dir}]"),
                passed >= needed,
                format!("{passed}/{} batches below {critical:.4}", cfg.batches),
            );
            table.push([lag.to_string(), dir.into(), cfg.batches.to_string(), passed.to_string(), fmt(max_ks), fmt(critical)]);
        }
    }
    report.tables.push(table);
    Ok(report)
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 9`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use shiftlab::alloc::{
    compute_n, random_config, random_dyck_config, stable_allocation, stable_allocation_naive, tau_n_convergence_test,
    PointConfig, StableMatch,
};
use shiftlab::embedding::decompose_excursions;
use shiftlab::gauge::Gauge;
use shiftlab::Error;
use shiftlab::ledger::build_ledger;
use shiftlab::measure::{split_measures, DiscreteMeasure};
use shiftlab::transport::{
    default_window, inequality_check, permutation_oracle, repair_sweep, sample_feasible_matrix, TransportMatrix,
};
use shiftlab::verify::report::Table;
use shiftlab::verify::{self, ExperimentConfig, HorizonPolicy, StatReport};
use shiftlab::walk::{sample_walk, WalkConfig};

const MARGIN_TOL: f64 = 1e-10;
const ORACLE_TOL: f64 = 1e-10;
const SIGMA: f64 = 3.0;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ExperimentConfig, String> {
    ExperimentConfig::load(&configs_dir().join(name)).map_err(|e| format!("{name}: {e}"))
}

/// Runs a committed config and writes its report into `out`.
fn run_into(name: &str, out: &Path) -> Result<StatReport, String> {
    let cfg = load(name)?;
    let report = verify::run(&cfg).map_err(|e| format!("{name}: {e}"))?;
    report.write(out).map_err(|e| format!("{name}: {e}"))?;
    Ok(report)
}

fn table<'a>(report: &'a StatReport, name: &str) -> Result<&'a Table, String> {
    report.table(name).ok_or_else(|| format!("report has no table {name}"))
}

fn column(t: &Table, name: &str) -> Result<usize, String> {
    t.header.iter().position(|h| h == name).ok_or_else(|| format!("table {} has no column {name}", t.name))
}

fn num(cell: &str) -> Result<f64, String> {
    cell.parse().map_err(|_| format!("not a number: {cell}"))
}

fn counts_consistent(r: &StatReport) -> Result<(), String> {
    let c = &r.replicas;
    ensure(c.completed + c.censored == c.total, || format!("{} + {} != {}", c.completed, c.censored, c.total))
}

// Independent evaluation of the stable match cost over the first `window` rows.
fn match_cost(cfg: &PointConfig, tau: &[usize], window: usize, g: &Gauge) -> f64 {
    (0..window).map(|i| g.apply(cfg.b()[tau[i]] - cfg.a()[i])).sum()
}

fn c1_inequality() -> Outcome {
    let gauges = Gauge::standard_set();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e9);
    let (mut matrices, mut fractional) = (0usize, 0usize);
    let mut min_margin = f64::INFINITY;
    let mut worst_equality: f64 = 0.0;
    while matrices < 10_000 {
        let k = rng.random_range(1..=6);
        let pad = rng.random_range(1..=2);
        let cfg = random_dyck_config(&mut rng, k, pad);
        let n = default_window(&cfg).map_err(|e| e.to_string())?;
        ensure(n <= 8, || format!("window {n} above 8"))?;
        let seed = rng.random::<u64>();
        let pi = sample_feasible_matrix(&cfg, n, seed, 4 * cfg.a().len()).map_err(|e| e.to_string())?;
        if pi.triplets().iter().any(|t| t[3] != 1) {
            fractional += 1;
        }
        let indicator = TransportMatrix::from_match(&stable_allocation(&cfg).map_err(|e| e.to_string())?, cfg.b().len(), n);
        for g in &gauges {
            let r = inequality_check(&pi, &cfg, g).map_err(|e| e.to_string())?;
            ensure(r.margin >= -MARGIN_TOL, || format!("margin {:.3e} for {} on {:?}", r.margin, g.label(), cfg))?;
            min_margin = min_margin.min(r.margin);
            let eq = inequality_check(&indicator, &cfg, g).map_err(|e| e.to_string())?;
            worst_equality = worst_equality.max(eq.margin.abs());
        }
        matrices += 1;
    }
    ensure(worst_equality <= MARGIN_TOL, || format!("stable indicator residual {worst_equality:.3e}"))?;
    ensure(fractional * 2 > matrices, || format!("only {fractional} fractional matrices"))?;
    Ok(format!(
        "{matrices} matrices ({fractional} fractional) x 4 gauges, min margin {min_margin:.3e}, equality residual {worst_equality:.1e}"
    ))
}

fn c2_oracle() -> Outcome {
    let gauges = Gauge::standard_set();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2e9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        let pad = rng.random_range(1..=2);
        let cfg = random_dyck_config(&mut rng, k, pad);
        let n = default_window(&cfg).map_err(|e| e.to_string())?;
        let m = stable_allocation(&cfg).map_err(|e| e.to_string())?;
        // gaps are integers here, so the terms before psi compare exactly
        let mut stable_gaps: Vec<i64> = (0..n).map(|i| (cfg.b()[m.tau[i]] - cfg.a()[i]) as i64).collect();
        stable_gaps.sort_unstable();
        for g in &gauges {
            let o = permutation_oracle(&cfg, g, n).map_err(|e| e.to_string())?;
            let stable = match_cost(&cfg, &m.tau, n, g);
            worst = worst.max((o.min_cost - stable).abs());
            ensure((o.min_cost - stable).abs() <= ORACLE_TOL, || {
                format!("{}: oracle {} vs stable {} on {:?}", g.label(), o.min_cost, stable, cfg)
            })?;
            if g.label() == Gauge::sqrt().label() {
                let mut gaps: Vec<i64> = o.matching.iter().enumerate().map(|(i, &j)| (cfg.b()[j] - cfg.a()[i]) as i64).collect();
                gaps.sort_unstable();
                ensure(gaps == stable_gaps, || format!("gap multisets differ: {gaps:?} vs {stable_gaps:?}"))?;
            }
        }
    }
    Ok(format!("1000 instances x 4 gauges, max |oracle - stable| {worst:.1e}, sqrt gap multisets identical"))
}

fn c3_repair() -> Outcome {
    let gauges = Gauge::standard_set();
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e9);
    let mut instances = vec![(
        PointConfig::new(vec![2.0, 1.0], vec![3.0, 4.0]).unwrap(),
        TransportMatrix::from_triplets(2, 2, 2, &[[2, 1, 1, 1], [1, 2, 1, 1]]).unwrap(),
    )];
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        let pad = rng.random_range(1..=2);
        let cfg = random_dyck_config(&mut rng, k, pad);
        let n = cfg.a().len();
        let pi = sample_feasible_matrix(&cfg, n, rng.random(), 4 * n).map_err(|e| e.to_string())?;
        instances.push((cfg, pi));
    }
    let (mut total_steps, mut max_steps) = (0usize, 0usize);
    for (cfg, pi) in &instances {
        let n = pi.window();
        let budget = 10 * n.pow(4);
        let s = repair_sweep(pi, cfg, budget, &gauges).map_err(|e| format!("{e} on {cfg:?}"))?;
        for w in s.trace.windows(2) {
            for (g, (x, y)) in w[0].iter().zip(&w[1]).enumerate() {
                ensure(*y <= x + 1e-12 * x.abs().max(1.0), || format!("{} rose from {x} to {y}", gauges[g].label()))?;
            }
        }
        let m = stable_allocation(cfg).map_err(|e| e.to_string())?;
        ensure(s.matrix == TransportMatrix::from_match(&m, cfg.b().len(), n), || format!("fixpoint differs on {cfg:?}"))?;
        total_steps += s.steps;
        max_steps = max_steps.max(s.steps);
    }
    Ok(format!(
        "{} instances, {total_steps} repairs (max {max_steps} on one instance), all gauges monotone, fixpoints exact",
        instances.len()
    ))
}

// Direct O(n^2) evaluation of tau(a) = first b > a where the counts of a's
// and b's in [a, b] agree.
fn naive_targets(cfg: &PointConfig) -> Vec<f64> {
    let mut pts: Vec<(f64, bool)> = cfg.a().iter().map(|&x| (x, true)).chain(cfg.b().iter().map(|&x| (x, false))).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    cfg.a()
        .iter()
        .map(|&a| {
            let mut bal = 0i64;
            for &(x, is_a) in pts.iter().filter(|p| p.0 >= a) {
                bal += if is_a { 1 } else { -1 };
                if !is_a && bal == 0 {
                    return x;
                }
            }
            f64::NAN
        })
        .collect()
}

fn stable_invariants(cfg: &PointConfig, m: &StableMatch) -> Result<(), String> {
    let a = cfg.a();
    let b = cfg.b();
    let count = |xs: &[f64], lo: f64, hi: f64| xs.iter().filter(|&&x| lo <= x && x <= hi).count();
    let mut used = vec![false; b.len()];
    for (i, &j) in m.tau.iter().enumerate() {
        ensure(b[j] > a[i], || format!("a_{} = {} sent backwards to {}", i + 1, a[i], b[j]))?;
        ensure(!used[j], || format!("b_{} used twice", j + 1))?;
        used[j] = true;
        ensure(count(a, a[i], b[j]) == count(b, a[i], b[j]), || format!("[{}, {}] unbalanced", a[i], b[j]))?;
    }
    for (i, &j) in m.tau.iter().enumerate() {
        for (k, &l) in m.tau.iter().enumerate() {
            let (x0, x1, y0, y1) = (a[i], b[j], a[k], b[l]);
            let crossing = x0 < y0 && y0 < x1 && x1 < y1;
            ensure(!crossing, || format!("[{x0}, {x1}] crosses [{y0}, {y1}]"))?;
        }
    }
    if let Ok(h) = compute_n(cfg) {
        for i in h.n - 1..m.tau.len() {
            ensure(m.tau[i] == i, || format!("tail identity fails at i = {} (N = {})", i + 1, h.n))?;
        }
    }
    let naive = naive_targets(cfg);
    for (i, &j) in m.tau.iter().enumerate() {
        ensure(naive[i] == b[j], || format!("a_{}: sweep {} vs naive {}", i + 1, b[j], naive[i]))?;
    }
    Ok(())
}

fn c4_stable_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e9);
    let (mut largest, mut with_n) = (0usize, 0usize);
    let mut k = 0;
    while k < 10_000 {
        let cfg = if k % 2 == 0 {
            let (len, pad) = (rng.random_range(0..=90), rng.random_range(0..=4));
            random_config(&mut rng, len, pad)
        } else {
            let (pairs, pad) = (rng.random_range(0..=45), rng.random_range(1..=5));
            random_dyck_config(&mut rng, pairs, pad)
        };
        if cfg.a().len() > 50 {
            continue;
        }
        k += 1;
        largest = largest.max(cfg.a().len());
        with_n += usize::from(compute_n(&cfg).is_ok());
        let m = stable_allocation(&cfg).map_err(|e| e.to_string())?;
        stable_invariants(&cfg, &m)?;
        let naive = stable_allocation_naive(&cfg).map_err(|e| e.to_string())?;
        ensure(naive == m, || format!("library naive sweep differs on {cfg:?}"))?;
    }
    Ok(format!("10000 instances (up to {largest} a-points, {with_n} with a finite N), zero failures"))
}

fn law(report: &StatReport) -> Result<BTreeMap<i64, u64>, String> {
    let t = table(report, "law")?;
    let (site, count) = (column(t, "site")?, column(t, "count")?);
    t.rows
        .iter()
        .map(|r| Ok((r[site].parse().map_err(|_| "bad site")?, r[count].parse().map_err(|_| "bad count")?)))
        .collect()
}

fn c5_embedding(out: &Path) -> Outcome {
    let dirac = run_into("embed_dirac.json", &out.join("embed_dirac"))?;
    counts_consistent(&dirac)?;
    let law1 = law(&dirac)?;
    let done = dirac.replicas.completed;
    ensure(done > 0, || "no completed replicas".into())?;
    ensure(law1.get(&1) == Some(&done) && law1.values().sum::<u64>() == done, || format!("delta_1 law {law1:?}"))?;

    let half = run_into("embed_half.json", &out.join("embed_half"))?;
    counts_consistent(&half)?;
    ensure(half.replicas.total >= 10_000, || format!("{} replicas", half.replicas.total))?;
    let law2 = law(&half)?;
    let n = half.replicas.completed as f64;
    let se = (0.25 / n).sqrt();
    let mut zs = Vec::new();
    for x in [-1, 1] {
        let p = *law2.get(&x).unwrap_or(&0) as f64 / n;
        let z = (p - 0.5) / se;
        ensure(z.abs() <= SIGMA, || format!("site {x}: frequency {p:.4}, z = {z:.2}"))?;
        zs.push(format!("{x}: {p:.4} (z {z:+.2})"));
    }
    ensure(law2.values().sum::<u64>() == half.replicas.completed, || format!("mass off {{-1, 1}}: {law2:?}"))?;
    Ok(format!(
        "delta_1: {done}/{} completed replicas at site 1; half/half: {}",
        dirac.replicas.total,
        zs.join(", ")
    ))
}

fn c6_pathwise(out: &Path) -> Outcome {
    let r = run_into("compare.json", &out.join("compare"))?;
    counts_consistent(&r)?;
    let paths = r.get_statistic("paths").unwrap_or(0.0);
    ensure(paths >= 1000.0, || format!("{paths} paths"))?;
    let t = table(&r, "compare")?;
    let (viol, skipped, diff, min_diff) =
        (column(t, "violations")?, column(t, "skipped")?, column(t, "mean_diff")?, column(t, "min_diff")?);
    let mut total = 0u64;
    let mut worst_min = f64::INFINITY;
    for row in &t.rows {
        total += row[viol].parse::<u64>().map_err(|e| e.to_string())?;
        ensure(num(&row[skipped])? == 0.0, || format!("{} skipped for {}", row[skipped], row[1]))?;
        ensure(num(&row[diff])? >= 0.0, || format!("mean difference {} for {}/{}", row[diff], row[0], row[1]))?;
        worst_min = worst_min.min(num(&row[min_diff])?);
    }
    ensure(total == 0, || format!("{total} pathwise violations"))?;
    for c in &r.checks {
        ensure(c.passed, || format!("{}: {}", c.name, c.detail))?;
    }
    Ok(format!(
        "{paths} paths x {} comparator/gauge cells, 0 violations, min paired difference {worst_min:.2e}",
        t.rows.len()
    ))
}

fn c7_ergodic(out: &Path) -> Outcome {
    let mut lines = Vec::new();
    for seed in 1..=3 {
        let name = format!("ergodic_seed{seed}.json");
        let r = run_into(&name, &out.join(format!("ergodic_seed{seed}")))?;
        counts_consistent(&r)?;
        let t = table(&r, "ergodic")?;
        let col = |n| column(t, n);
        let (g, rr, f, sf, b, sb, h, sh) =
            (col("gauge")?, col("r")?, col("forward")?, col("se_forward")?, col("backward")?, col("se_backward")?, col("half_ensemble")?, col("se_half")?);
        let mut last: BTreeMap<&str, &Vec<String>> = BTreeMap::new();
        for row in &t.rows {
            let keep = last.get(row[g].as_str()).is_none_or(|p| num(&p[rr]).unwrap_or(0.0) < num(&row[rr]).unwrap_or(0.0));
            if keep {
                last.insert(&row[g], row);
            }
        }
        ensure(!last.is_empty(), || format!("{name}: empty table"))?;
        let mut worst: f64 = 0.0;
        for (gauge, row) in &last {
            let half = num(&row[h])?;
            for (v, s) in [(f, sf), (b, sb)] {
                let z = (num(&row[v])? - half) / (num(&row[s])?.powi(2) + num(&row[sh])?.powi(2)).sqrt();
                ensure(z.abs() <= SIGMA, || format!("{name} {gauge} at r = {}: z = {z:.2}", row[rr]))?;
                worst = worst.max(z.abs());
            }
        }
        let r_max = last.values().map(|row| num(&row[rr]).unwrap_or(0.0)).fold(0.0, f64::max);
        lines.push(format!("seed {seed}: r = {r_max:.0}, max |z| {worst:.2}"));
    }
    Ok(lines.join("; "))
}

fn c8_moments(out: &Path) -> Outcome {
    let cfg = load("tail.json")?;
    ensure(cfg.horizon_policy == HorizonPolicy::Doubling && cfg.max_horizon() == 1 << 24, || {
        format!("tail config must double up to 2^24, got {:?} / {}", cfg.horizon_policy, cfg.max_horizon())
    })?;
    let r = run_into("tail.json", &out.join("tail"))?;
    counts_consistent(&r)?;
    ensure(r.replicas.total >= 10_000, || format!("{} replicas", r.replicas.total))?;
    let e = r.get_estimate("tail_exponent").ok_or("no tail exponent")?.value;
    ensure((0.15..=0.35).contains(&e), || format!("tail exponent {e:.4}"))?;

    let t = table(&r, "partial_means")?;
    let (mc, cc, vc) = (column(t, "moment")?, column(t, "checkpoint")?, column(t, "mean")?);
    let mut series: BTreeMap<String, Vec<(u64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        series.entry(row[mc].clone()).or_default().push((row[cc].parse().map_err(|_| "bad checkpoint")?, num(&row[vc])?));
    }
    for s in series.values_mut() {
        s.sort_by_key(|p| p.0);
    }
    let quarter = series.get("0.25").ok_or("no partial means for 0.25")?;
    let tenth = series.get("0.1").ok_or("no partial means for 0.1")?;
    ensure(quarter.len() >= 3 && tenth.len() >= 2, || "too few checkpoints".into())?;
    let rising = quarter.windows(2).all(|w| w[1].1 > w[0].1);
    ensure(rising, || format!("T*^0.25 partial means not increasing: {quarter:?}"))?;
    let (p, q) = (tenth[tenth.len() - 2].1, tenth[tenth.len() - 1].1);
    let change = (q - p).abs() / p;
    ensure(change < 0.10, || format!("T*^0.1 partial means moved {:.1}%: {tenth:?}", 100.0 * change))?;
    let fmt_series = |s: &[(u64, f64)]| s.iter().map(|(_, v)| format!("{v:.3}")).collect::<Vec<_>>().join(" -> ");
    Ok(format!(
        "exponent {e:.3}; T*^0.25 means {}; T*^0.1 means {} (last change {:.1}%)",
        fmt_series(quarter),
        fmt_series(tenth),
        100.0 * change
    ))
}

// Quantile points resolve every token only when the token count divides
// n; excursions whose count divides the largest n saturate within the grid
// and form the fixtures. The others are reported, not asserted.
fn c9_convergence() -> Outcome {
    const N_LIST: [usize; 4] = [4, 16, 64, 256];
    let pair = split_measures(&DiscreteMeasure::dirac(0), &DiscreteMeasure::dirac(1)).map_err(|e| e.to_string())?;
    let (mut fixtures, mut coarse, mut excluded, mut excluded_rising) = (0usize, 0usize, 0usize, 0usize);
    let mut largest = 0i64;
    for seed in 1..=64u64 {
        let walk = WalkConfig::new(seed, 1 << 18, 1 << 18, DiscreteMeasure::dirac(0));
        let ledger = build_ledger(&sample_walk(&walk), &pair).map_err(|e| e.to_string())?;
        let chain = match decompose_excursions(&ledger, 300) {
            Err(Error::HorizonExceeded { attained: 0, .. }) => continue,
            Err(Error::HorizonExceeded { attained, .. }) => decompose_excursions(&ledger, attained),
            other => other,
        }
        .map_err(|e| e.to_string())?;
        for exc in chain.excursions.iter().filter(|e| e.mass <= 256) {
            let rows = tau_n_convergence_test(&ledger, exc, &N_LIST).map_err(|e| e.to_string())?;
            let trace = || format!("seed {seed}, excursion [{}, {}] of mass {}: {rows:?}", exc.left, exc.right, exc.mass);
            for w in rows.windows(2) {
                ensure(w[1].g_error <= w[0].g_error && w[1].h_error <= w[0].h_error, || format!("rounding rose on {}", trace()))?;
            }
            let rising = rows.windows(2).any(|w| w[1].tau_distance > w[0].tau_distance);
            if 256 % exc.mass != 0 {
                excluded += 1;
                excluded_rising += usize::from(rising);
                continue;
            }
            ensure(!rising, || format!("distance rose on {}", trace()))?;
            let last = rows.last().unwrap();
            ensure(last.tau_distance <= 1.0, || format!("{} steps at n = 256 on {}", last.tau_distance, trace()))?;
            fixtures += 1;
            coarse += usize::from(rows[0].tau_distance > 1.0);
            largest = largest.max(exc.mass);
        }
    }
    ensure(fixtures >= 20 && coarse >= 5, || format!("only {fixtures} fixtures ({coarse} with a coarse-grid error)"))?;
    Ok(format!(
        "{fixtures} saturating excursions (masses up to {largest}, {coarse} with a coarse error above one step): distance non-increasing, <= 1 step at n = 256; \
         g/h rounding monotone on all; {excluded} excursions with mass not dividing 256 excluded ({excluded_rising} non-monotone)"
    ))
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c10_determinism(first: &Path) -> Outcome {
    let names = [
        "embed_dirac", "embed_half", "embed_third", "unbiased", "compare", "excursion_cost", "ergodic_seed1", "tail",
    ];
    let again = TempDir::new().map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().map_err(|e| e.to_string())?;
    let mut compared = 0usize;
    for name in names {
        let base = first.join(name);
        if !base.join("report.json").exists() {
            run_into(&format!("{name}.json"), &base)?;
        }
        pool.install(|| run_into(&format!("{name}.json"), &again.path().join(name)))?;
        let (a, b) = (files(&base), files(&again.path().join(name)));
        ensure(!a.is_empty() && a.keys().eq(b.keys()), || format!("{name}: file sets differ"))?;
        for (path, bytes) in &a {
            ensure(b[path] == *bytes, || format!("{name}: {} differs between runs", path.display()))?;
        }
        compared += a.len();
    }
    Ok(format!("{} configs re-run on 4 threads, {compared} files byte-identical", names.len()))
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let out = TempDir::new().expect("temporary directory");
    let dir = out.path();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "inequality property suite", Box::new(c1_inequality)),
        (2, "oracle equivalence", Box::new(c2_oracle)),
        (3, "repair sweep", Box::new(c3_repair)),
        (4, "stable allocation invariants", Box::new(c4_stable_invariants)),
        (5, "embedding law", Box::new(|| c5_embedding(dir))),
        (6, "pathwise optimality", Box::new(|| c6_pathwise(dir))),
        (7, "ergodic identity", Box::new(|| c7_ergodic(dir))),
        (8, "moments", Box::new(|| c8_moments(dir))),
        (9, "convergence harness", Box::new(c9_convergence)),
        (10, "determinism", Box::new(|| c10_determinism(dir))),
    ];
    let mut failed = 0;
    let mut stdout = std::io::stdout().lock();
    for (id, title, run) in &criteria {
        if !wanted.is_empty() && !wanted.contains(id) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d.as_str()),
            Err(d) => ("FAIL", d.as_str()),
        };
        failed += usize::from(outcome.is_err());
        writeln!(stdout, "criterion {id:>2} {tag}  {title} ({secs:.1} s): {detail}").unwrap();
        stdout.flush().unwrap();
    }
    if failed > 0 {
        writeln!(stdout, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}

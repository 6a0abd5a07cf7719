//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 a checked
//! invariant or statistical assertion failed, 3 the horizon policy ran out.
//! Errors are also written to stderr as one JSON object.

use std::env;
use std::ffi::OsString;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::alloc::{compute_n, stable_allocation};
use crate::embedding::{compute_t_star, decompose_excursions, write_excursions_csv};
use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::ledger::build_ledger;
use crate::transport::{inequality_check, repair_sweep, Instance, TransportMatrix};
use crate::verify::report::{fmt, write_table, Counts, StatReport, Table};
use crate::verify::{self, Experiment, ExperimentConfig, HorizonPolicy, FLAG_HORIZON_EXHAUSTED};
use crate::walk::sample_walk;

/// Environment variable overriding the output directory of a config.
pub const OUTPUT_ENV: &str = "SHIFTLAB_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "shiftlab-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;
pub const EXIT_HORIZON: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "shiftlab", version, about = "Optimal unbiased-shift embeddings: simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config (or point/transport instance for allocate, repair, inequality).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one path, its local-time ledger and T*.
    Walk(Common),
    /// Embedding law or unbiasedness test, per the config's experiment.
    Embed(Common),
    /// Stable allocation of a point configuration.
    Allocate(Common),
    /// Repair all crossings of a transport matrix.
    Repair {
        #[command(flatten)]
        common: Common,
        /// Step budget; defaults to 10 N^4.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Both sides of the window inequality for a transport matrix.
    Inequality(Common),
    /// Per-excursion comparators against tau*.
    Compare(Common),
    /// Time averages along one path against the ensemble.
    Ergodic(Common),
    /// Survival exponent and partial moments of T*.
    Tail(Common),
    /// Excursion inequality for random transport matrices.
    ExcursionCost(Common),
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            emit_error("usage", &e.to_string(), EXIT_CONFIG, None);
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let code = exit_code(&e);
            let detail = match &e {
                Error::Constraint(v) => serde_json::to_value(v).ok(),
                _ => None,
            };
            emit_error(e.kind(), &e.to_string(), code, detail);
            code
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::HorizonExceeded { .. } => EXIT_HORIZON,
        Error::BudgetExhausted { .. } => EXIT_ASSERTION,
        _ => EXIT_CONFIG,
    }
}

fn emit_error(kind: &str, message: &str, code: i32, detail: Option<serde_json::Value>) {
    let mut v = json!({ "error": kind, "message": message, "exit_code": code });
    if let Some(d) = detail {
        v["detail"] = d;
    }
    eprintln!("{v}");
}

/// `--out`, then the environment variable, then the config, then `./shiftlab-out`.
pub fn resolve_output_dir(cli: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = env::var_os(OUTPUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.map_or_else(|| PathBuf::from(DEFAULT_OUTPUT), Path::to_path_buf)
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Walk(c) => run_walk(&c),
        Command::Embed(c) => run_experiment(&c, &[Experiment::EmbedLaw, Experiment::Unbiased]),
        Command::Compare(c) => run_experiment(&c, &[Experiment::CostCompare]),
        Command::Ergodic(c) => run_experiment(&c, &[Experiment::Ergodic]),
        Command::Tail(c) => run_experiment(&c, &[Experiment::Tail]),
        Command::ExcursionCost(c) => run_experiment(&c, &[Experiment::ExcursionCost]),
        Command::Allocate(c) => run_allocate(&c),
        Command::Repair { common, max_steps } => run_repair(&common, max_steps),
        Command::Inequality(c) => run_inequality(&c),
    }
}

fn load_config(c: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let cfg = ExperimentConfig::load(&c.config)?;
    let out = resolve_output_dir(c.out.as_deref(), cfg.output_dir.as_deref());
    Ok((cfg, out))
}

fn report_code(report: &StatReport) -> i32 {
    if report.has_flag(FLAG_HORIZON_EXHAUSTED) {
        EXIT_HORIZON
    } else if !report.passed() {
        EXIT_ASSERTION
    } else {
        EXIT_OK
    }
}

fn finish(report: &StatReport, out: &Path) -> Result<i32> {
    report.write(out)?;
    let code = report_code(report);
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    println!(
        "{}",
        json!({ "experiment": report.experiment, "passed": report.passed(), "failed": failed,
                "flags": report.flags, "output_dir": out.display().to_string(), "exit_code": code })
    );
    Ok(code)
}

fn run_experiment(c: &Common, allowed: &[Experiment]) -> Result<i32> {
    let (cfg, out) = load_config(c)?;
    if !allowed.contains(&cfg.experiment) {
        let names: Vec<&str> = allowed.iter().map(|e| e.name()).collect();
        return Err(Error::Config(format!(
            "config experiment {} does not match this subcommand (expected {})",
            cfg.experiment.name(),
            names.join(" or ")
        )));
    }
    let report = verify::run(&cfg)?;
    finish(&report, &out)
}

fn run_walk(c: &Common) -> Result<i32> {
    let (cfg, out) = load_config(c)?;
    let pair = cfg.pair()?;
    let mode = cfg.mode(&pair);
    let mut wc = cfg.walk_config();
    let mut path = sample_walk(&wc);
    let mut report = StatReport::new("walk", cfg.walk.seed);
    let found = loop {
        let ledger = build_ledger(&path, &pair)?;
        match compute_t_star(&ledger, &pair, mode, wc.dt()) {
            Ok(r) => break Some((ledger, r)),
            Err(Error::HorizonExceeded { .. }) if wc.horizon_fwd < cfg.max_horizon() => {
                wc.horizon_fwd = (wc.horizon_fwd * 2).min(cfg.max_horizon());
                path.extend(wc.horizon_fwd, wc.horizon_bwd)?;
            }
            Err(Error::HorizonExceeded { .. }) => break None,
            Err(e) => return Err(e),
        }
    };
    report.horizon = wc.horizon_fwd;
    let ledger = build_ledger(&path, &pair)?;
    match &found {
        Some((_, r)) => {
            report.replicas = Counts { total: 1, completed: 1, censored: 0 };
            report.estimate("t_star_steps", r.t_star_steps as f64, None);
            report.estimate("t_star_time", r.t_star_time, None);
            report.estimate("site", r.site as f64, None);
            report.statistic("u_flag", f64::from(u8::from(r.u_flag)));
            report.check("site_in_nu_support", cfg.nu.units_at(r.site) > 0, format!("B(T*) = {}", r.site));
        }
        None => {
            report.replicas = Counts { total: 1, completed: 0, censored: 1 };
            report.flag(match cfg.horizon_policy {
                HorizonPolicy::Fixed => verify::FLAG_CENSORING,
                HorizonPolicy::Doubling => FLAG_HORIZON_EXHAUSTED,
            });
        }
    }
    let code = finish(&report, &out)?;
    let tables = out.join("tables");
    path.write_csv(File::create(tables.join("walk.csv"))?)?;
    ledger.write_csv(File::create(tables.join("ledger.csv"))?)?;
    if found.is_some_and(|(_, r)| r.u_flag && r.t_star_steps > 0) {
        let units = pair.mu_tilde.units_at(path.start()) as i64;
        if let Ok(chain) = decompose_excursions(&ledger, units) {
            write_excursions_csv(&chain.excursions, pair.denominator(), File::create(tables.join("excursions.csv"))?)?;
        }
    }
    Ok(code)
}

fn load_instance(c: &Common) -> Result<(Instance, PathBuf)> {
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let inst: Instance = serde_json::from_str(&text)?;
    Ok((inst, resolve_output_dir(c.out.as_deref(), None)))
}

fn write_json(out: &Path, value: &serde_json::Value) -> Result<()> {
    fs::create_dir_all(out.join("tables"))?;
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(out.join("report.json"), s)?;
    Ok(())
}

fn run_allocate(c: &Common) -> Result<i32> {
    let (inst, out) = load_instance(c)?;
    let (cfg, _) = inst.resolve()?;
    let m = stable_allocation(&cfg)?;
    let horizon = compute_n(&cfg).ok();
    write_json(&out, &json!({ "allocation": m, "horizon": horizon }))?;
    let mut t = Table::new("allocation", &["i", "a", "j", "b"]);
    for (i, &j) in m.tau.iter().enumerate() {
        t.push([(i + 1).to_string(), cfg.a()[i].to_string(), (j + 1).to_string(), cfg.b()[j].to_string()]);
    }
    write_table(&t, &out.join("tables/allocation.csv"))?;
    println!("{}", json!({ "command": "allocate", "output_dir": out.display().to_string(), "exit_code": EXIT_OK }));
    Ok(EXIT_OK)
}

fn run_repair(c: &Common, max_steps: Option<usize>) -> Result<i32> {
    let (inst, out) = load_instance(c)?;
    let (cfg, pi) = inst.resolve()?;
    let gauges = Gauge::standard_set();
    let budget = max_steps.unwrap_or_else(|| 10 * pi.window().pow(4));
    let sweep = repair_sweep(&pi, &cfg, budget, &gauges)?;
    let monotone = sweep.trace.windows(2).all(|w| w[1].iter().zip(&w[0]).all(|(b, a)| *b <= a + 1e-12 * a.abs().max(1.0)));
    let stable = TransportMatrix::from_match(&stable_allocation(&cfg)?, cfg.b().len(), pi.window());
    let fixpoint = sweep.matrix == stable;
    let labels: Vec<String> = gauges.iter().map(Gauge::label).collect();
    write_json(
        &out,
        &json!({
            "steps": sweep.steps,
            "crossings": sweep.crossings.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "gauges": labels,
            "initial_cost": sweep.trace.first(),
            "final_cost": sweep.trace.last(),
            "monotone": monotone,
            "fixpoint_is_stable": fixpoint,
            "matrix": sweep.matrix.triplets(),
        }),
    )?;
    let mut header = vec!["step"];
    header.extend(labels.iter().map(String::as_str));
    let mut t = Table::new("trace", &header);
    for (k, costs) in sweep.trace.iter().enumerate() {
        t.push(std::iter::once(k.to_string()).chain(costs.iter().map(|&v| fmt(v))));
    }
    write_table(&t, &out.join("tables/trace.csv"))?;
    let code = if monotone && fixpoint { EXIT_OK } else { EXIT_ASSERTION };
    println!(
        "{}",
        json!({ "command": "repair", "steps": sweep.steps, "monotone": monotone, "fixpoint_is_stable": fixpoint,
                "output_dir": out.display().to_string(), "exit_code": code })
    );
    Ok(code)
}

fn run_inequality(c: &Common) -> Result<i32> {
    let (inst, out) = load_instance(c)?;
    let (cfg, pi) = inst.resolve()?;
    let reports = Gauge::standard_set().iter().map(|g| inequality_check(&pi, &cfg, g)).collect::<Result<Vec<_>>>()?;
    let min_margin = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let ok = reports.iter().all(|r| r.margin >= -1e-10 * r.rhs.abs().max(1.0));
    write_json(&out, &json!({ "reports": reports, "min_margin": min_margin, "holds": ok }))?;
    let mut t = Table::new("inequality", &["gauge", "N", "lhs", "rhs", "margin"]);
    for r in &reports {
        t.push([r.gauge.label(), r.window.to_string(), fmt(r.lhs), fmt(r.rhs), fmt(r.margin)]);
    }
    write_table(&t, &out.join("tables/inequality.csv"))?;
    let code = if ok { EXIT_OK } else { EXIT_ASSERTION };
    println!("{}", json!({ "command": "inequality", "min_margin": min_margin, "output_dir": out.display().to_string(), "exit_code": code }));
    Ok(code)
}

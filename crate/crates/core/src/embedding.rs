//! The embedding time `T*`, the allocation rule `tau*` and excursions.
//!
//! All functionals here are those of the orthogonal parts `mu_tilde`,
//! `nu_tilde` of the pair; for an orthogonal pair they coincide with
//! `mu`, `nu`. Balances are integers in units of `1/q`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::Gauge;
use crate::ledger::LocalTimeLedger;
use crate::measure::{DiscreteMeasure, MeasurePair};
use crate::rational::Rational;
use crate::rng;
use crate::walk::{csv_err, draw_start, WindowVisits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// First return of the difference process to exactly zero.
    Exact,
    /// First time the difference process is `<= 0`; used when `nu_tilde`
    /// has atoms heavier than `1/q` and zero may be jumped over.
    Crossing,
}

impl Mode {
    /// Exact mode when the pair allows it, crossing otherwise.
    pub fn for_pair(pair: &MeasurePair) -> Mode {
        if pair.exact_mode_ok() {
            Mode::Exact
        } else {
            Mode::Crossing
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingResult {
    /// `T*` in steps; for censored results, the horizon that was searched.
    pub t_star_steps: u64,
    /// `T*` in physical time (`steps * dx^2`).
    pub t_star_time: f64,
    pub site: i64,
    pub mode: Mode,
    /// Bernoulli flag of the non-orthogonal splitting; always true for
    /// orthogonal pairs.
    pub u_flag: bool,
    pub censored: bool,
}

impl EmbeddingResult {
    fn found(steps: u64, dt: f64, site: i64, mode: Mode, u_flag: bool) -> Self {
        EmbeddingResult { t_star_steps: steps, t_star_time: steps as f64 * dt, site, mode, u_flag, censored: false }
    }

    /// Right-censored observation: `T* > steps`.
    pub fn censored(steps: u64, dt: f64, mode: Mode) -> Self {
        EmbeddingResult { t_star_steps: steps, t_star_time: steps as f64 * dt, site: 0, mode, u_flag: true, censored: true }
    }
}

/// Draws the flag `U` given the start site: `P(U = 1) = mu_tilde(x) / mu(x)`.
/// Deterministic in the seed (own stream), so it depends only on `B_0`.
pub fn draw_u_flag(seed: u64, pair: &MeasurePair, start: i64) -> bool {
    let total = pair.mu.units_at(start);
    let tilde = pair.mu_tilde.units_at(start);
    if tilde == total {
        return true;
    }
    if tilde == 0 {
        return false;
    }
    rng::uniform_below(seed, rng::STREAM_BERNOULLI, total) < tilde
}

fn check_mode(pair: &MeasurePair, mode: Mode) -> Result<()> {
    if mode == Mode::Exact && !pair.exact_mode_ok() {
        return Err(Error::Precondition(
            "exact mode needs every nu_tilde atom to weigh exactly 1/q".into(),
        ));
    }
    Ok(())
}

/// `T*` with the flag `U` drawn from the ledger's seed.
pub fn compute_t_star(ledger: &LocalTimeLedger, pair: &MeasurePair, mode: Mode, dt: f64) -> Result<EmbeddingResult> {
    let u = pair.orthogonal || draw_u_flag(ledger.seed().unwrap_or(0), pair, ledger.start());
    compute_t_star_with_flag(ledger, pair, mode, dt, u)
}

/// `T* = U * inf{n > 0 : D(n) = 0}` (or `D(n) <= 0` in crossing mode).
pub fn compute_t_star_with_flag(
    ledger: &LocalTimeLedger,
    pair: &MeasurePair,
    mode: Mode,
    dt: f64,
    u_flag: bool,
) -> Result<EmbeddingResult> {
    check_mode(pair, mode)?;
    if !u_flag {
        return Ok(EmbeddingResult::found(0, dt, ledger.start(), mode, false));
    }
    let mut d = ledger.tilde_balance(0, 0);
    let mut min = d;
    for n in 1..=ledger.horizon_fwd() {
        d += ledger.tilde_charge_mu(n) - ledger.tilde_charge_nu(n);
        min = min.min(d);
        let hit = match mode {
            Mode::Exact => d == 0,
            Mode::Crossing => d <= 0,
        };
        if hit {
            return Ok(EmbeddingResult::found(n as u64, dt, ledger.site(n), mode, true));
        }
    }
    Err(Error::HorizonExceeded { steps: ledger.horizon_fwd() as u64, attained: min })
}

/// `tau*(s) = inf{t > s : l^mu[s, t] = l^nu[s, t]}` by direct scan.
pub fn compute_tau_star(ledger: &LocalTimeLedger, s: i64) -> Result<i64> {
    if !ledger.contains(s) {
        return Err(Error::Precondition(format!("step {s} is outside the ledger")));
    }
    let mut bal = ledger.tilde_charge_mu(s) - ledger.tilde_charge_nu(s);
    let mut min = bal;
    for t in s + 1..=ledger.horizon_fwd() {
        bal += ledger.tilde_charge_mu(t) - ledger.tilde_charge_nu(t);
        min = min.min(bal);
        if bal == 0 {
            return Ok(t);
        }
    }
    Err(Error::HorizonExceeded { steps: (ledger.horizon_fwd() - s) as u64, attained: min })
}

/// `tau*` for every `mu_tilde`-charged step in `[lo, hi]`, or `None` when
/// the balancing time lies beyond the forward horizon.
///
/// Uses the prefix `Q` of signed charges: for a charged `s`, `tau*(s)` is the
/// first `t > s` with `Q(t) <= Q(s - 1)`, which in exact mode is the first
/// return to the level. A right-to-left sweep keeps the record lows of `Q`
/// to the right of the current step on a stack.
pub fn tau_star_map(ledger: &LocalTimeLedger, lo: i64, hi: i64) -> Vec<(i64, Option<i64>)> {
    let (pm, pn) = ledger.tilde_prefix_raw();
    let bwd = ledger.horizon_bwd();
    // q(k): balance over step indices < k; step n has index n + bwd.
    let q = |k: usize| pm[k] - pn[k];
    let len = pm.len() - 1;
    let lo_idx = (lo + bwd).max(0) as usize;
    let hi_idx = ((hi + bwd) as usize).min(len - 1);
    // Prefix positions k >= i + 2 that are strict record lows, bottom = lowest q.
    let mut stack: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for i in (lo_idx..len).rev() {
        let k = i + 2;
        if k <= len {
            while stack.last().is_some_and(|&top| q(top) >= q(k)) {
                stack.pop();
            }
            stack.push(k);
        }
        if i > hi_idx || pm[i + 1] == pm[i] {
            continue;
        }
        let thr = q(i);
        let j = stack.partition_point(|&k| q(k) <= thr);
        let t = (j > 0).then(|| stack[j - 1] as i64 - 1 - bwd);
        out.push((i as i64 - bwd, t));
    }
    out.reverse();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Excursion {
    pub left: i64,
    pub right: i64,
    /// `l^mu(excursion)` in units of `1/q`.
    pub mass: i64,
}

impl Excursion {
    pub fn new(ledger: &LocalTimeLedger, left: i64, right: i64) -> Result<Self> {
        if left > right || !ledger.contains(left) || !ledger.contains(right) {
            return Err(Error::Precondition(format!("[{left}, {right}] is not inside the ledger")));
        }
        if ledger.tilde_balance(left, right) != 0 {
            return Err(Error::Precondition(format!("[{left}, {right}] is not balanced")));
        }
        let mass = (left..=right).map(|n| ledger.tilde_charge_mu(n)).sum();
        Ok(Excursion { left, right, mass })
    }

    pub fn mass_rational(&self, q: u64) -> Rational {
        Rational::new(self.mass, q as i64)
    }

    pub fn len(&self) -> i64 {
        self.right - self.left
    }

    pub fn is_empty(&self) -> bool {
        self.mass == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainLevel {
    /// Level `u` in units of `1/q`.
    pub u: i64,
    pub rho: i64,
    pub sigma: i64,
    /// Whether `[sigma, rho]` balances exactly.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcursionChain {
    pub levels: Vec<ChainLevel>,
    pub excursions: Vec<Excursion>,
}

/// `rho(u)`, `sigma(u)` for `u = 0, 1, ..., up_to_level` and the distinct
/// exact intervals `[sigma(u), rho(u)]`, `u >= 1`, which are nested
/// excursions growing with `u`.
///
/// `rho(u)` is the first `t >= 0` where the balance over `(0, t]` reaches
/// `-u`; `sigma(u)` the last `t <= 0` where the balance over `[t, 0]` is at
/// least `u`.
pub fn decompose_excursions(ledger: &LocalTimeLedger, up_to_level: i64) -> Result<ExcursionChain> {
    let mut levels = Vec::new();
    let mut excursions: Vec<Excursion> = Vec::new();
    let (fwd, bwd) = (ledger.horizon_fwd(), ledger.horizon_bwd());
    let (mut rho, mut f) = (0i64, 0i64);
    let mut sigma = 0i64;
    let mut b = ledger.tilde_balance(0, 0);
    for u in 0..=up_to_level {
        while f > -u {
            rho += 1;
            if rho > fwd {
                return Err(Error::HorizonExceeded { steps: fwd as u64, attained: (u - 1).max(0) });
            }
            f += ledger.tilde_charge_mu(rho) - ledger.tilde_charge_nu(rho);
        }
        while b < u {
            sigma -= 1;
            if -sigma > bwd {
                return Err(Error::HorizonExceeded { steps: bwd as u64, attained: (u - 1).max(0) });
            }
            b += ledger.tilde_charge_mu(sigma) - ledger.tilde_charge_nu(sigma);
        }
        // sigma(u) is the *last* t <= 0 with B(t) >= u; the scan above found
        // the first one going left, which is the same point.
        let exact = b == u && f == -u;
        levels.push(ChainLevel { u, rho, sigma, exact });
        if u >= 1 && exact && excursions.last().is_none_or(|e| (e.left, e.right) != (sigma, rho)) {
            excursions.push(Excursion::new(ledger, sigma, rho)?);
        }
    }
    Ok(ExcursionChain { levels, excursions })
}

/// `sum over mu-charged s in [left, right)` of `mu(x_s) * psi((tau*(s) - s) * dt)`.
pub fn cost_of_tau_star(ledger: &LocalTimeLedger, exc: &Excursion, g: &Gauge, dt: f64) -> Result<f64> {
    let q = ledger.denominator() as f64;
    let mut total = 0.0;
    for (s, t) in tau_star_map(ledger, exc.left, exc.right - 1) {
        let t = t.ok_or(Error::HorizonExceeded { steps: ledger.horizon_fwd() as u64, attained: 0 })?;
        total += ledger.tilde_charge_mu(s) as f64 / q * g.apply((t - s) as f64 * dt);
    }
    Ok(total)
}

/// CSV `left,right,mass` with the mass as an exact rational.
pub fn write_excursions_csv<W: Write>(excursions: &[Excursion], q: u64, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["left", "right", "mass"]).map_err(csv_err)?;
    for e in excursions {
        w.write_record([
            e.left.to_string(),
            e.right.to_string(),
            crate::rational::format_rational(&e.mass_rational(q)),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Charges of a measure pair on a dense site window, for streaming scans.
#[derive(Debug, Clone)]
pub struct ChargeTable {
    lo: i64,
    net: Vec<i64>,
}

impl ChargeTable {
    /// Net charge `mu_tilde(x) - nu_tilde(x)` per site.
    pub fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let span = match (mu.span(), nu.span()) {
            (Some(a), Some(b)) => (a.0.min(b.0), a.1.max(b.1)),
            (a, b) => a.or(b).unwrap_or((0, 0)),
        };
        let mut net = vec![0i64; (span.1 - span.0 + 1) as usize];
        for &(x, u) in mu.atoms() {
            net[(x - span.0) as usize] += u as i64;
        }
        for &(x, u) in nu.atoms() {
            net[(x - span.0) as usize] -= u as i64;
        }
        ChargeTable { lo: span.0, net }
    }

    /// Smallest and largest site carrying a charge.
    pub fn span(&self) -> (i64, i64) {
        (self.lo, self.lo + self.net.len() as i64 - 1)
    }

    #[inline]
    pub fn net(&self, x: i64) -> i64 {
        usize::try_from(x - self.lo).ok().and_then(|i| self.net.get(i)).copied().unwrap_or(0)
    }
}

/// Result of a streaming embedding run.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    pub result: EmbeddingResult,
    pub start: i64,
    /// Sites at steps `T* - w ..= T* + w` when requested and not censored.
    pub window: Option<Vec<i64>>,
}

/// Computes `T*` for the walk of `seed` without materializing the path.
///
/// Same increments and flag as [`crate::walk::sample_walk`] +
/// [`compute_t_star`]; `horizon` caps the forward search. With `window = w`
/// the sites around `T*` are kept, drawing from the backward stream when
/// `T* < w`.
pub fn stream_t_star(
    seed: u64,
    pair: &MeasurePair,
    table: &ChargeTable,
    mode: Mode,
    horizon: u64,
    dt: f64,
    window: usize,
) -> Result<StreamOutcome> {
    check_mode(pair, mode)?;
    let start = draw_start(seed, &pair.mu);
    let u = pair.orthogonal || draw_u_flag(seed, pair, start);
    let Some((ts, site)) = t_star_by_visits(seed, table, mode, start, u, horizon) else {
        return Ok(StreamOutcome { result: EmbeddingResult::censored(horizon, dt, mode), start, window: None });
    };
    let result = EmbeddingResult::found(ts, dt, site, mode, u);
    if window == 0 {
        return Ok(StreamOutcome { result, start, window: None });
    }
    // Rebuild the sites around T* from the addressable increments.
    let w = window as u64;
    let mut win = Vec::with_capacity(2 * window + 1);
    let back_needed = w.saturating_sub(ts);
    if back_needed > 0 {
        let mut y = start;
        let mut back: Vec<i64> = increments(seed, rng::STREAM_BWD, 0, back_needed)
            .into_iter()
            .map(|d| {
                y += d;
                y
            })
            .collect();
        back.reverse();
        win.extend(back);
    }
    let first = ts.saturating_sub(w);
    let mut before = vec![site];
    let mut y = site;
    for d in increments(seed, rng::STREAM_FWD, first, ts - first).into_iter().rev() {
        y -= d;
        before.push(y);
    }
    before.reverse();
    win.extend(before);
    let mut y = site;
    for d in increments(seed, rng::STREAM_FWD, ts, w) {
        y += d;
        win.push(y);
    }
    Ok(StreamOutcome { result, start, window: Some(win) })
}

/// Increments `from + 1 ..= from + count` of a stream, as `+1`/`-1`.
fn increments(seed: u64, stream: u64, from: u64, count: u64) -> Vec<i64> {
    if count == 0 {
        return Vec::new();
    }
    let first_block = from / 64;
    let last_block = (from + count - 1) / 64;
    let mut blocks = vec![0u64; (last_block - first_block + 1) as usize];
    rng::fill_blocks(seed, stream, first_block, &mut blocks);
    (from..from + count)
        .map(|i| {
            let k = i - first_block * 64;
            if (blocks[(k / 64) as usize] >> (k % 64)) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

fn t_star_by_visits(seed: u64, table: &ChargeTable, mode: Mode, start: i64, u: bool, horizon: u64) -> Option<(u64, i64)> {
    if !u {
        return Some((0, start));
    }
    let (lo, hi) = table.span();
    let mut d = table.net(start);
    for (n, x) in WindowVisits::new(seed, rng::STREAM_FWD, start, lo, hi, horizon) {
        d += table.net(x);
        let hit = match mode {
            Mode::Exact => d == 0,
            Mode::Crossing => d <= 0,
        };
        if hit {
            return Some((n, x));
        }
    }
    None
}

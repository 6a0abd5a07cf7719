//! Transport matrices on the forward-looking polytope of a point
//! configuration, crossing repair, and the window inequality
//!
//! ```text
//! sum_{i<=N} sum_j + sum_i sum_{j<=N}  pi_ij psi(b_j - a_i)  >=  2 sum_{i<=N} psi(tau(a_i) - a_i)
//! ```
//!
//! Entries are exact rationals; `psi` is only evaluated in floating point
//! when a cost is reported.

use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::alloc::{compute_n, stable_allocation, PointConfig, StableMatch};
use crate::error::{ConstraintViolation, Error, Result};
use crate::gauge::Gauge;
use crate::rational::{self, Rational};
use crate::rng;

/// Bound on the common denominator of matrix entries read from input.
pub const MAX_DENOMINATOR: i64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Rational>,
    /// Constraint window `N`: rows and columns `< N` (0-based) sum to one.
    window: usize,
}

impl TransportMatrix {
    pub fn zeros(rows: usize, cols: usize, window: usize) -> Self {
        TransportMatrix { rows, cols, entries: vec![Rational::zero(); rows * cols], window }
    }

    /// Indicator of a stable match: `pi_{i, tau(i)} = 1`.
    pub fn from_match(m: &StableMatch, cols: usize, window: usize) -> Self {
        let mut pi = Self::zeros(m.tau.len(), cols, window);
        for (i, &j) in m.tau.iter().enumerate() {
            pi.set(i, j, Rational::one());
        }
        pi
    }

    /// Builds from 1-based `[i, j, numerator, denominator]` triplets.
    ///
    /// Entries must lie in `[-1, 1]` and share a common denominator of at
    /// most [`MAX_DENOMINATOR`]; every later sum and repair then stays on
    /// that grid and cannot overflow.
    pub fn from_triplets(rows: usize, cols: usize, window: usize, triplets: &[[i64; 4]]) -> Result<Self> {
        let mut pi = Self::zeros(rows, cols, window);
        let mut common: i64 = 1;
        for &[i, j, p, q] in triplets {
            if i < 1 || j < 1 || i as usize > rows || j as usize > cols {
                return Err(Error::Constraint(ConstraintViolation::Shape {
                    rows: i.max(0) as usize,
                    cols: j.max(0) as usize,
                    expected_rows: rows,
                    expected_cols: cols,
                }));
            }
            if q == 0 {
                return Err(Error::Parse(format!("zero denominator in entry ({i}, {j})")));
            }
            if p.unsigned_abs() > q.unsigned_abs() || q.unsigned_abs() > MAX_DENOMINATOR as u64 {
                return Err(Error::Parse(format!("entry ({i}, {j}) = {p}/{q} is out of range")));
            }
            let r = Rational::new(p, q);
            common = common
                .checked_mul(r.denom() / common.gcd(r.denom()))
                .filter(|&d| d <= MAX_DENOMINATOR)
                .ok_or_else(|| Error::Parse(format!("entries need a common denominator above {MAX_DENOMINATOR}")))?;
            let v = pi.get(i as usize - 1, j as usize - 1) + r;
            pi.set(i as usize - 1, j as usize - 1, v);
        }
        Ok(pi)
    }

    /// Nonzero entries as 1-based `[i, j, numerator, denominator]`.
    pub fn triplets(&self) -> Vec<[i64; 4]> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if !v.is_zero() {
                    out.push([i as i64 + 1, j as i64 + 1, *v.numer(), *v.denom()]);
                }
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn window(&self) -> usize {
        self.window
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Rational {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.entries[i * self.cols + j] = v;
    }

    #[inline]
    fn positive(&self, i: usize, j: usize) -> bool {
        *self.entries[i * self.cols + j].numer() > 0
    }

    /// Checks shape, sign, forward-looking property and window sums.
    pub fn validate(&self, cfg: &PointConfig) -> std::result::Result<(), ConstraintViolation> {
        let (na, nb) = (cfg.a().len(), cfg.b().len());
        if self.rows != na || self.cols != nb || self.window > na.min(nb) {
            return Err(ConstraintViolation::Shape {
                rows: self.rows,
                cols: self.cols,
                expected_rows: na,
                expected_cols: nb,
            });
        }
        let f = rational::to_f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = self.get(i, j);
                if v < Rational::zero() {
                    return Err(ConstraintViolation::Negative { row: i, col: j, value: f(&v) });
                }
                if !v.is_zero() && cfg.a()[i] > cfg.b()[j] {
                    return Err(ConstraintViolation::ForwardLooking { row: i, col: j, mass: f(&v) });
                }
            }
        }
        for i in 0..self.window {
            let s: Rational = (0..self.cols).map(|j| self.get(i, j)).sum();
            if !s.is_one() {
                return Err(ConstraintViolation::RowSum { row: i, sum: f(&s), excess: f(&(s - Rational::one())) });
            }
        }
        for j in 0..self.window {
            let s: Rational = (0..self.rows).map(|i| self.get(i, j)).sum();
            if !s.is_one() {
                return Err(ConstraintViolation::ColumnSum { col: j, sum: f(&s), excess: f(&(s - Rational::one())) });
            }
        }
        Ok(())
    }

    /// Left side of the window inequality, `psi` applied to `(b_j - a_i) * scale`.
    pub fn window_cost(&self, cfg: &PointConfig, g: &Gauge, scale: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let weight = usize::from(i < self.window) + usize::from(j < self.window);
                if weight == 0 || !self.positive(i, j) {
                    continue;
                }
                let v = rational::to_f64(&self.get(i, j));
                total += weight as f64 * v * g.apply((cfg.b()[j] - cfg.a()[i]) * scale);
            }
        }
        total
    }
}

/// Four points `a_k < a_i < b_j < b_l` with `pi_kj > 0` and `pi_il > 0`
/// (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Crossing {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

impl fmt::Display for Crossing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, i={}, j={}, l={})", self.k + 1, self.i + 1, self.j + 1, self.l + 1)
    }
}

/// Position of the scan over `(j, i)` pairs of the window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanCursor {
    pub j: usize,
    pub i: usize,
}

fn is_crossed(pi: &TransportMatrix, ranks: &(Vec<usize>, Vec<usize>), c: &Crossing) -> bool {
    let (ra, rb) = ranks;
    ra[c.k] < ra[c.i] && ra[c.i] < rb[c.j] && rb[c.j] < rb[c.l] && pi.positive(c.k, c.j) && pi.positive(c.i, c.l)
}

/// Next crossing in scan order starting at `cursor`: `b_j` of the window
/// left to right; `a_i < b_j` of the window right to left; then `a_k` left
/// of `a_i` right to left and `b_l` right of `b_j` left to right. The
/// cursor is left at the `(j, i)` pair of the returned crossing.
pub fn find_crossing_from(
    pi: &TransportMatrix,
    ranks: &(Vec<usize>, Vec<usize>),
    cursor: &mut ScanCursor,
) -> Option<Crossing> {
    let (ra, rb) = ranks;
    let n = pi.window;
    while cursor.j < n {
        let j = cursor.j;
        // a is decreasing, so "right to left among a_i < b_j" is increasing i
        while cursor.i < n {
            let i = cursor.i;
            if ra[i] < rb[j] {
                for k in i + 1..pi.rows {
                    if !pi.positive(k, j) {
                        continue;
                    }
                    for l in j + 1..pi.cols {
                        if pi.positive(i, l) && rb[l] > rb[j] && ra[k] < ra[i] {
                            return Some(Crossing { k, i, j, l });
                        }
                    }
                }
            }
            cursor.i += 1;
        }
        cursor.j += 1;
        cursor.i = 0;
    }
    None
}

/// First crossing of the window in scan order, if any.
pub fn find_crossing(pi: &TransportMatrix, cfg: &PointConfig) -> Option<Crossing> {
    find_crossing_from(pi, &cfg.ranks(), &mut ScanCursor::default())
}

/// Number of crossings with `i, j` inside the window.
pub fn count_crossings(pi: &TransportMatrix, cfg: &PointConfig) -> usize {
    let ranks = cfg.ranks();
    let mut count = 0;
    for j in 0..pi.window {
        for i in 0..pi.window {
            for k in 0..pi.rows {
                for l in 0..pi.cols {
                    if is_crossed(pi, &ranks, &Crossing { k, i, j, l }) {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

/// Moves `delta = min(pi_kj, pi_il)` from `(k, j), (i, l)` to `(i, j), (k, l)`.
pub fn repair_crossing(pi: &TransportMatrix, cfg: &PointConfig, c: &Crossing) -> Result<TransportMatrix> {
    let in_range = c.k < pi.rows && c.i < pi.rows && c.j < pi.cols && c.l < pi.cols;
    if !in_range || !is_crossed(pi, &cfg.ranks(), c) {
        return Err(Error::Precondition(format!("{c} is not a crossing of the matrix")));
    }
    let mut out = pi.clone();
    apply_repair(&mut out, c);
    Ok(out)
}

fn apply_repair(pi: &mut TransportMatrix, c: &Crossing) {
    let delta = pi.get(c.k, c.j).min(pi.get(c.i, c.l));
    pi.set(c.k, c.j, pi.get(c.k, c.j) - delta);
    pi.set(c.i, c.l, pi.get(c.i, c.l) - delta);
    pi.set(c.i, c.j, pi.get(c.i, c.j) + delta);
    pi.set(c.k, c.l, pi.get(c.k, c.l) + delta);
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub matrix: TransportMatrix,
    pub steps: usize,
    /// Window cost per gauge before the first and after every repair.
    pub trace: Vec<Vec<f64>>,
    pub crossings: Vec<Crossing>,
}

/// Repairs crossings in scan order until none is left in the window. The
/// scan resumes at the `(j, i)` pair of the last repair and restarts from
/// the beginning until a full pass finds nothing.
pub fn repair_sweep(
    pi: &TransportMatrix,
    cfg: &PointConfig,
    max_steps: usize,
    gauges: &[Gauge],
) -> Result<SweepResult> {
    pi.validate(cfg).map_err(Error::Constraint)?;
    let ranks = cfg.ranks();
    let mut cur = pi.clone();
    let costs = |m: &TransportMatrix| gauges.iter().map(|g| m.window_cost(cfg, g, 1.0)).collect::<Vec<_>>();
    let mut trace = vec![costs(&cur)];
    let mut crossings = Vec::new();
    loop {
        let mut cursor = ScanCursor::default();
        let mut repaired = false;
        while let Some(c) = find_crossing_from(&cur, &ranks, &mut cursor) {
            if crossings.len() == max_steps {
                return Err(Error::BudgetExhausted { budget: max_steps, remaining: count_crossings(&cur, cfg) });
            }
            apply_repair(&mut cur, &c);
            crossings.push(c);
            trace.push(costs(&cur));
            repaired = true;
        }
        if !repaired {
            break;
        }
    }
    Ok(SweepResult { matrix: cur, steps: crossings.len(), trace, crossings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    #[serde(rename = "N")]
    pub window: usize,
    pub gauge: Gauge,
}

/// Default window for a configuration: `N` from [`compute_n`], or the
/// whole configuration when the truncation is too short for `N` but the
/// stable match pairs all points among themselves.
pub fn default_window(cfg: &PointConfig) -> Result<usize> {
    match compute_n(cfg) {
        Ok(h) => Ok(h.n),
        Err(e @ Error::TruncationTooShort(_)) => {
            let k = cfg.a().len();
            if k == cfg.b().len() && window_is_closed(&stable_allocation(cfg)?, k) {
                Ok(k)
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

/// Whether the stable match maps `{a_1..a_N}` onto `{b_1..b_N}`, which
/// is what makes its indicator satisfy the window constraints.
pub fn window_is_closed(m: &StableMatch, window: usize) -> bool {
    m.tau.len() >= window && m.tau[..window].iter().all(|&j| j < window)
}

/// Both sides of the window inequality for a feasible matrix.
pub fn inequality_check(pi: &TransportMatrix, cfg: &PointConfig, g: &Gauge) -> Result<CostReport> {
    pi.validate(cfg).map_err(Error::Constraint)?;
    let m = stable_allocation(cfg)?;
    let n = pi.window;
    if !window_is_closed(&m, n) {
        return Err(Error::Precondition(format!("the stable match does not close the window N = {n}")));
    }
    let lhs = pi.window_cost(cfg, g, 1.0);
    let rhs = 2.0 * stable_cost(cfg, &m, n, g, 1.0);
    Ok(CostReport { lhs, rhs, margin: lhs - rhs, window: n, gauge: g.clone() })
}

/// `sum_{i < window} psi((tau(a_i) - a_i) * scale)`.
pub fn stable_cost(cfg: &PointConfig, m: &StableMatch, window: usize, g: &Gauge, scale: f64) -> f64 {
    (0..window).map(|i| g.apply((cfg.b()[m.tau[i]] - cfg.a()[i]) * scale)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub min_cost: f64,
    /// `matching[i] = j`: `a_i -> b_j`, 0-based.
    pub matching: Vec<usize>,
    /// Number of feasible bijections enumerated.
    pub feasible: usize,
}

pub const ORACLE_LIMIT: usize = 8;

/// Exhaustive minimum of `sum psi(b_sigma(i) - a_i)` over bijections
/// `sigma` of the window with `b_sigma(i) > a_i`.
pub fn permutation_oracle(cfg: &PointConfig, g: &Gauge, window: usize) -> Result<OracleResult> {
    if window > ORACLE_LIMIT {
        return Err(Error::SizeLimit { size: window, limit: ORACLE_LIMIT });
    }
    if window > cfg.a().len() || window > cfg.b().len() {
        return Err(Error::TruncationTooShort(format!("window {window} exceeds the configuration")));
    }
    struct Search<'a> {
        cfg: &'a PointConfig,
        g: &'a Gauge,
        n: usize,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Option<(f64, Vec<usize>)>,
        feasible: usize,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, cost: f64) {
            if i == self.n {
                self.feasible += 1;
                if self.best.as_ref().is_none_or(|(b, _)| cost < *b) {
                    self.best = Some((cost, self.current.clone()));
                }
                return;
            }
            for j in 0..self.n {
                let gap = self.cfg.b()[j] - self.cfg.a()[i];
                if self.used[j] || gap <= 0.0 {
                    continue;
                }
                self.used[j] = true;
                self.current.push(j);
                self.go(i + 1, cost + self.g.apply(gap));
                self.current.pop();
                self.used[j] = false;
            }
        }
    }
    let mut s = Search { cfg, g, n: window, used: vec![false; window], current: Vec::new(), best: None, feasible: 0 };
    s.go(0, 0.0);
    let (min_cost, matching) =
        s.best.ok_or_else(|| Error::Precondition("no feasible matching inside the window".into()))?;
    Ok(OracleResult { min_cost, matching, feasible: s.feasible })
}

/// Random feasible matrix: the stable indicator followed by `perturbations`
/// random mass swaps `(i,j),(k,l) -> (i,l),(k,j)` that keep all sums and the
/// forward-looking property. Moved masses are multiples of 1/12.
pub fn sample_feasible_matrix(cfg: &PointConfig, window: usize, seed: u64, perturbations: usize) -> Result<TransportMatrix> {
    let m = stable_allocation(cfg)?;
    if !window_is_closed(&m, window) {
        return Err(Error::Precondition(format!("the stable match does not close the window N = {window}")));
    }
    let mut pi = TransportMatrix::from_match(&m, cfg.b().len(), window);
    let mut r = rng::stream_rng(seed, rng::STREAM_AUX);
    let unit = Rational::new(1, 12);
    let (rows, cols) = (pi.rows, pi.cols);
    if rows < 2 {
        return Ok(pi);
    }
    let mut done = 0;
    let mut attempts = 0;
    while done < perturbations && attempts < 50 * perturbations + 100 {
        attempts += 1;
        let (i, k) = (r.random_range(0..rows), r.random_range(0..rows));
        if i == k {
            continue;
        }
        let (j, l) = (r.random_range(0..cols), r.random_range(0..cols));
        if j == l || !pi.positive(i, j) || !pi.positive(k, l) {
            continue;
        }
        if cfg.a()[i] > cfg.b()[l] || cfg.a()[k] > cfg.b()[j] {
            continue;
        }
        let cap = pi.get(i, j).min(pi.get(k, l));
        let steps = (cap / unit).to_integer();
        if steps < 1 {
            continue;
        }
        let delta = unit * Rational::from_integer(r.random_range(1..=steps));
        pi.set(i, j, pi.get(i, j) - delta);
        pi.set(k, l, pi.get(k, l) - delta);
        pi.set(i, l, pi.get(i, l) + delta);
        pi.set(k, j, pi.get(k, j) + delta);
        done += 1;
    }
    Ok(pi)
}

/// JSON instance for the `repair` and `inequality` commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Sparse 1-based triplets `[i, j, numerator, denominator]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<[i64; 4]>>,
}

impl Instance {
    /// Configuration, window and matrix; without explicit entries the
    /// stable indicator is used.
    pub fn resolve(&self) -> Result<(PointConfig, TransportMatrix)> {
        let cfg = PointConfig::new(self.a.clone(), self.b.clone())?;
        let window = match self.window {
            Some(n) => n,
            None => default_window(&cfg)?,
        };
        if window == 0 || window > cfg.a().len().min(cfg.b().len()) {
            return Err(Error::Config(format!("window N = {window} does not fit the configuration")));
        }
        let pi = match &self.matrix {
            Some(t) => TransportMatrix::from_triplets(cfg.a().len(), cfg.b().len(), window, t)?,
            None => TransportMatrix::from_match(&stable_allocation(&cfg)?, cfg.b().len(), window),
        };
        Ok((cfg, pi))
    }
}

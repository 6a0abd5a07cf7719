//! Visit counts and the additive functionals `L^mu`, `L^nu` along a path.
//!
//! Everything is kept in integer units of `1/q`. A visit to site `x` at
//! step `k` charges `mu(x)` to `L^mu` and `nu(x)` to `L^nu`; `L(n)` counts
//! the charges over steps `0..=n` (or `n..=0` for negative `n`), so the
//! time-0 visit is included on both sides.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, MeasurePair};
use crate::rational::{format_rational, Rational};
use crate::walk::{csv_err, WalkPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Mu,
    Nu,
    Sum,
}

/// Prefix sums of per-step charges over the whole two-sided index range.
#[derive(Debug, Clone)]
struct Prefix(Vec<i64>);

impl Prefix {
    fn build(sites: &[i64], m: &DiscreteMeasure) -> Self {
        let mut p = Vec::with_capacity(sites.len() + 1);
        let mut acc = 0i64;
        p.push(0);
        for &x in sites {
            acc += m.units_at(x) as i64;
            p.push(acc);
        }
        Prefix(p)
    }

    /// Sum of charges at indices `lo..=hi`.
    #[inline]
    fn range(&self, lo: usize, hi: usize) -> i64 {
        self.0[hi + 1] - self.0[lo]
    }
}

#[derive(Debug, Clone)]
pub struct LocalTimeLedger {
    bwd: usize,
    fwd: usize,
    start: i64,
    seed: Option<u64>,
    q: u64,
    /// Site at signed step `n`, stored at index `n + bwd`.
    sites: Vec<i64>,
    mu: Prefix,
    nu: Prefix,
    /// Functionals of the orthogonal parts; `None` when the pair is orthogonal.
    tilde: Option<(Prefix, Prefix)>,
    mu_measure: DiscreteMeasure,
    nu_measure: DiscreteMeasure,
    mu_tilde: DiscreteMeasure,
    nu_tilde: DiscreteMeasure,
}

/// Builds the ledger in one pass per direction.
pub fn build_ledger(path: &WalkPath, pair: &MeasurePair) -> Result<LocalTimeLedger> {
    if pair.mu.denominator() != pair.nu.denominator() {
        return Err(Error::Config("measure pair has mismatched denominators".into()));
    }
    let mut sites = path.backward_sites();
    sites.reverse();
    let fwd = path.forward_sites();
    sites.extend_from_slice(&fwd[1..]);
    let mu = Prefix::build(&sites, &pair.mu);
    let nu = Prefix::build(&sites, &pair.nu);
    let tilde = (!pair.orthogonal)
        .then(|| (Prefix::build(&sites, &pair.mu_tilde), Prefix::build(&sites, &pair.nu_tilde)));
    Ok(LocalTimeLedger {
        bwd: path.horizon_bwd() as usize,
        fwd: path.horizon_fwd() as usize,
        start: path.start(),
        seed: path.seed(),
        q: pair.denominator(),
        sites,
        mu,
        nu,
        tilde,
        mu_measure: pair.mu.clone(),
        nu_measure: pair.nu.clone(),
        mu_tilde: pair.mu_tilde.clone(),
        nu_tilde: pair.nu_tilde.clone(),
    })
}

impl LocalTimeLedger {
    pub fn horizon_fwd(&self) -> i64 {
        self.fwd as i64
    }

    pub fn horizon_bwd(&self) -> i64 {
        self.bwd as i64
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn denominator(&self) -> u64 {
        self.q
    }

    pub fn contains(&self, n: i64) -> bool {
        -(self.bwd as i64) <= n && n <= self.fwd as i64
    }

    #[inline]
    fn idx(&self, n: i64) -> usize {
        debug_assert!(self.contains(n), "step {n} outside ledger");
        (n + self.bwd as i64) as usize
    }

    pub fn site(&self, n: i64) -> i64 {
        self.sites[self.idx(n)]
    }

    fn prefix(&self, f: Functional) -> (&Prefix, Option<&Prefix>) {
        match f {
            Functional::Mu => (&self.mu, None),
            Functional::Nu => (&self.nu, None),
            Functional::Sum => (&self.mu, Some(&self.nu)),
        }
    }

    /// `l[s, t]` in units for the chosen functional; `s <= t`.
    pub fn interval(&self, f: Functional, s: i64, t: i64) -> i64 {
        let (lo, hi) = (self.idx(s), self.idx(t));
        let (a, b) = self.prefix(f);
        a.range(lo, hi) + b.map_or(0, |b| b.range(lo, hi))
    }

    /// Cumulated functional from step 0 to `n` (either direction).
    pub fn cumulative(&self, f: Functional, n: i64) -> i64 {
        if n >= 0 {
            self.interval(f, 0, n)
        } else {
            self.interval(f, n, 0)
        }
    }

    pub fn lmu(&self, n: i64) -> i64 {
        self.cumulative(Functional::Mu, n)
    }

    pub fn lnu(&self, n: i64) -> i64 {
        self.cumulative(Functional::Nu, n)
    }

    /// `D(n) = Lmu(n) - Lnu(n)` in units of `1/q`.
    pub fn d(&self, n: i64) -> i64 {
        self.lmu(n) - self.lnu(n)
    }

    pub fn d_rational(&self, n: i64) -> Rational {
        Rational::new(self.d(n), self.q as i64)
    }

    /// Charge of the single step `n` under `mu` / `nu`.
    pub fn charge_mu(&self, n: i64) -> i64 {
        self.interval(Functional::Mu, n, n)
    }

    pub fn charge_nu(&self, n: i64) -> i64 {
        self.interval(Functional::Nu, n, n)
    }

    /// Charges used by the embedding: those of the orthogonal parts.
    fn tilde_prefix(&self) -> (&Prefix, &Prefix) {
        match &self.tilde {
            Some((m, n)) => (m, n),
            None => (&self.mu, &self.nu),
        }
    }

    /// `l^mu_tilde[s, t] - l^nu_tilde[s, t]` in units.
    pub fn tilde_balance(&self, s: i64, t: i64) -> i64 {
        let (m, n) = self.tilde_prefix();
        let (lo, hi) = (self.idx(s), self.idx(t));
        m.range(lo, hi) - n.range(lo, hi)
    }

    pub fn tilde_charge_mu(&self, n: i64) -> i64 {
        let i = self.idx(n);
        self.tilde_prefix().0.range(i, i)
    }

    pub fn tilde_charge_nu(&self, n: i64) -> i64 {
        let i = self.idx(n);
        self.tilde_prefix().1.range(i, i)
    }

    /// Raw prefix of the orthogonal `mu`/`nu` parts; index `k` covers steps
    /// `-bwd .. -bwd + k - 1`.
    pub(crate) fn tilde_prefix_raw(&self) -> (&[i64], &[i64]) {
        let (m, n) = self.tilde_prefix();
        (&m.0, &n.0)
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu_measure
    }

    pub fn nu(&self) -> &DiscreteMeasure {
        &self.nu_measure
    }

    pub fn mu_tilde(&self) -> &DiscreteMeasure {
        &self.mu_tilde
    }

    pub fn nu_tilde(&self) -> &DiscreteMeasure {
        &self.nu_tilde
    }

    /// Number of `k` between 0 and `n` (inclusive) with `site(k) = x`.
    pub fn visits(&self, x: i64, n: i64) -> u64 {
        let (lo, hi) = if n >= 0 { (self.idx(0), self.idx(n)) } else { (self.idx(n), self.idx(0)) };
        self.sites[lo..=hi].iter().filter(|&&s| s == x).count() as u64
    }

    /// Full occupation table up to step `n`.
    pub fn occupation(&self, n: i64) -> BTreeMap<i64, u64> {
        let (lo, hi) = if n >= 0 { (self.idx(0), self.idx(n)) } else { (self.idx(n), self.idx(0)) };
        let mut m = BTreeMap::new();
        for &s in &self.sites[lo..=hi] {
            *m.entry(s).or_insert(0) += 1;
        }
        m
    }

    /// CSV `step,Lmu,Lnu,D` over the whole ledger, values as exact rationals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let q = self.q as i64;
        let fmt = |u: i64| format_rational(&Rational::new(u, q));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "Lmu", "Lnu", "D"]).map_err(csv_err)?;
        for n in -(self.bwd as i64)..=self.fwd as i64 {
            let (a, b) = (self.lmu(n), self.lnu(n));
            w.write_record([n.to_string(), fmt(a), fmt(b), fmt(a - b)]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generalized inverse `S^r` of a functional, `r` in units of `1/q`.
///
/// For `r >= 0` this is the last step `n >= 0` with `l[0, n] <= r`, so
/// `l[0, S^r]` falls short of `r` by less than one atom. Negative `r`
/// mirrors this in backward time using `l[n, 0]` and `-r`. Levels below the
/// time-0 charge map to step 0.
pub fn inverse_local_time(ledger: &LocalTimeLedger, f: Functional, r: i64) -> Result<i64> {
    let level = r.abs();
    let sign = if r >= 0 { 1 } else { -1 };
    let horizon = if r >= 0 { ledger.horizon_fwd() } else { ledger.horizon_bwd() };
    // Cumulated functional is monotone in |n|: binary search for the first
    // step exceeding the level.
    let cum = |m: i64| ledger.cumulative(f, sign * m);
    if cum(horizon) <= level {
        return Err(Error::HorizonExceeded { steps: horizon as u64, attained: cum(horizon) });
    }
    let (mut lo, mut hi) = (0i64, horizon);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cum(mid) > level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(sign * (lo - 1).max(0))
}

//! Two-sided simple random walk on the integer lattice.
//!
//! The walk stands in for two-sided Brownian motion: lattice spacing `dx`,
//! time step `dx^2`. Forward and backward halves are independent one-sided
//! walks glued at step 0. Increments are stored as bits (1 = up) and come
//! from the counter-based streams in [`crate::rng`], so a path can be
//! extended later without changing its existing prefix.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::rational::{self, serde_rational, Rational};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub seed: u64,
    #[serde(with = "serde_rational")]
    pub dx: Rational,
    pub horizon_fwd: u64,
    pub horizon_bwd: u64,
    pub start_law: DiscreteMeasure,
}

impl WalkConfig {
    pub fn new(seed: u64, horizon_fwd: u64, horizon_bwd: u64, start_law: DiscreteMeasure) -> Self {
        WalkConfig { seed, dx: Rational::from_integer(1), horizon_fwd, horizon_bwd, start_law }
    }

    pub fn validate(&self) -> Result<()> {
        if !rational::is_positive(&self.dx) {
            return Err(Error::Config("dx must be positive".into()));
        }
        if self.horizon_fwd == 0 || self.horizon_bwd == 0 {
            return Err(Error::Config("horizons must be at least 1".into()));
        }
        if !self.start_law.is_probability() {
            return Err(Error::Config("start law must be a probability measure".into()));
        }
        Ok(())
    }

    /// Physical time of one step, `dx^2`.
    pub fn dt(&self) -> f64 {
        let dx = rational::to_f64(&self.dx);
        dx * dx
    }
}

/// Draws the starting site from `law` using the start stream of `seed`.
pub fn draw_start(seed: u64, law: &DiscreteMeasure) -> i64 {
    let total = law.total_units();
    if total == 0 {
        return 0;
    }
    let mut u = rng::uniform_below(seed, rng::STREAM_START, total);
    for &(site, units) in law.atoms() {
        if u < units {
            return site;
        }
        u -= units;
    }
    unreachable!("draw below total mass always lands on an atom")
}

/// One direction of increments, packed 64 per word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Steps {
    bits: Vec<u64>,
    len: u64,
}

impl Steps {
    fn generated(seed: u64, stream: u64, len: u64) -> Self {
        let mut bits = vec![0u64; len.div_ceil(64) as usize];
        rng::fill_blocks(seed, stream, 0, &mut bits);
        Steps { bits, len }
    }

    fn from_increments(inc: &[i8]) -> Self {
        let mut bits = vec![0u64; inc.len().div_ceil(64)];
        for (k, &d) in inc.iter().enumerate() {
            if d > 0 {
                bits[k / 64] |= 1 << (k % 64);
            }
        }
        Steps { bits, len: inc.len() as u64 }
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Increment number `k` (1-based): `+1` or `-1`.
    #[inline]
    pub fn step(&self, k: u64) -> i64 {
        let i = k - 1;
        if (self.bits[(i / 64) as usize] >> (i % 64)) & 1 == 1 {
            1
        } else {
            -1
        }
    }

    /// Sum of the first `k` increments, by popcount.
    pub fn displacement(&self, k: u64) -> i64 {
        assert!(k <= self.len);
        let full = (k / 64) as usize;
        let mut ups: u64 = self.bits[..full].iter().map(|w| u64::from(w.count_ones())).sum();
        let rem = k % 64;
        if rem > 0 {
            ups += u64::from((self.bits[full] & ((1u64 << rem) - 1)).count_ones());
        }
        2 * ups as i64 - k as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkPath {
    start: i64,
    fwd: Steps,
    bwd: Steps,
    /// Seed the increments were drawn from; `None` for hand-built paths.
    seed: Option<u64>,
}

/// Samples a path; a deterministic function of the config.
pub fn sample_walk(cfg: &WalkConfig) -> WalkPath {
    let start = draw_start(cfg.seed, &cfg.start_law);
    WalkPath {
        start,
        fwd: Steps::generated(cfg.seed, rng::STREAM_FWD, cfg.horizon_fwd),
        bwd: Steps::generated(cfg.seed, rng::STREAM_BWD, cfg.horizon_bwd),
        seed: Some(cfg.seed),
    }
}

impl WalkPath {
    /// Hand-built path: `fwd_sites[0]` is the site at step 0, `fwd_sites[k]`
    /// the site at step `k`; `bwd_sites[m]` (optional) the site at step `-(m+1)`.
    pub fn from_sites(fwd_sites: &[i64], bwd_sites: &[i64]) -> Result<Self> {
        let start = *fwd_sites.first().ok_or_else(|| Error::Config("path needs a start site".into()))?;
        let diffs = |prev: i64, sites: &[i64]| -> Result<Vec<i8>> {
            let mut last = prev;
            sites
                .iter()
                .map(|&s| {
                    let d = s - last;
                    last = s;
                    match d {
                        1 => Ok(1),
                        -1 => Ok(-1),
                        _ => Err(Error::Config(format!("path jumps by {d}; increments must be +-1"))),
                    }
                })
                .collect()
        };
        let fwd = diffs(start, &fwd_sites[1..])?;
        let bwd = diffs(start, bwd_sites)?;
        Ok(WalkPath {
            start,
            fwd: Steps::from_increments(&fwd),
            bwd: Steps::from_increments(&bwd),
            seed: None,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn horizon_fwd(&self) -> u64 {
        self.fwd.len
    }

    pub fn horizon_bwd(&self) -> u64 {
        self.bwd.len
    }

    pub fn fwd_steps(&self) -> &Steps {
        &self.fwd
    }

    pub fn bwd_steps(&self) -> &Steps {
        &self.bwd
    }

    /// Site at signed step `n`; random access by popcount.
    pub fn position(&self, n: i64) -> Result<i64> {
        if n >= 0 {
            if n as u64 > self.fwd.len {
                return Err(Error::HorizonExceeded { steps: self.fwd.len, attained: 0 });
            }
            Ok(self.start + self.fwd.displacement(n as u64))
        } else {
            let m = n.unsigned_abs();
            if m > self.bwd.len {
                return Err(Error::HorizonExceeded { steps: self.bwd.len, attained: 0 });
            }
            Ok(self.start + self.bwd.displacement(m))
        }
    }

    /// Sites at steps `0..=horizon_fwd`.
    pub fn forward_sites(&self) -> Vec<i64> {
        walk_sites(self.start, &self.fwd)
    }

    /// Sites at steps `0, -1, ..., -horizon_bwd`.
    pub fn backward_sites(&self) -> Vec<i64> {
        walk_sites(self.start, &self.bwd)
    }

    /// Grows the horizons to at least the given lengths. The existing prefix
    /// is unchanged because increments are addressed by step index.
    pub fn extend(&mut self, horizon_fwd: u64, horizon_bwd: u64) -> Result<()> {
        let seed = self
            .seed
            .ok_or_else(|| Error::Precondition("hand-built paths cannot be extended".into()))?;
        if horizon_fwd > self.fwd.len {
            self.fwd = Steps::generated(seed, rng::STREAM_FWD, horizon_fwd);
        }
        if horizon_bwd > self.bwd.len {
            self.bwd = Steps::generated(seed, rng::STREAM_BWD, horizon_bwd);
        }
        Ok(())
    }

    /// CSV `step,position` from `-horizon_bwd` to `horizon_fwd`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "position"]).map_err(csv_err)?;
        let bwd = self.backward_sites();
        for (m, site) in bwd.iter().enumerate().skip(1).rev() {
            w.write_record([(-(m as i64)).to_string(), site.to_string()]).map_err(csv_err)?;
        }
        for (k, site) in self.forward_sites().iter().enumerate() {
            w.write_record([k.to_string(), site.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn walk_sites(start: i64, steps: &Steps) -> Vec<i64> {
    let mut out = Vec::with_capacity(steps.len as usize + 1);
    let mut x = start;
    out.push(x);
    for k in 1..=steps.len {
        x += steps.step(k);
        out.push(x);
    }
    out
}

/// Streams the steps `1..=limit` of one direction of the walk of `seed`,
/// yielding `(step, site)` only for sites inside `[lo, hi]`.
///
/// Words of 64 increments that cannot reach the window are skipped with a
/// popcount, which makes long excursions away from the support cheap.
#[derive(Debug, Clone)]
pub struct WindowVisits {
    seed: u64,
    stream: u64,
    lo: i64,
    hi: i64,
    limit: u64,
    x: i64,
    n: u64,
    buf: Vec<u64>,
    buf_first: u64,
    word: u64,
    bits_left: u32,
}

const VISIT_BUF: usize = 256;

impl WindowVisits {
    pub fn new(seed: u64, stream: u64, start: i64, lo: i64, hi: i64, limit: u64) -> Self {
        WindowVisits {
            seed,
            stream,
            lo,
            hi,
            limit,
            x: start,
            n: 0,
            buf: vec![0; VISIT_BUF],
            buf_first: u64::MAX,
            word: 0,
            bits_left: 0,
        }
    }

    /// Steps consumed so far.
    pub fn steps(&self) -> u64 {
        self.n
    }

    /// Site after the steps consumed so far.
    pub fn site(&self) -> i64 {
        self.x
    }

    fn load_word(&mut self, block: u64) -> u64 {
        let first = block - block % VISIT_BUF as u64;
        if first != self.buf_first {
            rng::fill_blocks(self.seed, self.stream, first, &mut self.buf);
            self.buf_first = first;
        }
        self.buf[(block - first) as usize]
    }
}

impl Iterator for WindowVisits {
    type Item = (u64, i64);

    fn next(&mut self) -> Option<(u64, i64)> {
        while self.n < self.limit {
            if self.bits_left == 0 {
                let word = self.load_word(self.n / 64);
                let far = self.x + 64 < self.lo || self.x - 64 > self.hi;
                if far && self.n + 64 <= self.limit {
                    self.x += 2 * i64::from(word.count_ones()) - 64;
                    self.n += 64;
                    continue;
                }
                self.word = word;
                self.bits_left = 64;
            }
            let up = self.word & 1 == 1;
            self.word >>= 1;
            self.bits_left -= 1;
            self.n += 1;
            self.x += if up { 1 } else { -1 };
            if self.x >= self.lo && self.x <= self.hi {
                return Some((self.n, self.x));
            }
        }
        None
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

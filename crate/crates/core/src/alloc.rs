//! Discrete stable allocation between a decreasing sequence `a` and an
//! increasing sequence `b`, the tail horizon `N`, and the quantile
//! discretization of an excursion.
//!
//! Positions may repeat within one sequence (quantile points on a lattice
//! can coincide). Repeated points are ordered by index: among equal `a`s the
//! larger index lies further left, among equal `b`s the smaller index lies
//! further left. All counting is done on this total order.

use std::cmp::Ordering;

use rand::Rng;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::embedding::{tau_star_map, Excursion};
use crate::error::{Error, Result};
use crate::ledger::LocalTimeLedger;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct PointConfig {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawConfig> for PointConfig {
    type Error = Error;
    fn try_from(raw: RawConfig) -> Result<Self> {
        PointConfig::new(raw.a, raw.b)
    }
}

impl From<PointConfig> for RawConfig {
    fn from(c: PointConfig) -> Self {
        RawConfig { a: c.a, b: c.b }
    }
}

/// A point of the merged configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Point {
    A(usize),
    B(usize),
}

impl PointConfig {
    /// `a` non-increasing, `b` non-decreasing, finite, no value shared by both.
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(Error::Config("point positions must be finite".into()));
        }
        if a.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Config("a must be decreasing".into()));
        }
        if b.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config("b must be increasing".into()));
        }
        // both sorted, so a merge finds shared values
        let (mut i, mut j) = (a.len(), 0);
        while i > 0 && j < b.len() {
            match a[i - 1].partial_cmp(&b[j]) {
                Some(Ordering::Less) => i -= 1,
                Some(Ordering::Greater) => j += 1,
                _ => return Err(Error::Config(format!("a and b share the point {}", b[j]))),
            }
        }
        Ok(PointConfig { a, b })
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Points sorted left to right under the tie convention.
    pub fn merged(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.a.len() + self.b.len());
        let (mut i, mut j) = (self.a.len(), 0);
        // a traversed from its largest index (leftmost) upward in position
        while i > 0 || j < self.b.len() {
            let take_a = match (i > 0, j < self.b.len()) {
                (true, true) => self.a[i - 1] < self.b[j],
                (a_left, _) => a_left,
            };
            if take_a {
                out.push(Point::A(i - 1));
                i -= 1;
            } else {
                out.push(Point::B(j));
                j += 1;
            }
        }
        out
    }

    /// Rank of every `a_i` and `b_j` in the merged order.
    pub fn ranks(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ra = vec![0; self.a.len()];
        let mut rb = vec![0; self.b.len()];
        for (r, p) in self.merged().into_iter().enumerate() {
            match p {
                Point::A(i) => ra[i] = r,
                Point::B(j) => rb[j] = r,
            }
        }
        (ra, rb)
    }
}

/// `tau[i] = j` means `tau(a_i) = b_j` (0-based). `n_tail` is the 1-based
/// index from which `tau(a_i) = b_i` holds throughout the truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StableMatch {
    pub tau: Vec<usize>,
    pub n_tail: usize,
}

impl StableMatch {
    fn from_tau(tau: Vec<usize>) -> Self {
        let n_tail = tau.iter().enumerate().filter(|&(i, &j)| i != j).map(|(i, _)| i + 2).max().unwrap_or(1);
        StableMatch { tau, n_tail }
    }

    /// Whether `b_j` is some `tau(a_i)`.
    pub fn matched_b(&self, nb: usize) -> Vec<Option<usize>> {
        let mut inv = vec![None; nb];
        for (i, &j) in self.tau.iter().enumerate() {
            inv[j] = Some(i);
        }
        inv
    }
}

impl Serialize for StableMatch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("StableMatch", 2)?;
        let pairs: Vec<[usize; 2]> = self.tau.iter().enumerate().map(|(i, &j)| [i + 1, j + 1]).collect();
        st.serialize_field("tau", &pairs)?;
        st.serialize_field("N", &self.n_tail)?;
        st.end()
    }
}

/// Parenthesis matching: sweep right to left, push every `b`, let every
/// `a` take the nearest pending `b`.
pub fn stable_allocation(cfg: &PointConfig) -> Result<StableMatch> {
    let mut tau = vec![usize::MAX; cfg.a.len()];
    let mut stack: Vec<usize> = Vec::new();
    for p in cfg.merged().into_iter().rev() {
        match p {
            Point::B(j) => stack.push(j),
            Point::A(i) => {
                tau[i] = stack.pop().ok_or_else(|| {
                    Error::TruncationTooShort(format!("a_{} = {} has no partner to its right", i + 1, cfg.a[i]))
                })?;
            }
        }
    }
    Ok(StableMatch::from_tau(tau))
}

/// Direct evaluation of `tau(a) = min{b > a : |B ∩ [a,b]| = |A ∩ [a,b]|}`.
pub fn stable_allocation_naive(cfg: &PointConfig) -> Result<StableMatch> {
    let merged = cfg.merged();
    let (ra, _) = cfg.ranks();
    let mut tau = Vec::with_capacity(cfg.a.len());
    for (i, &r) in ra.iter().enumerate() {
        let (mut na, mut nb) = (0usize, 0usize);
        let mut found = None;
        for p in &merged[r..] {
            match *p {
                Point::A(_) => na += 1,
                Point::B(j) => {
                    nb += 1;
                    if na == nb {
                        found = Some(j);
                        break;
                    }
                }
            }
        }
        tau.push(found.ok_or_else(|| {
            Error::TruncationTooShort(format!("a_{} = {} has no partner to its right", i + 1, cfg.a[i]))
        })?);
    }
    Ok(StableMatch::from_tau(tau))
}

/// `f(x) = |A ∩ [b_1, x]| - |B ∩ [b_1, x]|` sampled at every point of
/// `[b_1, a_1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FFunction {
    pub breakpoints: Vec<(f64, i64)>,
    pub min: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Horizon {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: Option<i64>,
    pub f: Option<FFunction>,
}

/// Tail horizon: `N = 1` when `a_1 < b_1`; otherwise `M = min f` on
/// `[b_1, a_1]` and `N` is the first `n` with `f(b_n) = M - 1`.
pub fn compute_n(cfg: &PointConfig) -> Result<Horizon> {
    let (Some(&a1), Some(&b1)) = (cfg.a.first(), cfg.b.first()) else {
        return Err(Error::TruncationTooShort("both sequences need at least one point".into()));
    };
    if a1 < b1 {
        return Ok(Horizon { n: 1, m: None, f: None });
    }
    let merged = cfg.merged();
    let (_, rb) = cfg.ranks();
    let mut f = 0i64;
    let mut breakpoints = Vec::new();
    let mut after_a1 = false;
    let mut min = i64::MAX;
    for p in &merged[rb[0]..] {
        match *p {
            Point::A(i) => {
                f += 1;
                if i == 0 {
                    breakpoints.push((cfg.a[0], f));
                    min = min.min(f);
                    after_a1 = true;
                    continue;
                }
            }
            Point::B(_) => f -= 1,
        }
        if !after_a1 {
            let x = match *p {
                Point::A(i) => cfg.a[i],
                Point::B(j) => cfg.b[j],
            };
            breakpoints.push((x, f));
            min = min.min(f);
        } else if let Point::B(j) = *p {
            if f == min - 1 {
                return Ok(Horizon { n: j + 1, m: Some(min), f: Some(FFunction { breakpoints, min }) });
            }
        }
    }
    Err(Error::TruncationTooShort(format!("f never reaches M - 1 = {} within the truncation", min - 1)))
}

/// Random interleaved configuration: a random word over `{a, b}` of
/// length `len` flanked by `pad` wrapping pairs, extra `b`s appended so
/// every `a` is matched. Positions are integers with random gaps.
pub fn random_config<R: Rng>(rng: &mut R, len: usize, pad: usize) -> PointConfig {
    let mut word: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect(); // true = a
    // unmatched a's seen right to left need extra b's on the right
    let mut pending = 0usize;
    let mut deficit = 0usize;
    for &is_a in word.iter().rev() {
        if is_a {
            if pending > 0 {
                pending -= 1;
            } else {
                deficit += 1;
            }
        } else {
            pending += 1;
        }
    }
    word.extend(std::iter::repeat_n(false, deficit));
    let mut full: Vec<bool> = std::iter::repeat_n(true, pad).collect();
    full.extend(word);
    full.extend(std::iter::repeat_n(false, pad));
    let mut x = 0.0;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for is_a in full {
        x += f64::from(rng.random_range(1u8..=3));
        if is_a {
            a.push(x);
        } else {
            b.push(x);
        }
    }
    a.reverse();
    PointConfig::new(a, b).expect("generated positions are strictly increasing")
}

/// Random perfectly matched configuration of `k` pairs (a uniform Dyck
/// word by rejection-free cycle lemma) plus `pad` wrapping pairs.
pub fn random_dyck_config<R: Rng>(rng: &mut R, k: usize, pad: usize) -> PointConfig {
    // k opens, k+1 closes, shuffled; rotate at the first minimum (cycle lemma)
    let mut seq: Vec<i8> = std::iter::repeat_n(1, k).chain(std::iter::repeat_n(-1, k + 1)).collect();
    for i in (1..seq.len()).rev() {
        let j = rng.random_range(0..=i);
        seq.swap(i, j);
    }
    let (mut h, mut min, mut at) = (0i64, 0i64, 0usize);
    for (i, &s) in seq.iter().enumerate() {
        h += i64::from(s);
        if h < min {
            min = h;
            at = i + 1;
        }
    }
    let len = seq.len();
    seq.rotate_left(at % len);
    seq.pop(); // drop the trailing close
    let mut full: Vec<bool> = std::iter::repeat_n(true, pad).collect();
    full.extend(seq.iter().map(|&s| s == 1));
    full.extend(std::iter::repeat_n(false, pad));
    let mut x = 0.0;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for is_a in full {
        x += f64::from(rng.random_range(1u8..=3));
        if is_a {
            a.push(x);
        } else {
            b.push(x);
        }
    }
    a.reverse();
    PointConfig::new(a, b).expect("generated positions are strictly increasing")
}

/// Quantile discretization of one excursion.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantiles {
    pub n: usize,
    /// Padded configuration, positions in steps.
    pub config: PointConfig,
    /// `mu`-mass coordinate of `a_1..a_n` measured from the right end, in
    /// units of `1/q`: `a_i` sits at coordinate `i * M / n`.
    pub a_mass: Vec<Rational>,
    /// `nu`-mass coordinate of `b_1..b_n` from the left end.
    pub b_mass: Vec<Rational>,
    pub mesh: f64,
}

impl Quantiles {
    /// `g_n(a)`: index of the nearest `a`-point at or left of `a` (the
    /// largest index among repeats).
    pub fn g_index(&self, a: f64) -> Option<usize> {
        let pts = self.config.a();
        // a is non-increasing: first index with pts[i] <= a, then walk to the last repeat
        let i = pts.partition_point(|&p| p > a);
        if i == pts.len() {
            return None;
        }
        let v = pts[i];
        Some(i + pts[i..].partition_point(|&p| p == v) - 1)
    }

    /// `h_n(b)`: index of the nearest `b`-point at or right of `b` (the
    /// smallest index among repeats).
    pub fn h_index(&self, b: f64) -> Option<usize> {
        let pts = self.config.b();
        let j = pts.partition_point(|&p| p < b);
        (j < pts.len()).then_some(j)
    }
}

/// `a_i` is the step where the `mu`-mass counted from the right end of the
/// excursion first reaches `i * M / n`; `b_j` the step where the `nu`-mass
/// from the left end first reaches `j * M / n`. Atoms heavier than `M / n`
/// produce repeated points. `n` padding points with mesh `len / n` are
/// added on each side.
pub fn quantile_discretize(ledger: &LocalTimeLedger, exc: &Excursion, n: usize) -> Result<Quantiles> {
    if exc.mass == 0 {
        return Err(Error::EmptyExcursion);
    }
    if n == 0 {
        return Err(Error::Precondition("need at least one quantile".into()));
    }
    let m = exc.mass as i128;
    let nn = n as i128;
    let mut a = Vec::with_capacity(2 * n);
    let mut cum: i128 = 0;
    let mut i = 1i128;
    for s in (exc.left..=exc.right).rev() {
        cum += ledger.tilde_charge_mu(s) as i128;
        while i <= nn && cum * nn >= i * m {
            a.push(s as f64);
            i += 1;
        }
    }
    let mut b = Vec::with_capacity(2 * n);
    let mut cum: i128 = 0;
    let mut j = 1i128;
    for t in exc.left..=exc.right {
        cum += ledger.tilde_charge_nu(t) as i128;
        while j <= nn && cum * nn >= j * m {
            b.push(t as f64);
            j += 1;
        }
    }
    debug_assert_eq!((a.len(), b.len()), (n, n));
    let mesh = (exc.right - exc.left) as f64 / n as f64;
    for k in 1..=n {
        a.push(exc.left as f64 - k as f64 * mesh);
        b.push(exc.right as f64 + k as f64 * mesh);
    }
    let coord = |k: usize| Rational::new(k as i64 * exc.mass, n as i64);
    Ok(Quantiles {
        n,
        config: PointConfig::new(a, b)?,
        a_mass: (1..=n).map(coord).collect(),
        b_mass: (1..=n).map(coord).collect(),
        mesh,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// `sup |tau_n(g_n(a)) - tau*(a)|` over charged `a`, in steps.
    pub tau_distance: f64,
    /// `sup |a - g_n(a)|` over `mu`-charged steps.
    pub g_error: f64,
    /// `sup |h_n(b) - b|` over `nu`-charged steps.
    pub h_error: f64,
}

/// Distances between the discretized and the continuum allocation for
/// each `n` in `n_list`.
pub fn tau_n_convergence_test(ledger: &LocalTimeLedger, exc: &Excursion, n_list: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let tau_star: Vec<(i64, i64)> = tau_star_map(ledger, exc.left, exc.right - 1)
        .into_iter()
        .map(|(s, t)| t.map(|t| (s, t)).ok_or(Error::HorizonExceeded { steps: ledger.horizon_fwd() as u64, attained: 0 }))
        .collect::<Result<_>>()?;
    let nu_sites: Vec<i64> = (exc.left..=exc.right).filter(|&t| ledger.tilde_charge_nu(t) > 0).collect();
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let qz = quantile_discretize(ledger, exc, n)?;
        let m = stable_allocation(&qz.config)?;
        let (mut dist, mut g_err, mut h_err) = (0.0f64, 0.0f64, 0.0f64);
        for &(s, t) in &tau_star {
            let gi = qz.g_index(s as f64).ok_or_else(|| Error::Precondition("charged step left of all a-points".into()))?;
            g_err = g_err.max(s as f64 - qz.config.a()[gi]);
            let target = qz.config.b()[m.tau[gi]];
            dist = dist.max((target - t as f64).abs());
        }
        for &t in &nu_sites {
            let hj = qz.h_index(t as f64).ok_or_else(|| Error::Precondition("charged step right of all b-points".into()))?;
            h_err = h_err.max(qz.config.b()[hj] - t as f64);
        }
        rows.push(ConvergenceRow { n, tau_distance: dist, g_error: g_err, h_error: h_err });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(a: &[f64], b: &[f64]) -> PointConfig {
        PointConfig::new(a.to_vec(), b.to_vec()).unwrap()
    }

    fn targets(c: &PointConfig) -> Vec<f64> {
        stable_allocation(c).unwrap().tau.iter().map(|&j| c.b()[j]).collect()
    }

    #[test]
    fn small_examples() {
        assert_eq!(targets(&cfg(&[3.0, 1.0], &[2.0, 4.0])), vec![4.0, 2.0]);
        assert_eq!(targets(&cfg(&[-1.0, -2.0, -3.0], &[1.0, 2.0, 3.0])), vec![1.0, 2.0, 3.0]);
        assert_eq!(targets(&cfg(&[5.0, 4.0], &[6.0, 7.0])), vec![6.0, 7.0]);
    }

    #[test]
    fn truncation_is_reported() {
        assert!(matches!(stable_allocation(&cfg(&[5.0], &[1.0])), Err(Error::TruncationTooShort(_))));
        assert!(matches!(stable_allocation_naive(&cfg(&[5.0], &[1.0])), Err(Error::TruncationTooShort(_))));
    }

    #[test]
    fn validation() {
        assert!(PointConfig::new(vec![1.0, 2.0], vec![3.0]).is_err());
        assert!(PointConfig::new(vec![2.0], vec![4.0, 3.0]).is_err());
        assert!(PointConfig::new(vec![2.0], vec![2.0]).is_err());
        assert!(PointConfig::new(vec![f64::NAN], vec![]).is_err());
        let c: PointConfig = serde_json::from_str(r#"{"a": [3, 1], "b": [2, 4]}"#).unwrap();
        assert_eq!(c.a(), &[3.0, 1.0]);
    }

    #[test]
    fn horizon_examples() {
        let c = cfg(&[5.0, 3.0, 1.0, -1.0, -3.0], &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let h = compute_n(&c).unwrap();
        assert_eq!((h.n, h.m), (4, Some(-1)));
        let f = h.f.unwrap();
        assert_eq!(f.breakpoints, vec![(2.0, -1), (3.0, 0), (4.0, -1), (5.0, 0)]);
        assert_eq!(stable_allocation(&c).unwrap().tau[3], 3);
        assert_eq!(compute_n(&cfg(&[2.0, 1.0], &[3.0, 4.0])).unwrap().n, 1);
        assert!(matches!(compute_n(&cfg(&[5.0, 3.0], &[2.0, 4.0])), Err(Error::TruncationTooShort(_))));
    }

    #[test]
    fn repeated_points_nest() {
        // two copies of an a-point at 1 and two b copies at 3
        let c = cfg(&[1.0, 1.0], &[3.0, 3.0]);
        let m = stable_allocation(&c).unwrap();
        // a_2 is the left copy and takes the right b copy
        assert_eq!(m.tau, vec![0, 1]);
        assert_eq!(m, stable_allocation_naive(&c).unwrap());
    }

    #[test]
    fn json_shape() {
        let m = stable_allocation(&cfg(&[3.0, 1.0], &[2.0, 4.0])).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"tau":[[1,2],[2,1]],"N":3}"#);
    }

    fn check_invariants(c: &PointConfig) -> std::result::Result<(), TestCaseError> {
        let m = stable_allocation(c).unwrap();
        let (ra, rb) = c.ranks();
        let merged = c.merged();
        for (i, &j) in m.tau.iter().enumerate() {
            prop_assert!(c.b()[j] > c.a()[i]);
            let (lo, hi) = (ra[i], rb[j]);
            let na = merged[lo..=hi].iter().filter(|p| matches!(p, Point::A(_))).count();
            prop_assert_eq!(2 * na, hi - lo + 1);
        }
        for (i, &j) in m.tau.iter().enumerate() {
            for (k, &l) in m.tau.iter().enumerate() {
                let (x, y) = ((ra[i], rb[j]), (ra[k], rb[l]));
                let disjoint = x.1 < y.0 || y.1 < x.0;
                let nested = (x.0 <= y.0 && y.1 <= x.1) || (y.0 <= x.0 && x.1 <= y.1);
                prop_assert!(disjoint || nested);
            }
        }
        for i in m.n_tail.saturating_sub(1)..m.tau.len() {
            prop_assert_eq!(m.tau[i], i);
        }
        if let Ok(h) = compute_n(c) {
            for i in h.n - 1..m.tau.len() {
                prop_assert_eq!(m.tau[i], i);
            }
        }
        Ok(())
    }

    fn dirac_ledger(fwd: &[i64], bwd: &[i64]) -> LocalTimeLedger {
        use crate::ledger::build_ledger;
        use crate::measure::{split_measures, DiscreteMeasure};
        use crate::walk::WalkPath;
        let pair = split_measures(&DiscreteMeasure::dirac(0), &DiscreteMeasure::dirac(1)).unwrap();
        build_ledger(&WalkPath::from_sites(fwd, bwd).unwrap(), &pair).unwrap()
    }

    #[test]
    fn single_visit_excursion() {
        let l = dirac_ledger(&[0, 1, 2], &[]);
        let exc = Excursion::new(&l, 0, 1).unwrap();
        let q = quantile_discretize(&l, &exc, 1).unwrap();
        assert_eq!((q.config.a()[0], q.config.b()[0]), (0.0, 1.0));
        for row in tau_n_convergence_test(&l, &exc, &[1, 2, 5, 16]).unwrap() {
            assert_eq!((row.tau_distance, row.g_error, row.h_error), (0.0, 0.0, 0.0));
        }
        let empty = Excursion { left: 2, right: 2, mass: 0 };
        assert!(matches!(quantile_discretize(&l, &empty, 4), Err(Error::EmptyExcursion)));
    }

    // mu tokens (site 0) at steps 0, 2, 4, 6, 10, 12 and nu tokens (site 1)
    // at 1, 7, 9, 11, 13, 15: tau* pairs 0-1, 6-7, 4-9, 10-11, 12-13, 2-15.
    fn six_token_ledger() -> (LocalTimeLedger, Excursion) {
        let l = dirac_ledger(&[0, 1, 0, -1, 0, -1, 0, 1, 2, 1, 0, 1, 0, 1, 2, 1, 2], &[]);
        let exc = Excursion::new(&l, 0, 15).unwrap();
        (l, exc)
    }

    #[test]
    fn quantiles_split_mass_evenly() {
        let (l, exc) = six_token_ledger();
        assert_eq!(exc.mass, 6);
        for n in [1, 2, 4, 5, 6, 9, 12] {
            let q = quantile_discretize(&l, &exc, n).unwrap();
            let m = Rational::from_integer(exc.mass);
            for i in 1..=n {
                assert_eq!(q.a_mass[i - 1], m * Rational::new(i as i64, n as i64));
                // the right-end mu mass reaches i*M/n at a_i and not strictly right of it
                let a = q.config.a()[i - 1] as i64;
                let from = |s: i64| (s..=exc.right).map(|t| l.tilde_charge_mu(t)).sum::<i64>();
                assert!(Rational::from_integer(from(a)) >= q.a_mass[i - 1]);
                assert!(Rational::from_integer(from(a + 1)) < q.a_mass[i - 1]);
                let b = q.config.b()[i - 1] as i64;
                let upto = |t: i64| (exc.left..=t).map(|s| l.tilde_charge_nu(s)).sum::<i64>();
                assert!(Rational::from_integer(upto(b)) >= q.b_mass[i - 1]);
                assert!(Rational::from_integer(upto(b - 1)) < q.b_mass[i - 1]);
            }
            assert!(q.config.a()[n..].iter().all(|&x| x < exc.left as f64));
            assert!(q.config.b()[n..].iter().all(|&x| x > exc.right as f64));
        }
    }

    #[test]
    fn saturation_on_multiples_of_the_token_count() {
        let (l, exc) = six_token_ledger();
        let pairs: Vec<(i64, i64)> = tau_star_map(&l, 0, 14).into_iter().map(|(s, t)| (s, t.unwrap())).collect();
        assert_eq!(pairs, vec![(0, 1), (2, 15), (4, 9), (6, 7), (10, 11), (12, 13)]);
        let rows = tau_n_convergence_test(&l, &exc, &[6, 12, 24, 48]).unwrap();
        for r in &rows {
            assert_eq!((r.tau_distance, r.g_error, r.h_error), (0.0, 0.0, 0.0), "{r:?}");
        }
        // rounding errors shrink along refinements n -> 2n
        let rows = tau_n_convergence_test(&l, &exc, &[1, 2, 4, 8]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].g_error <= w[0].g_error && w[1].h_error <= w[0].h_error);
        }
        assert!(rows[0].g_error > 0.0);
    }

    proptest! {
        #[test]
        fn sweep_invariants(seed in any::<u64>(), len in 0usize..40, pad in 0usize..6) {
            let c = random_config(&mut ChaCha8Rng::seed_from_u64(seed), len, pad);
            check_invariants(&c)?;
        }

        #[test]
        fn sweep_equals_naive(seed in any::<u64>(), len in 0usize..20) {
            let c = random_config(&mut ChaCha8Rng::seed_from_u64(seed), len, 2);
            prop_assert_eq!(stable_allocation(&c).unwrap(), stable_allocation_naive(&c).unwrap());
        }

        #[test]
        fn dyck_configs_match_perfectly(seed in any::<u64>(), k in 0usize..10, pad in 1usize..4) {
            let c = random_dyck_config(&mut ChaCha8Rng::seed_from_u64(seed), k, pad);
            prop_assert_eq!(c.a().len(), c.b().len());
            let m = stable_allocation(&c).unwrap();
            let inv = m.matched_b(c.b().len());
            prop_assert!(inv.iter().all(Option::is_some));
            check_invariants(&c)?;
        }
    }
}

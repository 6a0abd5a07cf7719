//! Small statistics toolkit for the experiments.

use rand::Rng;

use crate::rng;

/// Sample mean and its standard error (`sd / sqrt(n)`, `n - 1` divisor).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Total-variation distance between two probability vectors on the same
/// support (missing mass on either side counts fully).
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Pearson chi-square statistic of `counts` against `probs`; cells with
/// zero expected count are skipped. Returns `(statistic, degrees of freedom)`.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> (f64, usize) {
    let n: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells: usize = 0;
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * n as f64;
        if e > 0.0 {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    (stat, cells.saturating_sub(1))
}

/// Kolmogorov–Smirnov distance between the empirical law of integer
/// samples and a discrete law given by `(value, probability)` pairs sorted
/// by value. Samples off the support count as mass at their value.
pub fn ks_discrete(samples: &[i64], law: &[(i64, f64)]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable();
    let n = xs.len() as f64;
    let mut points: Vec<i64> = law.iter().map(|&(v, _)| v).chain(xs.iter().copied()).collect();
    points.sort_unstable();
    points.dedup();
    let (mut k, mut j, mut cdf) = (0usize, 0usize, 0.0);
    let mut d: f64 = 0.0;
    for x in points {
        while k < xs.len() && xs[k] <= x {
            k += 1;
        }
        while j < law.len() && law[j].0 <= x {
            cdf += law[j].1;
            j += 1;
        }
        d = d.max((k as f64 / n - cdf).abs());
    }
    d
}

/// Asymptotic KS critical value `sqrt(-ln(alpha / 2) / 2) / sqrt(m)`;
/// conservative for discrete laws.
pub fn ks_critical(alpha: f64, m: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (m as f64).sqrt()
}

/// Law of the `k`-step increment of the simple walk: `2 Bin(k, 1/2) - k`.
pub fn walk_increment_law(k: u64) -> Vec<(i64, f64)> {
    let mut probs = vec![1.0f64];
    for _ in 0..k {
        let mut next = vec![0.0; probs.len() + 1];
        for (i, p) in probs.iter().enumerate() {
            next[i] += p / 2.0;
            next[i + 1] += p / 2.0;
        }
        probs = next;
    }
    probs.into_iter().enumerate().map(|(ups, p)| (2 * ups as i64 - k as i64, p)).collect()
}

/// Right-censored observation: `time` is the event time when `observed`,
/// else the censoring time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub time: f64,
    pub observed: bool,
}

/// Kaplan–Meier estimate of `P(T > t)` at each grid point (sorted).
pub fn kaplan_meier(obs: &[Observation], grid: &[f64]) -> Vec<f64> {
    let mut sorted = obs.to_vec();
    // Events before censorings at tied times.
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time).then(b.observed.cmp(&a.observed)));
    let mut at_risk = sorted.len() as f64;
    let mut surv = 1.0;
    let mut out = Vec::with_capacity(grid.len());
    let mut idx = 0;
    for &t in grid {
        while idx < sorted.len() && sorted[idx].time <= t {
            let time = sorted[idx].time;
            let mut events = 0.0;
            let mut leaving = 0.0;
            while idx < sorted.len() && sorted[idx].time == time {
                if sorted[idx].observed {
                    events += 1.0;
                }
                leaving += 1.0;
                idx += 1;
            }
            if at_risk > 0.0 {
                surv *= 1.0 - events / at_risk;
            }
            at_risk -= leaving;
        }
        out.push(surv);
    }
    out
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Percentile bootstrap interval of `stat` over resamples of `data`,
/// drawn from the auxiliary stream of `seed`.
pub fn bootstrap_ci<T: Clone, F>(data: &[T], resamples: u64, level: f64, seed: u64, stat: F) -> Option<(f64, f64)>
where
    F: Fn(&[T]) -> Option<f64>,
{
    if data.is_empty() || resamples == 0 {
        return None;
    }
    let mut r = rng::stream_rng(seed, rng::STREAM_AUX + 1);
    let mut values = Vec::with_capacity(resamples as usize);
    let mut buf = Vec::with_capacity(data.len());
    for _ in 0..resamples {
        buf.clear();
        buf.extend((0..data.len()).map(|_| data[r.random_range(0..data.len())].clone()));
        if let Some(v) = stat(&buf) {
            values.push(v);
        }
    }
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let pick = |q: f64| values[((q * (values.len() - 1) as f64).round() as usize).min(values.len() - 1)];
    let tail = (1.0 - level) / 2.0;
    Some((pick(tail), pick(1.0 - tail)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // var = 5/3, se = sqrt(5/12)
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert!(mean_se(&[]).0.is_nan());
    }

    #[test]
    fn tv_and_chi_square() {
        assert_eq!(total_variation(&[0.5, 0.5, 0.0], &[0.25, 0.25, 0.5]), 0.5);
        let (stat, dof) = chi_square(&[30, 70], &[0.5, 0.5]);
        assert!((stat - 16.0).abs() < 1e-12);
        assert_eq!(dof, 1);
    }

    #[test]
    fn increment_law_is_binomial() {
        let law = walk_increment_law(4);
        let expect = [(-4, 1.0), (-2, 4.0), (0, 6.0), (2, 4.0), (4, 1.0)];
        for ((v, p), (ev, ep)) in law.iter().zip(expect) {
            assert_eq!(*v, ev);
            assert!((p - ep / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ks_distance() {
        let law = walk_increment_law(1);
        assert_eq!(ks_discrete(&[-1, 1, -1, 1], &law), 0.0);
        assert_eq!(ks_discrete(&[1, 1, 1, 1], &law), 0.5);
        assert!((ks_discrete(&[-1, -1, -1, 1], &law) - 0.25).abs() < 1e-15);
        // sqrt(-ln(0.005)/2) = 1.6276
        assert!((ks_critical(0.01, 100) - 0.16276).abs() < 1e-4);
    }

    #[test]
    fn kaplan_meier_hand_example() {
        // Events at 1, 3; censored at 2, 4. S(1) = 3/4, S(3) = 3/4 * 1/2.
        let obs = [
            Observation { time: 1.0, observed: true },
            Observation { time: 2.0, observed: false },
            Observation { time: 3.0, observed: true },
            Observation { time: 4.0, observed: false },
        ];
        let s = kaplan_meier(&obs, &[0.5, 1.0, 2.5, 3.0, 5.0]);
        assert_eq!(s, vec![1.0, 0.75, 0.75, 0.375, 0.375]);
        // No censoring: empirical survival.
        let full: Vec<Observation> = (1..=4).map(|t| Observation { time: t as f64, observed: true }).collect();
        assert_eq!(kaplan_meier(&full, &[2.0]), vec![0.5]);
    }

    #[test]
    fn fit_and_bootstrap() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert_eq!(linear_fit(&x, &y), Some((2.0, 1.0)));
        assert_eq!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]), None);
        let data: Vec<f64> = (0..200).map(|i| f64::from(i % 10)).collect();
        let mean = |d: &[f64]| Some(d.iter().sum::<f64>() / d.len() as f64);
        let (lo, hi) = bootstrap_ci(&data, 200, 0.95, 3, mean).unwrap();
        assert!(lo < 4.5 && 4.5 < hi && hi - lo < 1.5);
        assert_eq!(bootstrap_ci(&data, 200, 0.95, 3, mean), Some((lo, hi)));
    }
}

//! Concave gauge functions `psi: [0, inf) -> [0, inf)`.
//!
//! Only four families are offered. Each is concave and nondecreasing by
//! construction, so optimality statements hold for all of them at once.
//! A gauge may carry a constant offset; evaluation always removes it so
//! that `psi(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, serde_rational, Rational};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeKind {
    /// `t^alpha`, `alpha` in `(0, 1]`.
    Power {
        #[serde(rename = "param", with = "serde_rational")]
        alpha: Rational,
    },
    /// `ln(1 + t)`.
    Log1p,
    /// `min(t, c)`.
    Capped {
        #[serde(rename = "param", with = "serde_rational")]
        cap: Rational,
    },
    /// `t / (1 + t)`.
    Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGauge", into = "RawGauge")]
pub struct Gauge {
    kind: GaugeKind,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGauge {
    #[serde(flatten)]
    kind: GaugeKind,
    #[serde(default, skip_serializing_if = "is_zero")]
    offset: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl TryFrom<RawGauge> for Gauge {
    type Error = Error;
    fn try_from(raw: RawGauge) -> Result<Self> {
        Gauge::with_offset(raw.kind, raw.offset)
    }
}

impl From<Gauge> for RawGauge {
    fn from(g: Gauge) -> Self {
        RawGauge { kind: g.kind, offset: g.offset }
    }
}

impl Gauge {
    pub fn new(kind: GaugeKind) -> Result<Self> {
        Self::with_offset(kind, 0.0)
    }

    /// A gauge `offset + base(t)`; the offset is dropped on evaluation.
    pub fn with_offset(kind: GaugeKind, offset: f64) -> Result<Self> {
        match &kind {
            GaugeKind::Power { alpha } => {
                if !(rational::is_positive(alpha) && *alpha <= Rational::from_integer(1)) {
                    return Err(Error::Domain(format!(
                        "power exponent must lie in (0, 1], got {}",
                        rational::format_rational(alpha)
                    )));
                }
            }
            GaugeKind::Capped { cap } => {
                if !rational::is_positive(cap) {
                    return Err(Error::Domain(format!(
                        "cap must be positive, got {}",
                        rational::format_rational(cap)
                    )));
                }
            }
            GaugeKind::Log1p | GaugeKind::Rational => {}
        }
        if !offset.is_finite() || offset < 0.0 {
            return Err(Error::Domain(format!("offset must be finite and nonnegative, got {offset}")));
        }
        Ok(Gauge { kind, offset })
    }

    pub fn power(alpha: Rational) -> Result<Self> {
        Self::new(GaugeKind::Power { alpha })
    }

    pub fn capped(cap: Rational) -> Result<Self> {
        Self::new(GaugeKind::Capped { cap })
    }

    pub fn log1p() -> Self {
        Gauge { kind: GaugeKind::Log1p, offset: 0.0 }
    }

    pub fn rational() -> Self {
        Gauge { kind: GaugeKind::Rational, offset: 0.0 }
    }

    pub fn linear() -> Self {
        Gauge { kind: GaugeKind::Power { alpha: Rational::from_integer(1) }, offset: 0.0 }
    }

    pub fn sqrt() -> Self {
        Gauge { kind: GaugeKind::Power { alpha: Rational::new(1, 2) }, offset: 0.0 }
    }

    /// One representative of each family: `sqrt`, `log1p`, `min(t, 1)`, `t/(1+t)`.
    pub fn standard_set() -> Vec<Gauge> {
        vec![
            Gauge::sqrt(),
            Gauge::log1p(),
            Gauge { kind: GaugeKind::Capped { cap: Rational::from_integer(1) }, offset: 0.0 },
            Gauge::rational(),
        ]
    }

    pub fn kind(&self) -> &GaugeKind {
        &self.kind
    }

    /// Always true: evaluation subtracts `psi(0)`.
    pub fn offset_removed(&self) -> bool {
        true
    }

    pub fn is_linear(&self) -> bool {
        matches!(&self.kind, GaugeKind::Power { alpha } if *alpha == Rational::from_integer(1))
    }

    /// Upper bound of the gauge, if it is bounded.
    pub fn sup(&self) -> Option<f64> {
        match &self.kind {
            GaugeKind::Capped { cap } => Some(rational::to_f64(cap)),
            GaugeKind::Rational => Some(1.0),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            GaugeKind::Power { alpha } => format!("power({})", rational::format_rational(alpha)),
            GaugeKind::Log1p => "log1p".to_string(),
            GaugeKind::Capped { cap } => format!("capped({})", rational::format_rational(cap)),
            GaugeKind::Rational => "rational".to_string(),
        }
    }

    fn base(&self, t: f64) -> f64 {
        match &self.kind {
            GaugeKind::Power { alpha } => {
                if *alpha == Rational::from_integer(1) {
                    t
                } else if *alpha == Rational::new(1, 2) {
                    t.sqrt()
                } else {
                    t.powf(rational::to_f64(alpha))
                }
            }
            GaugeKind::Log1p => t.ln_1p(),
            GaugeKind::Capped { cap } => t.min(rational::to_f64(cap)),
            GaugeKind::Rational => t / (1.0 + t),
        }
    }

    /// `psi(t)` without the normalization (includes the offset).
    pub fn eval_raw(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("gauge argument must be nonnegative, got {t}")));
        }
        Ok(self.offset + self.base(t))
    }

    /// Normalized `psi(t) - psi(0)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.eval_raw(t)? - self.eval_raw(0.0)?)
    }

    /// Unchecked normalized evaluation for hot loops; `t` must be `>= 0`.
    #[inline]
    pub fn apply(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        self.base(t) - self.base(0.0)
    }
}

/// Convenience wrapper over [`Gauge::eval`].
pub fn eval_gauge(g: &Gauge, t: f64) -> Result<f64> {
    g.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GaugeReport {
    pub concave_ok: bool,
    pub subadditive_ok: bool,
    pub nonnegative_ok: bool,
}

impl GaugeReport {
    pub fn all_ok(&self) -> bool {
        self.concave_ok && self.subadditive_ok && self.nonnegative_ok
    }
}

/// Scans every pair of grid points for midpoint concavity and
/// subadditivity. Negative grid points count as a nonnegativity failure.
pub fn check_gauge_properties(g: &Gauge, grid: &[f64]) -> GaugeReport {
    let tol = |scale: f64| 1e-12 * (1.0 + scale.abs());
    let mut report = GaugeReport { concave_ok: true, subadditive_ok: true, nonnegative_ok: true };
    let pts: Vec<f64> = grid.iter().copied().filter(|t| *t >= 0.0).collect();
    if pts.len() != grid.len() {
        report.nonnegative_ok = false;
    }
    for &t in &pts {
        if g.apply(t) < -tol(0.0) {
            report.nonnegative_ok = false;
        }
    }
    for (i, &s) in pts.iter().enumerate() {
        let ps = g.apply(s);
        for &t in &pts[i..] {
            let pt = g.apply(t);
            let mid = g.apply(0.5 * (s + t));
            if mid < 0.5 * (ps + pt) - tol(ps + pt) {
                report.concave_ok = false;
            }
            let sum = g.apply(s + t);
            if sum > ps + pt + tol(ps + pt) {
                report.subadditive_ok = false;
            }
        }
    }
    report
}

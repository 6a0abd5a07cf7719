//! Rational helpers shared by the gauge, walk and transport modules.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;

pub type Rational = Ratio<i64>;

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.125"`.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let q: i64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if q == 0 {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(Ratio::new(p, q));
    }
    if let Ok(p) = s.parse::<i64>() {
        return Ok(Ratio::from_integer(p));
    }
    let x: f64 = s.parse().map_err(|_| format!("not a rational: {s:?}"))?;
    from_f64(x)
}

/// Exact conversion for dyadic/short decimals, continued-fraction
/// approximation otherwise.
pub fn from_f64(x: f64) -> Result<Rational, String> {
    if !x.is_finite() {
        return Err(format!("not a finite number: {x}"));
    }
    Ratio::approximate_float(x).ok_or_else(|| format!("cannot represent {x} as a rational"))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn is_positive(r: &Rational) -> bool {
    *r > Rational::zero()
}

pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter: writes `"p/q"`, reads a JSON number or string.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rational;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a rational as a number or \"p/q\" string")
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Ratio::from_integer(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                i64::try_from(v).map(Ratio::from_integer).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
                from_f64(v).map_err(E::custom)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                parse_rational(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

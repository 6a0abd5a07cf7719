//! Finitely supported measures on the integer lattice with weights in
//! `(1/q) * N` for a common denominator `q`.
//!
//! All local-time bookkeeping downstream is done in integer units of `1/q`,
//! which is what lets the difference process hit zero exactly.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    denominator: u64,
    /// `(site, numerator)` with strictly increasing sites, numerators > 0.
    atoms: Vec<(i64, u64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    denominator: u64,
    atoms: Vec<(i64, u64)>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = Error;
    fn try_from(raw: RawMeasure) -> Result<Self> {
        let mut atoms = raw.atoms;
        atoms.sort_by_key(|a| a.0);
        DiscreteMeasure::new(raw.denominator, atoms)
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure { denominator: m.denominator, atoms: m.atoms }
    }
}

impl DiscreteMeasure {
    /// Validates sorted distinct sites, positive numerators and total mass `<= 1`.
    pub fn new(denominator: u64, atoms: Vec<(i64, u64)>) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::InvalidMeasure("denominator must be positive".into()));
        }
        if denominator > (1 << 40) {
            return Err(Error::InvalidMeasure(format!("denominator {denominator} is too large")));
        }
        let mut total: u64 = 0;
        for (idx, &(site, num)) in atoms.iter().enumerate() {
            if num == 0 {
                return Err(Error::InvalidMeasure(format!("atom at site {site} has zero weight")));
            }
            if idx > 0 && atoms[idx - 1].0 >= site {
                return Err(Error::InvalidMeasure(format!(
                    "sites must be strictly increasing (site {site} repeated or out of order)"
                )));
            }
            if site.unsigned_abs() > (1 << 40) {
                return Err(Error::InvalidMeasure(format!("site {site} is out of range")));
            }
            total = total.saturating_add(num);
        }
        if total > denominator {
            return Err(Error::InvalidMeasure(format!(
                "total mass {total}/{denominator} exceeds one"
            )));
        }
        Ok(DiscreteMeasure { denominator, atoms })
    }

    pub fn zero(denominator: u64) -> Self {
        DiscreteMeasure { denominator: denominator.max(1), atoms: Vec::new() }
    }

    pub fn dirac(site: i64) -> Self {
        DiscreteMeasure { denominator: 1, atoms: vec![(site, 1)] }
    }

    /// Uniform probability measure on the given distinct sites.
    pub fn uniform(sites: &[i64]) -> Result<Self> {
        let mut s = sites.to_vec();
        s.sort_unstable();
        let q = s.len() as u64;
        Self::new(q, s.into_iter().map(|x| (x, 1)).collect())
    }

    /// Builds a measure from rational weights, choosing the least common denominator.
    pub fn from_weights(weights: &[(i64, Rational)]) -> Result<Self> {
        let mut q: i64 = 1;
        for (_, w) in weights {
            if *w.numer() <= 0 {
                return Err(Error::InvalidMeasure("weights must be positive".into()));
            }
            q = q.lcm(w.denom());
        }
        let mut atoms: Vec<(i64, u64)> = weights
            .iter()
            .map(|(s, w)| (*s, (*w.numer() * (q / *w.denom())) as u64))
            .collect();
        atoms.sort_by_key(|a| a.0);
        Self::new(q as u64, atoms)
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn atoms(&self) -> &[(i64, u64)] {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = i64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_units(&self) -> u64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn total(&self) -> Rational {
        Rational::new(self.total_units() as i64, self.denominator as i64)
    }

    pub fn is_probability(&self) -> bool {
        self.total_units() == self.denominator
    }

    /// Weight of `site` in units of `1/q`.
    pub fn units_at(&self, site: i64) -> u64 {
        match self.atoms.binary_search_by_key(&site, |a| a.0) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0,
        }
    }

    pub fn weight(&self, site: i64) -> Rational {
        Rational::new(self.units_at(site) as i64, self.denominator as i64)
    }

    pub fn max_atom_units(&self) -> u64 {
        self.atoms.iter().map(|a| a.1).max().unwrap_or(0)
    }

    /// Re-expresses the measure over denominator `q`, which must be a multiple
    /// of the current one.
    pub fn lift(&self, q: u64) -> Result<Self> {
        if q == 0 || q % self.denominator != 0 {
            return Err(Error::InvalidMeasure(format!(
                "cannot lift denominator {} to {q}",
                self.denominator
            )));
        }
        let f = q / self.denominator;
        Ok(DiscreteMeasure {
            denominator: q,
            atoms: self.atoms.iter().map(|&(s, n)| (s, n * f)).collect(),
        })
    }

    /// Site range `[min, max]` of the support.
    pub fn span(&self) -> Option<(i64, i64)> {
        Some((self.atoms.first()?.0, self.atoms.last()?.0))
    }

    /// Atom-wise combination on the union of supports; zero atoms dropped.
    fn combine(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        let mut sites: Vec<i64> = self.support().chain(other.support()).collect();
        sites.sort_unstable();
        sites.dedup();
        let atoms = sites
            .into_iter()
            .map(|s| (s, f(self.units_at(s), other.units_at(s))))
            .filter(|a| a.1 > 0)
            .collect();
        DiscreteMeasure { denominator: self.denominator, atoms }
    }

    /// Exact sum; both measures must share the denominator.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_denominator(self, other)?;
        Ok(self.combine(other, |x, y| x + y))
    }
}

fn check_same_denominator(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<()> {
    if a.denominator != b.denominator {
        return Err(Error::DenominatorMismatch {
            left: a.denominator,
            right: b.denominator,
            lcm: a.denominator.lcm(&b.denominator),
        });
    }
    Ok(())
}

/// Lifts both measures to the least common denominator.
pub fn lift_to_common(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<(DiscreteMeasure, DiscreteMeasure)> {
    let q = mu.denominator.lcm(&nu.denominator);
    Ok((mu.lift(q)?, nu.lift(q)?))
}

/// The pair `(mu, nu)` with its split into a common part and orthogonal
/// remainders `mu = mu_tilde + common`, `nu = nu_tilde + common`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasurePair {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub orthogonal: bool,
    pub common_part: DiscreteMeasure,
    pub mu_tilde: DiscreteMeasure,
    pub nu_tilde: DiscreteMeasure,
    #[serde(with = "crate::rational::serde_rational")]
    pub rho: Rational,
}

impl MeasurePair {
    pub fn denominator(&self) -> u64 {
        self.mu.denominator
    }

    /// Exact embedding mode is available when every atom of `nu_tilde`
    /// weighs exactly `1/q`: the difference process then only moves down in
    /// unit steps and must pass through zero.
    pub fn exact_mode_ok(&self) -> bool {
        self.nu_tilde.atoms.iter().all(|a| a.1 == 1)
    }

    /// Exact mode with unit `mu_tilde` atoms as well, so each charged time
    /// carries exactly one unit token on either side.
    pub fn unit_atoms(&self) -> bool {
        self.exact_mode_ok() && self.mu_tilde.atoms.iter().all(|a| a.1 == 1)
    }

    /// `mu + nu`, the functional used to time-change ergodic averages.
    pub fn sum(&self) -> DiscreteMeasure {
        self.mu.combine(&self.nu, |x, y| x + y)
    }

    /// Joint site span of both measures.
    pub fn span(&self) -> Option<(i64, i64)> {
        match (self.mu.span(), self.nu.span()) {
            (Some(a), Some(b)) => Some((a.0.min(b.0), a.1.max(b.1))),
            (a, b) => a.or(b),
        }
    }
}

/// Splits `(mu, nu)` atom-wise: `common = min(mu, nu)`.
pub fn split_measures(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<MeasurePair> {
    check_same_denominator(mu, nu)?;
    let common_part = mu.combine(nu, |x, y| x.min(y));
    let mu_tilde = mu.combine(nu, |x, y| x - x.min(y));
    let nu_tilde = nu.combine(mu, |x, y| x - x.min(y));
    let rho = mu_tilde.total();
    Ok(MeasurePair {
        mu: mu.clone(),
        nu: nu.clone(),
        orthogonal: common_part.is_zero(),
        common_part,
        mu_tilde,
        nu_tilde,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disjoint_diracs_are_orthogonal() {
        let p = split_measures(&DiscreteMeasure::dirac(0), &DiscreteMeasure::dirac(1)).unwrap();
        assert!(p.orthogonal);
        assert_eq!(p.rho, Rational::from_integer(1));
        assert!(p.common_part.is_zero());
        assert_eq!(p.mu_tilde, p.mu);
    }

    #[test]
    fn identical_measures_have_no_orthogonal_part() {
        let d = DiscreteMeasure::dirac(0);
        let p = split_measures(&d, &d).unwrap();
        assert!(!p.orthogonal);
        assert_eq!(p.rho, Rational::from_integer(0));
        assert!(p.mu_tilde.is_zero() && p.nu_tilde.is_zero());
        assert_eq!(p.common_part, d);
    }

    #[test]
    fn overlapping_halves() {
        let mu = DiscreteMeasure::new(2, vec![(0, 1), (1, 1)]).unwrap();
        let nu = DiscreteMeasure::new(2, vec![(1, 1), (2, 1)]).unwrap();
        let p = split_measures(&mu, &nu).unwrap();
        assert_eq!(p.common_part, DiscreteMeasure::new(2, vec![(1, 1)]).unwrap());
        assert_eq!(p.mu_tilde, DiscreteMeasure::new(2, vec![(0, 1)]).unwrap());
        assert_eq!(p.nu_tilde, DiscreteMeasure::new(2, vec![(2, 1)]).unwrap());
        assert_eq!(p.rho, Rational::new(1, 2));
    }

    #[test]
    fn mismatched_denominators_are_rejected() {
        let mu = DiscreteMeasure::dirac(0);
        let nu = DiscreteMeasure::new(2, vec![(1, 1), (2, 1)]).unwrap();
        match split_measures(&mu, &nu) {
            Err(Error::DenominatorMismatch { lcm, .. }) => assert_eq!(lcm, 2),
            other => panic!("unexpected {other:?}"),
        }
        let (mu2, nu2) = lift_to_common(&mu, &nu).unwrap();
        assert!(split_measures(&mu2, &nu2).unwrap().orthogonal);
    }

    #[test]
    fn validation() {
        assert!(DiscreteMeasure::new(2, vec![(0, 1), (0, 1)]).is_err());
        assert!(DiscreteMeasure::new(2, vec![(0, 3)]).is_err());
        assert!(DiscreteMeasure::new(2, vec![(0, 0)]).is_err());
        assert!(DiscreteMeasure::new(0, vec![]).is_err());
    }

    #[test]
    fn json_round_trip_and_sorting() {
        let m: DiscreteMeasure =
            serde_json::from_str(r#"{"denominator": 3, "atoms": [[2, 1], [-1, 1], [1, 1]]}"#).unwrap();
        assert_eq!(m.atoms(), &[(-1, 1), (1, 1), (2, 1)]);
        assert!(m.is_probability());
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"denominator":3,"atoms":[[-1,1],[1,1],[2,1]]}"#);
        assert!(serde_json::from_str::<DiscreteMeasure>(r#"{"denominator": 1, "atoms": [[0.5, 1]]}"#).is_err());
    }

    #[test]
    fn from_weights_uses_lcm() {
        let m = DiscreteMeasure::from_weights(&[(0, Rational::new(1, 2)), (3, Rational::new(1, 3))]).unwrap();
        assert_eq!(m.denominator(), 6);
        assert_eq!(m.atoms(), &[(0, 3), (3, 2)]);
    }

    fn measure_strategy(q: u64) -> impl Strategy<Value = DiscreteMeasure> {
        proptest::collection::btree_map(-6i64..6, 1u64..4, 0..5).prop_filter_map("too heavy", move |m| {
            DiscreteMeasure::new(q, m.into_iter().collect()).ok()
        })
    }

    proptest! {
        #[test]
        fn split_reconstructs_exactly(mu in measure_strategy(12), nu in measure_strategy(12)) {
            let p = split_measures(&mu, &nu).unwrap();
            prop_assert_eq!(p.mu_tilde.add(&p.common_part).unwrap(), mu.clone());
            prop_assert_eq!(p.nu_tilde.add(&p.common_part).unwrap(), nu.clone());
            // remainders are orthogonal
            for s in p.mu_tilde.support() {
                prop_assert_eq!(p.nu_tilde.units_at(s), 0);
            }
            prop_assert_eq!(p.orthogonal, p.common_part.is_zero());
        }

        #[test]
        fn split_is_identity_on_orthogonal_pairs(mu in measure_strategy(8)) {
            let shifted: Vec<(i64, u64)> = mu.atoms().iter().map(|&(s, n)| (s + 100, n)).collect();
            let nu = DiscreteMeasure::new(8, shifted).unwrap();
            let p = split_measures(&mu, &nu).unwrap();
            prop_assert!(p.orthogonal);
            prop_assert_eq!(&p.mu_tilde, &mu);
            prop_assert_eq!(&p.nu_tilde, &nu);
            prop_assert_eq!(p.rho, mu.total());
        }
    }
}

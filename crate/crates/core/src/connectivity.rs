//! Series and parallel composition under the two connectivity calculi.
//!
//! Classical: series is a product of probabilities, parallel is
//! `1 - prod(1 - p_i)`.
//!
//! Quantum (concurrence): series is a product of concurrences. Parallel is a
//! product in the *F-domain*, `F(c) = (1 + sqrt(1 - c^2)) / 2`, which maps
//! `[0, 1]` onto `[1, 1/2]`:
//!
//! ```text
//! F_para = max(prod F(c_i), 1/2),   c_para = sqrt(1 - (2 F_para - 1)^2)
//! ```
//!
//! The floor at `1/2` is deliberate. The two-link rule squares
//! `2 F_1 F_2 - 1`, which for `F_1 F_2 < 1/2` would give two perfect links in
//! parallel a concurrence below one. With the floor, `para(1, 1) = 1` and the
//! n-ary rule is the same for every fold order. Whenever `prod F > 1/2` the two
//! forms agree exactly.
//!
//! Both parallel rules are evaluated in log space (`ln(1 - p)` and `ln F`)
//! so that products of many near-zero or near-one weights keep full precision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::weights::LinkWeight;

/// Which rule set composes link weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calculus {
    Classical,
    Quantum,
}

impl Calculus {
    pub const BOTH: [Calculus; 2] = [Calculus::Classical, Calculus::Quantum];

    /// The coordinate this calculus composes: `p` or `c`.
    pub fn value_of(self, w: LinkWeight) -> f64 {
        match self {
            Calculus::Classical => w.p(),
            Calculus::Quantum => w.c(),
        }
    }

    pub fn weight_of(self, value: f64) -> Result<LinkWeight> {
        match self {
            Calculus::Classical => LinkWeight::from_p(value),
            Calculus::Quantum => LinkWeight::from_c(value),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Calculus::Classical => "classical",
            Calculus::Quantum => "quantum",
        }
    }
}

impl fmt::Display for Calculus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Calculus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classical" | "c" | "p" => Ok(Calculus::Classical),
            "quantum" | "q" | "concurrence" => Ok(Calculus::Quantum),
            other => Err(Error::InvalidArgument(format!("unknown calculus {other:?}"))),
        }
    }
}

/// `ln F(c)` with `F(c) = (1 + sqrt(1 - c^2)) / 2`.
#[inline]
pub fn ln_fidelity(c: f64) -> f64 {
    if c <= 0.0 {
        return 0.0;
    }
    let root = ((1.0 - c) * (1.0 + c)).max(0.0).sqrt();
    // 1 - F = c^2 / (2 (1 + root)), exact without cancellation
    let one_minus_f = c * c / (2.0 * (1.0 + root));
    (-one_minus_f).ln_1p()
}

/// Inverse of the parallel accumulation: concurrence from `ln prod F`,
/// floored at `F = 1/2`.
#[inline]
pub fn concurrence_from_ln_fidelity(ln_f: f64) -> f64 {
    if ln_f <= -std::f64::consts::LN_2 {
        return 1.0;
    }
    if ln_f >= 0.0 {
        return 0.0;
    }
    let f = ln_f.exp();
    let one_minus_f = -ln_f.exp_m1();
    (2.0 * (f * one_minus_f).sqrt()).clamp(0.0, 1.0)
}

/// Log-space accumulator for an n-ary parallel composition.
#[derive(Debug, Clone, Copy)]
pub struct ParallelAcc {
    calculus: Calculus,
    log_sum: f64,
}

impl ParallelAcc {
    pub fn new(calculus: Calculus) -> Self {
        Self { calculus, log_sum: 0.0 }
    }

    #[inline]
    pub fn push(&mut self, v: f64) {
        self.push_many(v, 1.0);
    }

    /// Adds `multiplicity` identical branches of weight `v`.
    #[inline]
    pub fn push_many(&mut self, v: f64, multiplicity: f64) {
        if v <= 0.0 {
            return;
        }
        let term = match self.calculus {
            Calculus::Classical => {
                if v >= 1.0 {
                    f64::NEG_INFINITY
                } else {
                    (-v).ln_1p()
                }
            }
            Calculus::Quantum => ln_fidelity(v.min(1.0)),
        };
        self.log_sum += multiplicity * term;
    }

    #[inline]
    pub fn finish(self) -> f64 {
        match self.calculus {
            Calculus::Classical => (-self.log_sum.exp_m1()).clamp(0.0, 1.0),
            Calculus::Quantum => concurrence_from_ln_fidelity(self.log_sum),
        }
    }
}

/// Two-argument parallel rule without domain checks (hot paths).
#[inline]
pub fn para2(calculus: Calculus, a: f64, b: f64) -> f64 {
    match calculus {
        Calculus::Classical => (a + b - a * b).clamp(0.0, 1.0),
        Calculus::Quantum => {
            let mut acc = ParallelAcc::new(calculus);
            acc.push(a);
            acc.push(b);
            acc.finish()
        }
    }
}

/// `v` composed in series with itself `len` times.
#[inline]
pub fn pow_len(v: f64, len: f64) -> f64 {
    if len == 0.0 || v == 1.0 {
        1.0
    } else if v <= 0.0 {
        0.0
    } else {
        (len * v.ln()).exp()
    }
}

fn check_all(weights: &[f64]) -> Result<()> {
    for &w in weights {
        check_unit("weight", w)?;
    }
    Ok(())
}

/// Series composition. The empty chain is a perfect link.
pub fn seri(calculus: Calculus, weights: &[f64]) -> Result<f64> {
    let _ = calculus; // both calculi multiply along a chain
    check_all(weights)?;
    Ok(weights.iter().product::<f64>().clamp(0.0, 1.0))
}

/// Parallel composition. The empty bundle is a dead link.
pub fn para(calculus: Calculus, weights: &[f64]) -> Result<f64> {
    check_all(weights)?;
    let mut acc = ParallelAcc::new(calculus);
    for &w in weights {
        acc.push(w);
    }
    Ok(acc.finish())
}

/// Edge-disjoint A-B paths grouped by length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEnsemble {
    entries: Vec<(u64, u64)>,
}

impl PathEnsemble {
    /// Builds an ensemble from `(length, multiplicity)` pairs. Equal lengths
    /// are merged; the result is sorted by length.
    pub fn new(entries: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut v: Vec<(u64, u64)> = Vec::new();
        for (len, mult) in entries {
            if len == 0 || mult == 0 {
                return Err(Error::InvalidArgument(format!(
                    "path entry ({len}, {mult}) must have positive length and multiplicity"
                )));
            }
            v.push((len, mult));
        }
        v.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(v.len());
        for (len, mult) in v {
            match merged.last_mut() {
                Some((l, m)) if *l == len => {
                    *m = m
                        .checked_add(mult)
                        .ok_or_else(|| Error::Overflow("path multiplicity".into()))?;
                }
                _ => merged.push((len, mult)),
            }
        }
        Ok(Self { entries: merged })
    }

    /// Ensemble made of individual path lengths.
    pub fn from_lengths(lengths: impl IntoIterator<Item = u64>) -> Result<Self> {
        Self::new(lengths.into_iter().map(|l| (l, 1)))
    }

    pub fn entries(&self) -> &[(u64, u64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_paths(&self) -> u128 {
        self.entries.iter().map(|&(_, m)| m as u128).sum()
    }

    pub fn shortest(&self) -> Option<u64> {
        self.entries.first().map(|&(l, _)| l)
    }
}

/// Parallel composition over all paths of the series of their links, every
/// link carrying weight `w`.
pub fn ensemble_crossing(calculus: Calculus, ensemble: &PathEnsemble, w: LinkWeight) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::InvalidArgument("empty path ensemble".into()));
    }
    Ok(ensemble_crossing_value(calculus, ensemble, calculus.value_of(w)))
}

pub(crate) fn ensemble_crossing_value(calculus: Calculus, ensemble: &PathEnsemble, v: f64) -> f64 {
    let mut acc = ParallelAcc::new(calculus);
    for &(len, mult) in ensemble.entries() {
        acc.push_many(pow_len(v, len as f64), mult as f64);
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Calculus::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn series_examples() {
        assert!(close(seri(Classical, &[0.5, 0.5]).unwrap(), 0.25, 1e-15));
        assert!(close(seri(Quantum, &[0.37, 1.0]).unwrap(), 0.37, 1e-15));
        assert!(close(seri(Quantum, &[0.8, 0.9]).unwrap(), 0.72, 1e-15));
        assert_eq!(seri(Quantum, &[]).unwrap(), 1.0);
    }

    #[test]
    fn parallel_examples() {
        assert!(close(para(Classical, &[0.5, 0.5]).unwrap(), 0.75, 1e-15));
        assert!(close(para(Quantum, &[0.37, 0.0]).unwrap(), 0.37, 1e-14));
        // F(0.8) = 0.8, F_para = 0.64, c = sqrt(1 - 0.28^2) = 0.96
        assert!(close(para(Quantum, &[0.8, 0.8]).unwrap(), 0.96, 1e-14));
        assert_eq!(para(Classical, &[]).unwrap(), 0.0);
        assert_eq!(para(Quantum, &[]).unwrap(), 0.0);
    }

    #[test]
    fn quantum_saturation() {
        assert_eq!(para(Quantum, &[1.0, 1.0]).unwrap(), 1.0);
        // F(0.95)^2 < 1/2
        let f = (1.0 + (1.0f64 - 0.95 * 0.95).sqrt()) / 2.0;
        assert!(f * f <= 0.5);
        assert_eq!(para(Quantum, &[0.95, 0.95]).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(seri(Classical, &[0.5, 1.1]).is_err());
        assert!(para(Quantum, &[-0.1]).is_err());
        assert!(para(Quantum, &[f64::NAN]).is_err());
    }

    #[test]
    fn printed_two_link_rule_matches_in_unsaturated_regime() {
        let printed = |c1: f64, c2: f64| {
            let g = 0.5 * (1.0 + (1.0 - c1 * c1).sqrt()) * (1.0 + (1.0 - c2 * c2).sqrt()) - 1.0;
            (1.0 - g * g).sqrt()
        };
        for &(a, b) in &[(0.1, 0.2), (0.5, 0.6), (0.7, 0.3), (0.8, 0.8)] {
            assert!(close(para(Quantum, &[a, b]).unwrap(), printed(a, b), 1e-13));
        }
    }

    #[test]
    fn small_weights_keep_precision() {
        let c = 1e-9;
        let got = para(Quantum, &[c, c]).unwrap();
        // F(c) ~ 1 - c^2/4, product ~ 1 - c^2/2, c_para ~ sqrt(2) c
        assert!(close(got / c, 2f64.sqrt(), 1e-6));
        let got = para(Classical, &[1e-17, 1e-17]).unwrap();
        assert!(close(got, 2e-17, 1e-30));
    }

    #[test]
    fn ensemble_examples() {
        let w = LinkWeight::from_p(0.3).unwrap();
        let single = PathEnsemble::new([(1, 1)]).unwrap();
        assert!(close(ensemble_crossing(Classical, &single, w).unwrap(), 0.3, 1e-14));

        let p: f64 = 0.7;
        let w = LinkWeight::from_p(p).unwrap();
        let two = PathEnsemble::new([(2, 2)]).unwrap();
        let expect = 1.0 - (1.0 - p * p).powi(2);
        assert!(close(ensemble_crossing(Classical, &two, w).unwrap(), expect, 1e-14));

        let w = LinkWeight::from_c(0.9).unwrap();
        let e = PathEnsemble::new([(2, 1), (3, 1)]).unwrap();
        let expect = para(Quantum, &[0.81, 0.729]).unwrap();
        assert!(close(ensemble_crossing(Quantum, &e, w).unwrap(), expect, 1e-12));

        assert!(PathEnsemble::new([(0, 1)]).is_err());
        let empty = PathEnsemble::new([]).unwrap();
        assert!(ensemble_crossing(Quantum, &empty, w).is_err());
    }

    #[test]
    fn ensemble_merges_and_sorts() {
        let e = PathEnsemble::new([(5, 1), (2, 3), (5, 2)]).unwrap();
        assert_eq!(e.entries(), &[(2, 3), (5, 3)]);
        assert_eq!(e.total_paths(), 6);
        assert_eq!(e.shortest(), Some(2));
    }

    #[test]
    fn calculus_parse() {
        assert_eq!("Quantum".parse::<Calculus>().unwrap(), Quantum);
        assert_eq!("classical".parse::<Calculus>().unwrap(), Classical);
        assert!("both".parse::<Calculus>().is_err());
    }

    fn calc() -> impl Strategy<Value = Calculus> {
        prop_oneof![Just(Classical), Just(Quantum)]
    }

    proptest! {
        #[test]
        fn bounds_hold(c in calc(), ws in prop::collection::vec(0.0f64..=1.0, 1..6)) {
            let s = seri(c, &ws).unwrap();
            let p = para(c, &ws).unwrap();
            let lo = ws.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ws.iter().cloned().fold(0.0, f64::max);
            prop_assert!(s <= lo + 1e-15);
            prop_assert!(p >= hi - 1e-12);
            prop_assert!((0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&p));
        }

        #[test]
        fn monotone_in_each_argument(c in calc(),
                                     ws in prop::collection::vec(0.0f64..=1.0, 1..5),
                                     idx in 0usize..5, bump in 0.0f64..0.5) {
            let i = idx % ws.len();
            let mut up = ws.clone();
            up[i] = (up[i] + bump).min(1.0);
            prop_assert!(seri(c, &up).unwrap() >= seri(c, &ws).unwrap() - 1e-15);
            prop_assert!(para(c, &up).unwrap() >= para(c, &ws).unwrap() - 1e-12);
        }

        #[test]
        fn nary_parallel_equals_binary_folds(c in calc(),
                                             ws in prop::collection::vec(0.0f64..=1.0, 2..6)) {
            let nary = para(c, &ws).unwrap();
            let left = ws.iter().skip(1).fold(ws[0], |acc, &w| para(c, &[acc, w]).unwrap());
            let right = ws.iter().rev().skip(1).fold(*ws.last().unwrap(), |acc, &w| para(c, &[w, acc]).unwrap());
            // a binary fold only differs once some partial product saturates
            prop_assert!((nary - left).abs() < 1e-9, "{} vs {}", nary, left);
            prop_assert!((nary - right).abs() < 1e-9);
        }
    }
}

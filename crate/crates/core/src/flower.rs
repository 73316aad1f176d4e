//! Exact renormalization of `(U, V)` flowers.
//!
//! A generation-`n` flower is obtained from a single link by replacing every
//! link, `n` times over, with two parallel arms of `U` and `V` links. The
//! two-terminal weight of generation `n` is therefore the `n`-fold iterate of
//!
//! ```text
//! R(w) = para(w^U, w^V)
//! ```
//!
//! Its nontrivial fixed point is the percolation threshold and the slope
//! there gives the correlation-length exponent `nu = ln U / ln R'(w_th)`.

use std::ops::RangeInclusive;

use log::warn;
use serde::Serialize;

use crate::bisect::bisect;
use crate::connectivity::{concurrence_from_ln_fidelity, ln_fidelity, pow_len, Calculus, PathEnsemble};
use crate::error::{check_unit, Error, Result};
use crate::fit::{linear_fit, ScalingFit};
use crate::reduction::{TwoTerminalNetwork, WeightedGraph};

/// Bisection width for thresholds.
pub const THRESHOLD_TOL: f64 = 1e-13;
/// Default number of trailing generations in a `nu` fit.
pub const NU_FIT_WINDOW: usize = 6;
const MAX_MATERIALIZED_EDGES: u64 = 1 << 20;

/// A `(U, V)` flower at generation `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FlowerSpec {
    pub u: u64,
    pub v: u64,
    pub n: u32,
}

impl FlowerSpec {
    pub fn new(u: u64, v: u64, n: u32) -> Result<Self> {
        check_uv(u, v)?;
        Ok(Self { u, v, n })
    }

    /// Shortest A-B distance `U^n`.
    pub fn shortest_length(&self) -> Result<u64> {
        self.u
            .checked_pow(self.n)
            .ok_or_else(|| Error::Overflow(format!("{}^{} does not fit in 64 bits", self.u, self.n)))
    }

    /// `ln L = n ln U`, available when `L` itself overflows.
    pub fn ln_length(&self) -> f64 {
        self.n as f64 * (self.u as f64).ln()
    }

    /// `ln` of the link count `(U+V)^n`, which sets the node count scale.
    pub fn ln_links(&self) -> f64 {
        self.n as f64 * ((self.u + self.v) as f64).ln()
    }
}

pub(crate) fn check_uv(u: u64, v: u64) -> Result<()> {
    if u < 1 || v < u {
        return Err(Error::InvalidArgument(format!(
            "flower needs 1 <= U <= V, got ({u}, {v})"
        )));
    }
    Ok(())
}

fn check_exponent_uv(u: u64, v: u64) -> Result<()> {
    check_uv(u, v)?;
    if u < 2 {
        return Err(Error::Domain {
            name: "U",
            value: u as f64,
            domain: "U >= 2 (U = 1 has no finite dimension)",
        });
    }
    Ok(())
}

/// Network dimension `ln(U+V) / ln U`.
pub fn dimension(u: u64, v: u64) -> Result<f64> {
    check_exponent_uv(u, v)?;
    Ok(((u + v) as f64).ln() / (u as f64).ln())
}

pub(crate) fn rg_value(calculus: Calculus, u: u64, v: u64, w: f64) -> f64 {
    let (wu, wv) = (pow_len(w, u as f64), pow_len(w, v as f64));
    match calculus {
        Calculus::Classical => (1.0 - (1.0 - wu) * (1.0 - wv)).clamp(0.0, 1.0),
        Calculus::Quantum => concurrence_from_ln_fidelity(ln_fidelity(wu) + ln_fidelity(wv)),
    }
}

/// One renormalization step `R(w) = para(w^U, w^V)`.
pub fn rg_map(calculus: Calculus, u: u64, v: u64, w: f64) -> Result<f64> {
    check_uv(u, v)?;
    check_unit("w", w)?;
    Ok(rg_value(calculus, u, v, w))
}

pub(crate) fn sponge_value(calculus: Calculus, u: u64, v: u64, n: u32, w: f64) -> f64 {
    (0..n).fold(w, |acc, _| rg_value(calculus, u, v, acc))
}

/// Two-terminal weight of the generation-`n` flower, `R^n(w)`.
pub fn sponge_crossing(calculus: Calculus, spec: FlowerSpec, w: f64) -> Result<f64> {
    check_unit("w", w)?;
    Ok(sponge_value(calculus, spec.u, spec.v, spec.n, w))
}

/// Nontrivial fixed point of `R`, by bisection on `R(w) - w`.
pub fn threshold_exact(calculus: Calculus, u: u64, v: u64) -> Result<f64> {
    check_exponent_uv(u, v)?;
    bisect(
        |w| rg_value(calculus, u, v, w) - w,
        1e-300,
        1.0 - f64::EPSILON,
        THRESHOLD_TOL,
    )
}

/// A threshold written as `w_th = 1 - s / V`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScaledThreshold {
    pub s: f64,
    pub v: f64,
}

impl ScaledThreshold {
    /// `1 - w_th`, accurate even when `w_th` rounds to one.
    pub fn one_minus(&self) -> f64 {
        self.s / self.v
    }

    pub fn value(&self) -> f64 {
        1.0 - self.one_minus()
    }

    /// `ln w_th`.
    pub fn ln_value(&self) -> f64 {
        (-self.one_minus()).ln_1p()
    }

    /// `w_th^k` for a possibly huge `k`.
    pub fn pow(&self, k: f64) -> f64 {
        (k * self.ln_value()).exp()
    }
}

/// `ln F` of a concurrence given as `c^k`, from `ln c`.
fn ln_fidelity_pow(ln_c: f64, k: f64) -> f64 {
    let c2 = (2.0 * k * ln_c).exp();
    let om = -(2.0 * k * ln_c).exp_m1();
    (-(c2 / (2.0 * (1.0 + om.sqrt())))).ln_1p()
}

/// `d ln F / dy` evaluated at `y = c^k`, from `ln c`.
fn d_ln_fidelity_pow(ln_c: f64, k: f64) -> f64 {
    let y = (k * ln_c).exp();
    let root = (-(2.0 * k * ln_c).exp_m1()).sqrt();
    let f = 1.0 - y * y / (2.0 * (1.0 + root));
    -y / (2.0 * root * f)
}

/// The threshold located in the variable `s = (1 - w) V`, which stays of
/// order `ln V` for the quantum map and of order one for the classical map.
/// This keeps full relative precision in `1 - w_th` for large `V`.
pub fn threshold_scaled(calculus: Calculus, u: u64, v: u64) -> Result<ScaledThreshold> {
    check_exponent_uv(u, v)?;
    let (uf, vf) = (u as f64, v as f64);
    let residual = |s: f64| -> f64 {
        let ln_w = (-s / vf).ln_1p();
        match calculus {
            // (1 - R) - (1 - w): negative just below w = 1
            Calculus::Classical => {
                let qu = -(uf * ln_w).exp_m1();
                let qv = -(vf * ln_w).exp_m1();
                qu * qv - s / vf
            }
            // ln F(c) - ln F(R(c)) before flooring: positive just below c = 1
            Calculus::Quantum => ln_fidelity_pow(ln_w, 1.0) - ln_fidelity_pow(ln_w, uf) - ln_fidelity_pow(ln_w, vf),
        }
    };
    let s = bisect(residual, 1e-12, vf * (1.0 - 1e-15), 1e-13)?;
    Ok(ScaledThreshold { s, v: vf })
}

/// Generation-`n` weight at which the sponge crossing equals `target`.
pub fn finite_size_threshold(calculus: Calculus, spec: FlowerSpec, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain {
            name: "target",
            value: target,
            domain: "(0, 1)",
        });
    }
    bisect(
        |w| sponge_value(calculus, spec.u, spec.v, spec.n, w) - target,
        0.0,
        1.0,
        THRESHOLD_TOL,
    )
}

/// Slope `R'(w_th)` at the fixed point.
pub fn rg_slope_at_threshold(calculus: Calculus, u: u64, v: u64) -> Result<f64> {
    let th = threshold_scaled(calculus, u, v)?;
    let (uf, vf) = (u as f64, v as f64);
    let slope = match calculus {
        Calculus::Classical => {
            // d/dw [w^U + w^V - w^(U+V)], grouped so that no large terms cancel
            let ln_w = th.ln_value();
            uf * th.pow(uf - 1.0) * -(vf * ln_w).exp_m1() + vf * th.pow(vf - 1.0) * -(uf * ln_w).exp_m1()
        }
        // ln F(R) = ln F(c^U) + ln F(c^V), differentiated at R = c
        Calculus::Quantum => {
            let ln_c = th.ln_value();
            let branch = |k: f64| k * th.pow(k - 1.0) * d_ln_fidelity_pow(ln_c, k);
            (branch(uf) + branch(vf)) / d_ln_fidelity_pow(ln_c, 1.0)
        }
    };
    Ok(slope)
}

/// `nu = ln U / ln R'(w_th)`.
pub fn nu_exact(calculus: Calculus, u: u64, v: u64) -> Result<f64> {
    let slope = rg_slope_at_threshold(calculus, u, v)?;
    if slope.is_nan() || slope <= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "R'(w_th) = {slope} has no relevant direction"
        )));
    }
    Ok((u as f64).ln() / slope.ln())
}

/// Finite-size estimate of `nu` from the drift of the generation-`n`
/// thresholds at a fixed crossing level, `|w_n - w_th| ~ L^(-1/nu)`.
///
/// The regression uses the last [`NU_FIT_WINDOW`] usable generations.
pub fn nu_fit(calculus: Calculus, u: u64, v: u64, n_range: RangeInclusive<u32>, target: f64) -> Result<ScalingFit> {
    nu_fit_window(calculus, u, v, n_range, target, NU_FIT_WINDOW)
}

pub fn nu_fit_window(
    calculus: Calculus,
    u: u64,
    v: u64,
    n_range: RangeInclusive<u32>,
    target: f64,
    window: usize,
) -> Result<ScalingFit> {
    let w_th = threshold_exact(calculus, u, v)?;
    let mut points = Vec::new();
    for n in n_range.clone() {
        let spec = FlowerSpec::new(u, v, n)?;
        let w_n = finite_size_threshold(calculus, spec, target)?;
        let gap = (w_n - w_th).abs();
        if gap < 1e-15 {
            warn!("threshold gap underflows at n = {n}; truncating the fit window");
            break;
        }
        points.push((spec.ln_length(), gap.ln()));
    }
    let len = points.len();
    let start = len.saturating_sub(window.max(3));
    let fit = linear_fit(&points[start..])?;
    let nu = -1.0 / fit.slope;
    Ok(ScalingFit {
        exponent: nu,
        stderr: fit.slope_stderr / (fit.slope * fit.slope),
        points,
        window: (start, len),
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
    })
}

fn binomial(n: u32, k: u32) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).ok()
}

/// Path lengths and multiplicities of the generation-`n` flower with the
/// long arm stretched to `V` links: `(U^(n-k) V^k, C(n, k))`.
pub(crate) fn arm_ensemble(u: u64, v: u64, n: u32) -> Result<PathEnsemble> {
    let mut entries = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        let overflow = || {
            Error::Overflow(format!(
                "path length {u}^{} * {v}^{k} exceeds 64 bits; use log-space lengths",
                n - k
            ))
        };
        let len = u
            .checked_pow(n - k)
            .and_then(|a| v.checked_pow(k).and_then(|b| a.checked_mul(b)))
            .ok_or_else(overflow)?;
        let mult = binomial(n, k).ok_or_else(|| Error::Overflow(format!("C({n}, {k}) exceeds 64 bits")))?;
        entries.push((len, mult));
    }
    PathEnsemble::new(entries)
}

/// The `2^n` edge-disjoint A-B paths of a generation-`n` flower, grouped by
/// length.
pub fn decompose_paths(u: u64, v: u64, n: u32) -> Result<PathEnsemble> {
    check_uv(u, v)?;
    arm_ensemble(u, v, n)
}

/// Materializes the generation-`n` flower with every link set to `w`.
/// Terminals are nodes `0` and `1`.
pub fn flower_network(spec: FlowerSpec, w: f64) -> Result<TwoTerminalNetwork> {
    check_unit("w", w)?;
    let links = (spec.u + spec.v)
        .checked_pow(spec.n)
        .filter(|&e| e <= MAX_MATERIALIZED_EDGES)
        .ok_or_else(|| Error::Overflow(format!("generation {} is too large to materialize", spec.n)))?;
    let mut edges = vec![(0usize, 1usize)];
    let mut next = 2usize;
    for _ in 0..spec.n {
        let mut grown = Vec::with_capacity(links as usize);
        for &(a, b) in &edges {
            for arm in [spec.u, spec.v] {
                let mut prev = a;
                for step in 1..=arm {
                    let node = if step == arm {
                        b
                    } else {
                        next += 1;
                        next - 1
                    };
                    grown.push((prev, node));
                    prev = node;
                }
            }
        }
        edges = grown;
    }
    let mut g = WeightedGraph::new();
    for (a, b) in edges {
        g.add_edge(a, b, w)?;
    }
    TwoTerminalNetwork::new(g, 0, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::reduce_two_terminal;
    use std::f64::consts::FRAC_PI_4;
    use Calculus::*;

    const GOLDEN: f64 = 0.618_033_988_749_894_8;

    #[test]
    fn classical_two_two_fixed_point() {
        let p = threshold_exact(Classical, 2, 2).unwrap();
        assert!((p - GOLDEN).abs() < 1e-12);
        assert!((rg_map(Classical, 2, 2, GOLDEN).unwrap() - GOLDEN).abs() < 1e-15);
    }

    #[test]
    fn quantum_two_two_fixed_point() {
        let c = threshold_exact(Quantum, 2, 2).unwrap();
        assert!((c - 0.759).abs() < 5e-4, "{c}");
        assert!((rg_map(Quantum, 2, 2, 0.759).unwrap() - 0.759).abs() < 1e-3);
        let theta = c.asin() / 2.0;
        assert!((theta / FRAC_PI_4 - 0.549).abs() < 1e-3);
    }

    #[test]
    fn endpoints_are_absorbing() {
        for calc in Calculus::BOTH {
            assert_eq!(rg_map(calc, 2, 3, 0.0).unwrap(), 0.0);
            assert_eq!(rg_map(calc, 2, 3, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_three_classical_root() {
        let p = threshold_exact(Classical, 2, 3).unwrap();
        // p^2 + p^3 - p^5 = p  <=>  p + p^2 - p^4 = 1
        assert!((p + p * p - p.powi(4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_threshold_matches_direct_bisection() {
        for calc in Calculus::BOTH {
            for (u, v) in [(2, 2), (2, 3), (3, 7), (2, 50)] {
                let a = threshold_exact(calc, u, v).unwrap();
                let b = threshold_scaled(calc, u, v).unwrap().value();
                assert!((a - b).abs() < 1e-12, "{calc} ({u},{v}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn unit_u_is_refused() {
        assert!(threshold_exact(Classical, 1, 3).is_err());
        assert!(dimension(1, 2).is_err());
        assert!(rg_map(Classical, 1, 3, 0.5).is_ok());
        assert!(FlowerSpec::new(3, 2, 1).is_err());
    }

    #[test]
    fn sponge_identity_and_nesting() {
        let s0 = FlowerSpec::new(2, 2, 0).unwrap();
        assert_eq!(sponge_crossing(Quantum, s0, 0.37).unwrap(), 0.37);
        let s2 = FlowerSpec::new(2, 2, 2).unwrap();
        let r = |p: f64| 2.0 * p * p - p.powi(4);
        assert!((sponge_crossing(Classical, s2, 0.7).unwrap() - r(r(0.7))).abs() < 1e-15);
    }

    #[test]
    fn finite_size_threshold_first_generation() {
        let spec = FlowerSpec::new(2, 2, 1).unwrap();
        let p = finite_size_threshold(Classical, spec, 0.8).unwrap();
        assert!((2.0 * p * p - p.powi(4) - 0.8).abs() < 1e-12);
        assert!(finite_size_threshold(Classical, spec, 1.0).is_err());
    }

    #[test]
    fn nu_exact_two_two() {
        assert!((nu_exact(Classical, 2, 2).unwrap() - 1.635).abs() < 1e-3);
        assert!((nu_exact(Quantum, 2, 2).unwrap() - 1.352).abs() < 1e-3);
    }

    #[test]
    fn decomposition() {
        let e = decompose_paths(2, 3, 3).unwrap();
        assert_eq!(e.entries(), &[(8, 1), (12, 3), (18, 3), (27, 1)]);
        assert_eq!(e.total_paths(), 8);
        assert_eq!(decompose_paths(2, 2, 0).unwrap().entries(), &[(1, 1)]);
        // equal lengths merge
        assert_eq!(decompose_paths(2, 2, 3).unwrap().entries(), &[(8, 8)]);
        assert!(matches!(decompose_paths(10, 10, 40), Err(Error::Overflow(_))));
    }

    #[test]
    fn dimensions() {
        assert!((dimension(2, 2).unwrap() - 2.0).abs() < 1e-15);
        assert!((dimension(2, 6).unwrap() - 3.0).abs() < 1e-15);
        assert!((dimension(3, 6).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn materialized_flower_counts() {
        let net = flower_network(FlowerSpec::new(2, 3, 2).unwrap(), 0.5).unwrap();
        assert_eq!(net.graph().edge_count(), 25);
        // N_n = N_(n-1) + (U + V - 2) E_(n-1)
        assert_eq!(net.graph().nodes().len(), 2 + 3 + 5 * 3);
    }

    #[test]
    fn materialized_flower_reduces_to_rg_iterate() {
        for calc in Calculus::BOTH {
            let spec = FlowerSpec::new(2, 2, 2).unwrap();
            let net = flower_network(spec, 0.8).unwrap();
            let direct = sponge_crossing(calc, spec, 0.8).unwrap();
            assert!((reduce_two_terminal(calc, &net).unwrap() - direct).abs() < 1e-12);
        }
    }
}

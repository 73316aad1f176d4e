//! Closed-form results for flowers with a very long arm, `V -> infinity` at
//! fixed `U`.
//!
//! The classical threshold approaches one as `1 - A / V` with
//! `A = ln(U / (U - 1))`. The quantum threshold is `1 - m / (2V)` where `m`
//! solves
//!
//! ```text
//! m + ln(m) / 2 - ln(V) / 2 + ln(4 (sqrt(U) - 1)) = 0
//! ```
//!
//! and so grows like `ln(V) / 2`. Functions taking `ln_v` never form `V`
//! itself and stay finite up to `ln V = 1e4`.

use std::f64::consts::{FRAC_PI_4, LN_2};

use serde::Serialize;

use crate::bisect::bisect;
use crate::connectivity::Calculus;
use crate::error::{Error, Result};
use crate::flower::threshold_scaled;

fn check_u(u: u64) -> Result<f64> {
    if u < 2 {
        return Err(Error::Domain {
            name: "U",
            value: u as f64,
            domain: "U >= 2",
        });
    }
    Ok(u as f64)
}

/// `A = ln(U / (U - 1))`.
pub fn short_arm_constant(u: u64) -> Result<f64> {
    let u = check_u(u)?;
    Ok((u / (u - 1.0)).ln())
}

/// `K = 4 (sqrt(U) - 1)`.
pub fn k_constant(u: u64) -> Result<f64> {
    Ok(4.0 * (check_u(u)?.sqrt() - 1.0))
}

/// `1 - A / V`.
pub fn pth_asymptotic(u: u64, v: f64) -> Result<f64> {
    if v.is_nan() || v < u as f64 {
        return Err(Error::InvalidArgument(format!("need V >= U, got V = {v}")));
    }
    Ok(1.0 - short_arm_constant(u)? / v)
}

/// Root of the m-equation, by bisection on `(1e-6, ln V]`.
pub fn m_solve(u: u64, ln_v: f64) -> Result<f64> {
    let ln_k = k_constant(u)?.ln();
    let h = |m: f64| m + 0.5 * m.ln() - 0.5 * ln_v + ln_k;
    let lo = 1e-6;
    if ln_v.is_nan() || ln_v <= lo || h(ln_v) <= 0.0 {
        return Err(Error::NoRoot(format!(
            "the m-equation has no root for ln V = {ln_v}; V must exceed about {:.3e}",
            minimum_v(u)?
        )));
    }
    bisect(h, lo, ln_v, 1e-12)
}

/// Smallest `V` for which the m-equation has a root on its bracket.
fn minimum_v(u: u64) -> Result<f64> {
    let ln_k = k_constant(u)?.ln();
    // h(ln V) > 0  <=>  ln V / 2 + ln(ln V) / 2 + ln K > 0
    let h = |x: f64| 0.5 * x + 0.5 * x.ln() + ln_k;
    Ok(bisect(h, 1e-6, 1e3, 1e-12)?.exp())
}

/// `1 - c_th` from the m-equation, `m / (2V)`.
pub fn cth_one_minus_asymptotic(u: u64, ln_v: f64) -> Result<f64> {
    let m = m_solve(u, ln_v)?;
    Ok(0.5 * m * (-ln_v).exp())
}

/// `1 - m / (2V)`.
pub fn cth_asymptotic(u: u64, ln_v: f64) -> Result<f64> {
    Ok(1.0 - cth_one_minus_asymptotic(u, ln_v)?)
}

/// Leading form `1 - ln(V) / (4V)`, independent of `U`.
pub fn cth_leading(ln_v: f64) -> f64 {
    1.0 - 0.25 * ln_v * (-ln_v).exp()
}

/// Crossing along the long arm at the exact thresholds, `(p_th^V, c_th^V)`.
pub fn long_path_crossing(u: u64, v: u64) -> Result<(f64, f64)> {
    let p = threshold_scaled(Calculus::Classical, u, v)?;
    let c = threshold_scaled(Calculus::Quantum, u, v)?;
    Ok((p.pow(v as f64), c.pow(v as f64)))
}

/// Limits of the long-arm crossing, `((U - 1) / U, V^(-1/4))`.
pub fn long_path_crossing_asymptotic(u: u64, ln_v: f64) -> Result<(f64, f64)> {
    let uf = check_u(u)?;
    Ok(((uf - 1.0) / uf, (-0.25 * ln_v).exp()))
}

/// Three successively coarser approximations of the slope `Lambda` of the
/// quantum map at its fixed point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LambdaTiers {
    /// Full large-`V` expression in terms of `m`.
    pub full: f64,
    /// `sqrt(U) + (K / 2) m`.
    pub linear: f64,
    /// `ln V`, from `ln Lambda ~ ln ln V`.
    pub loglog: f64,
}

impl LambdaTiers {
    /// `nu = ln U / ln Lambda` for each tier.
    pub fn nu(&self, u: u64) -> [f64; 3] {
        let ln_u = (u as f64).ln();
        [self.full, self.linear, self.loglog].map(|l| ln_u / l.ln())
    }
}

pub fn lambda_tiers(u: u64, ln_v: f64) -> Result<LambdaTiers> {
    let uf = check_u(u)?;
    let m = m_solve(u, ln_v)?;
    let k = k_constant(u)?;
    let m_over_v = m * (-ln_v).exp();
    let sqrt_tail = (-(-m).exp_m1()).sqrt();
    // the sqrt(m / V) prefactor is cancelled by hand so that V never appears
    let short = uf.sqrt() * (1.0 - m_over_v * uf) * (1.0 + sqrt_tail);
    let long = m.sqrt() * (0.5 * ln_v - m).exp() * (1.0 + (m_over_v * uf).sqrt()) / sqrt_tail;
    Ok(LambdaTiers {
        full: 0.5 * (1.0 + m_over_v) * (short + long),
        linear: uf.sqrt() + 0.5 * k * m,
        loglog: ln_v,
    })
}

/// Classical and quantum entries of the `V -> infinity` exponent table.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExponentLimits {
    pub nu: f64,
    pub d_minus_df: f64,
    pub beta: f64,
}

/// Classical limits, functions of `U` only.
pub fn classical_limits(u: u64) -> Result<ExponentLimits> {
    let uf = check_u(u)?;
    let a = short_arm_constant(u)?;
    let ln_u = uf.ln();
    let denom = (1.0 + (uf - 1.0) * a).ln();
    let gap = uf.ln() - ((1.0 - uf) + 2.0 / a).ln();
    Ok(ExponentLimits {
        nu: ln_u / denom,
        d_minus_df: gap / ln_u,
        beta: gap / denom,
    })
}

/// Quantum leading terms: `nu = ln U / ln ln V`, `d - d_f = ln ln V / ln U`
/// and their product `beta = 1`.
pub fn quantum_limits(u: u64, ln_v: f64) -> Result<ExponentLimits> {
    let ln_u = check_u(u)?.ln();
    if ln_v.is_nan() || ln_v <= 1.0 {
        return Err(Error::InvalidArgument(format!("need ln V > 1, got {ln_v}")));
    }
    let ll = ln_v.ln();
    Ok(ExponentLimits {
        nu: ln_u / ll,
        d_minus_df: ll / ln_u,
        beta: 1.0,
    })
}

/// Quantum `d - d_f` keeping the `-2 ln 2` correction of the fixed-point
/// ratio `4 / ln V`.
pub fn quantum_d_minus_df(u: u64, ln_v: f64) -> Result<f64> {
    let ln_u = check_u(u)?.ln();
    Ok((ln_v.ln() - 2.0 * LN_2) / ln_u)
}

/// All large-`V` predictions for one `(U, ln V)`.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub u: u64,
    pub ln_v: f64,
    pub p_th_one_minus: f64,
    pub c_th_one_minus: f64,
    pub m_root: f64,
    pub classical: ExponentLimits,
    pub quantum: ExponentLimits,
    pub lambda: LambdaTiers,
    pub nu_quantum_tiers: [f64; 3],
    pub long_path_crossing: (f64, f64),
}

pub fn asymptotic_exponents(u: u64, ln_v: f64) -> Result<AsymptoticReport> {
    let m = m_solve(u, ln_v)?;
    let lambda = lambda_tiers(u, ln_v)?;
    Ok(AsymptoticReport {
        u,
        ln_v,
        p_th_one_minus: short_arm_constant(u)? * (-ln_v).exp(),
        c_th_one_minus: 0.5 * m * (-ln_v).exp(),
        m_root: m,
        classical: classical_limits(u)?,
        quantum: quantum_limits(u, ln_v)?,
        nu_quantum_tiers: lambda.nu(u),
        lambda,
        long_path_crossing: long_path_crossing_asymptotic(u, ln_v)?,
    })
}

/// Predicted resilience factors `(A_p, A_c)` of a flower whose long arm is
/// stretched `q` times: `A_p = ln(U/(U-1)) / 2` and
/// `A_c = sqrt(V) sqrt(q ln q / 8)`.
pub fn resilience_theory(u: u64, v: u64, q: f64) -> Result<(f64, f64)> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::Domain {
            name: "q",
            value: q,
            domain: "[1, inf)",
        });
    }
    let a_p = 0.5 * short_arm_constant(u)?;
    let a_c = (v as f64).sqrt() * (q * q.ln() / 8.0).sqrt();
    Ok((a_p, a_c))
}

/// Resilience factor of the infinite `(U, qV)` flower measured against the
/// shortest-path-only threshold `theta = pi/4`, on the length scale `qV` of
/// the stretched arm: `qV (pi/4 - theta_th(U, qV))`.
pub fn flower_resilience(calculus: Calculus, u: u64, v: u64, q: u64) -> Result<f64> {
    let qv = v
        .checked_mul(q)
        .ok_or_else(|| Error::Overflow(format!("q V = {q} * {v} exceeds 64 bits")))?;
    let th = threshold_scaled(calculus, u, qv)?;
    let eps = th.one_minus();
    // pi/4 - theta without cancellation
    let gap = match calculus {
        // p = 2 sin^2(theta)  =>  cos(2 theta) = 1 - p
        Calculus::Classical => 0.5 * eps.asin(),
        // c = sin(2 theta)  =>  cos(2 theta) = sqrt(1 - c^2)
        Calculus::Quantum => 0.5 * (eps * (2.0 - eps)).sqrt().asin(),
    };
    debug_assert!(gap <= FRAC_PI_4);
    Ok(qv as f64 * gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flower::threshold_exact;

    #[test]
    fn pth_leading_term() {
        assert!((pth_asymptotic(2, 100.0).unwrap() - (1.0 - LN_2 / 100.0)).abs() < 1e-15);
        assert!(pth_asymptotic(2, 1.0).is_err());
    }

    #[test]
    fn pth_matches_exact_at_large_v() {
        let v = 10_000u64;
        let exact = threshold_scaled(Calculus::Classical, 2, v).unwrap().one_minus();
        let asym = 1.0 - pth_asymptotic(2, v as f64).unwrap();
        assert!(((exact - asym) / asym).abs() < 1e-4, "{exact} vs {asym}");
    }

    #[test]
    fn m_root_at_ln_v_twenty() {
        let m = m_solve(2, 20.0).unwrap();
        assert!((m - 8.43).abs() < 5e-3, "{m}");
        let h = m + 0.5 * m.ln() - 10.0 + (4.0 * (2f64.sqrt() - 1.0)).ln();
        assert!(h.abs() < 1e-11);
    }

    #[test]
    fn m_tends_to_half_ln_v() {
        let mut last = f64::INFINITY;
        for ln_v in [20.0, 200.0, 2000.0] {
            let gap = (m_solve(2, ln_v).unwrap() / (0.5 * ln_v) - 1.0).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 0.01);
    }

    #[test]
    fn m_equation_needs_large_v() {
        assert!(matches!(m_solve(2, 1e-7), Err(Error::NoRoot(_))));
        assert!(m_solve(1, 20.0).is_err());
    }

    #[test]
    fn huge_ln_v_stays_finite() {
        let r = asymptotic_exponents(2, 1e4).unwrap();
        assert!(r.m_root.is_finite() && r.lambda.full.is_finite());
        assert!(r.c_th_one_minus == 0.0 || r.c_th_one_minus.is_finite());
        assert!(r.nu_quantum_tiers.iter().all(|x| x.is_finite() && *x > 0.0));
    }

    #[test]
    fn lambda_tiers_order() {
        let t = lambda_tiers(2, 50.0).unwrap();
        assert!(t.full > 0.0 && t.linear > 0.0);
        assert!(((t.full - t.linear) / t.linear).abs() < 0.05);
    }

    #[test]
    fn classical_nu_limit_for_u_two() {
        let l = classical_limits(2).unwrap();
        assert!((l.nu - LN_2 / (1.0 + LN_2).ln()).abs() < 1e-15);
        assert!((l.beta - l.nu * l.d_minus_df).abs() < 1e-15);
    }

    #[test]
    fn quantum_beta_is_one() {
        for u in [2, 5, 10] {
            let l = quantum_limits(u, 100.0).unwrap();
            assert_eq!(l.beta, 1.0);
            assert!((l.nu * l.d_minus_df - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn long_path_symmetric_flower() {
        let (p, c) = long_path_crossing(3, 3).unwrap();
        let pu = threshold_exact(Calculus::Classical, 3, 3).unwrap().powi(3);
        let cu = threshold_exact(Calculus::Quantum, 3, 3).unwrap().powi(3);
        assert!((p - pu).abs() < 1e-12 && (c - cu).abs() < 1e-12);
    }

    #[test]
    fn resilience_closed_forms() {
        let (a_p, a_c) = resilience_theory(2, 2, 1.0).unwrap();
        assert!((a_p - LN_2 / 2.0).abs() < 1e-15);
        assert_eq!(a_c, 0.0);
        let r = resilience_theory(2, 2, 4.0).unwrap().1 / resilience_theory(2, 2, 2.0).unwrap().1;
        assert!((r - 2.0).abs() < 1e-14);
        assert!(resilience_theory(2, 2, 0.5).is_err());
    }

    #[test]
    fn flower_resilience_classical_plateau() {
        let a = flower_resilience(Calculus::Classical, 2, 2, 64).unwrap();
        assert!((a / (LN_2 / 2.0) - 1.0).abs() < 0.05, "{a}");
    }
}

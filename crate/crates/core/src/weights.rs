//! Link-weight coordinates.
//!
//! A link carries a partially entangled pure state parameterised by an angle
//! `theta` in `[0, pi/4]`. The classical calculus works with the success
//! probability `p = 2 sin^2(theta)`, the concurrence calculus with
//! `c = sin(2 theta)`. All three coordinates are strictly increasing functions
//! of each other, so any one of them identifies the link.

use std::f64::consts::FRAC_PI_4;

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest admissible angle, a maximally entangled link.
pub const THETA_MAX: f64 = FRAC_PI_4;

/// A single link weight, stored as its angle.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LinkWeight {
    theta: f64,
}

impl LinkWeight {
    pub const ZERO: LinkWeight = LinkWeight { theta: 0.0 };
    pub const MAX: LinkWeight = LinkWeight { theta: THETA_MAX };

    pub fn from_theta(theta: f64) -> Result<Self> {
        check_theta(theta)?;
        Ok(Self { theta })
    }

    pub fn from_p(p: f64) -> Result<Self> {
        Ok(Self { theta: p_to_theta(p)? })
    }

    pub fn from_c(c: f64) -> Result<Self> {
        Ok(Self { theta: c_to_theta(c)? })
    }

    pub fn theta(self) -> f64 {
        self.theta
    }

    pub fn p(self) -> f64 {
        p_of(self.theta)
    }

    pub fn c(self) -> f64 {
        c_of(self.theta)
    }
}

fn check_theta(theta: f64) -> Result<f64> {
    if (0.0..=THETA_MAX).contains(&theta) {
        Ok(theta)
    } else {
        Err(Error::Domain {
            name: "theta",
            value: theta,
            domain: "[0, pi/4]",
        })
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<f64> {
    crate::error::check_unit(name, v)
}

#[inline]
fn p_of(theta: f64) -> f64 {
    let s = theta.sin();
    (2.0 * s * s).min(1.0)
}

#[inline]
fn c_of(theta: f64) -> f64 {
    (2.0 * theta).sin().min(1.0)
}

/// `p = 2 sin^2(theta)`.
pub fn theta_to_p(theta: f64) -> Result<f64> {
    Ok(p_of(check_theta(theta)?))
}

/// `c = sin(2 theta)`.
pub fn theta_to_c(theta: f64) -> Result<f64> {
    Ok(c_of(check_theta(theta)?))
}

pub fn p_to_theta(p: f64) -> Result<f64> {
    let p = check_unit("p", p)?;
    Ok((p / 2.0).sqrt().asin().min(THETA_MAX))
}

pub fn c_to_theta(c: f64) -> Result<f64> {
    let c = check_unit("c", c)?;
    Ok((c.asin() / 2.0).min(THETA_MAX))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn endpoints() {
        assert_eq!(theta_to_p(0.0).unwrap(), 0.0);
        assert_eq!(theta_to_c(0.0).unwrap(), 0.0);
        assert!((theta_to_p(FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
        assert!((theta_to_c(FRAC_PI_4).unwrap() - 1.0).abs() < 1e-15);
        assert!((p_to_theta(1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert!((c_to_theta(1.0).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(p_to_theta(0.0).unwrap(), 0.0);
        assert_eq!(c_to_theta(0.0).unwrap(), 0.0);
    }

    #[test]
    fn half_probability_is_pi_over_six() {
        let th = p_to_theta(0.5).unwrap();
        assert!((th - PI / 6.0).abs() < 1e-15);
        assert!((theta_to_p(th).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn golden_threshold_round_trips() {
        let p = (5f64.sqrt() - 1.0) / 2.0;
        let th = p_to_theta(p).unwrap();
        assert!((theta_to_p(th).unwrap() - p).abs() < 1e-15);
        // about 0.750 pi/4 in angle units
        assert!((th / FRAC_PI_4 - 0.750).abs() < 5e-4);
    }

    #[test]
    fn concurrence_at_0549_quarter_pi() {
        let c = theta_to_c(0.549 * FRAC_PI_4).unwrap();
        assert!((c - 0.759).abs() < 5e-4, "c = {c}");
    }

    #[test]
    fn out_of_domain() {
        assert!(theta_to_p(-1e-9).is_err());
        assert!(theta_to_c(FRAC_PI_4 + 1e-9).is_err());
        assert!(p_to_theta(1.0 + 1e-12).is_err());
        assert!(c_to_theta(-0.1).is_err());
        assert!(p_to_theta(f64::NAN).is_err());
        assert!(LinkWeight::from_theta(1.0).is_err());
    }

    #[test]
    fn dense_round_trips_and_identity() {
        for i in 0..=20_000 {
            let v = i as f64 / 20_000.0;
            let p = theta_to_p(p_to_theta(v).unwrap()).unwrap();
            let c = theta_to_c(c_to_theta(v).unwrap()).unwrap();
            assert!((p - v).abs() <= 1e-14, "p round trip at {v}");
            assert!((c - v).abs() <= 1e-14, "c round trip at {v}");

            let w = LinkWeight::from_theta(v * FRAC_PI_4).unwrap();
            let (p, c) = (w.p(), w.c());
            assert!((c * c - (2.0 * p - p * p)).abs() <= 1e-14);
        }
    }

    #[test]
    fn coordinates_are_monotone() {
        let mut last = LinkWeight::ZERO;
        for i in 1..=1000 {
            let w = LinkWeight::from_theta(i as f64 / 1000.0 * FRAC_PI_4).unwrap();
            assert!(w.p() >= last.p() && w.c() >= last.c());
            last = w;
        }
    }
}

//! Percolating strength through layer transfer operators.
//!
//! A bulk link sitting at position `a` of the short arm (or `b` of the long
//! arm) of a flower motif reaches the two motif terminals through chains of
//! links and through the connectivities `x`, `y` of the next layer. Writing
//! `t` for the accumulated bulk-to-boundary strength, each branch obeys
//!
//! ```text
//! x' t' = t A,   y' t' = t B,   x' y' = R(w)
//! A = para(x w^e1, y w^e2),   B = para(x w^e3, y w^e4)
//! ```
//!
//! with exponents `(a, U+V-1-a, U-1-a, V+a)` on the short arm and
//! `(b, U+V-1-b, V-1-b, U+b)` on the long arm. Series composition is a
//! product in both calculi, so the system has the closed-form solution
//! `t'/t = sqrt(A B / R)`, `x' = sqrt(R A / B)`, `y' = sqrt(R B / A)`.
//!
//! A layer averages `t'/t`, `x'` and `y'` arithmetically over the `U + V`
//! equally likely branches. Layer `j` uses the coarse-grained weight
//! `R^j(w)`. All strength bookkeeping is logarithmic.

use std::ops::RangeInclusive;

use serde::Serialize;

use crate::connectivity::{para2, pow_len, Calculus};
use crate::error::{check_unit, Error, Result};
use crate::fit::{linear_fit, ScalingFit};
use crate::flower::{dimension, nu_exact, rg_value, threshold_exact};
use crate::reduction::{broyden_solve, BroydenOptions};

/// Generation used for order-parameter curves.
pub const ORDER_PARAMETER_N: u32 = 150;
/// Range of `w - w_th` used by the order-parameter fit of `beta`.
pub const ORDER_PARAMETER_WINDOW: (f64, f64) = (1e-4, 1e-2);
/// Generations used by the fractal-dimension fit.
pub const DF_FIT_RANGE: RangeInclusive<u32> = 20..=37;
const ORDER_PARAMETER_POINTS: usize = 41;
const FIXED_POINT_ITERS: usize = 10_000;

/// Connectivities toward the two terminals and the log of the accumulated
/// strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferState {
    pub x: f64,
    pub y: f64,
    pub ln_t: f64,
}

impl TransferState {
    pub fn new(x: f64, y: f64, ln_t: f64) -> Result<Self> {
        check_unit("x", x)?;
        check_unit("y", y)?;
        if ln_t.is_nan() || ln_t > 0.0 {
            return Err(Error::Domain {
                name: "ln t",
                value: ln_t,
                domain: "[-inf, 0]",
            });
        }
        Ok(Self { x, y, ln_t })
    }

    /// `x = y = seed`, `t = 1`.
    pub fn seeded(seed: f64) -> Result<Self> {
        Self::new(seed, seed, 0.0)
    }

    pub fn strength(&self) -> f64 {
        self.ln_t.exp()
    }

    fn dead() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            ln_t: f64::NEG_INFINITY,
        }
    }
}

/// How each branch system is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferSolver {
    /// The closed-form solution of the three-equation system.
    #[default]
    ClosedForm,
    /// The same system handed to the quasi-Newton mesh-star solver; kept
    /// for comparison with the closed form.
    MeshStar,
}

/// Initial connectivities of the deepest layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferSeed {
    /// `x = y = w`, the generation-0 crossing.
    #[default]
    Weight,
    /// `x = y = 1`.
    Perfect,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StrengthOptions {
    pub seed: TransferSeed,
    pub solver: TransferSolver,
}

/// Chain exponents `(e1, e2, e3, e4)` of `branch`; branches `0..U` sit on
/// the short arm, `U..U+V` on the long arm.
pub fn branch_exponents(u: u64, v: u64, branch: u64) -> Result<[u64; 4]> {
    if branch < u {
        let a = branch;
        Ok([a, u + v - 1 - a, u - 1 - a, v + a])
    } else if branch < u + v {
        let b = branch - u;
        Ok([b, u + v - 1 - b, v - 1 - b, u + b])
    } else {
        Err(Error::InvalidArgument(format!(
            "branch {branch} out of range for a ({u},{v}) motif"
        )))
    }
}

/// `(ln A, ln B, ln R)` for one branch.
fn branch_logs(calculus: Calculus, e: [u64; 4], w: f64, rw: f64, x: f64, y: f64) -> (f64, f64, f64) {
    let chain = |k: u64| pow_len(w, k as f64);
    let a = para2(calculus, x * chain(e[0]), y * chain(e[1]));
    let b = para2(calculus, x * chain(e[2]), y * chain(e[3]));
    (a.ln(), b.ln(), rw.ln())
}

fn solve_branch(
    calculus: Calculus,
    e: [u64; 4],
    w: f64,
    rw: f64,
    state: TransferState,
    solver: TransferSolver,
) -> Result<TransferState> {
    if state.ln_t == f64::NEG_INFINITY {
        return Ok(TransferState::dead());
    }
    let (la, lb, lr) = branch_logs(calculus, e, w, rw, state.x, state.y);
    if !la.is_finite() || !lb.is_finite() || !lr.is_finite() {
        return Ok(TransferState::dead());
    }
    let logs = [0.5 * (lr + la - lb), 0.5 * (lr + lb - la), 0.5 * (la + lb - lr)];
    // a bulk link never reaches the boundary better than its own layer did
    let clamped = TransferState {
        x: logs[0].exp().min(1.0),
        y: logs[1].exp().min(1.0),
        ln_t: state.ln_t + logs[2].min(0.0),
    };
    match solver {
        TransferSolver::ClosedForm => Ok(clamped),
        // without a root inside the unit box there is nothing to solve for
        TransferSolver::MeshStar if logs.iter().any(|&l| l > 0.0) => Ok(clamped),
        TransferSolver::MeshStar => {
            let (ta, tb, r) = (la.exp(), lb.exp(), lr.exp());
            if ta >= 1.0 - 1e-12 && tb >= 1.0 - 1e-12 && r >= 1.0 - 1e-12 {
                return Ok(TransferState {
                    x: 1.0,
                    y: 1.0,
                    ln_t: state.ln_t,
                });
            }
            // unknowns (x', y', t'/t), all inside the unit box
            let residual = |z: &[f64]| Ok(vec![z[0] * z[2] - ta, z[1] * z[2] - tb, z[0] * z[1] - r]);
            let guess = logs.map(|l| l.exp().clamp(0.01, 0.99));
            let sol = broyden_solve(
                residual,
                &guess,
                BroydenOptions {
                    tol: 1e-14,
                    accept: 1e-14,
                    max_iter: 200,
                },
            )?;
            Ok(TransferState {
                x: sol.x[0],
                y: sol.x[1],
                ln_t: state.ln_t + sol.x[2].ln().min(0.0),
            })
        }
    }
}

/// One branch update at weight `w`.
pub fn transfer_step(
    calculus: Calculus,
    u: u64,
    v: u64,
    branch: u64,
    w: f64,
    state: TransferState,
) -> Result<TransferState> {
    check_unit("w", w)?;
    let e = branch_exponents(u, v, branch)?;
    let rw = rg_value(calculus, u, v, w);
    solve_branch(calculus, e, w, rw, state, TransferSolver::ClosedForm)
}

/// One layer: every branch from `state`, averaged. Returns the new state and
/// the averaged ratio `t'/t`.
fn transfer_layer(
    calculus: Calculus,
    u: u64,
    v: u64,
    w: f64,
    state: TransferState,
    solver: TransferSolver,
) -> Result<(TransferState, f64)> {
    let rw = rg_value(calculus, u, v, w);
    let k = (u + v) as f64;
    let (mut sx, mut sy, mut sr) = (0.0, 0.0, 0.0);
    let base = TransferState { ln_t: 0.0, ..state };
    for branch in 0..u + v {
        let e = branch_exponents(u, v, branch)?;
        let s = solve_branch(calculus, e, w, rw, base, solver)?;
        sx += s.x;
        sy += s.y;
        sr += s.ln_t.exp();
    }
    let ratio = sr / k;
    let next = TransferState {
        x: (sx / k).clamp(0.0, 1.0),
        y: (sy / k).clamp(0.0, 1.0),
        ln_t: if ratio > 0.0 {
            state.ln_t + ratio.ln()
        } else {
            f64::NEG_INFINITY
        },
    };
    Ok((next, ratio))
}

/// `ln` strength after each of `n` layers.
pub fn strength_history(calculus: Calculus, u: u64, v: u64, n: u32, w: f64, opts: StrengthOptions) -> Result<Vec<f64>> {
    check_unit("w", w)?;
    if u < 1 || v < u {
        return Err(Error::InvalidArgument(format!(
            "flower needs 1 <= U <= V, got ({u}, {v})"
        )));
    }
    let seed = match opts.seed {
        TransferSeed::Weight => w,
        TransferSeed::Perfect => 1.0,
    };
    let mut state = TransferState::seeded(seed)?;
    let mut wj = w;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        if state.ln_t == f64::NEG_INFINITY {
            out.push(f64::NEG_INFINITY);
            continue;
        }
        state = transfer_layer(calculus, u, v, wj, state, opts.solver)?.0;
        wj = rg_value(calculus, u, v, wj);
        out.push(state.ln_t);
    }
    Ok(out)
}

/// `ln` of the percolating strength after `n` layers.
pub fn strength_iterate(calculus: Calculus, u: u64, v: u64, n: u32, w: f64) -> Result<f64> {
    strength_iterate_with(calculus, u, v, n, w, StrengthOptions::default())
}

pub fn strength_iterate_with(calculus: Calculus, u: u64, v: u64, n: u32, w: f64, opts: StrengthOptions) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("strength needs at least one layer".into()));
    }
    Ok(*strength_history(calculus, u, v, n, w, opts)?.last().expect("n >= 1"))
}

/// Averaged ratio `t'/t` at `w` with the connectivities fixed at `x = y`.
pub fn layer_ratio(calculus: Calculus, u: u64, v: u64, w: f64, x: f64) -> Result<f64> {
    check_unit("w", w)?;
    let state = TransferState::seeded(x)?;
    Ok(transfer_layer(calculus, u, v, w, state, TransferSolver::ClosedForm)?.1)
}

/// The self-consistent fixed point of the averaged layer map at the
/// threshold, where `w` itself no longer flows.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalRatio {
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
    /// Averaged `t'/t`, equal to `(U+V)^(-theta)`.
    pub ratio: f64,
    pub theta: f64,
    pub fractal_dimension: f64,
}

/// Iterates the averaged layer map at `w = w_th` to its fixed point and
/// reports the limiting ratio together with `theta` and
/// `d_f = d (1 - theta)`.
pub fn critical_ratio(calculus: Calculus, u: u64, v: u64) -> Result<CriticalRatio> {
    let w = threshold_exact(calculus, u, v)?;
    ratio_at(calculus, u, v, w)
}

pub(crate) fn ratio_at(calculus: Calculus, u: u64, v: u64, w: f64) -> Result<CriticalRatio> {
    let d = dimension(u, v)?;
    let mut state = TransferState::seeded(w.sqrt())?;
    let mut ratio = 1.0;
    for _ in 0..FIXED_POINT_ITERS {
        let (next, r) = transfer_layer(
            calculus,
            u,
            v,
            w,
            TransferState { ln_t: 0.0, ..state },
            TransferSolver::ClosedForm,
        )?;
        let moved = (next.x - state.x)
            .abs()
            .max((next.y - state.y).abs())
            .max((r - ratio).abs());
        state = next;
        ratio = r;
        if moved < 1e-15 {
            break;
        }
    }
    let k = ((u + v) as f64).ln();
    let theta = -ratio.ln() / k;
    Ok(CriticalRatio {
        threshold: w,
        x: state.x,
        y: state.y,
        ratio,
        theta,
        fractal_dimension: d * (1.0 - theta),
    })
}

/// `d_f` from the slope of `ln N_g = ln N + ln strength` against `ln L`
/// at the threshold.
pub fn fractal_dimension_fit(calculus: Calculus, u: u64, v: u64, n_range: RangeInclusive<u32>) -> Result<ScalingFit> {
    let w = threshold_exact(calculus, u, v)?;
    fractal_dimension_fit_at(calculus, u, v, n_range, w)
}

pub fn fractal_dimension_fit_at(
    calculus: Calculus,
    u: u64,
    v: u64,
    n_range: RangeInclusive<u32>,
    w: f64,
) -> Result<ScalingFit> {
    let points = critical_points(calculus, u, v, n_range, w, true)?;
    let fit = linear_fit(&points)?;
    Ok(ScalingFit {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        window: (0, points.len()),
        points,
        slope: fit.slope,
        slope_stderr: fit.slope_stderr,
    })
}

fn critical_points(
    calculus: Calculus,
    u: u64,
    v: u64,
    n_range: RangeInclusive<u32>,
    w: f64,
    with_volume: bool,
) -> Result<Vec<(f64, f64)>> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if lo < 1 || hi < lo {
        return Err(Error::InvalidArgument(format!("bad generation range {lo}..={hi}")));
    }
    let history = strength_history(calculus, u, v, hi, w, StrengthOptions::default())?;
    let (ln_u, ln_k) = ((u as f64).ln(), ((u + v) as f64).ln());
    let mut points = Vec::new();
    for n in lo..=hi {
        let ln_p = history[n as usize - 1];
        if !ln_p.is_finite() {
            return Err(Error::InsufficientData(format!("strength vanished at n = {n}")));
        }
        let volume = if with_volume { n as f64 * ln_k } else { 0.0 };
        points.push((n as f64 * ln_u, volume + ln_p));
    }
    Ok(points)
}

/// Estimator for `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMethod {
    /// Slope of `ln strength` against `ln(w - w_th)` at large fixed `n`.
    OrderParameter,
    /// `-nu` times the slope of `ln strength` against `ln L` at threshold.
    Slope,
}

pub fn beta_fit(calculus: Calculus, u: u64, v: u64, method: BetaMethod) -> Result<ScalingFit> {
    let w_th = threshold_exact(calculus, u, v)?;
    match method {
        BetaMethod::OrderParameter => {
            let (lo, hi) = ORDER_PARAMETER_WINDOW;
            let mut points = Vec::with_capacity(ORDER_PARAMETER_POINTS);
            for i in 0..ORDER_PARAMETER_POINTS {
                let f = i as f64 / (ORDER_PARAMETER_POINTS - 1) as f64;
                let delta = (lo.ln() + f * (hi.ln() - lo.ln())).exp();
                let w = w_th + delta;
                if w > 1.0 {
                    return Err(Error::InsufficientData(format!(
                        "threshold {w_th} leaves no room for w - w_th = {delta:e}"
                    )));
                }
                let ln_p = strength_iterate(calculus, u, v, ORDER_PARAMETER_N, w)?;
                if !ln_p.is_finite() {
                    return Err(Error::InsufficientData(format!(
                        "strength vanished at w - w_th = {delta:e}"
                    )));
                }
                points.push((delta.ln(), ln_p));
            }
            let fit = linear_fit(&points)?;
            Ok(ScalingFit {
                exponent: fit.slope,
                stderr: fit.slope_stderr,
                window: (0, points.len()),
                points,
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
            })
        }
        BetaMethod::Slope => {
            let nu = nu_exact(calculus, u, v)?;
            let points = critical_points(calculus, u, v, DF_FIT_RANGE, w_th, false)?;
            let fit = linear_fit(&points)?;
            Ok(ScalingFit {
                exponent: -nu * fit.slope,
                stderr: nu * fit.slope_stderr,
                window: (0, points.len()),
                points,
                slope: fit.slope,
                slope_stderr: fit.slope_stderr,
            })
        }
    }
}

/// Exponents entering the hyperscaling check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Hyperscaling {
    pub d: f64,
    pub d_f: f64,
    pub beta: f64,
    pub nu: f64,
    /// `d - d_f - beta / nu`.
    pub residual: f64,
}

/// Hyperscaling check with `d_f` from the fixed-point ratio, `beta` from
/// the finite-size slope at threshold and the exact `nu`.
pub fn hyperscaling_residual(calculus: Calculus, u: u64, v: u64) -> Result<Hyperscaling> {
    hyperscaling_residual_with(calculus, u, v, BetaMethod::Slope)
}

pub fn hyperscaling_residual_with(calculus: Calculus, u: u64, v: u64, method: BetaMethod) -> Result<Hyperscaling> {
    let d = dimension(u, v)?;
    let d_f = critical_ratio(calculus, u, v)?.fractal_dimension;
    let beta = beta_fit(calculus, u, v, method)?.exponent;
    let nu = nu_exact(calculus, u, v)?;
    Ok(hyperscaling_from(d, d_f, beta, nu))
}

pub fn hyperscaling_from(d: f64, d_f: f64, beta: f64, nu: f64) -> Hyperscaling {
    Hyperscaling {
        d,
        d_f,
        beta,
        nu,
        residual: d - d_f - beta / nu,
    }
}

/// Strength against weight at a fixed generation.
#[derive(Debug, Clone, Serialize)]
pub struct StrengthCurve {
    /// `(w, ln strength, n)`.
    pub points: Vec<(f64, f64, u32)>,
}

pub fn strength_curve(calculus: Calculus, u: u64, v: u64, n: u32, ws: &[f64]) -> Result<StrengthCurve> {
    let points = ws
        .iter()
        .map(|&w| Ok((w, strength_iterate(calculus, u, v, n, w)?, n)))
        .collect::<Result<Vec<_>>>()?;
    Ok(StrengthCurve { points })
}

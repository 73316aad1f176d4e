//! Box-projected Broyden root finder.
//!
//! The Jacobian is seeded by forward differences and then refined with
//! rank-one ("good Broyden") updates. Each step is damped by backtracking on
//! the max-norm of the residual and projected back into `[EPS, 1 - EPS]^d`.
//! If progress stalls the Jacobian is rebuilt once from finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Projection margin of the unit box.
pub const EPS: f64 = 1e-12;
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct BroydenOptions {
    pub tol: f64,
    /// Looser bound under which the best iterate is still returned when
    /// `tol` cannot be reached, typically because of rounding.
    pub accept: f64,
    pub max_iter: usize,
}

impl Default for BroydenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            accept: 1e-12,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BroydenSolution {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn project(x: &mut DVector<f64>) {
    for v in x.iter_mut() {
        *v = v.clamp(EPS, 1.0 - EPS);
    }
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter()
        .fold(0.0f64, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

fn fd_jacobian<F>(f: &mut F, x: &DVector<f64>, fx: &DVector<f64>) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = x.len();
    let mut jac = DMatrix::zeros(fx.len(), d);
    for j in 0..d {
        let mut xp = x.clone();
        // step inward when the coordinate sits at the upper face
        let h = if xp[j] + FD_STEP <= 1.0 - EPS {
            FD_STEP
        } else {
            -FD_STEP
        };
        xp[j] += h;
        let fp = DVector::from_vec(f(xp.as_slice())?);
        for i in 0..fx.len() {
            jac[(i, j)] = (fp[i] - fx[i]) / h;
        }
    }
    Ok(jac)
}

/// Solves `residual(x) = 0` for `x` in the open unit box.
pub fn broyden_solve<F>(mut residual: F, x0: &[f64], opts: BroydenOptions) -> Result<BroydenSolution>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = x0.len();
    if d == 0 {
        return Err(Error::InvalidArgument("empty unknown vector".into()));
    }
    let mut x = DVector::from_column_slice(x0);
    project(&mut x);
    let mut fx = DVector::from_vec(residual(x.as_slice())?);
    if fx.len() != d {
        return Err(Error::InvalidArgument(format!(
            "residual has {} components for {d} unknowns",
            fx.len()
        )));
    }
    let mut norm = max_norm(&fx);
    let mut best = (x.clone(), norm);
    if norm <= opts.tol {
        return Ok(BroydenSolution {
            x: x.as_slice().to_vec(),
            residual: norm,
            iterations: 0,
        });
    }

    let mut jac = fd_jacobian(&mut residual, &x, &fx)?;
    let mut restarted = false;
    let mut stall = 0usize;

    for iter in 1..=opts.max_iter {
        let step = match jac.clone().lu().solve(&(-&fx)) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => {
                if restarted {
                    break;
                }
                restarted = true;
                jac = fd_jacobian(&mut residual, &x, &fx)?;
                continue;
            }
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn = &x + lambda * &step;
            project(&mut xn);
            let fxn = DVector::from_vec(residual(xn.as_slice())?);
            let nn = max_norm(&fxn);
            if nn.is_finite() && nn < norm {
                accepted = Some((xn, fxn, nn));
                break;
            }
            lambda *= 0.5;
        }

        let Some((xn, fxn, nn)) = accepted else {
            if restarted {
                break;
            }
            restarted = true;
            jac = fd_jacobian(&mut residual, &x, &fx)?;
            continue;
        };

        let dx = &xn - &x;
        let df = &fxn - &fx;
        let denom = dx.dot(&dx);
        if denom > 0.0 {
            let corr = (&df - &jac * &dx) / denom;
            jac += corr * dx.transpose();
        }

        if nn > 0.5 * norm {
            stall += 1;
        } else {
            stall = 0;
        }
        x = xn;
        fx = fxn;
        norm = nn;
        if norm < best.1 {
            best = (x.clone(), norm);
        }
        if norm <= opts.tol {
            return Ok(BroydenSolution {
                x: x.as_slice().to_vec(),
                residual: norm,
                iterations: iter,
            });
        }
        if stall >= 8 && !restarted {
            restarted = true;
            stall = 0;
            jac = fd_jacobian(&mut residual, &x, &fx)?;
        }
    }

    if best.1 <= opts.accept {
        return Ok(BroydenSolution {
            x: best.0.as_slice().to_vec(),
            residual: best.1,
            iterations: opts.max_iter,
        });
    }
    Err(Error::Solver {
        iterations: opts.max_iter,
        residual: best.1,
    })
}

//! Damped Newton solvers for the scalar and small coupled `xi` equations.

use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 8;
const MAX_BISECTIONS: usize = 200;
const MAX_EXPANSIONS: usize = 60;
/// Largest coupled system handled by [`solve_system`].
pub const MAX_SYSTEM_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Convergence threshold on the residual magnitude.
    pub tol: f64,
    pub max_iter: usize,
    /// First step of the outward scan for a bisection bracket.
    pub fallback_half_width: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            fallback_half_width: 1.0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.fallback_half_width >= 0.0) {
            return Err(Error::Config(format!("invalid Newton settings {self:?}")));
        }
        Ok(())
    }

    /// Same settings with the tolerance multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            tol: self.tol * scale.max(1.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub x: f64,
    /// Newton updates taken (bisection steps are not counted).
    pub iterations: usize,
    pub residual: f64,
    /// `|residual|` at the initial guess and after every accepted update.
    pub history: Vec<f64>,
    pub used_bisection: bool,
}

/// Finds a root of `residual` near `x0` by damped Newton iteration.
///
/// Each Newton step is halved (at most eight times) until the residual
/// magnitude decreases. If Newton stalls, the residual is scanned outward
/// from `x0` in steps starting at `w` for the nearest sign change, which
/// is then bisected.
pub fn solve_scalar(
    mut residual: impl FnMut(f64) -> f64,
    mut derivative: impl FnMut(f64) -> f64,
    x0: f64,
    cfg: &NewtonConfig,
) -> Result<NewtonReport> {
    let mut x = x0;
    let mut fx = residual(x);
    if !fx.is_finite() {
        return Err(Error::NewtonDiverged {
            iters: 0,
            best_x: x0,
            best_residual: fx,
        });
    }
    let mut history = vec![fx.abs()];
    let mut iterations = 0;

    while iterations < cfg.max_iter && fx.abs() > cfg.tol {
        let d = derivative(x);
        if !d.is_finite() || d == 0.0 {
            break;
        }
        let mut step = fx / d;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let xn = x - step;
            let fxn = residual(xn);
            if fxn.is_finite() && fxn.abs() < fx.abs() {
                next = Some((xn, fxn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fxn)) = next else { break };
        x = xn;
        fx = fxn;
        iterations += 1;
        history.push(fx.abs());
    }

    if fx.abs() <= cfg.tol {
        return Ok(NewtonReport {
            x,
            iterations,
            residual: fx,
            history,
            used_bisection: false,
        });
    }

    if let Some((xb, fb)) = bisect(&mut residual, x0, cfg) {
        return Ok(NewtonReport {
            x: xb,
            iterations,
            residual: fb,
            history,
            used_bisection: true,
        });
    }

    Err(Error::NewtonDiverged {
        iters: iterations,
        best_x: x,
        best_residual: fx.abs(),
    })
}

fn bisect(residual: &mut impl FnMut(f64) -> f64, x0: f64, cfg: &NewtonConfig) -> Option<(f64, f64)> {
    let w = cfg.fallback_half_width;
    if w <= 0.0 {
        return None;
    }
    let f0 = residual(x0);
    let right = find_bracket(residual, x0, f0, w);
    let left = find_bracket(residual, x0, f0, -w);
    let (mut lo, mut hi, mut flo) = match (left, right) {
        (Some(l), Some(r)) => {
            if (l.1 - x0).abs() < (r.1 - x0).abs() {
                l
            } else {
                r
            }
        }
        (Some(b), None) | (None, Some(b)) => b,
        (None, None) => return None,
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let fm = residual(mid);
        if !fm.is_finite() {
            return None;
        }
        // a collapsed bracket is as close to a root as floating point allows
        if fm.abs() <= cfg.tol || mid == lo || mid == hi {
            return Some((mid, fm));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    None
}

/// Walks from `x0` in steps `step, 2 step, 4 step, ...` until the residual
/// changes sign. Where the residual stops being finite, the walk closes in
/// on that edge of the domain instead. Returns `(lo, hi, residual(lo))`
/// with `lo` on the side of `x0`.
fn find_bracket(residual: &mut impl FnMut(f64) -> f64, x0: f64, f0: f64, step: f64) -> Option<(f64, f64, f64)> {
    let mut inner = x0;
    let mut f_inner = f0;
    let mut dist = step;
    for _ in 0..MAX_EXPANSIONS {
        let x = x0 + dist;
        let fx = residual(x);
        if fx.is_finite() {
            if fx.signum() != f0.signum() {
                return Some((inner, x, f_inner));
            }
            inner = x;
            f_inner = fx;
            dist *= 2.0;
            continue;
        }
        let mut outer = x;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (inner + outer);
            if mid == inner || mid == outer {
                return None;
            }
            let fm = residual(mid);
            if !fm.is_finite() {
                outer = mid;
            } else if fm.signum() != f0.signum() {
                return Some((inner, mid, f_inner));
            } else {
                inner = mid;
                f_inner = fm;
            }
        }
        return None;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Infinity norm of the final residual.
    pub residual: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter()
        .fold(0.0, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves `J d = b` in place by Gaussian elimination with partial pivoting.
/// `j` is row-major `m x m`.
pub fn lu_solve(mut j: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let m = b.len();
    debug_assert_eq!(j.len(), m * m);
    let scale = j.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::JacobianSingular);
    }
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&a, &b| j[a * m + col].abs().total_cmp(&j[b * m + col].abs()))
            .unwrap();
        if j[piv * m + col].abs() <= 1e-14 * scale {
            return Err(Error::JacobianSingular);
        }
        if piv != col {
            for k in 0..m {
                j.swap(piv * m + k, col * m + k);
            }
            b.swap(piv, col);
        }
        for row in col + 1..m {
            let f = j[row * m + col] / j[col * m + col];
            if f != 0.0 {
                for k in col..m {
                    j[row * m + k] -= f * j[col * m + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    for col in (0..m).rev() {
        let mut s = b[col];
        for k in col + 1..m {
            s -= j[col * m + k] * b[k];
        }
        b[col] = s / j[col * m + col];
    }
    Ok(b)
}

/// Damped Newton iteration for a small coupled system.
///
/// `jacobian` returns the row-major `m x m` matrix of partial derivatives.
pub fn solve_system(
    mut residual: impl FnMut(&[f64]) -> Vec<f64>,
    mut jacobian: impl FnMut(&[f64]) -> Vec<f64>,
    x0: &[f64],
    cfg: &NewtonConfig,
) -> Result<SystemReport> {
    let m = x0.len();
    if m == 0 || m > MAX_SYSTEM_SIZE {
        return Err(Error::InvalidState(format!(
            "coupled system size {m} outside 1..={MAX_SYSTEM_SIZE}"
        )));
    }
    let mut x = x0.to_vec();
    let mut f = residual(&x);
    let mut norm = inf_norm(&f);
    if !norm.is_finite() {
        return Err(Error::NewtonDiverged {
            iters: 0,
            best_x: x[0],
            best_residual: norm,
        });
    }
    let mut iterations = 0;
    while iterations < cfg.max_iter && norm > cfg.tol {
        let jac = jacobian(&x);
        if jac.iter().any(|v| !v.is_finite()) {
            break;
        }
        let mut step = lu_solve(jac, f.clone())?;
        let mut next = None;
        for _ in 0..=MAX_HALVINGS {
            let xn: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a - d).collect();
            let fnew = residual(&xn);
            let nn = inf_norm(&fnew);
            if nn.is_finite() && nn < norm {
                next = Some((xn, fnew, nn));
                break;
            }
            step.iter_mut().for_each(|d| *d *= 0.5);
        }
        let Some((xn, fnew, nn)) = next else { break };
        x = xn;
        f = fnew;
        norm = nn;
        iterations += 1;
    }
    if norm <= cfg.tol {
        Ok(SystemReport {
            x,
            iterations,
            residual: norm,
        })
    } else {
        Err(Error::NewtonDiverged {
            iters: iterations,
            best_x: x[0],
            best_residual: norm,
        })
    }
}

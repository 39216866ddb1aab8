//! Step-size control for the Crank-Nicolson schemes.
//!
//! The indicator compares the accepted-candidate step with the explicit
//! linear predictor `phi^n + w (phi^n - phi^{n-1})`, `w = dt / dt_prev`
//! (`2 phi^n - phi^{n-1}` for a uniform step).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{inner_raw, Field};
use crate::schemes::{SchemeState, Stepper};

/// Consecutive rejections at `dt_min` before giving up.
pub const MAX_STALLED_REJECTIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub tol: f64,
    pub rho: f64,
    pub dt_min: f64,
    pub dt_max: f64,
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.rho > 0.0 && self.rho <= 1.0 && self.dt_min > 0.0 && self.dt_min <= self.dt_max)
            || !self.dt_max.is_finite()
        {
            return Err(Error::Config(format!("invalid adaptive settings {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptDecision {
    pub indicator: f64,
    pub dt_new: f64,
    pub accept: bool,
}

fn norm_sq(fields: &[Field]) -> f64 {
    fields.iter().map(|f| inner_raw(f.grid(), f.values(), f.values())).sum()
}

/// Error indicator and next step size for a trial step of size `dt` taken
/// from `(phi, phi_prev)` whose levels are `dt_prev` apart.
pub fn adapt_dt(
    phi: &[Field],
    phi_prev: &[Field],
    trial: &[Field],
    dt: f64,
    dt_prev: f64,
    cfg: &AdaptiveConfig,
) -> Result<AdaptDecision> {
    if phi.len() != trial.len() || phi_prev.len() != trial.len() {
        return Err(Error::LengthMismatch {
            expected: trial.len(),
            got: phi.len().min(phi_prev.len()),
        });
    }
    let w = dt / dt_prev;
    let mut diff = Vec::with_capacity(trial.len());
    for ((t, a), b) in trial.iter().zip(phi).zip(phi_prev) {
        let pred = a.axpby(1.0 + w, -w, b);
        diff.push(t.axpby(1.0, -1.0, &pred));
    }
    let indicator = norm_sq(&diff).sqrt() / norm_sq(trial).sqrt().max(1e-14);
    let dt_new = (cfg.rho * (cfg.tol / indicator).sqrt() * dt).clamp(cfg.dt_min, cfg.dt_max);
    Ok(AdaptDecision {
        indicator,
        dt_new,
        accept: indicator <= cfg.tol,
    })
}

/// Outcome of one accepted adaptive step.
#[derive(Debug, Clone)]
pub struct AdaptiveStep {
    pub state: SchemeState,
    pub dt_taken: f64,
    pub dt_next: f64,
    pub rejections: usize,
}

/// Retakes a step with smaller sizes until the indicator is within tolerance.
///
/// The first step of a run has no previous level and is accepted as is.
/// `dt_limit` caps the step, e.g. to land on the final time.
pub fn adaptive_step(
    stepper: &Stepper,
    state: &SchemeState,
    dt: f64,
    dt_limit: f64,
    cfg: &AdaptiveConfig,
) -> Result<AdaptiveStep> {
    let mut dt = dt.min(dt_limit);
    let mut rejections = 0;
    let mut stalled = 0;
    loop {
        let trial = stepper.step(state, dt)?;
        let Some(prev) = state.phi_prev() else {
            return Ok(AdaptiveStep {
                state: trial,
                dt_taken: dt,
                dt_next: dt,
                rejections,
            });
        };
        let d = adapt_dt(state.phi(), prev, trial.phi(), dt, state.dt(), cfg)?;
        if d.accept {
            return Ok(AdaptiveStep {
                state: trial,
                dt_taken: dt,
                dt_next: d.dt_new,
                rejections,
            });
        }
        rejections += 1;
        if d.dt_new <= cfg.dt_min {
            stalled += 1;
            if stalled >= MAX_STALLED_REJECTIONS {
                return Err(Error::StallError {
                    dt_min: cfg.dt_min,
                    indicator: d.indicator,
                });
            }
        } else {
            stalled = 0;
        }
        log::debug!(
            "rejected dt = {dt:e} (indicator {:e}), retrying with {:e}",
            d.indicator,
            d.dt_new
        );
        dt = d.dt_new.min(dt_limit);
    }
}

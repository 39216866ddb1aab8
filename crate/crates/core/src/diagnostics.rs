//! Per-step observables, discrete-energy audits and the log fit used for
//! coarsening rates.

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralContext};
use crate::models::ModelSpec;
use crate::schemes::{EnergyForm, SchemeKind, SchemeState};
use crate::transform::GFunction;

/// One row of `diag.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub e_original: f64,
    pub e_modified: f64,
    pub mass: Vec<f64>,
    pub xi: Vec<f64>,
    pub r: Vec<f64>,
    pub newton_iters: usize,
}

impl DiagRecord {
    /// Observables of `state`. Before a two-level scheme has a previous
    /// level, the modified energy is evaluated with the current level
    /// repeated, which is its one-level value.
    pub fn collect(
        state: &SchemeState,
        model: &ModelSpec,
        gs: &[GFunction],
        kind: SchemeKind,
        ctx: &SpectralContext,
    ) -> Result<Self> {
        let e_modified = match state.phi_prev() {
            Some(_) => modified_energy(state, model, gs, kind, ctx)?,
            None => {
                let padded = SchemeState::with_history(
                    ctx,
                    model,
                    gs,
                    state.phi().to_vec(),
                    state.phi().to_vec(),
                    state.r().to_vec(),
                    state.r().to_vec(),
                    state.t(),
                    1.0,
                )?;
                modified_energy(&padded, model, gs, kind, ctx)?
            }
        };
        let rec = Self {
            step: state.step_index(),
            t: state.t(),
            dt: state.dt(),
            e_original: model.original_energy(ctx, state.phi())?,
            e_modified,
            mass: model.masses(ctx, state.phi())?,
            xi: state.xi().to_vec(),
            r: state.r().to_vec(),
            newton_iters: state.newton_iterations(),
        };
        let finite = [rec.t, rec.dt, rec.e_original, rec.e_modified]
            .iter()
            .chain(&rec.mass)
            .chain(&rec.xi)
            .chain(&rec.r)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidState(format!(
                "non-finite diagnostics at step {}",
                rec.step
            )));
        }
        Ok(rec)
    }
}

fn sum_inverse_g(gs: &[GFunction], r: &[f64]) -> Result<f64> {
    gs.iter().zip(r).map(|(g, &r)| g.inverse(r)).sum()
}

/// The discrete energy that `kind`'s stability result says is non-increasing.
pub fn modified_energy(
    state: &SchemeState,
    model: &ModelSpec,
    gs: &[GFunction],
    kind: SchemeKind,
    ctx: &SpectralContext,
) -> Result<f64> {
    let phi = state.phi();
    match kind.energy_form() {
        EnergyForm::OneLevel => Ok(model.quadratic_energy(ctx, phi)? + sum_inverse_g(gs, state.r())?),
        EnergyForm::Bdf2 | EnergyForm::Bdf2Original => {
            let prev = state.phi_prev().ok_or(Error::MissingHistory)?;
            let quad = bdf2_quadratic(model, ctx, phi, prev)?;
            let tail = if kind.energy_form() == EnergyForm::Bdf2 {
                let r_prev = state.r_prev().ok_or(Error::MissingHistory)?;
                1.5 * sum_inverse_g(gs, state.r())? - 0.5 * sum_inverse_g(gs, r_prev)?
            } else {
                let mut now = 0.0;
                let mut before = 0.0;
                for p in &model.potentials {
                    now += p.bulk_energy(ctx, phi)?;
                    before += p.bulk_energy(ctx, prev)?;
                }
                1.5 * now - 0.5 * before
            };
            Ok(quad + tail)
        }
        EnergyForm::Stabilized { eps1, eps2 } => {
            let prev = state.phi_prev().ok_or(Error::MissingHistory)?;
            let mut e = model.quadratic_energy(ctx, phi)? + sum_inverse_g(gs, state.r())?;
            if state.dt() > 0.0 && (eps1 != 0.0 || eps2 != 0.0) {
                let inv = 1.0 / state.dt();
                let rates: Vec<Field> = phi.iter().zip(prev).map(|(a, b)| a.axpby(inv, -inv, b)).collect();
                for (c, v) in model.components.iter().zip(&rates) {
                    let spec = ctx.forward(v)?;
                    let sym = c.linear.symbol(ctx);
                    e += 0.5 * eps1 * ctx.inner(v, v)? + 0.5 * eps2 * ctx.quadratic_form(&sym, &spec);
                }
            }
            Ok(e)
        }
    }
}

/// `1/4 [(𝓛phi, phi) + (𝓛(2phi - prev), 2phi - prev)]`
fn bdf2_quadratic(model: &ModelSpec, ctx: &SpectralContext, phi: &[Field], prev: &[Field]) -> Result<f64> {
    let extrap: Vec<Field> = phi.iter().zip(prev).map(|(a, b)| a.axpby(2.0, -1.0, b)).collect();
    Ok(0.5 * model.quadratic_energy(ctx, phi)? + 0.5 * model.quadratic_energy(ctx, &extrap)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneReport {
    /// Indices `i` with `s[i+1] > s[i] + rel_tol |s[i]|`.
    pub violations: Vec<usize>,
    /// Largest relative increase seen, or 0.
    pub worst: f64,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `series` is non-increasing up to a relative tolerance.
pub fn audit_monotone(series: &[f64], rel_tol: f64) -> MonotoneReport {
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for (i, w) in series.windows(2).enumerate() {
        let excess = w[1] - w[0];
        let scale = w[0].abs();
        if excess > rel_tol * scale || excess.is_nan() {
            violations.push(i);
        }
        if excess > 0.0 {
            worst = worst.max(if scale > 0.0 { excess / scale } else { f64::INFINITY });
        }
    }
    MonotoneReport { violations, worst }
}

/// Least-squares fit `E ≈ a log t + b` over samples with `t` in `window`.
pub fn fit_log_decay(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<(f64, f64)> {
    if times.len() != energies.len() {
        return Err(Error::LengthMismatch {
            expected: times.len(),
            got: energies.len(),
        });
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Config(format!(
            "fit window ({lo}, {hi}) must be positive and ordered"
        )));
    }
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .map(|(t, e)| (t.ln(), *e))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientSamples {
            needed: 10,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples { needed: 2, got: 1 });
    }
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::schemes::Stencil;

    fn log_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| 100f64.powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn audit_examples() {
        assert!(audit_monotone(&[3.0, 2.0, 1.0], 1e-9).passed());
        assert_eq!(audit_monotone(&[1.0, 2.0], 1e-9).violations, vec![0]);
        assert!(audit_monotone(&[1.0, 1.0 + 1e-15], 1e-9).passed());
        assert!(audit_monotone(&[-1.0, -1.0 + 1e-12], 1e-9).passed());
        assert!(!audit_monotone(&[-1.0, -0.9], 1e-9).passed());
        assert!(audit_monotone(&[5.0], 1e-9).passed());
    }

    #[test]
    fn fit_recovers_exact_model() {
        let t = log_grid(200);
        let e: Vec<f64> = t.iter().map(|t| -88.0 * t.ln() - 124.0).collect();
        let (a, b) = fit_log_decay(&t, &e, (1.0, 100.0)).unwrap();
        assert!((a + 88.0).abs() < 1e-9 && (b + 124.0).abs() < 1e-9, "{a} {b}");
    }

    #[test]
    fn fit_with_noise() {
        let t = log_grid(400);
        let mut rng = 0x1234_5678u64;
        let e: Vec<f64> = t
            .iter()
            .map(|t| {
                rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                let clean = -88.0 * t.ln() - 124.0;
                clean * (1.0 + 0.02 * u)
            })
            .collect();
        let (a, _) = fit_log_decay(&t, &e, (1.0, 100.0)).unwrap();
        assert!((a + 88.0).abs() < 2.0, "{a}");
    }

    #[test]
    fn fit_constant_and_short() {
        let t = log_grid(50);
        let (a, b) = fit_log_decay(&t, &vec![3.0; 50], (1.0, 100.0)).unwrap();
        assert!(a.abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
        assert!(matches!(
            fit_log_decay(&t[..5], &[1.0; 5], (1.0, 100.0)),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    fn setup() -> (SpectralContext, ModelSpec, Vec<Field>) {
        let grid = Grid::periodic_2pi(16).unwrap();
        let ctx = SpectralContext::new(grid);
        let model = ModelSpec::allen_cahn(0.1).unwrap();
        let phi = vec![Field::from_fn(grid, |x, y| 0.3 * x.sin() * y.cos() + 0.1)];
        (ctx, model, phi)
    }

    #[test]
    fn one_level_energy_at_rest_state() {
        let grid = Grid::periodic_2pi(8).unwrap();
        let ctx = SpectralContext::new(grid);
        let model = ModelSpec::allen_cahn(0.1).unwrap();
        for g in [GFunction::TanhScaled { c: 1e4 }, GFunction::SqrtShift { c: 1.0 }] {
            let st = SchemeState::initial(&ctx, &model, &[g], vec![Field::constant(grid, 1.0)], 0.0).unwrap();
            let e = modified_energy(&st, &model, &[g], SchemeKind::First(Stencil::Bdf1), &ctx).unwrap();
            assert!(e.abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn sqrt_energy_matches_hand_evaluation() {
        let (ctx, model, phi) = setup();
        let g = GFunction::SqrtShift { c: 2.0 };
        let st = SchemeState::initial(&ctx, &model, &[g], phi.clone(), 0.0).unwrap();
        let r = st.r()[0];
        let manual = model.quadratic_energy(&ctx, &phi).unwrap() + r * r - 2.0;
        let e = modified_energy(&st, &model, &[g], SchemeKind::First(Stencil::CrankNicolson), &ctx).unwrap();
        assert!((e - manual).abs() < 1e-12 * manual.abs().max(1.0));
    }

    #[test]
    fn two_level_forms() {
        let (ctx, model, phi) = setup();
        let g = GFunction::ExpScaled { c: 1e4 };
        let st = SchemeState::initial(&ctx, &model, &[g], phi.clone(), 0.0).unwrap();
        let kind = SchemeKind::First(Stencil::Bdf2);
        assert_eq!(
            modified_energy(&st, &model, &[g], kind, &ctx),
            Err(Error::MissingHistory)
        );
        let r = st.r().to_vec();
        let same =
            SchemeState::with_history(&ctx, &model, &[g], phi.clone(), phi.clone(), r.clone(), r, 0.0, 0.1).unwrap();
        let one = modified_energy(&st, &model, &[g], SchemeKind::First(Stencil::Bdf1), &ctx).unwrap();
        let two = modified_energy(&same, &model, &[g], kind, &ctx).unwrap();
        assert!((one - two).abs() < 1e-10 * one.abs().max(1.0));
        let third = modified_energy(&same, &model, &[g], SchemeKind::ThirdBdf2, &ctx).unwrap();
        let orig = model.original_energy(&ctx, &phi).unwrap();
        assert!((third - orig).abs() < 1e-12 * orig.abs().max(1.0));
        let rec = DiagRecord::collect(&st, &model, &[g], kind, &ctx).unwrap();
        assert!((rec.e_modified - one).abs() < 1e-10 * one.abs().max(1.0));
    }
}

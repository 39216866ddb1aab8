//! The time loop shared by every subcommand.

use std::path::PathBuf;

use crate::diagnostics::{audit_monotone, DiagRecord};
use crate::error::{Error, Result};
use crate::grid::{Field, SpectralContext};
use crate::schemes::{SchemeState, Stepper};

use super::adaptive::adaptive_step;
use super::config::RunConfig;
use super::initial::{make_initial, InitialKind};
use super::manufactured::ManufacturedAc;
use super::output::{output_root, RunWriter};

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: SchemeState,
    pub records: Vec<DiagRecord>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// `max |xi - 1|` over all steps after the first.
    pub max_xi_deviation: f64,
    pub output_dir: Option<PathBuf>,
}

impl RunSummary {
    /// The modified-energy series, without the initial level for schemes
    /// whose first step is a startup step of a different scheme.
    pub fn audited_energies(&self, two_level: bool) -> Vec<f64> {
        let skip = usize::from(two_level && self.records.first().is_some_and(|r| r.step == 0));
        self.records[skip.min(self.records.len())..]
            .iter()
            .map(|r| r.e_modified)
            .collect()
    }
}

/// Step sizes of a fixed-step run to `t_final`. A remainder that is not a
/// whole step (beyond rounding) becomes one shorter last step.
fn fixed_steps(t_final: f64, dt: f64) -> (usize, Option<f64>) {
    let ratio = t_final / dt;
    let n = ratio.round();
    if (ratio - n).abs() <= 1e-8 * n.max(1.0) {
        (n as usize, None)
    } else {
        let full = ratio.floor();
        (full as usize, Some(t_final - full * dt))
    }
}

fn initial_fields(config: &RunConfig, manufactured: Option<&ManufacturedAc>, n_fields: usize) -> Result<Vec<Field>> {
    let grid = config.grid()?;
    if config.initial.kind == "manufactured" {
        let m = manufactured
            .ok_or_else(|| Error::Config("manufactured initial data needs forcing = \"manufactured\"".into()))?;
        return Ok(vec![m.exact(0.0)]);
    }
    let kind = InitialKind::from_config(&config.initial.kind, config.initial.mean, config.initial.amplitude)?;
    Ok(make_initial(kind, grid, config.seed, n_fields))
}

/// Runs `config` to `t_final`, recording diagnostics and writing files as
/// configured.
pub fn simulate(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let grid = config.grid()?;
    let ctx = SpectralContext::new(grid).with_dealiasing(config.grid.dealias);
    let model = config.model()?;
    let gs = config.g_list()?;
    let kind = config.scheme_kind()?;
    let manufactured = match config.forcing.as_str() {
        "manufactured" => Some(ManufacturedAc::new(&ctx, &model)?),
        _ => None,
    };
    let mut stepper = Stepper::new(&ctx, &model, &gs, kind)?.with_newton(config.newton()?)?;
    if let Some(m) = &manufactured {
        stepper = stepper.with_forcing(m);
    }
    let phi = initial_fields(config, manufactured.as_ref(), model.n_components())?;
    let mut state = stepper.initial_state(phi, 0.0)?;

    let out = &config.output;
    let mut writer = if out.write {
        let w = RunWriter::create(&output_root().join(&out.dir), model.n_components(), gs.len())?;
        w.manifest(config)?;
        Some(w)
    } else {
        None
    };
    let mut records = Vec::new();
    let mut observe = |state: &SchemeState, last: bool, writer: &mut Option<RunWriter>| -> Result<()> {
        let step = state.step_index();
        if out.diag_every > 0 && (step % out.diag_every == 0 || last) {
            let rec = DiagRecord::collect(state, &model, &gs, kind, &ctx)?;
            if let Some(w) = writer.as_mut() {
                w.record(&rec)?;
            }
            records.push(rec);
        }
        if let Some(w) = writer.as_ref() {
            if step % out.snapshot_every == 0 || last {
                w.snapshot(step, state.t(), state.phi())?;
            }
        }
        Ok(())
    };
    let at = |step: usize| {
        move |e: Error| Error::AtStep {
            step,
            source: Box::new(e),
        }
    };

    let t_final = config.t_final;
    let done = |s: &SchemeState| s.t() >= t_final * (1.0 - 1e-12);
    observe(&state, t_final == 0.0, &mut writer).map_err(at(0))?;

    let mut accepted = 0;
    let mut rejected = 0;
    let mut max_xi: f64 = 0.0;
    let (n_fixed, remainder) = fixed_steps(t_final, config.dt);
    let mut dt_next = config.dt;
    while t_final > 0.0 && !done(&state) {
        let step = state.step_index() + 1;
        state = match &config.adaptive {
            Some(a) => {
                let r = adaptive_step(&stepper, &state, dt_next, t_final - state.t(), a).map_err(at(step))?;
                rejected += r.rejections;
                dt_next = r.dt_next;
                r.state
            }
            None => {
                let dt = if step <= n_fixed {
                    config.dt
                } else {
                    remainder.unwrap_or(config.dt)
                };
                stepper.step(&state, dt).map_err(at(step))?
            }
        };
        accepted += 1;
        if state.step_index() >= 2 {
            max_xi = state.xi().iter().fold(max_xi, |m, x| m.max((x - 1.0).abs()));
        }
        let last = done(&state) || (config.adaptive.is_none() && step >= n_fixed + usize::from(remainder.is_some()));
        observe(&state, last, &mut writer).map_err(at(step))?;
        if step % 1000 == 0 {
            log::info!("step {step}, t = {:.6}", state.t());
        }
        if last {
            break;
        }
    }

    let output_dir = match writer {
        Some(w) => {
            let dir = w.dir().to_path_buf();
            w.finish()?;
            Some(dir)
        }
        None => None,
    };
    let summary = RunSummary {
        final_state: state,
        records,
        accepted_steps: accepted,
        rejected_steps: rejected,
        max_xi_deviation: max_xi,
        output_dir,
    };
    let audit = audit_monotone(&summary.audited_energies(kind.is_two_level()), 1e-9);
    if !audit.passed() {
        log::warn!("modified energy increased at {} record(s)", audit.violations.len());
    }
    let original: Vec<f64> = summary.records.iter().map(|r| r.e_original).collect();
    let orig = audit_monotone(&original, 1e-9);
    if !orig.passed() {
        log::info!("original energy increased at {} record(s)", orig.violations.len());
    }
    Ok(summary)
}

//! Time steppers.
//!
//! Every scheme splits the new field as `phi = phi_1 + sum_p xi_p phi_{2,p}`
//! where `phi_1` and each `phi_{2,p}` come from one constant-coefficient
//! diagonal solve, and the scalars `xi_p` close the auxiliary-variable
//! equations. The approaches differ only in how `xi` is obtained:
//!
//! * first: `xi` solves the nonlinear `G^{-1}(r)` balance by Newton,
//! * second: `xi` is the explicit ratio of the lagged `r` and `G(∫F)`,
//! * third: `xi` solves the balance written with `∫F` itself.

mod engine;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralContext, Spectrum};
use crate::models::ModelSpec;
use crate::transform::GFunction;

pub use engine::Stepper;

/// Time discretization stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Bdf1,
    Bdf2,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    First,
    Second,
    Third,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchemeKind {
    First(Stencil),
    Second(Stencil),
    ThirdBdf2,
    /// First-approach Crank-Nicolson for models with two or more fields.
    MultiComponentCn,
    /// Second-approach Crank-Nicolson with the two inertial stabilizers.
    StabilizedCn {
        eps1: f64,
        eps2: f64,
    },
}

/// Which discrete energy a scheme's stability theorem controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyForm {
    /// `1/2 (𝓛 phi, phi) + sum G^{-1}(r)`
    OneLevel,
    /// The two-level BDF2 form with `3/2 G^{-1}(r^k) - 1/2 G^{-1}(r^{k-1})`.
    Bdf2,
    /// The two-level BDF2 form with `∫F` in place of `G^{-1}(r)`.
    Bdf2Original,
    /// One-level form plus the inertial terms of the stabilizers.
    Stabilized { eps1: f64, eps2: f64 },
}

impl SchemeKind {
    pub fn approach(&self) -> Approach {
        match self {
            SchemeKind::First(_) | SchemeKind::MultiComponentCn => Approach::First,
            SchemeKind::Second(_) | SchemeKind::StabilizedCn { .. } => Approach::Second,
            SchemeKind::ThirdBdf2 => Approach::Third,
        }
    }

    pub fn stencil(&self) -> Stencil {
        match *self {
            SchemeKind::First(s) | SchemeKind::Second(s) => s,
            SchemeKind::ThirdBdf2 => Stencil::Bdf2,
            SchemeKind::MultiComponentCn | SchemeKind::StabilizedCn { .. } => Stencil::CrankNicolson,
        }
    }

    /// `(eps1, eps2)`, zero for unstabilized schemes.
    pub fn stabilization(&self) -> (f64, f64) {
        match *self {
            SchemeKind::StabilizedCn { eps1, eps2 } => (eps1, eps2),
            _ => (0.0, 0.0),
        }
    }

    /// Whether a step needs the previous time level.
    pub fn is_two_level(&self) -> bool {
        self.stencil() != Stencil::Bdf1
    }

    /// The one-level scheme used for the first step of a two-level scheme.
    pub fn startup(&self) -> SchemeKind {
        match self.approach() {
            Approach::First => SchemeKind::First(Stencil::Bdf1),
            Approach::Second => SchemeKind::Second(Stencil::Bdf1),
            Approach::Third => *self,
        }
    }

    /// Crank-Nicolson schemes accept a step size different from the last one.
    pub fn supports_variable_step(&self) -> bool {
        self.stencil() == Stencil::CrankNicolson
    }

    pub fn energy_form(&self) -> EnergyForm {
        match *self {
            SchemeKind::ThirdBdf2 => EnergyForm::Bdf2Original,
            SchemeKind::StabilizedCn { eps1, eps2 } => EnergyForm::Stabilized { eps1, eps2 },
            k if k.stencil() == Stencil::Bdf2 => EnergyForm::Bdf2,
            _ => EnergyForm::OneLevel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (e1, e2) = self.stabilization();
        if !(e1 >= 0.0 && e2 >= 0.0) || !e1.is_finite() || !e2.is_finite() {
            return Err(Error::Config(format!(
                "stabilization constants must be nonnegative, got ({e1}, {e2})"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |st: &Stencil| match st {
            Stencil::Bdf1 => "bdf1",
            Stencil::Bdf2 => "bdf2",
            Stencil::CrankNicolson => "cn",
        };
        match self {
            SchemeKind::First(st) => write!(f, "first-{}", s(st)),
            SchemeKind::Second(st) => write!(f, "second-{}", s(st)),
            SchemeKind::ThirdBdf2 => write!(f, "third-bdf2"),
            SchemeKind::MultiComponentCn => write!(f, "multi-cn"),
            SchemeKind::StabilizedCn { .. } => write!(f, "stabilized-cn"),
        }
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    /// Parses the scheme names used in configuration files. The stabilized
    /// scheme is returned with zero constants; callers fill them in.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "first-bdf1" => SchemeKind::First(Stencil::Bdf1),
            "first-bdf2" => SchemeKind::First(Stencil::Bdf2),
            "first-cn" => SchemeKind::First(Stencil::CrankNicolson),
            "second-bdf1" => SchemeKind::Second(Stencil::Bdf1),
            "second-bdf2" => SchemeKind::Second(Stencil::Bdf2),
            "second-cn" => SchemeKind::Second(Stencil::CrankNicolson),
            "third-bdf2" => SchemeKind::ThirdBdf2,
            "multi-cn" => SchemeKind::MultiComponentCn,
            "stabilized-cn" => SchemeKind::StabilizedCn { eps1: 0.0, eps2: 0.0 },
            other => return Err(Error::Config(format!("unknown scheme {other:?}"))),
        })
    }
}

/// Source term added to the right-hand side of each field's equation.
pub trait Forcing: Send + Sync {
    /// One field per model component at time `t`.
    fn eval(&self, t: f64) -> Result<Vec<Field>>;
}

/// Fields, auxiliary variables and bookkeeping after a step.
#[derive(Debug, Clone)]
pub struct SchemeState {
    pub(crate) phi: Vec<Field>,
    pub(crate) phi_prev: Option<Vec<Field>>,
    pub(crate) r: Vec<f64>,
    pub(crate) r_prev: Option<Vec<f64>>,
    pub(crate) xi: Vec<f64>,
    pub(crate) t: f64,
    pub(crate) dt: f64,
    pub(crate) step: usize,
    pub(crate) newton_iters: usize,
    // Spectra of `phi` / `phi_prev`, carried between steps to save transforms.
    pub(crate) spectra: Option<Vec<Spectrum>>,
    pub(crate) spectra_prev: Option<Vec<Spectrum>>,
    // `∫F_p` at `phi` / `phi_prev`, carried for the third approach.
    pub(crate) bulk: Option<Vec<f64>>,
    pub(crate) bulk_prev: Option<Vec<f64>>,
}

impl SchemeState {
    /// Initial state with `r_p = G_p(∫F_p(phi))`.
    pub fn initial(
        ctx: &SpectralContext,
        model: &ModelSpec,
        gs: &[GFunction],
        phi: Vec<Field>,
        t0: f64,
    ) -> Result<Self> {
        Self::check_shape(ctx, model, gs, &phi)?;
        let mut r = Vec::with_capacity(gs.len());
        let mut bulk = Vec::with_capacity(gs.len());
        for (p, g) in model.potentials.iter().zip(gs) {
            let e = p.bulk_energy(ctx, &phi)?;
            bulk.push(e);
            r.push(g.forward(e)?);
        }
        Ok(Self {
            xi: vec![1.0; r.len()],
            phi,
            phi_prev: None,
            r,
            r_prev: None,
            t: t0,
            dt: 0.0,
            step: 0,
            newton_iters: 0,
            spectra: None,
            spectra_prev: None,
            bulk: Some(bulk),
            bulk_prev: None,
        })
    }

    /// A state with an explicit previous level, e.g. to restart a two-level
    /// scheme. `dt` is the spacing between the two levels.
    #[allow(clippy::too_many_arguments)]
    pub fn with_history(
        ctx: &SpectralContext,
        model: &ModelSpec,
        gs: &[GFunction],
        phi: Vec<Field>,
        phi_prev: Vec<Field>,
        r: Vec<f64>,
        r_prev: Vec<f64>,
        t: f64,
        dt: f64,
    ) -> Result<Self> {
        Self::check_shape(ctx, model, gs, &phi)?;
        Self::check_shape(ctx, model, gs, &phi_prev)?;
        if r.len() != gs.len() || r_prev.len() != gs.len() {
            return Err(Error::LengthMismatch {
                expected: gs.len(),
                got: r.len().min(r_prev.len()),
            });
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidState(format!("history spacing {dt} must be positive")));
        }
        Ok(Self {
            xi: vec![1.0; r.len()],
            phi,
            phi_prev: Some(phi_prev),
            r,
            r_prev: Some(r_prev),
            t,
            dt,
            step: 1,
            newton_iters: 0,
            spectra: None,
            spectra_prev: None,
            bulk: None,
            bulk_prev: None,
        })
    }

    pub(crate) fn check_shape(ctx: &SpectralContext, model: &ModelSpec, gs: &[GFunction], phi: &[Field]) -> Result<()> {
        if phi.len() != model.n_components() {
            return Err(Error::LengthMismatch {
                expected: model.n_components(),
                got: phi.len(),
            });
        }
        if gs.len() != model.potentials.len() {
            return Err(Error::Config(format!(
                "{} G functions given for {} potentials",
                gs.len(),
                model.potentials.len()
            )));
        }
        for f in phi {
            if f.grid() != ctx.grid() {
                return Err(Error::GridMismatch);
            }
            if !f.is_finite() {
                return Err(Error::NonFinite(
                    f.values().iter().position(|v| !v.is_finite()).unwrap(),
                ));
            }
        }
        Ok(())
    }

    pub fn phi(&self) -> &[Field] {
        &self.phi
    }

    pub fn phi_prev(&self) -> Option<&[Field]> {
        self.phi_prev.as_deref()
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn r_prev(&self) -> Option<&[f64]> {
        self.r_prev.as_deref()
    }

    /// `xi` values of the last step (ones before the first step).
    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Size of the step that produced this state (0 before the first step).
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn newton_iterations(&self) -> usize {
        self.newton_iters
    }
}

/// One step of the first approach (BDF1, BDF2 or Crank-Nicolson).
pub fn step_first(
    state: &SchemeState,
    model: &ModelSpec,
    g: GFunction,
    ctx: &SpectralContext,
    stencil: Stencil,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, &[g], SchemeKind::First(stencil))?.step(state, dt)
}

/// One BDF2 step of the first approach with one auxiliary variable per potential.
pub fn step_first_multi_potential(
    state: &SchemeState,
    model: &ModelSpec,
    gs: &[GFunction],
    ctx: &SpectralContext,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, gs, SchemeKind::First(Stencil::Bdf2))?.step(state, dt)
}

/// One step of the second approach.
pub fn step_second(
    state: &SchemeState,
    model: &ModelSpec,
    g: GFunction,
    ctx: &SpectralContext,
    stencil: Stencil,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, &[g], SchemeKind::Second(stencil))?.step(state, dt)
}

/// One BDF2 step of the third approach.
pub fn step_third_bdf2(
    state: &SchemeState,
    model: &ModelSpec,
    g: GFunction,
    ctx: &SpectralContext,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, &[g], SchemeKind::ThirdBdf2)?.step(state, dt)
}

/// One Crank-Nicolson step for a multi-field model sharing one auxiliary variable.
pub fn step_multicomponent_cn(
    state: &SchemeState,
    model: &ModelSpec,
    g: GFunction,
    ctx: &SpectralContext,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, &[g], SchemeKind::MultiComponentCn)?.step(state, dt)
}

/// One stabilized Crank-Nicolson step.
pub fn step_stabilized_cn(
    state: &SchemeState,
    model: &ModelSpec,
    g: GFunction,
    eps1: f64,
    eps2: f64,
    ctx: &SpectralContext,
    dt: f64,
) -> Result<SchemeState> {
    Stepper::new(ctx, model, &[g], SchemeKind::StabilizedCn { eps1, eps2 })?.step(state, dt)
}

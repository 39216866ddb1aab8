//! Manufactured Allen-Cahn solution
//! `phi(x, y, t) = (sin 2x cos 2y / 4 + 0.48) (1 - sin²t / 2)`
//! and the source that makes it exact.

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralContext};
use crate::models::{Mobility, ModelSpec, Potential};
use crate::schemes::Forcing;

pub struct ManufacturedAc<'a> {
    ctx: &'a SpectralContext,
    potential: Potential,
    mobility: f64,
    shape: Field,
    l_shape: Field,
}

fn amplitude(t: f64) -> f64 {
    1.0 - 0.5 * t.sin().powi(2)
}

fn amplitude_rate(t: f64) -> f64 {
    -t.sin() * t.cos()
}

impl<'a> ManufacturedAc<'a> {
    /// Needs a one-field, one-potential model with `L2` mobility.
    pub fn new(ctx: &'a SpectralContext, model: &ModelSpec) -> Result<Self> {
        let unsupported = || {
            Error::UnsupportedModel(format!(
                "manufactured solution needs an Allen-Cahn type model, got {}",
                model.name
            ))
        };
        if model.n_components() != 1 || model.potentials.len() != 1 {
            return Err(unsupported());
        }
        let c = &model.components[0];
        let mobility = match c.mobility {
            Mobility::L2 { m } => m,
            Mobility::Hminus1 { .. } => return Err(unsupported()),
        };
        let shape = Field::from_fn(*ctx.grid(), |x, y| 0.25 * (2.0 * x).sin() * (2.0 * y).cos() + 0.48);
        let l_shape = ctx.apply_symbol(&c.linear.symbol(ctx), &shape)?;
        Ok(Self {
            ctx,
            potential: model.potentials[0].clone(),
            mobility,
            shape,
            l_shape,
        })
    }

    pub fn exact(&self, t: f64) -> Field {
        self.shape.scale(amplitude(t))
    }

    /// `∂t phi + M (𝓛 phi + F'(phi))` at the exact solution.
    pub fn source(&self, t: f64) -> Result<Field> {
        let a = amplitude(t);
        let phi = self.exact(t);
        let fp = self
            .potential
            .derivative(self.ctx, std::slice::from_ref(&phi))?
            .remove(0);
        let mu = self.l_shape.axpby(a, 1.0, &fp);
        Ok(self.shape.axpby(amplitude_rate(t), self.mobility, &mu))
    }
}

impl Forcing for ManufacturedAc<'_> {
    fn eval(&self, t: f64) -> Result<Vec<Field>> {
        Ok(vec![self.source(t)?])
    }
}

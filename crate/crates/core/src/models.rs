//! Energy functionals: linear operators, mobilities and nonlinear potentials.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, OperatorSymbol, SpectralContext};

/// Samples with `|phi|` above this are outside the Flory-Huggins domain.
pub const FLORY_HUGGINS_BOUND: f64 = 1.0 - 1e-9;

/// Nonlinear bulk potential `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `(phi^2 - 1)^2 / (4 eps2)`
    DoubleWell { eps2: f64 },
    /// `-theta/2 phi^2 + (1+phi) ln(1+phi) + (1-phi) ln(1-phi)`
    FloryHuggins { theta: f64 },
    /// `-1/2 ln(1 + |grad phi|^2)`
    MbeLog,
    /// Two-field block-copolymer well
    /// `(u^2-1)^2/4 + (v^2-1)^2/4 + alpha u v + beta u v^2 + gamma u^2 v`.
    BcpW { alpha: f64, beta: f64, gamma: f64 },
    /// `sum_k coeffs[k] phi^k`; an empty list is the zero potential.
    Polynomial { coeffs: Vec<f64> },
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::DoubleWell { eps2 } => write!(f, "double-well(eps2={eps2})"),
            Potential::FloryHuggins { theta } => write!(f, "flory-huggins(theta={theta})"),
            Potential::MbeLog => write!(f, "mbe-log"),
            Potential::BcpW { alpha, beta, gamma } => {
                write!(f, "bcp-w(alpha={alpha}, beta={beta}, gamma={gamma})")
            }
            Potential::Polynomial { coeffs } => write!(f, "polynomial{coeffs:?}"),
        }
    }
}

/// Pointwise inputs a potential density depends on: field values for local
/// potentials, gradient components for [`Potential::MbeLog`].
#[derive(Debug, Clone, PartialEq)]
struct Channels {
    grid: Grid,
    data: Vec<Vec<f64>>,
}

impl Potential {
    /// Number of fields the potential couples.
    pub fn arity(&self) -> usize {
        match self {
            Potential::BcpW { .. } => 2,
            _ => 1,
        }
    }

    fn uses_gradient(&self) -> bool {
        matches!(self, Potential::MbeLog)
    }

    fn check_fields(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<()> {
        if fields.len() != self.arity() {
            return Err(Error::UnsupportedModel(format!(
                "{self} needs {} field(s), got {}",
                self.arity(),
                fields.len()
            )));
        }
        for f in fields {
            if f.grid() != ctx.grid() {
                return Err(Error::GridMismatch);
            }
        }
        Ok(())
    }

    fn channels(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<Channels> {
        self.check_fields(ctx, fields)?;
        let data = if self.uses_gradient() {
            let (gx, gy) = ctx.gradient(&fields[0])?;
            vec![gx.into_values(), gy.into_values()]
        } else {
            fields.iter().map(|f| f.values().to_vec()).collect()
        };
        Ok(Channels {
            grid: *ctx.grid(),
            data,
        })
    }

    fn check_point(&self, index: usize, p: &[f64]) -> Result<()> {
        if let Potential::FloryHuggins { .. } = self {
            if !(p[0].abs() <= FLORY_HUGGINS_BOUND) {
                return Err(Error::OutOfDomain { index, value: p[0] });
            }
        }
        Ok(())
    }

    fn point_density(&self, p: &[f64]) -> f64 {
        match self {
            Potential::DoubleWell { eps2 } => {
                let w = p[0] * p[0] - 1.0;
                w * w / (4.0 * eps2)
            }
            Potential::FloryHuggins { theta } => {
                let x = p[0];
                -0.5 * theta * x * x + (1.0 + x) * x.ln_1p() + (1.0 - x) * (-x).ln_1p()
            }
            Potential::MbeLog => -0.5 * (p[0] * p[0] + p[1] * p[1]).ln_1p(),
            Potential::BcpW { alpha, beta, gamma } => {
                let (u, v) = (p[0], p[1]);
                let wu = u * u - 1.0;
                let wv = v * v - 1.0;
                0.25 * wu * wu + 0.25 * wv * wv + alpha * u * v + beta * u * v * v + gamma * u * u * v
            }
            Potential::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * p[0] + c),
        }
    }

    /// Partial derivatives of the density with respect to each channel.
    fn point_gradient(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Potential::DoubleWell { eps2 } => out[0] = p[0] * (p[0] * p[0] - 1.0) / eps2,
            Potential::FloryHuggins { theta } => {
                let x = p[0];
                out[0] = -theta * x + x.ln_1p() - (-x).ln_1p();
            }
            Potential::MbeLog => {
                let d = 1.0 + p[0] * p[0] + p[1] * p[1];
                out[0] = -p[0] / d;
                out[1] = -p[1] / d;
            }
            Potential::BcpW { alpha, beta, gamma } => {
                let (u, v) = (p[0], p[1]);
                out[0] = u * (u * u - 1.0) + alpha * v + beta * v * v + 2.0 * gamma * u * v;
                out[1] = v * (v * v - 1.0) + alpha * u + 2.0 * beta * u * v + gamma * u * u;
            }
            Potential::Polynomial { coeffs } => {
                let mut acc = 0.0;
                for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * p[0] + k as f64 * c;
                }
                out[0] = acc;
            }
        }
    }

    fn integrate_channels(&self, ch: &Channels) -> Result<f64> {
        let n = ch.grid.len();
        let mut p = [0.0; 2];
        let mut sum = 0.0;
        for i in 0..n {
            for (c, d) in ch.data.iter().enumerate() {
                p[c] = d[i];
            }
            self.check_point(i, &p)?;
            sum += self.point_density(&p);
        }
        Ok(sum * ch.grid.cell_area())
    }

    /// `∫ F dx` over the grid.
    pub fn bulk_energy(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<f64> {
        let ch = self.channels(ctx, fields)?;
        self.integrate_channels(&ch)
    }

    /// Variational derivative of `∫ F dx`, one field per coupled component.
    pub fn derivative(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<Vec<Field>> {
        Ok(self.evaluate(ctx, fields)?.1)
    }

    /// Bulk energy and variational derivative in one pass.
    pub fn evaluate(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<(f64, Vec<Field>)> {
        let ch = self.channels(ctx, fields)?;
        let grid = ch.grid;
        let n = grid.len();
        let nc = ch.data.len();
        let mut p = [0.0; 2];
        let mut g = [0.0; 2];
        let mut sum = 0.0;
        let mut out = vec![Vec::with_capacity(n); nc];
        for i in 0..n {
            for (c, d) in ch.data.iter().enumerate() {
                p[c] = d[i];
            }
            self.check_point(i, &p)?;
            sum += self.point_density(&p);
            self.point_gradient(&p, &mut g);
            for (c, o) in out.iter_mut().enumerate() {
                o.push(g[c]);
            }
        }
        let energy = sum * grid.cell_area();
        let mut derivs: Vec<Field> = out.into_iter().map(|v| Field::from_raw(grid, v)).collect();
        if self.uses_gradient() {
            // F' = -div(dF/d grad phi)
            let gy = derivs.pop().unwrap();
            let gx = derivs.pop().unwrap();
            derivs = vec![ctx.divergence(&gx, &gy)?.scale(-1.0)];
        }
        Ok((energy, derivs))
    }

    /// Restriction of `∫ F` to the line `base + s * dir` in field space.
    pub fn line_profile(&self, ctx: &SpectralContext, base: &[Field], dir: &[Field]) -> Result<LineProfile> {
        let b = self.channels(ctx, base)?;
        let d = self.channels(ctx, dir)?;
        Ok(LineProfile {
            potential: self.clone(),
            base: b,
            dir: d,
        })
    }
}

/// `s -> ∫ F(base + s dir) dx` with its derivative, evaluated without
/// further transforms.
#[derive(Debug, Clone)]
pub struct LineProfile {
    potential: Potential,
    base: Channels,
    dir: Channels,
}

impl LineProfile {
    pub fn value(&self, s: f64) -> Result<f64> {
        let n = self.base.grid.len();
        let mut p = [0.0; 2];
        let mut sum = 0.0;
        for i in 0..n {
            for c in 0..self.base.data.len() {
                p[c] = self.base.data[c][i] + s * self.dir.data[c][i];
            }
            self.potential.check_point(i, &p)?;
            sum += self.potential.point_density(&p);
        }
        Ok(sum * self.base.grid.cell_area())
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        let n = self.base.grid.len();
        let mut p = [0.0; 2];
        let mut g = [0.0; 2];
        let mut sum = 0.0;
        for i in 0..n {
            let nc = self.base.data.len();
            for c in 0..nc {
                p[c] = self.base.data[c][i] + s * self.dir.data[c][i];
            }
            self.potential.check_point(i, &p)?;
            self.potential.point_gradient(&p, &mut g);
            for c in 0..nc {
                sum += g[c] * self.dir.data[c][i];
            }
        }
        Ok(sum * self.base.grid.cell_area())
    }
}

/// The self-adjoint nonnegative operator `𝓛`, given by its Fourier symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearOperator {
    /// `-coef * Laplacian`, symbol `coef |k|^2`.
    NegLaplacian { coef: f64 },
    /// `coef * Laplacian^2`, symbol `coef |k|^4`.
    Biharmonic { coef: f64 },
    /// `-coef * Laplacian + sigma (-Laplacian)^{-1}` on zero-mean fields,
    /// symbol `coef |k|^2 + sigma / |k|^2` with the zero mode set to 0.
    NegLaplacianNonlocal { coef: f64, sigma: f64 },
}

impl LinearOperator {
    pub fn symbol_at(&self, k2: f64) -> f64 {
        match *self {
            LinearOperator::NegLaplacian { coef } => coef * k2,
            LinearOperator::Biharmonic { coef } => coef * k2 * k2,
            LinearOperator::NegLaplacianNonlocal { coef, sigma } => {
                if k2 == 0.0 {
                    0.0
                } else {
                    coef * k2 + sigma / k2
                }
            }
        }
    }

    fn local_symbol_at(&self, k2: f64) -> f64 {
        match *self {
            LinearOperator::NegLaplacianNonlocal { coef, .. } => coef * k2,
            op => op.symbol_at(k2),
        }
    }

    fn nonlocal_strength(&self) -> f64 {
        match *self {
            LinearOperator::NegLaplacianNonlocal { sigma, .. } => sigma,
            _ => 0.0,
        }
    }

    pub fn symbol(&self, ctx: &SpectralContext) -> OperatorSymbol {
        OperatorSymbol::from_k2(ctx, |k2| self.symbol_at(k2))
    }

    fn coefficients(&self) -> [f64; 2] {
        match *self {
            LinearOperator::NegLaplacian { coef } | LinearOperator::Biharmonic { coef } => [coef, 0.0],
            LinearOperator::NegLaplacianNonlocal { coef, sigma } => [coef, sigma],
        }
    }
}

/// The relaxation operator `𝒢`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mobility {
    /// `𝒢 = m Id`
    L2 { m: f64 },
    /// `𝒢 = -m Laplacian`
    Hminus1 { m: f64 },
}

impl Mobility {
    pub fn symbol_at(&self, k2: f64) -> f64 {
        match *self {
            Mobility::L2 { m } => m,
            Mobility::Hminus1 { m } => m * k2,
        }
    }

    pub fn symbol(&self, ctx: &SpectralContext) -> OperatorSymbol {
        OperatorSymbol::from_k2(ctx, |k2| self.symbol_at(k2))
    }

    pub fn conserves_mass(&self) -> bool {
        matches!(self, Mobility::Hminus1 { .. })
    }
}

/// Linear part and mobility of one evolving field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub linear: LinearOperator,
    pub mobility: Mobility,
}

/// A gradient-flow model: one [`Component`] per field plus the potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub components: Vec<Component>,
    pub potentials: Vec<Potential>,
}

impl ModelSpec {
    pub fn new(name: &str, components: Vec<Component>, potentials: Vec<Potential>) -> Result<Self> {
        let m = Self {
            name: name.to_string(),
            components,
            potentials,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config("model has no components".into()));
        }
        if self.potentials.is_empty() {
            return Err(Error::Config("model needs at least one potential".into()));
        }
        for c in &self.components {
            let [a, b] = c.linear.coefficients();
            let m = match c.mobility {
                Mobility::L2 { m } | Mobility::Hminus1 { m } => m,
            };
            if !(a >= 0.0 && b >= 0.0 && m > 0.0) || ![a, b, m].iter().all(|v| v.is_finite()) {
                return Err(Error::Config(format!(
                    "operator coefficients must be nonnegative and mobility positive: {c:?}"
                )));
            }
        }
        for p in &self.potentials {
            if p.arity() != self.components.len() {
                return Err(Error::UnsupportedModel(format!(
                    "potential {p} couples {} field(s) but the model has {}",
                    p.arity(),
                    self.components.len()
                )));
            }
            let bad = match p {
                Potential::DoubleWell { eps2 } => !(*eps2 > 0.0),
                Potential::FloryHuggins { theta } => !theta.is_finite(),
                Potential::BcpW { alpha, beta, gamma } => ![alpha, beta, gamma].iter().all(|v| v.is_finite()),
                Potential::Polynomial { coeffs } => !coeffs.iter().all(|v| v.is_finite()),
                Potential::MbeLog => false,
            };
            if bad {
                return Err(Error::Config(format!("invalid parameters for {p}")));
            }
        }
        Ok(())
    }

    /// Allen-Cahn: `𝓛 = -Laplacian`, `𝒢 = Id`, double well with `eps2`.
    pub fn allen_cahn(eps2: f64) -> Result<Self> {
        Self::single(
            "allen-cahn",
            LinearOperator::NegLaplacian { coef: 1.0 },
            Mobility::L2 { m: 1.0 },
            Potential::DoubleWell { eps2 },
        )
    }

    /// Cahn-Hilliard: `𝓛 = -Laplacian`, `𝒢 = -m Laplacian`, double well.
    pub fn cahn_hilliard(eps2: f64, m: f64) -> Result<Self> {
        Self::single(
            "cahn-hilliard",
            LinearOperator::NegLaplacian { coef: 1.0 },
            Mobility::Hminus1 { m },
            Potential::DoubleWell { eps2 },
        )
    }

    /// Cahn-Hilliard with `𝓛 = -eps2 Laplacian` and a Flory-Huggins potential.
    pub fn cahn_hilliard_log(eps2: f64, theta: f64, m: f64) -> Result<Self> {
        Self::single(
            "cahn-hilliard-log",
            LinearOperator::NegLaplacian { coef: eps2 },
            Mobility::Hminus1 { m },
            Potential::FloryHuggins { theta },
        )
    }

    /// Thin-film growth without slope selection: `𝓛 = eps^2 Laplacian^2`, L2 flow.
    pub fn mbe(eps: f64, m: f64) -> Result<Self> {
        Self::single(
            "mbe",
            LinearOperator::Biharmonic { coef: eps * eps },
            Mobility::L2 { m },
            Potential::MbeLog,
        )
    }

    /// Coupled block-copolymer system in `(u, v)`.
    pub fn bcp(p: &BcpParams) -> Result<Self> {
        Self::new(
            "bcp",
            vec![
                Component {
                    linear: LinearOperator::NegLaplacian {
                        coef: p.eps_u * p.eps_u,
                    },
                    mobility: Mobility::Hminus1 { m: p.m_u },
                },
                Component {
                    linear: LinearOperator::NegLaplacianNonlocal {
                        coef: p.eps_v * p.eps_v,
                        sigma: p.sigma,
                    },
                    mobility: Mobility::Hminus1 { m: p.m_v },
                },
            ],
            vec![Potential::BcpW {
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
            }],
        )
    }

    fn single(name: &str, linear: LinearOperator, mobility: Mobility, p: Potential) -> Result<Self> {
        Self::new(name, vec![Component { linear, mobility }], vec![p])
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    fn check_fields(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<()> {
        if fields.len() != self.n_components() {
            return Err(Error::LengthMismatch {
                expected: self.n_components(),
                got: fields.len(),
            });
        }
        if fields.iter().any(|f| f.grid() != ctx.grid()) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `1/2 sum_i (𝓛_i phi_i, phi_i)` using the full symbols.
    pub fn quadratic_energy(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<f64> {
        self.check_fields(ctx, fields)?;
        let mut e = 0.0;
        for (c, f) in self.components.iter().zip(fields) {
            let spec = ctx.forward(f)?;
            e += 0.5 * ctx.quadratic_form(&c.linear.symbol(ctx), &spec);
        }
        Ok(e)
    }

    /// The model's free energy `E`.
    ///
    /// The nonlocal interaction is evaluated as
    /// `sigma/2 (v - vbar, (-Laplacian)^{-1}(v - vbar))`.
    pub fn original_energy(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<f64> {
        self.check_fields(ctx, fields)?;
        let mut e = 0.0;
        for (c, f) in self.components.iter().zip(fields) {
            let spec = ctx.forward(f)?;
            let local = OperatorSymbol::from_k2(ctx, |k2| c.linear.local_symbol_at(k2));
            e += 0.5 * ctx.quadratic_form(&local, &spec);
            let sigma = c.linear.nonlocal_strength();
            if sigma != 0.0 {
                let inv = OperatorSymbol::from_k2(ctx, |k2| if k2 > 0.0 { 1.0 / k2 } else { 0.0 });
                e += 0.5 * sigma * ctx.quadratic_form(&inv, &spec);
            }
        }
        for p in &self.potentials {
            e += p.bulk_energy(ctx, fields)?;
        }
        Ok(e)
    }

    /// Per-component masses `∫ phi_i dx`.
    pub fn masses(&self, ctx: &SpectralContext, fields: &[Field]) -> Result<Vec<f64>> {
        self.check_fields(ctx, fields)?;
        fields.iter().map(|f| ctx.integrate(f)).collect()
    }
}

/// Parameters of the block-copolymer model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcpParams {
    pub eps_u: f64,
    pub eps_v: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m_u: f64,
    pub m_v: f64,
}

impl Default for BcpParams {
    fn default() -> Self {
        Self {
            eps_u: 0.075,
            eps_v: 0.05,
            sigma: 10.0,
            alpha: 0.1,
            beta: -0.75,
            gamma: 0.0,
            m_u: 1.0,
            m_v: 1.0,
        }
    }
}

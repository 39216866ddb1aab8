use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::grid::{inner_raw, Field, SpectralContext, Spectrum};
use crate::models::ModelSpec;
use crate::solver::{solve_scalar, solve_system, NewtonConfig, MAX_SYSTEM_SIZE};
use crate::transform::GFunction;

use super::{Approach, Forcing, SchemeKind, SchemeState, Stencil};

/// Below this, every `xi`-coefficient of a residual counts as zero.
const DEGENERATE: f64 = 1e-13;
/// Smallest admissible `|G(∫F)|` in the `xi` ratio.
const MIN_DENOMINATOR: f64 = 1e-14;

/// Advances a [`SchemeState`] for one model, scheme and set of `G` functions.
pub struct Stepper<'a> {
    ctx: &'a SpectralContext,
    model: &'a ModelSpec,
    gs: Vec<GFunction>,
    kind: SchemeKind,
    newton: NewtonConfig,
    forcing: Option<&'a dyn Forcing>,
    lsym: Vec<Vec<f64>>,
    msym: Vec<Vec<f64>>,
}

/// Everything the `xi` solvers need from the linear stage of a step.
struct Linear<'s> {
    stencil: Stencil,
    state: &'s SchemeState,
    g: Vec<f64>,
    c: Vec<f64>,
    /// Row-major `np x np` coupling `lin * (F'_p, phi_{2,q})`.
    a: Vec<f64>,
    lin: f64,
    phi1: Vec<Field>,
    phi2: Vec<Vec<Field>>,
}

struct XiSolution {
    xi: Vec<f64>,
    r: Vec<f64>,
    iters: usize,
    bulk: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Stepper<'a> {
    pub fn new(ctx: &'a SpectralContext, model: &'a ModelSpec, gs: &[GFunction], kind: SchemeKind) -> Result<Self> {
        model.validate()?;
        kind.validate()?;
        let np = model.potentials.len();
        if gs.len() != np {
            return Err(Error::Config(format!(
                "{} G functions given for {np} potentials",
                gs.len()
            )));
        }
        if np > MAX_SYSTEM_SIZE {
            return Err(Error::UnsupportedModel(format!(
                "{np} potentials, at most {MAX_SYSTEM_SIZE}"
            )));
        }
        if kind == SchemeKind::MultiComponentCn && model.n_components() < 2 {
            return Err(Error::UnsupportedModel(format!(
                "{kind} needs at least two fields, {} has {}",
                model.name,
                model.n_components()
            )));
        }
        if kind.approach() == Approach::Third && np != 1 {
            return Err(Error::UnsupportedModel(format!("{kind} supports a single potential")));
        }
        let lsym = model
            .components
            .iter()
            .map(|c| c.linear.symbol(ctx).values().to_vec())
            .collect();
        let msym = model
            .components
            .iter()
            .map(|c| c.mobility.symbol(ctx).values().to_vec())
            .collect();
        Ok(Self {
            ctx,
            model,
            gs: gs.to_vec(),
            kind,
            newton: NewtonConfig::default(),
            forcing: None,
            lsym,
            msym,
        })
    }

    pub fn with_forcing(mut self, forcing: &'a dyn Forcing) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn with_newton(mut self, cfg: NewtonConfig) -> Result<Self> {
        cfg.validate()?;
        self.newton = cfg;
        Ok(self)
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn g_functions(&self) -> &[GFunction] {
        &self.gs
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn ctx(&self) -> &SpectralContext {
        self.ctx
    }

    pub fn initial_state(&self, phi: Vec<Field>, t0: f64) -> Result<SchemeState> {
        SchemeState::initial(self.ctx, self.model, &self.gs, phi, t0)
    }

    /// Advances `state` by `dt`.
    ///
    /// Two-level schemes take their first step (no previous level yet) with
    /// the first-order scheme of the same approach.
    pub fn step(&self, state: &SchemeState, dt: f64) -> Result<SchemeState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidState(format!("time step {dt} must be positive")));
        }
        SchemeState::check_shape(self.ctx, self.model, &self.gs, &state.phi)?;
        let ctx = self.ctx;
        let nc = self.model.n_components();
        let np = self.model.potentials.len();
        let n = ctx.grid().len();

        let approach = self.kind.approach();
        let startup = self.kind.is_two_level() && state.phi_prev.is_none();
        let stencil = if startup { Stencil::Bdf1 } else { self.kind.stencil() };
        let (eps1, eps2) = if startup { (0.0, 0.0) } else { self.kind.stabilization() };
        let stabilized = eps1 != 0.0 || eps2 != 0.0;

        let prev = match stencil {
            Stencil::Bdf1 => None,
            _ => Some(state.phi_prev.as_deref().ok_or(Error::MissingHistory)?),
        };
        let ratio = match stencil {
            Stencil::Bdf1 => None,
            _ if state.dt == dt => None,
            Stencil::Bdf2 => {
                return Err(Error::InvalidState(format!(
                    "BDF2 needs a uniform step, got {dt} after {}",
                    state.dt
                )))
            }
            Stencil::CrankNicolson => Some(dt / state.dt),
        };

        let spec_n: Cow<[Spectrum]> = match &state.spectra {
            Some(s) => Cow::Borrowed(s),
            None => Cow::Owned(state.phi.iter().map(|f| ctx.forward(f)).collect::<Result<_>>()?),
        };
        let need_prev_spec = stencil == Stencil::Bdf2 || (stencil == Stencil::CrankNicolson && stabilized);
        let spec_prev: Option<Cow<[Spectrum]>> = match (need_prev_spec, &state.spectra_prev, prev) {
            (false, _, _) => None,
            (true, Some(s), _) => Some(Cow::Borrowed(s)),
            (true, None, Some(p)) => Some(Cow::Owned(p.iter().map(|f| ctx.forward(f)).collect::<Result<_>>()?)),
            (true, None, None) => return Err(Error::MissingHistory),
        };

        // explicit extrapolant at which the nonlinear terms are evaluated
        let star: Cow<[Field]> = match (stencil, prev) {
            (Stencil::Bdf1, _) | (_, None) => Cow::Borrowed(&state.phi),
            (Stencil::Bdf2, Some(p)) => {
                Cow::Owned(state.phi.iter().zip(p).map(|(a, b)| a.axpby(2.0, -1.0, b)).collect())
            }
            (Stencil::CrankNicolson, Some(p)) => {
                let (wa, wb) = match ratio {
                    None => (1.5, -0.5),
                    Some(w) => (1.0 + 0.5 * w, -0.5 * w),
                };
                Cow::Owned(state.phi.iter().zip(p).map(|(a, b)| a.axpby(wa, wb, b)).collect())
            }
        };

        let mut gvals = Vec::with_capacity(np);
        let mut fprime = Vec::with_capacity(np);
        for (pot, g) in self.model.potentials.iter().zip(&self.gs) {
            let (e, d) = pot.evaluate(ctx, &star)?;
            gvals.push(g.forward(e)?);
            fprime.push(d);
        }

        let t_src = match stencil {
            Stencil::CrankNicolson => state.t + 0.5 * dt,
            _ => state.t + dt,
        };
        let source = match self.forcing {
            Some(f) => {
                let s = f.eval(t_src)?;
                if s.len() != nc {
                    return Err(Error::LengthMismatch {
                        expected: nc,
                        got: s.len(),
                    });
                }
                if s.iter().any(|f| f.grid() != ctx.grid()) {
                    return Err(Error::GridMismatch);
                }
                Some(s)
            }
            None => None,
        };

        let a = match stencil {
            Stencil::Bdf2 => 1.5 / dt,
            _ => 1.0 / dt,
        };
        let theta = match stencil {
            Stencil::CrankNicolson => 0.5,
            _ => 1.0,
        };
        let inv_dt2 = 1.0 / (dt * dt);

        let mut phi1 = Vec::with_capacity(nc);
        let mut phi2: Vec<Vec<Field>> = vec![Vec::with_capacity(nc); np];
        let mut spec1 = Vec::with_capacity(nc);
        let mut spec2: Vec<Vec<Spectrum>> = vec![Vec::with_capacity(nc); np];
        for i in 0..nc {
            let l = &self.lsym[i];
            let m = &self.msym[i];
            let mut inputs: Vec<&Field> = fprime.iter().map(|d: &Vec<Field>| &d[i]).collect();
            if let Some(s) = &source {
                inputs.push(&s[i]);
            }
            let mut specs = ctx.forward_many(&inputs)?;
            let src_spec = source.as_ref().map(|_| specs.pop().unwrap());
            for s in specs.iter_mut() {
                ctx.dealias(s);
            }
            let sn = &spec_n[i];
            let sp = spec_prev.as_ref().map(|v| &v[i]);

            let mut s1 = Vec::with_capacity(n);
            let mut s2: Vec<Spectrum> = (0..np).map(|_| Vec::with_capacity(n)).collect();
            for k in 0..n {
                let stab = if stabilized {
                    (eps1 + eps2 * l[k]) * inv_dt2
                } else {
                    0.0
                };
                let d = a + m[k] * (theta * l[k] + stab);
                let mut rhs = match stencil {
                    Stencil::Bdf1 => sn[k] / dt,
                    Stencil::Bdf2 => (sn[k] * 4.0 - sp.unwrap()[k]) / (2.0 * dt),
                    Stencil::CrankNicolson => {
                        let mut v = sn[k] / dt - sn[k] * (0.5 * m[k] * l[k]);
                        if stabilized {
                            v -= (sp.unwrap()[k] - sn[k] * 2.0) * (m[k] * stab);
                        }
                        v
                    }
                };
                if let Some(fs) = &src_spec {
                    rhs += fs[k];
                }
                s1.push(rhs / d);
                for (p, sp2) in s2.iter_mut().enumerate() {
                    sp2.push(specs[p][k] * (-m[k] / d));
                }
            }
            let mut all = Vec::with_capacity(np + 1);
            all.push(s1);
            all.extend(s2);
            let mut fields = ctx.inverse_many(&all).into_iter();
            phi1.push(fields.next().unwrap());
            for (p, f) in fields.enumerate() {
                phi2[p].push(f);
            }
            let mut all = all.into_iter();
            spec1.push(all.next().unwrap());
            for (p, s) in all.enumerate() {
                spec2[p].push(s);
            }
        }

        let lin = if stencil == Stencil::Bdf2 { 3.0 } else { 1.0 };
        let grid = *ctx.grid();
        let inc1: Vec<Field> = (0..nc)
            .map(|i| match (stencil, prev) {
                (Stencil::Bdf2, Some(p)) => {
                    let v = phi1[i]
                        .values()
                        .iter()
                        .zip(state.phi[i].values())
                        .zip(p[i].values())
                        .map(|((x, y), z)| 3.0 * x - 4.0 * y + z)
                        .collect();
                    Field::from_raw(grid, v)
                }
                _ => phi1[i].axpby(1.0, -1.0, &state.phi[i]),
            })
            .collect();
        let mut c = vec![0.0; np];
        let mut amat = vec![0.0; np * np];
        for p in 0..np {
            for i in 0..nc {
                c[p] += inner_raw(&grid, fprime[p][i].values(), inc1[i].values());
                for q in 0..np {
                    amat[p * np + q] += inner_raw(&grid, fprime[p][i].values(), phi2[q][i].values());
                }
            }
        }
        for v in amat.iter_mut() {
            *v *= lin;
        }

        let linear = Linear {
            stencil,
            state,
            g: gvals,
            c,
            a: amat,
            lin,
            phi1,
            phi2,
        };
        let sol = match approach {
            Approach::First => self.solve_first(&linear)?,
            Approach::Second => self.solve_second(&linear, ratio)?,
            Approach::Third => self.solve_third(&linear)?,
        };

        let mut phi_new = Vec::with_capacity(nc);
        let mut spec_new = Vec::with_capacity(nc);
        for i in 0..nc {
            let mut f = linear.phi1[i].clone();
            let mut s = spec1[i].clone();
            for p in 0..np {
                f = f.axpby(1.0, sol.xi[p], &linear.phi2[p][i]);
                for (x, y) in s.iter_mut().zip(&spec2[p][i]) {
                    *x += y * sol.xi[p];
                }
            }
            if let Some(k) = f.values().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(k));
            }
            phi_new.push(f);
            spec_new.push(s);
        }
        let (bulk, bulk_prev) = match sol.bulk {
            Some((b, bp)) => (Some(b), Some(bp)),
            None => (None, None),
        };

        Ok(SchemeState {
            phi: phi_new,
            phi_prev: Some(state.phi.clone()),
            r: sol.r,
            r_prev: Some(state.r.clone()),
            xi: sol.xi,
            t: state.t + dt,
            dt,
            step: state.step + 1,
            newton_iters: sol.iters,
            spectra: Some(spec_new),
            spectra_prev: Some(spec_n.into_owned()),
            bulk,
            bulk_prev,
        })
    }

    fn inverse_g(&self, p: usize, r: f64) -> Result<f64> {
        self.gs[p].inverse(r)
    }

    /// `lin G^{-1}(r^{n+1})` history terms: `G^{-1}(r^n)` or `4 G^{-1}(r^n) - G^{-1}(r^{n-1})`.
    fn g_history(&self, lp: &Linear) -> Result<Vec<f64>> {
        let st = lp.state;
        (0..self.gs.len())
            .map(|p| {
                let now = self.inverse_g(p, st.r[p])?;
                Ok(match lp.stencil {
                    Stencil::Bdf2 => {
                        let rp = st.r_prev.as_ref().ok_or(Error::MissingHistory)?;
                        4.0 * now - self.inverse_g(p, rp[p])?
                    }
                    _ => now,
                })
            })
            .collect()
    }

    fn is_degenerate(&self, lp: &Linear, p: usize, flat: bool) -> bool {
        let np = lp.c.len();
        flat && lp.c[p].abs() < DEGENERATE && (0..np).all(|q| lp.a[p * np + q].abs() < DEGENERATE)
    }

    fn tolerance_scale(lp: &Linear, hist: &[f64], active: &[usize]) -> f64 {
        let np = lp.c.len();
        active.iter().fold(1.0f64, |s, &p| {
            let coupling: f64 = (0..np).map(|q| lp.a[p * np + q].abs()).sum();
            s.max(hist[p].abs()).max(lp.c[p].abs() + coupling)
        })
    }

    fn solve_first(&self, lp: &Linear) -> Result<XiSolution> {
        let np = lp.c.len();
        let hist = self.g_history(lp)?;
        let cn = lp.stencil == Stencil::CrankNicolson;
        let r_now = &lp.state.r;
        // r^{n+1} as a function of xi; CN closes r^{n+1/2} = (r^{n+1} + r^n) / 2
        let r_of = |p: usize, x: f64| if cn { 2.0 * x * lp.g[p] - r_now[p] } else { x * lp.g[p] };
        let dr = |p: usize| if cn { 2.0 * lp.g[p] } else { lp.g[p] };

        let active: Vec<usize> = (0..np)
            .filter(|&p| !self.is_degenerate(lp, p, lp.g[p].abs() < DEGENERATE))
            .collect();
        for &p in &active {
            if lp.g[p].abs() < MIN_DENOMINATOR {
                return Err(Error::DenominatorNearZero(lp.g[p]));
            }
        }
        let mut xi = vec![1.0; np];
        let mut iters = 0;
        if !active.is_empty() {
            let cfg = self.newton.scaled(Self::tolerance_scale(lp, &hist, &active));
            let coupling =
                |p: usize, xi: &[f64]| -> f64 { lp.c[p] + (0..np).map(|q| lp.a[p * np + q] * xi[q]).sum::<f64>() };
            let residual = |p: usize, xi: &[f64]| -> f64 {
                match self.inverse_g(p, r_of(p, xi[p])) {
                    Ok(v) => lp.lin * v - hist[p] - xi[p] * coupling(p, xi),
                    Err(_) => f64::NAN,
                }
            };
            let diag = |p: usize, xi: &[f64]| -> f64 {
                match self.gs[p].inverse_derivative(r_of(p, xi[p])) {
                    Ok(d) => lp.lin * d * dr(p) - coupling(p, xi),
                    Err(_) => f64::NAN,
                }
            };
            if active.len() == 1 {
                let p = active[0];
                let mut x = xi.clone();
                let mut y = xi.clone();
                let rep = solve_scalar(
                    |v| {
                        x[p] = v;
                        residual(p, &x)
                    },
                    |v| {
                        y[p] = v;
                        diag(p, &y) - y[p] * lp.a[p * np + p]
                    },
                    1.0,
                    &cfg,
                )?;
                xi[p] = rep.x;
                iters = rep.iterations;
            } else {
                let expand = |v: &[f64]| {
                    let mut full = vec![1.0; np];
                    for (k, &p) in active.iter().enumerate() {
                        full[p] = v[k];
                    }
                    full
                };
                let rep = solve_system(
                    |v| {
                        let full = expand(v);
                        active.iter().map(|&p| residual(p, &full)).collect()
                    },
                    |v| {
                        let full = expand(v);
                        let m = active.len();
                        let mut jac = vec![0.0; m * m];
                        for (row, &p) in active.iter().enumerate() {
                            for (col, &q) in active.iter().enumerate() {
                                let mut val = -full[p] * lp.a[p * np + q];
                                if p == q {
                                    val += diag(p, &full);
                                }
                                jac[row * m + col] = val;
                            }
                        }
                        jac
                    },
                    &vec![1.0; active.len()],
                    &cfg,
                )?;
                xi = expand(&rep.x);
                iters = rep.iterations;
            }
        }
        let r = (0..np).map(|p| r_of(p, xi[p])).collect();
        Ok(XiSolution {
            xi,
            r,
            iters,
            bulk: None,
        })
    }

    fn solve_second(&self, lp: &Linear, ratio: Option<f64>) -> Result<XiSolution> {
        let np = lp.c.len();
        let hist = self.g_history(lp)?;
        let st = lp.state;
        let r_prev = st.r_prev.as_deref();
        let mut xi = vec![1.0; np];
        for p in 0..np {
            if self.is_degenerate(lp, p, lp.g[p].abs() < DEGENERATE) {
                continue;
            }
            if lp.g[p].abs() < MIN_DENOMINATOR {
                return Err(Error::DenominatorNearZero(lp.g[p]));
            }
            let r_ext = match (lp.stencil, r_prev) {
                (Stencil::Bdf1, _) => st.r[p],
                (_, None) => return Err(Error::MissingHistory),
                (Stencil::Bdf2, Some(rp)) => 2.0 * st.r[p] - rp[p],
                (Stencil::CrankNicolson, Some(rp)) => match ratio {
                    None => 1.5 * st.r[p] - 0.5 * rp[p],
                    Some(w) => st.r[p] + 0.5 * w * (st.r[p] - rp[p]),
                },
            };
            xi[p] = r_ext / lp.g[p];
        }
        let mut r = Vec::with_capacity(np);
        for p in 0..np {
            let coupling: f64 = lp.c[p] + (0..np).map(|q| lp.a[p * np + q] * xi[q]).sum::<f64>();
            let q_new = (hist[p] + xi[p] * coupling) / lp.lin;
            r.push(self.gs[p].forward(q_new)?);
        }
        Ok(XiSolution {
            xi,
            r,
            iters: 0,
            bulk: None,
        })
    }

    fn solve_third(&self, lp: &Linear) -> Result<XiSolution> {
        let ctx = self.ctx;
        let pot = &self.model.potentials[0];
        let st = lp.state;
        let bulk_now = match &st.bulk {
            Some(b) => b[0],
            None => pot.bulk_energy(ctx, &st.phi)?,
        };
        let hist = match lp.stencil {
            Stencil::Bdf2 => {
                let prev = st.phi_prev.as_deref().ok_or(Error::MissingHistory)?;
                let bulk_prev = match &st.bulk_prev {
                    Some(b) => b[0],
                    None => pot.bulk_energy(ctx, prev)?,
                };
                4.0 * bulk_now - bulk_prev
            }
            _ => bulk_now,
        };
        let (c, a) = (lp.c[0], lp.a[0]);
        let profile = pot.line_profile(ctx, &lp.phi1, &lp.phi2[0])?;
        let flat = lp.phi2[0].iter().all(|f| f.max_abs() < DEGENERATE);
        let (xi, iters) = if self.is_degenerate(lp, 0, flat) {
            (1.0, 0)
        } else {
            let cfg = self.newton.scaled(Self::tolerance_scale(lp, &[hist], &[0]));
            let rep = solve_scalar(
                |x| match profile.value(x) {
                    Ok(v) => lp.lin * v - hist - x * (c + a * x),
                    Err(_) => f64::NAN,
                },
                |x| match profile.derivative(x) {
                    Ok(d) => lp.lin * d - c - 2.0 * a * x,
                    Err(_) => f64::NAN,
                },
                1.0,
                &cfg,
            )?;
            (rep.x, rep.iterations)
        };
        let bulk_new = profile.value(xi)?;
        Ok(XiSolution {
            xi: vec![xi],
            r: vec![xi * lp.g[0]],
            iters,
            bulk: Some((vec![bulk_new], vec![bulk_now])),
        })
    }
}

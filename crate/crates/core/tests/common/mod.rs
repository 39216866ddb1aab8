//! Dense reference steppers for small periodic grids.
//!
//! Operators are explicit matrices built from the periodic Fourier
//! differentiation matrices, every implicit solve is a dense LU, and the
//! scalar equations are written directly on the candidate field instead of
//! through precomputed coefficients.

#![allow(dead_code)]

pub mod cases;

use std::f64::consts::PI;

use gsav::solver::{solve_scalar, solve_system, NewtonConfig};
use gsav::transform::GFunction;
use gsav::{Field, Grid};
use nalgebra::{DMatrix, DVector};

/// First-derivative matrix on `n` equispaced points of a period `length`.
pub fn diff1(n: usize, length: f64) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    let s = 2.0 * PI / length;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            s * 0.5 * sign / (d * h / 2.0).tan()
        }
    })
}

/// Second-derivative matrix; the Nyquist cosine is kept.
pub fn diff2(n: usize, length: f64) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    let s = 2.0 * PI / length;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            s * s * (-PI * PI / (3.0 * h * h) - 1.0 / 6.0)
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            s * s * (-0.5 * sign / (d * h / 2.0).sin().powi(2))
        }
    })
}

pub struct DenseGrid {
    pub grid: Grid,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub lap: DMatrix<f64>,
    pub cell: f64,
}

impl DenseGrid {
    pub fn new(grid: Grid) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let ix = DMatrix::<f64>::identity(nx, nx);
        let iy = DMatrix::<f64>::identity(ny, ny);
        // index = iy * nx + ix, so x acts on the inner factor
        let dx = iy.kronecker(&diff1(nx, grid.lx()));
        let dy = diff1(ny, grid.ly()).kronecker(&ix);
        let lap = iy.kronecker(&diff2(nx, grid.lx())) + diff2(ny, grid.ly()).kronecker(&ix);
        Self {
            grid,
            dx,
            dy,
            lap,
            cell: grid.hx() * grid.hy(),
        }
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn identity(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n(), self.n())
    }

    /// Pseudo-inverse of `-Laplacian` (zero on constants).
    pub fn neg_lap_pinv(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = DMatrix::from_element(n, n, 1.0 / n as f64);
        let m = -&self.lap + &p;
        m.try_inverse().expect("-Laplacian + projection is invertible") - p
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> DVector<f64> {
        let g = &self.grid;
        DVector::from_fn(self.n(), |k, _| f(g.x(k % g.nx()), g.y(k / g.nx())))
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.cell * a.dot(b)
    }

    pub fn integrate(&self, a: &DVector<f64>) -> f64 {
        self.cell * a.sum()
    }

    pub fn to_field(&self, v: &DVector<f64>) -> Field {
        Field::new(self.grid, v.as_slice().to_vec()).unwrap()
    }

    pub fn from_field(&self, f: &Field) -> DVector<f64> {
        DVector::from_column_slice(f.values())
    }
}

#[derive(Debug, Clone)]
pub enum DensePotential {
    DoubleWell { eps2: f64 },
    Polynomial(Vec<f64>),
    Bcp { alpha: f64, beta: f64, gamma: f64 },
    Mbe,
}

impl DensePotential {
    pub fn bulk(&self, g: &DenseGrid, f: &[DVector<f64>]) -> f64 {
        let dens: DVector<f64> = match self {
            DensePotential::DoubleWell { eps2 } => f[0].map(|p| (p * p - 1.0).powi(2) / (4.0 * eps2)),
            DensePotential::Polynomial(c) => {
                f[0].map(|p| c.iter().enumerate().map(|(k, a)| a * p.powi(k as i32)).sum())
            }
            DensePotential::Bcp { alpha, beta, gamma } => DVector::from_fn(g.n(), |k, _| {
                let (u, v) = (f[0][k], f[1][k]);
                (u * u - 1.0).powi(2) / 4.0
                    + (v * v - 1.0).powi(2) / 4.0
                    + alpha * u * v
                    + beta * u * v * v
                    + gamma * u * u * v
            }),
            DensePotential::Mbe => {
                let gx = &g.dx * &f[0];
                let gy = &g.dy * &f[0];
                gx.zip_map(&gy, |a, b| -0.5 * (1.0 + a * a + b * b).ln())
            }
        };
        g.integrate(&dens)
    }

    pub fn deriv(&self, g: &DenseGrid, f: &[DVector<f64>]) -> Vec<DVector<f64>> {
        match self {
            DensePotential::DoubleWell { eps2 } => vec![f[0].map(|p| (p * p * p - p) / eps2)],
            DensePotential::Polynomial(c) => vec![f[0].map(|p| {
                c.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, a)| k as f64 * a * p.powi(k as i32 - 1))
                    .sum()
            })],
            DensePotential::Bcp { alpha, beta, gamma } => {
                let du = DVector::from_fn(g.n(), |k, _| {
                    let (u, v) = (f[0][k], f[1][k]);
                    u * u * u - u + alpha * v + beta * v * v + 2.0 * gamma * u * v
                });
                let dv = DVector::from_fn(g.n(), |k, _| {
                    let (u, v) = (f[0][k], f[1][k]);
                    v * v * v - v + alpha * u + 2.0 * beta * u * v + gamma * u * u
                });
                vec![du, dv]
            }
            DensePotential::Mbe => {
                let gx = &g.dx * &f[0];
                let gy = &g.dy * &f[0];
                let w = gx.zip_map(&gy, |a, b| 1.0 / (1.0 + a * a + b * b));
                vec![&g.dx * gx.component_mul(&w) + &g.dy * gy.component_mul(&w)]
            }
        }
    }
}

/// One evolving field: `(𝓛, 𝒢)` as matrices.
pub struct DenseComponent {
    pub lin: DMatrix<f64>,
    pub mob: DMatrix<f64>,
}

pub struct DenseModel {
    pub grid: DenseGrid,
    pub comps: Vec<DenseComponent>,
    pub pots: Vec<DensePotential>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Order {
    Bdf1,
    Bdf2,
    Cn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleScheme {
    /// `G^{-1}(r)` balance solved by Newton.
    Implicit(Order),
    /// Lagged `r` ratio.
    Explicit(Order),
    /// `∫F` balance solved by Newton.
    Energy,
    Stabilized {
        eps1: f64,
        eps2: f64,
    },
}

#[derive(Debug, Clone)]
pub struct OracleState {
    pub phi: Vec<DVector<f64>>,
    pub prev: Option<Vec<DVector<f64>>>,
    pub r: Vec<f64>,
    pub r_prev: Option<Vec<f64>>,
    pub xi: Vec<f64>,
    pub t: f64,
}

pub type DenseForcing<'a> = &'a dyn Fn(f64) -> Vec<DVector<f64>>;

impl DenseModel {
    pub fn initial(&self, phi: Vec<DVector<f64>>, gs: &[GFunction]) -> OracleState {
        let r = self
            .pots
            .iter()
            .zip(gs)
            .map(|(p, g)| g.forward(p.bulk(&self.grid, &phi)).unwrap())
            .collect::<Vec<_>>();
        OracleState {
            xi: vec![1.0; r.len()],
            phi,
            prev: None,
            r,
            r_prev: None,
            t: 0.0,
        }
    }

    pub fn step(
        &self,
        s: &OracleState,
        dt: f64,
        scheme: OracleScheme,
        gs: &[GFunction],
        forcing: Option<DenseForcing>,
    ) -> OracleState {
        let g = &self.grid;
        let nc = self.comps.len();
        let np = self.pots.len();
        let (mut order, mut stab) = match scheme {
            OracleScheme::Implicit(o) | OracleScheme::Explicit(o) => (o, (0.0, 0.0)),
            OracleScheme::Energy => (Order::Bdf2, (0.0, 0.0)),
            OracleScheme::Stabilized { eps1, eps2 } => (Order::Cn, (eps1, eps2)),
        };
        if s.prev.is_none() {
            order = Order::Bdf1;
            stab = (0.0, 0.0);
        }
        let old = &s.phi;
        let prev = s.prev.as_ref();

        let star: Vec<DVector<f64>> = (0..nc)
            .map(|i| match order {
                Order::Bdf1 => old[i].clone(),
                Order::Bdf2 => 2.0 * &old[i] - &prev.unwrap()[i],
                Order::Cn => 1.5 * &old[i] - 0.5 * &prev.unwrap()[i],
            })
            .collect();
        let fp: Vec<Vec<DVector<f64>>> = self.pots.iter().map(|p| p.deriv(g, &star)).collect();
        let gval: Vec<f64> = self
            .pots
            .iter()
            .zip(gs)
            .map(|(p, gf)| gf.forward(p.bulk(g, &star)).unwrap())
            .collect();

        let t_src = if order == Order::Cn { s.t + 0.5 * dt } else { s.t + dt };
        let src = forcing.map(|f| f(t_src));
        let mut phi1 = Vec::new();
        let mut phi2 = vec![Vec::new(); np];
        for i in 0..nc {
            let c = &self.comps[i];
            let id = g.identity();
            let smat = (stab.0 * &id + stab.1 * &c.lin) / (dt * dt);
            let (a, theta) = match order {
                Order::Bdf1 => (1.0 / dt, 1.0),
                Order::Bdf2 => (1.5 / dt, 1.0),
                Order::Cn => (1.0 / dt, 0.5),
            };
            let lhs = a * &id + &c.mob * (theta * &c.lin + &smat);
            let mut rhs = match order {
                Order::Bdf1 => &old[i] / dt,
                Order::Bdf2 => (4.0 * &old[i] - &prev.unwrap()[i]) / (2.0 * dt),
                Order::Cn => {
                    let mut v = &old[i] / dt - 0.5 * (&c.mob * (&c.lin * &old[i]));
                    if stab != (0.0, 0.0) {
                        v -= &c.mob * (&smat * (&prev.unwrap()[i] - 2.0 * &old[i]));
                    }
                    v
                }
            };
            if let Some(f) = &src {
                rhs += &f[i];
            }
            let lu = lhs.lu();
            phi1.push(lu.solve(&rhs).unwrap());
            for p in 0..np {
                phi2[p].push(lu.solve(&(-(&c.mob * &fp[p][i]))).unwrap());
            }
        }

        let lin = if order == Order::Bdf2 { 3.0 } else { 1.0 };
        let candidate = |xi: &[f64]| -> Vec<DVector<f64>> {
            (0..nc)
                .map(|i| {
                    let mut v = phi1[i].clone();
                    for p in 0..np {
                        v += xi[p] * &phi2[p][i];
                    }
                    v
                })
                .collect()
        };
        let increment = |phi: &[DVector<f64>]| -> Vec<DVector<f64>> {
            (0..nc)
                .map(|i| match order {
                    Order::Bdf2 => 3.0 * &phi[i] - 4.0 * &old[i] + &prev.unwrap()[i],
                    _ => &phi[i] - &old[i],
                })
                .collect()
        };
        let pair = |p: usize, v: &[DVector<f64>]| -> f64 { (0..nc).map(|i| g.inner(&fp[p][i], &v[i])).sum() };
        let inv = |p: usize, r: f64| gs[p].inverse(r).unwrap();
        let hist: Vec<f64> = (0..np)
            .map(|p| match order {
                Order::Bdf2 => 4.0 * inv(p, s.r[p]) - inv(p, s.r_prev.as_ref().unwrap()[p]),
                _ => inv(p, s.r[p]),
            })
            .collect();
        let coupling: Vec<Vec<f64>> = (0..np)
            .map(|p| (0..np).map(|q| lin * pair(p, &phi2[q])).collect())
            .collect();
        let base_scale = |p: usize, h: f64| -> f64 {
            let inc = pair(p, &increment(&candidate(&vec![0.0; np])));
            1f64.max(h.abs())
                .max(inc.abs() + coupling[p].iter().map(|v| v.abs()).sum::<f64>())
        };
        let cfg = NewtonConfig::default();

        let (xi, r) = match scheme {
            OracleScheme::Implicit(_) => {
                let cn = order == Order::Cn;
                let r_of = |p: usize, x: f64| if cn { 2.0 * x * gval[p] - s.r[p] } else { x * gval[p] };
                let dr = |p: usize| if cn { 2.0 * gval[p] } else { gval[p] };
                let residual = |xi: &[f64]| -> Vec<f64> {
                    let inc = increment(&candidate(xi));
                    (0..np)
                        .map(|p| match gs[p].inverse(r_of(p, xi[p])) {
                            Ok(v) => lin * v - hist[p] - xi[p] * pair(p, &inc),
                            Err(_) => f64::NAN,
                        })
                        .collect()
                };
                let jacobian = |xi: &[f64]| -> Vec<f64> {
                    let inc = increment(&candidate(xi));
                    let mut j = vec![0.0; np * np];
                    for p in 0..np {
                        for q in 0..np {
                            let mut v = -xi[p] * coupling[p][q];
                            if p == q {
                                v += lin * gs[p].inverse_derivative(r_of(p, xi[p])).unwrap_or(f64::NAN) * dr(p)
                                    - pair(p, &inc);
                            }
                            j[p * np + q] = v;
                        }
                    }
                    j
                };
                let scale = (0..np).fold(1.0f64, |m, p| m.max(base_scale(p, hist[p])));
                let xi = if np == 1 {
                    vec![
                        solve_scalar(|x| residual(&[x])[0], |x| jacobian(&[x])[0], 1.0, &cfg.scaled(scale))
                            .unwrap()
                            .x,
                    ]
                } else {
                    solve_system(residual, jacobian, &vec![1.0; np], &cfg.scaled(scale))
                        .unwrap()
                        .x
                };
                let r = (0..np).map(|p| r_of(p, xi[p])).collect();
                (xi, r)
            }
            OracleScheme::Explicit(_) | OracleScheme::Stabilized { .. } => {
                let xi: Vec<f64> = (0..np)
                    .map(|p| {
                        let r_ext = match order {
                            Order::Bdf1 => s.r[p],
                            Order::Bdf2 => 2.0 * s.r[p] - s.r_prev.as_ref().unwrap()[p],
                            Order::Cn => 1.5 * s.r[p] - 0.5 * s.r_prev.as_ref().unwrap()[p],
                        };
                        r_ext / gval[p]
                    })
                    .collect();
                let inc = increment(&candidate(&xi));
                let r = (0..np)
                    .map(|p| gs[p].forward((hist[p] + xi[p] * pair(p, &inc)) / lin).unwrap())
                    .collect();
                (xi, r)
            }
            OracleScheme::Energy => {
                let pot = &self.pots[0];
                let hf = match order {
                    Order::Bdf2 => 4.0 * pot.bulk(g, old) - pot.bulk(g, prev.unwrap()),
                    _ => pot.bulk(g, old),
                };
                let residual = |x: f64| {
                    let phi = candidate(&[x]);
                    lin * pot.bulk(g, &phi) - hf - x * pair(0, &increment(&phi))
                };
                let derivative = |x: f64| {
                    let phi = candidate(&[x]);
                    let d = pot.deriv(g, &phi);
                    let along: f64 = (0..nc).map(|i| g.inner(&d[i], &phi2[0][i])).sum();
                    lin * along - pair(0, &increment(&phi)) - x * coupling[0][0]
                };
                let x = solve_scalar(residual, derivative, 1.0, &cfg.scaled(base_scale(0, hf)))
                    .unwrap()
                    .x;
                (vec![x], vec![x * gval[0]])
            }
        };

        OracleState {
            phi: candidate(&xi),
            prev: Some(old.clone()),
            r,
            r_prev: Some(s.r.clone()),
            xi,
            t: s.t + dt,
        }
    }
}

/// `phi(x, y, t) = (sin 2x cos 2y / 4 + 0.48)(1 - sin²t / 2)` and its
/// Allen-Cahn source for `𝓛 = -coef Laplacian`, unit mobility.
pub struct DenseManufactured {
    pub shape: DVector<f64>,
    pub l_shape: DVector<f64>,
    pub eps2: f64,
}

impl DenseManufactured {
    pub fn new(g: &DenseGrid, coef: f64, eps2: f64) -> Self {
        let shape = g.sample(|x, y| 0.25 * (2.0 * x).sin() * (2.0 * y).cos() + 0.48);
        let l_shape = -coef * (&g.lap * &shape);
        Self { shape, l_shape, eps2 }
    }

    pub fn exact(&self, t: f64) -> DVector<f64> {
        (1.0 - 0.5 * t.sin().powi(2)) * &self.shape
    }

    pub fn source(&self, t: f64) -> DVector<f64> {
        let a = 1.0 - 0.5 * t.sin().powi(2);
        let da = -t.sin() * t.cos();
        let phi = self.exact(t);
        let fp = phi.map(|p| (p * p * p - p) / self.eps2);
        da * &self.shape + a * &self.l_shape + fp
    }
}

//! One small configuration per scheme kind, run side by side through the
//! library stepper and the dense reference.

use std::f64::consts::PI;

use gsav::harness::ManufacturedAc;
use gsav::models::{BcpParams, Component, LinearOperator, Mobility};
use gsav::schemes::Stencil;
use gsav::{GFunction, Grid, ModelSpec, Potential, SchemeKind, SpectralContext, Stepper};
use nalgebra::{DMatrix, DVector};

use super::{DenseComponent, DenseGrid, DenseManufactured, DenseModel, DensePotential, OracleScheme, Order};

pub struct Case {
    pub name: &'static str,
    pub grid: Grid,
    pub model: ModelSpec,
    pub pots: Vec<DensePotential>,
    pub kind: SchemeKind,
    pub scheme: OracleScheme,
    pub gs: &'static str,
    pub dt: f64,
    /// `eps2` of a manufactured Allen-Cahn source, if forced.
    pub manufactured: Option<f64>,
}

fn dense_components(g: &DenseGrid, model: &ModelSpec) -> Vec<DenseComponent> {
    let neg_lap = -&g.lap;
    model
        .components
        .iter()
        .map(|c| {
            let lin = match c.linear {
                LinearOperator::NegLaplacian { coef } => coef * &neg_lap,
                LinearOperator::Biharmonic { coef } => coef * (&g.lap * &g.lap),
                LinearOperator::NegLaplacianNonlocal { coef, sigma } => coef * &neg_lap + sigma * g.neg_lap_pinv(),
            };
            let mob: DMatrix<f64> = match c.mobility {
                Mobility::L2 { m } => m * g.identity(),
                Mobility::Hminus1 { m } => m * &neg_lap,
            };
            DenseComponent { lin, mob }
        })
        .collect()
}

fn initial(g: &DenseGrid, nc: usize) -> Vec<DVector<f64>> {
    let (x0, lx) = (g.grid.x_range().0, g.grid.lx());
    let (y0, ly) = (g.grid.y_range().0, g.grid.ly());
    (0..nc)
        .map(|i| {
            let s = i as f64;
            g.sample(|x, y| {
                let (x, y) = (2.0 * PI * (x - x0) / lx, 2.0 * PI * (y - y0) / ly);
                0.3 * (x + s).sin() * y.cos() + 0.2 * (2.0 * x - y).cos() - 0.15 * (3.0 * y + s).sin() + 0.1
            })
        })
        .collect()
}

fn ac(eps2: f64) -> ModelSpec {
    ModelSpec::allen_cahn(eps2).unwrap()
}

fn ch(eps2: f64) -> ModelSpec {
    ModelSpec::cahn_hilliard(eps2, 1.0).unwrap()
}

pub fn cases() -> Vec<Case> {
    let g = Grid::periodic_2pi(8).unwrap();
    let dw = |eps2| vec![DensePotential::DoubleWell { eps2 }];
    let bcp = BcpParams::default();
    let split = {
        let e = 0.5;
        let coeffs_a = vec![0.25 / e, 0.0, 0.0, 0.0, 0.25 / e];
        let coeffs_b = vec![0.0, 0.0, -0.5 / e];
        (
            ModelSpec::new(
                "split",
                vec![Component {
                    linear: LinearOperator::NegLaplacian { coef: 1.0 },
                    mobility: Mobility::L2 { m: 1.0 },
                }],
                vec![
                    Potential::Polynomial {
                        coeffs: coeffs_a.clone(),
                    },
                    Potential::Polynomial {
                        coeffs: coeffs_b.clone(),
                    },
                ],
            )
            .unwrap(),
            vec![
                DensePotential::Polynomial(coeffs_a),
                DensePotential::Polynomial(coeffs_b),
            ],
        )
    };
    vec![
        Case {
            name: "first-bdf1 allen-cahn pow:3",
            grid: g,
            model: ac(1.0),
            pots: dw(1.0),
            kind: SchemeKind::First(Stencil::Bdf1),
            scheme: OracleScheme::Implicit(Order::Bdf1),
            gs: "pow:3",
            dt: 1e-3,
            manufactured: None,
        },
        Case {
            name: "first-bdf2 cahn-hilliard tanh",
            grid: g,
            model: ch(0.1),
            pots: dw(0.1),
            kind: SchemeKind::First(Stencil::Bdf2),
            scheme: OracleScheme::Implicit(Order::Bdf2),
            gs: "tanh:10000",
            dt: 1e-3,
            manufactured: None,
        },
        Case {
            name: "first-cn manufactured allen-cahn exp",
            grid: g,
            model: ac(1.0),
            pots: dw(1.0),
            kind: SchemeKind::First(Stencil::CrankNicolson),
            scheme: OracleScheme::Implicit(Order::Cn),
            gs: "exp:10000",
            dt: 1e-2,
            manufactured: Some(1.0),
        },
        Case {
            name: "first-bdf2 two potentials",
            grid: g,
            model: split.0,
            pots: split.1,
            kind: SchemeKind::First(Stencil::Bdf2),
            scheme: OracleScheme::Implicit(Order::Bdf2),
            gs: "tanh:10000,pow:3",
            dt: 1e-2,
            manufactured: None,
        },
        Case {
            name: "first-bdf1 mbe pow:1/3",
            grid: Grid::square(8, 0.0, 2.0 * PI).unwrap(),
            model: ModelSpec::mbe(0.3, 1.0).unwrap(),
            pots: vec![DensePotential::Mbe],
            kind: SchemeKind::First(Stencil::Bdf1),
            scheme: OracleScheme::Implicit(Order::Bdf1),
            gs: "pow:1/3",
            dt: 1e-2,
            manufactured: None,
        },
        Case {
            name: "second-bdf1 cahn-hilliard sqrt",
            grid: g,
            model: ch(0.1),
            pots: dw(0.1),
            kind: SchemeKind::Second(Stencil::Bdf1),
            scheme: OracleScheme::Explicit(Order::Bdf1),
            gs: "sqrt:1",
            dt: 1e-3,
            manufactured: None,
        },
        Case {
            name: "second-bdf2 allen-cahn exp",
            grid: g,
            model: ac(0.5),
            pots: dw(0.5),
            kind: SchemeKind::Second(Stencil::Bdf2),
            scheme: OracleScheme::Explicit(Order::Bdf2),
            gs: "exp:10000",
            dt: 1e-2,
            manufactured: None,
        },
        Case {
            name: "second-cn cahn-hilliard pow:3",
            grid: g,
            model: ch(0.1),
            pots: dw(0.1),
            kind: SchemeKind::Second(Stencil::CrankNicolson),
            scheme: OracleScheme::Explicit(Order::Cn),
            gs: "pow:3",
            dt: 1e-3,
            manufactured: None,
        },
        Case {
            name: "third-bdf2 manufactured allen-cahn",
            grid: g,
            model: ac(1.0),
            pots: dw(1.0),
            kind: SchemeKind::ThirdBdf2,
            scheme: OracleScheme::Energy,
            gs: "tanh:10000",
            dt: 1e-2,
            manufactured: Some(1.0),
        },
        Case {
            name: "multi-cn block copolymer",
            grid: Grid::square(8, -1.0, 1.0).unwrap(),
            model: ModelSpec::bcp(&bcp).unwrap(),
            pots: vec![DensePotential::Bcp {
                alpha: bcp.alpha,
                beta: bcp.beta,
                gamma: bcp.gamma,
            }],
            kind: SchemeKind::MultiComponentCn,
            scheme: OracleScheme::Implicit(Order::Cn),
            gs: "exp:10000",
            dt: 1e-3,
            manufactured: None,
        },
        Case {
            name: "stabilized-cn allen-cahn",
            grid: g,
            model: ac(0.5),
            pots: dw(0.5),
            kind: SchemeKind::StabilizedCn { eps1: 1e-3, eps2: 1e-4 },
            scheme: OracleScheme::Stabilized { eps1: 1e-3, eps2: 1e-4 },
            gs: "tanh:10000",
            dt: 1e-2,
            manufactured: None,
        },
    ]
}

/// Largest discrepancy over `steps` steps, in fields (max norm), `xi` and
/// `r` (relative).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub field: f64,
    pub xi: f64,
    pub r: f64,
}

impl Discrepancy {
    pub fn max(&self) -> f64 {
        self.field.max(self.xi).max(self.r)
    }
}

pub fn compare(case: &Case, steps: usize) -> Discrepancy {
    let gs: Vec<GFunction> = case.gs.split(',').map(|s| s.parse().unwrap()).collect();
    let ctx = SpectralContext::new(case.grid);
    let dense = DenseGrid::new(case.grid);
    let dm = DenseModel {
        comps: dense_components(&dense, &case.model),
        pots: case.pots.clone(),
        grid: dense,
    };
    let lib_manufactured = case
        .manufactured
        .map(|_| ManufacturedAc::new(&ctx, &case.model).unwrap());
    let dense_manufactured = case
        .manufactured
        .map(|eps2| DenseManufactured::new(&dm.grid, 1.0, eps2));
    let dense_source = dense_manufactured.as_ref().map(|m| move |t: f64| vec![m.source(t)]);

    let nc = case.model.n_components();
    let phi0 = match &dense_manufactured {
        Some(m) => vec![m.exact(0.0)],
        None => initial(&dm.grid, nc),
    };
    let mut stepper = Stepper::new(&ctx, &case.model, &gs, case.kind).unwrap();
    if let Some(m) = &lib_manufactured {
        stepper = stepper.with_forcing(m);
    }
    let mut state = stepper
        .initial_state(phi0.iter().map(|v| dm.grid.to_field(v)).collect(), 0.0)
        .unwrap();
    let mut oracle = dm.initial(phi0, &gs);

    let mut d = Discrepancy {
        field: 0.0,
        xi: 0.0,
        r: 0.0,
    };
    for _ in 0..steps {
        state = stepper.step(&state, case.dt).unwrap();
        oracle = match &dense_source {
            Some(f) => dm.step(&oracle, case.dt, case.scheme, &gs, Some(f)),
            None => dm.step(&oracle, case.dt, case.scheme, &gs, None),
        };
        for (f, v) in state.phi().iter().zip(&oracle.phi) {
            d.field = d.field.max((&dm.grid.from_field(f) - v).amax());
        }
        for (a, b) in state.xi().iter().zip(&oracle.xi) {
            d.xi = d.xi.max((a - b).abs() / b.abs().max(1.0));
        }
        for (a, b) in state.r().iter().zip(&oracle.r) {
            d.r = d.r.max((a - b).abs() / b.abs().max(1e-300));
        }
    }
    d
}

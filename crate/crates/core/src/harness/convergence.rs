//! Error and observed order over a ladder of step sizes.

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralContext};

use super::config::RunConfig;
use super::manufactured::ManufacturedAc;
use super::run::simulate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// The manufactured solution at `t_final`.
    Exact,
    /// A run of the same configuration with this step size.
    Fine(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    /// Max-norm error of the fields at `t_final`.
    pub error: f64,
    /// `log(e_prev / e) / log(dt_prev / dt)`; `None` on the first row.
    pub order: Option<f64>,
    pub max_xi_deviation: f64,
}

fn quiet(config: &RunConfig, dt: f64) -> RunConfig {
    let mut c = config.clone();
    c.dt = dt;
    c.adaptive = None;
    c.output.write = false;
    c.output.diag_every = 0;
    c
}

fn max_error(a: &[Field], b: &[Field]) -> Result<f64> {
    a.iter()
        .zip(b)
        .try_fold(0.0f64, |m, (x, y)| Ok(m.max(x.max_abs_diff(y)?)))
}

pub fn measure_convergence(config: &RunConfig, dts: &[f64], reference: Reference) -> Result<Vec<ConvergenceRow>> {
    if dts.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    for w in dts.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Config(format!("step sizes must decrease strictly: {dts:?}")));
        }
    }
    for &dt in dts {
        let ratio = config.t_final / dt;
        if !(dt > 0.0) || (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
            return Err(Error::Config(format!(
                "dt = {dt:e} does not divide t_final = {}",
                config.t_final
            )));
        }
    }
    let target: Vec<Field> = match reference {
        Reference::Exact => {
            let ctx = SpectralContext::new(config.grid()?);
            let model = config.model()?;
            vec![ManufacturedAc::new(&ctx, &model)?.exact(config.t_final)]
        }
        Reference::Fine(dt) => simulate(&quiet(config, dt))?.final_state.phi().to_vec(),
    };
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dts.len());
    for &dt in dts {
        let run = simulate(&quiet(config, dt))?;
        let error = max_error(run.final_state.phi(), &target)?;
        let order = rows.last().map(|p| (p.error / error).ln() / (p.dt / dt).ln());
        log::info!("dt = {dt:e}: error {error:e}, order {order:?}");
        rows.push(ConvergenceRow {
            dt,
            error,
            order,
            max_xi_deviation: run.max_xi_deviation,
        });
    }
    Ok(rows)
}

/// `(dt, error, order)` as CSV text.
pub fn format_table(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("dt,error,order,max_xi_deviation\n");
    for r in rows {
        let order = r.order.map(|o| format!("{o:.4}")).unwrap_or_default();
        s.push_str(&format!("{:e},{:e},{order},{:e}\n", r.dt, r.error, r.max_xi_deviation));
    }
    s
}

//! Runs one configuration under several `G` functions and compares them.

use crate::diagnostics::audit_monotone;
use crate::error::{Error, Result};
use crate::grid::{inner_raw, Field};

use super::config::RunConfig;
use super::run::{simulate, RunSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub labels: Vec<String>,
    /// `(i, j, ||phi_i - phi_j|| / max(||phi_i||, ||phi_j||))` at `t_final`.
    pub pairwise: Vec<(usize, usize, f64)>,
    pub max_pairwise: f64,
    /// Largest `(max - min) / |mean|` of the original energies across variants
    /// at a common record.
    pub energy_spread: f64,
    /// Whether each variant's modified energy passed the monotonicity audit.
    pub monotone: Vec<bool>,
}

fn norm(fields: &[Field]) -> f64 {
    fields
        .iter()
        .map(|f| inner_raw(f.grid(), f.values(), f.values()))
        .sum::<f64>()
        .sqrt()
}

/// Relative L2 distance between two sets of fields.
pub fn relative_l2(a: &[Field], b: &[Field]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let diff: Vec<Field> = a.iter().zip(b).map(|(x, y)| x.axpby(1.0, -1.0, y)).collect();
    let scale = norm(a).max(norm(b));
    Ok(if scale > 0.0 { norm(&diff) / scale } else { 0.0 })
}

fn label_dir(label: &str) -> String {
    label.replace([':', '/'], "_")
}

pub fn compare_g_variants(base: &RunConfig, g_list: &[String]) -> Result<CompareReport> {
    if g_list.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let two_level = base.scheme_kind()?.is_two_level();
    let mut runs: Vec<RunSummary> = Vec::with_capacity(g_list.len());
    for g in g_list {
        let mut c = base.clone();
        c.g = g.clone();
        c.output.dir = format!("{}/{}", base.output.dir, label_dir(g));
        c.output.diag_every = c.output.diag_every.max(1);
        log::info!("running G = {g}");
        runs.push(simulate(&c)?);
    }
    let mut pairwise = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let d = relative_l2(runs[i].final_state.phi(), runs[j].final_state.phi())?;
            pairwise.push((i, j, d));
        }
    }
    let n_rec = runs.iter().map(|r| r.records.len()).min().unwrap_or(0);
    let mut energy_spread = 0.0f64;
    for k in 0..n_rec {
        let e: Vec<f64> = runs.iter().map(|r| r.records[k].e_original).collect();
        let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = e.iter().sum::<f64>() / e.len() as f64;
        if mean != 0.0 {
            energy_spread = energy_spread.max((max - min) / mean.abs());
        }
    }
    let monotone = runs
        .iter()
        .map(|r| audit_monotone(&r.audited_energies(two_level), 1e-9).passed())
        .collect();
    Ok(CompareReport {
        labels: g_list.to_vec(),
        max_pairwise: pairwise.iter().map(|p| p.2).fold(0.0, f64::max),
        pairwise,
        energy_spread,
        monotone,
    })
}

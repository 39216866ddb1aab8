//! Deterministic initial data.
//!
//! Random samples come from SplitMix64 used as a counter-based generator:
//! sample `i` of stream `s` under seed `k` is
//! `mix64(key + (i + 1) * 0x9E3779B97F4A7C15)` with
//! `key = k + s * 0xD1B54A32D192ED03`, and the top 53 bits give a uniform
//! value in `[0, 1)`. Any sample can be regenerated on its own.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM: u64 = 0xD1B5_4A32_D192_ED03;

/// The SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform sample in `[0, 1)`.
pub fn uniform(seed: u64, stream: u64, index: u64) -> f64 {
    let key = seed.wrapping_add(stream.wrapping_mul(STREAM));
    let bits = mix64(key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_field(grid: Grid, seed: u64, stream: u64, lo: f64, hi: f64) -> Vec<f64> {
    (0..grid.len() as u64)
        .map(|i| lo + (hi - lo) * uniform(seed, stream, i))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialKind {
    /// `mean + amplitude * (rand - mean(rand))` with `rand` uniform in `[-1, 1]`.
    Spinodal {
        mean: f64,
        amplitude: f64,
    },
    /// Two fields, uniform in `[-1, 1]`, shifted to zero mean and rescaled
    /// back into `[-1, 1]` when the shift pushed a sample outside.
    Bcp,
    /// Uniform in `[-amplitude, amplitude]`.
    Mbe {
        amplitude: f64,
    },
    Constant(f64),
}

impl InitialKind {
    /// Reads `kind`, `mean` and `amplitude` from the configuration.
    pub fn from_config(kind: &str, mean: Option<f64>, amplitude: Option<f64>) -> Result<Self> {
        Ok(match kind {
            "spinodal" => InitialKind::Spinodal {
                mean: mean.unwrap_or(0.03),
                amplitude: amplitude.unwrap_or(0.001),
            },
            "bcp" => InitialKind::Bcp,
            "mbe" => InitialKind::Mbe {
                amplitude: amplitude.unwrap_or(0.001),
            },
            "constant" => InitialKind::Constant(mean.unwrap_or(0.0)),
            other => return Err(Error::Config(format!("unknown initial condition {other:?}"))),
        })
    }
}

/// `n_fields` initial fields of `kind`; field `c` draws from stream `c`.
pub fn make_initial(kind: InitialKind, grid: Grid, seed: u64, n_fields: usize) -> Vec<Field> {
    (0..n_fields as u64)
        .map(|s| {
            let values = match kind {
                InitialKind::Spinodal { mean, amplitude } => {
                    let mut v = uniform_field(grid, seed, s, -1.0, 1.0);
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter_mut().for_each(|x| *x = mean + amplitude * (*x - m));
                    v
                }
                InitialKind::Bcp => {
                    let mut v = uniform_field(grid, seed, s, -1.0, 1.0);
                    let m = v.iter().sum::<f64>() / v.len() as f64;
                    v.iter_mut().for_each(|x| *x -= m);
                    let sup = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
                    v.iter_mut().for_each(|x| *x /= sup);
                    v
                }
                InitialKind::Mbe { amplitude } => uniform_field(grid, seed, s, -amplitude, amplitude),
                InitialKind::Constant(c) => vec![c; grid.len()],
            };
            Field::new(grid, values).expect("finite samples")
        })
        .collect()
}

//! Invertible scalar maps `G` used to define the auxiliary variable
//! `r = G(∫F dx)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default scale for the mapped tanh and mapped exponential variants.
pub const DEFAULT_SCALE: f64 = 1e4;

/// Margin kept from `±1` when inverting the mapped tanh.
const TANH_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerExponent {
    /// `G(x) = x^3`
    Cube,
    /// `G(x) = x^(1/3)`, real signed root.
    CubeRoot,
}

/// A strictly increasing, invertible map `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GFunction {
    /// `G(x) = sqrt(x + c)`
    SqrtShift {
        c: f64,
    },
    Power(PowerExponent),
    /// `G(x) = tanh(x / c)`
    TanhScaled {
        c: f64,
    },
    /// `G(x) = exp(x / c)`
    ExpScaled {
        c: f64,
    },
}

impl GFunction {
    pub fn forward(&self, x: f64) -> Result<f64> {
        match *self {
            GFunction::SqrtShift { c } => {
                if x + c <= 0.0 {
                    Err(Error::DomainError { g: *self, x })
                } else {
                    Ok((x + c).sqrt())
                }
            }
            GFunction::Power(PowerExponent::Cube) => Ok(x * x * x),
            GFunction::Power(PowerExponent::CubeRoot) => Ok(x.cbrt()),
            GFunction::TanhScaled { c } => Ok((x / c).tanh()),
            GFunction::ExpScaled { c } => Ok((x / c).exp()),
        }
    }

    fn check_range(&self, r: f64) -> Result<()> {
        let bound = match *self {
            GFunction::SqrtShift { .. } if r < 0.0 => "r >= 0",
            GFunction::TanhScaled { .. } if !(r.abs() < 1.0 - TANH_MARGIN) => "|r| < 1 - 1e-12",
            GFunction::ExpScaled { .. } if !(r > 0.0) => "r > 0",
            _ if !r.is_finite() => "finite r",
            _ => return Ok(()),
        };
        Err(Error::RangeError { g: *self, r, bound })
    }

    pub fn inverse(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(match *self {
            GFunction::SqrtShift { c } => r * r - c,
            GFunction::Power(PowerExponent::Cube) => r.cbrt(),
            GFunction::Power(PowerExponent::CubeRoot) => r * r * r,
            GFunction::TanhScaled { c } => c * r.atanh(),
            GFunction::ExpScaled { c } => c * r.ln(),
        })
    }

    /// `d/dr G^{-1}(r)`.
    pub fn inverse_derivative(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(match *self {
            GFunction::SqrtShift { .. } => 2.0 * r,
            GFunction::Power(PowerExponent::Cube) => {
                if r == 0.0 {
                    return Err(Error::SingularDerivative { g: *self, r });
                }
                1.0 / (3.0 * r.abs().powf(2.0 / 3.0))
            }
            GFunction::Power(PowerExponent::CubeRoot) => 3.0 * r * r,
            GFunction::TanhScaled { c } => c / (1.0 - r * r),
            GFunction::ExpScaled { c } => c / r,
        })
    }

    fn validate(self) -> Result<Self> {
        let c = match self {
            GFunction::SqrtShift { c } | GFunction::TanhScaled { c } | GFunction::ExpScaled { c } => c,
            GFunction::Power(_) => return Ok(self),
        };
        if c > 0.0 && c.is_finite() {
            Ok(self)
        } else {
            Err(Error::Config(format!("G constant must be positive, got {c}")))
        }
    }
}

impl fmt::Display for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GFunction::SqrtShift { c } => write!(f, "sqrt:{c}"),
            GFunction::Power(PowerExponent::Cube) => write!(f, "pow:3"),
            GFunction::Power(PowerExponent::CubeRoot) => write!(f, "pow:1/3"),
            GFunction::TanhScaled { c } => write!(f, "tanh:{c}"),
            GFunction::ExpScaled { c } => write!(f, "exp:{c}"),
        }
    }
}

impl FromStr for GFunction {
    type Err = Error;

    /// Parses `sqrt:C`, `pow:3`, `pow:1/3`, `tanh[:C]`, `exp[:C]`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s, None),
        };
        let constant = |default: Option<f64>| -> Result<f64> {
            match arg {
                Some(a) => a
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad G constant in {s:?}"))),
                None => default.ok_or_else(|| Error::Config(format!("{s:?} needs a constant"))),
            }
        };
        let g = match kind {
            "sqrt" => GFunction::SqrtShift { c: constant(None)? },
            "tanh" => GFunction::TanhScaled {
                c: constant(Some(DEFAULT_SCALE))?,
            },
            "exp" => GFunction::ExpScaled {
                c: constant(Some(DEFAULT_SCALE))?,
            },
            "pow" => match arg {
                Some("3") => GFunction::Power(PowerExponent::Cube),
                Some("1/3") => GFunction::Power(PowerExponent::CubeRoot),
                _ => return Err(Error::Config(format!("unsupported power in {s:?}"))),
            },
            _ => return Err(Error::Config(format!("unknown G function {s:?}"))),
        };
        g.validate()
    }
}

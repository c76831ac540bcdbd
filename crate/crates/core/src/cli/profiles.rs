//! Built-in source profiles.

use super::CliError;
use crate::error::Result;
use crate::fracops::{TimeGrid, TimeSeries};
use crate::spectral::{Domain1D, SpectralField};
use serde::Deserialize;
use std::f64::consts::PI;

/// Spatial factor g. Centers and widths are fractions of the interval
/// length.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum GProfile {
    /// amplitude·φ_n
    Mode {
        n: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// amplitude·sin²(π(x − left)/width) on its support
    SineBump {
        #[serde(default = "mid")]
        center: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// piecewise-linear tent
    Hat {
        #[serde(default = "mid")]
        center: f64,
        #[serde(default = "half")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// sine bump placed off-center, for observation points outside supp g
    OffsetBump {
        #[serde(default = "offset_center")]
        center: f64,
        #[serde(default = "offset_width")]
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

impl Default for GProfile {
    fn default() -> Self {
        GProfile::SineBump {
            center: 0.5,
            width: 1.0,
            amplitude: 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn mid() -> f64 {
    0.5
}

fn offset_center() -> f64 {
    0.7
}

fn offset_width() -> f64 {
    0.3
}

fn support_ok(center: f64, width: f64) -> bool {
    width > 0.0 && center - 0.5 * width >= -1e-12 && center + 0.5 * width <= 1.0 + 1e-12
}

fn sine_bump(x: f64, center: f64, width: f64) -> f64 {
    let s = (x - (center - 0.5 * width)) / width;
    if (0.0..=1.0).contains(&s) {
        (PI * s).sin().powi(2)
    } else {
        0.0
    }
}

impl GProfile {
    pub fn validate(&self, _length: f64) -> std::result::Result<(), CliError> {
        let bad = |msg: &str| {
            Err(CliError::Validation {
                key: "g".into(),
                msg: msg.into(),
            })
        };
        match *self {
            GProfile::Mode { n, amplitude } => {
                if n == 0 {
                    return bad("mode index starts at 1");
                }
                if !amplitude.is_finite() {
                    return bad("amplitude must be finite");
                }
            }
            GProfile::SineBump { center, width, amplitude }
            | GProfile::Hat { center, width, amplitude }
            | GProfile::OffsetBump { center, width, amplitude } => {
                if !support_ok(center, width) {
                    return bad("support [center - width/2, center + width/2] must fit in [0, 1]");
                }
                if !amplitude.is_finite() {
                    return bad("amplitude must be finite");
                }
            }
        }
        Ok(())
    }

    /// Value at x, in absolute coordinates on (0, L).
    pub fn value(&self, x: f64, domain: &Domain1D) -> f64 {
        let l = domain.length();
        let s = x / l;
        match *self {
            GProfile::Mode { n, amplitude } => amplitude * domain.eigenfunction(n, x),
            GProfile::SineBump { center, width, amplitude }
            | GProfile::OffsetBump { center, width, amplitude } => amplitude * sine_bump(s, center, width),
            GProfile::Hat { center, width, amplitude } => {
                amplitude * (1.0 - (s - center).abs() / (0.5 * width)).max(0.0)
            }
        }
    }

    /// Support (a, b) in absolute coordinates.
    pub fn support(&self, domain: &Domain1D) -> (f64, f64) {
        let l = domain.length();
        match *self {
            GProfile::Mode { .. } => (0.0, l),
            GProfile::SineBump { center, width, .. }
            | GProfile::Hat { center, width, .. }
            | GProfile::OffsetBump { center, width, .. } => {
                ((center - 0.5 * width).max(0.0) * l, (center + 0.5 * width).min(1.0) * l)
            }
        }
    }

    pub fn field(&self, domain: Domain1D) -> Result<SpectralField> {
        if let GProfile::Mode { n, amplitude } = *self {
            if n > domain.n_modes() {
                return Err(crate::error::Error::InvalidParameter {
                    name: "g",
                    reason: format!("mode {n} exceeds n_modes = {}", domain.n_modes()),
                });
            }
            return Ok(SpectralField::mode(domain, n)?.scaled(amplitude));
        }
        let m = domain.min_mesh_intervals().max(8 * domain.n_modes());
        let samples: Vec<f64> = domain.mesh(m).iter().map(|&x| self.value(x, &domain)).collect();
        SpectralField::project(&samples, domain)
    }
}

/// Temporal factor ρ. Times are scaled by T.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhoProfile {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// a + b·t/T
    Affine {
        #[serde(default = "one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    /// offset + amplitude·sin(frequency·πt/T)
    Sine {
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        offset: f64,
    },
    /// cos(changes·πt/T): exactly `changes` sign changes on (0, T)
    SignAlternating { changes: usize },
    /// Σ c_i (t/T)^i
    Polynomial { coeffs: Vec<f64> },
}

impl Default for RhoProfile {
    fn default() -> Self {
        RhoProfile::Affine { a: 1.0, b: 1.0 }
    }
}

impl RhoProfile {
    pub fn validate(&self) -> std::result::Result<(), CliError> {
        let finite = match self {
            RhoProfile::Constant { value } => value.is_finite(),
            RhoProfile::Affine { a, b } => a.is_finite() && b.is_finite(),
            RhoProfile::Sine {
                frequency,
                amplitude,
                offset,
            } => frequency.is_finite() && amplitude.is_finite() && offset.is_finite(),
            RhoProfile::SignAlternating { .. } => true,
            RhoProfile::Polynomial { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
        };
        if finite {
            Ok(())
        } else {
            Err(CliError::Validation {
                key: "rho".into(),
                msg: "parameters must be finite (polynomial needs at least one coefficient)".into(),
            })
        }
    }

    pub fn value(&self, t: f64, t_final: f64) -> f64 {
        let s = t / t_final;
        match self {
            RhoProfile::Constant { value } => *value,
            RhoProfile::Affine { a, b } => a + b * s,
            RhoProfile::Sine {
                frequency,
                amplitude,
                offset,
            } => offset + amplitude * (frequency * PI * s).sin(),
            RhoProfile::SignAlternating { changes } => (*changes as f64 * PI * s).cos(),
            RhoProfile::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c),
        }
    }

    pub fn series(&self, grid: TimeGrid) -> TimeSeries {
        let tf = grid.t_final();
        TimeSeries::from_fn(grid, |t| self.value(t, tf))
    }
}

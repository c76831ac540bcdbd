//! Two-parameter Mittag-Leffler function E_{α,β}(z) on the non-positive real
//! axis (plus a small guard interval 0 < z ≤ 1).
//!
//! Evaluation regimes are selected by s = |z|^{1/α}, which measures how much
//! cancellation the power series suffers (the largest term is about e^s):
//!
//! * s small: the power series in f64 with compensated summation, accepted
//!   only when a running error estimate says the cancellation is harmless;
//! * otherwise up to [`S_ASYMPTOTIC`]: the same series in double-double;
//! * beyond: the algebraic asymptotic expansion, plus the exponentially
//!   decaying oscillatory terms when α ≥ 1.

mod dd;
mod gamma;

pub use gamma::{gamma, ln_gamma, rgamma};

use dd::Dd;
use std::f64::consts::PI;
use std::sync::OnceLock;
use thiserror::Error;

/// Hard cap on series terms in any regime.
pub const MAX_TERMS: usize = 10_000;

/// Switch from the power series to the asymptotic expansion, in units of
/// s = η^{1/α}, for 0 < α < 1 and 1 < α < 2. Near s = 34 the series has
/// lost about 18 of the 32 double-double digits to cancellation and the
/// asymptotic remainder is about e^{-34}; both sit near 1e-12 relative.
pub const S_ASYMPTOTIC: f64 = 34.0;

/// Same switch for α = 1, where the value itself is as small as e^{-s}.
pub const S_ASYMPTOTIC_EXP: f64 = 18.0;

/// Largest s for which the plain f64 series is even attempted.
const S_F64_ATTEMPT: f64 = 12.0;

/// Accept the f64 series when its estimated relative error is below this.
const F64_ACCEPT: f64 = 2e-13;

const SERIES_RTOL: f64 = 1e-17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("invalid Mittag-Leffler parameters alpha={alpha}, beta={beta}: need 0 < alpha < 2, beta > 0")]
    InvalidParams { alpha: f64, beta: f64 },
    #[error("argument z={0} is not finite")]
    NonFinite(f64),
    #[error("argument z={0} > 1 is outside the supported range")]
    PositiveArgument(f64),
    #[error("series did not converge within {MAX_TERMS} terms at z={0}")]
    TermCap(f64),
}

/// Validated (α, β) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    alpha: f64,
    beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, MlError> {
        if !(alpha > 0.0 && alpha < 2.0 && beta > 0.0 && beta.is_finite()) {
            return Err(MlError::InvalidParams { alpha, beta });
        }
        Ok(MlParams { alpha, beta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn s_asymptotic(&self) -> f64 {
        if self.alpha == 1.0 {
            S_ASYMPTOTIC_EXP
        } else {
            S_ASYMPTOTIC
        }
    }
}

/// E_{α,β}(z) for z ≤ 0, or 0 < z ≤ 1.
pub fn ml_eval(p: &MlParams, z: f64) -> Result<f64, MlError> {
    eval_with(p, z, || &[])
}

/// Power series evaluation, always in the most accurate available precision
/// (double-double). Exposed for cross-checking the regimes against each other.
pub fn ml_series(p: &MlParams, z: f64) -> Result<f64, MlError> {
    if !z.is_finite() {
        return Err(MlError::NonFinite(z));
    }
    if z > 1.0 {
        return Err(MlError::PositiveArgument(z));
    }
    series_dd(p, z, &[])
}

/// Asymptotic expansion of E_{α,β}(-η) for large η > 0.
///
/// The algebraic part −Σ_{k≥1} (−η)^{−k}/Γ(β−αk) is truncated at its
/// smallest term. For α ≥ 1 the oscillatory exponential contributions are
/// added; for α = 1 only the single real exponential survives, with half the
/// weight of the pair that appears for α > 1.
pub fn ml_asymptotic(p: &MlParams, eta: f64) -> Result<f64, MlError> {
    if !eta.is_finite() {
        return Err(MlError::NonFinite(-eta));
    }
    let (a, b) = (p.alpha, p.beta);
    let ln_eta = eta.ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut prev_bound = f64::INFINITY;
    for k in 1..=MAX_TERMS {
        let kf = k as f64;
        // |1/Γ(β−αk)| ≤ Γ(αk+1−β)/π by reflection; used as the term envelope
        // so that exact zeros of 1/Γ do not end the loop early.
        // The envelope may also rise near poles of Γ at small k; only a rise
        // past the minimum of Γ marks the optimal truncation point.
        let lg = ln_gamma(kf * a + 1.0 - b).max(0.0);
        let bound = (lg - kf * ln_eta).exp();
        if bound > prev_bound && kf * a + 1.0 - b > 2.0 {
            break;
        }
        prev_bound = bound;
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        let term = sign * rgamma(b - a * kf) * (-kf * ln_eta).exp();
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if bound < SERIES_RTOL * (sum + comp).abs() || bound < 1e-300 {
            break;
        }
        if k == MAX_TERMS {
            return Err(MlError::TermCap(-eta));
        }
    }
    let mut value = sum + comp;
    if a >= 1.0 {
        let s = eta.powf(1.0 / a);
        let amp = ((1.0 - b) / a * ln_eta + s * (PI / a).cos()).exp();
        let phase = PI * (1.0 - b) / a + s * (PI / a).sin();
        if a == 1.0 {
            value += amp * (PI * (1.0 - b)).cos();
        } else {
            value += 2.0 / a * amp * phase.cos();
        }
    }
    Ok(value)
}

/// Empirical decay constant max_η |E_{α,β}(−η)|·(1+η) over a grid.
pub fn ml_decay_constant(p: &MlParams, eta_grid: &[f64]) -> Result<f64, MlError> {
    let mut c: f64 = 0.0;
    for &eta in eta_grid {
        if !(eta >= 0.0) {
            return Err(MlError::NonFinite(-eta));
        }
        c = c.max(ml_eval(p, -eta)?.abs() * (1.0 + eta));
    }
    Ok(c)
}

/// True once the term index is past the peak of |z|^k/Γ(αk+β) and past the
/// minimum of Γ, so that subsequent terms only shrink.
fn past_peak(p: &MlParams, k: usize, s: f64) -> bool {
    let x = p.alpha * k as f64 + p.beta;
    x > s && x > 2.0
}

/// f64 power series with compensated summation. Returns the value and an
/// estimate of its absolute error, dominated by the rounding of the largest
/// terms when the sum cancels.
fn series_f64(p: &MlParams, z: f64) -> Result<(f64, f64), MlError> {
    let eta = z.abs();
    let neg = z < 0.0;
    let ln_eta = eta.ln();
    let s = eta.powf(1.0 / p.alpha);
    let mut acc = Dd::new(rgamma(p.beta));
    let mut err = acc.hi.abs() * 1e-15;
    for k in 1..=MAX_TERMS {
        let x = p.alpha * k as f64 + p.beta;
        let (lg, sg) = gamma::ln_gamma_signed(x);
        let e = k as f64 * ln_eta - lg;
        let mag = e.exp();
        let sign = if neg && k % 2 == 1 { -sg } else { sg };
        acc = acc + Dd::new(sign * mag);
        err += mag * (1e-15 + f64::EPSILON * (e.abs() + lg.abs()));
        if past_peak(p, k, s) && (mag < SERIES_RTOL * acc.hi.abs() || mag < 1e-300) {
            return Ok((acc.to_f64(), err));
        }
    }
    Err(MlError::TermCap(z))
}

/// 1/Γ(αk+β) in double-double, each from its own ln Γ so that no error
/// accumulates along k.
fn dd_coefficient(p: &MlParams, k: usize) -> Dd {
    let x = Dd::from_prod(p.alpha, k as f64) + Dd::new(p.beta);
    (-x.ln_gamma()).exp()
}

/// Power series in double-double. Coefficients come from `table` while it
/// lasts and are computed on the fly after that.
fn series_dd(p: &MlParams, z: f64, table: &[Dd]) -> Result<f64, MlError> {
    if z == 0.0 {
        return Ok(rgamma(p.beta));
    }
    let eta = z.abs();
    let s = eta.powf(1.0 / p.alpha);
    let mut pow = Dd::ONE;
    let mut acc = Dd::ZERO;
    for k in 0..=MAX_TERMS {
        if k > 0 {
            pow = pow.mul_f64(z);
        }
        let c = match table.get(k) {
            Some(&c) => c,
            None => dd_coefficient(p, k),
        };
        let term = pow * c;
        acc = acc + term;
        let mag = term.hi.abs();
        if k > 0 && past_peak(p, k, s) && (mag < SERIES_RTOL * acc.hi.abs() || mag < 1e-300) {
            return Ok(acc.to_f64());
        }
    }
    Err(MlError::TermCap(z))
}

/// Largest s covered by the coefficient table of [`MittagLeffler`].
const S_TABLE: f64 = 50.0;

/// E_{α,β} with a fixed parameter pair, caching the double-double series
/// coefficients on first use. Use this for repeated evaluation (solvers
/// call it for every mode and time node); [`ml_eval`] gives identical results.
#[derive(Debug)]
pub struct MittagLeffler {
    p: MlParams,
    table: OnceLock<Vec<Dd>>,
}

impl MittagLeffler {
    pub fn new(p: MlParams) -> Self {
        MittagLeffler {
            p,
            table: OnceLock::new(),
        }
    }

    pub fn params(&self) -> &MlParams {
        &self.p
    }

    pub fn eval(&self, z: f64) -> Result<f64, MlError> {
        eval_with(&self.p, z, || self.table())
    }

    fn table(&self) -> &[Dd] {
        self.table.get_or_init(|| {
            // enough terms for every |z| with s ≤ S_TABLE: stop once past the
            // peak and below 1e-40 of the first term
            let p = &self.p;
            let ln_eta = p.alpha * S_TABLE.ln();
            let mut out = Vec::new();
            for k in 0..MAX_TERMS {
                out.push(dd_coefficient(p, k));
                let x = p.alpha * k as f64 + p.beta;
                if x > S_TABLE + 2.0 && k as f64 * ln_eta - ln_gamma(x) < -92.0 {
                    break;
                }
            }
            out
        })
    }
}

fn eval_with<'a>(p: &MlParams, z: f64, table: impl FnOnce() -> &'a [Dd]) -> Result<f64, MlError> {
    if !z.is_finite() {
        return Err(MlError::NonFinite(z));
    }
    if z > 1.0 {
        return Err(MlError::PositiveArgument(z));
    }
    if z == 0.0 {
        return Ok(rgamma(p.beta));
    }
    if z > 0.0 {
        return series_f64(p, z).map(|(v, _)| v);
    }
    let eta = -z;
    let s = eta.powf(1.0 / p.alpha);
    if s > p.s_asymptotic() {
        return ml_asymptotic(p, eta);
    }
    if s <= S_F64_ATTEMPT {
        let (v, err) = series_f64(p, z)?;
        if err <= F64_ACCEPT * v.abs() {
            return Ok(v);
        }
    }
    series_dd(p, z, table())
}

use super::profiles::{GProfile, RhoProfile};
use super::CliError;
use serde::Deserialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Forward,
    InvertRhoVolterra,
    InvertRhoFixedpoint,
    InvertGFinal,
    InvertGInterior,
    MlEval,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    /// L1 derivative of t² against the exact value
    Caputo,
    /// modal solution driven by φ_1·t² against the series solution
    Forward,
    /// normalized Duhamel residual for the configured g and ρ
    Duhamel,
    /// Volterra reconstruction error for the configured g and ρ
    Volterra,
    /// Volterra reconstruction error against the observation point
    X0Distance,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub k: Option<f64>,
    pub beta: f64,
    pub mu: Option<f64>,
    pub delta: f64,
    pub tol: f64,
    pub m_max: usize,
    pub mollify_width: usize,
    pub k_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            k: None,
            beta: 1e-10,
            mu: None,
            delta: 0.0,
            tol: 1e-10,
            m_max: 50,
            mollify_width: 5,
            k_iters: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlConfig {
    /// defaults to the top-level alpha
    pub alpha: Option<f64>,
    pub beta: f64,
    pub z: Vec<f64>,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            alpha: None,
            beta: 1.0,
            z: vec![-1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub target: SweepTarget,
    pub n_steps: Vec<usize>,
    pub x0: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            target: SweepTarget::Caputo,
            n_steps: vec![64, 128, 256, 512],
            x0: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "one")]
    pub t_final: f64,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default)]
    pub g: GProfile,
    #[serde(default)]
    pub rho: RhoProfile,
    pub x0: Option<f64>,
    pub omega: Option<(f64, f64)>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub ml: MlConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_output")]
    pub output: String,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn default_modes() -> usize {
    crate::spectral::DEFAULT_MODES
}

fn default_steps() -> usize {
    256
}

fn default_output() -> String {
    "fracsource_out.csv".into()
}

/// Parse a JSON config and apply `key=value` overrides. Dotted keys reach
/// into nested tables; values are read as JSON and fall back to strings.
pub fn load(text: &str, overrides: &[String]) -> Result<ExperimentConfig, CliError> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        key: "config".into(),
        msg: e.to_string(),
    })?;
    if !root.is_object() {
        return Err(CliError::Parse {
            key: "config".into(),
            msg: "top level must be an object".into(),
        });
    }
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    serde_json::from_value(root).map_err(|e| {
        let msg = e.to_string();
        let key = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "config".into());
        CliError::Parse { key, msg }
    })
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| CliError::Parse {
        key: assignment.into(),
        msg: "override must look like key=value".into(),
    })?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| CliError::Parse {
            key: key.into(),
            msg: format!("`{}` is not a table", parts[..i].join(".")),
        })?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn check(ok: bool, key: &str, msg: impl Into<String>) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation {
            key: key.into(),
            msg: msg.into(),
        })
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check(self.length > 0.0 && self.length.is_finite(), "length", "must be positive")?;
        check(self.n_modes >= 1, "n_modes", "must be at least 1")?;
        check(self.t_final > 0.0 && self.t_final.is_finite(), "t_final", "must be positive")?;
        check(self.n_steps >= 2, "n_steps", "must be at least 2")?;
        if self.mode == Mode::MlEval {
            let a = self.ml.alpha.unwrap_or(self.alpha);
            check(a > 0.0 && a <= 2.0, "ml.alpha", "must lie in (0, 2]")?;
            check(self.ml.beta > 0.0 && self.ml.beta.is_finite(), "ml.beta", "must be positive")?;
            check(!self.ml.z.is_empty(), "ml.z", "needs at least one argument")?;
            check(self.ml.z.iter().all(|z| z.is_finite()), "ml.z", "arguments must be finite")?;
            return Ok(());
        }
        check(self.alpha > 0.0 && self.alpha < 1.0, "alpha", "must lie in (0, 1)")?;
        check(self.noise_level >= 0.0 && self.noise_level.is_finite(), "noise_level", "must be >= 0")?;
        let s = &self.solver;
        check(s.k.map_or(true, |k| k > 0.0), "solver.k", "must be positive")?;
        check(s.beta > 0.0, "solver.beta", "must be positive")?;
        check(s.mu.map_or(true, |m| m >= 0.0), "solver.mu", "must be >= 0")?;
        check(s.delta >= 0.0, "solver.delta", "must be >= 0")?;
        check(s.tol >= 0.0, "solver.tol", "must be >= 0")?;
        check(s.m_max >= 1, "solver.m_max", "must be at least 1")?;
        check(s.k_iters >= 5, "solver.k_iters", "must be at least 5")?;
        self.g.validate(self.length)?;
        self.rho.validate()?;
        let needs_x0 = matches!(self.mode, Mode::InvertRhoVolterra | Mode::InvertRhoFixedpoint)
            || (self.mode == Mode::Sweep && self.sweep.target == SweepTarget::Volterra);
        if needs_x0 {
            check(self.x0.is_some(), "x0", "required for this mode")?;
            check(self.n_steps >= 3, "n_steps", "must be at least 3 for point inversion")?;
        }
        if let Some(x0) = self.x0 {
            check(x0 > 0.0 && x0 < self.length, "x0", "must lie strictly inside (0, length)")?;
        }
        if self.mode == Mode::InvertGInterior {
            let (a, b) = self.omega.ok_or_else(|| CliError::Validation {
                key: "omega".into(),
                msg: "required for this mode".into(),
            })?;
            check(0.0 < a && a < b && b < self.length, "omega", "must lie strictly inside (0, length)")?;
        }
        if self.mode == Mode::Sweep {
            check(!self.sweep.n_steps.is_empty(), "sweep.n_steps", "needs at least one grid")?;
            check(self.sweep.n_steps.iter().all(|&n| n >= 3), "sweep.n_steps", "every grid needs at least 3 steps")?;
            if self.sweep.target == SweepTarget::X0Distance {
                check(!self.sweep.x0.is_empty(), "sweep.x0", "needs at least one point")?;
                check(
                    self.sweep.x0.iter().all(|&x| x > 0.0 && x < self.length),
                    "sweep.x0",
                    "points must lie strictly inside (0, length)",
                )?;
            }
        }
        Ok(())
    }
}

//! Command-line harness: JSON config in, CSV files out.

pub mod config;
pub mod noise;
pub mod output;
pub mod profiles;

use crate::error::Error;
use crate::forward::{observe_point, EvolutionField, ForwardSolver};
use crate::fracops::{caputo_l1, FractionalOrder, TimeGrid, TimeSeries};
use crate::inverse_t::{self, TSourceProblem};
use crate::inverse_x::{self, FinalRegularization, Thresholding, XSourceFinalProblem, XSourceInteriorProblem};
use crate::mlf::{gamma, ml_eval, MlParams};
use crate::report::ReconstructionReport;
use crate::spectral::{Domain1D, SpectralField};
use clap::Parser;
use config::{ExperimentConfig, Mode, SweepTarget};
use output::{Cell, ResultTable, Table};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

pub use noise::add_noise;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error in `{key}`: {msg}")]
    Parse { key: String, msg: String },
    #[error("invalid `{key}`: {msg}")]
    Validation { key: String, msg: String },
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    #[error("cannot write {path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation { .. } => 3,
            CliError::Solver(_) => 4,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fracsource", about = "Time-fractional diffusion: forward runs and source reconstruction")]
pub struct Args {
    /// JSON experiment config
    pub config: PathBuf,
    /// Replace a config entry, e.g. `--override solver.k=2` (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Caps the rayon pool when FRACSOURCE_THREADS is set to a positive integer.
pub fn init_threads() {
    if let Some(n) = std::env::var("FRACSOURCE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn main_with_args(args: Args) -> i32 {
    init_threads();
    match run(&args.config, &args.overrides) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("fracsource: {e}");
            e.exit_code()
        }
    }
}

/// Loads, validates and executes a config file, writing the result files.
pub fn run(config_path: &Path, overrides: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::Parse {
        key: "config".into(),
        msg: format!("{}: {e}", config_path.display()),
    })?;
    let cfg = config::load(&text, overrides)?;
    cfg.validate()?;
    let result = execute(&cfg)?;
    result.write(Path::new(&cfg.output))
}

/// Runs a validated config without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<ResultTable, CliError> {
    let mut out = ResultTable::default();
    out.set("mode", mode_name(cfg.mode));
    match cfg.mode {
        Mode::MlEval => ml_mode(cfg, &mut out)?,
        Mode::Sweep => sweep_mode(cfg, &mut out)?,
        _ => {
            let setup = Setup::new(cfg)?;
            out.set("alpha", cfg.alpha);
            out.set("length", cfg.length);
            out.set("n_modes", cfg.n_modes);
            out.set("t_final", cfg.t_final);
            out.set("n_steps", cfg.n_steps);
            out.set("noise_level", cfg.noise_level);
            out.set("seed", cfg.seed as usize);
            match cfg.mode {
                Mode::Forward => forward_mode(cfg, &setup, &mut out)?,
                Mode::InvertRhoVolterra | Mode::InvertRhoFixedpoint => rho_mode(cfg, &setup, &mut out)?,
                Mode::InvertGFinal => g_final_mode(cfg, &setup, &mut out)?,
                Mode::InvertGInterior => g_interior_mode(cfg, &setup, &mut out)?,
                Mode::MlEval | Mode::Sweep => unreachable!(),
            }
        }
    }
    Ok(out)
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Forward => "forward",
        Mode::InvertRhoVolterra => "invert-rho-volterra",
        Mode::InvertRhoFixedpoint => "invert-rho-fixedpoint",
        Mode::InvertGFinal => "invert-g-final",
        Mode::InvertGInterior => "invert-g-interior",
        Mode::MlEval => "ml-eval",
        Mode::Sweep => "sweep",
    }
}

struct Setup {
    domain: Domain1D,
    grid: TimeGrid,
    alpha: FractionalOrder,
    g: SpectralField,
    rho: TimeSeries,
    solver: ForwardSolver,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Self::with_steps(cfg, cfg.n_steps)
    }

    fn with_steps(cfg: &ExperimentConfig, n_steps: usize) -> Result<Self, CliError> {
        let domain = Domain1D::new(cfg.length, cfg.n_modes)?;
        let grid = TimeGrid::new(cfg.t_final, n_steps)?;
        let alpha = FractionalOrder::new(cfg.alpha)?;
        let g = cfg.g.field(domain).map_err(|e| CliError::Validation {
            key: "g".into(),
            msg: e.to_string(),
        })?;
        let rho = cfg.rho.series(grid);
        let solver = ForwardSolver::new(domain, grid, alpha)?;
        Ok(Setup {
            domain,
            grid,
            alpha,
            g,
            rho,
            solver,
        })
    }

    /// Uniform plotting mesh on [0, L].
    fn mesh(&self) -> Vec<f64> {
        let m = self.domain.min_mesh_intervals().max(200);
        self.domain.mesh(m + m % 2)
    }
}

fn report_history<T>(report: &ReconstructionReport<T>) -> Table {
    let mut t = Table::new("history", &["iteration", "residual", "rel_l2_error", "update"]);
    for i in 0..report.residual_history.len() {
        t.push(vec![
            Cell::from(i + 1),
            report.residual_history[i].into(),
            report.error_history.get(i).copied().unwrap_or(f64::NAN).into(),
            report.update_history.get(i).copied().unwrap_or(f64::NAN).into(),
        ]);
    }
    t
}

fn field_table(name: &str, mesh: &[f64], cols: &[(&str, &SpectralField)]) -> Result<Table, CliError> {
    let mut header = vec!["x"];
    header.extend(cols.iter().map(|(n, _)| *n));
    let mut t = Table::new(name, &header);
    let samples: Vec<Vec<f64>> = cols.iter().map(|(_, f)| f.sample(mesh)).collect::<Result<_, _>>()?;
    for (j, &x) in mesh.iter().enumerate() {
        let mut row = vec![Cell::from(x)];
        row.extend(samples.iter().map(|s| Cell::from(s[j])));
        t.push(row);
    }
    Ok(t)
}

fn forward_mode(cfg: &ExperimentConfig, s: &Setup, out: &mut ResultTable) -> Result<(), CliError> {
    let u = s.solver.solve_separated(&s.g, &s.rho)?;
    out.set("max_abs_u", u.max_abs());
    out.set("duhamel_residual", s.solver.duhamel_residual(&s.g, &s.rho)?);
    let ut = u.at_time(s.grid.n_steps());
    out.tables.push(field_table("final", &s.mesh(), &[("g", &s.g), ("u_final", &ut)])?);
    if let Some(x0) = cfg.x0 {
        let trace = observe_point(&u, x0)?;
        let v = s.solver.point_relaxation(&s.g, x0)?;
        out.set("x0", x0);
        let mut t = Table::new("trace", &["t", "rho", "u_x0", "v_x0"]);
        for k in 0..s.grid.len() {
            t.push(vec![
                s.grid.node(k).into(),
                s.rho.values()[k].into(),
                trace.values()[k].into(),
                v.values()[k].into(),
            ]);
        }
        out.tables.push(t);
    }
    Ok(())
}

fn synthetic_trace(cfg: &ExperimentConfig, s: &Setup, x0: f64) -> Result<TimeSeries, CliError> {
    let clean = observe_point(&s.solver.solve_separated(&s.g, &s.rho)?, x0)?;
    let mut noisy = add_noise(&clean, cfg.noise_level, cfg.seed);
    // zero initial data is part of the model, not of the measurement
    noisy.values_mut()[0] = 0.0;
    Ok(noisy)
}

fn rho_mode(cfg: &ExperimentConfig, s: &Setup, out: &mut ResultTable) -> Result<(), CliError> {
    let x0 = cfg.x0.expect("validated");
    let trace = synthetic_trace(cfg, s, x0)?;
    let mut problem = TSourceProblem::new(s.g.clone(), x0, s.alpha, trace.clone())?
        .with_noise_level(cfg.noise_level)
        .with_truth(s.rho.clone());
    problem.mollify_width = cfg.solver.mollify_width;
    out.set("x0", x0);
    let report = if cfg.mode == Mode::InvertRhoVolterra {
        inverse_t::solve_volterra(&problem)?
    } else {
        let k = match cfg.solver.k {
            Some(k) => k,
            None => inverse_t::fixed_point_bound(&problem)?,
        };
        inverse_t::fixed_point_iterate(&problem, k, cfg.solver.m_max, cfg.solver.tol)?
    };
    for (k, v) in &report.parameters {
        out.set(k, *v);
    }
    out.set("iterations", report.iterations);
    out.set("converged", report.converged);
    out.set("rel_l2_error", report.rel_error.unwrap_or(f64::NAN));
    out.set("data_misfit", *report.residual_history.last().unwrap_or(&f64::NAN));
    let zero_tol = 1e-9 * report.recovered.max_abs();
    let diag = inverse_t::count_sign_changes(&report.recovered, zero_tol);
    out.set("sign_changes", diag.sign_changes);
    out.set("c1_bound", diag.c1_bound);
    let mut t = Table::new("rho", &["t", "rho_true", "rho_recovered", "trace"]);
    for k in 0..s.grid.len() {
        t.push(vec![
            s.grid.node(k).into(),
            s.rho.values()[k].into(),
            report.recovered.values()[k].into(),
            trace.values()[k].into(),
        ]);
    }
    out.tables.push(t);
    if cfg.mode == Mode::InvertRhoFixedpoint {
        out.tables.push(report_history(&report));
    }
    Ok(())
}

fn g_final_mode(cfg: &ExperimentConfig, s: &Setup, out: &mut ResultTable) -> Result<(), CliError> {
    let ut = s.solver.solve_separated(&s.g, &s.rho)?.at_time(s.grid.n_steps());
    let data = if cfg.noise_level > 0.0 {
        let m = s.domain.min_mesh_intervals().max(8 * s.domain.n_modes());
        let samples = ut.sample(&s.domain.mesh(m))?;
        SpectralField::project(&noise::perturb(&samples, cfg.noise_level, cfg.seed), s.domain)?
    } else {
        ut.clone()
    };
    let reg = FinalRegularization {
        cutoff: cfg.solver.delta,
        tikhonov: cfg.solver.mu,
    };
    let problem = XSourceFinalProblem::new(s.rho.clone(), s.alpha, data.clone())?
        .with_reg(reg)
        .with_noise_level(cfg.noise_level)
        .with_truth(s.g.clone());
    let report = inverse_x::reconstruct_final(&problem)?;
    for (k, v) in &report.parameters {
        out.set(k, *v);
    }
    out.set("rel_l2_error", report.rel_error.unwrap_or(f64::NAN));
    if s.g.l2_norm() > 0.0 {
        out.set("holder_ratio", inverse_x::holder_ratio(&s.g, &ut, 1.0)?);
    }
    out.tables.push(field_table(
        "g",
        &s.mesh(),
        &[("g_true", &s.g), ("g_recovered", &report.recovered), ("final_data", &data)],
    )?);
    let b = inverse_x::modal_responses(&s.solver, &s.rho)?;
    let mut t = Table::new("modes", &["n", "lambda", "b_n", "g_true", "g_recovered", "final_data"]);
    for n in 1..=s.domain.n_modes() {
        t.push(vec![
            n.into(),
            s.domain.eigenvalue(n).into(),
            b[n - 1].into(),
            s.g.coeffs()[n - 1].into(),
            report.recovered.coeffs()[n - 1].into(),
            data.coeffs()[n - 1].into(),
        ]);
    }
    out.tables.push(t);
    Ok(())
}

fn g_interior_mode(cfg: &ExperimentConfig, s: &Setup, out: &mut ResultTable) -> Result<(), CliError> {
    let omega = cfg.omega.expect("validated");
    let u = s.solver.solve_separated(&s.g, &s.rho)?;
    let clean = inverse_x::restrict_to_omega(&u, omega);
    let observed = if cfg.noise_level > 0.0 {
        let flat: Vec<f64> = clean.rows().iter().flatten().copied().collect();
        let noisy = noise::perturb(&flat, cfg.noise_level, cfg.seed);
        let rows = noisy.chunks(s.grid.len()).map(<[f64]>::to_vec).collect();
        EvolutionField::new(s.domain, s.grid, rows)?
    } else {
        clean
    };
    let mut params = Thresholding {
        k: cfg.solver.k.unwrap_or(1.0),
        beta: cfg.solver.beta,
        m_max: cfg.solver.m_max,
        tol: cfg.solver.tol,
    };
    if cfg.solver.k.is_none() {
        let probe = XSourceInteriorProblem::new(s.rho.clone(), s.alpha, omega, observed.clone(), params)?;
        params.k = 1.1 * inverse_x::estimate_k(&probe, cfg.solver.k_iters)?;
    }
    let problem =
        XSourceInteriorProblem::new(s.rho.clone(), s.alpha, omega, observed, params)?.with_truth(s.g.clone());
    let report = inverse_x::iterative_thresholding(&problem)?;
    for (k, v) in &report.parameters {
        out.set(k, *v);
    }
    out.set("omega_left", omega.0);
    out.set("omega_right", omega.1);
    out.set("iterations", report.iterations);
    out.set("converged", report.converged);
    out.set("rel_l2_error", report.rel_error.unwrap_or(f64::NAN));
    out.set("residual", *report.residual_history.last().unwrap_or(&f64::NAN));
    out.tables.push(field_table(
        "g",
        &s.mesh(),
        &[("g_true", &s.g), ("g_recovered", &report.recovered)],
    )?);
    out.tables.push(report_history(&report));
    Ok(())
}

fn ml_mode(cfg: &ExperimentConfig, out: &mut ResultTable) -> Result<(), CliError> {
    let alpha = cfg.ml.alpha.unwrap_or(cfg.alpha);
    let p = MlParams::new(alpha, cfg.ml.beta).map_err(Error::from)?;
    out.set("alpha", alpha);
    out.set("beta", cfg.ml.beta);
    let values: Vec<f64> = cfg
        .ml
        .z
        .iter()
        .map(|&z| ml_eval(&p, z))
        .collect::<Result<_, _>>()
        .map_err(Error::from)?;
    if let [z] = cfg.ml.z[..] {
        out.set("z", z);
        out.set("value", values[0]);
    }
    let mut t = Table::new("ml", &["z", "value"]);
    for (z, v) in cfg.ml.z.iter().zip(&values) {
        t.push(vec![(*z).into(), (*v).into()]);
    }
    out.tables.push(t);
    Ok(())
}

/// max_k |L1(t²) − 2t^{2−α}/Γ(3−α)| on the grid.
fn caputo_error(t_final: f64, n: usize, alpha: FractionalOrder) -> Result<f64, CliError> {
    let grid = TimeGrid::new(t_final, n)?;
    let a = alpha.value();
    let d = caputo_l1(&TimeSeries::from_fn(grid, |t| t * t), alpha);
    let c = 2.0 / gamma(3.0 - a);
    Ok(grid
        .nodes()
        .iter()
        .zip(d.values())
        .fold(0.0f64, |m, (t, v)| m.max((v - c * t.powf(2.0 - a)).abs())))
}

/// Relative max error of mode 1 driven by φ_1·t² against
/// 2t^{α+2}E_{α,α+3}(−λ_1 t^α).
fn forward_error(cfg: &ExperimentConfig, n: usize) -> Result<f64, CliError> {
    let domain = Domain1D::new(cfg.length, 1)?;
    let grid = TimeGrid::new(cfg.t_final, n)?;
    let alpha = FractionalOrder::new(cfg.alpha)?;
    let a = alpha.value();
    let solver = ForwardSolver::new(domain, grid, alpha)?;
    let u = solver.solve_separated(&SpectralField::mode(domain, 1)?, &TimeSeries::from_fn(grid, |t| t * t))?;
    let lam = domain.eigenvalue(1);
    let p = MlParams::new(a, a + 3.0).map_err(Error::from)?;
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (k, t) in grid.nodes().into_iter().enumerate() {
        let want = 2.0 * t.powf(a + 2.0) * ml_eval(&p, -lam * t.powf(a)).map_err(Error::from)?;
        err = err.max((u.mode(1)[k] - want).abs());
        scale = scale.max(want.abs());
    }
    Ok(err / scale)
}

fn volterra_error(cfg: &ExperimentConfig, s: &Setup, x0: f64) -> Result<f64, CliError> {
    let trace = synthetic_trace(cfg, s, x0)?;
    let mut p = TSourceProblem::new(s.g.clone(), x0, s.alpha, trace)?
        .with_noise_level(cfg.noise_level)
        .with_truth(s.rho.clone());
    p.mollify_width = cfg.solver.mollify_width;
    Ok(inverse_t::solve_volterra(&p)?.rel_error.unwrap_or(f64::NAN))
}

fn sweep_mode(cfg: &ExperimentConfig, out: &mut ResultTable) -> Result<(), CliError> {
    let target = cfg.sweep.target;
    out.set(
        "target",
        match target {
            SweepTarget::Caputo => "caputo",
            SweepTarget::Forward => "forward",
            SweepTarget::Duhamel => "duhamel",
            SweepTarget::Volterra => "volterra",
            SweepTarget::X0Distance => "x0_distance",
        },
    );
    out.set("alpha", cfg.alpha);
    if target == SweepTarget::X0Distance {
        return distance_sweep(cfg, out);
    }
    let alpha = FractionalOrder::new(cfg.alpha)?;
    let errors: Vec<f64> = cfg
        .sweep
        .n_steps
        .par_iter()
        .map(|&n| -> Result<f64, CliError> {
            match target {
                SweepTarget::Caputo => caputo_error(cfg.t_final, n, alpha),
                SweepTarget::Forward => forward_error(cfg, n),
                SweepTarget::Duhamel => {
                    let s = Setup::with_steps(cfg, n)?;
                    Ok(s.solver.duhamel_residual(&s.g, &s.rho)?)
                }
                SweepTarget::Volterra => {
                    let s = Setup::with_steps(cfg, n)?;
                    volterra_error(cfg, &s, cfg.x0.expect("validated"))
                }
                SweepTarget::X0Distance => unreachable!(),
            }
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("sweep", &["n_steps", "error", "ratio", "slope"]);
    for (i, (&n, &e)) in cfg.sweep.n_steps.iter().zip(&errors).enumerate() {
        let (ratio, slope) = if i == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let prev = errors[i - 1];
            let steps = (n as f64 / cfg.sweep.n_steps[i - 1] as f64).ln();
            (prev / e, (prev / e).ln() / steps)
        };
        t.push(vec![n.into(), e.into(), ratio.into(), slope.into()]);
    }
    if errors.len() >= 2 {
        let last = &t.rows[t.rows.len() - 1];
        out.summary.push(("final_slope".into(), last[3].clone()));
    }
    out.tables.push(t);
    Ok(())
}

fn distance_sweep(cfg: &ExperimentConfig, out: &mut ResultTable) -> Result<(), CliError> {
    let s = Setup::new(cfg)?;
    let (a, b) = cfg.g.support(&s.domain);
    let rows: Vec<Vec<Cell>> = cfg
        .sweep
        .x0
        .par_iter()
        .map(|&x0| -> Result<Vec<Cell>, CliError> {
            let dist = if x0 < a {
                a - x0
            } else if x0 > b {
                x0 - b
            } else {
                0.0
            };
            let gx = s.g.eval_at(x0)?;
            let (err, status) = match volterra_error(cfg, &s, x0) {
                Ok(e) => (e, "ok".to_string()),
                Err(CliError::Solver(Error::PointDegenerate { .. })) => (f64::NAN, "point_degenerate".into()),
                Err(e) => return Err(e),
            };
            Ok(vec![x0.into(), dist.into(), gx.into(), err.into(), status.into()])
        })
        .collect::<Result<_, _>>()?;
    let mut t = Table::new("sweep", &["x0", "distance", "g_x0", "rel_l2_error", "status"]);
    rows.into_iter().for_each(|r| t.push(r));
    out.tables.push(t);
    Ok(())
}

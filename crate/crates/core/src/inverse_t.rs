//! Recovery of the temporal factor ρ(t) from the single-point trace
//! u(x0, ·) of the solution with source g(x)ρ(t).
//!
//! With v the homogeneous solution started from g and Q(x0, t) = −∂_t v(x0, t),
//! the trace satisfies the second-kind Volterra equation
//!
//! g(x0) ρ(t) = ∂_t^α u(x0, t) + ∫_0^t Q(x0, s) ρ(t − s) ds.
//!
//! Both terms on the right are discretized with exact kernel information:
//! the moments of Q come from v and its time integral, and the Caputo
//! derivative of the trace is taken after removing ρ(0) times the
//! step response U, whose derivative is v(x0, ·) exactly. Removing it leaves
//! a function vanishing like t^{1+α} at the origin, where the L1 scheme is
//! accurate; ρ(0) itself is tied to ρ(t_1), ρ(t_2) by linear extrapolation.

use crate::error::{Error, Result};
use crate::forward::{check_interior, ForwardSolver};
use crate::fracops::{caputo_l1, ConvolutionWeights, FractionalOrder, TimeGrid, TimeSeries};
use crate::mlf::{MittagLeffler, MlParams};
use crate::report::ReconstructionReport;
use crate::spectral::SpectralField;

/// Default threshold below which |g(x0)| counts as zero.
pub const EPS_POINT: f64 = 1e-8;

/// Default moving-average width applied to noisy traces.
pub const DEFAULT_MOLLIFY_WIDTH: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct TSourceProblem {
    pub g: SpectralField,
    pub x0: f64,
    pub alpha: FractionalOrder,
    pub trace: TimeSeries,
    pub noise_level: f64,
    pub truth: Option<TimeSeries>,
    pub eps_point: f64,
    pub mollify_width: usize,
}

impl TSourceProblem {
    pub fn new(g: SpectralField, x0: f64, alpha: FractionalOrder, trace: TimeSeries) -> Result<Self> {
        check_interior(g.domain(), x0)?;
        Ok(TSourceProblem {
            g,
            x0,
            alpha,
            trace,
            noise_level: 0.0,
            truth: None,
            eps_point: EPS_POINT,
            mollify_width: DEFAULT_MOLLIFY_WIDTH,
        })
    }

    pub fn with_truth(mut self, truth: TimeSeries) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_noise_level(mut self, level: f64) -> Self {
        self.noise_level = level;
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        self.trace.grid()
    }

    pub fn g_at_x0(&self) -> f64 {
        self.g.eval_at(self.x0).expect("x0 checked at construction")
    }

    fn check_point(&self) -> Result<f64> {
        let g0 = self.g_at_x0();
        if g0.abs() < self.eps_point {
            return Err(Error::PointDegenerate {
                value: g0,
                threshold: self.eps_point,
            });
        }
        Ok(g0)
    }

    fn check_trace(&self) -> Result<()> {
        let t0 = self.trace.values()[0];
        if t0.abs() > 1e-14 * self.trace.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NonZeroInitialTrace(t0));
        }
        Ok(())
    }

    /// The trace actually used by the solvers: moving-average smoothed
    /// when the data are flagged as noisy, with the initial value kept at 0.
    pub fn working_trace(&self) -> TimeSeries {
        if self.noise_level > 0.0 && self.mollify_width > 1 {
            let mut t = moving_average(&self.trace, self.mollify_width);
            t.values_mut()[0] = 0.0;
            t
        } else {
            self.trace.clone()
        }
    }

    fn solver(&self) -> Result<ForwardSolver> {
        ForwardSolver::new(*self.g.domain(), *self.grid(), self.alpha)
    }
}

/// Centered moving average, with the window shrinking at both ends.
pub fn moving_average(s: &TimeSeries, width: usize) -> TimeSeries {
    let v = s.values();
    let n = v.len();
    let half = width / 2;
    let out = (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    TimeSeries::new(*s.grid(), out).expect("length preserved")
}

/// Q(x0, t) = t^{α−1} S(t) with the singular power kept apart from the
/// smooth factor S(t) = Σ λ_n E_{α,α}(−λ_n t^α) g_n φ_n(x0).
#[derive(Debug, Clone, PartialEq)]
pub struct QKernel {
    pub power: f64,
    pub smooth: TimeSeries,
}

impl QKernel {
    /// Q at node k ≥ 1 (the value at t = 0 is infinite unless S(0) = 0).
    pub fn value(&self, k: usize) -> f64 {
        let t = self.smooth.grid().node(k);
        t.powf(self.power) * self.smooth.values()[k]
    }
}

pub fn kernel_q(g: &SpectralField, x0: f64, alpha: FractionalOrder, grid: TimeGrid) -> Result<QKernel> {
    check_interior(g.domain(), x0)?;
    let a = alpha.value();
    let e = MittagLeffler::new(MlParams::new(a, a)?);
    let d = g.domain();
    let mut smooth = vec![0.0; grid.len()];
    for (i, &c) in g.coeffs().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let lam = d.eigenvalue(i + 1);
        let w = lam * c * d.eigenfunction(i + 1, x0);
        for (k, t) in grid.nodes().into_iter().enumerate() {
            smooth[k] += w * e.eval(-lam * t.powf(a))?;
        }
    }
    Ok(QKernel {
        power: a - 1.0,
        smooth: TimeSeries::new(grid, smooth)?,
    })
}

/// Point quantities shared by the t-source solvers.
struct PointTables {
    /// v(x0, t_k)
    v: Vec<f64>,
    /// U(x0, t_k): trace of the solution with source g·1
    step: Vec<f64>,
    /// product weights of Q(x0, ·)
    q: ConvolutionWeights,
}

fn point_tables(s: &ForwardSolver, g: &SpectralField, x0: f64) -> Result<PointTables> {
    let v = s.point_relaxation(g, x0)?.into_values();
    let vint = s.point_combination(g, x0, |s, n| s.relaxation_integral(n).to_vec())?;
    let step = s.point_combination(g, x0, |s, n| s.step_response(n).to_vec())?;
    let tau = s.grid().tau();
    let n = s.grid().n_steps();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let total = v[i] - v[i + 1];
        let r = -v[i + 1] + (vint[i + 1] - vint[i]) / tau;
        right.push(r);
        left.push(total - r);
    }
    Ok(PointTables {
        v,
        step,
        q: ConvolutionWeights::from_moments(left, right)?,
    })
}

/// Caputo derivative of a trace whose source has ρ(0) = r0: the L1 scheme
/// applied after subtracting r0·U, plus r0·v.
fn corrected_caputo(trace: &[f64], r0: f64, tables: &PointTables, grid: TimeGrid, alpha: FractionalOrder) -> Vec<f64> {
    let rest: Vec<f64> = trace.iter().zip(&tables.step).map(|(u, s)| u - r0 * s).collect();
    let d = caputo_l1(&TimeSeries::new(grid, rest).expect("grid length"), alpha);
    let mut out = d.into_values();
    for (o, v) in out.iter_mut().zip(&tables.v) {
        *o += r0 * v;
    }
    out
}

/// Direct solution of the discretized Volterra equation by forward
/// substitution.
pub fn solve_volterra(problem: &TSourceProblem) -> Result<ReconstructionReport<TimeSeries>> {
    let g0 = problem.check_point()?;
    problem.check_trace()?;
    let solver = problem.solver()?;
    let grid = *problem.grid();
    let tables = point_tables(&solver, &problem.g, problem.x0)?;
    let trace = problem.working_trace();
    let n = grid.n_steps();

    let data = caputo_l1(&trace, problem.alpha).into_values();
    // coefficient of ρ(0) contributed by the Caputo correction
    let c0: Vec<f64> = {
        let l1u = caputo_l1(&TimeSeries::new(grid, tables.step.clone())?, problem.alpha).into_values();
        tables.v.iter().zip(&l1u).map(|(v, l)| v - l).collect()
    };
    let w = tables.q.node_weights();
    let right = tables.q.right();
    let diag = g0 - w[0];
    let e = |k: usize| right[k - 1] + c0[k];

    let mut rho = vec![0.0; n + 1];
    // nodes 1 and 2 together with ρ(0) = 2ρ(1) − ρ(2)
    let (a11, a12) = (diag - 2.0 * e(1), e(1));
    let (a21, a22) = (-w[1] - 2.0 * e(2), diag + e(2));
    let det = a11 * a22 - a12 * a21;
    rho[1] = (data[1] * a22 - a12 * data[2]) / det;
    rho[2] = (a11 * data[2] - a21 * data[1]) / det;
    rho[0] = 2.0 * rho[1] - rho[2];
    for k in 3..=n {
        let mut acc = data[k] + e(k) * rho[0];
        for j in 1..k {
            acc += w[k - j] * rho[j];
        }
        rho[k] = acc / diag;
    }
    let rho = TimeSeries::new(grid, rho)?;

    let fit = solver.point_response_weights(&problem.g, problem.x0)?.apply(rho.values());
    let misfit = TimeSeries::new(grid, fit)?.rel_l2_error(&trace)?;
    let mut report = ReconstructionReport::new(rho);
    report.residual_history.push(misfit);
    report.parameters.push(("g_x0".into(), g0));
    if problem.noise_level > 0.0 {
        report
            .parameters
            .push(("mollify_width".into(), problem.mollify_width as f64));
    }
    if let Some(truth) = &problem.truth {
        let err = report.recovered.rel_l2_error(truth)?;
        report.error_history.push(err);
        report.rel_error = Some(err);
    }
    Ok(report)
}

/// max_k |v(x0, t_k)|, the smallest admissible K for the fixed-point
/// iteration.
pub fn fixed_point_bound(problem: &TSourceProblem) -> Result<f64> {
    let solver = problem.solver()?;
    Ok(solver.point_relaxation(&problem.g, problem.x0)?.max_abs())
}

/// ρ_m = ρ_{m−1} + ∂_t^α(u* − u(ρ_{m−1}))(x0, ·)/K from ρ_0 = 0, stopping
/// when the relative change between iterates drops below `tol`.
///
/// The L1 derivative leaves node 0 undetermined; after each update ρ_m(0)
/// is set by linear extrapolation from nodes 1 and 2.
pub fn fixed_point_iterate(
    problem: &TSourceProblem,
    k: f64,
    m_max: usize,
    tol: f64,
) -> Result<ReconstructionReport<TimeSeries>> {
    problem.check_trace()?;
    let solver = problem.solver()?;
    let bound = solver.point_relaxation(&problem.g, problem.x0)?.max_abs();
    if !(k > 0.0) || k < bound * (1.0 - 1e-12) {
        return Err(Error::KTooSmall { k, bound });
    }
    let grid = *problem.grid();
    let weights = solver.point_response_weights(&problem.g, problem.x0)?;
    let trace = problem.working_trace();
    let trace_norm = trace.l2_norm();

    let mut rho = TimeSeries::zeros(grid);
    let mut report = ReconstructionReport::new(rho.clone());
    report.converged = false;
    report.parameters.push(("K".into(), k));
    report.parameters.push(("tol".into(), tol));
    let mut growth = 0;
    for m in 1..=m_max {
        let u = TimeSeries::new(grid, weights.apply(rho.values()))?;
        let mismatch = trace.sub(&u)?;
        let upd = caputo_l1(&mismatch, problem.alpha).scaled(1.0 / k);
        let mut next = rho.add(&upd)?;
        let v = next.values_mut();
        v[0] = 2.0 * v[1] - v[2];
        let change = next.sub(&rho)?.l2_norm();
        let scale = next.l2_norm();
        let rel_change = if scale > 0.0 { change / scale } else { change };
        let residual = if trace_norm > 0.0 {
            mismatch.l2_norm() / trace_norm
        } else {
            mismatch.l2_norm()
        };
        report.residual_history.push(residual);
        report.update_history.push(rel_change);
        rho = next;
        report.iterations = m;
        let monitor = if let Some(truth) = &problem.truth {
            let err = rho.rel_l2_error(truth)?;
            report.error_history.push(err);
            &report.error_history
        } else {
            &report.residual_history
        };
        let len = monitor.len();
        if len >= 2 && monitor[len - 1] > monitor[len - 2] {
            growth += 1;
            if growth >= 3 {
                return Err(Error::Divergence { iteration: m });
            }
        } else {
            growth = 0;
        }
        if rel_change <= tol {
            report.converged = true;
            break;
        }
    }
    report.rel_error = report.error_history.last().copied();
    report.recovered = rho;
    Ok(report)
}

/// Ratios r(ρ) = ‖ρ‖_∞ / ‖∂_t^α u(x0, ·)‖_∞ over a family of sources.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCertificate {
    pub c_lo: f64,
    pub c_hi: f64,
    pub ratios: Vec<f64>,
}

impl LipschitzCertificate {
    /// One constant C with C⁻¹‖∂_t^α u‖ ≤ ‖ρ‖ ≤ C‖∂_t^α u‖ over the family.
    pub fn constant(&self) -> f64 {
        self.c_hi.max(1.0 / self.c_lo)
    }
}

pub fn lipschitz_certificate(
    g: &SpectralField,
    x0: f64,
    alpha: FractionalOrder,
    grid: TimeGrid,
    family: &[TimeSeries],
) -> Result<LipschitzCertificate> {
    check_interior(g.domain(), x0)?;
    let g0 = g.eval_at(x0)?;
    if g0.abs() < EPS_POINT {
        return Err(Error::PointDegenerate {
            value: g0,
            threshold: EPS_POINT,
        });
    }
    if family.is_empty() {
        return Err(crate::error::invalid("rho_family", "empty family"));
    }
    let solver = ForwardSolver::new(*g.domain(), grid, alpha)?;
    let tables = point_tables(&solver, g, x0)?;
    let weights = solver.point_response_weights(g, x0)?;
    let mut ratios = Vec::with_capacity(family.len());
    for rho in family {
        if rho.max_abs() == 0.0 {
            return Err(crate::error::invalid("rho_family", "contains a zero member"));
        }
        let u = weights.apply(rho.values());
        let d = corrected_caputo(&u, rho.values()[0], &tables, grid, alpha);
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        ratios.push(rho.max_abs() / dmax);
    }
    let c_lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c_hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzCertificate { c_lo, c_hi, ratios })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleDiagnostics {
    pub sign_changes: usize,
    /// max(‖ρ‖_∞, ‖Δρ/τ‖_∞), a surrogate for the C¹ bound
    pub c1_bound: f64,
}

pub fn count_sign_changes(rho: &TimeSeries, zero_tol: f64) -> AdmissibleDiagnostics {
    let mut changes = 0;
    let mut last = 0.0f64;
    for &v in rho.values() {
        if v.abs() > zero_tol {
            if last != 0.0 && v.signum() != last {
                changes += 1;
            }
            last = v.signum();
        }
    }
    let tau = rho.grid().tau();
    let slope = rho
        .values()
        .windows(2)
        .fold(0.0f64, |m, w| m.max(((w[1] - w[0]) / tau).abs()));
    AdmissibleDiagnostics {
        sign_changes: changes,
        c1_bound: rho.max_abs().max(slope),
    }
}

//! Recovery of the spatial factor g(x) of the source g(x)ρ(t), either from
//! the final state u(·, T) or from observations on ω × (0, T).
//!
//! With zero initial data, mode n of the solution is g_n s_n(t) where
//! s_n(t) = ∫_0^t s'^{α−1}E_{α,α}(−λ_n s'^α) ρ(t − s') ds'. Final data
//! therefore act diagonally through B_n = s_n(T), while interior data couple
//! the modes through the restriction to ω.

use crate::error::{invalid, Error, Result};
use crate::forward::{EvolutionField, ForwardSolver};
use crate::fracops::{ConvolutionWeights, FractionalOrder, TimeGrid, TimeSeries};
use crate::mlf::{MittagLeffler, MlParams};
use crate::report::ReconstructionReport;
use crate::spectral::{Domain1D, SpectralField};
use rayon::prelude::*;

/// μ used for noise-free final data when none is given, relative to
/// max_n B_n².
pub const DEFAULT_RELATIVE_MU: f64 = 1e-10;

/// B_n = ∫_0^T s^{α−1} E_{α,α}(−λ s^α) ρ(T − s) ds for a single eigenvalue.
pub fn modal_response(lambda: f64, rho: &TimeSeries, alpha: FractionalOrder) -> Result<f64> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be finite and >= 0")));
    }
    let a = alpha.value();
    let grid = rho.grid();
    let e1 = MittagLeffler::new(MlParams::new(a, a + 1.0)?);
    let e2 = MittagLeffler::new(MlParams::new(a, a + 2.0)?);
    let mut g1 = Vec::with_capacity(grid.len());
    let mut g2 = Vec::with_capacity(grid.len());
    for t in grid.nodes() {
        let ta = t.powf(a);
        g1.push(ta * e1.eval(-lambda * ta)?);
        g2.push(ta * t * e2.eval(-lambda * ta)?);
    }
    let w = ConvolutionWeights::from_antiderivatives(&g1, &g2, grid.tau())?;
    Ok(final_value(&w, rho.values()))
}

fn final_value(w: &ConvolutionWeights, f: &[f64]) -> f64 {
    let n = w.n_steps();
    let nw = w.node_weights();
    let mut acc = w.right()[n - 1] * f[0];
    for j in 1..=n {
        acc += nw[n - j] * f[j];
    }
    acc
}

/// B_n for every mode of the solver's domain.
pub fn modal_responses(solver: &ForwardSolver, rho: &TimeSeries) -> Result<Vec<f64>> {
    if rho.grid() != solver.grid() {
        return Err(Error::Mismatch { what: "time series" });
    }
    Ok((1..=solver.domain().n_modes())
        .map(|n| final_value(solver.kernel_weights(n), rho.values()))
        .collect())
}

fn check_rho_near_final(rho: &TimeSeries) -> Result<()> {
    let v = rho.values();
    let start = v.len() - v.len().div_ceil(4);
    if v[start..].iter().all(|&r| r == 0.0) {
        return Err(Error::DegenerateRho);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FinalRegularization {
    /// modes with |B_n| below this are dropped
    pub cutoff: f64,
    /// Tikhonov parameter; chosen automatically when absent
    pub tikhonov: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XSourceFinalProblem {
    pub rho: TimeSeries,
    pub alpha: FractionalOrder,
    pub final_data: SpectralField,
    pub reg: FinalRegularization,
    /// relative noise level of the final data (0 for exact data)
    pub noise_level: f64,
    pub truth: Option<SpectralField>,
}

impl XSourceFinalProblem {
    pub fn new(rho: TimeSeries, alpha: FractionalOrder, final_data: SpectralField) -> Result<Self> {
        check_rho_near_final(&rho)?;
        Ok(XSourceFinalProblem {
            rho,
            alpha,
            final_data,
            reg: FinalRegularization::default(),
            noise_level: 0.0,
            truth: None,
        })
    }

    pub fn with_reg(mut self, reg: FinalRegularization) -> Self {
        self.reg = reg;
        self
    }

    pub fn with_noise_level(mut self, level: f64) -> Self {
        self.noise_level = level;
        self
    }

    pub fn with_truth(mut self, truth: SpectralField) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn grid(&self) -> &TimeGrid {
        self.rho.grid()
    }
}

struct FinalFit {
    g: Vec<f64>,
    discrepancy: f64,
}

fn tikhonov_fit(b: &[f64], u: &[f64], keep: &[bool], mu: f64) -> FinalFit {
    let mut g = vec![0.0; b.len()];
    let mut r2 = 0.0;
    for i in 0..b.len() {
        if keep[i] {
            let d = b[i] * b[i] + mu;
            g[i] = if d > 0.0 { b[i] * u[i] / d } else { 0.0 };
        }
        let r = b[i] * g[i] - u[i];
        r2 += r * r;
    }
    FinalFit {
        g,
        discrepancy: r2.sqrt(),
    }
}

/// g_n = B_n u_n(T)/(B_n² + μ) on the modes with |B_n| ≥ δ.
///
/// Without an explicit μ, noisy data use the discrepancy principle (fit
/// residual equal to noise_level·‖u(·,T)‖, bisection in log μ) and exact
/// data use μ = 1e−10·max B_n².
pub fn reconstruct_final(problem: &XSourceFinalProblem) -> Result<ReconstructionReport<SpectralField>> {
    check_rho_near_final(&problem.rho)?;
    let domain = *problem.final_data.domain();
    let solver = ForwardSolver::new(domain, *problem.grid(), problem.alpha)?;
    let b = modal_responses(&solver, &problem.rho)?;
    let u = problem.final_data.coeffs();
    let delta = problem.reg.cutoff;
    if !(delta >= 0.0) {
        return Err(invalid("delta", format!("{delta} must be >= 0")));
    }
    let keep: Vec<bool> = b.iter().map(|v| v.abs() >= delta && *v != 0.0).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::AllModesCut(delta));
    }
    let bmax2 = b.iter().fold(0.0f64, |m, v| m.max(v * v));
    let mu = match problem.reg.tikhonov {
        Some(mu) if mu >= 0.0 => mu,
        Some(mu) => return Err(invalid("mu", format!("{mu} must be >= 0"))),
        None if problem.noise_level > 0.0 => {
            let target = problem.noise_level * problem.final_data.l2_norm();
            discrepancy_mu(&b, u, &keep, bmax2, target)
        }
        None => DEFAULT_RELATIVE_MU * bmax2,
    };
    let fit = tikhonov_fit(&b, u, &keep, mu);
    let retained = keep.iter().filter(|&&k| k).count();
    let g = SpectralField::new(domain, fit.g)?;
    let mut report = ReconstructionReport::new(g);
    report.residual_history.push(fit.discrepancy);
    report.parameters.push(("mu".into(), mu));
    report.parameters.push(("delta".into(), delta));
    report.parameters.push(("retained_modes".into(), retained as f64));
    report.parameters.push(("discrepancy".into(), fit.discrepancy));
    if let Some(truth) = &problem.truth {
        let err = rel_l2(&report.recovered, truth);
        report.error_history.push(err);
        report.rel_error = Some(err);
    }
    Ok(report)
}

fn discrepancy_mu(b: &[f64], u: &[f64], keep: &[bool], bmax2: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = ((1e-16 * bmax2).ln(), (1e2 * bmax2).ln());
    let res = |lmu: f64| tikhonov_fit(b, u, keep, lmu.exp()).discrepancy;
    if res(lo) >= target {
        return lo.exp();
    }
    if res(hi) <= target {
        return hi.exp();
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if res(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn rel_l2(a: &SpectralField, truth: &SpectralField) -> f64 {
    let diff: f64 = a
        .coeffs()
        .iter()
        .zip(truth.coeffs())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let n = truth.l2_norm();
    if n > 0.0 {
        diff / n
    } else {
        diff
    }
}

/// ‖g‖ / (E^{1/(γ+1)} ‖u(·,T)‖^{γ/(γ+1)}) with E = ‖g‖_{D((−Δ)^γ)}.
pub fn holder_ratio(g: &SpectralField, final_data: &SpectralField, gamma: f64) -> Result<f64> {
    let e = g.sobolev_norm(gamma)?;
    let p = 1.0 / (gamma + 1.0);
    let denom = e.powf(p) * final_data.l2_norm().powf(gamma * p);
    if denom == 0.0 {
        return Err(invalid("g", "zero source has no Hölder ratio"));
    }
    Ok(g.l2_norm() / denom)
}

/// Matrix of the restriction to ω = (a, b) in the sine basis:
/// P_{nm} = ∫_a^b φ_n φ_m dx.
pub fn omega_projection(domain: &Domain1D, omega: (f64, f64)) -> Vec<Vec<f64>> {
    let l = domain.length();
    let (a, b) = omega;
    let k = std::f64::consts::PI / l;
    // ∫_a^b cos(jkx) dx
    let c = |j: usize| -> f64 {
        if j == 0 {
            b - a
        } else {
            let w = j as f64 * k;
            ((w * b).sin() - (w * a).sin()) / w
        }
    };
    let n = domain.n_modes();
    (1..=n)
        .map(|i| (1..=n).map(|j| (c(i.abs_diff(j)) - c(i + j)) / l).collect())
        .collect()
}

fn apply_projection(p: &[Vec<f64>], f: &EvolutionField) -> EvolutionField {
    let rows = f.rows();
    let len = f.grid().len();
    let modal = p
        .par_iter()
        .map(|pr| {
            let mut out = vec![0.0; len];
            for (w, row) in pr.iter().zip(rows) {
                if *w != 0.0 {
                    for (o, v) in out.iter_mut().zip(row) {
                        *o += w * v;
                    }
                }
            }
            out
        })
        .collect();
    EvolutionField::new(*f.domain(), *f.grid(), modal).expect("shape preserved")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholding {
    pub k: f64,
    pub beta: f64,
    pub m_max: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XSourceInteriorProblem {
    pub rho: TimeSeries,
    pub alpha: FractionalOrder,
    pub omega: (f64, f64),
    /// modal coefficients of χ_ω u on the time grid
    pub observed: EvolutionField,
    pub thresholding: Thresholding,
    pub truth: Option<SpectralField>,
}

impl XSourceInteriorProblem {
    /// `observed` holds the modal coefficients of χ_ω u; use
    /// [`restrict_to_omega`] to produce them from a full field.
    pub fn new(
        rho: TimeSeries,
        alpha: FractionalOrder,
        omega: (f64, f64),
        observed: EvolutionField,
        thresholding: Thresholding,
    ) -> Result<Self> {
        let l = observed.domain().length();
        let (a, b) = omega;
        if !(0.0 < a && a < b && b < l) {
            return Err(invalid("omega", format!("({a}, {b}) must lie strictly inside (0, {l})")));
        }
        if observed.grid() != rho.grid() {
            return Err(Error::Mismatch { what: "observed field" });
        }
        if rho.values()[0] == 0.0 {
            return Err(Error::VanishingInitialRho);
        }
        Ok(XSourceInteriorProblem {
            rho,
            alpha,
            omega,
            observed,
            thresholding,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: SpectralField) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn domain(&self) -> &Domain1D {
        self.observed.domain()
    }

    pub fn grid(&self) -> &TimeGrid {
        self.rho.grid()
    }
}

/// Modal coefficients of χ_ω u.
pub fn restrict_to_omega(u: &EvolutionField, omega: (f64, f64)) -> EvolutionField {
    apply_projection(&omega_projection(u.domain(), omega), u)
}

/// Per-mode responses s_n(t) and the operators needed by the iteration.
struct InteriorOperator {
    solver: ForwardSolver,
    proj: Vec<Vec<f64>>,
    responses: EvolutionField,
    weights: Vec<f64>,
}

impl InteriorOperator {
    fn new(problem: &XSourceInteriorProblem) -> Result<Self> {
        let domain = *problem.domain();
        let grid = *problem.grid();
        let solver = ForwardSolver::new(domain, grid, problem.alpha)?;
        let ones = SpectralField::new(domain, vec![1.0; domain.n_modes()])?;
        let responses = solver.solve_separated(&ones, &problem.rho)?;
        Ok(InteriorOperator {
            solver,
            proj: omega_projection(&domain, problem.omega),
            responses,
            weights: grid.trapezoid_weights(),
        })
    }

    /// χ_ω u(g).
    fn forward(&self, g: &[f64]) -> EvolutionField {
        let modal = self
            .responses
            .rows()
            .iter()
            .zip(g)
            .map(|(s, &c)| s.iter().map(|v| c * v).collect())
            .collect();
        let u = EvolutionField::new(*self.responses.domain(), *self.responses.grid(), modal)
            .expect("shape preserved");
        apply_projection(&self.proj, &u)
    }

    /// ∫_0^T ρ z dt, z solving the backward problem driven by r.
    fn adjoint(&self, r: &EvolutionField, rho: &TimeSeries) -> Result<Vec<f64>> {
        let z = self.solver.solve_backward_adjoint(r)?;
        Ok(z
            .rows()
            .iter()
            .map(|row| {
                row.iter()
                    .zip(rho.values())
                    .zip(&self.weights)
                    .map(|((z, p), w)| z * p * w)
                    .sum()
            })
            .collect())
    }

    fn norm(&self, f: &EvolutionField) -> f64 {
        f.rows()
            .iter()
            .map(|row| row.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

fn sub_fields(a: &EvolutionField, b: &EvolutionField) -> EvolutionField {
    let modal = a
        .rows()
        .iter()
        .zip(b.rows())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    EvolutionField::new(*a.domain(), *a.grid(), modal).expect("shape preserved")
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// g_{m+1} = (K g_m − ∫_0^T ρ z(g_m) dt)/(K + β) from g_0 = 0, where z
/// solves the backward problem driven by χ_ω(u(g_m) − observed).
pub fn iterative_thresholding(problem: &XSourceInteriorProblem) -> Result<ReconstructionReport<SpectralField>> {
    let Thresholding { k, beta, m_max, tol } = problem.thresholding;
    if !(k > 0.0) {
        return Err(invalid("K", format!("{k} must be > 0")));
    }
    if !(beta > 0.0) {
        return Err(invalid("beta", format!("{beta} must be > 0")));
    }
    let op = InteriorOperator::new(problem)?;
    let domain = *problem.domain();
    let data_norm = op.norm(&problem.observed);
    let scale = if data_norm > 0.0 { data_norm } else { 1.0 };

    let mut g = vec![0.0; domain.n_modes()];
    let mut report = ReconstructionReport::new(SpectralField::zeros(domain));
    report.converged = false;
    report.parameters.push(("K".into(), k));
    report.parameters.push(("beta".into(), beta));
    let mut violations = 0usize;
    let mut growth = 0;
    for m in 1..=m_max {
        let r = sub_fields(&op.forward(&g), &problem.observed);
        let residual = op.norm(&r) / scale;
        let grad = op.adjoint(&r, &problem.rho)?;
        let next: Vec<f64> = g.iter().zip(&grad).map(|(gi, zi)| (k * gi - zi) / (k + beta)).collect();
        let bound = (k * vec_norm(&g) + vec_norm(&grad)) / (k + beta);
        if vec_norm(&next) > bound * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            violations += 1;
        }
        let change = vec_norm(&g.iter().zip(&next).map(|(a, b)| a - b).collect::<Vec<_>>());
        let nn = vec_norm(&next);
        let rel_change = if nn > 0.0 { change / nn } else { change };
        g = next;
        report.iterations = m;
        report.residual_history.push(residual);
        report.update_history.push(rel_change);
        if let Some(truth) = &problem.truth {
            report.error_history.push(rel_l2(&SpectralField::new(domain, g.clone())?, truth));
        }
        let h = &report.residual_history;
        if h.len() >= 2 && h[h.len() - 1] > h[h.len() - 2] * (1.0 + 1e-12) {
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
    report.parameters.push(("damped_update_violations".into(), violations as f64));
    report.recovered = SpectralField::new(domain, g)?;
    report.rel_error = report.error_history.last().copied();
    Ok(report)
}

/// Largest eigenvalue of g ↦ ∫_0^T ρ z(χ_ω u(g)) dt by power iteration.
pub fn estimate_k(problem: &XSourceInteriorProblem, iters: usize) -> Result<f64> {
    if iters < 5 {
        return Err(invalid("iters", format!("{iters} is below the minimum of 5")));
    }
    let op = InteriorOperator::new(problem)?;
    let n = problem.domain().n_modes();
    let mut v: Vec<f64> = (1..=n).map(|i| 1.0 / i as f64).collect();
    let nv = vec_norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = 0.0;
    for _ in 0..iters {
        let w = op.adjoint(&op.forward(&v), &problem.rho)?;
        let nw = vec_norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        est = nw;
        v = w.into_iter().map(|x| x / nw).collect();
    }
    Ok(est)
}

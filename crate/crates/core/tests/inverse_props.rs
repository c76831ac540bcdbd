use fracsource::forward::{observe_point, EvolutionField, ForwardSolver};
use fracsource::fracops::{FractionalOrder, TimeGrid, TimeSeries};
use fracsource::inverse_t::{self, kernel_q, TSourceProblem};
use fracsource::inverse_x::{
    self, estimate_k, iterative_thresholding, modal_response, reconstruct_final, FinalRegularization, Thresholding,
    XSourceFinalProblem, XSourceInteriorProblem,
};
use fracsource::mlf::{ml_eval, MlParams};
use fracsource::spectral::{Domain1D, SpectralField};
use fracsource::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn bump(d: Domain1D, center: f64, width: f64) -> SpectralField {
    let s: Vec<f64> = d
        .mesh(8 * d.n_modes())
        .iter()
        .map(|&x| {
            let s = (x / d.length() - center + 0.5 * width) / width;
            if (0.0..=1.0).contains(&s) {
                (PI * s).sin().powi(2)
            } else {
                0.0
            }
        })
        .collect();
    SpectralField::project(&s, d).unwrap()
}

fn alpha() -> FractionalOrder {
    FractionalOrder::new(0.5).unwrap()
}

fn trace(s: &ForwardSolver, g: &SpectralField, x0: f64, rho: &TimeSeries) -> TimeSeries {
    observe_point(&s.solve_separated(g, rho).unwrap(), x0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn volterra_is_linear(p in -2.0f64..2.0, q in -2.0f64..2.0) {
        let d = Domain1D::new(1.0, 24).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let s = ForwardSolver::new(d, grid, alpha()).unwrap();
        let g = bump(d, 0.5, 1.0);
        let t1 = trace(&s, &g, 0.4, &TimeSeries::from_fn(grid, |t| 1.0 + t));
        let t2 = trace(&s, &g, 0.4, &TimeSeries::from_fn(grid, |t| (2.0 * t).cos()));
        let solve = |tr: TimeSeries| {
            inverse_t::solve_volterra(&TSourceProblem::new(g.clone(), 0.4, alpha(), tr).unwrap())
                .unwrap()
                .recovered
        };
        let lhs = solve(t1.scaled(p).add(&t2.scaled(q)).unwrap());
        let rhs = solve(t1).scaled(p).add(&solve(t2).scaled(q)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-10 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn lipschitz_ratio_is_scale_invariant(c in 0.01f64..100.0) {
        let d = Domain1D::new(1.0, 16).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let g = bump(d, 0.5, 1.0);
        let rho = TimeSeries::from_fn(grid, |t| 2.0 - t + 0.3 * (5.0 * t).sin());
        let one = inverse_t::lipschitz_certificate(&g, 0.3, alpha(), grid, &[rho.clone()]).unwrap();
        prop_assert_eq!(one.c_lo, one.c_hi);
        prop_assert!(one.c_lo > 0.0);
        let scaled = inverse_t::lipschitz_certificate(&g, 0.3, alpha(), grid, &[rho.scaled(c)]).unwrap();
        prop_assert!((scaled.c_lo - one.c_lo).abs() < 1e-12 * one.c_lo);
    }

    #[test]
    fn larger_mu_never_grows_the_source(mu1 in 1e-14f64..1e-4, factor in 1.0f64..100.0) {
        let d = Domain1D::new(1.0, 16).unwrap();
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let rho = TimeSeries::from_fn(grid, |t| 1.0 + t);
        let g = bump(d, 0.4, 0.5);
        let ut = ForwardSolver::new(d, grid, alpha()).unwrap().solve_separated(&g, &rho).unwrap().at_time(64);
        let norm = |mu: f64| {
            let reg = FinalRegularization { cutoff: 0.0, tikhonov: Some(mu) };
            let p = XSourceFinalProblem::new(rho.clone(), alpha(), ut.clone()).unwrap().with_reg(reg);
            reconstruct_final(&p).unwrap().recovered.l2_norm()
        };
        prop_assert!(norm(mu1 * factor) <= norm(mu1) * (1.0 + 1e-12));
    }
}

#[test]
fn distinct_polynomial_sources_have_distinct_traces() {
    let d = Domain1D::new(1.0, 48).unwrap();
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let s = ForwardSolver::new(d, grid, alpha()).unwrap();
    let g = bump(d, 0.7, 0.3);
    let polys: [fn(f64) -> f64; 4] = [|_| 1.0, |t| 1.0 + t, |t| t * t, |t| 1.0 - 2.0 * t + t * t];
    // x0 = 0.2 lies outside supp g = [0.55, 0.85]
    for x0 in [0.2, 0.7] {
        let traces: Vec<TimeSeries> = polys
            .iter()
            .map(|f| trace(&s, &g, x0, &TimeSeries::from_fn(grid, f)))
            .collect();
        for i in 0..traces.len() {
            for j in i + 1..traces.len() {
                let gap = traces[i].sub(&traces[j]).unwrap().l1_norm();
                assert!(gap > 1e-9, "x0 = {x0}, pair ({i}, {j}): {gap:e}");
            }
        }
    }
}

#[test]
fn doubling_k_roughly_doubles_iterations() {
    let d = Domain1D::new(1.0, 32).unwrap();
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let s = ForwardSolver::new(d, grid, alpha()).unwrap();
    let g = bump(d, 0.5, 1.0);
    let rho = TimeSeries::from_fn(grid, |t| 1.0 + t);
    let p = TSourceProblem::new(g.clone(), 0.3, alpha(), trace(&s, &g, 0.3, &rho))
        .unwrap()
        .with_truth(rho);
    let k = inverse_t::fixed_point_bound(&p).unwrap();
    let hit = |k: f64| {
        let r = inverse_t::fixed_point_iterate(&p, k, 400, 0.0).unwrap();
        r.error_history.iter().position(|&e| e <= 1e-2).unwrap() + 1
    };
    let (m1, m2) = (hit(k), hit(2.0 * k));
    let ratio = m2 as f64 / m1 as f64;
    assert!((1.6..=2.6).contains(&ratio), "{m1} vs {m2}");
}

#[test]
fn noisy_trace_is_mollified() {
    let d = Domain1D::new(1.0, 32).unwrap();
    let grid = TimeGrid::new(1.0, 256).unwrap();
    let s = ForwardSolver::new(d, grid, alpha()).unwrap();
    let g = bump(d, 0.5, 1.0);
    let rho = TimeSeries::from_fn(grid, |t| 1.0 + t);
    let clean = trace(&s, &g, 0.3, &rho);
    let mut noisy = fracsource::cli::add_noise(&clean, 0.02, 9);
    noisy.values_mut()[0] = 0.0;
    let raw = TSourceProblem::new(g.clone(), 0.3, alpha(), noisy.clone())
        .unwrap()
        .with_truth(rho.clone());
    let smoothed = raw.clone().with_noise_level(0.02);
    let e_raw = inverse_t::solve_volterra(&raw).unwrap().rel_error.unwrap();
    let e_smooth = inverse_t::solve_volterra(&smoothed).unwrap().rel_error.unwrap();
    assert!(e_smooth < e_raw, "{e_smooth} vs {e_raw}");
}

#[test]
fn q_kernel_stays_bounded_near_zero() {
    let d = Domain1D::new(1.0, 64).unwrap();
    let grid = TimeGrid::new(1.0, 512).unwrap();
    let g = bump(d, 0.5, 1.0);
    let q = kernel_q(&g, 0.3, alpha(), grid).unwrap();
    // g is smooth, so γ = 1 is admissible: ε' = (1 − 1/4)/2
    let eps = 0.375;
    let w: Vec<f64> = (1..=512)
        .map(|k| q.value(k).abs() * grid.node(k).powf(1.0 - 0.5 * eps))
        .collect();
    let early = w[..16].iter().copied().fold(0.0, f64::max);
    let all = w.iter().copied().fold(0.0, f64::max);
    assert!(early.is_finite() && early <= all);
}

#[test]
fn modal_response_matches_closed_form() {
    let grid = TimeGrid::new(2.0, 128).unwrap();
    let rho = TimeSeries::from_fn(grid, |_| 1.0);
    let p = MlParams::new(0.4, 1.4).unwrap();
    let mut prev = f64::INFINITY;
    for n in 1..=10 {
        let lam = (n as f64 * PI / 1.5).powi(2);
        let b = modal_response(lam, &rho, FractionalOrder::new(0.4).unwrap()).unwrap();
        let want = 2f64.powf(0.4) * ml_eval(&p, -lam * 2f64.powf(0.4)).unwrap();
        assert!((b - want).abs() < 1e-12 * want);
        assert!(b < prev);
        prev = b;
    }
}

#[test]
fn discrepancy_principle_matches_noise() {
    let d = Domain1D::new(1.0, 32).unwrap();
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let rho = TimeSeries::from_fn(grid, |t| 1.0 + t);
    let g = bump(d, 0.4, 0.5);
    let ut = ForwardSolver::new(d, grid, alpha()).unwrap().solve_separated(&g, &rho).unwrap().at_time(128);
    let noise: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * 1e-3 * ut.l2_norm() / 32f64.sqrt()).collect();
    let noisy = SpectralField::new(d, ut.coeffs().iter().zip(&noise).map(|(a, b)| a + b).collect()).unwrap();
    let level = 1e-3;
    let p = XSourceFinalProblem::new(rho, alpha(), noisy.clone()).unwrap().with_noise_level(level).with_truth(g);
    let r = reconstruct_final(&p).unwrap();
    let target = level * noisy.l2_norm();
    let got = r.parameter("discrepancy").unwrap();
    assert!((got - target).abs() < 1e-6 * target, "{got} vs {target}");
    assert!(r.parameter("mu").unwrap() > 0.0);
    assert!(r.rel_error.unwrap() < 0.5);
}

fn interior(beta: f64, m_max: usize, tol: f64) -> (XSourceInteriorProblem, SpectralField) {
    let d = Domain1D::new(1.0, 8).unwrap();
    let grid = TimeGrid::new(1.0, 48).unwrap();
    let rho = TimeSeries::from_fn(grid, |t| 1.0 + 0.5 * t);
    let g = SpectralField::new(d, vec![1.0, 0.4, -0.2, 0.1, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let u = ForwardSolver::new(d, grid, alpha()).unwrap().solve_separated(&g, &rho).unwrap();
    let omega = (0.2, 0.8);
    let params = Thresholding { k: 1.0, beta, m_max, tol };
    let p = XSourceInteriorProblem::new(rho, alpha(), omega, inverse_x::restrict_to_omega(&u, omega), params).unwrap();
    (p, g)
}

#[test]
fn estimate_k_is_stable_and_quadratic_in_rho() {
    let (p, _) = interior(1e-8, 10, 0.0);
    let (k20, k40) = (estimate_k(&p, 20).unwrap(), estimate_k(&p, 40).unwrap());
    assert!((k20 - k40).abs() < 0.05 * k40);
    let mut scaled = p.clone();
    scaled.rho = p.rho.scaled(3.0);
    let k = estimate_k(&scaled, 40).unwrap();
    assert!((k - 9.0 * k40).abs() < 1e-10 * k);
    let mut zero = p.clone();
    zero.rho = TimeSeries::zeros(*p.grid());
    assert_eq!(estimate_k(&zero, 10).unwrap(), 0.0);
    assert!(estimate_k(&p, 4).is_err());
}

#[test]
fn stronger_damping_trades_fit_for_norm() {
    let (probe, _) = interior(1e-8, 10, 0.0);
    let k = 1.1 * estimate_k(&probe, 30).unwrap();
    let run = |beta: f64| {
        let (mut p, _) = interior(beta, 20000, 1e-13);
        p.thresholding.k = k;
        let r = iterative_thresholding(&p).unwrap();
        assert!(r.converged);
        assert_eq!(r.parameter("damped_update_violations"), Some(0.0));
        (r.recovered.l2_norm(), *r.residual_history.last().unwrap())
    };
    let (n1, r1) = run(0.01 * k);
    let (n2, r2) = run(0.1 * k);
    assert!(n2 < n1 && r2 > r1, "norms {n1} {n2}, residuals {r1} {r2}");
}

#[test]
fn thresholding_detects_divergence() {
    let (mut p, _) = interior(1e-8, 100, 0.0);
    let k = estimate_k(&p, 30).unwrap();
    // K far below the operator norm makes the iteration expand
    p.thresholding.k = 0.05 * k;
    assert!(matches!(iterative_thresholding(&p), Err(Error::Divergence { .. })));
}

#[test]
fn zero_observation_keeps_zero() {
    let (mut p, _) = interior(1e-3, 10, 0.0);
    p.observed = EvolutionField::zeros(*p.domain(), *p.grid());
    let r = iterative_thresholding(&p).unwrap();
    assert!(r.recovered.coeffs().iter().all(|&c| c == 0.0));
}

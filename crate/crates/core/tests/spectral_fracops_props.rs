use fracsource::fracops::{caputo_l1, rl_integral_backward, rl_integral_forward, FractionalOrder, TimeGrid, TimeSeries};
use fracsource::spectral::{simpson_weights, Domain1D, SpectralField};
use proptest::prelude::*;

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sample_then_project_is_identity(c in coeffs(12), l in 0.5f64..3.0) {
        let d = Domain1D::new(l, 12).unwrap();
        let f = SpectralField::new(d, c).unwrap();
        let mesh = d.mesh(8 * 12);
        let p = SpectralField::project(&f.sample(&mesh).unwrap(), d).unwrap();
        for (a, b) in p.coeffs().iter().zip(f.coeffs()) {
            prop_assert!((a - b).abs() < 1e-10 * (1.0 + f.l2_norm()));
        }
    }

    #[test]
    fn parseval(c in coeffs(10)) {
        let d = Domain1D::new(1.0, 10).unwrap();
        let f = SpectralField::new(d, c).unwrap();
        let m = 200;
        let w = simpson_weights(m, 1.0 / m as f64);
        let s = f.sample(&d.mesh(m)).unwrap();
        let quad: f64 = s.iter().zip(&w).map(|(v, w)| w * v * v).sum();
        prop_assert!((quad.sqrt() - f.l2_norm()).abs() < 1e-8 * (1.0 + f.l2_norm()));
    }

    #[test]
    fn sobolev_norm_grows_with_order(c in coeffs(8), g1 in 0.0f64..1.0, dg in 0.0f64..1.0) {
        // λ_n ≥ π² > 1 on the unit interval
        let f = SpectralField::new(Domain1D::new(1.0, 8).unwrap(), c).unwrap();
        prop_assert!(f.sobolev_norm(g1).unwrap() <= f.sobolev_norm(g1 + dg).unwrap() * (1.0 + 1e-14));
    }

    #[test]
    fn caputo_is_linear(a in 0.05f64..0.95, p in -3.0f64..3.0, q in -3.0f64..3.0) {
        let grid = TimeGrid::new(2.0, 64).unwrap();
        let alpha = FractionalOrder::new(a).unwrap();
        let f = TimeSeries::from_fn(grid, |t| (t * 1.3).sin());
        let g = TimeSeries::from_fn(grid, |t| t * t - t);
        let lhs = caputo_l1(&f.scaled(p).add(&g.scaled(q)).unwrap(), alpha);
        let rhs = caputo_l1(&f, alpha).scaled(p).add(&caputo_l1(&g, alpha).scaled(q)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn integral_preserves_sign(a in 0.05f64..1.0, shift in 0.0f64..2.0) {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let f = TimeSeries::from_fn(grid, |t| (5.0 * t).cos() + 1.0 + shift);
        prop_assert!(rl_integral_forward(&f, a).unwrap().values().iter().all(|&v| v >= 0.0));
        prop_assert!(rl_integral_backward(&f, a).unwrap().values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn fractional_integrals_compose() {
    let grid = TimeGrid::new(1.0, 400).unwrap();
    let f = TimeSeries::from_fn(grid, |t| (2.0 * t).sin() + t * t);
    for (a, b) in [(0.3, 0.4), (0.5, 0.5), (0.2, 0.7)] {
        let two = rl_integral_forward(&rl_integral_forward(&f, a).unwrap(), b).unwrap();
        let one = rl_integral_forward(&f, a + b).unwrap();
        let err = two.sub(&one).unwrap().max_abs();
        assert!(err < 1e-4, "a = {a}, b = {b}: {err:e}");
    }
}

#[test]
fn caputo_of_power_converges() {
    // D^α t^3 = 6 t^{3−α}/Γ(4−α)
    let a = 0.4;
    let alpha = FractionalOrder::new(a).unwrap();
    let c = 6.0 / fracsource::mlf::gamma(4.0 - a);
    let err = |n: usize| {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let d = caputo_l1(&TimeSeries::from_fn(grid, |t| t.powi(3)), alpha);
        grid.nodes()
            .iter()
            .zip(d.values())
            .fold(0.0f64, |m, (t, v)| m.max((v - c * t.powf(3.0 - a)).abs()))
    };
    let slope = (err(128) / err(256)).log2();
    assert!((slope - (2.0 - a)).abs() < 0.2, "{slope}");
}

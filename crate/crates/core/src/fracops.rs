//! Discrete fractional calculus on a uniform grid t_k = kτ, k = 0..=n.
//!
//! Every weakly singular convolution here is a product-trapezoid rule: the
//! smooth factor is replaced by its piecewise-linear interpolant and the
//! kernel is integrated exactly against each hat function. The moments only
//! need the kernel's first and second antiderivatives at the nodes, which is
//! what [`ConvolutionWeights::from_antiderivatives`] takes.

use crate::error::{invalid, Error, Result};
use crate::mlf::{gamma, rgamma};

/// Caputo order α ∈ (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid("alpha", format!("{alpha} is outside (0, 1)")));
        }
        Ok(FractionalOrder(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(invalid("T", format!("{t_final} is not a positive number")));
        }
        if n_steps < 2 {
            return Err(invalid("n_steps", format!("{n_steps} < 2")));
        }
        Ok(TimeGrid { t_final, n_steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_final
        } else {
            k as f64 * self.tau()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    /// Trapezoid weights for ∫_0^T.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let tau = self.tau();
        let mut w = vec![tau; self.len()];
        w[0] = 0.5 * tau;
        w[self.n_steps] = 0.5 * tau;
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(
                "values",
                format!("expected {} samples, got {}", grid.len(), values.len()),
            ));
        }
        Ok(TimeSeries { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        TimeSeries {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        TimeSeries {
            grid,
            values: grid.nodes().into_iter().map(f).collect(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// t ↦ f(T − t).
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        TimeSeries {
            grid: self.grid,
            values,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        TimeSeries {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &TimeSeries, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(TimeSeries {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &TimeSeries) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &TimeSeries) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// ∫_0^T f g dt by the trapezoid rule.
    pub fn inner(&self, other: &TimeSeries) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .grid
            .trapezoid_weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// L²(0, T) norm by the trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).unwrap_or(0.0).sqrt()
    }

    /// L¹(0, T) norm by the trapezoid rule.
    pub fn l1_norm(&self) -> f64 {
        self.grid
            .trapezoid_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs())
            .sum()
    }

    /// ‖self − truth‖_{L²} / ‖truth‖_{L²} (absolute error if truth is 0).
    pub fn rel_l2_error(&self, truth: &TimeSeries) -> Result<f64> {
        let e = self.sub(truth)?.l2_norm();
        let n = truth.l2_norm();
        Ok(if n > 0.0 { e / n } else { e })
    }

    fn check_grid(&self, other: &TimeSeries) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch { what: "time series" });
        }
        Ok(())
    }
}

/// Product-integration weights for u_k = ∫_0^{t_k} K(s) f(t_k − s) ds with f
/// piecewise linear: on [s_i, s_{i+1}] the kernel moments against the left
/// and right hat functions are `left[i]` and `right[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionWeights {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl ConvolutionWeights {
    pub fn from_moments(left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.len() != right.len() || left.is_empty() {
            return Err(invalid("moments", "left and right moments must match in length"));
        }
        Ok(ConvolutionWeights { left, right })
    }

    /// Moments from node values of G1' = K and G2' = G1:
    /// ∫K = ΔG1, right = G1(s_{i+1}) − ΔG2/τ, left = ∫K − right.
    pub fn from_antiderivatives(g1: &[f64], g2: &[f64], tau: f64) -> Result<Self> {
        if g1.len() != g2.len() || g1.len() < 2 {
            return Err(invalid("antiderivatives", "need matching node values"));
        }
        let n = g1.len() - 1;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for i in 0..n {
            let total = g1[i + 1] - g1[i];
            let r = g1[i + 1] - (g2[i + 1] - g2[i]) / tau;
            right.push(r);
            left.push(total - r);
        }
        Ok(ConvolutionWeights { left, right })
    }

    /// Kernel s^{p−1}/Γ(p) of the Riemann-Liouville integral of order p.
    pub fn riemann_liouville(order: f64, grid: &TimeGrid) -> Self {
        let c1 = rgamma(order + 1.0);
        let c2 = rgamma(order + 2.0);
        let nodes = grid.nodes();
        let g1: Vec<f64> = nodes.iter().map(|t| c1 * t.powf(order)).collect();
        let g2: Vec<f64> = nodes.iter().map(|t| c2 * t.powf(order + 1.0)).collect();
        Self::from_antiderivatives(&g1, &g2, grid.tau()).expect("grid has at least three nodes")
    }

    pub fn n_steps(&self) -> usize {
        self.left.len()
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    /// Σ c_j W_j for weights on a common grid.
    pub fn linear_combination<'a>(
        terms: impl IntoIterator<Item = (f64, &'a ConvolutionWeights)>,
        n_steps: usize,
    ) -> Self {
        let mut left = vec![0.0; n_steps];
        let mut right = vec![0.0; n_steps];
        for (c, w) in terms {
            for i in 0..n_steps {
                left[i] += c * w.left[i];
                right[i] += c * w.right[i];
            }
        }
        ConvolutionWeights { left, right }
    }

    /// Node weights: u_k = Σ_{j=1}^{k} w_{k−j} f_j + right[k−1]·f_0.
    pub fn node_weights(&self) -> Vec<f64> {
        let n = self.left.len();
        let mut w = Vec::with_capacity(n);
        w.push(self.left[0]);
        for i in 1..n {
            w.push(self.left[i] + self.right[i - 1]);
        }
        w
    }

    /// u_k for k = 0..=n; u_0 = 0.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.left.len();
        assert_eq!(f.len(), n + 1, "series length does not match the weights");
        let w = self.node_weights();
        let mut u = vec![0.0; n + 1];
        for k in 1..=n {
            let mut acc = self.right[k - 1] * f[0];
            for j in 1..=k {
                acc += w[k - j] * f[j];
            }
            u[k] = acc;
        }
        u
    }
}

/// L1 approximation of the Caputo derivative; node 0 is set to 0.
pub fn caputo_l1(f: &TimeSeries, alpha: FractionalOrder) -> TimeSeries {
    let a = alpha.value();
    let n = f.grid.n_steps;
    let b: Vec<f64> = (0..n)
        .map(|j| ((j + 1) as f64).powf(1.0 - a) - (j as f64).powf(1.0 - a))
        .collect();
    let scale = f.grid.tau().powf(-a) / gamma(2.0 - a);
    let d: Vec<f64> = f.values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        let mut acc = 0.0;
        for j in 0..k {
            acc += b[j] * d[k - 1 - j];
        }
        out[k] = scale * acc;
    }
    TimeSeries {
        grid: f.grid,
        values: out,
    }
}

fn check_order(order: f64) -> Result<()> {
    if !(order > 0.0 && order <= 1.0) {
        return Err(invalid("order", format!("{order} is outside (0, 1]")));
    }
    Ok(())
}

/// J_{0+}^order f by the product-trapezoid rule.
pub fn rl_integral_forward(f: &TimeSeries, order: f64) -> Result<TimeSeries> {
    check_order(order)?;
    let w = ConvolutionWeights::riemann_liouville(order, &f.grid);
    TimeSeries::new(f.grid, w.apply(&f.values))
}

/// J_{T−}^order f, computed as reverse ∘ forward ∘ reverse.
pub fn rl_integral_backward(f: &TimeSeries, order: f64) -> Result<TimeSeries> {
    Ok(rl_integral_forward(&f.reversed(), order)?.reversed())
}

/// t ↦ ∫_0^t s^{p−1} k(s) f(t − s) ds, with the product k(s)f(t − s)
/// interpolated linearly between nodes and s^{p−1} integrated exactly.
pub fn weakly_singular_convolve(
    kernel_power: f64,
    smooth_factor: &TimeSeries,
    f: &TimeSeries,
) -> Result<TimeSeries> {
    check_order(kernel_power)?;
    smooth_factor.check_grid(f)?;
    let grid = f.grid;
    let p = kernel_power;
    let nodes = grid.nodes();
    let g1: Vec<f64> = nodes.iter().map(|t| t.powf(p) / p).collect();
    let g2: Vec<f64> = nodes.iter().map(|t| t.powf(p + 1.0) / (p * (p + 1.0))).collect();
    let w = ConvolutionWeights::from_antiderivatives(&g1, &g2, grid.tau())?;
    let k = &smooth_factor.values;
    let mut out = vec![0.0; grid.len()];
    for (kk, o) in out.iter_mut().enumerate().skip(1) {
        let mut acc = 0.0;
        for i in 0..kk {
            acc += w.left[i] * k[i] * f.values[kk - i] + w.right[i] * k[i + 1] * f.values[kk - i - 1];
        }
        *o = acc;
    }
    TimeSeries::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(FractionalOrder::new(1.0).is_err());
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(-1.0, 10).is_err());
        assert!(TimeSeries::new(grid(4), vec![0.0; 4]).is_err());
        let f = TimeSeries::zeros(grid(4));
        assert!(rl_integral_forward(&f, 1.5).is_err());
        assert!(weakly_singular_convolve(0.0, &f, &f).is_err());
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let f = TimeSeries::from_fn(grid(64), |_| 3.0);
        let d = caputo_l1(&f, FractionalOrder::new(0.4).unwrap());
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn caputo_of_linear_is_exact() {
        let a = 0.3;
        let g = grid(50);
        let f = TimeSeries::from_fn(g, |t| t);
        let d = caputo_l1(&f, FractionalOrder::new(a).unwrap());
        for (k, t) in g.nodes().into_iter().enumerate().skip(1) {
            let want = t.powf(1.0 - a) / gamma(2.0 - a);
            assert!((d.values()[k] - want).abs() < 1e-13);
        }
    }

    #[test]
    fn rl_of_constant_and_linear_is_exact() {
        let a = 0.6;
        let g = grid(40);
        let one = TimeSeries::from_fn(g, |_| 1.0);
        let lin = TimeSeries::from_fn(g, |t| t);
        let j1 = rl_integral_forward(&one, a).unwrap();
        let jt = rl_integral_forward(&lin, a).unwrap();
        for (k, t) in g.nodes().into_iter().enumerate() {
            assert!((j1.values()[k] - t.powf(a) / gamma(a + 1.0)).abs() < 1e-14);
            assert!((jt.values()[k] - t.powf(a + 1.0) / gamma(a + 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn order_one_is_cumulative_trapezoid() {
        let g = grid(20);
        let f = TimeSeries::from_fn(g, |t| (3.0 * t).sin());
        let j = rl_integral_forward(&f, 1.0).unwrap();
        let mut acc = 0.0;
        for k in 1..=20 {
            acc += 0.5 * g.tau() * (f.values()[k - 1] + f.values()[k]);
            assert!((j.values()[k] - acc).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_mirrors_forward() {
        let a = 0.35;
        let g = TimeGrid::new(2.0, 30).unwrap();
        let one = TimeSeries::from_fn(g, |_| 1.0);
        let b = rl_integral_backward(&one, a).unwrap();
        for (k, t) in g.nodes().into_iter().enumerate() {
            assert!((b.values()[k] - (2.0 - t).powf(a) / gamma(a + 1.0)).abs() < 1e-13);
        }
        let f = TimeSeries::from_fn(g, |t| t * t + 1.0);
        let b1 = rl_integral_backward(&f, a).unwrap();
        let b2 = rl_integral_forward(&f.reversed(), a).unwrap().reversed();
        assert_eq!(b1, b2);
        let b = rl_integral_backward(&one, 1.0).unwrap();
        for (k, t) in g.nodes().into_iter().enumerate() {
            assert!((b.values()[k] - (2.0 - t)).abs() < 1e-14);
        }
    }

    #[test]
    fn convolution_trivial_cases() {
        let g = grid(16);
        let one = TimeSeries::from_fn(g, |_| 1.0);
        let u = weakly_singular_convolve(1.0, &one, &one).unwrap();
        for (k, t) in g.nodes().into_iter().enumerate() {
            assert!((u.values()[k] - t).abs() < 1e-14);
        }
        let a = 0.45;
        let u = weakly_singular_convolve(a, &one, &one).unwrap();
        for (k, t) in g.nodes().into_iter().enumerate() {
            assert!((u.values()[k] - t.powf(a) / a).abs() < 1e-14);
        }
    }

    #[test]
    fn weights_from_antiderivatives_match_direct_rule() {
        let g = grid(12);
        let a = 0.5;
        let w = ConvolutionWeights::riemann_liouville(a, &g);
        let f = TimeSeries::from_fn(g, |t| (t * 2.0).cos());
        let direct = weakly_singular_convolve(a, &TimeSeries::from_fn(g, |_| 1.0), &f).unwrap();
        let via = w.apply(f.values());
        for k in 0..=12 {
            assert!((via[k] - direct.values()[k] / gamma(a)).abs() < 1e-14);
        }
    }
}

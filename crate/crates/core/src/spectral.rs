//! Functions on (0, L) in the Dirichlet sine basis
//! φ_n(x) = sqrt(2/L) sin(nπx/L), with eigenvalues λ_n = (nπ/L)².

use crate::error::{invalid, Error, Result};
use std::f64::consts::PI;

pub const DEFAULT_MODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain1D {
    length: f64,
    n_modes: usize,
}

impl Domain1D {
    pub fn new(length: f64, n_modes: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("length", format!("{length} is not a positive number")));
        }
        if n_modes == 0 {
            return Err(invalid("n_modes", "need at least one mode"));
        }
        Ok(Domain1D { length, n_modes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// λ_n for n = 1..=N.
    pub fn eigenvalue(&self, n: usize) -> f64 {
        let k = n as f64 * PI / self.length;
        k * k
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.n_modes).map(|n| self.eigenvalue(n)).collect()
    }

    /// φ_n(x), n ≥ 1.
    pub fn eigenfunction(&self, n: usize, x: f64) -> f64 {
        (2.0 / self.length).sqrt() * (n as f64 * PI * x / self.length).sin()
    }

    /// (φ_1(x), …, φ_N(x)).
    pub fn eigenfunctions_at(&self, x: f64) -> Vec<f64> {
        (1..=self.n_modes).map(|n| self.eigenfunction(n, x)).collect()
    }

    /// Smallest even interval count whose interior points number at least
    /// 2N+1.
    pub fn min_mesh_intervals(&self) -> usize {
        let m = 2 * self.n_modes + 2;
        m + m % 2
    }

    /// Uniform mesh x_j = jL/M, j = 0..=M.
    pub fn mesh(&self, intervals: usize) -> Vec<f64> {
        let mut x: Vec<f64> = (0..=intervals)
            .map(|j| j as f64 * self.length / intervals as f64)
            .collect();
        x[intervals] = self.length;
        x
    }

    pub fn contains(&self, x: f64) -> bool {
        (0.0..=self.length).contains(&x)
    }
}

/// Composite Simpson weights on M (even) equal intervals of width h.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = if j == 0 || j == intervals {
            h / 3.0
        } else if j % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    domain: Domain1D,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(domain: Domain1D, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != domain.n_modes {
            return Err(invalid(
                "coeffs",
                format!("expected {} coefficients, got {}", domain.n_modes, coeffs.len()),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coeffs", "non-finite coefficient"));
        }
        Ok(SpectralField { domain, coeffs })
    }

    pub fn zeros(domain: Domain1D) -> Self {
        SpectralField {
            domain,
            coeffs: vec![0.0; domain.n_modes],
        }
    }

    /// The single eigenfunction φ_n (1-based).
    pub fn mode(domain: Domain1D, n: usize) -> Result<Self> {
        if n == 0 || n > domain.n_modes {
            return Err(invalid("mode", format!("{n} is outside 1..={}", domain.n_modes)));
        }
        let mut f = Self::zeros(domain);
        f.coeffs[n - 1] = 1.0;
        Ok(f)
    }

    pub fn domain(&self) -> &Domain1D {
        &self.domain
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scaled(&self, c: f64) -> Self {
        SpectralField {
            domain: self.domain,
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    /// Σ coeffs_n φ_n(x).
    pub fn eval_at(&self, x: f64) -> Result<f64> {
        if !self.domain.contains(x) {
            return Err(Error::OutOfDomain {
                x,
                length: self.domain.length,
            });
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.domain.eigenfunction(i + 1, x))
            .sum())
    }

    /// Values on a set of points inside [0, L].
    pub fn sample(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.eval_at(x)).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// ‖f‖ in D((−Δ)^γ): (Σ |λ_n^γ f_n|²)^{1/2}.
    pub fn sobolev_norm(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid("gamma", format!("{gamma} must be finite and >= 0")));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (self.domain.eigenvalue(i + 1).powf(gamma) * c).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Root-sum-square of the upper quarter of the coefficients relative to
    /// the full norm; a cheap indicator of truncation error.
    pub fn tail_estimate(&self) -> f64 {
        let n = self.coeffs.len();
        let start = n - n.div_ceil(4);
        let tail: f64 = self.coeffs[start..].iter().map(|c| c * c).sum::<f64>().sqrt();
        let total = self.l2_norm();
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    /// Coefficients (f, φ_n) from samples on the uniform mesh x_j = jL/M,
    /// j = 0..=M, by composite Simpson quadrature. M must be even with at
    /// least 2N+1 interior points.
    pub fn project(samples: &[f64], domain: Domain1D) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("samples", "need at least two mesh values"));
        }
        let m = samples.len() - 1;
        let needed = domain.min_mesh_intervals();
        if m % 2 == 1 || m < needed {
            return Err(Error::MeshTooCoarse {
                intervals: m,
                modes: domain.n_modes,
                needed,
            });
        }
        let h = domain.length / m as f64;
        let w = simpson_weights(m, h);
        let coeffs = (1..=domain.n_modes)
            .map(|n| {
                samples
                    .iter()
                    .zip(&w)
                    .enumerate()
                    .map(|(j, (f, wj))| wj * f * domain.eigenfunction(n, j as f64 * h))
                    .sum()
            })
            .collect();
        SpectralField::new(domain, coeffs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_synthesis() {
        let d = Domain1D::new(2.0, 8).unwrap();
        let f = SpectralField::mode(d, 1).unwrap();
        assert!((f.eval_at(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(SpectralField::zeros(d).eval_at(0.3).unwrap(), 0.0);
        assert!(f.eval_at(2.5).is_err());
    }

    #[test]
    fn sobolev_norms() {
        let d = Domain1D::new(1.0, 4).unwrap();
        let f = SpectralField::mode(d, 1).unwrap();
        assert!((f.sobolev_norm(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((f.sobolev_norm(1.0).unwrap() - PI * PI).abs() < 1e-12);
        let g = SpectralField::new(d, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let want = (d.eigenvalue(1) + d.eigenvalue(2)).sqrt();
        assert!((g.sobolev_norm(0.5).unwrap() - want).abs() < 1e-12);
        assert!(g.sobolev_norm(-1.0).is_err());
    }

    #[test]
    fn projection_of_modes() {
        let d = Domain1D::new(1.0, 16).unwrap();
        let mesh = d.mesh(64);
        let f = SpectralField::new(d, {
            let mut c = vec![0.0; 16];
            c[0] = 1.0;
            c[2] = 0.5;
            c
        })
        .unwrap();
        let p = SpectralField::project(&f.sample(&mesh).unwrap(), d).unwrap();
        for (a, b) in p.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let z = SpectralField::project(&vec![0.0; 65], d).unwrap();
        assert_eq!(z.l2_norm(), 0.0);
    }

    #[test]
    fn coarse_or_odd_mesh_rejected() {
        let d = Domain1D::new(1.0, 16).unwrap();
        assert!(matches!(
            SpectralField::project(&vec![0.0; 31], d),
            Err(Error::MeshTooCoarse { .. })
        ));
        assert!(SpectralField::project(&vec![0.0; 66], d).is_err());
    }

    #[test]
    fn parabola_matches_sine_series() {
        // x(L-x) has coefficients sqrt(2/L)·4L³/(nπ)³ for odd n, 0 for even
        let l = 1.5;
        let d = Domain1D::new(l, 32).unwrap();
        let mesh = d.mesh(400);
        let samples: Vec<f64> = mesh.iter().map(|x| x * (l - x)).collect();
        let p = SpectralField::project(&samples, d).unwrap();
        for (i, c) in p.coeffs().iter().enumerate() {
            let n = (i + 1) as f64;
            let want = if (i + 1) % 2 == 1 {
                (2.0 / l).sqrt() * 4.0 * l.powi(3) / (n * PI).powi(3)
            } else {
                0.0
            };
            // Simpson error grows like (nπh/L)^4
            let tol = 1e-9 * (1.0 + (n * PI * 400f64.recip()).powi(4) * 1e8);
            assert!((c - want).abs() < tol, "n = {n}: {c:e} vs {want:e}");
        }
        let exact = SpectralField::new(
            d,
            (1..=32)
                .map(|n| {
                    if n % 2 == 1 {
                        (2.0 / l).sqrt() * 4.0 * l.powi(3) / (n as f64 * PI).powi(3)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        for &x in &[0.1, 0.5, 0.75, 1.4] {
            // tail beyond 32 modes is below Σ_{n>32} 8L²/(n³π³)·sqrt(2/L)·sqrt(2/L)
            assert!((exact.eval_at(x).unwrap() - x * (l - x)).abs() < 2e-4);
        }
    }
}

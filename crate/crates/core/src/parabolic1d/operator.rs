//! Discrete `A`, `B` and `A + lambda B`, and one Crank-Nicolson step.

use num_complex::Complex64;

use super::coeffs::{CoefficientSet, Operator};
use super::grid::{GridMode, SpatialField, SpatialGrid};
use super::spectral;
use crate::{Error, Result};

/// `a u_xx + b u_x + c u` for `A` (or `rho u_xx + sigma u_x + nu u` for `B`) at time `t`.
pub fn apply_operator(
    field: &SpatialField,
    which: Operator,
    coeffs: &CoefficientSet,
    t: f64,
) -> Result<SpatialField> {
    let grid = *field.grid();
    let op = AssembledOperator::new(grid, coeffs.values(t, &grid).combined(Some(which), 0.0));
    Ok(SpatialField::from_raw(grid, op.apply(field.values())))
}

/// One Crank-Nicolson step for `du = (A + h B) u dt + forcing dt`:
/// `(I - dt/2 M) u_new = (I + dt/2 M) u_old + dt forcing`, where `M`
/// discretises `A + h_mid B` at `t + dt/2` and `forcing` is the midpoint value.
pub fn step(
    state: &SpatialField,
    forcing: &SpatialField,
    coeffs: &CoefficientSet,
    h_mid: f64,
    t: f64,
    dt: f64,
) -> Result<SpatialField> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let grid = *state.grid();
    forcing.check_grid(&grid)?;
    let values = coeffs.values(t + 0.5 * dt, &grid).combined(None, h_mid);
    let op = AssembledOperator::new(grid, values);
    let out = op.cn_step(state.values(), Some(forcing.values()), dt)?;
    Ok(SpatialField::from_raw(grid, out))
}

#[derive(Debug, Clone)]
enum Kind {
    /// Periodic grid with `x`-independent coefficients: diagonal in Fourier space.
    Diagonal { symbol: Vec<Complex64> },
    /// Periodic grid with variable coefficients.
    Spectral {
        second: Vec<f64>,
        first: Vec<f64>,
        zeroth: Vec<f64>,
        mean_symbol: Vec<Complex64>,
    },
    /// Bounded grid: tridiagonal central differences.
    Banded {
        lower: Vec<f64>,
        diag: Vec<f64>,
        upper: Vec<f64>,
    },
}

/// `p u_xx + q u_x + r u` frozen at one time, ready to apply or invert.
#[derive(Debug, Clone)]
pub(crate) struct AssembledOperator {
    grid: SpatialGrid,
    kind: Kind,
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&x| x == v[0])
}

fn symbol_of(grid: &SpatialGrid, p: f64, q: f64, r: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|m| {
            let y = grid.wavenumber(m);
            let yd = grid.derivative_wavenumber(m);
            Complex64::new(-p * y * y + r, q * yd)
        })
        .collect()
}

impl AssembledOperator {
    pub fn new(grid: SpatialGrid, [second, first, zeroth]: [Vec<f64>; 3]) -> Self {
        let kind = match grid.mode() {
            GridMode::PeriodicSpectral => {
                if is_constant(&second) && is_constant(&first) && is_constant(&zeroth) {
                    Kind::Diagonal {
                        symbol: symbol_of(&grid, second[0], first[0], zeroth[0]),
                    }
                } else {
                    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                    let mean_symbol = symbol_of(&grid, mean(&second), mean(&first), mean(&zeroth));
                    Kind::Spectral {
                        second,
                        first,
                        zeroth,
                        mean_symbol,
                    }
                }
            }
            GridMode::BoundedFiniteDifference => {
                let dx = grid.dx();
                let (i2, i1) = (1.0 / (dx * dx), 0.5 / dx);
                let n = grid.len();
                let mut lower = vec![0.0; n];
                let mut diag = vec![0.0; n];
                let mut upper = vec![0.0; n];
                for j in 0..n {
                    lower[j] = second[j] * i2 - first[j] * i1;
                    diag[j] = -2.0 * second[j] * i2 + zeroth[j];
                    upper[j] = second[j] * i2 + first[j] * i1;
                }
                Kind::Banded { lower, diag, upper }
            }
        };
        Self { grid, kind }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Diagonal { symbol } => {
                let fft = spectral::plans(self.grid.len());
                let mut spec = fft.forward_real(u);
                for (z, s) in spec.iter_mut().zip(symbol) {
                    *z *= s;
                }
                fft.inverse_real(spec)
            }
            Kind::Spectral {
                second,
                first,
                zeroth,
                ..
            } => {
                let fft = spectral::plans(self.grid.len());
                let spec = fft.forward_real(u);
                let d1: Vec<Complex64> = spec
                    .iter()
                    .enumerate()
                    .map(|(m, z)| z * Complex64::new(0.0, self.grid.derivative_wavenumber(m)))
                    .collect();
                let d2: Vec<Complex64> = spec
                    .iter()
                    .enumerate()
                    .map(|(m, z)| {
                        let y = self.grid.wavenumber(m);
                        z * (-y * y)
                    })
                    .collect();
                let ux = fft.inverse_real(d1);
                let uxx = fft.inverse_real(d2);
                (0..u.len())
                    .map(|j| second[j] * uxx[j] + first[j] * ux[j] + zeroth[j] * u[j])
                    .collect()
            }
            Kind::Banded { lower, diag, upper } => {
                let n = u.len();
                (0..n)
                    .map(|j| {
                        let left = if j == 0 { 0.0 } else { u[j - 1] };
                        let right = if j + 1 == n { 0.0 } else { u[j + 1] };
                        lower[j] * left + diag[j] * u[j] + upper[j] * right
                    })
                    .collect()
            }
        }
    }

    /// Crank-Nicolson update of `u` with midpoint forcing.
    pub fn cn_step(&self, u: &[f64], forcing: Option<&[f64]>, dt: f64) -> Result<Vec<f64>> {
        let half = 0.5 * dt;
        match &self.kind {
            Kind::Diagonal { symbol } => {
                let fft = spectral::plans(self.grid.len());
                let mut spec = fft.forward_real(u);
                let fspec = forcing.map(|f| fft.forward_real(f));
                for (m, z) in spec.iter_mut().enumerate() {
                    let s = symbol[m];
                    let denom = 1.0 - half * s;
                    if denom.norm() < 1e-300 {
                        return Err(Error::numerical(format!("singular Crank-Nicolson symbol at mode {m}")));
                    }
                    let mut rhs = (1.0 + half * s) * *z;
                    if let Some(fs) = &fspec {
                        rhs += dt * fs[m];
                    }
                    *z = rhs / denom;
                }
                Ok(fft.inverse_real(spec))
            }
            Kind::Spectral { mean_symbol, .. } => {
                let mu = self.apply(u);
                let rhs: Vec<f64> = (0..u.len())
                    .map(|j| u[j] + half * mu[j] + forcing.map_or(0.0, |f| dt * f[j]))
                    .collect();
                let fft = spectral::plans(self.grid.len());
                let precond = |r: &[f64]| -> Vec<f64> {
                    let mut spec = fft.forward_real(r);
                    for (z, s) in spec.iter_mut().zip(mean_symbol) {
                        *z /= 1.0 - half * s;
                    }
                    fft.inverse_real(spec)
                };
                let system = |x: &[f64]| -> Vec<f64> {
                    let mx = self.apply(x);
                    x.iter().zip(&mx).map(|(a, b)| a - half * b).collect()
                };
                bicgstab(system, precond, &rhs, 1e-13, 500)
            }
            Kind::Banded { lower, diag, upper } => {
                let mu = self.apply(u);
                let rhs: Vec<f64> = (0..u.len())
                    .map(|j| u[j] + half * mu[j] + forcing.map_or(0.0, |f| dt * f[j]))
                    .collect();
                let l: Vec<f64> = lower.iter().map(|v| -half * v).collect();
                let d: Vec<f64> = diag.iter().map(|v| 1.0 - half * v).collect();
                let up: Vec<f64> = upper.iter().map(|v| -half * v).collect();
                thomas(&l, &d, &up, &rhs)
            }
        }
    }
}

/// Solves the tridiagonal system `lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1] = rhs[j]`.
pub(crate) fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() < 1e-300 {
        return Err(Error::numerical("zero pivot in tridiagonal solve at row 0"));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for j in 1..n {
        beta = diag[j] - lower[j] * c[j - 1];
        if beta.abs() < 1e-300 || !beta.is_finite() {
            return Err(Error::numerical(format!("zero pivot in tridiagonal solve at row {j}")));
        }
        c[j] = upper[j] / beta;
        d[j] = (rhs[j] - lower[j] * d[j - 1]) / beta;
    }
    let mut x = d;
    for j in (0..n - 1).rev() {
        x[j] -= c[j] * x[j + 1];
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned BiCGSTAB for `A x = b` with preconditioner `K^{-1}`.
fn bicgstab<A, P>(apply: A, precond: P, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = precond(b);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        if dot(&r, &r).sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            return Err(Error::numerical("BiCGSTAB breakdown (rho = 0)"));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for j in 0..n {
            p[j] = r[j] + beta * (p[j] - omega * v[j]);
        }
        let y = precond(&p);
        v = apply(&y);
        alpha = rho_new / dot(&r_hat, &v);
        let s: Vec<f64> = (0..n).map(|j| r[j] - alpha * v[j]).collect();
        if dot(&s, &s).sqrt() <= tol * b_norm {
            for j in 0..n {
                x[j] += alpha * y[j];
            }
            return Ok(x);
        }
        let z = precond(&s);
        let t = apply(&z);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::numerical("BiCGSTAB breakdown (t = 0)"));
        }
        omega = dot(&t, &s) / tt;
        for j in 0..n {
            x[j] += alpha * y[j] + omega * z[j];
            r[j] = s[j] - omega * t[j];
        }
        rho = rho_new;
    }
    Err(Error::numerical(format!("BiCGSTAB did not converge in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic1d::coeffs::Forcing;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn variable_coeffs() -> CoefficientSet {
        let mut c = CoefficientSet::constant(1.0, 0.5, -1.0, 0.0, 0.0, 0.0);
        c.a = Arc::new(|_, x: f64| 1.0 + 0.1 * x.sin());
        c
    }

    #[test]
    fn laplacian_eigenfunction_periodic() {
        let l = 5.0;
        let grid = SpatialGrid::new(l, 64, GridMode::PeriodicSpectral).unwrap();
        let u = grid.sample(|x| (PI * x / l).sin());
        let c = CoefficientSet::constant(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let out = apply_operator(&u, Operator::Drift, &c, 0.0).unwrap();
        let k2 = (PI / l).powi(2);
        for (o, v) in out.values().iter().zip(u.values()) {
            assert!((o + k2 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplication_operator() {
        let grid = SpatialGrid::new(5.0, 32, GridMode::BoundedFiniteDifference).unwrap();
        let u = grid.sample(|x| (-x * x).exp());
        let c = CoefficientSet::constant(1.0, 0.0, 0.0, 0.0, 0.0, 2.0);
        let out = apply_operator(&u, Operator::Diffusion, &c, 0.0).unwrap();
        for (o, v) in out.values().iter().zip(u.values()) {
            assert_eq!(*o, 2.0 * v);
        }
    }

    /// Dense-matrix oracle: explicit difference stencil (bounded) or explicit
    /// O(n^2) DFT sums (periodic), assembled entry by entry.
    fn dense_apply(grid: &SpatialGrid, c: &CoefficientSet, u: &[f64]) -> Vec<f64> {
        let n = grid.len();
        let dx = grid.dx();
        let mut d1 = vec![vec![0.0; n]; n];
        let mut d2 = vec![vec![0.0; n]; n];
        match grid.mode() {
            GridMode::BoundedFiniteDifference => {
                for j in 0..n {
                    d2[j][j] = -2.0 / (dx * dx);
                    if j > 0 {
                        d2[j][j - 1] = 1.0 / (dx * dx);
                        d1[j][j - 1] = -0.5 / dx;
                    }
                    if j + 1 < n {
                        d2[j][j + 1] = 1.0 / (dx * dx);
                        d1[j][j + 1] = 0.5 / dx;
                    }
                }
            }
            GridMode::PeriodicSpectral => {
                // D[j][l] = (1/n) sum_m (i y_m)^p exp(2 pi i m (j - l) / n)
                for j in 0..n {
                    for l in 0..n {
                        let (mut s1, mut s2) = (0.0, 0.0);
                        for m in 0..n {
                            let y = grid.wavenumber(m);
                            let yd = if m == n / 2 { 0.0 } else { y };
                            let th = 2.0 * PI * (m as f64) * (j as f64 - l as f64) / n as f64;
                            s1 += -yd * th.sin();
                            s2 += -y * y * th.cos();
                        }
                        d1[j][l] = s1 / n as f64;
                        d2[j][l] = s2 / n as f64;
                    }
                }
            }
        }
        (0..n)
            .map(|j| {
                let x = grid.x(j);
                let uxx: f64 = (0..n).map(|l| d2[j][l] * u[l]).sum();
                let ux: f64 = (0..n).map(|l| d1[j][l] * u[l]).sum();
                (c.a)(0.0, x) * uxx + (c.b)(0.0, x) * ux + (c.c)(0.0, x) * u[j]
            })
            .collect()
    }

    #[test]
    fn variable_operator_matches_dense_oracle() {
        let c = variable_coeffs();
        for mode in [GridMode::BoundedFiniteDifference, GridMode::PeriodicSpectral] {
            let grid = SpatialGrid::new(8.0, 128, mode).unwrap();
            let u = grid.sample(|x| (-x * x / 2.0).exp());
            let fast = apply_operator(&u, Operator::Drift, &c, 0.0).unwrap();
            let dense = dense_apply(&grid, &c, u.values());
            let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in fast.values().iter().zip(&dense) {
                assert!((a - b).abs() <= 1e-12 * scale, "{mode:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_operator_step_is_quadrature() {
        let grid = SpatialGrid::new(5.0, 32, GridMode::PeriodicSpectral).unwrap();
        let c = CoefficientSet::constant(0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let u = grid.sample(|x| x.cos());
        let f = grid.sample(|x| (-x * x).exp());
        let dt = 0.01;
        let out = step(&u, &f, &c, 0.0, 0.0, dt).unwrap();
        for j in 0..grid.len() {
            assert!((out.values()[j] - (u.values()[j] + dt * f.values()[j])).abs() < 1e-14);
        }
    }

    #[test]
    fn heat_amplification_factor() {
        let l = 10.0;
        let grid = SpatialGrid::new(l, 128, GridMode::PeriodicSpectral).unwrap();
        let kappa = 3.0 * PI / l;
        let u = grid.sample(|x| (kappa * x).cos());
        let c = CoefficientSet::constant(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let dt = 0.05;
        let out = step(&u, &grid.zeros(), &c, 0.0, 0.0, dt).unwrap();
        let g = (1.0 - dt * kappa * kappa / 2.0) / (1.0 + dt * kappa * kappa / 2.0);
        for (o, v) in out.values().iter().zip(u.values()) {
            assert!((o - g * v).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        for mode in [GridMode::BoundedFiniteDifference, GridMode::PeriodicSpectral] {
            let grid = SpatialGrid::new(5.0, 64, mode).unwrap();
            let c = variable_coeffs();
            let out = step(&grid.zeros(), &grid.zeros(), &c, 0.3, 0.0, 0.01).unwrap();
            assert!(out.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn variable_periodic_cn_solves_the_implicit_system() {
        let grid = SpatialGrid::new(10.0, 128, GridMode::PeriodicSpectral).unwrap();
        let c = variable_coeffs();
        let u = grid.sample(|x| (-x * x / 2.0).exp());
        let dt = 0.01;
        let out = step(&u, &grid.zeros(), &c, 0.0, 0.0, dt).unwrap();
        // (I - dt/2 M) out == (I + dt/2 M) u
        let values = c.values(0.5 * dt, &grid).combined(None, 0.0);
        let op = AssembledOperator::new(grid, values);
        let (mo, mu) = (op.apply(out.values()), op.apply(u.values()));
        for j in 0..grid.len() {
            let lhs = out.values()[j] - 0.5 * dt * mo[j];
            let rhs = u.values()[j] + 0.5 * dt * mu[j];
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn thomas_matches_dense_solution() {
        let lower = [0.0, 1.0, -0.5, 0.25];
        let diag = [4.0, 5.0, 3.0, 2.0];
        let upper = [1.0, 0.5, 1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|j| {
                let l = if j > 0 { lower[j] * x[j - 1] } else { 0.0 };
                let u = if j < 3 { upper[j] * x[j + 1] } else { 0.0 };
                l + diag[j] * x[j] + u
            })
            .collect();
        let sol = thomas(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in sol.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(thomas(&[0.0], &[0.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn forcing_sampling() {
        let grid = SpatialGrid::new(5.0, 16, GridMode::PeriodicSpectral).unwrap();
        assert!(Forcing::Zero.sample(&grid, 0.0).is_none());
        let f = Forcing::function(|t, x| t + x);
        assert_eq!(f.sample(&grid, 1.0).unwrap()[0], 1.0 - 5.0);
        assert_eq!(f.scaled(2.0).sample(&grid, 1.0).unwrap()[0], 2.0 * (1.0 - 5.0));
    }
}

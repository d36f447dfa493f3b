//! The Fourier cosine basis `m_k` of `L2((0, T))`, Hermite polynomials and
//! the Cameron-Martin functionals `xi_alpha`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::multiindex::MultiIndex;
use crate::{Error, Result};

// Slack for time arguments that land a rounding error outside [0, T].
const TIME_SLACK: f64 = 1e-12;

/// Horizon `T` with a uniform grid of `steps` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    horizon: f64,
    steps: usize,
}

impl TimeInterval {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        if steps < 2 {
            return Err(Error::domain(format!("need at least 2 time steps, got {steps}")));
        }
        Ok(Self { horizon, steps })
    }

    /// Interval with step close to `dt` (the step count is rounded).
    pub fn with_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!("time step must be positive, got {dt}")));
        }
        Self::new(horizon, (horizon / dt).round().max(1.0) as usize)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_j = j T / steps`.
    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.horizon
        } else {
            j as f64 * self.dt()
        }
    }

    /// All `steps + 1` grid times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// Grid index of time `t`, if `t` is a grid point up to rounding.
    pub fn step_of(&self, t: f64) -> Option<usize> {
        let j = (t / self.dt()).round();
        if j < 0.0 || j > self.steps as f64 {
            return None;
        }
        let j = j as usize;
        ((self.time(j) - t).abs() <= 1e-9 * self.horizon.max(1.0)).then_some(j)
    }
}

fn check_args(k: u32, t: f64, horizon: f64) -> Result<()> {
    if k < 1 {
        return Err(Error::domain("cosine basis index starts at 1"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let slack = TIME_SLACK * horizon;
    if !(t >= -slack && t <= horizon + slack) {
        return Err(Error::domain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(())
}

/// `m_k(t)`: `1/sqrt(T)` for `k = 1`, `sqrt(2/T) cos(pi (k-1) t / T)` otherwise.
pub fn cosine(k: u32, t: f64, horizon: f64) -> Result<f64> {
    check_args(k, t, horizon)?;
    Ok(cosine_unchecked(k, t, horizon))
}

#[inline]
pub(crate) fn cosine_unchecked(k: u32, t: f64, horizon: f64) -> f64 {
    if k == 1 {
        1.0 / horizon.sqrt()
    } else {
        (2.0 / horizon).sqrt() * (PI * (k - 1) as f64 * t / horizon).cos()
    }
}

/// `M_k(t) = int_0^t m_k(s) ds` in closed form.
pub fn cosine_antiderivative(k: u32, t: f64, horizon: f64) -> Result<f64> {
    check_args(k, t, horizon)?;
    Ok(cosine_antiderivative_unchecked(k, t, horizon))
}

pub(crate) fn cosine_antiderivative_unchecked(k: u32, t: f64, horizon: f64) -> f64 {
    if k == 1 {
        t / horizon.sqrt()
    } else {
        let w = PI * (k - 1) as f64 / horizon;
        (2.0 / horizon).sqrt() * (w * t).sin() / w
    }
}

/// Probabilists' Hermite polynomial `H_n(x)` by the three-term recurrence.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return prev;
    }
    for m in 1..n {
        let next = x * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `xi_alpha = prod_k H_{alpha_k}(zeta_k) / sqrt(alpha!)`, where `zeta[k-1]`
/// stands for `int_0^T m_k dW`.
pub fn xi_eval(alpha: &MultiIndex, zeta: &[f64]) -> Result<f64> {
    if (alpha.max_index() as usize) > zeta.len() {
        return Err(Error::domain(format!(
            "xi_alpha needs {} Gaussian coordinates, got {}",
            alpha.max_index(),
            zeta.len()
        )));
    }
    let prod: f64 = alpha
        .entries()
        .iter()
        .map(|&(k, m)| hermite(m, zeta[k as usize - 1]))
        .product();
    Ok(prod * (-0.5 * alpha.log_factorial()).exp())
}

/// `K` i.i.d. standard Gaussians, the exact law of `(int m_k dW)_{k <= K}`.
pub fn gaussian_zeta<R: Rng + ?Sized>(rng: &mut R, basis: u32) -> Vec<f64> {
    (0..basis).map(|_| rng.sample(StandardNormal)).collect()
}

/// `zeta_k = int_0^T m_k dW` approximated from Brownian increments on the grid
/// of `interval` (`increments[j] = W(t_{j+1}) - W(t_j)`), weighting each
/// increment by the trapezoid average of `m_k` over its step.
pub fn zeta_from_increments(increments: &[f64], interval: &TimeInterval, basis: u32) -> Result<Vec<f64>> {
    if increments.len() != interval.steps() {
        return Err(Error::domain(format!(
            "expected {} increments, got {}",
            interval.steps(),
            increments.len()
        )));
    }
    let horizon = interval.horizon();
    Ok((1..=basis)
        .map(|k| {
            increments
                .iter()
                .enumerate()
                .map(|(j, dw)| {
                    let a = cosine_unchecked(k, interval.time(j), horizon);
                    let b = cosine_unchecked(k, interval.time(j + 1), horizon);
                    0.5 * (a + b) * dw
                })
                .sum()
        })
        .collect())
}

/// A test direction `h(t) = sum_k h_k m_k(t)` given by its coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HFunction {
    coeffs: Vec<f64>,
}

impl HFunction {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("h needs at least one coefficient"));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain(format!("non-finite h coefficient {bad}")));
        }
        Ok(Self { coeffs })
    }

    /// The zero direction with `basis` coefficients.
    pub fn zero(basis: u32) -> Self {
        Self {
            coeffs: vec![0.0; basis.max(1) as usize],
        }
    }

    /// `c * m_k`.
    pub fn scaled_basis(k: u32, c: f64) -> Self {
        let mut coeffs = vec![0.0; k as usize];
        coeffs[k as usize - 1] = c;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> u32 {
        self.coeffs.len() as u32
    }

    /// Largest `k` with a non-zero coefficient (0 if `h = 0`).
    pub fn support_max(&self) -> u32 {
        self.coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |i| i as u32 + 1)
    }

    /// `h(t)` on `(0, T)`.
    pub fn eval(&self, t: f64, horizon: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * cosine_unchecked(i as u32 + 1, t, horizon))
            .sum()
    }

    /// `int_0^t h(s) ds`.
    pub fn integral(&self, t: f64, horizon: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * cosine_antiderivative_unchecked(i as u32 + 1, t, horizon))
            .sum()
    }

    /// `h^alpha`.
    pub fn monomial(&self, alpha: &MultiIndex) -> f64 {
        alpha.monomial(&self.coeffs)
    }
}

/// `h_k = int_0^T h(t) m_k(t) dt` for `k = 1..=K`, composite trapezoid on the
/// grid of `interval`.
pub fn project<F: Fn(f64) -> f64>(h: F, basis: u32, interval: &TimeInterval) -> HFunction {
    let horizon = interval.horizon();
    let dt = interval.dt();
    let samples: Vec<f64> = interval.times().into_iter().map(&h).collect();
    let coeffs = (1..=basis.max(1))
        .map(|k| {
            let n = samples.len() - 1;
            samples
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                    w * v * cosine_unchecked(k, interval.time(j), horizon)
                })
                .sum::<f64>()
                * dt
        })
        .collect();
    HFunction { coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::enumerate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for i in 1..n {
            s += f(a + i as f64 * h);
        }
        s * h
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(1, 0.37, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(2, 0.0, 1.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((cosine(3, 1.0, 2.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(cosine(0, 0.5, 1.0).is_err());
        assert!(cosine(2, 1.5, 1.0).is_err());
        assert!(cosine(2, -0.1, 1.0).is_err());
    }

    #[test]
    fn antiderivative_examples() {
        let t = 1.7;
        assert!((cosine_antiderivative(1, t, t).unwrap() - t.sqrt()).abs() < 1e-15);
        assert!(cosine_antiderivative(2, 1.0, 1.0).unwrap().abs() < 1e-15);
        assert!((cosine_antiderivative(2, 0.5, 1.0).unwrap() - 2f64.sqrt() / PI).abs() < 1e-15);
    }

    #[test]
    fn antiderivative_matches_trapezoid() {
        let horizon = 1.3;
        for k in 1..=16 {
            for &t in &[0.1, 0.55, 1.0, 1.3] {
                let quad = trapezoid(|s| cosine_unchecked(k, s, horizon), 0.0, t, 20_000);
                let closed = cosine_antiderivative(k, t, horizon).unwrap();
                assert!((quad - closed).abs() <= 1e-8, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn orthonormality() {
        let horizon = 2.0;
        for j in 1..=16 {
            for k in 1..=16 {
                let ip = trapezoid(
                    |s| cosine_unchecked(j, s, horizon) * cosine_unchecked(k, s, horizon),
                    0.0,
                    horizon,
                    10_000,
                );
                let delta = if j == k { 1.0 } else { 0.0 };
                assert!((ip - delta).abs() <= 1e-8, "j={j} k={k} ip={ip}");
            }
        }
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 3.3), 1.0);
        assert_eq!(hermite(2, 0.0), -1.0);
        assert_eq!(hermite(3, 2.0), 2.0);
        assert_eq!(hermite(1, -0.4), -0.4);
    }

    #[test]
    fn hermite_derivative_identity() {
        // d/dx H_n = n H_{n-1}
        let step = 1e-5;
        for n in 1..=10u32 {
            for i in 0..=24 {
                let x = -3.0 + 0.25 * i as f64;
                let fd = (hermite(n, x + step) - hermite(n, x - step)) / (2.0 * step);
                let exact = n as f64 * hermite(n - 1, x);
                let scale = exact.abs().max(1.0);
                assert!((fd - exact).abs() <= 1e-6 * scale, "n={n} x={x} fd={fd} exact={exact}");
            }
        }
    }

    #[test]
    fn xi_examples() {
        let z = [0.5, 1.7, -0.2];
        assert_eq!(xi_eval(&MultiIndex::zero(), &z).unwrap(), 1.0);
        assert!((xi_eval(&MultiIndex::unit(2), &z).unwrap() - 1.7).abs() < 1e-15);
        let a = MultiIndex::from_pairs([(1, 2)]).unwrap();
        assert!((xi_eval(&a, &[2.0]).unwrap() - 3.0 / 2f64.sqrt()).abs() < 1e-14);
        assert!(xi_eval(&MultiIndex::unit(4), &z).is_err());
    }

    #[test]
    fn xi_orthonormal_by_monte_carlo() {
        let indices: Vec<MultiIndex> = enumerate(3, 4).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 20_000;
        let mut gram = vec![0.0; indices.len() * indices.len()];
        let mut xi = vec![0.0; indices.len()];
        for _ in 0..draws {
            let z = gaussian_zeta(&mut rng, 4);
            for (v, a) in xi.iter_mut().zip(&indices) {
                *v = xi_eval(a, &z).unwrap();
            }
            for i in 0..indices.len() {
                for j in 0..indices.len() {
                    gram[i * indices.len() + j] += xi[i] * xi[j];
                }
            }
        }
        // Loose bound at this sample size; the full-size check lives in the
        // orthonormality suite.
        for i in 0..indices.len() {
            for j in 0..indices.len() {
                let est = gram[i * indices.len() + j] / draws as f64;
                let delta = if i == j { 1.0 } else { 0.0 };
                assert!((est - delta).abs() < 0.3, "{:?} {:?} {est}", indices[i], indices[j]);
            }
        }
    }

    #[test]
    fn project_examples() {
        let interval = TimeInterval::new(1.0, 10_000).unwrap();
        let c = 0.7;
        let h = project(|_| c, 5, &interval);
        assert!((h.coeffs()[0] - c).abs() < 1e-12);
        for &v in &h.coeffs()[1..] {
            assert!(v.abs() < 1e-8);
        }
        let h = project(|t| cosine_unchecked(3, t, 1.0), 6, &interval);
        for (i, &v) in h.coeffs().iter().enumerate() {
            let expected = if i == 2 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-8);
        }
        let h = project(|t| t, 1, &interval);
        assert!((h.coeffs()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn hfunction_eval_and_integral() {
        let h = HFunction::new(vec![0.3, 0.2]).unwrap();
        let horizon = 1.0;
        let t = 0.6;
        let direct = 0.3 + 0.2 * 2f64.sqrt() * (PI * t).cos();
        assert!((h.eval(t, horizon) - direct).abs() < 1e-15);
        let quad = trapezoid(|s| h.eval(s, horizon), 0.0, t, 20_000);
        assert!((h.integral(t, horizon) - quad).abs() < 1e-9);
        assert_eq!(h.support_max(), 2);
        assert_eq!(HFunction::zero(3).support_max(), 0);
        assert!(HFunction::new(vec![]).is_err());
        assert!(HFunction::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn zeta_from_increments_matches_integral_of_deterministic_path() {
        // With W(t) = t the increments are dt and zeta_k = M_k(T).
        let interval = TimeInterval::new(1.0, 1000).unwrap();
        let inc = vec![interval.dt(); interval.steps()];
        let z = zeta_from_increments(&inc, &interval, 4).unwrap();
        for k in 1..=4 {
            let exact = cosine_antiderivative(k, 1.0, 1.0).unwrap();
            assert!((z[k as usize - 1] - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn time_interval_validation() {
        assert!(TimeInterval::new(0.0, 10).is_err());
        assert!(TimeInterval::new(1.0, 1).is_err());
        let i = TimeInterval::with_step(1.0, 1e-3).unwrap();
        assert_eq!(i.steps(), 1000);
        assert_eq!(i.step_of(0.5), Some(500));
        assert_eq!(i.step_of(0.50005), None);
        assert_eq!(i.time(1000), 1.0);
    }
}

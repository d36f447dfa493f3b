//! Ground truth for the example equation `du = u_xx dt + u_xx dW`,
//! `u(0, x) = exp(-x^2/2)`.
//!
//! With `u_hat(y) = (2 pi)^{-1/2} int exp(-i x y) u(x) dx` every Fourier mode
//! solves the scalar equation `du_hat = -y^2 u_hat dt - y^2 u_hat dW` with
//! `u_hat(0, y) = exp(-y^2/2)`, so
//!
//! ```text
//! u_hat(t, y)     = exp(-y^2/2 - y^2 t - y^4 t / 2 - y^2 W(t)),
//! E|u_hat(t, y)|^2 = exp(-y^2 + (y^4 - 2 y^2) t).
//! ```

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::cm_basis::{cosine_antiderivative, gaussian_zeta, xi_eval, HFunction, TimeInterval};
use crate::multiindex::{enumerate, ln_factorial, MultiIndex};
use crate::parabolic1d::{SpatialField, SpatialGrid};
use crate::{Error, Result};

/// `u_hat(0, y)` of the initial condition `exp(-x^2/2)`.
pub fn initial_transform(y: f64) -> f64 {
    (-0.5 * y * y).exp()
}

/// `E u_hat(t, y) = u_hat(0, y) exp(-y^2 t)`.
pub fn mean_exact(t: f64, y: f64) -> f64 {
    initial_transform(y) * (-y * y * t).exp()
}

/// Chaos coefficient of the scalar geometric Brownian motion:
/// `u_hat(0, y) exp(-y^2 t) prod_k (-y^2 M_k(t))^{alpha_k} / sqrt(alpha!)`.
pub fn gbm_coeff(alpha: &MultiIndex, t: f64, y: f64, interval: &TimeInterval) -> Result<f64> {
    let horizon = interval.horizon();
    let mut value = mean_exact(t, y);
    for &(k, m) in alpha.entries() {
        let mk = cosine_antiderivative(k, t, horizon)?;
        value *= (-y * y * mk).powi(m as i32);
    }
    Ok(value * (-0.5 * alpha.log_factorial()).exp())
}

/// `E|u_hat(t, y)|^2 = exp(-y^2 + (y^4 - 2 y^2) t)`.
pub fn second_moment_exact(t: f64, y: f64) -> f64 {
    let y2 = y * y;
    (-y2 + (y2 * y2 - 2.0 * y2) * t).exp()
}

/// `E[u_hat(t, y) E_h(t)] = u_hat(0, y) exp(-y^2 t) exp(-y^2 int_0^t h)`.
pub fn s_transform_exact(h: &HFunction, horizon: f64, t: f64, y: f64) -> f64 {
    mean_exact(t, y) * (-y * y * h.integral(t, horizon)).exp()
}

/// `(1 + s)^{-1/2} exp(-x^2 / (2 (1 + s)))` with `s = 2 int_0^t (1 + h)`: the
/// solution at time `t` of `du = (1 + h) u_xx dt`, `u(0) = exp(-x^2/2)`.
pub fn heat_gaussian(grid: &SpatialGrid, t: f64, h: Option<&HFunction>, horizon: f64) -> SpatialField {
    let spread = 2.0 * (t + h.map_or(0.0, |h| h.integral(t, horizon)));
    let var = 1.0 + spread;
    grid.sample(|x| (-x * x / (2.0 * var)).exp() / var.sqrt())
}

/// Growth-law value `S_n(t) = t^n / n! int y^{4n} |exp(-y^2 t) u_hat(0, y)|^2 dy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthValue {
    pub n: u32,
    pub t: f64,
    pub value: f64,
    /// `ln S_n(t)`.
    pub log_value: f64,
    /// `S_n / ((2 sqrt(t) / (1 + 2t))^{2n} n!)`.
    pub stirling_ratio: f64,
    /// `S_n / ((2 sqrt(t) / (1 + t))^{2n} n!)`, the base with `1 + t`.
    pub stirling_ratio_one_plus_t: f64,
}

/// `ln int_R y^{4n} exp(-c y^2) dy` by adaptive double-exponential quadrature,
/// with the integrand scaled by its maximum.
fn log_moment_integral(n: u32, c: f64) -> Result<f64> {
    let p = 4.0 * n as f64;
    let y_star = if n == 0 { 0.0 } else { (p / (2.0 * c)).sqrt() };
    let log_peak = if n == 0 { 0.0 } else { p * y_star.ln() - c * y_star * y_star };
    let log_f = |y: f64| {
        if y == 0.0 {
            if n == 0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            p * y.ln() - c * y * y - log_peak
        }
    };
    // The log integrand is concave with curvature at least 2c, so it has dropped
    // by more than 100 at distance 10 / sqrt(c) from the peak.
    let width = 10.0 / c.sqrt();
    let mut total = 0.0;
    for (a, b) in [((y_star - width).max(0.0), y_star), (y_star, y_star + width)] {
        if b <= a {
            continue;
        }
        let out = quadrature::double_exponential::integrate(|y| log_f(y).exp(), a, b, 1e-15);
        if !out.integral.is_finite() || out.error_estimate > 1e-12 * out.integral.abs().max(1e-300) {
            return Err(Error::numerical(format!(
                "growth quadrature did not converge for n = {n} (estimate {:e}, error {:e})",
                out.integral, out.error_estimate
            )));
        }
        total += out.integral;
    }
    Ok((2.0 * total).ln() + log_peak)
}

pub fn growth_oracle(n: u32, t: f64) -> Result<GrowthValue> {
    if n > 12 {
        return Err(Error::domain(format!("growth oracle supports n <= 12, got {n}")));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("growth oracle needs t > 0, got {t}")));
    }
    let c = 1.0 + 2.0 * t;
    let log_value = n as f64 * t.ln() - ln_factorial(n) + log_moment_integral(n, c)?;
    let nf = n as f64;
    let log_base = |b: f64| 2.0 * nf * (2.0 * t.sqrt() / b).ln() + ln_factorial(n);
    Ok(GrowthValue {
        n,
        t,
        value: log_value.exp(),
        log_value,
        stirling_ratio: (log_value - log_base(1.0 + 2.0 * t)).exp(),
        stirling_ratio_one_plus_t: (log_value - log_base(1.0 + t)).exp(),
    })
}

/// Second route to the growth law: composite trapezoid rule on `[-Y, Y]`.
pub fn growth_trapezoid(n: u32, t: f64, points: usize) -> f64 {
    let c = 1.0 + 2.0 * t;
    let p = 4 * n as i32;
    let y_max = ((p as f64 / (2.0 * c)).sqrt() + (800.0 / c).sqrt()).max(1.0);
    let h = 2.0 * y_max / (points - 1) as f64;
    let f = |y: f64| y.powi(p) * (-c * y * y).exp();
    let mut sum = 0.5 * (f(-y_max) + f(y_max));
    for j in 1..points - 1 {
        sum += f(-y_max + j as f64 * h);
    }
    (n as f64 * t.ln() - ln_factorial(n)).exp() * sum * h
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct McConfig {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(paths: u64, steps: usize, seed: u64) -> Result<Self> {
        if paths < 1 {
            return Err(Error::domain("Monte Carlo needs at least one path"));
        }
        if steps < 2 {
            return Err(Error::domain("Monte Carlo needs at least two time steps"));
        }
        Ok(Self { paths, steps, seed })
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub standard_error: f64,
}

impl McEstimate {
    fn from_sums(sum: f64, sum_sq: f64, count: u64) -> Self {
        let m = count as f64;
        let mean = sum / m;
        let var = if count > 1 {
            ((sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            standard_error: (var / m).sqrt(),
        }
    }

    /// `|mean - target| <= k * SE` (exact agreement when the SE vanishes).
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.standard_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McMoments {
    pub mean: McEstimate,
    pub second_moment: McEstimate,
}

const BLOCK: u64 = 4096;

/// Runs `paths` simulations in fixed-size blocks, each with its own ChaCha
/// stream, and merges the per-block sums in block order.
fn simulate<F>(cfg: &McConfig, sample: F) -> Vec<[f64; 4]>
where
    F: Fn(&mut ChaCha8Rng) -> [f64; 2] + Sync,
{
    let blocks = cfg.paths.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let count = BLOCK.min(cfg.paths - b * BLOCK);
            let mut acc = [0.0; 4];
            for _ in 0..count {
                let [x, z] = sample(&mut rng);
                acc[0] += x;
                acc[1] += x * x;
                acc[2] += z;
                acc[3] += z * z;
            }
            acc
        })
        .collect()
}

fn merge(parts: &[[f64; 4]]) -> [f64; 4] {
    parts.iter().fold([0.0; 4], |mut acc, p| {
        for i in 0..4 {
            acc[i] += p[i];
        }
        acc
    })
}

/// Brownian increments on the uniform grid of `[0, t]`.
fn increments(rng: &mut ChaCha8Rng, steps: usize, dt: f64, out: &mut [f64]) {
    let sd = dt.sqrt();
    for w in out.iter_mut().take(steps) {
        let z: f64 = StandardNormal.sample(rng);
        *w = sd * z;
    }
}

/// Sample mean and second moment of the exact solution `u_hat(t, y)`.
pub fn mc_moments(t: f64, y: f64, cfg: &McConfig) -> Result<McMoments> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t must be non-negative, got {t}")));
    }
    let y2 = y * y;
    let dt = t / cfg.steps as f64;
    let drift = -0.5 * y2 - y2 * t - 0.5 * y2 * y2 * t;
    let parts = simulate(cfg, |rng| {
        let mut dw = vec![0.0; cfg.steps];
        increments(rng, cfg.steps, dt, &mut dw);
        let w: f64 = dw.iter().sum();
        let u = (drift - y2 * w).exp();
        [u, u * u]
    });
    let [s1, s2, s3, s4] = merge(&parts);
    Ok(McMoments {
        mean: McEstimate::from_sums(s1, s2, cfg.paths),
        second_moment: McEstimate::from_sums(s3, s4, cfg.paths),
    })
}

/// Sample mean of `u_hat(t, y) E_h(t)` with the discrete stochastic exponential
/// `E_h = exp(sum_j hbar_j dW_j - 1/2 sum_j hbar_j^2 dt)`, `hbar_j` the
/// trapezoid average of `h` over step `j`.
pub fn mc_s_transform(h: &HFunction, horizon: f64, t: f64, y: f64, cfg: &McConfig) -> Result<McEstimate> {
    if !(t >= 0.0 && t <= horizon) {
        return Err(Error::domain(format!("t = {t} outside [0, {horizon}]")));
    }
    let y2 = y * y;
    let dt = t / cfg.steps as f64;
    let hbar: Vec<f64> = (0..cfg.steps)
        .map(|j| {
            let a = j as f64 * dt;
            0.5 * (h.eval(a, horizon) + h.eval(a + dt, horizon))
        })
        .collect();
    let compensator = 0.5 * hbar.iter().map(|v| v * v).sum::<f64>() * dt;
    let drift = -0.5 * y2 - y2 * t - 0.5 * y2 * y2 * t;
    let parts = simulate(cfg, |rng| {
        let mut dw = vec![0.0; cfg.steps];
        increments(rng, cfg.steps, dt, &mut dw);
        let w: f64 = dw.iter().sum();
        let stoch: f64 = dw.iter().zip(&hbar).map(|(a, b)| a * b).sum();
        let x = (drift - y2 * w).exp() * (stoch - compensator).exp();
        [x, 0.0]
    });
    let [s1, s2, ..] = merge(&parts);
    Ok(McEstimate::from_sums(s1, s2, cfg.paths))
}

/// Monte Carlo Gram matrix `E xi_alpha xi_beta` over all `|alpha|, |beta| <= N`
/// with support in `1..=K`, from i.i.d. standard Gaussian `zeta`.
pub fn mc_orthonormality(max_order: u32, basis: u32, cfg: &McConfig) -> Result<Vec<(MultiIndex, MultiIndex, f64)>> {
    let indices: Vec<MultiIndex> = enumerate(max_order, basis).collect();
    let d = indices.len();
    let blocks = cfg.paths.div_ceil(BLOCK);
    let parts: Vec<Result<Vec<f64>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b);
            let count = BLOCK.min(cfg.paths - b * BLOCK);
            let mut gram = vec![0.0; d * d];
            let mut xi = vec![0.0; d];
            for _ in 0..count {
                let zeta = gaussian_zeta(&mut rng, basis);
                for (x, a) in xi.iter_mut().zip(&indices) {
                    *x = xi_eval(a, &zeta)?;
                }
                for i in 0..d {
                    for j in i..d {
                        gram[i * d + j] += xi[i] * xi[j];
                    }
                }
            }
            Ok(gram)
        })
        .collect();
    let mut gram = vec![0.0; d * d];
    for part in parts {
        for (a, b) in gram.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let m = cfg.paths as f64;
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            out.push((indices[i].clone(), indices[j].clone(), gram[i * d + j] / m));
        }
    }
    Ok(out)
}

/// One line of an oracle report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub quantity: String,
    pub computed: f64,
    pub oracle: f64,
    pub standard_error_or_tolerance: f64,
    pub pass: bool,
}

/// CSV with columns `quantity, computed, oracle, standard_error_or_tolerance, pass`.
pub fn write_oracle_report<W: Write>(rows: &[OracleRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

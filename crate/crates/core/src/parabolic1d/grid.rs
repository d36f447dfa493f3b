use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::spectral;
use crate::{Error, Result};

/// How `x in R` is truncated to `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    /// Periodic grid, derivatives by FFT.
    PeriodicSpectral,
    /// Zero Dirichlet ghost values outside the grid, second-order central differences.
    BoundedFiniteDifference,
}

/// Uniform grid `x_j = -L + j dx`, `dx = 2L / n_x`, `j = 0..n_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    half_width: f64,
    points: usize,
    mode: GridMode,
}

impl SpatialGrid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(half_width: f64, points: usize, mode: GridMode) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::domain(format!("half width must be positive, got {half_width}")));
        }
        if points < Self::MIN_POINTS {
            return Err(Error::domain(format!(
                "grid needs at least {} points, got {points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            half_width,
            points,
            mode,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumber of DFT bin `m` (negative frequencies above `n/2`).
    pub fn wavenumber(&self, m: usize) -> f64 {
        let n = self.points as isize;
        let m = m as isize;
        let signed = if m <= n / 2 { m } else { m - n };
        PI * signed as f64 / self.half_width
    }

    /// Wavenumber used for first derivatives: the Nyquist bin is dropped so
    /// that derivatives of real fields stay real.
    pub(crate) fn derivative_wavenumber(&self, m: usize) -> f64 {
        if self.points % 2 == 0 && m == self.points / 2 {
            0.0
        } else {
            self.wavenumber(m)
        }
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> SpatialField {
        SpatialField {
            grid: *self,
            values: (0..self.points).map(|j| f(self.x(j))).collect(),
        }
    }

    pub fn zeros(&self) -> SpatialField {
        SpatialField {
            grid: *self,
            values: vec![0.0; self.points],
        }
    }
}

/// Selector for the spatial norm `X` in chaos-space norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialNorm {
    L2,
    H1,
    #[serde(rename = "h-1")]
    HMinus1,
}

impl SpatialNorm {
    pub fn sobolev_index(&self) -> i32 {
        match self {
            SpatialNorm::L2 => 0,
            SpatialNorm::H1 => 1,
            SpatialNorm::HMinus1 => -1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpatialNorm::L2 => "l2",
            SpatialNorm::H1 => "h1",
            SpatialNorm::HMinus1 => "h-1",
        }
    }
}

impl std::str::FromStr for SpatialNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(SpatialNorm::L2),
            "h1" => Ok(SpatialNorm::H1),
            "h-1" | "hminus1" => Ok(SpatialNorm::HMinus1),
            other => Err(Error::domain(format!("unknown spatial norm {other:?}"))),
        }
    }
}

/// A real function sampled on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "field has {} values, grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("field contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: SpatialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn check_grid(&self, grid: &SpatialGrid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::domain("field does not match the grid"));
        }
        Ok(())
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SpatialField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scaled(&self, c: f64) -> SpatialField {
        SpatialField {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `dx * sum_j u_j^2`.
    pub fn l2_sq(&self) -> f64 {
        self.grid.dx() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `int u dx` by the rectangle rule (exact for trigonometric polynomials
    /// on the periodic grid).
    pub fn integral(&self) -> f64 {
        self.grid.dx() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Relative L2 distance `|self - other| / |other|`.
    pub fn relative_l2_distance(&self, other: &SpatialField) -> f64 {
        let diff: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let base: f64 = other.values.iter().map(|b| b * b).sum();
        (diff / base).sqrt()
    }

    /// Squared discrete norm of the given kind.
    pub fn norm_sq(&self, norm: SpatialNorm) -> f64 {
        norm_sq_values(&self.grid, &self.values, norm)
    }
}

pub(crate) fn norm_sq_values(grid: &SpatialGrid, values: &[f64], norm: SpatialNorm) -> f64 {
    let dx = grid.dx();
    match (norm, grid.mode()) {
        (SpatialNorm::L2, _) => dx * values.iter().map(|v| v * v).sum::<f64>(),
        (_, GridMode::PeriodicSpectral) => {
            let gamma = norm.sobolev_index();
            let spec = spectral::plans(grid.len()).forward_real(values);
            let n = grid.len() as f64;
            spec.iter()
                .enumerate()
                .map(|(m, z)| {
                    let y = grid.wavenumber(m);
                    (1.0 + y * y).powi(gamma) * z.norm_sqr()
                })
                .sum::<f64>()
                * dx
                / n
        }
        (SpatialNorm::H1, GridMode::BoundedFiniteDifference) => {
            let l2: f64 = values.iter().map(|v| v * v).sum();
            let mut grad = 0.0;
            let n = values.len();
            for j in 0..=n {
                let left = if j == 0 { 0.0 } else { values[j - 1] };
                let right = if j == n { 0.0 } else { values[j] };
                let d = (right - left) / dx;
                grad += d * d;
            }
            dx * (l2 + grad)
        }
        (SpatialNorm::HMinus1, GridMode::BoundedFiniteDifference) => {
            // u . (I - D2)^{-1} u with the Dirichlet difference Laplacian.
            let n = values.len();
            let off = -1.0 / (dx * dx);
            let lower = vec![off; n];
            let diag = vec![1.0 + 2.0 / (dx * dx); n];
            let upper = vec![off; n];
            let w = super::operator::thomas(&lower, &diag, &upper, values)
                .expect("I - D2 is diagonally dominant");
            dx * values.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        }
    }
}

/// A time-indexed sequence of fields (samples of `u(t, .)` at recorded times).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<SpatialField>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<SpatialField>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::domain("trajectory times and fields differ in length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("trajectory times must increase"));
        }
        if let Some(first) = fields.first() {
            if fields.iter().any(|f| f.grid() != first.grid()) {
                return Err(Error::domain("trajectory fields live on different grids"));
            }
        }
        Ok(Self { times, fields })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpatialField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// The sample at time `t` (matched up to rounding).
    pub fn at(&self, t: f64) -> Option<&SpatialField> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| &self.fields[i])
    }

    pub fn last(&self) -> Option<&SpatialField> {
        self.fields.last()
    }

    /// `int ||u(t)||_X^2 dt` by the trapezoid rule over the recorded times.
    pub fn integrated_norm_sq(&self, norm: SpatialNorm) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::domain("time integral needs at least two recorded samples"));
        }
        let sq: Vec<f64> = self.fields.iter().map(|f| f.norm_sq(norm)).collect();
        Ok(self
            .times
            .windows(2)
            .zip(sq.windows(2))
            .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
            .sum())
    }

    pub(crate) fn axpy(&mut self, c: f64, other: &Trajectory) {
        debug_assert_eq!(self.times.len(), other.times.len());
        for (a, b) in self.fields.iter_mut().zip(&other.fields) {
            a.axpy(c, b);
        }
    }

    pub(crate) fn zeros_like(&self) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            fields: self.fields.iter().map(|f| f.grid().zeros()).collect(),
        }
    }
}

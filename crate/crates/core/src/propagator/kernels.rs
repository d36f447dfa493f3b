//! Spatial kernels of the sweep: Fourier-diagonal (modal), physical space,
//! and a single scalar mode.

use num_complex::Complex64;

use super::engine::{Kernel, Source};
use crate::cm_basis::TimeInterval;
use crate::parabolic1d::{
    fft_plans, norm_sq_values, CoefficientSet, Forcing, Operator, SpatialField, SpatialGrid, SpatialNorm,
};
use crate::parabolic1d::operator::AssembledOperator;
use crate::{Error, Result};

/// Data of one chaos index, already mapped to a sweep position.
#[derive(Clone)]
pub(crate) struct PlacedData {
    pub position: usize,
    pub v: Option<SpatialField>,
    pub f: Forcing,
    pub g: Forcing,
}

/// Physical-space kernel: the state of a coefficient is its grid values.
pub(crate) struct PhysicalKernel {
    grid: SpatialGrid,
    coeffs: CoefficientSet,
    data: Vec<PlacedData>,
    drift: Option<AssembledOperator>,
    diffusion: Option<AssembledOperator>,
    dt: f64,
}

impl PhysicalKernel {
    pub fn new(grid: SpatialGrid, coeffs: CoefficientSet, data: Vec<PlacedData>) -> Self {
        Self {
            grid,
            coeffs,
            data,
            drift: None,
            diffusion: None,
            dt: 0.0,
        }
    }
}

impl Kernel for PhysicalKernel {
    fn width(&self) -> usize {
        self.grid.len()
    }

    fn begin_step(&mut self, t: f64, dt: f64) -> Result<()> {
        let values = self.coeffs.values(t + 0.5 * dt, &self.grid);
        self.drift = Some(AssembledOperator::new(self.grid, values.combined(Some(Operator::Drift), 0.0)));
        self.diffusion = Some(AssembledOperator::new(
            self.grid,
            values.combined(Some(Operator::Diffusion), 0.0),
        ));
        self.dt = dt;
        Ok(())
    }

    fn advance(&self, old: &[f64], forcing: Option<&[f64]>, new: &mut [f64]) -> Result<()> {
        let op = self.drift.as_ref().expect("begin_step precedes advance");
        new.copy_from_slice(&op.cn_step(old, forcing, self.dt)?);
        Ok(())
    }

    fn diffusion_mid(&self, old: &[f64], new: &[f64], q: &mut [f64]) {
        let op = self.diffusion.as_ref().expect("begin_step precedes diffusion_mid");
        let avg: Vec<f64> = old.iter().zip(new).map(|(a, b)| 0.5 * (a + b)).collect();
        q.copy_from_slice(&op.apply(&avg));
    }

    fn initial(&self) -> Vec<(usize, Vec<f64>)> {
        self.data
            .iter()
            .filter_map(|d| d.v.as_ref().map(|v| (d.position, v.values().to_vec())))
            .collect()
    }

    fn sources_at(&self, t: f64) -> Vec<Source> {
        self.data
            .iter()
            .filter(|d| !(d.f.is_zero() && d.g.is_zero()))
            .map(|d| Source {
                position: d.position,
                f: d.f.sample(&self.grid, t),
                g: d.g.sample(&self.grid, t),
            })
            .collect()
    }

    fn norm_sq(&self, lanes: &[f64], norm: SpatialNorm) -> f64 {
        norm_sq_values(&self.grid, lanes, norm)
    }
}

/// Retained DFT bins `m` in `0..=n/2` of the data, given a relative cutoff.
pub(crate) fn retained_modes(
    grid: &SpatialGrid,
    data: &[PlacedData],
    interval: &TimeInterval,
    cutoff: Option<f64>,
) -> Vec<usize> {
    let n = grid.len();
    let half = n / 2;
    let Some(cutoff) = cutoff else {
        return (0..=half).collect();
    };
    let fft = fft_plans(n);
    let mut amp = vec![0.0f64; half + 1];
    let mut absorb = |values: &[f64]| {
        let spec = fft.forward_real(values);
        for (m, a) in amp.iter_mut().enumerate() {
            *a = a.max(spec[m].norm());
        }
    };
    for d in data {
        if let Some(v) = &d.v {
            absorb(v.values());
        }
        for forcing in [&d.f, &d.g] {
            if forcing.is_zero() {
                continue;
            }
            let dt = interval.dt();
            for j in 0..interval.steps() {
                if let Some(vals) = forcing.sample(grid, interval.time(j) + 0.5 * dt) {
                    absorb(&vals);
                }
            }
        }
    }
    let max = amp.iter().cloned().fold(0.0, f64::max);
    (0..=half).filter(|&m| amp[m] > cutoff * max).collect()
}

/// Fourier-diagonal kernel for periodic grids and `x`-independent
/// coefficients. Each lane block holds a group of retained DFT bins.
///
/// In the `unit` variant (real symbols, initial data only at one position,
/// no forcing) the lanes carry the real solution for unit initial data and
/// the bin amplitudes are applied when norms or fields are formed; otherwise
/// every bin takes two lanes (real and imaginary part).
pub(crate) struct ModalKernel {
    grid: SpatialGrid,
    coeffs: CoefficientSet,
    modes: Vec<usize>,
    /// Norm multiplicity: 2 for bins with a distinct conjugate partner.
    multiplicity: Vec<f64>,
    wavenumber: Vec<f64>,
    unit: Option<Vec<Complex64>>,
    data: Vec<PlacedData>,
    r: Vec<Complex64>,
    s: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl ModalKernel {
    /// Whether the unit-data variant applies to this problem.
    pub fn unit_applicable(
        grid: &SpatialGrid,
        coeffs: &CoefficientSet,
        interval: &TimeInterval,
        data: &[PlacedData],
    ) -> bool {
        let x0 = grid.x(0);
        let real_symbols = (0..=interval.steps()).all(|j| {
            let t = interval.time(j);
            let mid = t + 0.5 * interval.dt();
            [t, mid]
                .iter()
                .all(|&s| (coeffs.b)(s, x0) == 0.0 && (coeffs.sigma)(s, x0) == 0.0)
        });
        real_symbols && data.len() == 1 && data[0].f.is_zero() && data[0].g.is_zero() && data[0].v.is_some()
    }

    pub fn new(
        grid: SpatialGrid,
        coeffs: CoefficientSet,
        modes: Vec<usize>,
        data: Vec<PlacedData>,
        unit: bool,
    ) -> Self {
        let n = grid.len();
        let multiplicity = modes
            .iter()
            .map(|&m| if m == 0 || 2 * m == n { 1.0 } else { 2.0 })
            .collect();
        let wavenumber = modes.iter().map(|&m| grid.wavenumber(m)).collect();
        let unit = unit.then(|| {
            let v = data[0].v.as_ref().expect("unit variant has initial data");
            let spec = fft_plans(n).forward_real(v.values());
            modes.iter().map(|&m| spec[m]).collect()
        });
        let k = modes.len();
        Self {
            grid,
            coeffs,
            modes,
            multiplicity,
            wavenumber,
            unit,
            data,
            r: vec![Complex64::new(0.0, 0.0); k],
            s: vec![Complex64::new(0.0, 0.0); k],
            b: vec![Complex64::new(0.0, 0.0); k],
        }
    }

    fn is_unit(&self) -> bool {
        self.unit.is_some()
    }

    fn encode(&self, values: &[f64]) -> Vec<f64> {
        let spec = fft_plans(self.grid.len()).forward_real(values);
        self.modes
            .iter()
            .flat_map(|&m| [spec[m].re, spec[m].im])
            .collect()
    }

    /// Bin value `U_m` of lane block `lanes` for local mode `i`.
    fn bin(&self, lanes: &[f64], i: usize) -> Complex64 {
        match &self.unit {
            Some(amp) => amp[i] * lanes[i],
            None => Complex64::new(lanes[2 * i], lanes[2 * i + 1]),
        }
    }

    /// Grid values of the part of the field carried by this group of bins.
    pub fn decode(&self, lanes: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        for (i, &m) in self.modes.iter().enumerate() {
            let z = self.bin(lanes, i);
            spec[m] = z;
            if m != 0 && 2 * m != n {
                spec[n - m] = z.conj();
            }
        }
        fft_plans(n).inverse_real(spec)
    }
}

impl Kernel for ModalKernel {
    fn width(&self) -> usize {
        if self.is_unit() {
            self.modes.len()
        } else {
            2 * self.modes.len()
        }
    }

    fn begin_step(&mut self, t: f64, dt: f64) -> Result<()> {
        let mid = t + 0.5 * dt;
        let x0 = self.grid.x(0);
        let c = &self.coeffs;
        let (a, b, cc) = ((c.a)(mid, x0), (c.b)(mid, x0), (c.c)(mid, x0));
        let (rho, sigma, nu) = ((c.rho)(mid, x0), (c.sigma)(mid, x0), (c.nu)(mid, x0));
        for (i, &m) in self.modes.iter().enumerate() {
            let y = self.wavenumber[i];
            let yd = self.grid.derivative_wavenumber(m);
            let sa = Complex64::new(-a * y * y + cc, b * yd);
            let denom = 1.0 - 0.5 * dt * sa;
            if denom.norm() < 1e-300 {
                return Err(Error::numerical(format!("singular Crank-Nicolson symbol at mode {m}")));
            }
            self.r[i] = (1.0 + 0.5 * dt * sa) / denom;
            self.s[i] = dt / denom;
            self.b[i] = Complex64::new(-rho * y * y + nu, sigma * yd);
        }
        Ok(())
    }

    fn advance(&self, old: &[f64], forcing: Option<&[f64]>, new: &mut [f64]) -> Result<()> {
        if self.is_unit() {
            match forcing {
                Some(f) => {
                    for i in 0..old.len() {
                        new[i] = self.r[i].re * old[i] + self.s[i].re * f[i];
                    }
                }
                None => {
                    for i in 0..old.len() {
                        new[i] = self.r[i].re * old[i];
                    }
                }
            }
        } else {
            for i in 0..self.modes.len() {
                let o = Complex64::new(old[2 * i], old[2 * i + 1]);
                let mut z = self.r[i] * o;
                if let Some(f) = forcing {
                    z += self.s[i] * Complex64::new(f[2 * i], f[2 * i + 1]);
                }
                new[2 * i] = z.re;
                new[2 * i + 1] = z.im;
            }
        }
        Ok(())
    }

    fn diffusion_mid(&self, old: &[f64], new: &[f64], q: &mut [f64]) {
        if self.is_unit() {
            for i in 0..old.len() {
                q[i] = self.b[i].re * 0.5 * (old[i] + new[i]);
            }
        } else {
            for i in 0..self.modes.len() {
                let avg = 0.5
                    * Complex64::new(old[2 * i] + new[2 * i], old[2 * i + 1] + new[2 * i + 1]);
                let z = self.b[i] * avg;
                q[2 * i] = z.re;
                q[2 * i + 1] = z.im;
            }
        }
    }

    fn initial(&self) -> Vec<(usize, Vec<f64>)> {
        if self.is_unit() {
            return vec![(self.data[0].position, vec![1.0; self.modes.len()])];
        }
        self.data
            .iter()
            .filter_map(|d| d.v.as_ref().map(|v| (d.position, self.encode(v.values()))))
            .collect()
    }

    fn sources_at(&self, t: f64) -> Vec<Source> {
        if self.is_unit() {
            return Vec::new();
        }
        self.data
            .iter()
            .filter(|d| !(d.f.is_zero() && d.g.is_zero()))
            .map(|d| Source {
                position: d.position,
                f: d.f.sample(&self.grid, t).map(|v| self.encode(&v)),
                g: d.g.sample(&self.grid, t).map(|v| self.encode(&v)),
            })
            .collect()
    }

    fn norm_sq(&self, lanes: &[f64], norm: SpatialNorm) -> f64 {
        let gamma = norm.sobolev_index();
        let n = self.grid.len() as f64;
        let sum: f64 = (0..self.modes.len())
            .map(|i| {
                let y = self.wavenumber[i];
                self.multiplicity[i] * (1.0 + y * y).powi(gamma) * self.bin(lanes, i).norm_sqr()
            })
            .sum();
        sum * self.grid.dx() / n
    }
}

/// A single Fourier mode with real symbols: the scalar system
/// `du = drift u dt + diffusion u dW`.
pub(crate) struct ScalarKernel {
    drift: f64,
    diffusion: f64,
    initial: f64,
    position: usize,
    r: f64,
    s: f64,
}

impl ScalarKernel {
    pub fn new(drift: f64, diffusion: f64, initial: f64, position: usize) -> Self {
        Self {
            drift,
            diffusion,
            initial,
            position,
            r: 0.0,
            s: 0.0,
        }
    }
}

impl Kernel for ScalarKernel {
    fn width(&self) -> usize {
        1
    }

    fn begin_step(&mut self, _t: f64, dt: f64) -> Result<()> {
        let denom = 1.0 - 0.5 * dt * self.drift;
        if denom == 0.0 {
            return Err(Error::numerical("singular Crank-Nicolson step for the scalar mode"));
        }
        self.r = (1.0 + 0.5 * dt * self.drift) / denom;
        self.s = dt / denom;
        Ok(())
    }

    fn advance(&self, old: &[f64], forcing: Option<&[f64]>, new: &mut [f64]) -> Result<()> {
        new[0] = self.r * old[0] + forcing.map_or(0.0, |f| self.s * f[0]);
        Ok(())
    }

    fn diffusion_mid(&self, old: &[f64], new: &[f64], q: &mut [f64]) {
        q[0] = self.diffusion * 0.5 * (old[0] + new[0]);
    }

    fn initial(&self) -> Vec<(usize, Vec<f64>)> {
        vec![(self.position, vec![self.initial])]
    }

    fn sources_at(&self, _t: f64) -> Vec<Source> {
        Vec::new()
    }

    fn norm_sq(&self, lanes: &[f64], _norm: SpatialNorm) -> f64 {
        lanes[0] * lanes[0]
    }
}

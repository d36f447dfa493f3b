//! The propagator system for the chaos coefficients `u_alpha`:
//!
//! ```text
//! du_alpha = (A u_alpha + f_alpha) dt
//!          + sum_k sqrt(alpha_k) m_k(t) (B u_{alpha - e_k} + g_{alpha - e_k}) dt,
//! u_alpha(0) = v_alpha.
//! ```
//!
//! With deterministic data only `v_(0) = v`, `f_(0) = f`, `g_(0) = g` are
//! non-zero. The system is lower triangular in `|alpha|` and is solved by
//! Crank-Nicolson with `m_k` evaluated at step midpoints.

mod engine;
mod kernels;
mod report;

use std::collections::BTreeMap;

use crate::chaos_space::{ChaosSeries, Coefficient, ScalarTrajectory};
use crate::cm_basis::TimeInterval;
use crate::multiindex::{IndexSet, MultiIndex};
use crate::parabolic1d::{
    CoefficientSet, Forcing, GridMode, Recording, SpatialField, SpatialGrid, SpatialNorm, Trajectory,
};
use crate::{Error, Result};

use engine::{sweep, SweepSpec};
use kernels::{retained_modes, ModalKernel, PhysicalKernel, PlacedData, ScalarKernel};

pub use report::{admissible_weights, write_level_norms_csv, DecayReport, LevelNormRow};

/// Data attached to one chaos index: `v_gamma`, `f_gamma`, `g_gamma`.
#[derive(Debug, Clone, Default)]
pub struct DataTerm {
    pub v: Option<SpatialField>,
    pub f: Forcing,
    pub g: Forcing,
}

impl DataTerm {
    pub fn initial(v: SpatialField) -> Self {
        Self {
            v: Some(v),
            ..Default::default()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            v: self.v.as_ref().map(|v| v.scaled(c)),
            f: self.f.scaled(c),
            g: self.g.scaled(c),
        }
    }
}

/// Chaos-valued data `sum_gamma (v_gamma, f_gamma, g_gamma) xi_gamma`.
#[derive(Debug, Clone, Default)]
pub struct ChaosData {
    terms: BTreeMap<MultiIndex, DataTerm>,
}

impl ChaosData {
    pub fn deterministic(v: SpatialField, f: Forcing, g: Forcing) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(MultiIndex::zero(), DataTerm { v: Some(v), f, g });
        Self { terms }
    }

    pub fn insert(&mut self, gamma: MultiIndex, term: DataTerm) {
        self.terms.insert(gamma, term);
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &DataTerm)> {
        self.terms.iter()
    }

    pub fn is_deterministic(&self) -> bool {
        self.terms.keys().all(MultiIndex::is_zero)
    }
}

/// Which spatial kernel the sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelChoice {
    /// Fourier-diagonal when the grid is periodic and the coefficients do not
    /// depend on `x`; physical space otherwise.
    #[default]
    Auto,
    Physical,
}

#[derive(Debug, Clone)]
pub struct PropagatorOptions {
    pub recording: Recording,
    /// Squared norms recorded for every coefficient at every recorded time.
    pub norms: Vec<SpatialNorm>,
    /// Keep the coefficient fields (memory `~ #indices x #records x n_x`).
    pub keep_fields: bool,
    /// Fourier bins whose data amplitude is at most `cutoff * max` are not
    /// propagated (Fourier-diagonal kernel only; `None` keeps all bins).
    pub spectral_cutoff: Option<f64>,
    pub kernel: KernelChoice,
    /// Number of Fourier bins swept together.
    pub mode_group: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            recording: Recording::All,
            norms: vec![SpatialNorm::L2],
            keep_fields: false,
            spectral_cutoff: Some(1e-13),
            kernel: KernelChoice::Auto,
            mode_group: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagatorConfig {
    pub max_order: u32,
    pub basis: u32,
    pub grid: SpatialGrid,
    pub interval: TimeInterval,
    pub coeffs: CoefficientSet,
    pub data: ChaosData,
    pub options: PropagatorOptions,
}

impl PropagatorConfig {
    pub fn new(
        max_order: u32,
        basis: u32,
        grid: SpatialGrid,
        interval: TimeInterval,
        coeffs: CoefficientSet,
        data: ChaosData,
    ) -> Self {
        Self {
            max_order,
            basis,
            grid,
            interval,
            coeffs,
            data,
            options: PropagatorOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.basis == 0 {
            return Err(Error::domain("truncation needs K >= 1"));
        }
        if self.options.norms.is_empty() {
            return Err(Error::domain("at least one spatial norm must be recorded"));
        }
        if self.options.mode_group == 0 {
            return Err(Error::domain("mode group size must be positive"));
        }
        for (gamma, term) in self.data.terms() {
            if gamma.max_index() > self.basis {
                return Err(Error::domain(format!("data index [{gamma}] uses basis functions beyond K")));
            }
            if let Some(v) = &term.v {
                v.check_grid(&self.grid)?;
            }
        }
        self.coeffs.regularity(&self.grid, &self.interval)?;
        Ok(())
    }
}

/// Recorded output of a propagator run.
#[derive(Debug, Clone)]
pub struct PropagatorSolution {
    index_set: IndexSet,
    times: Vec<f64>,
    norm_kinds: Vec<SpatialNorm>,
    table: Vec<f64>,
    fields: Option<Vec<Trajectory>>,
    modes: Option<usize>,
}

impl PropagatorSolution {
    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    /// Recorded times.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of propagated Fourier bins, for the Fourier-diagonal kernel.
    pub fn retained_modes(&self) -> Option<usize> {
        self.modes
    }

    fn record_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::domain(format!("time {t} was not recorded")))
    }

    fn norm_index(&self, norm: SpatialNorm) -> Result<usize> {
        self.norm_kinds
            .iter()
            .position(|&n| n == norm)
            .ok_or_else(|| Error::domain(format!("norm {} was not recorded", norm.name())))
    }

    fn entry(&self, pos: usize, rec: usize, ni: usize) -> f64 {
        self.table[(pos * self.times.len() + rec) * self.norm_kinds.len() + ni]
    }

    /// `||u_alpha(t)||_X^2`.
    pub fn coefficient_norm_sq(&self, alpha: &MultiIndex, t: f64, norm: SpatialNorm) -> Result<f64> {
        let pos = self
            .index_set
            .position(alpha)
            .ok_or_else(|| Error::domain(format!("index [{alpha}] outside the truncation")))?;
        Ok(self.entry(pos, self.record_of(t)?, self.norm_index(norm)?))
    }

    /// `S_n(t) = sum_{|alpha| = n} ||u_alpha(t)||_X^2`.
    pub fn level_norm_sq(&self, n: u32, t: f64, norm: SpatialNorm) -> Result<f64> {
        if n > self.index_set.max_order() {
            return Err(Error::domain(format!(
                "level {n} above the truncation N = {}",
                self.index_set.max_order()
            )));
        }
        let (rec, ni) = (self.record_of(t)?, self.norm_index(norm)?);
        Ok(self.index_set.level(n).map(|pos| self.entry(pos, rec, ni)).sum())
    }

    /// `(alpha, ||u_alpha(t)||_X^2)` for every index.
    pub fn norms_at(&self, t: f64, norm: SpatialNorm) -> Result<Vec<(MultiIndex, f64)>> {
        let (rec, ni) = (self.record_of(t)?, self.norm_index(norm)?);
        Ok(self
            .index_set
            .indices()
            .iter()
            .enumerate()
            .map(|(pos, a)| (a.clone(), self.entry(pos, rec, ni)))
            .collect())
    }

    /// `(alpha, int ||u_alpha(t)||_X^2 dt)` by the trapezoid rule over the recorded times.
    pub fn integrated_norms(&self, norm: SpatialNorm) -> Result<Vec<(MultiIndex, f64)>> {
        if self.times.len() < 2 {
            return Err(Error::domain("time integral needs at least two recorded samples"));
        }
        let ni = self.norm_index(norm)?;
        Ok(self
            .index_set
            .indices()
            .iter()
            .enumerate()
            .map(|(pos, a)| {
                let total = (0..self.times.len() - 1)
                    .map(|r| {
                        let h = self.times[r + 1] - self.times[r];
                        0.5 * h * (self.entry(pos, r, ni) + self.entry(pos, r + 1, ni))
                    })
                    .sum();
                (a.clone(), total)
            })
            .collect())
    }

    pub fn field(&self, alpha: &MultiIndex) -> Option<&Trajectory> {
        let pos = self.index_set.position(alpha)?;
        self.fields.as_ref().map(|f| &f[pos])
    }

    /// The coefficients as a chaos series (requires `keep_fields`).
    pub fn into_series(self) -> Result<ChaosSeries<Trajectory>> {
        let fields = self
            .fields
            .ok_or_else(|| Error::domain("coefficient fields were not kept (set keep_fields)"))?;
        let mut series = ChaosSeries::new(self.index_set.max_order(), self.index_set.basis())?;
        for (a, traj) in self.index_set.indices().iter().zip(fields) {
            series.insert(a.clone(), traj)?;
        }
        Ok(series)
    }
}

fn place(set: &IndexSet, data: &ChaosData) -> Vec<PlacedData> {
    data.terms()
        .filter_map(|(gamma, term)| {
            set.position(gamma).map(|position| PlacedData {
                position,
                v: term.v.clone(),
                f: term.f.clone(),
                g: term.g.clone(),
            })
        })
        .collect()
}

/// Runs the propagator sweep and records norms (and optionally fields).
pub fn solve(config: &PropagatorConfig) -> Result<PropagatorSolution> {
    config.validate()?;
    let set = IndexSet::new(config.max_order, config.basis);
    let data = place(&set, &config.data);
    let opts = &config.options;
    let spec = SweepSpec {
        index_set: &set,
        interval: &config.interval,
        recording: &opts.recording,
        norms: &opts.norms,
        keep_state: opts.keep_fields,
    };
    let grid = config.grid;
    let modal = opts.kernel == KernelChoice::Auto
        && grid.mode() == GridMode::PeriodicSpectral
        && config.coeffs.is_x_independent(&grid, &config.interval);

    let (times, table, fields, modes) = if modal {
        let modes = retained_modes(&grid, &data, &config.interval, opts.spectral_cutoff);
        let unit = ModalKernel::unit_applicable(&grid, &config.coeffs, &config.interval, &data);
        let mut times = Vec::new();
        let mut table: Vec<f64> = Vec::new();
        let mut fields: Option<Vec<Vec<Vec<f64>>>> = None;
        for group in modes.chunks(opts.mode_group) {
            let mut kernel = ModalKernel::new(grid, config.coeffs.clone(), group.to_vec(), data.clone(), unit);
            let out = sweep(&mut kernel, &spec)?;
            if table.is_empty() {
                table = out.norms;
                times = out.times;
            } else {
                for (a, b) in table.iter_mut().zip(&out.norms) {
                    *a += b;
                }
            }
            if opts.keep_fields {
                let w = kernel_width(group.len(), unit);
                let acc = fields.get_or_insert_with(|| vec![vec![vec![0.0; grid.len()]; times.len()]; set.len()]);
                for (r, snapshot) in out.snapshots.iter().enumerate() {
                    for (pos, lanes) in snapshot.chunks(w).enumerate() {
                        if lanes.iter().all(|&x| x == 0.0) {
                            continue;
                        }
                        for (a, b) in acc[pos][r].iter_mut().zip(kernel.decode(lanes)) {
                            *a += b;
                        }
                    }
                }
            }
        }
        if modes.is_empty() {
            // All data vanish: every coefficient is zero.
            let mut kernel = PhysicalKernel::new(grid, config.coeffs.clone(), data.clone());
            let out = sweep(&mut kernel, &spec)?;
            times = out.times;
            table = out.norms;
            if opts.keep_fields {
                fields = Some(vec![vec![vec![0.0; grid.len()]; times.len()]; set.len()]);
            }
        }
        let fields = fields.map(|per_pos| to_trajectories(&grid, &times, per_pos)).transpose()?;
        (times, table, fields, Some(modes.len()))
    } else {
        let mut kernel = PhysicalKernel::new(grid, config.coeffs.clone(), data);
        let out = sweep(&mut kernel, &spec)?;
        let fields = if opts.keep_fields {
            let n = grid.len();
            let per_pos: Vec<Vec<Vec<f64>>> = (0..set.len())
                .map(|pos| {
                    out.snapshots
                        .iter()
                        .map(|s| s[pos * n..(pos + 1) * n].to_vec())
                        .collect()
                })
                .collect();
            Some(to_trajectories(&grid, &out.times, per_pos)?)
        } else {
            None
        };
        (out.times, out.norms, fields, None)
    };

    Ok(PropagatorSolution {
        index_set: set,
        times,
        norm_kinds: opts.norms.clone(),
        table,
        fields,
        modes,
    })
}

fn kernel_width(modes: usize, unit: bool) -> usize {
    if unit {
        modes
    } else {
        2 * modes
    }
}

fn to_trajectories(grid: &SpatialGrid, times: &[f64], per_pos: Vec<Vec<Vec<f64>>>) -> Result<Vec<Trajectory>> {
    per_pos
        .into_iter()
        .map(|records| {
            let fields = records
                .into_iter()
                .map(|values| SpatialField::new(*grid, values))
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(times.to_vec(), fields)
        })
        .collect()
}

/// Solves the propagator system for deterministic data and returns all
/// coefficient trajectories.
pub fn solve_system(config: &PropagatorConfig) -> Result<ChaosSeries<Trajectory>> {
    if !config.data.is_deterministic() {
        return Err(Error::domain("chaos-valued data: use shift_solve or solve_with_chaos_data"));
    }
    solve_with_chaos_data(config)
}

/// Solves the full system with chaos-valued data directly (each `v_gamma`
/// is the initial value of `u_gamma`, each `f_gamma` forces `u_gamma`, each
/// `g_gamma` enters the children of `gamma`).
pub fn solve_with_chaos_data(config: &PropagatorConfig) -> Result<ChaosSeries<Trajectory>> {
    let mut cfg = config.clone();
    cfg.options.keep_fields = true;
    solve(&cfg)?.into_series()
}

/// Solves the system with chaos-valued data by superposition of shifted
/// deterministic solutions:
/// `u_{alpha + gamma} = sqrt((alpha + gamma)! / (alpha! gamma!)) u_alpha(v_gamma, f_gamma, g_gamma)`.
pub fn shift_solve(config: &PropagatorConfig) -> Result<ChaosSeries<Trajectory>> {
    let mut total: Option<ChaosSeries<Trajectory>> = None;
    let set = IndexSet::new(config.max_order, config.basis);
    for (gamma, term) in config.data.terms() {
        if gamma.order() > config.max_order {
            continue;
        }
        let mut cfg = config.clone();
        cfg.max_order = config.max_order - gamma.order();
        cfg.data = ChaosData::default();
        cfg.data.insert(MultiIndex::zero(), term.clone());
        cfg.options.keep_fields = true;
        let part = solve(&cfg)?.into_series()?;
        let acc = match &mut total {
            Some(acc) => acc,
            None => {
                let zero = part.iter().next().expect("level 0 present").1.zero_like();
                let mut s = ChaosSeries::new(config.max_order, config.basis)?;
                for a in set.indices() {
                    s.insert(a.clone(), zero.clone())?;
                }
                total.insert(s)
            }
        };
        for (alpha, traj) in part.iter() {
            let beta = alpha.add(gamma);
            let c = (0.5 * (beta.log_factorial() - alpha.log_factorial() - gamma.log_factorial())).exp();
            let slot = acc.get_mut(&beta).expect("shifted index inside the truncation");
            slot.axpy(c, traj);
        }
    }
    total.ok_or_else(|| Error::domain("shift_solve needs at least one data term within the truncation"))
}

/// `S_n(t)` of a series of trajectories.
pub fn level_norm_sq(series: &ChaosSeries<Trajectory>, n: u32, t: f64, norm: SpatialNorm) -> Result<f64> {
    let (max_order, _) = series.truncation();
    if n > max_order {
        return Err(Error::domain(format!("level {n} above the truncation N = {max_order}")));
    }
    let mut total = 0.0;
    for (a, traj) in series.iter().filter(|(a, _)| a.order() == n) {
        let field = traj
            .at(t)
            .ok_or_else(|| Error::domain(format!("time {t} was not recorded for [{a}]")))?;
        total += field.norm_sq(norm);
    }
    Ok(total)
}

/// The propagator of one Fourier mode of the example equation
/// `du = u_xx dt + u_xx dW`, `u(0) = exp(-x^2/2)`: the scalar system with
/// `A = B = -y^2` and `u_(0)(0) = exp(-y^2/2)`, recorded at every step.
pub fn fourier_mode_solve(y: f64, max_order: u32, basis: u32, interval: &TimeInterval) -> Result<ChaosSeries<ScalarTrajectory>> {
    fourier_mode_solve_with(y, max_order, basis, interval, &Recording::All)
}

pub fn fourier_mode_solve_with(
    y: f64,
    max_order: u32,
    basis: u32,
    interval: &TimeInterval,
    recording: &Recording,
) -> Result<ChaosSeries<ScalarTrajectory>> {
    if basis == 0 {
        return Err(Error::domain("truncation needs K >= 1"));
    }
    let set = IndexSet::new(max_order, basis);
    let y2 = y * y;
    let mut kernel = ScalarKernel::new(-y2, -y2, (-0.5 * y2).exp(), 0);
    let spec = SweepSpec {
        index_set: &set,
        interval,
        recording,
        norms: &[SpatialNorm::L2],
        keep_state: true,
    };
    let out = sweep(&mut kernel, &spec)?;
    let mut series = ChaosSeries::new(max_order, basis)?;
    for (pos, a) in set.indices().iter().enumerate() {
        let values = out.snapshots.iter().map(|s| s[pos]).collect();
        series.insert(a.clone(), ScalarTrajectory::new(out.times.clone(), values)?)?;
    }
    Ok(series)
}

#[cfg(test)]
mod tests;

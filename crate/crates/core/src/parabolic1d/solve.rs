//! Time stepping of the deterministic `h`-equation and the drift semigroup.

use super::coeffs::{CoefficientSet, Forcing};
use super::grid::{SpatialField, SpatialGrid, Trajectory};
use super::operator;
use crate::cm_basis::{HFunction, TimeInterval};
use crate::{Error, Result};

/// Which time steps of a run are kept.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Recording {
    /// Every grid time.
    #[default]
    All,
    /// Only the final time.
    Final,
    /// Every `n`-th step plus the final time.
    Every(usize),
    /// The listed step numbers.
    Steps(Vec<usize>),
}

impl Recording {
    pub fn records(&self, step: usize, total: usize) -> bool {
        match self {
            Recording::All => true,
            Recording::Final => step == total,
            Recording::Every(n) => step == total || step % (*n).max(1) == 0,
            Recording::Steps(list) => list.contains(&step),
        }
    }

    /// Records the grid times closest to each of `times`.
    pub fn at_times(times: &[f64], interval: &TimeInterval) -> Result<Self> {
        let mut steps = Vec::with_capacity(times.len());
        for &t in times {
            let j = interval
                .step_of(t)
                .ok_or_else(|| Error::domain(format!("t = {t} is not a grid time")))?;
            steps.push(j);
        }
        steps.sort_unstable();
        steps.dedup();
        Ok(Recording::Steps(steps))
    }
}

/// Options of [`solve_h`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub recording: Recording,
    /// The run is refused unless `a + h rho >= regime_factor * delta` everywhere.
    pub regime_factor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            recording: Recording::All,
            regime_factor: 0.5,
        }
    }
}

/// Checks `a + h(t) rho >= factor * delta` at every grid time and step midpoint.
pub fn check_regime(
    h: &HFunction,
    coeffs: &CoefficientSet,
    interval: &TimeInterval,
    grid: &SpatialGrid,
    factor: f64,
) -> Result<()> {
    let delta = coeffs.regularity(grid, interval)?.delta;
    let bound = factor * delta;
    let horizon = interval.horizon();
    let dt = interval.dt();
    for j in 0..=interval.steps() {
        let t0 = interval.time(j);
        let probes = if j < interval.steps() {
            vec![t0, t0 + 0.5 * dt]
        } else {
            vec![t0]
        };
        for t in probes {
            let ht = h.eval(t, horizon);
            let v = coeffs.values(t, grid);
            let worst = v
                .a
                .iter()
                .zip(&v.rho)
                .map(|(a, r)| a + ht * r)
                .fold(f64::INFINITY, f64::min);
            if worst < bound {
                return Err(Error::Regime {
                    time: t,
                    value: worst,
                    bound,
                });
            }
        }
    }
    Ok(())
}

/// Solves `du = ((A + h B) u + f + h g) dt`, `u(0) = v` by Crank-Nicolson on
/// the grid of `v` and the time grid of `interval`.
pub fn solve_h(
    v: &SpatialField,
    f: &Forcing,
    g: &Forcing,
    h: &HFunction,
    coeffs: &CoefficientSet,
    interval: &TimeInterval,
    options: &SolveOptions,
) -> Result<Trajectory> {
    let grid = *v.grid();
    check_regime(h, coeffs, interval, &grid, options.regime_factor)?;
    let horizon = interval.horizon();
    let dt = interval.dt();
    let total = interval.steps();
    let mut times = Vec::new();
    let mut fields = Vec::new();
    let mut state = v.clone();
    if options.recording.records(0, total) {
        times.push(0.0);
        fields.push(state.clone());
    }
    for j in 0..total {
        let t = interval.time(j);
        let mid = t + 0.5 * dt;
        let h_mid = h.eval(mid, horizon);
        let mut forcing = f.sample(&grid, mid).unwrap_or_else(|| vec![0.0; grid.len()]);
        if let Some(gv) = g.sample(&grid, mid) {
            for (a, b) in forcing.iter_mut().zip(gv) {
                *a += h_mid * b;
            }
        }
        let forcing = SpatialField::new(grid, forcing)?;
        state = operator::step(&state, &forcing, coeffs, h_mid, t, dt)?;
        if options.recording.records(j + 1, total) {
            times.push(interval.time(j + 1));
            fields.push(state.clone());
        }
    }
    Trajectory::new(times, fields)
}

/// `Phi_{s,t} v`: the drift equation `du = A u dt` run from `s` to `t` in `steps` steps.
pub fn semigroup_apply(
    v: &SpatialField,
    s: f64,
    t: f64,
    coeffs: &CoefficientSet,
    steps: usize,
) -> Result<SpatialField> {
    if !(s >= 0.0 && s <= t) {
        return Err(Error::domain(format!("semigroup needs 0 <= s <= t, got s = {s}, t = {t}")));
    }
    if s == t {
        return Ok(v.clone());
    }
    if steps == 0 {
        return Err(Error::domain("semigroup needs at least one step"));
    }
    let grid = *v.grid();
    let dt = (t - s) / steps as f64;
    let zero = grid.zeros();
    let mut state = v.clone();
    for j in 0..steps {
        let tj = s + j as f64 * dt;
        state = operator::step(&state, &zero, coeffs, 0.0, tj, dt)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic1d::GridMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn gaussian_at(grid: &SpatialGrid, var: f64) -> SpatialField {
        grid.sample(|x| (1.0 / var.sqrt()) * (-x * x / (2.0 * var)).exp())
    }

    fn heat_run(grid: SpatialGrid, horizon: f64, steps: usize, h: &HFunction) -> SpatialField {
        let interval = TimeInterval::new(horizon, steps).unwrap();
        let v = gaussian_at(&grid, 1.0);
        let opts = SolveOptions {
            recording: Recording::Final,
            ..Default::default()
        };
        solve_h(
            &v,
            &Forcing::Zero,
            &Forcing::Zero,
            h,
            &CoefficientSet::heat_example(),
            &interval,
            &opts,
        )
        .unwrap()
        .last()
        .unwrap()
        .clone()
    }

    #[test]
    fn heat_gaussian_closed_form() {
        let grid = SpatialGrid::new(20.0, 1024, GridMode::PeriodicSpectral).unwrap();
        let u = heat_run(grid, 1.0, 1000, &HFunction::zero(1));
        let exact = gaussian_at(&grid, 3.0);
        assert!(u.relative_l2_distance(&exact) <= 1e-4);
    }

    #[test]
    fn h_dependent_gaussian_closed_form() {
        let grid = SpatialGrid::new(20.0, 1024, GridMode::PeriodicSpectral).unwrap();
        let h = HFunction::new(vec![0.3, 0.2]).unwrap();
        let u = heat_run(grid, 1.0, 1000, &h);
        let var = 1.0 + 2.0 * (1.0 + h.integral(1.0, 1.0));
        assert!(u.relative_l2_distance(&gaussian_at(&grid, var)) <= 1e-4);
    }

    #[test]
    fn crank_nicolson_is_second_order() {
        let grid = SpatialGrid::new(20.0, 512, GridMode::PeriodicSpectral).unwrap();
        let exact = gaussian_at(&grid, 3.0);
        let h = HFunction::zero(1);
        let errs: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&n| heat_run(grid, 1.0, n, &h).relative_l2_distance(&exact))
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..=2.2).contains(&order), "order {order}, errors {errs:?}");
        }
    }

    #[test]
    fn periodic_stepper_conserves_mass() {
        let grid = SpatialGrid::new(10.0, 256, GridMode::PeriodicSpectral).unwrap();
        let coeffs = CoefficientSet::constant(0.7, 0.0, 0.0, 0.4, 0.0, 0.0);
        let h = HFunction::new(vec![0.5, -0.3, 0.2]).unwrap();
        let v = grid.sample(|x| (-(x - 1.0).powi(2)).exp() + 0.5 * (-(x + 2.0).powi(2) / 3.0).exp());
        let interval = TimeInterval::new(1.0, 50).unwrap();
        let traj = solve_h(
            &v,
            &Forcing::Zero,
            &Forcing::Zero,
            &h,
            &coeffs,
            &interval,
            &SolveOptions::default(),
        )
        .unwrap();
        let masses: Vec<f64> = traj.fields().iter().map(|f| f.integral()).collect();
        for w in masses.windows(2) {
            assert!((w[1] - w[0]).abs() <= 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn solve_h_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let coeffs = {
            let mut c = CoefficientSet::constant(1.0, 0.3, -0.5, 0.4, 0.1, 0.2);
            c.a = Arc::new(|t, x: f64| 1.0 + 0.2 * x.sin() + 0.1 * t);
            c
        };
        let h = HFunction::new(vec![0.2, 0.1]).unwrap();
        let interval = TimeInterval::new(1.0, 40).unwrap();
        for mode in [GridMode::PeriodicSpectral, GridMode::BoundedFiniteDifference] {
            let grid = SpatialGrid::new(8.0, 128, mode).unwrap();
            let random_field = |rng: &mut ChaCha8Rng| {
                let vals = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                SpatialField::new(grid, vals).unwrap()
            };
            let (v1, v2) = (random_field(&mut rng), random_field(&mut rng));
            let (c1, c2, c3, c4): (f64, f64, f64, f64) = rng.gen();
            let f1 = Forcing::function(move |t, x| c1 * (x * t).cos());
            let f2 = Forcing::function(move |t, x| c2 * (-x * x).exp() * t);
            let g1 = Forcing::function(move |_, x| c3 * x.sin());
            let g2 = Forcing::function(move |t, x| c4 * (x + t).cos());
            let opts = SolveOptions::default();
            let run = |v: &SpatialField, f: &Forcing, g: &Forcing| {
                solve_h(v, f, g, &h, &coeffs, &interval, &opts).unwrap()
            };
            let a = run(&v1, &f1, &g1);
            let b = run(&v2, &f2, &g2);
            let mut v12 = v1.clone();
            v12.axpy(1.0, &v2);
            let (fa, fb) = (f1.clone(), f2.clone());
            let f12 = Forcing::function(move |t, x| match (&fa, &fb) {
                (Forcing::Function(p), Forcing::Function(q)) => p(t, x) + q(t, x),
                _ => unreachable!(),
            });
            let (ga, gb) = (g1.clone(), g2.clone());
            let g12 = Forcing::function(move |t, x| match (&ga, &gb) {
                (Forcing::Function(p), Forcing::Function(q)) => p(t, x) + q(t, x),
                _ => unreachable!(),
            });
            let ab = run(&v12, &f12, &g12);
            for ((x, y), z) in a.fields().iter().zip(b.fields()).zip(ab.fields()) {
                let scale = z.max_abs().max(1.0);
                for j in 0..grid.len() {
                    let sum = x.values()[j] + y.values()[j];
                    assert!((sum - z.values()[j]).abs() <= 1e-12 * scale, "{mode:?}");
                }
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = SpatialGrid::new(10.0, 64, GridMode::PeriodicSpectral).unwrap();
        let interval = TimeInterval::new(1.0, 10).unwrap();
        let traj = solve_h(
            &grid.zeros(),
            &Forcing::Zero,
            &Forcing::Zero,
            &HFunction::scaled_basis(1, 0.3),
            &CoefficientSet::heat_example(),
            &interval,
            &SolveOptions::default(),
        )
        .unwrap();
        assert!(traj.fields().iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn regime_violation_is_refused() {
        let grid = SpatialGrid::new(10.0, 64, GridMode::PeriodicSpectral).unwrap();
        let interval = TimeInterval::new(1.0, 10).unwrap();
        // h = -0.8 m_1, so a + h rho = 0.2 < 0.5
        let err = solve_h(
            &gaussian_at(&grid, 1.0),
            &Forcing::Zero,
            &Forcing::Zero,
            &HFunction::scaled_basis(1, -0.8),
            &CoefficientSet::heat_example(),
            &interval,
            &SolveOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::Regime { time, value, bound } => {
                assert_eq!(time, 0.0);
                assert!((value - 0.2).abs() < 1e-12);
                assert_eq!(bound, 0.5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn semigroup_identity_and_composition() {
        let grid = SpatialGrid::new(20.0, 512, GridMode::PeriodicSpectral).unwrap();
        let mut coeffs = CoefficientSet::heat_example();
        coeffs.a = Arc::new(|t, _| 1.0 + 0.5 * t);
        let v = gaussian_at(&grid, 1.0);
        assert_eq!(semigroup_apply(&v, 0.3, 0.3, &coeffs, 10).unwrap(), v);
        assert!(semigroup_apply(&v, 0.5, 0.3, &coeffs, 10).is_err());
        let direct = semigroup_apply(&v, 0.0, 1.0, &coeffs, 200).unwrap();
        let first = semigroup_apply(&v, 0.0, 0.4, &coeffs, 80).unwrap();
        let composed = semigroup_apply(&first, 0.4, 1.0, &coeffs, 120).unwrap();
        assert!(direct.relative_l2_distance(&composed) <= 1e-6);
        // exact: variance 1 + 2 int_0^1 (1 + s/2) ds = 3.5
        assert!(direct.relative_l2_distance(&gaussian_at(&grid, 3.5)) <= 1e-4);
    }

    #[test]
    fn bounded_and_periodic_modes_agree() {
        let run = |mode, n| heat_run(SpatialGrid::new(20.0, n, mode).unwrap(), 1.0, 500, &HFunction::zero(1));
        let spectral = run(GridMode::PeriodicSpectral, 4096);
        let fd = run(GridMode::BoundedFiniteDifference, 4096);
        assert!(spectral.relative_l2_distance(&fd) <= 1e-5);
        // second-order convergence of the difference scheme
        let exact = gaussian_at(&SpatialGrid::new(20.0, 256, GridMode::BoundedFiniteDifference).unwrap(), 3.0);
        let exact512 = gaussian_at(&SpatialGrid::new(20.0, 512, GridMode::BoundedFiniteDifference).unwrap(), 3.0);
        let coarse = run(GridMode::BoundedFiniteDifference, 256).relative_l2_distance(&exact);
        let fine = run(GridMode::BoundedFiniteDifference, 512).relative_l2_distance(&exact512);
        let order = (coarse / fine).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }
}

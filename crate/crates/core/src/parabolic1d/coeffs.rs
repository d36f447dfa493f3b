use std::fmt;
use std::sync::Arc;

use super::grid::SpatialGrid;
use crate::cm_basis::TimeInterval;
use crate::{Error, Result};

/// A deterministic function of `(t, x)`.
pub type CoefficientFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub fn constant_fn(value: f64) -> CoefficientFn {
    Arc::new(move |_, _| value)
}

/// Coefficients of `A = a D^2 + b D + c` (drift) and `B = rho D^2 + sigma D + nu`
/// (diffusion).
#[derive(Clone)]
pub struct CoefficientSet {
    pub a: CoefficientFn,
    pub b: CoefficientFn,
    pub c: CoefficientFn,
    pub rho: CoefficientFn,
    pub sigma: CoefficientFn,
    pub nu: CoefficientFn,
    /// Declared ellipticity `delta` with `a >= delta`; measured on the grid if unset.
    pub ellipticity: Option<f64>,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("ellipticity", &self.ellipticity)
            .finish_non_exhaustive()
    }
}

/// The six coefficient values on the grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientValues {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Measured regularity constants on a grid: `a >= delta` and every
/// coefficient bounded by `bound`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularity {
    pub delta: f64,
    pub bound: f64,
}

/// Which operator of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Drift,
    Diffusion,
}

impl CoefficientSet {
    pub fn constant(a: f64, b: f64, c: f64, rho: f64, sigma: f64, nu: f64) -> Self {
        Self {
            a: constant_fn(a),
            b: constant_fn(b),
            c: constant_fn(c),
            rho: constant_fn(rho),
            sigma: constant_fn(sigma),
            nu: constant_fn(nu),
            ellipticity: None,
        }
    }

    /// `du = u_xx dt + u_xx dW`.
    pub fn heat_example() -> Self {
        Self::constant(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)
    }

    /// Variable full-second-order problem: `a = 1 + 0.2 sin x`, `rho = 0.5`,
    /// `b = sigma = 0.1`, `c = nu = 0`.
    pub fn variable_example() -> Self {
        Self {
            a: Arc::new(|_, x: f64| 1.0 + 0.2 * x.sin()),
            ..Self::constant(1.0, 0.1, 0.0, 0.5, 0.1, 0.0)
        }
    }

    pub fn values(&self, t: f64, grid: &SpatialGrid) -> CoefficientValues {
        let xs = grid.coordinates();
        let eval = |f: &CoefficientFn| xs.iter().map(|&x| f(t, x)).collect::<Vec<f64>>();
        CoefficientValues {
            a: eval(&self.a),
            b: eval(&self.b),
            c: eval(&self.c),
            rho: eval(&self.rho),
            sigma: eval(&self.sigma),
            nu: eval(&self.nu),
        }
    }

    /// Times at which coefficients are evaluated by the stepper: the grid
    /// times and the step midpoints.
    fn probe_times(interval: &TimeInterval) -> impl Iterator<Item = f64> + '_ {
        let dt = interval.dt();
        (0..=interval.steps()).flat_map(move |j| {
            let t = interval.time(j);
            let mid = (j < interval.steps()).then_some(t + 0.5 * dt);
            std::iter::once(t).chain(mid)
        })
    }

    /// Checks determinism-independent assumptions on the grid: all values
    /// finite, `a` uniformly positive (and above the declared `delta`).
    pub fn regularity(&self, grid: &SpatialGrid, interval: &TimeInterval) -> Result<Regularity> {
        let mut delta = f64::INFINITY;
        let mut bound: f64 = 0.0;
        for t in Self::probe_times(interval) {
            let v = self.values(t, grid);
            for (name, vals) in v.named() {
                for &x in vals {
                    if !x.is_finite() {
                        return Err(Error::domain(format!("coefficient {name} is not finite at t = {t}")));
                    }
                    bound = bound.max(x.abs());
                }
            }
            delta = v.a.iter().fold(delta, |m, &x| m.min(x));
        }
        if !(delta > 0.0) {
            return Err(Error::domain(format!(
                "coefficient a is not uniformly positive (min {delta})"
            )));
        }
        if let Some(declared) = self.ellipticity {
            if delta < declared {
                return Err(Error::domain(format!(
                    "coefficient a drops to {delta}, below the declared ellipticity {declared}"
                )));
            }
            delta = declared;
        }
        Ok(Regularity { delta, bound })
    }

    /// True when every coefficient is constant in `x` at every stepper time.
    pub fn is_x_independent(&self, grid: &SpatialGrid, interval: &TimeInterval) -> bool {
        Self::probe_times(interval).all(|t| {
            let v = self.values(t, grid);
            v.named()
                .iter()
                .all(|(_, vals)| vals.iter().all(|&x| x == vals[0]))
        })
    }

    /// True when the diffusion operator vanishes identically on the grid.
    pub fn diffusion_vanishes(&self, grid: &SpatialGrid, interval: &TimeInterval) -> bool {
        Self::probe_times(interval).all(|t| {
            let v = self.values(t, grid);
            [&v.rho, &v.sigma, &v.nu].iter().all(|vals| vals.iter().all(|&x| x == 0.0))
        })
    }
}

impl CoefficientValues {
    fn named(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("a", &self.a),
            ("b", &self.b),
            ("c", &self.c),
            ("rho", &self.rho),
            ("sigma", &self.sigma),
            ("nu", &self.nu),
        ]
    }

    /// Second-order, first-order and zeroth-order coefficients of
    /// `A + lambda B`, or of one operator alone.
    pub fn combined(&self, which: Option<Operator>, lambda: f64) -> [Vec<f64>; 3] {
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            match which {
                Some(Operator::Drift) => x.to_vec(),
                Some(Operator::Diffusion) => y.to_vec(),
                None => x.iter().zip(y).map(|(p, q)| p + lambda * q).collect(),
            }
        };
        [
            mix(&self.a, &self.rho),
            mix(&self.b, &self.sigma),
            mix(&self.c, &self.nu),
        ]
    }
}

/// Deterministic forcing `f(t, x)` (or `g`).
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Function(CoefficientFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Forcing::Zero"),
            Forcing::Function(_) => f.write_str("Forcing::Function(..)"),
        }
    }
}

impl Forcing {
    pub fn function<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Forcing::Function(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Forcing::Zero)
    }

    /// Values on the grid at time `t`; `None` for zero forcing.
    pub fn sample(&self, grid: &SpatialGrid, t: f64) -> Option<Vec<f64>> {
        match self {
            Forcing::Zero => None,
            Forcing::Function(f) => Some(grid.coordinates().into_iter().map(|x| f(t, x)).collect()),
        }
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Forcing {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Function(f) => {
                let f = f.clone();
                Forcing::Function(Arc::new(move |t, x| c * f(t, x)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic1d::GridMode;

    #[test]
    fn regularity_measures_delta_and_bound() {
        let grid = SpatialGrid::new(10.0, 64, GridMode::PeriodicSpectral).unwrap();
        let interval = TimeInterval::new(1.0, 10).unwrap();
        let mut c = CoefficientSet::constant(1.0, 0.5, -2.0, 1.0, 0.0, 0.0);
        c.a = Arc::new(|_, x: f64| 1.0 + 0.2 * x.sin());
        let r = c.regularity(&grid, &interval).unwrap();
        assert!(r.delta >= 0.8 && r.delta < 0.81);
        assert_eq!(r.bound, 2.0);
        assert!(!c.is_x_independent(&grid, &interval));
        assert!(CoefficientSet::heat_example().is_x_independent(&grid, &interval));
    }

    #[test]
    fn degenerate_drift_is_rejected() {
        let grid = SpatialGrid::new(10.0, 64, GridMode::PeriodicSpectral).unwrap();
        let interval = TimeInterval::new(1.0, 10).unwrap();
        let c = CoefficientSet::constant(0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        assert!(c.regularity(&grid, &interval).is_err());
        let mut c = CoefficientSet::heat_example();
        c.ellipticity = Some(2.0);
        assert!(c.regularity(&grid, &interval).is_err());
    }
}

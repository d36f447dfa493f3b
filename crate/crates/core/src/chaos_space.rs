//! Chaos series, the weighted norms of the spaces `(L)_{p,q}`, the
//! S-transform and membership of stochastic exponentials.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cm_basis::HFunction;
use crate::multiindex::MultiIndex;
use crate::parabolic1d::{SpatialField, SpatialNorm, Trajectory};
use crate::{Error, Result};

/// A value that can serve as a chaos coefficient.
pub trait Coefficient: Clone + Send + Sync {
    /// Squared norm: the spatial norm for fields, its time integral for trajectories.
    fn norm_sq(&self, norm: SpatialNorm) -> Result<f64>;
    /// `self += c * other`.
    fn axpy(&mut self, c: f64, other: &Self);
    fn zero_like(&self) -> Self;
    fn same_shape(&self, other: &Self) -> bool;
}

impl Coefficient for f64 {
    fn norm_sq(&self, _: SpatialNorm) -> Result<f64> {
        Ok(self * self)
    }

    fn axpy(&mut self, c: f64, other: &Self) {
        *self += c * other;
    }

    fn zero_like(&self) -> Self {
        0.0
    }

    fn same_shape(&self, _: &Self) -> bool {
        true
    }
}

impl Coefficient for SpatialField {
    fn norm_sq(&self, norm: SpatialNorm) -> Result<f64> {
        Ok(SpatialField::norm_sq(self, norm))
    }

    fn axpy(&mut self, c: f64, other: &Self) {
        SpatialField::axpy(self, c, other);
    }

    fn zero_like(&self) -> Self {
        self.grid().zeros()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.grid() == other.grid()
    }
}

impl Coefficient for Trajectory {
    fn norm_sq(&self, norm: SpatialNorm) -> Result<f64> {
        self.integrated_norm_sq(norm)
    }

    fn axpy(&mut self, c: f64, other: &Self) {
        Trajectory::axpy(self, c, other);
    }

    fn zero_like(&self) -> Self {
        Trajectory::zeros_like(self)
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.times() == other.times()
            && match (self.fields().first(), other.fields().first()) {
                (Some(a), Some(b)) => a.grid() == b.grid(),
                (None, None) => true,
                _ => false,
            }
    }
}

/// A real-valued function of time sampled at recorded times.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarTrajectory {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarTrajectory {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::domain("scalar trajectory times and values differ in length"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("scalar trajectory times must increase"));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The sample at time `t` (matched up to rounding).
    pub fn at(&self, t: f64) -> Option<f64> {
        let tol = 1e-9 * self.times.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|i| self.values[i])
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

impl Coefficient for ScalarTrajectory {
    fn norm_sq(&self, _: SpatialNorm) -> Result<f64> {
        if self.times.len() < 2 {
            return Err(Error::domain("time integral needs at least two recorded samples"));
        }
        Ok(self
            .times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] * v[0] + v[1] * v[1]))
            .sum())
    }

    fn axpy(&mut self, c: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    fn zero_like(&self) -> Self {
        Self {
            times: self.times.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.times == other.times
    }
}

/// The weight parameters `(p, q)` of `(L)_{p,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPair {
    pub p: f64,
    pub q: f64,
}

impl WeightPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite()) {
            return Err(Error::domain(format!("weights must be finite, got ({p}, {q})")));
        }
        Ok(Self { p, q })
    }

    pub fn unweighted() -> Self {
        Self { p: 0.0, q: 0.0 }
    }

    /// `ln(2^{p|alpha|} prod_k k^{2 q alpha_k} / |alpha|!)`.
    pub fn log_weight(&self, alpha: &MultiIndex) -> f64 {
        alpha.weight_log(self.p, self.q)
    }
}

/// A truncated chaos series `sum u_alpha xi_alpha` with `|alpha| <= N` and
/// support in `1..=K`. Iteration is in increasing `|alpha|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSeries<C> {
    max_order: u32,
    basis: u32,
    coeffs: BTreeMap<MultiIndex, C>,
}

impl<C: Coefficient> ChaosSeries<C> {
    pub fn new(max_order: u32, basis: u32) -> Result<Self> {
        if basis == 0 {
            return Err(Error::domain("truncation needs K >= 1"));
        }
        Ok(Self {
            max_order,
            basis,
            coeffs: BTreeMap::new(),
        })
    }

    /// The truncation `(N, K)`.
    pub fn truncation(&self) -> (u32, u32) {
        (self.max_order, self.basis)
    }

    pub fn insert(&mut self, alpha: MultiIndex, value: C) -> Result<()> {
        if alpha.order() > self.max_order || alpha.max_index() > self.basis {
            return Err(Error::domain(format!(
                "index [{alpha}] outside truncation N = {}, K = {}",
                self.max_order, self.basis
            )));
        }
        if let Some((_, first)) = self.coeffs.iter().next() {
            if !first.same_shape(&value) {
                return Err(Error::domain(format!("coefficient at [{alpha}] has a different shape")));
            }
        }
        self.coeffs.insert(alpha, value);
        Ok(())
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<&C> {
        self.coeffs.get(alpha)
    }

    pub fn get_mut(&mut self, alpha: &MultiIndex) -> Option<&mut C> {
        self.coeffs.get_mut(alpha)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &C)> {
        self.coeffs.iter()
    }

    /// Applies `f` to every coefficient.
    pub fn map<D: Coefficient, F: Fn(&C) -> D>(&self, f: F) -> ChaosSeries<D> {
        ChaosSeries {
            max_order: self.max_order,
            basis: self.basis,
            coeffs: self.coeffs.iter().map(|(a, c)| (a.clone(), f(c))).collect(),
        }
    }

    /// Squared norms of all stored coefficients, in series order.
    pub fn norms_sq(&self, norm: SpatialNorm) -> Result<Vec<(MultiIndex, f64)>> {
        self.coeffs
            .iter()
            .map(|(a, c)| Ok((a.clone(), c.norm_sq(norm)?)))
            .collect()
    }
}

/// `sum_alpha w(alpha) n_alpha` over `(alpha, n_alpha)` pairs of squared norms.
pub fn weighted_sum<'a, I>(norms: I, w: WeightPair) -> f64
where
    I: IntoIterator<Item = (&'a MultiIndex, f64)>,
{
    norms
        .into_iter()
        .map(|(a, n)| if n == 0.0 { 0.0 } else { (w.log_weight(a) + n.ln()).exp() })
        .sum()
}

/// Weighted contribution of each level `n = 0..=N`.
pub fn level_contributions<'a, I>(norms: I, w: WeightPair, max_order: u32) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a MultiIndex, f64)>,
{
    let mut out = vec![0.0; max_order as usize + 1];
    for (a, n) in norms {
        if n != 0.0 && a.order() <= max_order {
            out[a.order() as usize] += (w.log_weight(a) + n.ln()).exp();
        }
    }
    out
}

/// `sum_alpha 2^{p|alpha|} prod k^{2 q alpha_k} / |alpha|! * ||u_alpha||_X^2`.
pub fn weighted_norm_sq<C: Coefficient>(series: &ChaosSeries<C>, w: WeightPair, norm: SpatialNorm) -> Result<f64> {
    let norms = series.norms_sq(norm)?;
    Ok(weighted_sum(norms.iter().map(|(a, n)| (a, *n)), w))
}

/// `E ||u||_X^2 = sum_alpha ||u_alpha||_X^2`.
pub fn expectation_norm_sq<C: Coefficient>(series: &ChaosSeries<C>, norm: SpatialNorm) -> Result<f64> {
    series.iter().map(|(_, c)| c.norm_sq(norm)).sum()
}

/// The S-transform `u_h = sum_alpha u_alpha h^alpha / sqrt(alpha!)`.
pub fn s_evaluate<C: Coefficient>(series: &ChaosSeries<C>, h: &HFunction) -> Result<C> {
    let (_, basis) = series.truncation();
    if h.support_max() > basis {
        return Err(Error::domain(format!(
            "h is supported up to k = {}, beyond the series basis K = {basis}",
            h.support_max()
        )));
    }
    let mut iter = series.iter();
    let Some((a0, c0)) = iter.next() else {
        return Err(Error::domain("cannot evaluate an empty series"));
    };
    let mut out = c0.zero_like();
    out.axpy(h.monomial(a0) * (-0.5 * a0.log_factorial()).exp(), c0);
    for (a, c) in iter {
        let weight = h.monomial(a) * (-0.5 * a.log_factorial()).exp();
        if weight != 0.0 {
            out.axpy(weight, c);
        }
    }
    Ok(out)
}

/// `||h||_s^2 = sum_k k^{2s} h_k^2`.
pub fn hnorm_sq(h: &HFunction, s: f64) -> f64 {
    h.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| ((i + 1) as f64).powf(2.0 * s) * c * c)
        .sum()
}

/// Whether the stochastic exponential of `h` lies in the dual of `(L)_{p,q}`:
/// `||h||_{-q}^2 < 2^p`.
pub fn eh_member(h: &HFunction, w: WeightPair) -> bool {
    hnorm_sq(h, -w.q) < 2f64.powf(w.p)
}

#[derive(Serialize)]
struct SeriesRecord<'a> {
    alpha: &'a str,
    order: u32,
    weight_log: f64,
    norm_sq: f64,
}

/// Writes one CSV record per index: characteristic set, `|alpha|`, log weight, squared norm.
pub fn write_series_csv<C: Coefficient, W: Write>(
    series: &ChaosSeries<C>,
    w: WeightPair,
    norm: SpatialNorm,
    out: W,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for (a, c) in series.iter() {
        let alpha = a.to_string();
        writer.serialize(SeriesRecord {
            alpha: &alpha,
            order: a.order(),
            weight_log: w.log_weight(a),
            norm_sq: c.norm_sq(norm)?,
        })?;
    }
    writer.flush()?;
    Ok(())
}

//! Verification suites: each criterion runs the solver against an independent
//! oracle at fixed settings and reports one pass/fail outcome.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::chaos_space::{s_evaluate, WeightPair};
use crate::cm_basis::{HFunction, TimeInterval};
use crate::multiindex::MultiIndex;
use crate::oracles::{
    gbm_coeff, growth_oracle, heat_gaussian, mc_moments, mc_orthonormality, McConfig, OracleRow,
};
use crate::parabolic1d::{
    solve_h, CoefficientSet, Forcing, GridMode, Recording, SolveOptions, SpatialField, SpatialGrid, SpatialNorm,
};
use crate::propagator::{
    fourier_mode_solve_with, shift_solve, solve, solve_with_chaos_data, ChaosData, DataTerm, DecayReport,
    PropagatorConfig,
};
use crate::{Error, Result};

/// Seed of the Monte Carlo criteria unless overridden.
pub const DEFAULT_SEED: u64 = 20_071_029;

/// A named group of criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Level norms, Stirling ratio and summability of the example equation.
    Growth,
    /// Single Fourier modes against the scalar chaos coefficients.
    Modes,
    Parseval,
    Stransform,
    Orthonormality,
    Shift,
    /// Weighted decay for the variable-coefficient problem.
    Estimate,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 8] = [
        "growth",
        "modes",
        "parseval",
        "stransform",
        "orthonormality",
        "shift",
        "estimate",
        "all",
    ];

    pub fn criteria(&self) -> &'static [u32] {
        match self {
            Suite::Growth => &[1, 2, 3],
            Suite::Modes => &[5],
            Suite::Parseval => &[6],
            Suite::Stransform => &[4],
            Suite::Orthonormality => &[7],
            Suite::Shift => &[8],
            Suite::Estimate => &[9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "growth" => Suite::Growth,
            "modes" => Suite::Modes,
            "parseval" => Suite::Parseval,
            "stransform" => Suite::Stransform,
            "orthonormality" => Suite::Orthonormality,
            "shift" => Suite::Shift,
            "estimate" => Suite::Estimate,
            "all" => Suite::All,
            other => {
                return Err(Error::domain(format!(
                    "unknown suite '{other}' (expected one of {})",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

/// Result of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub criterion: u32,
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub seconds: f64,
    pub rows: Vec<OracleRow>,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {} {}: {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.summary,
            self.seconds
        )
    }
}

pub fn criterion_name(id: u32) -> &'static str {
    match id {
        1 => "growth law",
        2 => "stirling ratio",
        3 => "weighted summability",
        4 => "s-transform consistency",
        5 => "per-mode oracle",
        6 => "parseval vs monte carlo",
        7 => "orthonormality",
        8 => "shift identity",
        9 => "weighted estimate",
        _ => "unknown",
    }
}

/// Runs one criterion.
pub fn run_criterion(id: u32, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let (rows, summary) = match id {
        1 => growth_law()?,
        2 => stirling_ratio()?,
        3 => summability()?,
        4 => s_transform()?,
        5 => fourier_modes()?,
        6 => parseval(seed)?,
        7 => orthonormality(seed)?,
        8 => shift_identity()?,
        9 => weighted_estimate()?,
        _ => return Err(Error::domain(format!("no criterion {id}"))),
    };
    Ok(Outcome {
        criterion: id,
        name: criterion_name(id),
        pass: !rows.is_empty() && rows.iter().all(|r| r.pass),
        summary,
        seconds: start.elapsed().as_secs_f64(),
        rows,
    })
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Outcome>> {
    suite.criteria().iter().map(|&id| run_criterion(id, seed)).collect()
}

fn row(quantity: String, computed: f64, oracle: f64, tolerance: f64, pass: bool) -> OracleRow {
    OracleRow {
        quantity,
        computed,
        oracle,
        standard_error_or_tolerance: tolerance,
        pass,
    }
}

fn relative_row(quantity: String, computed: f64, oracle: f64, tolerance: f64) -> OracleRow {
    let pass = (computed - oracle).abs() <= tolerance * oracle.abs();
    row(quantity, computed, oracle, tolerance, pass)
}

fn worst(rows: &[OracleRow]) -> f64 {
    rows.iter()
        .map(|r| (r.computed - r.oracle).abs() / r.oracle.abs())
        .fold(0.0, f64::max)
}

fn gaussian(grid: &SpatialGrid) -> SpatialField {
    grid.sample(|x| (-x * x / 2.0).exp())
}

/// The example equation with Gaussian datum.
pub fn example_config(max_order: u32, basis: u32, grid: SpatialGrid, interval: TimeInterval) -> PropagatorConfig {
    let v = gaussian(&grid);
    PropagatorConfig::new(
        max_order,
        basis,
        grid,
        interval,
        CoefficientSet::heat_example(),
        ChaosData::deterministic(v, Forcing::Zero, Forcing::Zero),
    )
}

fn growth_grid() -> Result<SpatialGrid> {
    SpatialGrid::new(20.0, 1024, GridMode::PeriodicSpectral)
}

/// Level norms `S_0..S_N` of the example equation at `t = T`.
fn example_levels(max_order: u32, basis: u32, t: f64) -> Result<Vec<f64>> {
    let interval = TimeInterval::with_step(t, 1e-3)?;
    let mut cfg = example_config(max_order, basis, growth_grid()?, interval);
    cfg.options.recording = Recording::Final;
    let sol = solve(&cfg)?;
    (0..=max_order).map(|n| sol.level_norm_sq(n, t, SpatialNorm::L2)).collect()
}

fn growth_law() -> Result<(Vec<OracleRow>, String)> {
    let mut rows = Vec::new();
    for t in [0.5, 1.0] {
        let k16 = example_levels(6, 16, t)?;
        let k24 = example_levels(6, 24, t)?;
        for n in 0..=6u32 {
            let oracle = growth_oracle(n, t)?.value;
            rows.push(relative_row(format!("S_{n}(t={t}) K=16"), k16[n as usize], oracle, 0.02));
            rows.push(relative_row(format!("S_{n}(t={t}) K=24"), k24[n as usize], oracle, 0.02));
            rows.push(relative_row(
                format!("S_{n}(t={t}) K=16 vs K=24"),
                k16[n as usize],
                k24[n as usize],
                0.005,
            ));
        }
    }
    let summary = format!("max relative deviation {:.2e} (tolerance 2e-2, K agreement 5e-3)", worst(&rows));
    Ok((rows, summary))
}

fn stirling_ratio() -> Result<(Vec<OracleRow>, String)> {
    let values = (1..=8).map(|n| growth_oracle(n, 1.0)).collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = values.iter().map(|g| g.stirling_ratio).collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let printed: Vec<f64> = values.iter().map(|g| g.stirling_ratio_one_plus_t).collect();
    let printed_spread = printed.iter().cloned().fold(0.0, f64::max) / printed.iter().cloned().fold(f64::INFINITY, f64::min);
    let rows = vec![row("max C(n) / min C(n), n = 1..8, t = 1".into(), max / min, 10.0, 10.0, max / min <= 10.0)];
    let summary = format!(
        "max/min C(n) = {:.3} (bound 10); with the (1+t) base the spread would be {:.3e}",
        max / min,
        printed_spread
    );
    Ok((rows, summary))
}

fn summability() -> Result<(Vec<OracleRow>, String)> {
    let t = 1.0;
    let interval = TimeInterval::with_step(t, 1e-3)?;
    let mut cfg = example_config(12, 4, growth_grid()?, interval);
    cfg.options.recording = Recording::Final;
    let sol = solve(&cfg)?;
    let norms = sol.norms_at(t, SpatialNorm::L2)?;
    let report = DecayReport::new(&norms, WeightPair::unweighted(), 12);
    let mut rows = Vec::new();
    for (n, r) in report.ratios().iter().enumerate().skip(4) {
        let r = r.unwrap_or(f64::INFINITY);
        rows.push(row(format!("c_{}/c_{n}", n + 1), r, 0.9, 0.9, r <= 0.9));
    }
    let change = report.relative_change(10, 12);
    rows.push(row("partial sum change N=10 -> 12".into(), change, 0.0, 1e-3, change < 1e-3));
    let max_ratio = report.max_ratio_from(4);
    let summary = format!("max ratio for n >= 4 is {max_ratio:.3} (bound 0.9), partial-sum change {change:.2e} (bound 1e-3)");
    Ok((rows, summary))
}

fn s_transform() -> Result<(Vec<OracleRow>, String)> {
    let t = 1.0;
    let grid = growth_grid()?;
    let interval = TimeInterval::with_step(t, 1e-3)?;
    let h = HFunction::new(vec![0.3, 0.2])?;
    let mut cfg = example_config(8, 2, grid, interval);
    cfg.options.recording = Recording::Final;
    cfg.options.keep_fields = true;
    let series = solve(&cfg)?.into_series()?;
    let evaluated = s_evaluate(&series, &h)?;
    let options = SolveOptions {
        recording: Recording::Final,
        ..Default::default()
    };
    let direct = solve_h(&gaussian(&grid), &Forcing::Zero, &Forcing::Zero, &h, &cfg.coeffs, &interval, &options)?;
    let (e, d) = (evaluated.last(), direct.last());
    let (Some(e), Some(d)) = (e, d) else {
        return Err(Error::numerical("empty trajectory"));
    };
    let exact = heat_gaussian(&grid, t, Some(&h), t);
    let chaos_gap = e.relative_l2_distance(d);
    let closed_gap = d.relative_l2_distance(&exact);
    let rows = vec![
        row("relative L2 s_evaluate vs solve_h (t=1, N=8)".into(), chaos_gap, 0.0, 1e-3, chaos_gap <= 1e-3),
        row("relative L2 solve_h vs closed form (t=1)".into(), closed_gap, 0.0, 1e-4, closed_gap <= 1e-4),
    ];
    let summary = format!("chaos vs solve_h {chaos_gap:.2e} (bound 1e-3), solve_h vs closed form {closed_gap:.2e} (bound 1e-4)");
    Ok((rows, summary))
}

fn fourier_modes() -> Result<(Vec<OracleRow>, String)> {
    // m_1 and m_2; the evaluation times keep M_2(t) away from zero.
    let interval = TimeInterval::with_step(1.0, 1e-4)?;
    let times = [0.4, 0.75];
    let recording = Recording::at_times(&times, &interval)?;
    let mut rows = Vec::new();
    for y in [0.5, 1.0, 2.0] {
        let series = fourier_mode_solve_with(y, 4, 2, &interval, &recording)?;
        for &t in &times {
            for (alpha, traj) in series.iter() {
                let computed = traj
                    .at(t)
                    .ok_or_else(|| Error::numerical(format!("time {t} missing")))?;
                let oracle = gbm_coeff(alpha, t, y, &interval)?;
                rows.push(relative_row(format!("u_[{alpha}](t={t}, y={y})"), computed, oracle, 1e-6));
            }
        }
    }
    let summary = format!("{} coefficients, max relative error {:.2e} (bound 1e-6)", rows.len(), worst(&rows));
    Ok((rows, summary))
}

fn parseval(seed: u64) -> Result<(Vec<OracleRow>, String)> {
    let (t, y) = (0.5, 1.0);
    let interval = TimeInterval::with_step(t, 1e-4)?;
    let series = fourier_mode_solve_with(y, 12, 4, &interval, &Recording::Final)?;
    let mut second = 0.0;
    let mut mean = 0.0;
    for (alpha, traj) in series.iter() {
        let u = traj.last().unwrap_or(0.0);
        second += u * u;
        if alpha.is_zero() {
            mean = u;
        }
    }
    let mc = mc_moments(t, y, &McConfig::new(100_000, 1_000, seed)?)?;
    let rows = vec![
        row(
            "sum |u_alpha|^2 vs MC E|u|^2".into(),
            second,
            mc.second_moment.mean,
            mc.second_moment.standard_error,
            mc.second_moment.within(second, 3.0),
        ),
        row(
            "u_(0) vs MC E u".into(),
            mean,
            mc.mean.mean,
            mc.mean.standard_error,
            mc.mean.within(mean, 3.0),
        ),
    ];
    let summary = format!(
        "second moment {:.2} SE apart, mean {:.2} SE apart (bound 3)",
        (second - mc.second_moment.mean).abs() / mc.second_moment.standard_error,
        (mean - mc.mean.mean).abs() / mc.mean.standard_error
    );
    Ok((rows, summary))
}

fn orthonormality(seed: u64) -> Result<(Vec<OracleRow>, String)> {
    let gram = mc_orthonormality(3, 4, &McConfig::new(100_000, 2, seed)?)?;
    let rows: Vec<OracleRow> = gram
        .into_iter()
        .map(|(a, b, v)| {
            let target = if a == b { 1.0 } else { 0.0 };
            row(format!("E xi_[{a}] xi_[{b}]"), v, target, 0.02, (v - target).abs() <= 0.02)
        })
        .collect();
    let failures = rows.iter().filter(|r| !r.pass).count();
    let max_dev = rows.iter().map(|r| (r.computed - r.oracle).abs()).fold(0.0, f64::max);
    let summary = format!(
        "{} pairs, {failures} outside 0.02, max deviation {max_dev:.4}",
        rows.len()
    );
    Ok((rows, summary))
}

fn shift_identity() -> Result<(Vec<OracleRow>, String)> {
    let mut rows = Vec::new();
    let cases = [
        ("example", CoefficientSet::heat_example(), SpatialGrid::new(10.0, 128, GridMode::PeriodicSpectral)?),
        (
            "variable",
            CoefficientSet::variable_example(),
            SpatialGrid::new(3.0 * std::f64::consts::PI, 128, GridMode::PeriodicSpectral)?,
        ),
    ];
    for (label, coeffs, grid) in cases {
        let interval = TimeInterval::with_step(0.5, 1e-2)?;
        let v = gaussian(&grid);
        let mut data = ChaosData::deterministic(v.clone(), Forcing::Zero, Forcing::function(|_, x| 0.1 * (-x * x).exp()));
        data.insert(MultiIndex::unit(1), DataTerm::initial(v.scaled(0.5)));
        data.insert(
            MultiIndex::unit(2),
            DataTerm {
                v: None,
                f: Forcing::function(|t, x| t * (-(x - 1.0).powi(2)).exp()),
                g: Forcing::Zero,
            },
        );
        data.insert(MultiIndex::from_dense(&[2]), DataTerm::initial(grid.sample(|x| (-x * x).exp())));
        data.insert(
            MultiIndex::from_dense(&[1, 1]),
            DataTerm {
                v: Some(v.scaled(-0.25)),
                f: Forcing::Zero,
                g: Forcing::function(|_, x| 0.2 * (-(x + 1.0).powi(2)).exp()),
            },
        );
        let cfg = PropagatorConfig::new(4, 2, grid, interval, coeffs, data);
        let direct = solve_with_chaos_data(&cfg)?;
        let shifted = shift_solve(&cfg)?;
        let mut scale: f64 = 0.0;
        let mut diff: f64 = 0.0;
        for (alpha, traj) in direct.iter() {
            let other = shifted
                .get(alpha)
                .ok_or_else(|| Error::numerical(format!("[{alpha}] missing from shift solution")))?;
            for (a, b) in traj.fields().iter().zip(other.fields()) {
                scale = scale.max(a.max_abs());
                for (x, y) in a.values().iter().zip(b.values()) {
                    diff = diff.max((x - y).abs());
                }
            }
        }
        let rel = diff / scale;
        rows.push(row(format!("{label}: max |shift - direct| / max |u|"), rel, 0.0, 1e-10, rel <= 1e-10));
    }
    let summary = format!(
        "max relative gap {:.2e} (bound 1e-10)",
        rows.iter().map(|r| r.computed).fold(0.0, f64::max)
    );
    Ok((rows, summary))
}

/// Candidate `(r, l)` pairs for the weighted estimate, from mildest to strongest.
pub fn estimate_candidates() -> Vec<WeightPair> {
    let mut out = Vec::new();
    for r in [-2.0, -3.0, -4.0, -6.0, -8.0] {
        for l in [-2.0, -3.0, -4.0] {
            out.push(WeightPair { p: r, q: l });
        }
    }
    out
}

fn weighted_estimate() -> Result<(Vec<OracleRow>, String)> {
    let grid = SpatialGrid::new(6.0 * std::f64::consts::PI, 256, GridMode::PeriodicSpectral)?;
    let interval = TimeInterval::with_step(1.0, 1e-2)?;
    let v = gaussian(&grid);
    let mut cfg = PropagatorConfig::new(
        8,
        4,
        grid,
        interval,
        CoefficientSet::variable_example(),
        ChaosData::deterministic(v, Forcing::Zero, Forcing::Zero),
    );
    cfg.options.norms = vec![SpatialNorm::H1];
    let sol = solve(&cfg)?;
    let norms = sol.integrated_norms(SpatialNorm::H1)?;
    let found = estimate_candidates().into_iter().find_map(|w| {
        let report = DecayReport::new(&norms, w, 8);
        let change = report.relative_change(7, 8);
        (report.decays(4, 0.9) && change < 0.01 && report.total().is_finite()).then_some((report, change))
    });
    let (rows, summary) = match found {
        Some((report, change)) => {
            let w = report.weights;
            let ratio = report.max_ratio_from(4);
            (
                vec![
                    row(format!("max ratio n >= 4 at (r, l) = ({}, {})", w.p, w.q), ratio, 0.9, 0.9, ratio <= 0.9),
                    row("weighted norm change N=7 -> 8".into(), change, 0.0, 0.01, change < 0.01),
                ],
                format!(
                    "(r, l) = ({}, {}): max ratio {ratio:.3} (bound 0.9), change {change:.2e} (bound 1e-2), weighted norm {:.4e}",
                    w.p,
                    w.q,
                    report.total()
                ),
            )
        }
        None => (
            vec![row("admissible (r, l) with r, l <= -2".into(), 0.0, 1.0, 0.0, false)],
            "no candidate (r, l) gives geometric decay".into(),
        ),
    };
    Ok((rows, summary))
}

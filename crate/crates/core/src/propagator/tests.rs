use super::*;
use crate::chaos_space::s_evaluate;
use crate::cm_basis::{cosine, HFunction};
use crate::oracles::{gbm_coeff, heat_gaussian, second_moment_exact};
use crate::parabolic1d::{apply_operator, semigroup_apply, solve_h, Operator, SolveOptions};
use proptest::prelude::*;

fn periodic(n: usize, half_width: f64) -> SpatialGrid {
    SpatialGrid::new(half_width, n, GridMode::PeriodicSpectral).unwrap()
}

fn gaussian(grid: &SpatialGrid) -> SpatialField {
    grid.sample(|x| (-x * x / 2.0).exp())
}

fn heat_config(n_order: u32, basis: u32, grid: SpatialGrid, interval: TimeInterval) -> PropagatorConfig {
    let v = gaussian(&grid);
    PropagatorConfig::new(
        n_order,
        basis,
        grid,
        interval,
        CoefficientSet::heat_example(),
        ChaosData::deterministic(v, Forcing::Zero, Forcing::Zero),
    )
}

#[test]
fn no_diffusion_operator_leaves_only_the_mean() {
    let grid = periodic(64, 10.0);
    let mut cfg = heat_config(3, 3, grid, TimeInterval::new(0.5, 50).unwrap());
    cfg.coeffs = CoefficientSet::constant(1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let sol = solve(&cfg).unwrap();
    assert!(sol.level_norm_sq(0, 0.5, SpatialNorm::L2).unwrap() > 0.0);
    for n in 1..=3 {
        assert_eq!(sol.level_norm_sq(n, 0.5, SpatialNorm::L2).unwrap(), 0.0);
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let grid = periodic(32, 5.0);
    let mut cfg = heat_config(2, 2, grid, TimeInterval::new(0.2, 10).unwrap());
    cfg.data = ChaosData::deterministic(grid.zeros(), Forcing::Zero, Forcing::Zero);
    cfg.options.keep_fields = true;
    let sol = solve(&cfg).unwrap();
    assert_eq!(sol.retained_modes(), Some(0));
    let series = sol.into_series().unwrap();
    for (_, traj) in series.iter() {
        assert!(traj.fields().iter().all(|f| f.max_abs() == 0.0));
    }
}

#[test]
fn fourier_mode_matches_scalar_chaos_coefficients() {
    let interval = TimeInterval::new(1.0, 10_000).unwrap();
    let series = fourier_mode_solve(1.0, 4, 2, &interval).unwrap();
    for t in [0.4, 0.75] {
        for (alpha, traj) in series.iter() {
            let exact = gbm_coeff(alpha, t, 1.0, &interval).unwrap();
            let got = traj.at(t).unwrap();
            assert!((got - exact).abs() <= 1e-6 * exact.abs(), "[{alpha}] t = {t}: {got} vs {exact}");
        }
    }
    // The time error grows with the frequency of m_k; K = 4 stays second order.
    let coarse = fourier_mode_solve(1.0, 2, 4, &TimeInterval::new(1.0, 1_000).unwrap()).unwrap();
    let alpha = MultiIndex::from_dense(&[0, 0, 0, 2]);
    let err = |s: &ChaosSeries<ScalarTrajectory>| (s.get(&alpha).unwrap().at(0.4).unwrap() - gbm_coeff(&alpha, 0.4, 1.0, &interval).unwrap()).abs();
    let fine = fourier_mode_solve(1.0, 2, 4, &interval).unwrap();
    let ratio = err(&coarse) / err(&fine);
    assert!((80.0..120.0).contains(&ratio), "{ratio}");
}

#[test]
fn fourier_mode_parseval_at_horizon() {
    // At t = T only M_1 is non-zero, so K = 1 carries the full second moment.
    let interval = TimeInterval::new(0.5, 5_000).unwrap();
    let series = fourier_mode_solve(1.0, 14, 1, &interval).unwrap();
    let total: f64 = series.iter().map(|(_, tr)| tr.last().unwrap().powi(2)).sum();
    let exact = second_moment_exact(0.5, 1.0);
    assert!((total - exact).abs() < 1e-6 * exact, "{total} vs {exact}");
}

#[test]
fn first_order_coefficient_matches_semigroup_quadrature() {
    // u_{e_k}(t) = int_0^t m_k(s) P_{s,t} B P_{0,s} v ds.
    // With x-independent coefficients u_{e_k}(T) vanishes for k >= 2, so
    // compare at an interior time.
    let grid = periodic(256, 20.0);
    let (horizon, t) = (0.5, 0.3);
    let interval = TimeInterval::new(horizon, 500).unwrap();
    let mut cfg = heat_config(1, 2, grid, interval);
    cfg.options.keep_fields = true;
    let sol = solve(&cfg).unwrap();
    let coeffs = CoefficientSet::heat_example();
    let v = gaussian(&grid);
    let nodes = 64;
    let ds = t / nodes as f64;
    for k in 1..=2 {
        let mut quad = grid.zeros();
        for j in 0..nodes {
            let s = (j as f64 + 0.5) * ds;
            let inner = semigroup_apply(&v, 0.0, s, &coeffs, 200).unwrap();
            let b = apply_operator(&inner, Operator::Diffusion, &coeffs, s).unwrap();
            let outer = semigroup_apply(&b, s, t, &coeffs, 200).unwrap();
            quad.axpy(cosine(k, s, horizon).unwrap() * ds, &outer);
        }
        let got = sol.field(&MultiIndex::unit(k)).unwrap().at(t).unwrap();
        let err = got.relative_l2_distance(&quad);
        assert!(err < 1e-4, "k = {k}: {err}");
    }
}

#[test]
fn lower_levels_do_not_depend_on_truncation_order() {
    let grid = periodic(64, 10.0);
    let interval = TimeInterval::new(0.5, 50).unwrap();
    let small = solve(&heat_config(2, 3, grid, interval)).unwrap();
    let large = solve(&heat_config(4, 3, grid, interval)).unwrap();
    for (alpha, value) in small.norms_at(0.5, SpatialNorm::L2).unwrap() {
        assert_eq!(large.coefficient_norm_sq(&alpha, 0.5, SpatialNorm::L2).unwrap(), value, "[{alpha}]");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coefficients_do_not_depend_on_unused_basis_functions(k_small in 1u32..3, extra in 1u32..3, y in 0.2f64..2.0) {
        let interval = TimeInterval::new(1.0, 100).unwrap();
        let small = fourier_mode_solve(y, 3, k_small, &interval).unwrap();
        let large = fourier_mode_solve(y, 3, k_small + extra, &interval).unwrap();
        for (alpha, traj) in small.iter() {
            prop_assert_eq!(traj.values(), large.get(alpha).unwrap().values());
        }
    }
}

#[test]
fn s_transform_of_chaos_solution_is_the_h_solution() {
    let grid = periodic(128, 15.0);
    let interval = TimeInterval::new(1.0, 100).unwrap();
    let mut cfg = heat_config(16, 2, grid, interval);
    cfg.options.keep_fields = true;
    cfg.options.spectral_cutoff = None;
    let series = solve(&cfg).unwrap().into_series().unwrap();
    let h = HFunction::new(vec![0.3, 0.2]).unwrap();
    let evaluated = s_evaluate(&series, &h).unwrap();
    let v = gaussian(&grid);
    let direct = solve_h(&v, &Forcing::Zero, &Forcing::Zero, &h, &cfg.coeffs, &interval, &SolveOptions::default()).unwrap();
    for t in [0.5, 1.0] {
        let err = evaluated.at(t).unwrap().relative_l2_distance(direct.at(t).unwrap());
        assert!(err < 1e-9, "t = {t}: {err}");
    }
    // The continuous heat Gaussian agrees up to discretisation error.
    let exact = heat_gaussian(&grid, 1.0, Some(&h), 1.0);
    assert!(evaluated.last().unwrap().relative_l2_distance(&exact) < 1e-4);
}

#[test]
fn fourier_and_physical_kernels_agree() {
    let grid = periodic(64, 8.0);
    let interval = TimeInterval::new(0.4, 40).unwrap();
    let mut cfg = heat_config(3, 2, grid, interval);
    cfg.coeffs = CoefficientSet::constant(1.0, 0.3, -0.2, 0.8, 0.1, 0.05);
    cfg.options.keep_fields = true;
    cfg.options.spectral_cutoff = None;
    cfg.options.norms = vec![SpatialNorm::L2, SpatialNorm::H1];
    cfg.options.mode_group = 7;
    let modal = solve(&cfg).unwrap();
    assert!(modal.retained_modes().is_some());
    cfg.options.kernel = KernelChoice::Physical;
    let physical = solve(&cfg).unwrap();
    assert!(physical.retained_modes().is_none());
    for norm in [SpatialNorm::L2, SpatialNorm::H1] {
        let scale = physical.coefficient_norm_sq(&MultiIndex::zero(), 0.4, norm).unwrap();
        for (alpha, a) in modal.norms_at(0.4, norm).unwrap() {
            let b = physical.coefficient_norm_sq(&alpha, 0.4, norm).unwrap();
            assert!((a - b).abs() <= 1e-10 * scale, "[{alpha}] {a} vs {b}");
        }
    }
    let scale = physical.field(&MultiIndex::zero()).unwrap().last().unwrap().l2_sq().sqrt();
    for alpha in modal.index_set().indices() {
        let mut d = modal.field(alpha).unwrap().last().unwrap().clone();
        d.axpy(-1.0, physical.field(alpha).unwrap().last().unwrap());
        assert!(d.l2_sq().sqrt() < 1e-10 * scale, "[{alpha}]");
    }
}

#[test]
fn unit_data_path_matches_complex_path() {
    // b = sigma = 0 allows real lanes; a tiny sigma forces complex lanes.
    let grid = periodic(64, 8.0);
    let interval = TimeInterval::new(0.3, 30).unwrap();
    let run = |sigma: f64| {
        let mut cfg = heat_config(3, 2, grid, interval);
        cfg.coeffs = CoefficientSet::constant(1.0, 0.0, 0.0, 1.0, sigma, 0.0);
        cfg.options.spectral_cutoff = None;
        solve(&cfg).unwrap().norms_at(0.3, SpatialNorm::L2).unwrap()
    };
    let (unit, complex) = (run(0.0), run(1e-300));
    let scale = complex[0].1;
    for ((a, x), (_, y)) in unit.iter().zip(complex) {
        assert!((x - y).abs() <= 1e-12 * scale, "[{a}]");
    }
}

#[test]
fn shift_identity_reproduces_direct_solve() {
    let grid = periodic(64, 8.0);
    let interval = TimeInterval::new(0.3, 30).unwrap();
    let mut cfg = heat_config(4, 2, grid, interval);
    cfg.coeffs = CoefficientSet::constant(1.0, 0.1, 0.0, 0.7, 0.2, 0.0);
    let v = gaussian(&grid);
    cfg.data.insert(MultiIndex::unit(1), DataTerm::initial(v.scaled(0.5)));
    cfg.data.insert(
        MultiIndex::from_dense(&[1, 1]),
        DataTerm {
            v: Some(grid.sample(|x| (-x * x).exp())),
            f: Forcing::function(|t, x| t * (-x * x).exp()),
            g: Forcing::function(|_, x| 0.1 * (-(x - 1.0).powi(2)).exp()),
        },
    );
    let direct = solve_with_chaos_data(&cfg).unwrap();
    let shifted = shift_solve(&cfg).unwrap();
    for (alpha, traj) in direct.iter() {
        let other = shifted.get(alpha).unwrap();
        for (a, b) in traj.fields().iter().zip(other.fields()) {
            let scale = a.max_abs().max(1e-300);
            let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-10 * scale.max(1.0), "[{alpha}] {diff}");
        }
    }
}

#[test]
fn solve_system_rejects_chaos_data() {
    let grid = periodic(32, 5.0);
    let mut cfg = heat_config(2, 2, grid, TimeInterval::new(0.2, 10).unwrap());
    cfg.data.insert(MultiIndex::unit(1), DataTerm::initial(gaussian(&grid)));
    assert!(solve_system(&cfg).is_err());
    cfg.data.insert(MultiIndex::unit(3), DataTerm::initial(gaussian(&grid)));
    assert!(solve(&cfg).is_err());
}

#[test]
fn level_norm_of_series_matches_solution_table() {
    let grid = periodic(64, 8.0);
    let interval = TimeInterval::new(0.3, 30).unwrap();
    let mut cfg = heat_config(3, 2, grid, interval);
    cfg.options.keep_fields = true;
    let sol = solve(&cfg).unwrap();
    let table: Vec<f64> = (0..=3).map(|n| sol.level_norm_sq(n, 0.3, SpatialNorm::L2).unwrap()).collect();
    let series = sol.into_series().unwrap();
    for (n, s) in table.iter().enumerate() {
        let from_series = level_norm_sq(&series, n as u32, 0.3, SpatialNorm::L2).unwrap();
        assert!((from_series - s).abs() <= 1e-12 * s.max(1e-300));
    }
}

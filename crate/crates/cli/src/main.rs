use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use wiener_chaos::chaos_space::s_evaluate;
use wiener_chaos::cm_basis::TimeInterval;
use wiener_chaos::oracles::{growth_oracle, growth_trapezoid, mc_moments, McConfig};
use wiener_chaos::parabolic1d::{solve_h, Recording, SolveOptions, SpatialNorm};
use wiener_chaos::propagator::{fourier_mode_solve_with, solve, DecayReport};
use wiener_chaos::suites::{run_suite, Suite, DEFAULT_SEED};

mod config;
mod expr;
mod output;

use config::{preset_config, ConfigError, Format, RunConfig};
use output::{Cell, Table};

#[derive(Parser)]
#[command(name = "wchaos", version, about = "Wiener chaos propagator solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the propagator system and write norm tables.
    Solve(RunArgs),
    /// Run verification suites.
    Verify {
        /// growth, modes, parseval, stransform, orthonormality, shift, estimate or all.
        suite: Option<String>,
        #[arg(long = "suite", conflicts_with = "suite")]
        suite_flag: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Compare the S-transform of the chaos solution with the h-equation.
    Stransform {
        #[command(flatten)]
        run: RunArgs,
        /// Coefficients of h in the cosine basis, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        h: Option<String>,
    },
    /// Tabulate the growth law of the example equation.
    Growth {
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        t: f64,
        #[arg(long, default_value_t = 8)]
        max_n: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON or TOML run configuration.
    #[arg(long, required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: paper-example or variable-coefficient.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the Monte Carlo check (overrides mc.seed).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] wiener_chaos::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0} criteria failed")]
    Verification(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => run_solve(&args),
        Command::Verify {
            suite,
            suite_flag,
            seed,
            out,
            format,
        } => run_verify(suite.or(suite_flag).as_deref(), seed, out.as_deref(), format),
        Command::Stransform { run, h } => run_stransform(&run, h.as_deref()),
        Command::Growth { t, max_n, out, format } => run_growth(t, max_n, out.as_deref(), format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

struct Loaded {
    config: RunConfig,
    out: PathBuf,
    formats: Vec<Format>,
}

fn load(args: &RunArgs) -> Result<Loaded, CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => preset_config(name).ok_or_else(|| {
            CliError::Usage(format!("unknown preset '{name}' (expected paper-example or variable-coefficient)"))
        })?,
        (None, None) => return Err(CliError::Usage("--config or --preset is required".into())),
    };
    if let (Some(seed), Some(mc)) = (args.seed, config.mc.as_mut()) {
        mc.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.outputs.dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("no output directory (--out or outputs.dir)".into()))?;
    let formats = match args.format {
        Some(f) => vec![f],
        None => config.outputs.formats.clone(),
    };
    Ok(Loaded { config, out, formats })
}

fn run_solve(args: &RunArgs) -> Result<(), CliError> {
    let Loaded { config, out, formats } = load(args)?;
    let prepared = config.prepare()?;
    let header = config.header_line();
    let solution = solve(&prepared.propagator)?;
    let (max_order, _) = config.truncation()?;

    let mut coeffs = Table::new("coefficient_norms", &header, &["alpha", "order", "t", "norm", "norm_sq"]);
    let mut levels = Table::new(
        "level_norms",
        &header,
        &["n", "t", "norm", "S_n", "oracle_value", "relative_error"],
    );
    for &norm in &prepared.norms {
        for &t in solution.times() {
            for (alpha, v) in solution.norms_at(t, norm)? {
                coeffs.push(vec![alpha.to_string().into(), alpha.order().into(), t.into(), norm.name().into(), v.into()]);
            }
            for n in 0..=max_order {
                let s = solution.level_norm_sq(n, t, norm)?;
                let oracle = (prepared.is_paper_example && norm == SpatialNorm::L2 && t > 0.0 && n <= 12)
                    .then(|| growth_oracle(n, t).map(|g| g.value))
                    .transpose()?;
                let rel = oracle.map(|o| (s - o).abs() / o.abs());
                levels.push(vec![n.into(), t.into(), norm.name().into(), s.into(), oracle.into(), rel.into()]);
            }
        }
    }

    let mut weighted = Table::new(
        "weighted_norms",
        &header,
        &["p", "q", "norm", "quantity", "n", "contribution", "partial_sum", "ratio"],
    );
    let horizon = config.time.horizon;
    for &norm in &prepared.norms {
        let mut sources = vec![("final", solution.norms_at(horizon, norm)?)];
        if solution.times().len() > 1 {
            sources.push(("time-integrated", solution.integrated_norms(norm)?));
        }
        for (label, norms) in &sources {
            for &w in &prepared.weights {
                let report = DecayReport::new(norms, w, max_order);
                let ratios = report.ratios();
                for n in 0..=max_order as usize {
                    let ratio = if n == 0 { None } else { ratios[n - 1] };
                    weighted.push(vec![
                        w.p.into(),
                        w.q.into(),
                        norm.name().into(),
                        (*label).into(),
                        n.into(),
                        report.contributions[n].into(),
                        report.partial_sums[n].into(),
                        ratio.into(),
                    ]);
                }
            }
        }
    }

    for table in [&coeffs, &levels, &weighted] {
        table.save(&out, &formats)?;
    }
    if let Some(mc) = &prepared.mc {
        mc_table(&header, mc, max_order, config.truncation()?.1, &config.interval()?)?.save(&out, &formats)?;
    }
    if let Some(modes) = solution.retained_modes() {
        println!("propagated {modes} Fourier bins");
    }
    for row in &levels.rows {
        if let (Cell::Int(n), Cell::Num(t), Cell::Num(s)) = (&row[0], &row[1], &row[3]) {
            if (*t - horizon).abs() < 1e-12 {
                println!("S_{n}({t}) = {s:.6e}");
            }
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Per-mode Parseval check of the example equation at `t = T` against Monte Carlo.
fn mc_table(
    header: &str,
    mc: &McConfig,
    max_order: u32,
    basis: u32,
    interval: &TimeInterval,
) -> Result<Table, CliError> {
    let t = interval.horizon();
    let mut table = Table::new(
        "mc_moments",
        header,
        &["y", "quantity", "chaos", "monte_carlo", "standard_error", "within_3_se"],
    );
    for y in [0.5, 1.0, 2.0] {
        let series = fourier_mode_solve_with(y, max_order, basis, interval, &Recording::Final)?;
        let (mut second, mut mean) = (0.0, 0.0);
        for (alpha, traj) in series.iter() {
            let u = traj.last().unwrap_or(0.0);
            second += u * u;
            if alpha.is_zero() {
                mean = u;
            }
        }
        let est = mc_moments(t, y, mc)?;
        for (name, value, e) in [("second_moment", second, est.second_moment), ("mean", mean, est.mean)] {
            table.push(vec![
                y.into(),
                name.into(),
                value.into(),
                e.mean.into(),
                e.standard_error.into(),
                e.within(value, 3.0).into(),
            ]);
        }
    }
    Ok(table)
}

fn run_stransform(args: &RunArgs, h_flag: Option<&str>) -> Result<(), CliError> {
    let Loaded { config, out, formats } = load(args)?;
    let prepared = config.prepare()?;
    let interval = config.interval()?;
    let (_, basis) = config.truncation()?;
    let h = config.h_function(basis, &interval, h_flag)?;
    let options = SolveOptions {
        recording: Recording::Final,
        ..Default::default()
    };
    let direct = solve_h(
        &prepared.v,
        &prepared.f,
        &prepared.g,
        &h,
        &prepared.propagator.coeffs,
        &interval,
        &options,
    )?;
    let mut cfg = prepared.propagator.clone();
    cfg.options.recording = Recording::Final;
    cfg.options.keep_fields = true;
    let series = solve(&cfg)?.into_series()?;
    let chaos = s_evaluate(&series, &h)?;
    let (Some(c), Some(d)) = (chaos.last(), direct.last()) else {
        return Err(CliError::Numerical(wiener_chaos::Error::Numerical("empty trajectory".into())));
    };
    let diff = c.relative_l2_distance(d);

    let header = config.header_line();
    let mut fields = Table::new("stransform", &header, &["x", "s_evaluate", "solve_h", "difference"]);
    let grid = c.grid();
    for (j, (a, b)) in c.values().iter().zip(d.values()).enumerate() {
        fields.push(vec![grid.x(j).into(), (*a).into(), (*b).into(), (a - b).into()]);
    }
    let mut summary = Table::new("stransform_summary", &header, &["quantity", "value"]);
    summary.push(vec!["t".into(), interval.horizon().into()]);
    summary.push(vec!["h_coefficients".into(), format!("{:?}", h.coeffs()).into()]);
    summary.push(vec!["relative_l2_difference".into(), diff.into()]);
    fields.save(&out, &formats)?;
    summary.save(&out, &formats)?;
    println!("relative L2 difference at t = {}: {diff:.6e}", interval.horizon());
    Ok(())
}

fn run_verify(suite: Option<&str>, seed: Option<u64>, out: Option<&Path>, format: Option<Format>) -> Result<(), CliError> {
    let suite: Suite = suite
        .unwrap_or("all")
        .parse()
        .map_err(|e: wiener_chaos::Error| CliError::Usage(e.to_string()))?;
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let outcomes = run_suite(suite, seed)?;
    for o in &outcomes {
        println!("{o}");
    }
    if let Some(dir) = out {
        let header = format!("# verify seed={seed}");
        let mut table = Table::new(
            "verify_report",
            &header,
            &["criterion", "quantity", "computed", "oracle", "standard_error_or_tolerance", "pass"],
        );
        for o in &outcomes {
            for r in &o.rows {
                table.push(vec![
                    o.criterion.into(),
                    r.quantity.clone().into(),
                    r.computed.into(),
                    r.oracle.into(),
                    r.standard_error_or_tolerance.into(),
                    r.pass.into(),
                ]);
            }
        }
        table.save(dir, &[format.unwrap_or(Format::Csv)])?;
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}

fn run_growth(t: f64, max_n: u32, out: Option<&Path>, format: Option<Format>) -> Result<(), CliError> {
    let header = format!("# growth t={t} max_n={max_n}");
    let mut table = Table::new(
        "growth",
        &header,
        &["n", "t", "S_n", "log_S_n", "S_n_trapezoid", "stirling_ratio", "stirling_ratio_one_plus_t"],
    );
    for n in 0..=max_n {
        let g = growth_oracle(n, t)?;
        table.push(vec![
            n.into(),
            t.into(),
            g.value.into(),
            g.log_value.into(),
            growth_trapezoid(n, t, 20_001).into(),
            g.stirling_ratio.into(),
            g.stirling_ratio_one_plus_t.into(),
        ]);
    }
    match out {
        Some(dir) => table.save(dir, &[format.unwrap_or(Format::Csv)])?,
        None => match format.unwrap_or(Format::Csv) {
            Format::Csv => table.write_csv(std::io::stdout())?,
            Format::Json => table.write_json(std::io::stdout())?,
        },
    }
    Ok(())
}

//! Run configuration (JSON or TOML) and its translation into solver inputs.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wiener_chaos::chaos_space::WeightPair;
use wiener_chaos::cm_basis::{HFunction, TimeInterval};
use wiener_chaos::multiindex::binomial;
use wiener_chaos::oracles::McConfig;
use wiener_chaos::parabolic1d::{CoefficientSet, Forcing, GridMode, SpatialField, SpatialGrid, SpatialNorm};
use wiener_chaos::propagator::{ChaosData, PropagatorConfig};

use crate::expr::Expr;

/// Largest index set a run may request.
const MAX_INDICES: u128 = 20_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub equation: EquationBlock,
    pub grid: GridBlock,
    pub time: TimeBlock,
    pub truncation: TruncationBlock,
    #[serde(default)]
    pub weights: WeightsBlock,
    #[serde(default)]
    pub outputs: OutputsBlock,
    #[serde(default)]
    pub mc: Option<McBlock>,
    #[serde(default)]
    pub stransform: Option<StransformBlock>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EquationBlock {
    /// `paper-example` or `variable-coefficient`.
    pub preset: Option<String>,
    pub a: Option<String>,
    pub b: Option<String>,
    pub c: Option<String>,
    pub rho: Option<String>,
    pub sigma: Option<String>,
    pub nu: Option<String>,
    /// Initial datum: expression in `x` or the presets `gaussian`, `zero`.
    pub v: Option<String>,
    pub f: Option<String>,
    pub g: Option<String>,
    /// Declared lower bound of `a`.
    pub ellipticity: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub n_x: i64,
    #[serde(default = "default_mode")]
    pub mode: GridMode,
}

fn default_mode() -> GridMode {
    GridMode::PeriodicSpectral
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationBlock {
    #[serde(rename = "N")]
    pub max_order: i64,
    #[serde(rename = "K")]
    pub basis: i64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WeightsBlock {
    /// `(p, q)` pairs.
    #[serde(default)]
    pub pairs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputsBlock {
    /// Output directory, overridden by `--out`.
    pub dir: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Spatial norms to record: `L2`, `H1`, `H-1`.
    #[serde(default = "default_norms")]
    pub norms: Vec<String>,
    /// Record every n-th step (the final time is always recorded).
    pub record_every: Option<usize>,
}

impl Default for OutputsBlock {
    fn default() -> Self {
        Self {
            dir: None,
            formats: default_formats(),
            norms: default_norms(),
            record_every: None,
        }
    }
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

fn default_norms() -> Vec<String> {
    vec!["L2".into()]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    #[serde(rename = "M")]
    pub paths: u64,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct StransformBlock {
    /// Coefficients `h_1..h_K` of `h` in the cosine basis.
    pub coeffs: Option<Vec<f64>>,
    /// Closed form `h(t)` projected onto the first `K` basis functions.
    pub expression: Option<String>,
}

/// Everything needed to run the solver, validated.
pub struct Prepared {
    pub propagator: PropagatorConfig,
    pub norms: Vec<SpatialNorm>,
    pub weights: Vec<WeightPair>,
    pub v: SpatialField,
    pub f: Forcing,
    pub g: Forcing,
    /// The unmodified example equation, for which the growth oracle applies.
    pub is_paper_example: bool,
    pub mc: Option<McConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path.extension().and_then(|e| e.to_str()) == Some("toml");
        Self::parse(&text, is_toml)
    }

    pub fn parse(text: &str, is_toml: bool) -> Result<Self, ConfigError> {
        if is_toml {
            toml::from_str(text).map_err(|e| ConfigError::new("", format!("invalid config: {}", e.message())))
        } else {
            serde_json::from_str(text).map_err(|e| ConfigError::new("", format!("invalid config: {e}")))
        }
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn grid(&self) -> Result<SpatialGrid, ConfigError> {
        let g = &self.grid;
        if !(g.half_width.is_finite() && g.half_width > 0.0) {
            return Err(ConfigError::new("grid.L", "must be positive"));
        }
        if !(4..=1 << 20).contains(&g.n_x) {
            return Err(ConfigError::new("grid.n_x", format!("must lie in [4, 2^20], got {}", g.n_x)));
        }
        SpatialGrid::new(g.half_width, g.n_x as usize, g.mode).map_err(|e| ConfigError::new("grid", e.to_string()))
    }

    pub fn interval(&self) -> Result<TimeInterval, ConfigError> {
        let t = &self.time;
        if !(t.horizon.is_finite() && t.horizon > 0.0) {
            return Err(ConfigError::new("time.T", "must be positive"));
        }
        if !(t.dt.is_finite() && t.dt > 0.0 && t.dt <= t.horizon) {
            return Err(ConfigError::new("time.dt", "must lie in (0, T]"));
        }
        if t.horizon / t.dt > 1e7 {
            return Err(ConfigError::new("time.dt", "more than 1e7 steps"));
        }
        TimeInterval::with_step(t.horizon, t.dt).map_err(|e| ConfigError::new("time.dt", e.to_string()))
    }

    pub fn truncation(&self) -> Result<(u32, u32), ConfigError> {
        let tr = &self.truncation;
        if !(0..=30).contains(&tr.max_order) {
            return Err(ConfigError::new("truncation.N", format!("must lie in [0, 30], got {}", tr.max_order)));
        }
        if !(1..=256).contains(&tr.basis) {
            return Err(ConfigError::new("truncation.K", format!("must lie in [1, 256], got {}", tr.basis)));
        }
        let (n, k) = (tr.max_order as u32, tr.basis as u32);
        if binomial((n + k) as u64, n as u64) > MAX_INDICES {
            return Err(ConfigError::new("truncation", "index set larger than 2e7 coefficients"));
        }
        Ok((n, k))
    }

    fn coefficients(&self) -> Result<(CoefficientSet, bool), ConfigError> {
        let eq = &self.equation;
        let mut set = match eq.preset.as_deref() {
            None | Some("paper-example") => CoefficientSet::heat_example(),
            Some("variable-coefficient") => CoefficientSet::variable_example(),
            Some(other) => {
                return Err(ConfigError::new(
                    "equation.preset",
                    format!("unknown preset '{other}' (expected paper-example or variable-coefficient)"),
                ))
            }
        };
        if eq.preset.is_none() && eq.a.is_none() {
            return Err(ConfigError::new("equation", "give a preset or at least the coefficient a"));
        }
        let slots: [(&str, &Option<String>, &mut _); 6] = [
            ("equation.a", &eq.a, &mut set.a),
            ("equation.b", &eq.b, &mut set.b),
            ("equation.c", &eq.c, &mut set.c),
            ("equation.rho", &eq.rho, &mut set.rho),
            ("equation.sigma", &eq.sigma, &mut set.sigma),
            ("equation.nu", &eq.nu, &mut set.nu),
        ];
        let mut overridden = false;
        for (key, src, slot) in slots {
            if let Some(src) = src {
                *slot = parse_expr(key, src)?.into_fn();
                overridden = true;
            }
        }
        if eq.preset.is_none() {
            // Without a preset unspecified coefficients vanish.
            let zero = wiener_chaos::parabolic1d::constant_fn(0.0);
            for (src, slot) in [
                (&eq.b, &mut set.b),
                (&eq.c, &mut set.c),
                (&eq.rho, &mut set.rho),
                (&eq.sigma, &mut set.sigma),
                (&eq.nu, &mut set.nu),
            ] {
                if src.is_none() {
                    *slot = zero.clone();
                }
            }
        }
        if let Some(delta) = eq.ellipticity {
            if !(delta > 0.0) {
                return Err(ConfigError::new("equation.ellipticity", "must be positive"));
            }
            set.ellipticity = Some(delta);
        }
        let paper = matches!(eq.preset.as_deref(), Some("paper-example")) && !overridden;
        Ok((set, paper))
    }

    fn datum(&self, grid: &SpatialGrid) -> Result<(SpatialField, bool), ConfigError> {
        match self.equation.v.as_deref() {
            None | Some("gaussian") => Ok((grid.sample(|x| (-x * x / 2.0).exp()), true)),
            Some("zero") => Ok((grid.zeros(), false)),
            Some(src) => {
                let e = parse_expr("equation.v", src)?;
                let v = grid.sample(|x| e.eval(0.0, x));
                if v.values().iter().any(|y| !y.is_finite()) {
                    return Err(ConfigError::new("equation.v", "not finite on the grid"));
                }
                Ok((v, false))
            }
        }
    }

    fn forcing(key: &str, src: &Option<String>) -> Result<Forcing, ConfigError> {
        match src.as_deref() {
            None | Some("zero") => Ok(Forcing::Zero),
            Some(src) => {
                let e = parse_expr(key, src)?;
                if e.constant() == Some(0.0) {
                    return Ok(Forcing::Zero);
                }
                Ok(Forcing::function(move |t, x| e.eval(t, x)))
            }
        }
    }

    pub fn norms(&self) -> Result<Vec<SpatialNorm>, ConfigError> {
        if self.outputs.norms.is_empty() {
            return Err(ConfigError::new("outputs.norms", "at least one norm is required"));
        }
        self.outputs
            .norms
            .iter()
            .map(|s| s.parse().map_err(|e: wiener_chaos::Error| ConfigError::new("outputs.norms", e.to_string())))
            .collect()
    }

    pub fn weights(&self) -> Result<Vec<WeightPair>, ConfigError> {
        self.weights
            .pairs
            .iter()
            .map(|&(p, q)| WeightPair::new(p, q).map_err(|e| ConfigError::new("weights.pairs", e.to_string())))
            .collect()
    }

    pub fn h_function(&self, basis: u32, interval: &TimeInterval, flag: Option<&str>) -> Result<HFunction, ConfigError> {
        if let Some(list) = flag {
            let coeffs = list
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError::new("--h", "expected comma-separated numbers"))?;
            return Self::checked_h(coeffs, basis, "--h");
        }
        let block = self
            .stransform
            .as_ref()
            .ok_or_else(|| ConfigError::new("stransform", "missing (or pass --h)"))?;
        match (&block.coeffs, &block.expression) {
            (Some(c), None) => Self::checked_h(c.clone(), basis, "stransform.coeffs"),
            (None, Some(src)) => {
                let e = parse_expr("stransform.expression", src)?;
                Ok(wiener_chaos::cm_basis::project(|t| e.eval(t, 0.0), basis, interval))
            }
            _ => Err(ConfigError::new("stransform", "give exactly one of coeffs, expression")),
        }
    }

    fn checked_h(coeffs: Vec<f64>, basis: u32, key: &str) -> Result<HFunction, ConfigError> {
        if coeffs.len() > basis as usize {
            return Err(ConfigError::new(key, format!("{} coefficients but K = {basis}", coeffs.len())));
        }
        HFunction::new(coeffs).map_err(|e| ConfigError::new(key, e.to_string()))
    }

    /// Validates everything and builds the solver configuration.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        let grid = self.grid()?;
        let interval = self.interval()?;
        let (max_order, basis) = self.truncation()?;
        let (coeffs, paper_coeffs) = self.coefficients()?;
        coeffs
            .regularity(&grid, &interval)
            .map_err(|e| ConfigError::new("equation", e.to_string()))?;
        let (v, gaussian) = self.datum(&grid)?;
        let f = Self::forcing("equation.f", &self.equation.f)?;
        let g = Self::forcing("equation.g", &self.equation.g)?;
        let norms = self.norms()?;
        let weights = self.weights()?;
        let mc = match &self.mc {
            Some(m) => Some(McConfig::new(m.paths, m.steps, m.seed).map_err(|e| ConfigError::new("mc", e.to_string()))?),
            None => None,
        };
        if mc.is_some() && !(paper_coeffs && gaussian) {
            return Err(ConfigError::new("mc", "the Monte Carlo check applies to the paper-example equation only"));
        }
        if self.outputs.formats.is_empty() {
            return Err(ConfigError::new("outputs.formats", "at least one format is required"));
        }
        if self.outputs.record_every == Some(0) {
            return Err(ConfigError::new("outputs.record_every", "must be positive"));
        }
        let mut propagator = PropagatorConfig::new(
            max_order,
            basis,
            grid,
            interval,
            coeffs,
            ChaosData::deterministic(v.clone(), f.clone(), g.clone()),
        );
        propagator.options.norms = norms.clone();
        propagator.options.recording = match self.outputs.record_every {
            Some(n) => wiener_chaos::parabolic1d::Recording::Every(n),
            None => wiener_chaos::parabolic1d::Recording::Final,
        };
        Ok(Prepared {
            propagator,
            norms,
            weights,
            v,
            f,
            g,
            is_paper_example: paper_coeffs && gaussian && self.equation.f.is_none() && self.equation.g.is_none(),
            mc,
        })
    }

    /// `# config_sha256=... N=.. K=.. L=.. n_x=.. mode=.. T=.. dt=..`
    pub fn header_line(&self) -> String {
        format!(
            "# config_sha256={} N={} K={} L={} n_x={} mode={} T={} dt={}",
            self.hash(),
            self.truncation.max_order,
            self.truncation.basis,
            self.grid.half_width,
            self.grid.n_x,
            match self.grid.mode {
                GridMode::PeriodicSpectral => "periodic-spectral",
                GridMode::BoundedFiniteDifference => "bounded-finite-difference",
            },
            self.time.horizon,
            self.time.dt
        )
    }
}

fn parse_expr(key: &str, src: &str) -> Result<Expr, ConfigError> {
    Expr::parse(src).map_err(|e| ConfigError::new(key, format!("bad expression '{src}': {e}")))
}

/// Built-in configurations.
pub fn preset_config(name: &str) -> Option<RunConfig> {
    let equation = EquationBlock {
        preset: Some(name.to_string()),
        ..Default::default()
    };
    match name {
        "paper-example" => Some(RunConfig {
            equation,
            grid: GridBlock {
                half_width: 20.0,
                n_x: 1024,
                mode: GridMode::PeriodicSpectral,
            },
            time: TimeBlock { horizon: 1.0, dt: 1e-3 },
            truncation: TruncationBlock { max_order: 6, basis: 16 },
            weights: WeightsBlock {
                pairs: vec![(0.0, 0.0)],
            },
            outputs: OutputsBlock::default(),
            mc: None,
            stransform: Some(StransformBlock {
                coeffs: Some(vec![0.3]),
                expression: None,
            }),
        }),
        "variable-coefficient" => Some(RunConfig {
            equation,
            grid: GridBlock {
                half_width: 6.0 * std::f64::consts::PI,
                n_x: 256,
                mode: GridMode::PeriodicSpectral,
            },
            time: TimeBlock { horizon: 1.0, dt: 1e-2 },
            truncation: TruncationBlock { max_order: 8, basis: 4 },
            weights: WeightsBlock {
                pairs: vec![(-2.0, -2.0), (-4.0, -2.0)],
            },
            outputs: OutputsBlock {
                norms: vec!["H1".into()],
                record_every: Some(1),
                ..Default::default()
            },
            mc: None,
            stransform: None,
        }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "equation": {"preset": "paper-example"},
        "grid": {"L": 10, "n_x": 64},
        "time": {"T": 0.5, "dt": 0.01},
        "truncation": {"N": 2, "K": 2}
    }"#;

    #[test]
    fn minimal_json_parses_and_prepares() {
        let cfg = RunConfig::parse(MINIMAL, false).unwrap();
        let p = cfg.prepare().unwrap();
        assert!(p.is_paper_example);
        assert_eq!(p.norms, vec![SpatialNorm::L2]);
    }

    #[test]
    fn toml_and_json_agree() {
        let toml_src = r#"
            [equation]
            preset = "paper-example"
            [grid]
            L = 10
            n_x = 64
            [time]
            T = 0.5
            dt = 0.01
            [truncation]
            N = 2
            K = 2
        "#;
        let a = RunConfig::parse(MINIMAL, false).unwrap();
        let b = RunConfig::parse(toml_src, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"n_x\": 64", "\"n_x\": 64, \"nx\": 3");
        let err = RunConfig::parse(&bad, false).unwrap_err();
        assert!(err.message.contains("nx"), "{err}");
    }

    #[test]
    fn invalid_values_name_the_key() {
        let cfg = RunConfig::parse(&MINIMAL.replace("\"n_x\": 64", "\"n_x\": -8"), false).unwrap();
        assert_eq!(cfg.prepare().err().unwrap().key, "grid.n_x");
        let cfg = RunConfig::parse(&MINIMAL.replace("paper-example", "nope"), false).unwrap();
        assert_eq!(cfg.prepare().err().unwrap().key, "equation.preset");
        let cfg = RunConfig::parse(&MINIMAL.replace("\"dt\": 0.01", "\"dt\": 0"), false).unwrap();
        assert_eq!(cfg.prepare().err().unwrap().key, "time.dt");
    }

    #[test]
    fn expressions_override_presets() {
        let src = MINIMAL.replace(r#""preset": "paper-example""#, r#""preset": "paper-example", "rho": "0""#);
        let p = RunConfig::parse(&src, false).unwrap().prepare().unwrap();
        assert!(!p.is_paper_example);
        let bad = MINIMAL.replace(r#""preset": "paper-example""#, r#""a": "1 + y""#);
        let err = RunConfig::parse(&bad, false).unwrap().prepare().err().unwrap();
        assert_eq!(err.key, "equation.a");
    }

    #[test]
    fn presets_validate() {
        for name in ["paper-example", "variable-coefficient"] {
            preset_config(name).unwrap().prepare().unwrap();
        }
        assert!(preset_config("other").is_none());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::parse(MINIMAL, false).unwrap();
        let b = RunConfig::parse(&MINIMAL.replace("0.01", "0.02"), false).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}

//! Run configuration: a flat TOML table validated into [`Settings`].
//!
//! Every key is optional in the file; `preset = "myerscough"` supplies the
//! limb-bud defaults and explicit keys override it. Unknown keys are
//! rejected. Function-valued keys take the forms `constant(v)`,
//! `inverse(k)` (k/c), `quadratic(k)` (k(1-c)²) and `table(path.csv)`;
//! initial fields take `constant(v)` or `myerscough`. Relative paths are
//! resolved against the config file's directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::{PhysicalParams, SimulationGrid};
use crate::inversion::LmConfig;
use crate::pde::{SolverOptions, Transport};
use crate::presets;
use crate::regselect::SweepMode;
use crate::sensitivity::{AnalyticSensitivity, Sensitivity, SensitivityFunction};

/// The file as written. Field names are the config keys.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,

    #[serde(rename = "M")]
    pub m: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub b: Option<f64>,
    pub h: Option<f64>,
    pub mu: Option<f64>,

    pub x_left: Option<f64>,
    pub x_right: Option<f64>,
    pub n_nodes: Option<usize>,
    pub t_final: Option<f64>,
    pub n_steps: Option<usize>,
    pub fine_n_nodes: Option<usize>,
    pub fine_n_steps: Option<usize>,

    pub substeps: Option<usize>,
    pub fine_substeps: Option<usize>,
    pub max_substeps: Option<usize>,
    pub cfl: Option<f64>,
    pub transport: Option<String>,

    pub u0: Option<String>,
    pub c0: Option<String>,
    pub truth: Option<String>,

    pub data: Option<PathBuf>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,

    pub n_basis: Option<usize>,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub padding: Option<f64>,
    pub a_star: Option<String>,
    pub a0: Option<String>,
    pub alpha: Option<f64>,

    pub lambda0: Option<f64>,
    pub lambda_up: Option<f64>,
    pub lambda_down: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol_cost: Option<f64>,
    pub tol_grad: Option<f64>,
    pub fd_step: Option<f64>,

    pub alphas: Option<Vec<f64>>,
    pub sweep: Option<String>,

    pub deltas: Option<Vec<f64>>,
    pub coupling: Option<f64>,
    pub seeds: Option<Vec<u64>>,
}

/// A named sensitivity, used for the truth, the prior and the initial guess.
#[derive(Debug, Clone, PartialEq)]
pub enum TruthSpec {
    Constant(f64),
    Inverse(f64),
    Quadratic(f64),
    Table(PathBuf),
}

/// Split `name(arg)` into its parts.
fn call_form(s: &str) -> Option<(&str, &str)> {
    let s = s.trim();
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    Some((s[..open].trim(), inner.trim()))
}

fn number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Config(format!("{what}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{what}: '{s}' is not finite")));
    }
    Ok(v)
}

impl FromStr for TruthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) =
            call_form(s).ok_or_else(|| Error::Config(format!("expected name(argument), got '{s}'")))?;
        match name {
            "constant" => Ok(Self::Constant(number(arg, s)?)),
            "inverse" => Ok(Self::Inverse(number(arg, s)?)),
            "quadratic" => Ok(Self::Quadratic(number(arg, s)?)),
            "table" if !arg.is_empty() => Ok(Self::Table(PathBuf::from(arg))),
            _ => Err(Error::Config(format!("unknown sensitivity '{s}' (constant, inverse, quadratic, table)"))),
        }
    }
}

/// Evaluable form of a [`TruthSpec`].
#[derive(Debug, Clone)]
pub enum Truth {
    Analytic(AnalyticSensitivity),
    Table(SensitivityFunction),
}

impl Sensitivity for Truth {
    fn value(&self, c: f64) -> f64 {
        match self {
            Truth::Analytic(a) => a.value(c),
            Truth::Table(t) => t.value(c),
        }
    }
}

impl TruthSpec {
    fn with_base(self, base: &Path) -> Self {
        match self {
            TruthSpec::Table(p) if p.is_relative() => TruthSpec::Table(base.join(p)),
            other => other,
        }
    }

    pub fn build(&self) -> Result<Truth> {
        Ok(match self {
            TruthSpec::Constant(v) => Truth::Analytic(AnalyticSensitivity::Constant(*v)),
            TruthSpec::Inverse(k) => Truth::Analytic(AnalyticSensitivity::Inverse(*k)),
            TruthSpec::Quadratic(k) => Truth::Analytic(AnalyticSensitivity::Quadratic(*k)),
            TruthSpec::Table(p) => Truth::Table(SensitivityFunction::read_csv(p)?),
        })
    }

    /// Check that `inverse` is positive on `[lo, hi]`, where it is used.
    pub fn check_on(&self, lo: f64, hi: f64) -> Result<()> {
        if let TruthSpec::Inverse(k) = self {
            if !(lo > 0.0) || !(*k > 0.0) {
                return Err(Error::Config(format!("inverse({k}) is not positive on [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Sample onto `n` uniform knots of `[lo, hi]`.
    pub fn on_basis(&self, lo: f64, hi: f64, n: usize) -> Result<SensitivityFunction> {
        self.check_on(lo, hi)?;
        SensitivityFunction::from_fn(lo, hi, n, self.build()?)
    }
}

/// Initial field specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    Constant(f64),
    /// `1 + exp(-55 (x - 0.5)²)`
    Myerscough,
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "myerscough" {
            return Ok(Self::Myerscough);
        }
        match call_form(s) {
            Some(("constant", arg)) => Ok(Self::Constant(number(arg, s)?)),
            _ => Err(Error::Config(format!("unknown initial field '{s}' (constant(v), myerscough)"))),
        }
    }
}

impl FieldSpec {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            FieldSpec::Constant(v) => *v,
            FieldSpec::Myerscough => presets::myerscough_u0(x),
        }
    }

    pub fn sample(&self, grid: &SimulationGrid) -> Vec<f64> {
        grid.sample(|x| self.value(x))
    }
}

/// Basis for the unknown. The interval defaults to the data's
/// concentration range widened by `padding`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    pub n_basis: usize,
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub padding: f64,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct Settings {
    pub params: PhysicalParams,
    /// Measurement and inversion mesh; also the mesh of `forward`.
    pub grid: SimulationGrid,
    /// Mesh on which synthetic truth is generated.
    pub fine: SimulationGrid,
    pub solver: SolverOptions,
    pub fine_solver: SolverOptions,
    pub u0: FieldSpec,
    pub c0: FieldSpec,
    pub truth: Option<TruthSpec>,
    pub data: Option<PathBuf>,
    pub delta: f64,
    pub seed: u64,
    pub basis: BasisSpec,
    pub a_star: TruthSpec,
    pub a0: Option<TruthSpec>,
    pub alpha: f64,
    pub lm: LmConfig,
    pub alphas: Vec<f64>,
    pub sweep: SweepMode,
    pub deltas: Vec<f64>,
    pub coupling: f64,
    pub seeds: Vec<u64>,
}

impl Settings {
    /// The truth sensitivity, which commands that synthesize data need.
    pub fn require_truth(&self) -> Result<&TruthSpec> {
        self.truth.as_ref().ok_or_else(|| Error::Config("missing key 'truth'".into()))
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing key '{key}' (or use preset = \"myerscough\")")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        toml::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Fill unset keys from the named preset.
    pub fn apply_preset(mut self) -> Result<Self> {
        let Some(name) = self.preset.clone() else { return Ok(self) };
        if name != "myerscough" {
            return Err(Error::Config(format!("unknown preset '{name}' (known: myerscough)")));
        }
        let p = PhysicalParams::myerscough();
        let fill = |slot: &mut Option<f64>, v: f64| {
            slot.get_or_insert(v);
        };
        fill(&mut self.m, p.m);
        fill(&mut self.d, p.d);
        fill(&mut self.b, p.b);
        fill(&mut self.h, p.h);
        fill(&mut self.mu, p.mu);
        fill(&mut self.x_left, 0.0);
        fill(&mut self.x_right, 1.0);
        fill(&mut self.t_final, presets::MYERSCOUGH_T_FINAL);
        self.n_nodes.get_or_insert(51);
        self.n_steps.get_or_insert(250);
        self.fine_n_nodes.get_or_insert(201);
        self.fine_n_steps.get_or_insert(2000);
        self.substeps.get_or_insert(presets::INVERSION_SUBSTEPS);
        self.fine_substeps.get_or_insert(presets::TRUTH_SUBSTEPS);
        self.u0.get_or_insert_with(|| "myerscough".into());
        self.c0.get_or_insert_with(|| format!("constant({})", presets::MYERSCOUGH_C0));
        self.truth.get_or_insert_with(|| "constant(2)".into());
        Ok(self)
    }

    /// Validate every key and build [`Settings`]. `base` resolves relative
    /// paths.
    pub fn resolve(self, base: &Path) -> Result<Settings> {
        let cfg = self.apply_preset()?;
        let params = PhysicalParams::new(
            required(cfg.m, "M")?,
            required(cfg.d, "D")?,
            required(cfg.b, "b")?,
            required(cfg.h, "h")?,
            required(cfg.mu, "mu")?,
        )?;
        let (xl, xr) = (cfg.x_left.unwrap_or(0.0), cfg.x_right.unwrap_or(1.0));
        let n_nodes = required(cfg.n_nodes, "n_nodes")?;
        let n_steps = required(cfg.n_steps, "n_steps")?;
        let t_final = required(cfg.t_final, "t_final")?;
        let grid = SimulationGrid::new(xl, xr, n_nodes, t_final, n_steps)?;
        let fine = SimulationGrid::new(
            xl,
            xr,
            cfg.fine_n_nodes.unwrap_or(4 * (n_nodes - 1) + 1),
            t_final,
            cfg.fine_n_steps.unwrap_or(8 * n_steps),
        )?;

        let transport = match cfg.transport.as_deref() {
            None | Some("implicit-hybrid") => Transport::ImplicitHybrid,
            Some("explicit-upwind") => Transport::ExplicitUpwind,
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown transport '{other}' (implicit-hybrid, explicit-upwind)"
                )))
            }
        };
        let base_opts = SolverOptions::default();
        let cfl = cfg.cfl.unwrap_or(base_opts.cfl);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        let max_substeps = cfg.max_substeps.unwrap_or(base_opts.max_substeps);
        let opts = |key: &str, n: Option<usize>| -> Result<SolverOptions> {
            let n = n.unwrap_or(1);
            if n == 0 || n > max_substeps {
                return Err(Error::Config(format!("{key} must lie in 1..={max_substeps}, got {n}")));
            }
            Ok(SolverOptions { transport, cfl, min_substeps: n, max_substeps })
        };
        let solver = opts("substeps", cfg.substeps)?;
        let fine_solver = opts("fine_substeps", cfg.fine_substeps)?;

        let u0: FieldSpec = required(cfg.u0, "u0")?.parse()?;
        let c0: FieldSpec = required(cfg.c0, "c0")?.parse()?;
        if let FieldSpec::Constant(v) = u0 {
            if v < 0.0 {
                return Err(Error::Config(format!("u0 must be >= 0, got {v}")));
            }
        }
        if let FieldSpec::Constant(v) = c0 {
            if !(v > 0.0) {
                return Err(Error::Config(format!("c0 must be > 0, got {v}")));
            }
        }

        let parse_fn = |s: Option<String>| -> Result<Option<TruthSpec>> {
            s.map(|s| s.parse::<TruthSpec>().map(|t| t.with_base(base))).transpose()
        };
        let truth = parse_fn(cfg.truth)?;
        let a_star = parse_fn(cfg.a_star)?.unwrap_or(TruthSpec::Constant(1.0));
        let a0 = parse_fn(cfg.a0)?;

        let delta = cfg.delta.unwrap_or(0.0);
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be >= 0, got {delta}")));
        }
        let basis = BasisSpec {
            n_basis: cfg.n_basis.unwrap_or(16),
            c_min: cfg.c_min,
            c_max: cfg.c_max,
            padding: cfg.padding.unwrap_or(0.1),
        };
        if basis.n_basis < 2 {
            return Err(Error::Config(format!("n_basis must be >= 2, got {}", basis.n_basis)));
        }
        match (basis.c_min, basis.c_max) {
            (Some(lo), Some(hi)) if !(lo < hi) => {
                return Err(Error::Config(format!("c_min must be below c_max ({lo} >= {hi})")))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(Error::Config("set both c_min and c_max, or neither".into()))
            }
            _ => {}
        }
        if !(basis.padding >= 0.0) {
            return Err(Error::Config(format!("padding must be >= 0, got {}", basis.padding)));
        }
        let alpha = cfg.alpha.unwrap_or(0.0);
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {alpha}")));
        }

        let d = LmConfig::default();
        let lm = LmConfig {
            lambda0: cfg.lambda0.unwrap_or(d.lambda0),
            lambda_up: cfg.lambda_up.unwrap_or(d.lambda_up),
            lambda_down: cfg.lambda_down.unwrap_or(d.lambda_down),
            max_iters: cfg.max_iters.unwrap_or(d.max_iters),
            tol_cost: cfg.tol_cost.unwrap_or(d.tol_cost),
            tol_grad: cfg.tol_grad.unwrap_or(d.tol_grad),
            fd_step: cfg.fd_step.unwrap_or(d.fd_step),
        };
        lm.validate().map_err(|e| Error::Config(e.to_string()))?;

        let sweep = match cfg.sweep.as_deref() {
            None | Some("warm") => SweepMode::WarmStart,
            Some("cold") => SweepMode::ColdParallel,
            Some(other) => return Err(Error::Config(format!("unknown sweep mode '{other}' (warm, cold)"))),
        };
        let alphas = cfg.alphas.unwrap_or_else(|| (0..=7).map(|k| 10f64.powi(k - 8)).collect());
        let deltas = cfg.deltas.unwrap_or_else(|| vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1]);
        let coupling = cfg.coupling.unwrap_or(1.0);
        let seeds = cfg.seeds.unwrap_or_else(|| vec![0, 1, 2]);

        Ok(Settings {
            params,
            grid,
            fine,
            solver,
            fine_solver,
            u0,
            c0,
            truth,
            data: cfg.data.map(|p| if p.is_relative() { base.join(p) } else { p }),
            delta,
            seed: cfg.seed.unwrap_or(0),
            basis,
            a_star,
            a0,
            alpha,
            lm,
            alphas,
            sweep,
            deltas,
            coupling,
            seeds,
        })
    }
}

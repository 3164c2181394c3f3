//! Experiment configs, the `run` driver that turns a config into CSV/JSON
//! artifacts plus a manifest, and the plain-text `report` over a manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{LimitParams, MIN_LAMBDA};
use crate::error::{param, LabError, Result};
use crate::evolution::{
    block_semigroup, decay_rate, default_decay_times, dirichlet_rate, discretize, evolve, longtime_blocks, DecayFit,
    GeneratorKind, Scheme,
};
use crate::grid::{Grid, GridFunction};
use crate::kernel::{KernelSpec, KillingKernel, ScaledKernel};
use crate::montecarlo::{
    compare_mechanisms, estimate_survival, exit_local_time_law, ks_band, ExitLawReport, LocalTimeEstimator,
    MechanismTable, SimConfig, SurvivalEstimate, Z99,
};
use crate::picard::{solve_pair, DEFAULT_TOL};
use crate::resolvent::{lambda_to_zero_limit, resolvent_eps, resolvent_limit};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Exit status of `labcli run`.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Largest allowed `max_step_ratio - contraction_bound` in a fixed-point run.
const CONTRACTION_SLACK: f64 = 1e-6;
const MAX_WRONSKIAN_SPREAD: f64 = 1e-4;
const RECONSTRUCTION_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Picard diagnostics over the ε × λ panel.
    Fixedpoint,
    /// `‖R(λ, A_ε) g - R(λ, A) g‖∞` along the ε panel.
    Convergence,
    /// `‖λR(λ, A) g - P g‖∞` along a decreasing λ panel.
    LambdaLimit,
    /// `‖e^{tA_ε} g - e^{tA} g‖∞` along the ε panel at the last time.
    Semigroup,
    /// Exponential rate of `e^{tA} g → P g`.
    Decay,
    /// Odd/even block evolution against the direct one.
    Blocks,
    /// Law of `L₀(τ)` under `P₀`.
    ExitLaw,
    /// `E_x exp(-γ L₀(τ))` by Monte Carlo.
    Survival,
    /// Intensity killing against local-time killing.
    Mechanisms,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fixedpoint => "fixedpoint",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::LambdaLimit => "lambda_limit",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::Decay => "decay",
            ExperimentKind::Blocks => "blocks",
            ExperimentKind::ExitLaw => "exit_law",
            ExperimentKind::Survival => "survival",
            ExperimentKind::Mechanisms => "mechanisms",
        }
    }

    fn csv_artifact(self) -> bool {
        matches!(
            self,
            ExperimentKind::Fixedpoint
                | ExperimentKind::Convergence
                | ExperimentKind::LambdaLimit
                | ExperimentKind::Semigroup
        )
    }

    fn artifact(self) -> String {
        let ext = if self.csv_artifact() { "csv" } else { "json" };
        format!("{}.{ext}", self.name())
    }
}

/// Test functions used as data `g` or initial values `f0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSpec {
    One,
    Cos,
    Sin,
    /// `x ↦ x`
    X,
    /// `(x - a)(b - x)`
    Bump,
    /// `sin(π(x - a)/(b - a))`
    Mode,
    Const(f64),
}

impl FunctionSpec {
    pub fn eval(self, x: f64, a: f64, b: f64) -> f64 {
        match self {
            FunctionSpec::One => 1.0,
            FunctionSpec::Cos => x.cos(),
            FunctionSpec::Sin => x.sin(),
            FunctionSpec::X => x,
            FunctionSpec::Bump => (x - a) * (b - x),
            FunctionSpec::Mode => (std::f64::consts::PI * (x - a) / (b - a)).sin(),
            FunctionSpec::Const(c) => c,
        }
    }

    pub fn sample(self, grid: &Grid) -> GridFunction {
        let (a, b) = (grid.a(), grid.b());
        GridFunction::from_fn(grid, |x| self.eval(x, a, b))
    }
}

impl FromStr for FunctionSpec {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "one" => FunctionSpec::One,
            "cos" => FunctionSpec::Cos,
            "sin" => FunctionSpec::Sin,
            "x" => FunctionSpec::X,
            "bump" => FunctionSpec::Bump,
            "mode" => FunctionSpec::Mode,
            _ => match s.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => FunctionSpec::Const(c),
                _ => {
                    return Err(param(
                        "g",
                        format!("unknown function `{s}`; expected one, cos, sin, x, bump, mode or const:<value>"),
                    ))
                }
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_mc_dt")]
    pub dt: f64,
    /// Starting points; the mechanism comparison uses the first.
    #[serde(default = "default_x0")]
    pub x0: Vec<f64>,
    /// Horizon of the mechanism comparison.
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_estimator")]
    pub estimator: LocalTimeEstimator,
    #[serde(default = "default_true")]
    pub bridge_correction: bool,
    /// Also write the raw samples of the exit-law experiment.
    #[serde(default)]
    pub dump_samples: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            dt: default_mc_dt(),
            x0: default_x0(),
            t: default_t(),
            estimator: default_estimator(),
            bridge_correction: true,
            dump_samples: false,
        }
    }
}

fn default_paths() -> usize {
    10_000
}
fn default_mc_dt() -> f64 {
    1e-4
}
fn default_x0() -> Vec<f64> {
    vec![0.0]
}
fn default_t() -> f64 {
    1.0
}
fn default_estimator() -> LocalTimeEstimator {
    LocalTimeEstimator::Bridge
}
fn default_true() -> bool {
    true
}
fn default_kernel() -> KernelSpec {
    KernelSpec::unit_box()
}
fn default_h() -> f64 {
    1e-3
}
fn default_dt() -> f64 {
    1e-3
}
fn default_g() -> FunctionSpec {
    FunctionSpec::Cos
}
fn default_scheme() -> Scheme {
    Scheme::CrankNicolson
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub a: f64,
    pub b: f64,
    /// Profile of `c`; it is rescaled to mass `gamma`.
    #[serde(default = "default_kernel")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Data `g` of the resolvent experiments, initial value of the evolutions.
    #[serde(default = "default_g")]
    pub g: FunctionSpec,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(name, format!("must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| LabError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.a, self.b, self.h)
    }

    pub fn limit_params(&self) -> Result<LimitParams> {
        LimitParams::new(self.a, self.b, self.gamma)
    }

    /// The kernel profile rescaled to mass `gamma`.
    pub fn killing_kernel(&self) -> Result<KillingKernel> {
        KillingKernel::new(self.kernel.clone().with_mass(self.gamma)?)
    }

    fn sim_config(&self, x0: f64) -> SimConfig {
        SimConfig {
            estimator: self.mc.estimator,
            bridge_correction: self.mc.bridge_correction,
            ..SimConfig::new(x0, self.a, self.b, self.mc.dt, self.gamma, self.mc.paths, self.seed)
        }
    }

    /// Checks every precondition of the modules the experiment will call.
    pub fn validate(&self) -> Result<()> {
        if !(self.a < 0.0 && self.a.is_finite()) {
            return Err(param("a", format!("must be negative, got {}", self.a)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(param("b", format!("must be positive, got {}", self.b)));
        }
        positive("h", self.h)?;
        positive("dt", self.dt)?;
        let grid = self.grid().map_err(|e| param("h", e.to_string()))?;
        let p = self.limit_params()?;
        let kernel = self.killing_kernel()?;
        for &l in &self.lambdas {
            if !(l >= MIN_LAMBDA && l.is_finite()) {
                return Err(param(
                    "lambdas",
                    format!("entries must be at least {MIN_LAMBDA}, got {l}"),
                ));
            }
        }
        for &t in &self.times {
            positive("times", t)?;
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(param("times", "must be strictly increasing"));
        }
        let shared = Arc::new(kernel.clone());
        for &eps in &self.epsilons {
            ScaledKernel::new(shared.clone(), eps)
                .map_err(|e| param("epsilons", e.to_string()))?
                .check_resolution(self.h)
                .map_err(|e| param("h", e.to_string()))?;
        }
        let need = |ok: bool, name: &'static str, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(param(name, format!("{} needs {what}", self.experiment.name())))
            }
        };
        match self.experiment {
            ExperimentKind::Fixedpoint => {
                need(!self.epsilons.is_empty(), "epsilons", "at least one ε")?;
                need(!self.lambdas.is_empty(), "lambdas", "at least one λ")?;
            }
            ExperimentKind::Convergence => {
                need(self.epsilons.len() >= 2, "epsilons", "at least two ε")?;
                need(!self.lambdas.is_empty(), "lambdas", "a λ")?;
            }
            ExperimentKind::LambdaLimit => {
                need(self.lambdas.len() >= 2, "lambdas", "at least two λ")?;
                need(
                    self.lambdas.windows(2).all(|w| w[1] < w[0]),
                    "lambdas",
                    "a strictly decreasing panel",
                )?;
            }
            ExperimentKind::Semigroup => {
                need(self.epsilons.len() >= 2, "epsilons", "at least two ε")?;
                need(!self.times.is_empty(), "times", "a time")?;
            }
            ExperimentKind::Decay => {
                need(
                    self.times.is_empty() || self.times.len() >= 2,
                    "times",
                    "at least two fit times",
                )?;
            }
            ExperimentKind::Blocks => {
                need(grid.is_symmetric(), "a", "a = -b")?;
                need(!self.times.is_empty(), "times", "a time")?;
            }
            ExperimentKind::ExitLaw => self.sim_config(0.0).validate()?,
            ExperimentKind::Survival => {
                need(!self.mc.x0.is_empty(), "mc.x0", "a starting point")?;
                for &x in &self.mc.x0 {
                    self.sim_config(x).validate()?;
                }
            }
            ExperimentKind::Mechanisms => {
                need(!self.epsilons.is_empty(), "epsilons", "at least one ε")?;
                need(!self.mc.x0.is_empty(), "mc.x0", "a starting point")?;
                positive("mc.t", self.mc.t)?;
                let x = self.mc.x0[0];
                self.sim_config(x).validate()?;
                let node = ((x - p.a) / grid.h()).round();
                if (grid.a() + node * grid.h() - x).abs() > 1e-9 {
                    return Err(param("mc.x0", format!("{x} is not a grid node")));
                }
            }
        }
        Ok(())
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<=` or `>=`, read as `value <relation> threshold`; `<` for ratios.
    pub relation: String,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: "<=".into(),
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: ">=".into(),
            threshold,
            passed: value >= threshold,
        }
    }

    /// Strict decrease, measured by the largest ratio of successive entries.
    fn decreasing(name: impl Into<String>, values: &[f64]) -> Self {
        let ratio = values.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max);
        Check {
            name: name.into(),
            value: ratio,
            relation: "<".into(),
            threshold: 1.0,
            passed: values.len() >= 2 && values.windows(2).all(|w| w[1] < w[0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub threads: usize,
    pub config: ExperimentConfig,
    pub artifacts: Vec<String>,
    /// Seconds spent per phase.
    pub wall_times: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if text.trim().is_empty() {
            return Err(LabError::Config(format!("manifest {} is empty", path.display())));
        }
        let m: Manifest = serde_json::from_str(&text)?;
        if m.artifacts.is_empty() {
            return Err(LabError::Config(format!(
                "manifest {} lists no artifacts",
                path.display()
            )));
        }
        Ok(m)
    }
}

/// Blocks artifact; the other JSON artifacts reuse the library reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocksArtifact {
    pub t: f64,
    pub block_vs_direct: f64,
    pub tolerance: f64,
    pub reconstruction_error: f64,
    pub g1_gap: f64,
    pub g2_gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitLawArtifact {
    #[serde(flatten)]
    pub report: ExitLawReport,
    pub ks_band: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalArtifact {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub estimates: Vec<SurvivalEstimate>,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        w.write_record(&self.header).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    fn render(&self, out: &mut String) {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&self.header, out);
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for r in &self.rows {
            line(r, out);
        }
    }
}

fn csv_error(e: csv::Error) -> LabError {
    LabError::Io(std::io::Error::other(e))
}

fn read_csv_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let mut cols: BTreeMap<String, Vec<f64>> = header.iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        for (h, cell) in header.iter().zip(rec.iter()) {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| LabError::Config(format!("{}: bad number `{cell}` in column {h}", path.display())))?;
            cols.get_mut(h).expect("column").push(v);
        }
    }
    Ok(cols)
}

fn column<'a>(cols: &'a BTreeMap<String, Vec<f64>>, name: &str, path: &Path) -> Result<&'a [f64]> {
    cols.get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| LabError::Config(format!("{} has no column `{name}`", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Computes the experiment and writes its artifacts into `dir`; returns the file names.
fn compute(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<String>> {
    let kind = cfg.experiment;
    let main = dir.join(kind.artifact());
    let grid = cfg.grid()?;
    let g = cfg.g.sample(&grid);
    let p = cfg.limit_params()?;
    let shared = Arc::new(cfg.killing_kernel()?);
    let scaled = |eps: f64| ScaledKernel::new(shared.clone(), eps);
    let mut files = vec![kind.artifact()];
    match kind {
        ExperimentKind::Fixedpoint => {
            let points: Vec<(f64, f64)> = cfg
                .epsilons
                .iter()
                .flat_map(|&e| cfg.lambdas.iter().map(move |&l| (e, l)))
                .collect();
            let pairs = points
                .par_iter()
                .map(|&(e, l)| solve_pair(&grid, &scaled(e)?, l, DEFAULT_TOL))
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&[
                "epsilon",
                "lambda",
                "omega",
                "contraction_bound",
                "max_step_ratio",
                "k_iterations",
                "l_iterations",
                "wronskian",
                "wronskian_spread",
            ]);
            for ((e, l), pair) in points.iter().zip(&pairs) {
                let d = &pair.diagnostics;
                t.push(vec![
                    fmt_float(*e),
                    fmt_float(*l),
                    fmt_float(d.omega),
                    fmt_float(d.contraction_bound),
                    fmt_float(d.max_step_ratio),
                    d.k_iterations.to_string(),
                    d.l_iterations.to_string(),
                    fmt_float(pair.wronskian),
                    fmt_float(d.wronskian_spread),
                ]);
            }
            t.write_csv(&main)?;
        }
        ExperimentKind::Convergence => {
            let lambda = cfg.lambdas[0];
            let limit = resolvent_limit(&g, &p.with_lambda(lambda)?)?;
            let rows = cfg
                .epsilons
                .par_iter()
                .map(|&e| {
                    let r = resolvent_eps(&g, lambda, &scaled(e)?)?;
                    Ok((e, r.f.sup_distance(&limit.f), r.residual_sup))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["epsilon", "sup_error", "residual_sup"]);
            for (e, err, res) in rows {
                t.push(vec![fmt_float(e), fmt_float(err), fmt_float(res)]);
            }
            t.write_csv(&main)?;
        }
        ExperimentKind::LambdaLimit => {
            let r = lambda_to_zero_limit(&g, &p, &cfg.lambdas)?;
            let mut t = Table::new(&["lambda", "sup_error"]);
            for (l, e) in r.lambdas.iter().zip(&r.errors) {
                t.push(vec![fmt_float(*l), fmt_float(*e)]);
            }
            t.write_csv(&main)?;
        }
        ExperimentKind::Semigroup => {
            let t_end = *cfg.times.last().expect("validated");
            let limit = discretize(GeneratorKind::ALimit { gamma: cfg.gamma }, &grid)?;
            let reference = evolve(&limit, &g, t_end, cfg.dt, cfg.scheme)?.last().clone();
            let rows = cfg
                .epsilons
                .par_iter()
                .map(|&e| {
                    let m = discretize(GeneratorKind::AEps(scaled(e)?), &grid)?;
                    Ok((
                        e,
                        evolve(&m, &g, t_end, cfg.dt, cfg.scheme)?
                            .last()
                            .sup_distance(&reference),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut t = Table::new(&["epsilon", "sup_error"]);
            for (e, err) in rows {
                t.push(vec![fmt_float(e), fmt_float(err)]);
            }
            t.write_csv(&main)?;
        }
        ExperimentKind::Decay => {
            let times = if cfg.times.is_empty() {
                default_decay_times()
            } else {
                cfg.times.clone()
            };
            let m = discretize(GeneratorKind::ALimit { gamma: cfg.gamma }, &grid)?;
            write_json(&main, &decay_rate(&m, &g, &p, &times, cfg.dt, cfg.scheme)?)?;
        }
        ExperimentKind::Blocks => {
            let t = *cfg.times.last().expect("validated");
            let m = discretize(GeneratorKind::ALimit { gamma: cfg.gamma }, &grid)?;
            let direct = evolve(&m, &g, t, cfg.dt, cfg.scheme)?.last().clone();
            let blocks = block_semigroup(&g, t, cfg.gamma, cfg.dt, cfg.scheme)?;
            let long = longtime_blocks(cfg.b, cfg.gamma, cfg.h, t)?;
            let scale = g.sup_norm().max(1.0) * t.max(1.0);
            write_json(
                &main,
                &BlocksArtifact {
                    t,
                    block_vs_direct: blocks.sup_distance(&direct),
                    tolerance: 5.0 * (cfg.h * cfg.h + cfg.dt * cfg.dt) * scale,
                    reconstruction_error: long.reconstruction_error,
                    g1_gap: long.g1_gap,
                    g2_gap: long.g2_gap,
                },
            )?;
        }
        ExperimentKind::ExitLaw => {
            let report = exit_local_time_law(cfg.a, cfg.b, cfg.mc.paths, cfg.seed, cfg.mc.dt, cfg.mc.estimator)?;
            if cfg.mc.dump_samples {
                let name = "exit_law_samples.csv".to_string();
                let mut t = Table::new(&["local_time"]);
                for &s in &report.samples {
                    t.push(vec![fmt_float(s)]);
                }
                t.write_csv(&dir.join(&name))?;
                files.push(name);
            }
            let ks_band = ks_band(report.n_paths);
            write_json(&main, &ExitLawArtifact { report, ks_band })?;
        }
        ExperimentKind::Survival => {
            let estimates = cfg
                .mc
                .x0
                .iter()
                .map(|&x| estimate_survival(x, &p, &cfg.sim_config(x)))
                .collect::<Result<Vec<_>>>()?;
            write_json(
                &main,
                &SurvivalArtifact {
                    a: cfg.a,
                    b: cfg.b,
                    gamma: cfg.gamma,
                    dt: cfg.mc.dt,
                    n_paths: cfg.mc.paths,
                    estimates,
                },
            )?;
        }
        ExperimentKind::Mechanisms => {
            let x = cfg.mc.x0[0];
            let table = compare_mechanisms(x, cfg.mc.t, &p, &shared, &cfg.epsilons, &cfg.sim_config(x), cfg.h)?;
            write_json(&main, &table)?;
        }
    }
    Ok(files)
}

/// Tables and checks of an experiment, read back from its artifacts.
fn evaluate(cfg: &ExperimentConfig, dir: &Path, artifacts: &[String]) -> Result<(Vec<Table>, Vec<Check>)> {
    let kind = cfg.experiment;
    for a in artifacts {
        if !dir.join(a).is_file() {
            return Err(LabError::Config(format!("missing artifact {}", dir.join(a).display())));
        }
    }
    let name = kind.artifact();
    if !artifacts.contains(&name) {
        return Err(LabError::Config(format!("manifest does not list {name}")));
    }
    let path = dir.join(&name);
    let mut tables = Vec::new();
    let mut checks = Vec::new();
    let sci = |v: f64| format!("{v:.6e}");
    if kind.csv_artifact() {
        let cols = read_csv_columns(&path)?;
        let mut r = csv::Reader::from_path(&path).map_err(csv_error)?;
        let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(String::from).collect();
        let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        let n = cols.values().next().map_or(0, Vec::len);
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            t.push(
                header
                    .iter()
                    .map(|h| {
                        if h.ends_with("_iterations") {
                            format!("{}", cols[h][i])
                        } else {
                            sci(cols[h][i])
                        }
                    })
                    .collect(),
            );
        }
        tables.push(t);
        match kind {
            ExperimentKind::Fixedpoint => {
                let ratio = column(&cols, "max_step_ratio", &path)?;
                let bound = column(&cols, "contraction_bound", &path)?;
                let excess = ratio
                    .iter()
                    .zip(bound)
                    .map(|(r, b)| r - b)
                    .fold(f64::NEG_INFINITY, f64::max);
                checks.push(Check::at_most(
                    "max_step_ratio - contraction_bound",
                    excess,
                    CONTRACTION_SLACK,
                ));
                let spread = column(&cols, "wronskian_spread", &path)?
                    .iter()
                    .copied()
                    .fold(0.0, f64::max);
                checks.push(Check::at_most("wronskian_spread", spread, MAX_WRONSKIAN_SPREAD));
            }
            _ => checks.push(Check::decreasing(
                "sup_error strictly decreasing",
                column(&cols, "sup_error", &path)?,
            )),
        }
        return Ok((tables, checks));
    }
    match kind {
        ExperimentKind::Decay => {
            let fit: DecayFit = read_json(&path)?;
            let threshold = 0.95 * dirichlet_rate(cfg.a, cfg.b);
            let mut t = Table::new(&["kappa_fit", "K_fit", "dirichlet_rate", "0.95*dirichlet_rate"]);
            t.push(vec![
                sci(fit.kappa_fit),
                sci(fit.k_fit),
                sci(dirichlet_rate(cfg.a, cfg.b)),
                sci(threshold),
            ]);
            tables.push(t);
            checks.push(Check::at_least("kappa_fit", fit.kappa_fit, threshold));
        }
        ExperimentKind::Blocks => {
            let b: BlocksArtifact = read_json(&path)?;
            let mut t = Table::new(&[
                "t",
                "block_vs_direct",
                "tolerance",
                "reconstruction_error",
                "g1_gap",
                "g2_gap",
            ]);
            t.push(vec![
                sci(b.t),
                sci(b.block_vs_direct),
                sci(b.tolerance),
                sci(b.reconstruction_error),
                sci(b.g1_gap),
                sci(b.g2_gap),
            ]);
            tables.push(t);
            checks.push(Check::at_most("block_vs_direct", b.block_vs_direct, b.tolerance));
            checks.push(Check::at_most(
                "reconstruction_error",
                b.reconstruction_error,
                RECONSTRUCTION_TOL,
            ));
        }
        ExperimentKind::ExitLaw => {
            let e: ExitLawArtifact = read_json(&path)?;
            let r = &e.report;
            let mut t = Table::new(&[
                "paths",
                "mean",
                "std_error",
                "expected",
                "ci_low",
                "ci_high",
                "z",
                "ks_stat",
                "ks_band",
            ]);
            let z = (r.mean - r.expected_mean).abs() / r.std_error;
            t.push(vec![
                r.n_paths.to_string(),
                sci(r.mean),
                sci(r.std_error),
                sci(r.expected_mean),
                sci(r.mean_ci.0),
                sci(r.mean_ci.1),
                format!("{z:.3}"),
                sci(r.ks_stat),
                sci(e.ks_band),
            ]);
            tables.push(t);
            checks.push(Check::at_most("mean z-score (99% CI)", z, Z99));
            checks.push(Check::at_most("ks_stat", r.ks_stat, e.ks_band));
        }
        ExperimentKind::Survival => {
            let s: SurvivalArtifact = read_json(&path)?;
            let mut t = Table::new(&["x", "estimate", "std_error", "exact", "z"]);
            for e in &s.estimates {
                let z = e.weighted.z_score(e.exact);
                t.push(vec![
                    format!("{}", e.x),
                    sci(e.weighted.value),
                    sci(e.weighted.std_error),
                    sci(e.exact),
                    format!("{z:.3}"),
                ]);
                checks.push(Check::at_most(format!("z-score at x = {}", e.x), z, Z99));
            }
            tables.push(t);
        }
        ExperimentKind::Mechanisms => {
            let m: MechanismTable = read_json(&path)?;
            let mut t = Table::new(&["mechanism", "estimate", "std_error", "pde", "z"]);
            for row in &m.rows {
                let label = match row.epsilon {
                    Some(e) => format!("intensity eps={e}"),
                    None => "local time".to_string(),
                };
                let z = row.estimate.z_score(row.pde);
                t.push(vec![
                    label.clone(),
                    sci(row.estimate.value),
                    sci(row.estimate.std_error),
                    sci(row.pde),
                    format!("{z:.3}"),
                ]);
                checks.push(Check::at_most(format!("{label} z-score"), z, Z99));
            }
            tables.push(t);
        }
        _ => unreachable!("csv experiments handled above"),
    }
    Ok((tables, checks))
}

/// Result of [`run`]: the manifest (also written to disk) and the exit code.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub exit_code: i32,
}

/// Exit code for a failure raised before or during the computation.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Io(_) => EXIT_IO,
        LabError::Parameter { .. }
        | LabError::Config(_)
        | LabError::Json(_)
        | LabError::Grid(_)
        | LabError::Resolution { .. }
        | LabError::EstimatorBias { .. }
        | LabError::Unsupported(_)
        | LabError::TooLarge { .. } => EXIT_VALIDATION,
        LabError::Quadrature { .. }
        | LabError::Contraction { .. }
        | LabError::InconsistentEigenpair { .. }
        | LabError::SingularSystem { .. }
        | LabError::FitRejected(_)
        | LabError::Degenerate(_) => EXIT_CHECK_FAILED,
    }
}

/// Validates `cfg`, writes its artifacts and `manifest.json` into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let artifacts = compute(cfg, out)?;
    let compute_time = start.elapsed().as_secs_f64();
    let (_, checks) = evaluate(cfg, out, &artifacts)?;
    let passed = checks.iter().all(|c| c.passed);
    let mut wall_times = BTreeMap::new();
    wall_times.insert("compute".to_string(), compute_time);
    wall_times.insert("total".to_string(), start.elapsed().as_secs_f64());
    let manifest = Manifest {
        tool: "labcli".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment,
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        config: cfg.clone(),
        artifacts,
        wall_times,
        checks,
        passed,
    };
    let manifest_path = out.join(MANIFEST_NAME);
    write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
        exit_code: if passed { EXIT_OK } else { EXIT_CHECK_FAILED },
    })
}

/// Aligned plain-text tables for the run recorded in `manifest_path`. The
/// checks are recomputed from the artifacts, not copied from the manifest.
pub fn report(manifest_path: &Path) -> Result<String> {
    let m = Manifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let (tables, checks) = evaluate(&m.config, dir, &m.artifacts)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "experiment: {}  seed: {}  version: {}",
        m.experiment.name(),
        m.seed,
        m.version
    );
    for t in &tables {
        out.push('\n');
        t.render(&mut out);
    }
    let mut t = Table::new(&["check", "value", "relation", "threshold", "status"]);
    for c in &checks {
        t.push(vec![
            c.name.clone(),
            format!("{:.6e}", c.value),
            c.relation.clone(),
            format!("{:.6e}", c.threshold),
            if c.passed { "PASS" } else { "FAIL" }.to_string(),
        ]);
    }
    out.push('\n');
    t.render(&mut out);
    Ok(out)
}

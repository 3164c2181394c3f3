//! Killed and stopped Brownian paths on `[a, b]`.
//!
//! Two killing mechanisms are simulated: an intensity `c_ε` integrated along
//! the path, and a local-time clock `γ L₀`. Both compare the accumulated hazard
//! with one standard-exponential clock drawn per path. Every path draws from
//! generators keyed by ChaCha streams selected by `(seed, path index)`, so
//! results do not depend on how paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::{exp_law_mean, k_star, l_star, survival_expectation, LimitParams};
use crate::error::{param, LabError, Result};
use crate::kernel::ScaledKernel;

/// Default occupation window in units of `√dt`.
pub const WINDOW_FACTOR: f64 = 5.0;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.5758293035489004;

/// Beyond this exponent the bridge crossing probability is treated as 0.
const BRIDGE_CUTOFF: f64 = 40.0;

/// A step with `xy > LOCAL_CUTOFF · dt` adds less than `e^{-36}` of a crossing step.
const LOCAL_CUTOFF: f64 = 18.0;

#[derive(Clone, Debug, PartialEq)]
pub enum Mechanism {
    /// Hazard `∫ c_ε(w_s) ds`.
    Intensity(ScaledKernel),
    /// Hazard `γ L₀`.
    LocalTime { gamma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalTimeEstimator {
    /// `E[L₀ over the step | endpoints]` for the Brownian bridge between grid points.
    Bridge,
    /// `(1/2δ) Σ dt 1[|w| < δ]`.
    Occupation { delta: f64 },
}

impl LocalTimeEstimator {
    pub fn occupation(dt: f64) -> Self {
        LocalTimeEstimator::Occupation {
            delta: WINDOW_FACTOR * dt.sqrt(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub x0: f64,
    pub a: f64,
    pub b: f64,
    pub dt: f64,
    pub mechanism: Mechanism,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    /// Stop at `t ∧ τ` instead of `τ`.
    pub horizon: Option<f64>,
    pub estimator: LocalTimeEstimator,
}

impl SimConfig {
    /// Local-time mechanism from `x0` on `[a, b]`, bridge correction on, no horizon.
    pub fn new(x0: f64, a: f64, b: f64, dt: f64, gamma: f64, n_paths: usize, seed: u64) -> Self {
        SimConfig {
            x0,
            a,
            b,
            dt,
            mechanism: Mechanism::LocalTime { gamma },
            n_paths,
            seed,
            bridge_correction: true,
            horizon: None,
            estimator: LocalTimeEstimator::Bridge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a < 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite()) {
            return Err(param(
                "interval",
                format!("need a < 0 < b, got [{}, {}]", self.a, self.b),
            ));
        }
        if !(self.x0 >= self.a && self.x0 <= self.b) {
            return Err(param(
                "x0",
                format!("{} lies outside [{}, {}]", self.x0, self.a, self.b),
            ));
        }
        let limit = 1e-3 * (self.b - self.a).powi(2);
        if !(self.dt > 0.0 && self.dt <= limit) {
            return Err(param("dt", format!("must lie in (0, {limit}], got {}", self.dt)));
        }
        if self.n_paths == 0 {
            return Err(param("n_paths", "need at least one path"));
        }
        if let Some(t) = self.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(param("horizon", format!("must be positive, got {t}")));
            }
        }
        match &self.mechanism {
            Mechanism::LocalTime { gamma } if !(*gamma >= 0.0 && gamma.is_finite()) => {
                return Err(param("gamma", format!("must be nonnegative, got {gamma}")));
            }
            _ => {}
        }
        if let LocalTimeEstimator::Occupation { delta } = self.estimator {
            check_window(delta, self.dt)?;
        }
        Ok(())
    }
}

fn check_window(delta: f64, dt: f64) -> Result<()> {
    let minimum = WINDOW_FACTOR * dt.sqrt();
    // the default window is built as 5√dt and must pass its own check
    if delta >= minimum * (1.0 - 1e-12) {
        Ok(())
    } else {
        Err(LabError::EstimatorBias { delta, minimum })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    StoppedAtA,
    StoppedAtB,
    /// Reached the horizon inside `(a, b)`.
    Horizon,
    Killed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub status: Status,
    /// `τ ∧ t`; killing does not stop the path, see `kill_time`.
    pub exit_time: f64,
    pub exit_point: f64,
    /// Estimate of `L₀(τ ∧ t)`.
    pub local_time: f64,
    /// Accumulated hazard at `τ ∧ t`.
    pub hazard: f64,
    /// `exp(-hazard)`.
    pub weight: f64,
    /// First time the hazard exceeded the exponential clock.
    pub kill_time: Option<f64>,
    /// Where the path stopped, irrespective of killing.
    pub stopped: Status,
}

impl PathOutcome {
    pub fn killed(&self) -> bool {
        self.status == Status::Killed
    }
}

/// `erfc(w) e^{w²}` for `w ≥ 0`.
fn erfcx(w: f64) -> f64 {
    if w < 25.0 {
        libm::erfc(w) * (w * w).exp()
    } else {
        let inv = 1.0 / (w * w);
        (1.0 - 0.5 * inv + 0.75 * inv * inv) / (w * std::f64::consts::PI.sqrt())
    }
}

/// `E[L₀ over [0, dt] | w(0) = x, w(dt) = y]` for Brownian motion, in the
/// occupation-density normalisation.
pub fn bridge_local_time(x: f64, y: f64, dt: f64) -> f64 {
    if x * y > LOCAL_CUTOFF * dt {
        return 0.0;
    }
    let s = (2.0 * dt).sqrt();
    let u = (x.abs() + y.abs()) / s;
    let v = (y - x) / s;
    0.5 * (2.0 * std::f64::consts::PI * dt).sqrt() * erfcx(u) * (v * v - u * u).exp()
}

/// `E[exp(-γ L₀ over [0, dt]) | w(0) = x, w(dt) = y]`, from the heat kernel of
/// `½ d²/dx²` with the interface condition `f'(0+) - f'(0-) = 2γ f(0)`.
pub fn bridge_survival(x: f64, y: f64, dt: f64, gamma: f64) -> f64 {
    if gamma == 0.0 || x * y > LOCAL_CUTOFF * dt {
        return 1.0;
    }
    let s = (2.0 * dt).sqrt();
    let c = x.abs() + y.abs();
    let u = c / s;
    let v = (y - x) / s;
    let w = (c + gamma * dt) / s;
    1.0 - gamma * 0.5 * (2.0 * std::f64::consts::PI * dt).sqrt() * erfcx(w) * (v * v - u * u).exp()
}

/// Occupation estimate `(1/2δ) Σ dt 1[|w_n| < δ]` over a recorded path (left endpoints).
pub fn local_time_estimate(path: &[f64], dt: f64, delta: f64) -> Result<f64> {
    check_window(delta, dt)?;
    let steps = path.len().saturating_sub(1);
    let inside = path[..steps].iter().filter(|w| w.abs() < delta).count();
    Ok(inside as f64 * dt / (2.0 * delta))
}

/// Bridge-conditioned local time of a recorded path.
pub fn bridge_local_time_path(path: &[f64], dt: f64) -> f64 {
    path.windows(2).map(|w| bridge_local_time(w[0], w[1], dt)).sum()
}

/// Generators of path `i`: Gaussian increments come from a xoshiro generator
/// keyed by ChaCha stream `2i`, the clock and bridge-crossing uniforms from
/// ChaCha stream `2i + 1`.
fn path_rngs(seed: u64, index: usize) -> (Xoshiro256PlusPlus, ChaCha8Rng) {
    let mut keys = ChaCha8Rng::seed_from_u64(seed);
    keys.set_stream(2 * index as u64);
    let normals = Xoshiro256PlusPlus::from_rng(&mut keys).expect("infallible");
    keys.set_stream(2 * index as u64 + 1);
    keys.set_word_pos(0);
    (normals, keys)
}

struct Walk {
    stopped: Status,
    steps: u64,
    kill_step: Option<u64>,
    x: f64,
    local: f64,
    hazard: f64,
}

/// The stepping loop, specialised for a step rule `(x, y) -> (ΔL̂₀, Δhazard)`.
fn walk(
    cfg: &SimConfig,
    max_steps: u64,
    clock: f64,
    mut normals: Xoshiro256PlusPlus,
    uniforms: &mut ChaCha8Rng,
    mut increment: impl FnMut(f64, f64) -> (f64, f64),
) -> Walk {
    let (a, b, dt) = (cfg.a, cfg.b, cfg.dt);
    let sd = dt.sqrt();
    // a step with both ends outside these bands cannot cross a or b (exponent > cutoff)
    let band = (0.5 * BRIDGE_CUTOFF * dt).sqrt();
    let (lo, hi) = if cfg.bridge_correction {
        (a + band, b - band)
    } else {
        (a, b)
    };
    let mut w = Walk {
        stopped: Status::Horizon,
        steps: 0,
        kill_step: None,
        x: cfg.x0,
        local: 0.0,
        hazard: 0.0,
    };
    if w.x <= a || w.x >= b {
        w.stopped = if w.x <= a {
            Status::StoppedAtA
        } else {
            Status::StoppedAtB
        };
        return w;
    }
    let mut x = w.x;
    let (mut local, mut hazard) = (0.0, 0.0);
    let mut kill_step = None;
    let mut steps = 0_u64;
    let mut stopped = Status::Horizon;
    while steps < max_steps {
        let z: f64 = normals.sample(StandardNormal);
        let mut y = x + sd * z;
        steps += 1;
        let mut done = false;
        if !(y > lo && y < hi && x > lo && x < hi) {
            let side = if y <= a {
                Some(Status::StoppedAtA)
            } else if y >= b {
                Some(Status::StoppedAtB)
            } else if cfg.bridge_correction {
                let pa = (-2.0 * (x - a) * (y - a) / dt).exp();
                let pb = (-2.0 * (b - x) * (b - y) / dt).exp();
                let u: f64 = uniforms.gen();
                if u < pa {
                    Some(Status::StoppedAtA)
                } else if u < pa + pb {
                    Some(Status::StoppedAtB)
                } else {
                    None
                }
            } else {
                None
            };
            if let Some(side) = side {
                y = if side == Status::StoppedAtA { a } else { b };
                stopped = side;
                done = true;
            }
        }
        let (l, h) = increment(x, y);
        local += l;
        hazard += h;
        if hazard > clock && kill_step.is_none() {
            kill_step = Some(steps);
        }
        x = y;
        if done {
            break;
        }
    }
    w.stopped = stopped;
    w.steps = steps;
    w.kill_step = kill_step;
    w.local = local;
    w.hazard = hazard;
    w.x = x;
    w
}

/// One path.
pub fn simulate_path(cfg: &SimConfig, index: usize) -> PathOutcome {
    let (normals, mut uniforms) = path_rngs(cfg.seed, index);
    let clock: f64 = uniforms.sample(Exp1);
    let dt = cfg.dt;
    let max_steps = cfg.horizon.map_or(u64::MAX, |t| ((t / dt).round() as u64).max(1));
    let time_at = |step: u64| {
        if step == max_steps {
            cfg.horizon.expect("horizon")
        } else {
            step as f64 * dt
        }
    };
    let local_band = LOCAL_CUTOFF * dt;
    let bridge = move |x: f64, y: f64| {
        if x * y < local_band {
            bridge_local_time(x, y, dt)
        } else {
            0.0
        }
    };
    let occupation = move |delta: f64| move |x: f64| if x.abs() < delta { dt / (2.0 * delta) } else { 0.0 };
    let w = match (&cfg.mechanism, cfg.estimator) {
        (Mechanism::LocalTime { gamma }, LocalTimeEstimator::Bridge) => {
            let gamma = *gamma;
            let step = |x: f64, y: f64| {
                if x * y < local_band {
                    (bridge_local_time(x, y, dt), -bridge_survival(x, y, dt, gamma).ln())
                } else {
                    (0.0, 0.0)
                }
            };
            walk(cfg, max_steps, clock, normals, &mut uniforms, step)
        }
        (Mechanism::LocalTime { gamma }, LocalTimeEstimator::Occupation { delta }) => {
            let occ = occupation(delta);
            let step = |x: f64, _: f64| {
                let l = occ(x);
                (l, gamma * l)
            };
            walk(cfg, max_steps, clock, normals, &mut uniforms, step)
        }
        (Mechanism::Intensity(k), estimator) => {
            let mut c_prev = k.eval(cfg.x0);
            let mut trapezoid = move |y: f64| {
                let c = k.eval(y);
                let d = 0.5 * dt * (c_prev + c);
                c_prev = c;
                d
            };
            match estimator {
                LocalTimeEstimator::Bridge => walk(cfg, max_steps, clock, normals, &mut uniforms, |x, y| {
                    (bridge(x, y), trapezoid(y))
                }),
                LocalTimeEstimator::Occupation { delta } => {
                    let occ = occupation(delta);
                    walk(cfg, max_steps, clock, normals, &mut uniforms, |x, y| {
                        (occ(x), trapezoid(y))
                    })
                }
            }
        }
    };
    PathOutcome {
        status: if w.kill_step.is_some() {
            Status::Killed
        } else {
            w.stopped
        },
        exit_time: time_at(w.steps),
        exit_point: w.x,
        local_time: w.local,
        hazard: w.hazard,
        weight: (-w.hazard).exp(),
        kill_time: w.kill_step.map(time_at),
        stopped: w.stopped,
    }
}

/// All paths of `cfg`, in path order, on the current rayon pool.
pub fn simulate(cfg: &SimConfig) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    Ok((0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(cfg, i))
        .collect())
}

/// Neumaier-compensated mean and sample standard error, summed in input order.
pub fn mean_se(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut n = 0_usize;
    let (mut s, mut cs) = (0.0_f64, 0.0_f64);
    let (mut q, mut cq) = (0.0_f64, 0.0_f64);
    for v in values {
        n += 1;
        neumaier(&mut s, &mut cs, v);
        neumaier(&mut q, &mut cq, v * v);
    }
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = (s + cs) / nf;
    let var = if n > 1 {
        ((q + cq) - nf * mean * mean).max(0.0) / (nf - 1.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt())
}

fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(values: impl IntoIterator<Item = f64>) -> Self {
        let (value, std_error) = mean_se(values);
        Estimate { value, std_error }
    }

    /// `|value - target| / std_error`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.std_error
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalEstimate {
    pub x: f64,
    /// `mean(exp(-γ L̂₀(τ)))`
    pub weighted: Estimate,
    /// Fraction of paths that reach `a` or `b` before the clock rings.
    pub killed_path: Estimate,
    /// `mean(exp(-γ L̂₀(τ)) 1[w(τ) = a])`, target `ℓ*(x)`.
    pub capture_a: Estimate,
    /// `mean(exp(-γ L̂₀(τ)) 1[w(τ) = b])`, target `k*(x)`.
    pub capture_b: Estimate,
    pub exact: f64,
    pub exact_a: f64,
    pub exact_b: f64,
}

/// `E_x exp(-γ L₀(τ))` and its split by exit side. The mechanism, start and
/// interval of `cfg` are replaced by the local-time clock of `p` from `x`.
pub fn estimate_survival(x: f64, p: &LimitParams, cfg: &SimConfig) -> Result<SurvivalEstimate> {
    let cfg = SimConfig {
        x0: x,
        a: p.a,
        b: p.b,
        mechanism: Mechanism::LocalTime { gamma: p.gamma },
        horizon: None,
        ..cfg.clone()
    };
    let out = simulate(&cfg)?;
    let side = |s: Status| move |o: &PathOutcome| if o.stopped == s { o.weight } else { 0.0 };
    Ok(SurvivalEstimate {
        x,
        weighted: Estimate::from_samples(out.iter().map(|o| o.weight)),
        killed_path: Estimate::from_samples(out.iter().map(|o| if o.killed() { 0.0 } else { 1.0 })),
        capture_a: Estimate::from_samples(out.iter().map(side(Status::StoppedAtA))),
        capture_b: Estimate::from_samples(out.iter().map(side(Status::StoppedAtB))),
        exact: survival_expectation(x, p),
        exact_a: l_star(x, p),
        exact_b: k_star(x, p),
    })
}

/// Kolmogorov–Smirnov distance between the empirical law of `samples` and the
/// exponential law with the given mean.
pub fn ks_exponential(samples: &[f64], mean: f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x.max(0.0) / mean).exp();
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// 99% band of the KS statistic under the null, `1.63/√n`.
pub fn ks_band(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExitLawReport {
    pub a: f64,
    pub b: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub expected_mean: f64,
    pub mean: f64,
    pub std_error: f64,
    /// 99% confidence interval for the mean.
    pub mean_ci: (f64, f64),
    pub ks_stat: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl ExitLawReport {
    pub fn ci_contains_expected(&self) -> bool {
        self.mean_ci.0 <= self.expected_mean && self.expected_mean <= self.mean_ci.1
    }
}

/// `L̂₀(τ)` under `P₀` for unkilled paths, compared with the exponential law of
/// mean `2(-a)b/(b-a)`.
pub fn exit_local_time_law(
    a: f64,
    b: f64,
    n_paths: usize,
    seed: u64,
    dt: f64,
    estimator: LocalTimeEstimator,
) -> Result<ExitLawReport> {
    let cfg = SimConfig {
        estimator,
        ..SimConfig::new(0.0, a, b, dt, 0.0, n_paths, seed)
    };
    let samples: Vec<f64> = simulate(&cfg)?.iter().map(|o| o.local_time).collect();
    let expected_mean = exp_law_mean(a, b);
    let (mean, std_error) = mean_se(samples.iter().copied());
    Ok(ExitLawReport {
        a,
        b,
        n_paths,
        dt,
        expected_mean,
        mean,
        std_error,
        mean_ci: (mean - Z99 * std_error, mean + Z99 * std_error),
        ks_stat: ks_exponential(&samples, expected_mean),
        samples,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanismRow {
    /// `None` for the local-time clock.
    pub epsilon: Option<f64>,
    pub estimate: Estimate,
    /// `e^{tA_ε} f(x)` or `e^{tA} f(x)` from the PDE solver.
    pub pde: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanismTable {
    pub x: f64,
    pub t: f64,
    pub rows: Vec<MechanismRow>,
}

/// `E_x f(w(t∧τ)) exp(-hazard)` with `f ≡ 1` under the intensity mechanism for
/// each `ε` and under the local-time clock, next to the PDE values at `x`.
pub fn compare_mechanisms(
    x: f64,
    t: f64,
    p: &LimitParams,
    kernel: &crate::kernel::KillingKernel,
    eps_list: &[f64],
    cfg: &SimConfig,
    h: f64,
) -> Result<MechanismTable> {
    use crate::evolution::{discretize, evolve, GeneratorKind, Scheme};
    use crate::grid::{Grid, GridFunction};
    use std::sync::Arc;

    if (kernel.gamma() - p.gamma).abs() > 1e-9 * p.gamma.max(1.0) {
        return Err(param(
            "kernel",
            format!("mass {} differs from γ = {}", kernel.gamma(), p.gamma),
        ));
    }
    let grid = Grid::new(p.a, p.b, h)?;
    let one = GridFunction::from_fn(&grid, |_| 1.0);
    let node = ((x - p.a) / grid.h()).round() as usize;
    if (grid.x(node) - x).abs() > 1e-9 {
        return Err(param("x", format!("{x} is not a node of the grid with h = {h}")));
    }
    let base = SimConfig {
        x0: x,
        a: p.a,
        b: p.b,
        horizon: Some(t),
        ..cfg.clone()
    };
    let shared = Arc::new(kernel.clone());
    let mut rows = Vec::new();
    let pde_dt = h;
    for &eps in eps_list {
        let k = ScaledKernel::new(shared.clone(), eps)?;
        let run = SimConfig {
            mechanism: Mechanism::Intensity(k.clone()),
            ..base.clone()
        };
        let out = simulate(&run)?;
        let m = discretize(GeneratorKind::AEps(k), &grid)?;
        let pde = evolve(&m, &one, t, pde_dt, Scheme::CrankNicolson)?.last().at(node);
        rows.push(MechanismRow {
            epsilon: Some(eps),
            estimate: Estimate::from_samples(out.iter().map(|o| o.weight)),
            pde,
        });
    }
    let run = SimConfig {
        mechanism: Mechanism::LocalTime { gamma: p.gamma },
        ..base
    };
    let out = simulate(&run)?;
    let m = discretize(GeneratorKind::ALimit { gamma: p.gamma }, &grid)?;
    let pde = evolve(&m, &one, t, pde_dt, Scheme::CrankNicolson)?.last().at(node);
    rows.push(MechanismRow {
        epsilon: None,
        estimate: Estimate::from_samples(out.iter().map(|o| o.weight)),
        pde,
    });
    Ok(MechanismTable { x, t, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn start_at_endpoint() {
        let mut cfg = SimConfig::new(-1.0, -1.0, 1.0, 1e-4, 1.0, 3, 7);
        let out = simulate(&cfg).unwrap();
        assert!(out
            .iter()
            .all(|o| o.status == Status::StoppedAtA && o.exit_time == 0.0 && o.local_time == 0.0));
        cfg.x0 = 1.0;
        assert!(simulate(&cfg).unwrap().iter().all(|o| o.status == Status::StoppedAtB));
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(0.0, -1.0, 1.0, 1e-4, 1.0, 10, 1);
        assert!(ok.validate().is_ok());
        assert!(SimConfig { dt: 0.01, ..ok.clone() }.validate().is_err());
        assert!(SimConfig { x0: 2.0, ..ok.clone() }.validate().is_err());
        assert!(SimConfig {
            n_paths: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        let narrow = SimConfig {
            estimator: LocalTimeEstimator::Occupation { delta: 0.01 },
            ..ok.clone()
        };
        assert!(matches!(narrow.validate(), Err(LabError::EstimatorBias { .. })));
        let default = SimConfig {
            estimator: LocalTimeEstimator::occupation(1e-4),
            ..ok
        };
        assert!(default.validate().is_ok());
    }

    #[test]
    fn occupation_estimator() {
        let far = [0.5, 0.6, 0.55, 0.7];
        assert_eq!(local_time_estimate(&far, 1e-4, 0.05).unwrap(), 0.0);
        let near = [0.0, 0.01, -0.02, 0.3];
        assert!((local_time_estimate(&near, 1e-4, 0.05).unwrap() - 3e-4 / 0.1).abs() < 1e-15);
        assert!(local_time_estimate(&near, 1e-4, 0.04).is_err());
    }

    #[test]
    fn bridge_local_time_values() {
        let dt = 1e-4;
        // from 0 back to 0: ½√(2π dt)
        let at_zero = bridge_local_time(0.0, 0.0, dt);
        assert!((at_zero - 0.5 * (2.0 * std::f64::consts::PI * dt).sqrt()).abs() < 1e-15);
        assert_eq!(bridge_local_time(0.5, 0.6, dt), 0.0);
        // a long crossing step spends about dt/|y - x| per unit length at 0
        let cross = bridge_local_time(-0.5, 0.5, dt);
        assert!((cross / (dt / 1.0) - 1.0).abs() < 1e-3, "{cross}");
        assert!(bridge_local_time(0.01, -0.01, dt) > bridge_local_time(0.01, 0.02, dt));
        let path = [0.0, 0.0, 0.0];
        assert!((bridge_local_time_path(&path, dt) - 2.0 * at_zero).abs() < 1e-15);
    }

    #[test]
    fn bridge_formula_matches_quadrature() {
        // ∫_0^t p_s(x) p_{t-s}(y) ds / p_t(y - x) by midpoint rule
        let (x, y, t) = (0.013, 0.004, 1e-4);
        let p = |s: f64, z: f64| (-z * z / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt();
        let n = 200_000;
        let ds = t / n as f64;
        let integral: f64 = (0..n)
            .map(|i| (i as f64 + 0.5) * ds)
            .map(|s| p(s, x) * p(t - s, y) * ds)
            .sum();
        let exact = integral / p(t, y - x);
        assert!(
            (bridge_local_time(x, y, t) / exact - 1.0).abs() < 1e-4,
            "{} {exact}",
            bridge_local_time(x, y, t)
        );
    }

    #[test]
    fn bridge_survival_limits() {
        let dt = 1e-4;
        for (x, y) in [(0.01_f64, 0.004_f64), (0.002, 0.003), (-0.01, -0.02)] {
            // hard wall: survive iff the bridge avoids 0
            let avoid = 1.0 - (-2.0 * x * y / dt).exp();
            assert!((bridge_survival(x, y, dt, 1e8) - avoid).abs() < 1e-6, "{x} {y}");
            // weak killing: first order in γ is the expected local time
            let g = 1e-6;
            let slope = (1.0 - bridge_survival(x, y, dt, g)) / g;
            assert!((slope / bridge_local_time(x, y, dt) - 1.0).abs() < 1e-4);
        }
        // a crossing step survives with probability about |y - x|/(γ dt)
        let phi = bridge_survival(-0.01, 0.01, dt, 1e8);
        assert!((phi / (0.02 / 1e4) - 1.0).abs() < 1e-3, "{phi}");
        assert_eq!(bridge_survival(0.3, 0.4, dt, 5.0), 1.0);
        assert_eq!(bridge_survival(0.0, 0.001, dt, 0.0), 1.0);
    }

    #[test]
    fn ks_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| -2.0 * (1.0 - rng.gen::<f64>()).ln()).collect();
        assert!(ks_exponential(&samples, 2.0) <= ks_band(n));
        assert!(ks_exponential(&samples, 1.0) > ks_band(n));
    }

    #[test]
    fn compensated_mean() {
        let (m, se) = mean_se([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0_f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn paths_are_reproducible() {
        let cfg = SimConfig::new(0.2, -1.0, 1.0, 1e-3, 1.0, 50, 11);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let other = SimConfig {
            seed: 12,
            ..cfg.clone()
        };
        assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn horizon_stops_paths() {
        let cfg = SimConfig {
            horizon: Some(0.05),
            ..SimConfig::new(0.0, -1.0, 1.0, 1e-3, 0.0, 200, 5)
        };
        for o in simulate(&cfg).unwrap() {
            assert!(o.exit_time <= 0.05 + 1e-15);
            if o.status == Status::Horizon {
                assert_eq!(o.exit_time, 0.05);
            }
        }
    }
}

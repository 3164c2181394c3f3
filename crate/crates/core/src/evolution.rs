//! Tridiagonal generator matrices and their semigroups.
//!
//! Every generator is stored as a tridiagonal band over the *free* nodes of
//! its grid. Nodes carrying a Dirichlet condition (both ends for `B`, the
//! origin for `G₁`) are removed from the system and read back as 0.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::closedform::{blocks_k_star, blocks_l_star, k1, k2, k_star, l_star, LimitParams};
use crate::error::{param, LabError, Result};
use crate::grid::{Grid, GridFunction};
use crate::kernel::ScaledKernel;

/// Largest grid accepted by [`Scheme::DenseExponential`].
pub const DENSE_LIMIT: usize = 2000;

/// Implicit-Euler half steps replacing the first Crank–Nicolson step.
const STARTUP_HALF_STEPS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum GeneratorKind {
    /// `½f'' - c_ε f`, stopped at `a`, `b`.
    AEps(ScaledKernel),
    /// `½f''` with `f'(0+) - f'(0-) = 2γ f(0)`, stopped at `a`, `b`.
    ALimit { gamma: f64 },
    /// `½f''` on `C₀(a, b)`.
    BDirichlet,
    /// `½f''` on `[0, b]`, zero at 0, stopped at `b`.
    G1,
    /// `½f''` on `[0, b]`, `f'(0) = γ f(0)`, stopped at `b`.
    G2 { gamma: f64 },
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorKind::AEps(_) => "a_eps",
            GeneratorKind::ALimit { .. } => "a_limit",
            GeneratorKind::BDirichlet => "b_dirichlet",
            GeneratorKind::G1 => "g1",
            GeneratorKind::G2 { .. } => "g2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    CrankNicolson,
    DenseExponential,
}

#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    kind: GeneratorKind,
    grid: Grid,
    /// Free nodes are `offset..offset + diag.len()`.
    offset: usize,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

pub fn discretize(kind: GeneratorKind, grid: &Grid) -> Result<GeneratorMatrix> {
    let n = grid.len();
    let h = grid.h();
    let off = 0.5 / (h * h);
    let mut lower = vec![off; n];
    let mut diag = vec![-2.0 * off; n];
    let mut upper = vec![off; n];
    let stop = |i: usize, lower: &mut Vec<f64>, diag: &mut Vec<f64>, upper: &mut Vec<f64>| {
        lower[i] = 0.0;
        diag[i] = 0.0;
        upper[i] = 0.0;
    };
    let last = grid.last();
    let half_line = grid.a() == 0.0;
    let offset;
    let size;
    match &kind {
        GeneratorKind::AEps(kernel) => {
            require_full(grid, &kind)?;
            kernel.check_resolution(h)?;
            for (i, d) in diag.iter_mut().enumerate().take(last).skip(1) {
                *d -= kernel.eval(grid.x(i));
            }
            stop(0, &mut lower, &mut diag, &mut upper);
            stop(last, &mut lower, &mut diag, &mut upper);
            (offset, size) = (0, n);
        }
        GeneratorKind::ALimit { gamma } => {
            require_full(grid, &kind)?;
            check_gamma(*gamma)?;
            diag[grid.zero_index()] -= gamma / h;
            stop(0, &mut lower, &mut diag, &mut upper);
            stop(last, &mut lower, &mut diag, &mut upper);
            (offset, size) = (0, n);
        }
        GeneratorKind::BDirichlet => {
            require_full(grid, &kind)?;
            (offset, size) = (1, n - 2);
        }
        GeneratorKind::G1 | GeneratorKind::G2 { .. } => {
            if !half_line {
                return Err(LabError::Grid(format!("{} needs a grid on [0, b]", kind.name())));
            }
            stop(last, &mut lower, &mut diag, &mut upper);
            if let GeneratorKind::G2 { gamma } = kind {
                check_gamma(gamma)?;
                // ghost node f(-h) = f(h) - 2hγ f(0)
                upper[0] = 2.0 * off;
                diag[0] = -2.0 * off * (1.0 + h * gamma);
                (offset, size) = (0, n);
            } else {
                (offset, size) = (1, n - 1);
            }
        }
    }
    let range = offset..offset + size;
    let mut lower = lower[range.clone()].to_vec();
    let diag = diag[range.clone()].to_vec();
    let mut upper = upper[range].to_vec();
    lower[0] = 0.0;
    upper[size - 1] = 0.0;
    Ok(GeneratorMatrix {
        kind,
        grid: grid.clone(),
        offset,
        lower,
        diag,
        upper,
    })
}

fn require_full(grid: &Grid, kind: &GeneratorKind) -> Result<()> {
    if grid.a() < 0.0 {
        Ok(())
    } else {
        Err(LabError::Grid(format!(
            "{} needs a grid on [a, b] with a < 0 < b",
            kind.name()
        )))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(param("gamma", format!("must be nonnegative, got {gamma}")))
    }
}

impl GeneratorMatrix {
    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of free nodes.
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    /// `(lower, diag, upper)` of the grid row `i`; zero for eliminated nodes.
    /// `lower` multiplies `f_{i-1}`, `upper` multiplies `f_{i+1}`.
    pub fn row(&self, i: usize) -> (f64, f64, f64) {
        match i.checked_sub(self.offset) {
            Some(j) if j < self.size() => (self.lower[j], self.diag[j], self.upper[j]),
            _ => (0.0, 0.0, 0.0),
        }
    }

    fn restrict(&self, f: &GridFunction) -> Result<Vec<f64>> {
        if !f.grid().same_nodes(&self.grid) {
            return Err(LabError::Grid("function and generator live on different grids".into()));
        }
        Ok(f.values()[self.offset..self.offset + self.size()].to_vec())
    }

    fn extend(&self, free: &[f64]) -> GridFunction {
        let mut values = vec![0.0; self.grid.len()];
        values[self.offset..self.offset + free.len()].copy_from_slice(free);
        GridFunction::new(self.grid.clone(), values).expect("grid length")
    }

    fn matvec(&self, v: &[f64], out: &mut [f64]) {
        let m = self.size();
        for j in 0..m {
            let mut s = self.diag[j] * v[j];
            if j > 0 {
                s += self.lower[j] * v[j - 1];
            }
            if j + 1 < m {
                s += self.upper[j] * v[j + 1];
            }
            out[j] = s;
        }
    }

    /// `M f` on the grid; eliminated nodes read 0.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let v = self.restrict(f)?;
        let mut out = vec![0.0; v.len()];
        self.matvec(&v, &mut out);
        Ok(self.extend(&out))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.size();
        DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                self.diag[r]
            } else if c + 1 == r {
                self.lower[r]
            } else if r + 1 == c {
                self.upper[r]
            } else {
                0.0
            }
        })
    }

    /// `(λI - M)⁻¹ g` by a tridiagonal solve.
    pub fn solve_shifted(&self, lambda: f64, g: &GridFunction) -> Result<GridFunction> {
        let rhs = self.restrict(g)?;
        let lower: Vec<f64> = self.lower.iter().map(|v| -v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| lambda - v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| -v).collect();
        Ok(self.extend(&thomas(&lower, &diag, &upper, &rhs)?))
    }
}

/// Tridiagonal solve without pivoting.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = diag[0];
    for j in 0..m {
        if j > 0 {
            denom = diag[j] - lower[j] * c[j - 1];
        }
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(LabError::SingularSystem { row: j });
        }
        c[j] = upper[j] / denom;
        d[j] = (rhs[j] - if j > 0 { lower[j] * d[j - 1] } else { 0.0 }) / denom;
    }
    for j in (0..m.saturating_sub(1)).rev() {
        d[j] -= c[j] * d[j + 1];
    }
    Ok(d)
}

/// `(I - θτM) x = (I + (1-θ)τM) y` stepping with a reusable factorization.
struct Stepper<'a> {
    m: &'a GeneratorMatrix,
    explicit: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(m: &'a GeneratorMatrix, tau: f64, theta: f64) -> Self {
        Stepper {
            m,
            explicit: (1.0 - theta) * tau,
            lower: m.lower.iter().map(|v| -theta * tau * v).collect(),
            diag: m.diag.iter().map(|v| 1.0 - theta * tau * v).collect(),
            upper: m.upper.iter().map(|v| -theta * tau * v).collect(),
            rhs: vec![0.0; m.size()],
        }
    }

    fn step(&mut self, y: &mut Vec<f64>) -> Result<()> {
        if self.explicit != 0.0 {
            self.m.matvec(y, &mut self.rhs);
            for (r, v) in self.rhs.iter_mut().zip(y.iter()) {
                *r = v + self.explicit * *r;
            }
        } else {
            self.rhs.copy_from_slice(y);
        }
        *y = thomas(&self.lower, &self.diag, &self.upper, &self.rhs)?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    pub scheme: Scheme,
}

impl EvolutionResult {
    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("at least one snapshot")
    }

    /// Snapshot at `t`, matched to 1e-12.
    pub fn at_time(&self, t: f64) -> Option<&GridFunction> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-12 * t.max(1.0))
            .map(|i| &self.snapshots[i])
    }
}

/// `e^{t M} f0` at `t = 0` and `t = t_end`.
pub fn evolve(m: &GeneratorMatrix, f0: &GridFunction, t_end: f64, dt: f64, scheme: Scheme) -> Result<EvolutionResult> {
    evolve_at(m, f0, &[t_end], dt, scheme)
}

/// `e^{t M} f0` at `t = 0` and each of `times` (nondecreasing).
///
/// Crank–Nicolson takes `ceil(Δt/dt)` equal steps between snapshots; its first
/// two steps are replaced by four implicit-Euler steps of half size so that
/// data outside the generator's domain does not ring.
pub fn evolve_at(
    m: &GeneratorMatrix,
    f0: &GridFunction,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<EvolutionResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(param("dt", format!("must be positive, got {dt}")));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(param("times", "must be finite, nonnegative and nondecreasing"));
    }
    let mut y = m.restrict(f0)?;
    let mut out_times = vec![0.0];
    let mut snapshots = vec![f0.clone()];
    let mut now = 0.0;
    match scheme {
        Scheme::CrankNicolson => {
            let mut started = false;
            for &t in times {
                let span = t - now;
                let steps = (span / dt - 1e-9).ceil().max(0.0) as usize;
                if steps > 0 {
                    let tau = span / steps as f64;
                    let mut rest = steps;
                    if !started {
                        let halves = STARTUP_HALF_STEPS.min(2 * steps);
                        let mut euler = Stepper::new(m, tau / 2.0, 1.0);
                        for _ in 0..halves {
                            euler.step(&mut y)?;
                        }
                        rest -= halves / 2;
                        started = true;
                    }
                    let mut cn = Stepper::new(m, tau, 0.5);
                    for _ in 0..rest {
                        cn.step(&mut y)?;
                    }
                }
                now = t;
                out_times.push(t);
                snapshots.push(m.extend(&y));
            }
        }
        Scheme::DenseExponential => {
            if m.grid.len() > DENSE_LIMIT {
                return Err(LabError::TooLarge {
                    nodes: m.grid.len(),
                    limit: DENSE_LIMIT,
                });
            }
            let dense = m.to_dense();
            let mut cache: Vec<(f64, DMatrix<f64>)> = Vec::new();
            let mut v = DVector::from_vec(y);
            for &t in times {
                let span = t - now;
                if span > 0.0 {
                    let pos = cache.iter().position(|(s, _)| (s - span).abs() <= 1e-14 * span);
                    let e = match pos {
                        Some(i) => &cache[i].1,
                        None => {
                            cache.push((span, (&dense * span).exp()));
                            &cache.last().expect("pushed").1
                        }
                    };
                    v = e * v;
                }
                now = t;
                out_times.push(t);
                snapshots.push(m.extend(v.as_slice()));
            }
        }
    }
    Ok(EvolutionResult {
        times: out_times,
        snapshots,
        scheme,
    })
}

/// `P f = f(a) ℓ* + f(b) k*`.
pub fn projection_p(f: &GridFunction, p: &LimitParams) -> Result<GridFunction> {
    let g = f.grid();
    if (g.a() - p.a).abs() > 1e-12 || (g.b() - p.b).abs() > 1e-12 {
        return Err(LabError::Grid(
            "grid and parameters describe different intervals".into(),
        ));
    }
    let (fa, fb) = (f.first(), f.last());
    let mut out = GridFunction::from_fn(g, |x| fa * l_star(x, p) + fb * k_star(x, p));
    // exact endpoint values keep P idempotent to rounding
    let last = g.last();
    out.values_mut()[0] = fa;
    out.values_mut()[last] = fb;
    Ok(out)
}

/// `π² / (2(b-a)²)`, the principal decay rate of `B`.
pub fn dirichlet_rate(a: f64, b: f64) -> f64 {
    std::f64::consts::PI.powi(2) / (2.0 * (b - a).powi(2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    pub kappa_fit: f64,
    #[serde(rename = "K_fit")]
    pub k_fit: f64,
    pub dirichlet_rate: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// `κ_fit ≥ 0.95 · dirichlet_rate`
    pub dominated: bool,
}

/// The default fit window: `t = 1, 1.5, ..., 6`.
pub fn default_decay_times() -> Vec<f64> {
    (0..=10).map(|i| 1.0 + 0.5 * i as f64).collect()
}

/// Least-squares fit of `log ‖e^{tM} f0 - P f0‖∞ = log K - κ t`.
pub fn decay_rate(
    m: &GeneratorMatrix,
    f0: &GridFunction,
    p: &LimitParams,
    times: &[f64],
    dt: f64,
    scheme: Scheme,
) -> Result<DecayFit> {
    if times.len() < 2 {
        return Err(param("times", "need at least two fit times"));
    }
    let target = projection_p(f0, p)?;
    let start = f0.sup_distance(&target);
    if start <= 1e-12 * f0.sup_norm().max(1.0) {
        return Err(LabError::Degenerate(format!(
            "initial datum is fixed by the projection (distance {start:.3e})"
        )));
    }
    let run = evolve_at(m, f0, times, dt, scheme)?;
    let distances: Vec<f64> = run.snapshots[1..].iter().map(|s| s.sup_distance(&target)).collect();
    if distances.iter().any(|d| !(*d > 1e-300)) {
        return Err(LabError::FitRejected(
            "distance reached zero inside the fit window".into(),
        ));
    }
    if let Some(w) = distances.windows(2).position(|w| w[1] > w[0]) {
        return Err(LabError::FitRejected(format!(
            "distance increases between t = {} and t = {}",
            times[w],
            times[w + 1]
        )));
    }
    let logs: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let sxx: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - mt) * (l - ml)).sum();
    let slope = sxy / sxx;
    let rate = dirichlet_rate(p.a, p.b);
    Ok(DecayFit {
        kappa_fit: -slope,
        k_fit: (ml - slope * mt).exp(),
        dirichlet_rate: rate,
        times: times.to_vec(),
        distances,
        dominated: -slope >= 0.95 * rate,
    })
}

fn require_symmetric(grid: &Grid) -> Result<()> {
    if grid.is_symmetric() {
        Ok(())
    } else {
        Err(LabError::Unsupported(format!(
            "odd/even blocks need a = -b, got [{}, {}]",
            grid.a(),
            grid.b()
        )))
    }
}

/// `e^{tA} f0` on `[-b, b]` through the odd part under `G₁` and the even part under `G₂`.
pub fn block_semigroup(f0: &GridFunction, t: f64, gamma: f64, dt: f64, scheme: Scheme) -> Result<GridFunction> {
    let grid = f0.grid();
    require_symmetric(grid)?;
    let z = grid.zero_index();
    let half = Grid::half(grid.b(), grid.h())?;
    let v = f0.values();
    let mut odd_v = vec![0.0; half.len()];
    let mut even_v = vec![0.0; half.len()];
    for j in 0..half.len() {
        odd_v[j] = 0.5 * (v[z + j] - v[z - j]);
        even_v[j] = 0.5 * (v[z + j] + v[z - j]);
    }
    odd_v[0] = 0.0;
    let odd = GridFunction::new(half.clone(), odd_v)?;
    let even = GridFunction::new(half.clone(), even_v)?;
    let g1 = discretize(GeneratorKind::G1, &half)?;
    let g2 = discretize(GeneratorKind::G2 { gamma }, &half)?;
    let o = evolve(&g1, &odd, t, dt, scheme)?.snapshots.pop().expect("snapshot");
    let e = evolve(&g2, &even, t, dt, scheme)?.snapshots.pop().expect("snapshot");
    let values = grid
        .nodes()
        .enumerate()
        .map(|(i, _)| {
            let (j, sign) = if i >= z { (i - z, 1.0) } else { (z - i, -1.0) };
            sign * o.at(j) + e.at(j)
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

#[derive(Clone, Debug, Serialize)]
pub struct LongtimeBlocks {
    pub x: Vec<f64>,
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub kstar: Vec<f64>,
    pub lstar: Vec<f64>,
    /// `max |½(odd k₁ + even k₂) - k*|` and the same for `ℓ*`.
    pub reconstruction_error: f64,
    /// `t` used for the semigroup check.
    pub horizon: f64,
    /// `‖e^{tG₁} 1 - k₁‖∞`, `‖e^{tG₂} 1 - k₂‖∞` at the horizon.
    pub g1_gap: f64,
    pub g2_gap: f64,
}

/// Half-line limits `k₁`, `k₂`, the reconstruction of `k*`, `ℓ*` on `[-b, b]`, and
/// the approach `e^{tG_i} 1 → k_i`.
pub fn longtime_blocks(b: f64, gamma: f64, h: f64, horizon: f64) -> Result<LongtimeBlocks> {
    let grid = Grid::new(-b, b, h)?;
    let p = LimitParams::new(-b, b, gamma)?;
    let x: Vec<f64> = grid.nodes().collect();
    let kstar: Vec<f64> = x.iter().map(|&x| k_star(x, &p)).collect();
    let lstar: Vec<f64> = x.iter().map(|&x| l_star(x, &p)).collect();
    let reconstruction_error = x
        .iter()
        .zip(kstar.iter().zip(&lstar))
        .map(|(&x, (ks, ls))| {
            (blocks_k_star(x, b, gamma) - ks)
                .abs()
                .max((blocks_l_star(x, b, gamma) - ls).abs())
        })
        .fold(0.0, f64::max);
    let half = Grid::half(b, h)?;
    let one = GridFunction::from_fn(&half, |_| 1.0);
    let mut one_g1 = one.clone();
    one_g1.values_mut()[0] = 0.0;
    let g1 = evolve(
        &discretize(GeneratorKind::G1, &half)?,
        &one_g1,
        horizon,
        h,
        Scheme::CrankNicolson,
    )?;
    let g2 = evolve(
        &discretize(GeneratorKind::G2 { gamma }, &half)?,
        &one,
        horizon,
        h,
        Scheme::CrankNicolson,
    )?;
    let k1v = GridFunction::from_fn(&half, |x| k1(x, b));
    let k2v = GridFunction::from_fn(&half, |x| k2(x, b, gamma));
    Ok(LongtimeBlocks {
        g1_gap: g1.last().sup_distance(&k1v),
        g2_gap: g2.last().sup_distance(&k2v),
        x,
        k1: k1v.into_values(),
        k2: k2v.into_values(),
        kstar,
        lstar,
        reconstruction_error,
        horizon,
    })
}

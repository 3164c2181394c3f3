//! Eigenfunctions `k_ε`, `ℓ_ε` of `½ d²/dx² - c_ε` as fixed points of the
//! Volterra maps
//!
//! ```text
//! T f(x) = x - a + 2 ∫_a^x ∫_a^y (λ + c_ε(z)) f(z) dz dy
//! S f(x) = b - x + 2 ∫_x^b ∫_y^b (λ + c_ε(z)) f(z) dz dy
//! ```
//!
//! iterated in exponentially weighted sup-norms where both are contractions
//! with a constant that does not depend on `ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{param, LabError, Result};
use crate::grid::{cumulative_trapezoid, cumulative_trapezoid_rev, Grid, GridFunction};
use crate::kernel::ScaledKernel;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

/// Which end of `[a, b]` carries weight one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Anchor {
    /// weight `e^{-ω(x-a)}`, the natural norm for `T`
    Left,
    /// weight `e^{ω(x-b)}`, the natural norm for `S`
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BieleckiNorm {
    pub omega: f64,
    pub anchor: Anchor,
}

impl BieleckiNorm {
    pub fn left(omega: f64) -> Self {
        Self {
            omega,
            anchor: Anchor::Left,
        }
    }

    pub fn right(omega: f64) -> Self {
        Self {
            omega,
            anchor: Anchor::Right,
        }
    }

    fn weight(&self, grid: &Grid, x: f64) -> f64 {
        match self.anchor {
            Anchor::Left => (-self.omega * (x - grid.a())).exp(),
            Anchor::Right => (self.omega * (x - grid.b())).exp(),
        }
    }

    fn eval(&self, grid: &Grid, values: &[f64]) -> f64 {
        grid.nodes()
            .zip(values)
            .fold(0.0, |m, (x, v)| m.max(self.weight(grid, x) * v.abs()))
    }
}

pub fn bielecki_norm(f: &GridFunction, norm: BieleckiNorm) -> f64 {
    norm.eval(f.grid(), f.values())
}

/// `ω = max(4√λ, 8γ, 1)` and the resulting Lipschitz bound `2(λ/ω² + γ/ω) ≤ 3/8`.
pub fn choose_omega(lambda: f64, gamma: f64) -> (f64, f64) {
    let omega = (4.0 * lambda.sqrt()).max(8.0 * gamma).max(1.0);
    (omega, contraction_bound(lambda, gamma, omega))
}

pub fn contraction_bound(lambda: f64, gamma: f64, omega: f64) -> f64 {
    2.0 * (lambda / (omega * omega) + gamma / omega)
}

/// `λ + c_ε` sampled on a grid, with both Volterra maps.
struct Volterra {
    grid: Grid,
    potential: Vec<f64>,
}

impl Volterra {
    fn new(grid: &Grid, kernel: &ScaledKernel, lambda: f64) -> Result<Self> {
        kernel.check_resolution(grid.h())?;
        Ok(Self {
            grid: grid.clone(),
            potential: grid.nodes().map(|x| lambda + kernel.eval(x)).collect(),
        })
    }

    fn weighted(&self, f: &[f64]) -> Vec<f64> {
        self.potential.iter().zip(f).map(|(q, v)| q * v).collect()
    }

    /// `T f` together with `(T f)' = 1 + 2 ∫_a^x (λ + c) f`.
    fn forward(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h();
        let inner = cumulative_trapezoid(&self.weighted(f), h);
        let outer = cumulative_trapezoid(&inner, h);
        let a = self.grid.a();
        let value = self.grid.nodes().zip(&outer).map(|(x, o)| x - a + 2.0 * o).collect();
        let slope = inner.iter().map(|i| 1.0 + 2.0 * i).collect();
        (value, slope)
    }

    /// `S f` together with `(S f)' = -1 - 2 ∫_x^b (λ + c) f`.
    fn backward(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h();
        let inner = cumulative_trapezoid_rev(&self.weighted(f), h);
        let outer = cumulative_trapezoid_rev(&inner, h);
        let b = self.grid.b();
        let value = self.grid.nodes().zip(&outer).map(|(x, o)| b - x + 2.0 * o).collect();
        let slope = inner.iter().map(|i| -1.0 - 2.0 * i).collect();
        (value, slope)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(param("lambda", format!("must be nonnegative and finite, got {lambda}")))
    }
}

/// One application of `T`.
pub fn apply_t(f: &GridFunction, kernel: &ScaledKernel, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    let op = Volterra::new(f.grid(), kernel, lambda)?;
    GridFunction::new(f.grid().clone(), op.forward(f.values()).0)
}

/// One application of `S`.
pub fn apply_s(f: &GridFunction, kernel: &ScaledKernel, lambda: f64) -> Result<GridFunction> {
    check_lambda(lambda)?;
    let op = Volterra::new(f.grid(), kernel, lambda)?;
    GridFunction::new(f.grid().clone(), op.backward(f.values()).0)
}

#[derive(Clone, Debug)]
pub struct PairOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Upper bound on the internal solve step; the output grid is recovered by
    /// keeping every m-th node.
    pub fine_step: Option<f64>,
}

impl Default for PairOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iterations: MAX_ITERATIONS,
            fine_step: None,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PairDiagnostics {
    pub omega: f64,
    pub contraction_bound: f64,
    pub k_iterations: usize,
    pub l_iterations: usize,
    /// Largest ratio of successive weighted Picard increments.
    pub max_step_ratio: f64,
    pub step_ratios_k: Vec<f64>,
    pub step_ratios_l: Vec<f64>,
    /// `max |u - W| / |W|` over the solve nodes, `u = k'ℓ - kℓ'`.
    pub wronskian_spread: f64,
    pub l_at_a: f64,
    pub k_at_b: f64,
    /// One-sided second-order estimate of `k'(a)`.
    pub k_slope_at_a: f64,
    pub fixed_point_residual: f64,
    pub solve_step: f64,
}

/// The λ-eigenfunctions `k` (vanishing at `a`) and `ℓ` (vanishing at `b`).
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub lambda: f64,
    pub k: GridFunction,
    pub l: GridFunction,
    pub wronskian: f64,
    pub diagnostics: PairDiagnostics,
}

impl EigenPair {
    /// Relative disagreement between `W`, `ℓ(a)` and `k(b)`, and the spread of `u` over nodes.
    pub fn wronskian_deviation(&self) -> f64 {
        let d = &self.diagnostics;
        let w = self.wronskian.abs();
        d.wronskian_spread
            .max((d.l_at_a - self.wronskian).abs() / w)
            .max((d.k_at_b - self.wronskian).abs() / w)
    }
}

pub fn solve_pair(grid: &Grid, kernel: &ScaledKernel, lambda: f64, tol: f64) -> Result<EigenPair> {
    solve_pair_with(
        grid,
        kernel,
        lambda,
        &PairOptions {
            tol,
            ..PairOptions::default()
        },
    )
}

struct Iterated {
    value: Vec<f64>,
    slope: Vec<f64>,
    iterations: usize,
    ratios: Vec<f64>,
    residual: f64,
}

fn iterate(
    map: impl Fn(&[f64]) -> (Vec<f64>, Vec<f64>),
    start: Vec<f64>,
    norm: BieleckiNorm,
    grid: &Grid,
    opts: &PairOptions,
) -> Result<Iterated> {
    let mut current = start;
    let mut ratios = Vec::new();
    let mut previous: Option<f64> = None;
    for it in 1..=opts.max_iterations {
        let (next, _) = map(&current);
        let diff: Vec<f64> = next.iter().zip(&current).map(|(u, v)| u - v).collect();
        let increment = norm.eval(grid, &diff);
        let sup_increment = diff.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let sup_next = next.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        if let Some(p) = previous.filter(|p| *p > 0.0) {
            ratios.push(increment / p);
        }
        previous = Some(increment);
        current = next;
        // The weighted increment alone can hide errors of order tol * e^{ω(b-a)}
        // at the far end, so the relative sup increment must be small too.
        if increment < opts.tol && sup_increment < opts.tol * sup_next {
            let (again, slope) = map(&current);
            let residual = again
                .iter()
                .zip(&current)
                .fold(0.0_f64, |m, (u, v)| m.max((u - v).abs()));
            return Ok(Iterated {
                value: current,
                slope,
                iterations: it,
                ratios,
                residual,
            });
        }
    }
    Err(LabError::Contraction {
        iterations: opts.max_iterations,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
    })
}

/// Picard-iterate `T` and `S` from `x - a` and `b - x` until the weighted
/// increment drops below `opts.tol`, then verify the pair.
pub fn solve_pair_with(grid: &Grid, kernel: &ScaledKernel, lambda: f64, opts: &PairOptions) -> Result<EigenPair> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(param("lambda", format!("must be positive, got {lambda}")));
    }
    if !(opts.tol > 0.0 && opts.tol <= 1e-4) {
        return Err(param("tol", format!("must lie in (0, 1e-4], got {}", opts.tol)));
    }
    let h = grid.h();
    let target = opts.fine_step.unwrap_or(f64::INFINITY).min(kernel.required_step());
    let factor = if h > target { (h / target).ceil() as usize } else { 1 };
    let fine = grid.refine(factor);
    let op = Volterra::new(&fine, kernel, lambda)?;

    let (omega, bound) = choose_omega(lambda, kernel.gamma());
    let (a, b) = (fine.a(), fine.b());
    let k = iterate(
        |f| op.forward(f),
        fine.nodes().map(|x| x - a).collect(),
        BieleckiNorm::left(omega),
        &fine,
        opts,
    )?;
    let l = iterate(
        |f| op.backward(f),
        fine.nodes().map(|x| b - x).collect(),
        BieleckiNorm::right(omega),
        &fine,
        opts,
    )?;

    let scale = (omega * (b - a)).exp();
    let residual = k.residual.max(l.residual);
    if residual > 10.0 * opts.tol * scale {
        return Err(LabError::Contraction {
            iterations: k.iterations.max(l.iterations),
            ratio: residual / (opts.tol * scale),
        });
    }

    let u: Vec<f64> = (0..fine.len())
        .map(|i| k.slope[i] * l.value[i] - k.value[i] * l.slope[i])
        .collect();
    let wronskian = u.iter().sum::<f64>() / u.len() as f64;
    let spread = u.iter().fold(0.0_f64, |m, v| m.max((v - wronskian).abs())) / wronskian.abs();

    let hf = fine.h();
    let k_slope_at_a = crate::grid::stencil::first([k.value[0], k.value[1], k.value[2]], hf);
    let slope_tol = 10.0 * hf * (1.0 + 2.0 * (lambda + kernel.eval(a))) + 1e-9;
    if (k_slope_at_a - 1.0).abs() > slope_tol {
        return Err(LabError::InconsistentEigenpair {
            deviation: (k_slope_at_a - 1.0).abs(),
        });
    }

    let max_step_ratio = k.ratios.iter().chain(&l.ratios).fold(0.0_f64, |m, r| m.max(*r));
    let diagnostics = PairDiagnostics {
        omega,
        contraction_bound: bound,
        k_iterations: k.iterations,
        l_iterations: l.iterations,
        max_step_ratio,
        step_ratios_k: k.ratios,
        step_ratios_l: l.ratios,
        wronskian_spread: spread,
        l_at_a: l.value[0],
        k_at_b: k.value[fine.last()],
        k_slope_at_a,
        fixed_point_residual: residual,
        solve_step: hf,
    };
    let k_fine = GridFunction::new(fine.clone(), k.value)?;
    let l_fine = GridFunction::new(fine, l.value)?;
    Ok(EigenPair {
        lambda,
        k: k_fine.downsample(grid)?,
        l: l_fine.downsample(grid)?,
        wronskian,
        diagnostics,
    })
}

/// `‖T f - T g‖_ω / ‖f - g‖_ω` for random `f`, `g` drawn from `seed`, with
/// `ω` from [`choose_omega`]. Returns 0 when `f = g`.
pub fn measure_contraction(grid: &Grid, kernel: &ScaledKernel, lambda: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = GridFunction::from_fn(grid, |_| rng.gen_range(-1.0..1.0));
    let g = GridFunction::from_fn(grid, |_| rng.gen_range(-1.0..1.0));
    contraction_ratio(&f, &g, kernel, lambda)
}

/// The measured Lipschitz ratio of `T` on a specific pair of inputs.
pub fn contraction_ratio(f: &GridFunction, g: &GridFunction, kernel: &ScaledKernel, lambda: f64) -> Result<f64> {
    let (omega, _) = choose_omega(lambda, kernel.gamma());
    let norm = BieleckiNorm::left(omega);
    let denom = bielecki_norm(&f.zip_with(g, |u, v| u - v), norm);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let tf = apply_t(f, kernel, lambda)?;
    let tg = apply_t(g, kernel, lambda)?;
    Ok(bielecki_norm(&tf.zip_with(&tg, |u, v| u - v), norm) / denom)
}

//! Green-function resolvents. For an eigenpair `(k, ℓ)` of the relevant
//! operator at `λ`,
//!
//! ```text
//! R g = h + g(a)/((λ + c(a)) ℓ(a)) ℓ + g(b)/((λ + c(b)) k(b)) k
//! h(x) = 2ℓ(x)/ℓ(a) ∫_a^x k g + 2k(x)/k(b) ∫_x^b ℓ g
//! ```
//!
//! with `c = c_ε` for `A_ε` and `c = 0` (plus the interface condition at 0)
//! for the limit generator.

use serde::Serialize;

use crate::closedform::{k_limit, k_star, l_limit, l_star, LimitParams};
use crate::error::{param, LabError, Result};
use crate::grid::{cumulative_trapezoid, cumulative_trapezoid_rev, GridFunction};
use crate::kernel::ScaledKernel;
use crate::picard::{solve_pair, EigenPair, DEFAULT_TOL};

/// Largest tolerated relative Wronskian inconsistency of an eigenpair.
pub const MAX_WRONSKIAN_DEVIATION: f64 = 1e-3;

/// Deviations from the boundary and interface conditions of the generator domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// `|f''(a)|`
    pub second_at_a: f64,
    /// `|f''(b)|`
    pub second_at_b: f64,
    /// `|f''(0+) - f''(0-)|`, only for the limit generator
    pub second_jump: Option<f64>,
    /// `|f'(0+) - f'(0-) - 2γ f(0)|`, only for the limit generator
    pub flux_defect: Option<f64>,
}

impl BoundaryReport {
    pub fn max_defect(&self) -> f64 {
        self.second_at_a
            .max(self.second_at_b)
            .max(self.second_jump.unwrap_or(0.0))
            .max(self.flux_defect.unwrap_or(0.0))
    }
}

#[derive(Clone, Debug)]
pub struct ResolventResult {
    pub f: GridFunction,
    pub lambda: f64,
    /// `max |λf - ½f'' + c f - g|` over interior nodes away from kernel jumps
    /// and from the interface node.
    pub residual_sup: f64,
    /// `residual_sup / h²`.
    pub residual_constant: f64,
    /// Pointwise residuals; zero at the nodes excluded from `residual_sup`.
    pub residuals: Vec<f64>,
    pub boundary: BoundaryReport,
}

/// Applies the Green-function formula; `c_a`, `c_b` are the intensities at the ends.
fn assemble(g: &GridFunction, k: &GridFunction, l: &GridFunction, lambda: f64, c_a: f64, c_b: f64) -> GridFunction {
    let h = g.grid().h();
    let kg: Vec<f64> = k.values().iter().zip(g.values()).map(|(u, v)| u * v).collect();
    let lg: Vec<f64> = l.values().iter().zip(g.values()).map(|(u, v)| u * v).collect();
    let left = cumulative_trapezoid(&kg, h);
    let right = cumulative_trapezoid_rev(&lg, h);
    let l_a = l.first();
    let k_b = k.last();
    let end_a = g.first() / ((lambda + c_a) * l_a);
    let end_b = g.last() / ((lambda + c_b) * k_b);
    let values = (0..g.grid().len())
        .map(|i| {
            let (ki, li) = (k.at(i), l.at(i));
            2.0 * li / l_a * left[i] + 2.0 * ki / k_b * right[i] + end_a * li + end_b * ki
        })
        .collect();
    GridFunction::new(g.grid().clone(), values).expect("same grid")
}

fn residual(
    f: &GridFunction,
    g: &GridFunction,
    lambda: f64,
    potential: impl Fn(f64) -> f64,
    skip: impl Fn(f64) -> bool,
) -> Vec<f64> {
    let grid = f.grid();
    (0..grid.len())
        .map(|i| {
            let x = grid.x(i);
            if i == 0 || i == grid.last() || skip(x) {
                0.0
            } else {
                lambda * f.at(i) - 0.5 * f.central_second(i) + potential(x) * f.at(i) - g.at(i)
            }
        })
        .collect()
}

fn sup(r: &[f64]) -> f64 {
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn check_positive_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(param("lambda", format!("must be positive, got {lambda}")))
    }
}

/// `R(λ, A_ε) g`.
pub fn resolvent_eps(g: &GridFunction, lambda: f64, kernel: &ScaledKernel) -> Result<ResolventResult> {
    check_positive_lambda(lambda)?;
    let pair = solve_pair(g.grid(), kernel, lambda, DEFAULT_TOL)?;
    resolvent_eps_with_pair(g, &pair, kernel)
}

/// `R(λ, A_ε) g` from an already solved eigenpair on the same grid.
pub fn resolvent_eps_with_pair(g: &GridFunction, pair: &EigenPair, kernel: &ScaledKernel) -> Result<ResolventResult> {
    let deviation = pair.wronskian_deviation();
    if !(deviation <= MAX_WRONSKIAN_DEVIATION) {
        return Err(LabError::InconsistentEigenpair { deviation });
    }
    if !pair.k.grid().same_nodes(g.grid()) {
        return Err(LabError::Grid("eigenpair and data live on different grids".into()));
    }
    let grid = g.grid();
    let lambda = pair.lambda;
    let f = assemble(
        g,
        &pair.k,
        &pair.l,
        lambda,
        kernel.eval(grid.a()),
        kernel.eval(grid.b()),
    );
    let h = grid.h();
    let breaks = kernel.breakpoints();
    let near_jump = |x: f64| breaks.iter().any(|p| (x - p).abs() < 2.0 * h);
    let residuals = residual(&f, g, lambda, |x| kernel.eval(x), near_jump);
    let residual_sup = sup(&residuals);
    let last = grid.last();
    let boundary = BoundaryReport {
        second_at_a: f.right_second(0).abs(),
        second_at_b: f.left_second(last).abs(),
        second_jump: None,
        flux_defect: None,
    };
    Ok(ResolventResult {
        f,
        lambda,
        residual_sup,
        residual_constant: residual_sup / (h * h),
        residuals,
        boundary,
    })
}

/// The closed-form eigenpair of the limit generator sampled on `g`'s grid.
pub fn limit_pair(grid: &crate::grid::Grid, p: &LimitParams) -> (GridFunction, GridFunction) {
    (
        GridFunction::from_fn(grid, |x| k_limit(x, p)),
        GridFunction::from_fn(grid, |x| l_limit(x, p)),
    )
}

/// `R_λ g` for the limit generator, with `λ = p.lambda`.
pub fn resolvent_limit(g: &GridFunction, p: &LimitParams) -> Result<ResolventResult> {
    check_positive_lambda(p.lambda)?;
    check_interval(g, p)?;
    let grid = g.grid();
    let (k, l) = limit_pair(grid, p);
    let f = assemble(g, &k, &l, p.lambda, 0.0, 0.0);
    let h = grid.h();
    let residuals = residual(&f, g, p.lambda, |_| 0.0, |x| x == 0.0);
    let residual_sup = sup(&residuals);
    let boundary = check_domain(&f, p.gamma);
    Ok(ResolventResult {
        f,
        lambda: p.lambda,
        residual_sup,
        residual_constant: residual_sup / (h * h),
        residuals,
        boundary,
    })
}

fn check_interval(g: &GridFunction, p: &LimitParams) -> Result<()> {
    let grid = g.grid();
    if (grid.a() - p.a).abs() > 1e-12 || (grid.b() - p.b).abs() > 1e-12 {
        return Err(LabError::Grid(format!(
            "grid covers [{}, {}] but parameters describe [{}, {}]",
            grid.a(),
            grid.b(),
            p.a,
            p.b
        )));
    }
    Ok(())
}

/// One-sided second-order stencils at `a`, `b` and `0±`.
pub fn check_domain(f: &GridFunction, gamma: f64) -> BoundaryReport {
    let grid = f.grid();
    let z = grid.zero_index();
    let last = grid.last();
    let jump = f.right_derivative(z) - f.left_derivative(z);
    BoundaryReport {
        second_at_a: f.right_second(0).abs(),
        second_at_b: f.left_second(last).abs(),
        second_jump: Some((f.right_second(z) - f.left_second(z)).abs()),
        flux_defect: Some((jump - 2.0 * gamma * f.at_zero()).abs()),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LambdaLimit {
    pub lambdas: Vec<f64>,
    /// `sup |λ R_λ g - (g(a) ℓ* + g(b) k*)|` for each λ.
    pub errors: Vec<f64>,
    /// `λ R_λ g` at the smallest λ.
    #[serde(skip)]
    pub limit: GridFunction,
    /// `error(last) < error(first)`.
    pub approaches: bool,
}

/// `λ R_λ g` along a decreasing λ sequence, compared with `g(a) ℓ* + g(b) k*`.
pub fn lambda_to_zero_limit(g: &GridFunction, p: &LimitParams, lambdas: &[f64]) -> Result<LambdaLimit> {
    if lambdas.is_empty() {
        return Err(param("lambdas", "need at least one value"));
    }
    if lambdas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(param("lambdas", "must be strictly decreasing"));
    }
    let (ga, gb) = (g.first(), g.last());
    let target = GridFunction::from_fn(g.grid(), |x| ga * l_star(x, p) + gb * k_star(x, p));
    let mut errors = Vec::with_capacity(lambdas.len());
    let mut limit = None;
    for &lambda in lambdas {
        let q = p.with_lambda(lambda)?;
        let scaled = resolvent_limit(g, &q)?.f.map(|_, v| lambda * v);
        errors.push(scaled.sup_distance(&target));
        limit = Some(scaled);
    }
    let approaches = errors.len() < 2 || errors[errors.len() - 1] < errors[0];
    Ok(LambdaLimit {
        lambdas: lambdas.to_vec(),
        errors,
        limit: limit.expect("nonempty"),
        approaches,
    })
}

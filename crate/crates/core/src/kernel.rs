//! Killing intensities `c`, their concentrations `c_ε(x) = c(x/ε)/ε`, and the
//! total mass `γ = ∫ c`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, LabError, Result};

/// Gaussian profiles are cut off at this many standard widths.
pub const GAUSSIAN_CUTOFF: f64 = 12.0;

const MAX_DEPTH: usize = 50;

/// Declarative kernel description, as it appears in experiment configs:
/// `{"kind": "box", "params": {"half_width": 1.0, "height": 1.0}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum KernelSpec {
    /// `height` on `[-half_width, half_width]`.
    Box {
        #[serde(default = "one")]
        half_width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// `height * max(0, 1 - |x|/half_width)`.
    Triangle {
        #[serde(default = "one")]
        half_width: f64,
        #[serde(default = "one")]
        height: f64,
    },
    /// `scale * exp(-x^2 / (2 sigma^2))`, truncated at 12 sigma.
    Gaussian {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Linear interpolation of tabulated samples, zero outside the table.
    Table { xs: Vec<f64>, values: Vec<f64> },
    /// No killing at all (`γ = 0`).
    None,
}

fn one() -> f64 {
    1.0
}

impl KernelSpec {
    pub fn unit_box() -> Self {
        KernelSpec::Box {
            half_width: 1.0,
            height: 1.0,
        }
    }

    pub fn unit_triangle() -> Self {
        KernelSpec::Triangle {
            half_width: 1.0,
            height: 1.0,
        }
    }

    pub fn unit_gaussian() -> Self {
        KernelSpec::Gaussian { sigma: 1.0, scale: 1.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Box { .. } => "box",
            KernelSpec::Triangle { .. } => "triangle",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Table { .. } => "table",
            KernelSpec::None => "none",
        }
    }

    /// Same shape rescaled so that its mass equals `gamma`.
    pub fn with_mass(self, gamma: f64) -> Result<Self> {
        let kernel = KillingKernel::new(self)?;
        if kernel.gamma() == 0.0 {
            return if gamma == 0.0 {
                Ok(kernel.spec)
            } else {
                Err(param("gamma", "cannot rescale a kernel of zero mass"))
            };
        }
        let r = gamma / kernel.gamma();
        Ok(match kernel.spec {
            KernelSpec::Box { half_width, height } => KernelSpec::Box {
                half_width,
                height: height * r,
            },
            KernelSpec::Triangle { half_width, height } => KernelSpec::Triangle {
                half_width,
                height: height * r,
            },
            KernelSpec::Gaussian { sigma, scale } => KernelSpec::Gaussian {
                sigma,
                scale: scale * r,
            },
            KernelSpec::Table { xs, values } => KernelSpec::Table {
                xs,
                values: values.into_iter().map(|v| v * r).collect(),
            },
            KernelSpec::None => KernelSpec::None,
        })
    }

    fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(name, format!("must be positive and finite, got {v}")))
            }
        };
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(param(name, format!("must be nonnegative and finite, got {v}")))
            }
        };
        match self {
            KernelSpec::Box { half_width, height } | KernelSpec::Triangle { half_width, height } => {
                positive("half_width", *half_width)?;
                nonneg("height", *height)
            }
            KernelSpec::Gaussian { sigma, scale } => {
                positive("sigma", *sigma)?;
                nonneg("scale", *scale)
            }
            KernelSpec::Table { xs, values } => {
                if xs.len() < 2 || xs.len() != values.len() {
                    return Err(param("table", "need at least two (x, value) samples of equal length"));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(param("table", "abscissae must be strictly increasing"));
                }
                values.iter().try_for_each(|&v| nonneg("table value", v))
            }
            KernelSpec::None => Ok(()),
        }
    }

    fn profile(&self, x: f64) -> f64 {
        match self {
            KernelSpec::Box { half_width, height } => {
                let ax = x.abs();
                if ax < *half_width {
                    *height
                } else if ax == *half_width {
                    // mean of the one-sided limits, so trapezoid sums with a node on the
                    // jump carry the exact mass
                    0.5 * height
                } else {
                    0.0
                }
            }
            KernelSpec::Triangle { half_width, height } => height * (1.0 - x.abs() / half_width).max(0.0),
            KernelSpec::Gaussian { sigma, scale } => {
                let z = x / sigma;
                if z.abs() > GAUSSIAN_CUTOFF {
                    0.0
                } else {
                    scale * (-0.5 * z * z).exp()
                }
            }
            KernelSpec::Table { xs, values } => {
                let n = xs.len();
                if x < xs[0] || x > xs[n - 1] {
                    return 0.0;
                }
                let j = xs.partition_point(|&t| t <= x).clamp(1, n - 1);
                let (x0, x1) = (xs[j - 1], xs[j]);
                let t = (x - x0) / (x1 - x0);
                values[j - 1] + t * (values[j] - values[j - 1])
            }
            KernelSpec::None => 0.0,
        }
    }

    fn support_radius(&self) -> f64 {
        match self {
            KernelSpec::Box { half_width, .. } | KernelSpec::Triangle { half_width, .. } => *half_width,
            KernelSpec::Gaussian { sigma, .. } => GAUSSIAN_CUTOFF * sigma,
            KernelSpec::Table { xs, .. } => xs[0].abs().max(xs[xs.len() - 1].abs()),
            KernelSpec::None => f64::INFINITY,
        }
    }

    /// Points where the profile is not smooth, sorted.
    fn breakpoints(&self) -> Vec<f64> {
        match self {
            KernelSpec::Box { half_width, .. } => vec![-half_width, *half_width],
            KernelSpec::Triangle { half_width, .. } => vec![-half_width, 0.0, *half_width],
            KernelSpec::Gaussian { sigma, .. } => vec![-GAUSSIAN_CUTOFF * sigma, GAUSSIAN_CUTOFF * sigma],
            KernelSpec::Table { xs, .. } => xs.clone(),
            KernelSpec::None => Vec::new(),
        }
    }
}

/// A validated killing intensity with its cached mass `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct KillingKernel {
    spec: KernelSpec,
    support_radius: f64,
    mass_gamma: f64,
}

impl KillingKernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        spec.validate()?;
        let support_radius = spec.support_radius();
        let mut kernel = Self {
            spec,
            support_radius,
            mass_gamma: 0.0,
        };
        kernel.mass_gamma = mass(&kernel, 1e-12)?;
        Ok(kernel)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn profile(&self, x: f64) -> f64 {
        self.spec.profile(x)
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn gamma(&self) -> f64 {
        self.mass_gamma
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.spec.breakpoints()
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec, KernelSpec::None) || self.mass_gamma == 0.0
    }

    pub fn scaled(self, epsilon: f64) -> Result<ScaledKernel> {
        ScaledKernel::new(Arc::new(self), epsilon)
    }
}

/// `c_ε(x) = ε⁻¹ c(ε⁻¹ x)` for a fixed `ε ∈ (0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledKernel {
    base: Arc<KillingKernel>,
    epsilon: f64,
}

impl ScaledKernel {
    pub fn new(base: Arc<KillingKernel>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(param("epsilon", format!("must lie in (0, 1], got {epsilon}")));
        }
        Ok(Self { base, epsilon })
    }

    /// Shorthand for building a kernel from a spec and scaling it.
    pub fn from_spec(spec: KernelSpec, epsilon: f64) -> Result<Self> {
        KillingKernel::new(spec)?.scaled(epsilon)
    }

    /// The zero intensity.
    pub fn zero() -> Self {
        Self {
            base: Arc::new(KillingKernel {
                spec: KernelSpec::None,
                support_radius: f64::INFINITY,
                mass_gamma: 0.0,
            }),
            epsilon: 1.0,
        }
    }

    pub fn base(&self) -> &KillingKernel {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.base.mass_gamma
    }

    pub fn is_zero(&self) -> bool {
        self.base.is_zero()
    }

    pub fn eval(&self, x: f64) -> f64 {
        scaled_eval(self, x)
    }

    pub fn support_radius(&self) -> f64 {
        self.epsilon * self.base.support_radius
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints().into_iter().map(|p| p * self.epsilon).collect()
    }

    /// Largest grid step that resolves the concentrated profile.
    pub fn required_step(&self) -> f64 {
        if self.is_zero() {
            f64::INFINITY
        } else {
            self.support_radius() / 10.0
        }
    }

    pub fn check_resolution(&self, h: f64) -> Result<()> {
        let required = self.required_step();
        if h > required * (1.0 + 1e-9) {
            Err(LabError::Resolution { h, required })
        } else {
            Ok(())
        }
    }

    /// Independent quadrature of `c_ε` over its own support.
    pub fn mass_quadrature(&self, rel_tol: f64) -> Result<f64> {
        integrate_pieces(|x| self.eval(x), &self.breakpoints(), rel_tol, self.base.spec.name())
    }
}

/// `ε⁻¹ c(ε⁻¹ x)`.
pub fn scaled_eval(kernel: &ScaledKernel, x: f64) -> f64 {
    kernel.base.profile(x / kernel.epsilon) / kernel.epsilon
}

/// `γ = ∫ c`, by adaptive Simpson between the profile's breakpoints.
pub fn mass(kernel: &KillingKernel, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-4) {
        return Err(param("rel_tol", format!("must lie in (0, 1e-4], got {rel_tol}")));
    }
    if matches!(kernel.spec, KernelSpec::None) {
        return Ok(0.0);
    }
    integrate_pieces(
        |x| kernel.profile(x),
        &kernel.breakpoints(),
        rel_tol,
        kernel.spec.name(),
    )
}

fn integrate_pieces(f: impl Fn(f64) -> f64, breaks: &[f64], rel_tol: f64, name: &str) -> Result<f64> {
    if breaks.len() < 2 {
        return Ok(0.0);
    }
    // Piece endpoints are evaluated one ulp inside, so jump values never leak
    // into a neighbouring piece.
    let pieces: Vec<(f64, f64)> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1]))
        .collect();
    let scale: f64 = pieces
        .iter()
        .map(|&(lo, hi)| {
            let m = 0.5 * (lo + hi);
            (hi - lo) * (f(lo.next_up()) + 4.0 * f(m) + f(hi.next_down())).abs() / 6.0
        })
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    for &(lo, hi) in &pieces {
        let tol = rel_tol * scale * (hi - lo) / (breaks[breaks.len() - 1] - breaks[0]);
        total += simpson_piece(&f, lo, hi, tol).ok_or_else(|| LabError::Quadrature {
            kernel: name.to_string(),
            depth: MAX_DEPTH,
            estimate: total,
        })?;
    }
    Ok(total)
}

fn simpson_piece(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    let flo = f(lo.next_up());
    let fhi = f(hi.next_down());
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    let whole = (hi - lo) * (flo + 4.0 * fm + fhi) / 6.0;
    simpson_rec(f, lo, hi, flo, fm, fhi, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    flo: f64,
    fm: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Option<f64> {
    let mid = 0.5 * (lo + hi);
    let lm = 0.5 * (lo + mid);
    let rm = 0.5 * (mid + hi);
    let flm = f(lm);
    let frm = f(rm);
    let left = (mid - lo) * (flo + 4.0 * flm + fm) / 6.0;
    let right = (hi - mid) * (fm + 4.0 * frm + fhi) / 6.0;
    let delta = left + right - whole;
    // Minimum depth guards against a coarse panel that happens to straddle the profile.
    if depth >= 4 && delta.abs() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return None;
    }
    Some(
        simpson_rec(f, lo, mid, flo, flm, fm, left, 0.5 * tol, depth + 1)?
            + simpson_rec(f, mid, hi, fm, frm, fhi, right, 0.5 * tol, depth + 1)?,
    )
}

//! Numerical laboratory for Brownian motion on `[a, b]` killed at rate
//! `c_ε(x) = ε⁻¹c(ε⁻¹x)` and its `ε → 0` limit, in which killing happens
//! through the local time at 0 and the generator `½ d²/dx²` acquires the
//! interface condition `f'(0+) - f'(0-) = 2γ f(0)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grid;
pub mod kernel;
pub mod montecarlo;
pub mod picard;
pub mod resolvent;

pub use error::{LabError, Result};
pub use grid::{Grid, GridFunction};
pub use kernel::{KernelSpec, KillingKernel, ScaledKernel};

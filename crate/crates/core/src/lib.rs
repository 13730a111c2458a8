//! Numerical solvers for the generalized Kazdan-Warner equation
//!
//! ```text
//! Δu − ⟨du, θ⟩ − S − A·e^{αu} + B·e^{−βu} = 0
//! ```
//!
//! on unit-volume flat tori, with a divergence-free drift θ. Three independent
//! routes to the unique solution are provided (parabolic flow, damped Newton,
//! monotone sub/supersolution iteration) together with checks of the explicit
//! a-priori bounds any solution must satisfy.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod elliptic;
pub mod error;
pub mod estimates;
pub mod flow;
pub mod manifold;
pub mod problem;

pub use error::{KwError, Result};

//! Variational solver for singular semilinear elliptic equations
//!
//! ```text
//! -Δ_g u + V(x) u = f(x,u) + g(x,u²) u
//! ```
//!
//! on discretized closed tori: ε-regularization, mountain-pass min-max,
//! continuation `ε → 0`, and numerical checks of the inequalities behind the
//! existence argument.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod fieldio;
pub mod functional;
pub mod krylov;
pub mod manifold;
pub mod mountainpass;
pub mod nonlinearity;
pub mod random;
pub mod sum;
pub mod table;

pub use constants::{compute_constants, ConstantsConfig, ConstantsReport};
pub use continuation::{run_continuation, ContinuationConfig, ContinuationResult, Schedule};
pub use error::{Error, Result};
pub use functional::{EnergyBreakdown, Problem};
pub use manifold::{build_torus, build_torus_with_scheme, Field, ManifoldGrid, Scheme};
pub use mountainpass::{solve_mountain_pass, MpConfig, MpResult, MpStatus};
pub use nonlinearity::{
    check_assumptions, make_em_family, make_hebey_family, make_power_family, make_table_family, AssumptionReport,
    Hypothesis, NonlinearFamily, Verdict,
};

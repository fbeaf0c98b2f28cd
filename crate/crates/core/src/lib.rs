//! Numerical laboratory for degenerate elliptic regularity.
//!
//! The crate computes the objects that appear in weighted `W^{1,p}` theory for
//! `div[A(x)∇u] = div[F]` with `Λμ|ξ|² ≤ ⟨Aξ,ξ⟩ ≤ Λ⁻¹μ|ξ|²`:
//!
//! * [`geometry`]: uniform grids, balls, ball families and deterministic quadrature.
//! * [`weights`]: sampled Muckenhoupt characteristics, doubling and reverse Hölder
//!   checks, closed forms for power weights `|x|^α`.
//! * [`oscillation`]: weighted BMO seminorms and the coefficient class test.
//! * [`maximal`]: the weighted Hardy–Littlewood maximal operator, level sets,
//!   distribution ladders and the good-λ iteration.
//! * [`fem`]: a P1 finite element solver for the degenerate Dirichlet problem.
//! * [`counterexample`]: the explicit solution `x₁/|x|^{2α}` and its integrability threshold.
//! * [`reifenberg`]: flatness profiles of discretized boundaries.
//!
//! Every supremum over "all balls" is approximated from below by a finite
//! [`geometry::BallFamily`]; reports label those values as sampled estimates.

pub mod counterexample;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod maximal;
pub mod numeric;
pub mod oscillation;
pub mod reifenberg;
pub mod weights;

pub use error::{Error, Result};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

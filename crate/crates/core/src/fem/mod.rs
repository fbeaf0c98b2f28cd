//! P1 finite elements for `div[A∇u] = div[F]` with `Λμ|ξ|² ≤ ⟨Aξ,ξ⟩ ≤ Λ⁻¹μ|ξ|²`.

mod assembly;
mod checks;
mod data;
mod mesh;
mod quadrature;
mod solver;

pub use assembly::*;
pub use checks::*;
pub use data::*;
pub use mesh::*;
pub use quadrature::*;
pub use solver::*;

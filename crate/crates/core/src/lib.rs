//! Augmented Lagrangian method for nonlinear semidefinite programs, together
//! with the projection calculus and second-order tools used to check its
//! local convergence behavior on small problems.
//!
//! Problems have the form
//!
//! ```text
//! minimize f(x)  subject to  h(x) = 0,  G(x) ⪰ 0
//! ```
//!
//! with `h: ℝᵖ → ℝᵐ` and `G: ℝᵖ → Sⁿ`. Multipliers are pairs `(y, Γ)` with
//! `Γ ⪯ 0`, and the Lagrangian is `f + ⟨y, h⟩ + ⟨Γ, G⟩`.

pub mod alm;
pub mod analysis;
pub mod cone;
pub mod error;
pub mod problem;
pub mod symmat;
pub mod varanalysis;
pub mod verify;

pub use alm::{AlmConfig, AlmStatus, AlmTrace, PenaltyPolicy};
pub use cone::KElement;
pub use error::{Error, Result};
pub use problem::{KktPoint, MultiplierSetModel, NlsdpProblem, Perturbation};
pub use symmat::{eig_sym, frobenius_inner, EigenDecomposition, Mat, SymMatrix};

//! The two registered test problems and their multiplier sets.
//!
//! "example-6.1" (`SingleCubic`):
//!
//! ```text
//! min ½x³  s.t.  −x²E₃₃ ⪰ 0
//! ```
//!
//! solved by `x = 0` with every `Γ ⪯ 0` a multiplier.
//!
//! "example-6.2" (`TwoBlock`), with variables `(t, x)`:
//!
//! ```text
//! min ½x² + 2t  s.t.  tA − x²I₂ ⪰ 0,  t ≥ 0,     A = [[1, −2], [−2, 1]]
//! ```
//!
//! The sign constraint is carried as a trailing 1×1 block, so the matrix
//! constraint is `Diag(tA − x²I₂, t) ∈ S³₊` and the sign multiplier is the
//! (3,3) entry of `Γ`.

use crate::cone::{project_nsd, KElement};
use crate::error::{Error, Result};
use crate::symmat::{frobenius_inner, EigenDecomposition, SymMatrix};

use super::{KktPoint, MultiplierSetModel, NlsdpProblem};

pub struct Fixture {
    pub name: &'static str,
    pub problem: Box<dyn NlsdpProblem>,
    pub model: Box<dyn MultiplierSetModel>,
    /// Solution with a reference multiplier on the relative boundary of the
    /// multiplier set.
    pub solution: KktPoint,
    pub default_start: KktPoint,
}

pub fn fixture_names() -> &'static [&'static str] {
    &["example-6.1", "example-6.2"]
}

pub fn fixture(name: &str) -> Result<Fixture> {
    match name {
        "example-6.1" => {
            let gbar = SymMatrix::from_diag(&[0.0, -1.0, -2.0]);
            let start_gamma = project_nsd(&(&gbar + &SymMatrix::identity(3).scaled(0.05)));
            Ok(Fixture {
                name: "example-6.1",
                problem: Box::new(SingleCubic),
                model: Box::new(SingleCubicMultipliers),
                solution: KktPoint::new(vec![0.0], KElement::new(vec![], gbar)),
                default_start: KktPoint::new(vec![0.1], KElement::new(vec![], start_gamma)),
            })
        }
        "example-6.2" => {
            let gbar = SymMatrix::from_diag(&[0.0, -1.0, -1.0]);
            Ok(Fixture {
                name: "example-6.2",
                problem: Box::new(TwoBlock),
                model: Box::new(TwoBlockMultipliers::default()),
                solution: KktPoint::new(vec![0.0, 0.0], KElement::new(vec![], gbar.clone())),
                default_start: KktPoint::new(vec![0.1, 0.1], KElement::new(vec![], gbar)),
            })
        }
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `min ½x³ s.t. −x²E₃₃ ⪰ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SingleCubic;

impl NlsdpProblem for SingleCubic {
    fn name(&self) -> &str {
        "example-6.1"
    }
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_g(&self) -> usize {
        3
    }
    fn f(&self, x: &[f64]) -> f64 {
        0.5 * x[0].powi(3)
    }
    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        vec![1.5 * x[0] * x[0]]
    }
    fn g(&self, x: &[f64]) -> SymMatrix {
        SymMatrix::from_diag(&[0.0, 0.0, -x[0] * x[0]])
    }
    fn dg(&self, x: &[f64], d: &[f64]) -> SymMatrix {
        SymMatrix::from_diag(&[0.0, 0.0, -2.0 * x[0] * d[0]])
    }
    fn dg_adj(&self, x: &[f64], gamma: &SymMatrix) -> Vec<f64> {
        vec![-2.0 * x[0] * gamma.get(2, 2)]
    }
    fn hess_lagrangian(&self, x: &[f64], lambda: &KElement, d: &[f64]) -> Vec<f64> {
        vec![(3.0 * x[0] - 2.0 * lambda.mat.get(2, 2)) * d[0]]
    }
}

/// The multiplier set `S³₋` of [`SingleCubic`] at `x = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SingleCubicMultipliers;

impl MultiplierSetModel for SingleCubicMultipliers {
    fn project(&self, lambda: &KElement) -> KElement {
        KElement::new(vec![], project_nsd(&lambda.mat))
    }

    fn contains(&self, lambda: &KElement, tol: f64) -> bool {
        EigenDecomposition::of(&lambda.mat)
            .map(|e| e.max_eigenvalue() <= tol)
            .unwrap_or(false)
    }

    /// Top eigenvalue set to zero and the rest clipped to be nonpositive,
    /// keeping the single zero eigenvalue of `Diag(0, −1, −2)`.
    fn restricted_project(&self, lambda: &KElement) -> Option<KElement> {
        let e = EigenDecomposition::of(&lambda.mat).ok()?;
        let top = e.max_eigenvalue();
        let m = e.spectral(|l| if l == top { 0.0 } else { l.min(0.0) });
        Some(KElement::new(vec![], m))
    }
}

fn coupling_matrix() -> SymMatrix {
    SymMatrix::from_rows(&[&[1.0, -2.0], &[-2.0, 1.0]]).expect("symmetric")
}

/// `min ½x² + 2t s.t. Diag(tA − x²I₂, t) ⪰ 0` in the variables `(t, x)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TwoBlock;

impl NlsdpProblem for TwoBlock {
    fn name(&self) -> &str {
        "example-6.2"
    }
    fn dim_x(&self) -> usize {
        2
    }
    fn dim_g(&self) -> usize {
        3
    }
    fn f(&self, z: &[f64]) -> f64 {
        0.5 * z[1] * z[1] + 2.0 * z[0]
    }
    fn grad_f(&self, z: &[f64]) -> Vec<f64> {
        vec![2.0, z[1]]
    }
    fn g(&self, z: &[f64]) -> SymMatrix {
        let (t, x) = (z[0], z[1]);
        let a = coupling_matrix();
        let top = &a.scaled(t) - &SymMatrix::identity(2).scaled(x * x);
        SymMatrix::block_diag(&[top, SymMatrix::from_diag(&[t])])
    }
    fn dg(&self, z: &[f64], d: &[f64]) -> SymMatrix {
        let a = coupling_matrix();
        let top = &a.scaled(d[0]) - &SymMatrix::identity(2).scaled(2.0 * z[1] * d[1]);
        SymMatrix::block_diag(&[top, SymMatrix::from_diag(&[d[0]])])
    }
    fn dg_adj(&self, z: &[f64], gamma: &SymMatrix) -> Vec<f64> {
        let top = gamma.submatrix(&[0, 1]);
        let at = frobenius_inner(&coupling_matrix(), &top).expect("2x2");
        vec![at + gamma.get(2, 2), -2.0 * z[1] * top.trace()]
    }
    fn hess_lagrangian(&self, _z: &[f64], lambda: &KElement, d: &[f64]) -> Vec<f64> {
        let tr = lambda.mat.get(0, 0) + lambda.mat.get(1, 1);
        vec![0.0, (1.0 - 2.0 * tr) * d[1]]
    }
}

/// Multiplier set of [`TwoBlock`] at `(0, 0)`:
/// `{Γ ∈ S³₋ : ⟨C, Γ⟩ = −2}` with `C = Diag(A, 1)`.
///
/// Projection alternates between the NSD cone and the hyperplane with
/// Dykstra's correction terms.
#[derive(Clone, Debug)]
pub struct TwoBlockMultipliers {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TwoBlockMultipliers {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200_000,
        }
    }
}

impl TwoBlockMultipliers {
    pub fn normal() -> SymMatrix {
        SymMatrix::block_diag(&[coupling_matrix(), SymMatrix::identity(1)])
    }

    pub const OFFSET: f64 = -2.0;

    fn project_hyperplane(z: &SymMatrix) -> SymMatrix {
        let c = Self::normal();
        let viol = frobenius_inner(&c, z).expect("3x3") - Self::OFFSET;
        let mut out = z.clone();
        out.axpy(-viol / c.frobenius_norm_sq(), &c);
        out
    }

    /// Projection of a 3×3 matrix onto the set, with the iteration count.
    pub fn project_matrix(&self, gamma: &SymMatrix) -> (SymMatrix, usize) {
        let n = gamma.n();
        let mut x = gamma.clone();
        let mut p = SymMatrix::zeros(n);
        let mut q = SymMatrix::zeros(n);
        for it in 1..=self.max_iter {
            let y = project_nsd(&(&x + &p));
            p = &(&x + &p) - &y;
            let xn = Self::project_hyperplane(&(&y + &q));
            q = &(&y + &q) - &xn;
            let step = (&xn - &x).frobenius_norm();
            let gap = (&y - &xn).frobenius_norm();
            x = xn;
            if step <= self.tol && gap <= self.tol {
                return (x, it);
            }
        }
        (x, self.max_iter)
    }

    /// Membership in the set as it reads on the 2×2 block alone:
    /// `Γ₂ ⪯ 0` and `⟨A, −Γ₂⟩ ≤ 2`.
    pub fn block_form_contains(gamma2: &SymMatrix, tol: f64) -> bool {
        let Ok(e) = EigenDecomposition::of(gamma2) else {
            return false;
        };
        let ag = frobenius_inner(&coupling_matrix(), gamma2).unwrap_or(f64::INFINITY);
        e.max_eigenvalue() <= tol && -ag <= 2.0 + tol
    }

    /// The sign multiplier determined by the 2×2 block through stationarity.
    pub fn sign_multiplier(gamma2: &SymMatrix) -> f64 {
        Self::OFFSET - frobenius_inner(&coupling_matrix(), gamma2).expect("2x2")
    }
}

impl MultiplierSetModel for TwoBlockMultipliers {
    fn project(&self, lambda: &KElement) -> KElement {
        KElement::new(vec![], self.project_matrix(&lambda.mat).0)
    }

    fn contains(&self, lambda: &KElement, tol: f64) -> bool {
        let Ok(e) = EigenDecomposition::of(&lambda.mat) else {
            return false;
        };
        let c = Self::normal();
        let viol = frobenius_inner(&c, &lambda.mat).unwrap_or(f64::INFINITY) - Self::OFFSET;
        e.max_eigenvalue() <= tol && viol.abs() <= tol * lambda.mat.frobenius_norm().max(1.0)
    }

    /// On the 2×2 block the top eigenvalue is set to zero and the other one
    /// clipped, as for `Diag(0, −1)`; the sign multiplier is then fixed by
    /// the hyperplane and the off-block entries are dropped.
    fn restricted_project(&self, lambda: &KElement) -> Option<KElement> {
        let top = lambda.mat.submatrix(&[0, 1]);
        let e = EigenDecomposition::of(&top).ok()?;
        let l = e.lambda().to_vec();
        let g2 = e.spectral(|v| if v == l[0] { 0.0 } else { v.min(0.0) });
        let y = Self::sign_multiplier(&g2);
        if y > 0.0 {
            return None;
        }
        Some(KElement::new(
            vec![],
            SymMatrix::block_diag(&[g2, SymMatrix::from_diag(&[y])]),
        ))
    }
}

//! Problem oracles, KKT points, residuals and multiplier-set models.

mod fixtures;
mod poly;

pub use fixtures::{
    fixture, fixture_names, Fixture, SingleCubic, SingleCubicMultipliers, TwoBlock,
    TwoBlockMultipliers,
};
pub use poly::PolyProblem;

use serde::{Deserialize, Serialize};

use crate::cone::{normal_cone_violation, project_k, KElement};
use crate::error::{Error, Result};
use crate::symmat::{frobenius_inner, SymMatrix};

/// Oracle bundle for `min f(x) s.t. h(x) = 0, G(x) ⪰ 0`.
///
/// Oracles must be pure functions of their arguments.
pub trait NlsdpProblem: Send + Sync {
    fn name(&self) -> &str;
    fn dim_x(&self) -> usize;
    /// Number of equality constraints.
    fn dim_h(&self) -> usize {
        0
    }
    /// Size of the matrix constraint.
    fn dim_g(&self) -> usize;

    fn f(&self, x: &[f64]) -> f64;
    fn grad_f(&self, x: &[f64]) -> Vec<f64>;

    fn h(&self, _x: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    /// `∇h(x)·d`.
    fn jac_h(&self, _x: &[f64], _d: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    /// `∇h(x)ᵀ·y`.
    fn jac_h_adj(&self, _x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim_x()]
    }

    fn g(&self, x: &[f64]) -> SymMatrix;
    /// `DG(x)[d]`.
    fn dg(&self, x: &[f64], d: &[f64]) -> SymMatrix;
    /// `DG(x)*[Γ]`.
    fn dg_adj(&self, x: &[f64], gamma: &SymMatrix) -> Vec<f64>;

    /// `∇²ₓₓL(x, λ)·d`.
    fn hess_lagrangian(&self, x: &[f64], lambda: &KElement, d: &[f64]) -> Vec<f64>;
}

/// Primal-dual point `(x, y, Γ)`; `lambda.vec` is `y`, `lambda.mat` is `Γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktPoint {
    pub x: Vec<f64>,
    pub lambda: KElement,
}

impl KktPoint {
    pub fn new(x: Vec<f64>, lambda: KElement) -> Self {
        Self { x, lambda }
    }

    pub fn y(&self) -> &[f64] {
        &self.lambda.vec
    }

    pub fn gamma(&self) -> &SymMatrix {
        &self.lambda.mat
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite()) && self.lambda.is_finite()
    }

    pub fn check_dims(&self, prob: &dyn NlsdpProblem) -> Result<()> {
        let checks = [
            (prob.dim_x(), self.x.len()),
            (prob.dim_h(), self.lambda.vec.len()),
            (prob.dim_g(), self.lambda.mat.n()),
        ];
        for (expected, found) in checks {
            if expected != found {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(())
    }
}

/// Right-hand-side shift `(a₁, a₂, b)` of the canonically perturbed problem
/// `min f(x) − ⟨a₁,x⟩ s.t. h(x) = a₂, G(x) − b ⪰ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub b: SymMatrix,
}

impl Perturbation {
    pub fn zero(prob: &dyn NlsdpProblem) -> Self {
        Self {
            a1: vec![0.0; prob.dim_x()],
            a2: vec![0.0; prob.dim_h()],
            b: SymMatrix::zeros(prob.dim_g()),
        }
    }

    pub fn norm(&self) -> f64 {
        (norm_sq(&self.a1) + norm_sq(&self.a2) + self.b.frobenius_norm_sq()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.a1.iter().chain(&self.a2).all(|v| v.is_finite()) && self.b.is_finite()
    }
}

/// The perturbed problem as an ordinary problem instance.
pub struct PerturbedProblem<'a> {
    base: &'a dyn NlsdpProblem,
    pert: Perturbation,
}

impl<'a> PerturbedProblem<'a> {
    pub fn new(base: &'a dyn NlsdpProblem, pert: Perturbation) -> Self {
        Self { base, pert }
    }
}

impl NlsdpProblem for PerturbedProblem<'_> {
    fn name(&self) -> &str {
        self.base.name()
    }
    fn dim_x(&self) -> usize {
        self.base.dim_x()
    }
    fn dim_h(&self) -> usize {
        self.base.dim_h()
    }
    fn dim_g(&self) -> usize {
        self.base.dim_g()
    }
    fn f(&self, x: &[f64]) -> f64 {
        self.base.f(x) - dot(&self.pert.a1, x)
    }
    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.base.grad_f(x);
        for (gi, ai) in g.iter_mut().zip(&self.pert.a1) {
            *gi -= ai;
        }
        g
    }
    fn h(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.base.h(x);
        for (hi, ai) in h.iter_mut().zip(&self.pert.a2) {
            *hi -= ai;
        }
        h
    }
    fn jac_h(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        self.base.jac_h(x, d)
    }
    fn jac_h_adj(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.base.jac_h_adj(x, y)
    }
    fn g(&self, x: &[f64]) -> SymMatrix {
        &self.base.g(x) - &self.pert.b
    }
    fn dg(&self, x: &[f64], d: &[f64]) -> SymMatrix {
        self.base.dg(x, d)
    }
    fn dg_adj(&self, x: &[f64], gamma: &SymMatrix) -> Vec<f64> {
        self.base.dg_adj(x, gamma)
    }
    fn hess_lagrangian(&self, x: &[f64], lambda: &KElement, d: &[f64]) -> Vec<f64> {
        self.base.hess_lagrangian(x, lambda, d)
    }
}

/// Exact or approximate description of the multiplier set at a solution.
pub trait MultiplierSetModel: Send + Sync {
    /// Euclidean projection onto the set.
    fn project(&self, lambda: &KElement) -> KElement;
    fn contains(&self, lambda: &KElement, tol: f64) -> bool;
    /// Nearby set element sharing the eigenvalue multiplicity pattern of the
    /// reference multiplier, when the model knows how to build one.
    fn restricted_project(&self, _lambda: &KElement) -> Option<KElement> {
        None
    }
    fn distance(&self, lambda: &KElement) -> f64 {
        lambda.distance(&self.project(lambda))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `Φ(x) = (h(x), G(x))`.
pub fn constraint_map(prob: &dyn NlsdpProblem, x: &[f64]) -> KElement {
    KElement::new(prob.h(x), prob.g(x))
}

/// `∇Φ(x)*[λ] = ∇h(x)ᵀy + DG(x)*[Γ]`.
pub fn constraint_adjoint(prob: &dyn NlsdpProblem, x: &[f64], lambda: &KElement) -> Vec<f64> {
    let mut v = prob.dg_adj(x, &lambda.mat);
    if prob.dim_h() > 0 {
        for (vi, wi) in v.iter_mut().zip(prob.jac_h_adj(x, &lambda.vec)) {
            *vi += wi;
        }
    }
    v
}

/// `f + ⟨y, h⟩ + ⟨Γ, G⟩`.
pub fn lagrangian_value(prob: &dyn NlsdpProblem, pt: &KktPoint) -> f64 {
    let phi = constraint_map(prob, &pt.x);
    prob.f(&pt.x) + phi.inner(&pt.lambda)
}

pub fn lagrangian_grad_x(prob: &dyn NlsdpProblem, pt: &KktPoint) -> Vec<f64> {
    let mut g = prob.grad_f(&pt.x);
    for (gi, ai) in g
        .iter_mut()
        .zip(constraint_adjoint(prob, &pt.x, &pt.lambda))
    {
        *gi += ai;
    }
    g
}

/// KKT residual `‖∇ₓL(x,λ)‖ + ‖Φ(x) − Π_K(Φ(x) + λ)‖`.
pub fn residual_r(prob: &dyn NlsdpProblem, pt: &KktPoint) -> f64 {
    let stat = norm(&lagrangian_grad_x(prob, pt));
    let phi = constraint_map(prob, &pt.x);
    let shifted = phi.add_scaled(1.0, &pt.lambda);
    stat + phi.distance(&project_k(&shifted))
}

/// Residual of the perturbed KKT system; zero exactly at its solutions.
pub fn perturbed_kkt_residual(prob: &dyn NlsdpProblem, pt: &KktPoint, pert: &Perturbation) -> f64 {
    let mut stat = lagrangian_grad_x(prob, pt);
    for (si, ai) in stat.iter_mut().zip(&pert.a1) {
        *si -= ai;
    }
    let h = prob.h(&pt.x);
    let hres: f64 = h
        .iter()
        .zip(&pert.a2)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let slack = &prob.g(&pt.x) - &pert.b;
    norm(&stat) + hres + normal_cone_violation(&slack, &pt.lambda.mat)
}

/// Report of the oracle-consistency checks on one problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCheck {
    pub adjoint_error: f64,
    pub grad_f_error: f64,
    pub jac_h_error: f64,
    pub dg_error: f64,
    pub hess_error: f64,
}

impl OracleCheck {
    pub fn max_error(&self) -> f64 {
        [
            self.adjoint_error,
            self.grad_f_error,
            self.jac_h_error,
            self.dg_error,
            self.hess_error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Adjoint identities and central finite differences of every oracle at `x`
/// along the directions `d` and multipliers `lambda`. Errors are relative to
/// `max(1, magnitude)`.
pub fn check_oracles(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    d: &[f64],
    lambda: &KElement,
    step: f64,
) -> Result<OracleCheck> {
    if x.len() != prob.dim_x() || d.len() != prob.dim_x() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim_x(),
            found: x.len().min(d.len()),
        });
    }
    let shift = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a + s * b).collect() };
    let xp = shift(step);
    let xm = shift(-step);
    let rel = |err: f64, scale: f64| err / scale.max(1.0);

    let dgd = prob.dg(x, d);
    let lhs = frobenius_inner(&dgd, &lambda.mat)?;
    let rhs = dot(d, &prob.dg_adj(x, &lambda.mat));
    let mut adjoint_error = rel((lhs - rhs).abs(), lhs.abs());
    if prob.dim_h() > 0 {
        let lhs = dot(&prob.jac_h(x, d), &lambda.vec);
        let rhs = dot(d, &prob.jac_h_adj(x, &lambda.vec));
        adjoint_error = adjoint_error.max(rel((lhs - rhs).abs(), lhs.abs()));
    }

    let fd = (prob.f(&xp) - prob.f(&xm)) / (2.0 * step);
    let an = dot(&prob.grad_f(x), d);
    let grad_f_error = rel((fd - an).abs(), an.abs());

    let jac_h_error = if prob.dim_h() > 0 {
        let hp = prob.h(&xp);
        let hm = prob.h(&xm);
        let an = prob.jac_h(x, d);
        let err: f64 = hp
            .iter()
            .zip(&hm)
            .zip(&an)
            .map(|((p, m), a)| ((p - m) / (2.0 * step) - a).powi(2))
            .sum::<f64>()
            .sqrt();
        rel(err, norm(&an))
    } else {
        0.0
    };

    let gfd = (&prob.g(&xp) - &prob.g(&xm)).scaled(1.0 / (2.0 * step));
    let dg_error = rel((&gfd - &dgd).frobenius_norm(), dgd.frobenius_norm());

    let pp = KktPoint::new(xp.clone(), lambda.clone());
    let pm = KktPoint::new(xm.clone(), lambda.clone());
    let lp = lagrangian_grad_x(prob, &pp);
    let lm = lagrangian_grad_x(prob, &pm);
    let an = prob.hess_lagrangian(x, lambda, d);
    let err: f64 = lp
        .iter()
        .zip(&lm)
        .zip(&an)
        .map(|((p, m), a)| ((p - m) / (2.0 * step) - a).powi(2))
        .sum::<f64>()
        .sqrt();
    let hess_error = rel(err, norm(&an));

    Ok(OracleCheck {
        adjoint_error,
        grad_f_error,
        jac_h_error,
        dg_error,
        hess_error,
    })
}

//! Projections and first-order calculus for `K = {0}ᵐ × Sⁿ₊`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::symmat::{frobenius_inner, EigenDecomposition, SymMatrix};

/// Element of `ℝᵐ × Sⁿ`: the equality block and the matrix block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KElement {
    pub vec: Vec<f64>,
    pub mat: SymMatrix,
}

impl KElement {
    pub fn new(vec: Vec<f64>, mat: SymMatrix) -> Self {
        Self { vec, mat }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            vec: vec![0.0; m],
            mat: SymMatrix::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.vec.iter().all(|v| v.is_finite()) && self.mat.is_finite()
    }

    pub fn norm_sq(&self) -> f64 {
        self.vec.iter().map(|v| v * v).sum::<f64>() + self.mat.frobenius_norm_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inner(&self, other: &KElement) -> f64 {
        let v: f64 = self.vec.iter().zip(&other.vec).map(|(a, b)| a * b).sum();
        v + frobenius_inner(&self.mat, &other.mat).expect("matrix blocks have equal size")
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            vec: self.vec.iter().map(|v| v * s).collect(),
            mat: self.mat.scaled(s),
        }
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &KElement) -> Self {
        let mut out = self.clone();
        for (a, b) in out.vec.iter_mut().zip(&other.vec) {
            *a += s * b;
        }
        out.mat.axpy(s, &other.mat);
        out
    }

    pub fn sub(&self, other: &KElement) -> Self {
        self.add_scaled(-1.0, other)
    }

    pub fn distance(&self, other: &KElement) -> f64 {
        self.sub(other).norm()
    }
}

/// `Π₊(A)`: eigenvalue clipping at zero.
pub fn project_psd(a: &SymMatrix) -> SymMatrix {
    match EigenDecomposition::of(a) {
        Ok(e) => project_psd_eig(&e),
        Err(_) => a.clone(),
    }
}

/// `Π₋(A) = A − Π₊(A)`.
pub fn project_nsd(a: &SymMatrix) -> SymMatrix {
    match EigenDecomposition::of(a) {
        Ok(e) => project_nsd_eig(&e),
        Err(_) => a.clone(),
    }
}

pub fn project_psd_eig(e: &EigenDecomposition) -> SymMatrix {
    e.spectral(|l| l.max(0.0))
}

pub fn project_nsd_eig(e: &EigenDecomposition) -> SymMatrix {
    e.spectral(|l| l.min(0.0))
}

/// Projection onto `K`: the equality block goes to zero.
pub fn project_k(z: &KElement) -> KElement {
    KElement {
        vec: vec![0.0; z.vec.len()],
        mat: project_psd(&z.mat),
    }
}

/// `dist(z, K)`.
pub fn dist_k(z: &KElement) -> f64 {
    let nsd = project_nsd(&z.mat);
    (z.vec.iter().map(|v| v * v).sum::<f64>() + nsd.frobenius_norm_sq()).sqrt()
}

/// Moreau envelope of the PSD-cone indicator, `½‖Π₋(A)‖²`.
pub fn moreau_env_indicator(a: &SymMatrix) -> f64 {
    0.5 * project_nsd(a).frobenius_norm_sq()
}

/// Directional derivative `Π₊′(A; H)` from the eigen-decomposition of `A`.
///
/// In the eigenbasis, with `H̃ = PᵀHP`, the αα and αβ blocks copy `H̃`, the
/// αγ block is `Σ ∘ H̃`, the ββ block is `Π₊(H̃_ββ)` and the remaining
/// blocks vanish.
pub fn dir_deriv_projection(e: &EigenDecomposition, h: &SymMatrix) -> Result<SymMatrix> {
    let ht = e.to_eigenbasis(h)?;
    let n = e.dim();
    let sigma = sigma_matrix(e);
    let mut m = SymMatrix::zeros(n);
    let alpha = e.alpha();
    let beta = e.beta();
    let gamma = e.gamma();
    for &i in alpha {
        for &j in alpha.iter().chain(beta) {
            m.set(i, j, ht.get(i, j));
        }
        for &j in gamma {
            m.set(i, j, sigma.get(i, j) * ht.get(i, j));
        }
    }
    if !beta.is_empty() {
        let bb = project_psd(&ht.submatrix(beta));
        m.set_submatrix(beta, &bb);
    }
    e.from_eigenbasis(&m)
}

/// First divided differences of `max(·, 0)` on the spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaMatrix {
    entries: SymMatrix,
}

impl SigmaMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    pub fn n(&self) -> usize {
        self.entries.n()
    }

    pub fn as_matrix(&self) -> &SymMatrix {
        &self.entries
    }
}

/// Entries `(max(λᵢ,0) − max(λⱼ,0)) / (λᵢ − λⱼ)` with `0/0 = 1`, where the
/// zero block is snapped to exactly zero first.
pub fn sigma_matrix(e: &EigenDecomposition) -> SigmaMatrix {
    let l = e.effective_lambda();
    let n = l.len();
    let pos = |i: usize| l[i] > 0.0;
    let entries = SymMatrix::from_fn(n, |i, j| match (pos(i), pos(j)) {
        (true, true) => 1.0,
        (true, false) => l[i] / (l[i] - l[j]),
        (false, true) => l[j] / (l[j] - l[i]),
        (false, false) => {
            if l[i] == l[j] {
                1.0
            } else {
                0.0
            }
        }
    });
    SigmaMatrix { entries }
}

/// Whether `U` lies in the critical cone of `Sⁿ₊` at the pair whose sum has
/// decomposition `e`: `Ũ_ββ ⪰ −tol`, `‖Ũ_βγ‖ ≤ tol`, `‖Ũ_γγ‖ ≤ tol`.
pub fn critical_cone_membership(e: &EigenDecomposition, u: &SymMatrix, tol: f64) -> Result<bool> {
    let ut = e.to_eigenbasis(u)?;
    let beta = e.beta();
    let gamma = e.gamma();
    if !beta.is_empty() {
        let bb = ut.submatrix(beta);
        let eb = EigenDecomposition::of(&bb)?;
        if eb.min_eigenvalue() < -tol {
            return Ok(false);
        }
    }
    let mut bg = 0.0;
    for &i in beta {
        for &j in gamma {
            bg += ut.get(i, j).powi(2);
        }
    }
    if bg.sqrt() > tol {
        return Ok(false);
    }
    Ok(ut.submatrix(gamma).frobenius_norm() <= tol)
}

/// Euclidean projection onto the critical cone described by `e`.
pub fn project_critical_cone(e: &EigenDecomposition, z: &SymMatrix) -> Result<SymMatrix> {
    let mut zt = e.to_eigenbasis(z)?;
    let beta = e.beta();
    let gamma = e.gamma();
    if !beta.is_empty() {
        let bb = project_psd(&zt.submatrix(beta));
        zt.set_submatrix(beta, &bb);
    }
    for &j in gamma {
        for &i in beta.iter().chain(gamma) {
            zt.set(i, j, 0.0);
        }
    }
    e.from_eigenbasis(&zt)
}

/// Whether `X ⪰ 0`, `Γ ⪯ 0` and `⟨X, Γ⟩ = 0` hold to `tol`.
pub fn in_normal_cone(x: &SymMatrix, gamma: &SymMatrix, tol: f64) -> bool {
    if x.n() != gamma.n() {
        return false;
    }
    let (Ok(ex), Ok(eg)) = (EigenDecomposition::of(x), EigenDecomposition::of(gamma)) else {
        return false;
    };
    if ex.min_eigenvalue() < -tol || eg.max_eigenvalue() > tol {
        return false;
    }
    let ip = frobenius_inner(x, gamma).unwrap_or(f64::INFINITY);
    ip.abs() <= tol * (x.frobenius_norm() * gamma.frobenius_norm()).max(1.0)
}

/// Natural-residual violation `‖X − Π₊(X + Γ)‖` of the pair `(X, Γ)`;
/// zero exactly when `Γ` is normal to `Sⁿ₊` at `X`.
pub fn normal_cone_violation(x: &SymMatrix, gamma: &SymMatrix) -> f64 {
    (x - &project_psd(&(x + gamma))).frobenius_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::eig_sym;

    fn close(a: &SymMatrix, b: &SymMatrix, tol: f64) -> bool {
        (a - b).frobenius_norm() <= tol
    }

    fn x2() -> SymMatrix {
        SymMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    #[test]
    fn psd_projection_examples() {
        assert!(close(
            &project_psd(&SymMatrix::from_diag(&[1.0, -2.0])),
            &SymMatrix::from_diag(&[1.0, 0.0]),
            1e-15
        ));
        assert!(close(
            &project_psd(&SymMatrix::identity(3)),
            &SymMatrix::identity(3),
            1e-15
        ));
        let half = SymMatrix::from_fn(2, |_, _| 0.5);
        assert!(close(&project_psd(&x2()), &half, 1e-14));
    }

    #[test]
    fn k_projection_examples() {
        let z = KElement::new(vec![1.0, -3.0], SymMatrix::identity(2));
        let p = project_k(&z);
        assert_eq!(p.vec, vec![0.0, 0.0]);
        assert!(close(&p.mat, &SymMatrix::identity(2), 1e-15));
        let p = project_k(&KElement::new(
            vec![0.0],
            SymMatrix::from_diag(&[-1.0, -1.0]),
        ));
        assert!(close(&p.mat, &SymMatrix::zeros(2), 1e-15));
        let p = project_k(&KElement::new(vec![4.0], x2()));
        assert_eq!(p.vec, vec![0.0]);
        assert!(close(&p.mat, &SymMatrix::from_fn(2, |_, _| 0.5), 1e-14));
    }

    #[test]
    fn moreau_envelope_examples() {
        assert_eq!(moreau_env_indicator(&SymMatrix::identity(3)), 0.0);
        assert_eq!(moreau_env_indicator(&SymMatrix::from_diag(&[-3.0])), 4.5);
        assert_eq!(
            moreau_env_indicator(&SymMatrix::from_diag(&[2.0, -1.0, -2.0])),
            2.5
        );
    }

    #[test]
    fn dir_deriv_reductions() {
        let h = SymMatrix::from_rows(&[&[0.3, -1.0, 0.2], &[-1.0, 0.5, 0.7], &[0.2, 0.7, -0.4]])
            .unwrap();
        let pd = SymMatrix::from_diag(&[3.0, 2.0, 1.0]);
        let e = EigenDecomposition::of(&pd).unwrap();
        assert!(close(&dir_deriv_projection(&e, &h).unwrap(), &h, 1e-14));
        let nd = SymMatrix::from_diag(&[-1.0, -2.0, -3.0]);
        let e = EigenDecomposition::of(&nd).unwrap();
        assert!(close(
            &dir_deriv_projection(&e, &h).unwrap(),
            &SymMatrix::zeros(3),
            1e-14
        ));
        let e = EigenDecomposition::of(&SymMatrix::zeros(3)).unwrap();
        assert!(close(
            &dir_deriv_projection(&e, &h).unwrap(),
            &project_psd(&h),
            1e-13
        ));
        assert!(dir_deriv_projection(&e, &SymMatrix::zeros(2)).is_err());
    }

    #[test]
    fn sigma_examples() {
        let e = eig_sym(&SymMatrix::from_diag(&[2.0, 0.0, -1.0]), 1e-8).unwrap();
        let s = sigma_matrix(&e);
        assert!((s.get(0, 2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(1, 2), 0.0);
        let s = sigma_matrix(&eig_sym(&SymMatrix::from_diag(&[3.0, 1.0]), 1e-8).unwrap());
        assert!((0..2).all(|i| (0..2).all(|j| s.get(i, j) == 1.0)));
        let s = sigma_matrix(&eig_sym(&SymMatrix::from_diag(&[-1.0, -2.0, -5.0]), 1e-8).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(s.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn critical_cone_examples() {
        let e = EigenDecomposition::of(&SymMatrix::identity(2)).unwrap();
        assert!(critical_cone_membership(&e, &SymMatrix::from_diag(&[-5.0, 3.0]), 1e-9).unwrap());
        let e = EigenDecomposition::of(&SymMatrix::zeros(2)).unwrap();
        assert!(critical_cone_membership(&e, &SymMatrix::from_diag(&[1.0, 0.0]), 1e-9).unwrap());
        assert!(!critical_cone_membership(&e, &SymMatrix::from_diag(&[1.0, -0.1]), 1e-9).unwrap());
        let e = EigenDecomposition::of(&SymMatrix::from_diag(&[1.0, -1.0])).unwrap();
        assert!(critical_cone_membership(&e, &SymMatrix::from_diag(&[5.0, 0.0]), 1e-9).unwrap());
        assert!(!critical_cone_membership(&e, &SymMatrix::from_diag(&[5.0, 0.1]), 1e-9).unwrap());
        assert!(critical_cone_membership(&e, &SymMatrix::zeros(3), 1e-9).is_err());
    }

    #[test]
    fn critical_cone_projection_lands_in_cone() {
        let a = SymMatrix::from_diag(&[2.0, 0.0, 0.0, -1.0]);
        let e = EigenDecomposition::of(&a).unwrap();
        let z = SymMatrix::from_fn(4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let p = project_critical_cone(&e, &z).unwrap();
        assert!(critical_cone_membership(&e, &p, 1e-10).unwrap());
        let pp = project_critical_cone(&e, &p).unwrap();
        assert!(close(&p, &pp, 1e-12));
    }

    #[test]
    fn normal_cone_examples() {
        assert!(in_normal_cone(
            &SymMatrix::identity(2),
            &SymMatrix::zeros(2),
            1e-9
        ));
        assert!(in_normal_cone(
            &SymMatrix::zeros(2),
            &SymMatrix::identity(2).scaled(-1.0),
            1e-9
        ));
        assert!(in_normal_cone(
            &SymMatrix::from_diag(&[1.0, 0.0]),
            &SymMatrix::from_diag(&[0.0, -1.0]),
            1e-9
        ));
        assert!(!in_normal_cone(
            &SymMatrix::from_diag(&[1.0, 0.0]),
            &SymMatrix::from_diag(&[-1.0, 0.0]),
            1e-9
        ));
        assert!(
            normal_cone_violation(
                &SymMatrix::from_diag(&[1.0, 0.0]),
                &SymMatrix::from_diag(&[0.0, -1.0])
            ) < 1e-15
        );
    }
}

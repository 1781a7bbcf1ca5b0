//! Dense symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! [`SymMatrix`] stores only the upper triangle, so symmetry holds by
//! construction. [`eig_sym`] returns eigenvalues in nonincreasing order
//! together with the positive / zero / negative index partition that the
//! cone calculus in [`crate::cone`] is written against.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Off-diagonal threshold for Jacobi convergence, relative to `‖A‖_F`.
pub const JACOBI_OFF_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Real symmetric `n × n` matrix, packed upper triangle (row-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds a matrix from a function evaluated on the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from row slices; the input must be symmetric.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Symmetric part `(M + Mᵀ)/2` of a dense row-major square matrix.
    pub fn from_dense_symmetrized(m: &Mat) -> Self {
        Self::from_fn(m.n(), |i, j| 0.5 * (m.get(i, j) + m.get(j, i)))
    }

    /// Rank-one matrix `s·vvᵀ`.
    pub fn outer(v: &[f64], s: f64) -> Self {
        Self::from_fn(v.len(), |i, j| s * v[i] * v[j])
    }

    /// Block-diagonal matrix from a list of diagonal blocks.
    pub fn block_diag(blocks: &[SymMatrix]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let mut m = Self::zeros(n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in i..b.n {
                    m.set(off + i, off + j, b.get(i, j));
                }
            }
            off += b.n;
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[packed_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = packed_index(self.n, i, j);
        self.data[k] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.get(i, j);
                s += if i == j { v * v } else { 2.0 * v * v };
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s·other`.
    pub fn axpy(&mut self, s: f64, other: &SymMatrix) {
        assert_eq!(self.n, other.n, "axpy dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn to_dense(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(i, j))
    }

    /// Principal submatrix on the given indices (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Writes `block` into the principal positions `idx`.
    pub fn set_submatrix(&mut self, idx: &[usize], block: &SymMatrix) {
        for a in 0..idx.len() {
            for b in a..idx.len() {
                self.set(idx[a], idx[b], block.get(a, b));
            }
        }
    }

    /// `Pᵀ·A·P`.
    pub fn congruence_t(&self, p: &Mat) -> SymMatrix {
        let ap = self.to_dense().matmul(p);
        let m = p.transpose().matmul(&ap);
        SymMatrix::from_dense_symmetrized(&m)
    }

    /// `P·A·Pᵀ`.
    pub fn congruence(&self, p: &Mat) -> SymMatrix {
        let pa = p.matmul(&self.to_dense());
        let m = pa.matmul(&p.transpose());
        SymMatrix::from_dense_symmetrized(&m)
    }

    /// General (non-symmetric) product `A·B`.
    pub fn matmul(&self, other: &SymMatrix) -> Mat {
        self.to_dense().matmul(&other.to_dense())
    }

    /// Length of the scaled vectorization of an `n × n` symmetric matrix.
    pub fn svec_len(n: usize) -> usize {
        n * (n + 1) / 2
    }

    /// Isometric vectorization: off-diagonal entries are scaled by `√2`,
    /// so the Euclidean norm of the vector equals the Frobenius norm.
    pub fn svec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            for j in i..self.n {
                let x = self.get(i, j);
                v.push(if i == j {
                    x
                } else {
                    x * std::f64::consts::SQRT_2
                });
            }
        }
        v
    }

    pub fn from_svec(n: usize, v: &[f64]) -> Result<Self> {
        if v.len() != Self::svec_len(n) {
            return Err(Error::DimensionMismatch {
                expected: Self::svec_len(n),
                found: v.len(),
            });
        }
        let mut m = Self::zeros(n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let x = v[k];
                m.set(
                    i,
                    j,
                    if i == j {
                        x
                    } else {
                        x / std::f64::consts::SQRT_2
                    },
                );
                k += 1;
            }
        }
        Ok(m)
    }

    /// Orthonormal basis of `Sⁿ` matching [`SymMatrix::svec`] coordinates.
    pub fn svec_basis(n: usize) -> Vec<SymMatrix> {
        let len = Self::svec_len(n);
        (0..len)
            .map(|k| {
                let mut e = vec![0.0; len];
                e[k] = 1.0;
                Self::from_svec(n, &e).expect("basis length")
            })
            .collect()
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

/// Frobenius inner product `⟨A, B⟩ = tr(AB)`.
pub fn frobenius_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_same_dim(b)?;
    let mut s = 0.0;
    for i in 0..a.n {
        for j in i..a.n {
            let p = a.get(i, j) * b.get(i, j);
            s += if i == j { p } else { 2.0 * p };
        }
    }
    Ok(s)
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, rhs.n, "add dimension mismatch");
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, rhs.n, "sub dimension mismatch");
        SymMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Add for SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: SymMatrix) -> SymMatrix {
        &self + &rhs
    }
}

impl Sub for SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: SymMatrix) -> SymMatrix {
        &self - &rhs
    }
}

impl AddAssign<&SymMatrix> for SymMatrix {
    fn add_assign(&mut self, rhs: &SymMatrix) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SymMatrix> for SymMatrix {
    fn sub_assign(&mut self, rhs: &SymMatrix) {
        self.axpy(-1.0, rhs);
    }
}

impl Neg for &SymMatrix {
    type Output = SymMatrix;
    fn neg(self) -> SymMatrix {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, s: f64) -> SymMatrix {
        self.scaled(s)
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, s: f64) -> SymMatrix {
        self.scaled(s)
    }
}

/// Dense square matrix, row-major. Used for eigenvector matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    n: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    /// Columns selected by `idx`, as an `n × idx.len()` row-major buffer.
    pub fn columns(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n, "matmul dimension mismatch");
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖PᵀP − I‖_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let ptp = self.transpose().matmul(self);
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let d = ptp.get(i, j) - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }
}

/// Ordered spectral factorization `A = P·Diag(λ)·Pᵀ` with the index
/// partition into positive (α), zero (β) and negative (γ) eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    p: Mat,
    lambda: Vec<f64>,
    alpha: Vec<usize>,
    beta: Vec<usize>,
    gamma: Vec<usize>,
    zero_tol: f64,
}

impl EigenDecomposition {
    /// Decomposition with the default zero tolerance `1e-8·max(1, ‖A‖_F)`.
    pub fn of(a: &SymMatrix) -> Result<Self> {
        eig_sym(a, default_zero_tol(a))
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    /// Eigenvector matrix; column `i` belongs to `lambda()[i]`.
    pub fn p(&self) -> &Mat {
        &self.p
    }

    /// Eigenvalues in nonincreasing order.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn beta(&self) -> &[usize] {
        &self.beta
    }

    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    pub fn zero_tol(&self) -> f64 {
        self.zero_tol
    }

    /// Eigenvalues with the β block snapped to exactly zero.
    pub fn effective_lambda(&self) -> Vec<f64> {
        let mut l = self.lambda.clone();
        for &i in &self.beta {
            l[i] = 0.0;
        }
        l
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.lambda.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.lambda.last().copied().unwrap_or(0.0)
    }

    /// `P·Diag(f(λ))·Pᵀ`.
    pub fn spectral(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let n = self.dim();
        let mut m = SymMatrix::zeros(n);
        for (k, &l) in self.lambda.iter().enumerate() {
            let fk = f(l);
            if fk == 0.0 {
                continue;
            }
            for i in 0..n {
                let pik = self.p.get(i, k) * fk;
                if pik == 0.0 {
                    continue;
                }
                for j in i..n {
                    let v = m.get(i, j) + pik * self.p.get(j, k);
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.spectral(|l| l)
    }

    /// `H̃ = PᵀHP`, the representation of `H` in the eigenbasis.
    pub fn to_eigenbasis(&self, h: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(h)?;
        Ok(h.congruence_t(&self.p))
    }

    /// `P·M·Pᵀ`, the inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, m: &SymMatrix) -> Result<SymMatrix> {
        self.check_dim(m)?;
        Ok(m.congruence(&self.p))
    }

    pub(crate) fn check_dim(&self, h: &SymMatrix) -> Result<()> {
        if h.n() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: h.n(),
            });
        }
        Ok(())
    }
}

pub fn default_zero_tol(a: &SymMatrix) -> f64 {
    1e-8 * a.frobenius_norm().max(1.0)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Output is deterministic: fixed sweep order, eigenvalues sorted
/// nonincreasing (ties keep sweep order), and each eigenvector is signed so
/// that its first non-negligible component is positive. Eigenvalues with
/// `|λ| ≤ zero_tol` are classified as zero.
pub fn eig_sym(a: &SymMatrix, zero_tol: f64) -> Result<EigenDecomposition> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if !(zero_tol >= 0.0) || !zero_tol.is_finite() {
        return Err(Error::InvalidInput(format!(
            "zero_tol must be finite and ≥ 0, got {zero_tol}"
        )));
    }
    let n = a.n();
    let mut w = a.to_dense();
    let mut v = Mat::identity(n);
    let scale = a.frobenius_norm();
    let threshold = JACOBI_OFF_TOL * scale;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * w.get(p, q) * w.get(p, q);
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = w.get(p, q);
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                w.set(p, p, app - t * apq);
                w.set(q, q, aqq + t * apq);
                w.set(p, q, 0.0);
                w.set(q, p, 0.0);
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let g = w.get(r, p);
                    let h = w.get(r, q);
                    let rp = g - s * (h + g * tau);
                    let rq = h + s * (g - h * tau);
                    w.set(r, p, rp);
                    w.set(p, r, rp);
                    w.set(r, q, rq);
                    w.set(q, r, rq);
                }
                for r in 0..n {
                    let g = v.get(r, p);
                    let h = v.get(r, q);
                    v.set(r, p, g - s * (h + g * tau));
                    v.set(r, q, h + s * (g - h * tau));
                }
            }
        }
    }

    let raw: Vec<f64> = (0..n).map(|i| w.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));

    let lambda: Vec<f64> = order.iter().map(|&i| raw[i]).collect();
    let mut p = Mat::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let lead = col.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for (i, x) in col.iter().enumerate() {
            p.set(i, k, sign * x);
        }
    }

    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    let mut gamma = Vec::new();
    for (i, &l) in lambda.iter().enumerate() {
        if l > zero_tol {
            alpha.push(i);
        } else if l < -zero_tol {
            gamma.push(i);
        } else {
            beta.push(i);
        }
    }

    Ok(EigenDecomposition {
        p,
        lambda,
        alpha,
        beta,
        gamma,
        zero_tol,
    })
}

/// Partition of the (ordered) eigenvalue indices into groups of equal
/// eigenvalues.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiSignature {
    pub blocks: Vec<Vec<usize>>,
}

/// Groups consecutive eigenvalues whose gap is at most `group_tol`.
pub fn pi_signature(e: &EigenDecomposition, group_tol: f64) -> PiSignature {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (i, &l) in e.lambda().iter().enumerate() {
        match blocks.last_mut() {
            Some(b) if e.lambda()[*b.last().unwrap()] - l <= group_tol => b.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    PiSignature { blocks }
}

/// Smallest gap between distinct eigenvalue groups (`+∞` for one group).
pub fn min_eigen_gap(e: &EigenDecomposition, group_tol: f64) -> f64 {
    let sig = pi_signature(e, group_tol);
    let l = e.lambda();
    sig.blocks
        .windows(2)
        .map(|w| l[*w[0].last().unwrap()] - l[w[1][0]])
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
        SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn diagonal_input_is_returned_as_is() {
        let a = SymMatrix::from_diag(&[2.0, 0.0, -1.0]);
        let e = eig_sym(&a, 1e-8).unwrap();
        assert_eq!(e.lambda(), &[2.0, 0.0, -1.0]);
        assert_eq!(e.alpha(), &[0]);
        assert_eq!(e.beta(), &[1]);
        assert_eq!(e.gamma(), &[2]);
        assert_eq!(e.p(), &Mat::identity(3));
    }

    #[test]
    fn exchange_matrix() {
        let a = SymMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let e = eig_sym(&a, 1e-8).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.lambda()[0] - 1.0).abs() < 1e-15);
        assert!((e.lambda()[1] + 1.0).abs() < 1e-15);
        let v0 = e.p().column(0);
        let v1 = e.p().column(1);
        assert!((v0[0] - r).abs() < 1e-15 && (v0[1] - r).abs() < 1e-15);
        assert!((v1[0] - r).abs() < 1e-15 && (v1[1] + r).abs() < 1e-15);
    }

    #[test]
    fn identity_is_all_alpha() {
        let e = eig_sym(&SymMatrix::identity(3), 1e-8).unwrap();
        assert_eq!(e.lambda(), &[1.0, 1.0, 1.0]);
        assert_eq!(e.alpha(), &[0, 1, 2]);
        assert!(e.beta().is_empty() && e.gamma().is_empty());
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut a = SymMatrix::identity(2);
        a.set(0, 1, f64::NAN);
        assert!(matches!(eig_sym(&a, 1e-8), Err(Error::InvalidInput(_))));
        assert!(eig_sym(&SymMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn ties_at_zero_tol_go_to_beta() {
        let a = SymMatrix::from_diag(&[1e-3, -1e-3, 0.5]);
        let e = eig_sym(&a, 1e-3).unwrap();
        assert_eq!(e.alpha(), &[0]);
        assert_eq!(e.beta(), &[1, 2]);
    }

    #[test]
    fn frobenius_inner_examples() {
        let i2 = SymMatrix::identity(2);
        assert_eq!(frobenius_inner(&i2, &i2).unwrap(), 2.0);
        let a = SymMatrix::from_diag(&[1.0, 2.0]);
        let b = SymMatrix::from_diag(&[3.0, 4.0]);
        assert_eq!(frobenius_inner(&a, &b).unwrap(), 11.0);
        let x = SymMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(frobenius_inner(&x, &x).unwrap(), 2.0);
        assert!(matches!(
            frobenius_inner(&i2, &SymMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frobenius_inner_is_trace_of_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            let a = random_sym(&mut rng, n);
            let b = random_sym(&mut rng, n);
            let ab = a.matmul(&b);
            let tr: f64 = (0..n).map(|i| ab.get(i, i)).sum();
            assert!((frobenius_inner(&a, &b).unwrap() - tr).abs() < 1e-13);
        }
    }

    #[test]
    fn pi_signature_examples() {
        let sig = |l: &[f64], tol: f64| {
            pi_signature(&eig_sym(&SymMatrix::from_diag(l), 1e-8).unwrap(), tol)
        };
        assert_eq!(
            sig(&[2.0, 0.0, -1.0], 1e-9).blocks,
            vec![vec![0], vec![1], vec![2]]
        );
        assert_eq!(
            sig(&[1.0, 1.0, 0.0], 1e-9).blocks,
            vec![vec![0, 1], vec![2]]
        );
        assert_eq!(
            sig(&[1.0, 1.0 - 1e-12, 0.0], 1e-9).blocks,
            vec![vec![0, 1], vec![2]]
        );
    }

    #[test]
    fn svec_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_sym(&mut rng, 4);
        let v = a.svec();
        let n2: f64 = v.iter().map(|x| x * x).sum();
        assert!((n2 - a.frobenius_norm_sq()).abs() < 1e-13);
        assert!((SymMatrix::from_svec(4, &v).unwrap().get(1, 3) - a.get(1, 3)).abs() < 1e-15);
    }

    #[test]
    fn random_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..1000 {
            let n = 1 + trial % 8;
            let a = random_sym(&mut rng, n);
            let e = EigenDecomposition::of(&a).unwrap();
            assert!(e.p().orthogonality_error() <= 1e-10 * n as f64);
            let rec = &e.reconstruct() - &a;
            assert!(rec.frobenius_norm() <= 1e-9 * a.frobenius_norm().max(1.0));
            assert!(e.lambda().windows(2).all(|w| w[0] >= w[1]));
            let tol = e.zero_tol();
            for (i, &l) in e.lambda().iter().enumerate() {
                assert_eq!(e.alpha().contains(&i), l > tol);
                assert_eq!(e.beta().contains(&i), l.abs() <= tol);
                assert_eq!(e.gamma().contains(&i), l < -tol);
            }
        }
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_sym(&mut rng, 6);
        let e1 = EigenDecomposition::of(&a).unwrap();
        let e2 = EigenDecomposition::of(&a).unwrap();
        assert_eq!(e1, e2);
        for (x, y) in e1.lambda().iter().zip(e2.lambda()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

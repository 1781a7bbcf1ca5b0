use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, NlsdpProblem};
use crate::cone::KElement;
use crate::symmat::{frobenius_inner, SymMatrix};

/// Low-degree polynomial test problem:
///
/// ```text
/// f(x)   = ½xᵀQx + cᵀx + ⅙ Σ tᵢ xᵢ³
/// hₖ(x)  = ⟨eₖ, x⟩ + ½ sₖ‖x‖² − rₖ
/// G(x)   = A₀ + Σ xᵢ Aᵢ + Σ xᵢ² Bᵢ
/// ```
#[derive(Clone, Debug)]
pub struct PolyProblem {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub t: Vec<f64>,
    pub e: Vec<Vec<f64>>,
    pub s: Vec<f64>,
    pub r: Vec<f64>,
    pub a0: SymMatrix,
    pub a: Vec<SymMatrix>,
    pub b: Vec<SymMatrix>,
}

impl PolyProblem {
    /// Random instance with entries in `[−1, 1]` and a PSD `Q`.
    pub fn random(seed: u64, dim_x: usize, dim_h: usize, dim_g: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = |rng: &mut ChaCha8Rng| rng.gen_range(-1.0..1.0);
        let m: Vec<Vec<f64>> = (0..dim_x)
            .map(|_| (0..dim_x).map(|_| u(&mut rng)).collect())
            .collect();
        let q = (0..dim_x)
            .map(|i| {
                (0..dim_x)
                    .map(|j| (0..dim_x).map(|k| m[k][i] * m[k][j]).sum())
                    .collect()
            })
            .collect();
        let c = (0..dim_x).map(|_| u(&mut rng)).collect();
        let t = (0..dim_x).map(|_| u(&mut rng)).collect();
        let e = (0..dim_h)
            .map(|_| (0..dim_x).map(|_| u(&mut rng)).collect())
            .collect();
        let s = (0..dim_h).map(|_| u(&mut rng)).collect();
        let r = (0..dim_h).map(|_| u(&mut rng)).collect();
        let sym = |rng: &mut ChaCha8Rng| SymMatrix::from_fn(dim_g, |_, _| u(rng));
        let a0 = sym(&mut rng);
        let a = (0..dim_x).map(|_| sym(&mut rng)).collect();
        let b = (0..dim_x).map(|_| sym(&mut rng)).collect();
        Self {
            q,
            c,
            t,
            e,
            s,
            r,
            a0,
            a,
            b,
        }
    }

    /// `min ½‖x − c‖²` subject to the constant constraint `I ⪰ 0`.
    pub fn shifted_quadratic(center: &[f64], dim_g: usize) -> Self {
        let n = center.len();
        Self {
            q: (0..n)
                .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            c: center.iter().map(|v| -v).collect(),
            t: vec![0.0; n],
            e: Vec::new(),
            s: Vec::new(),
            r: Vec::new(),
            a0: SymMatrix::identity(dim_g),
            a: vec![SymMatrix::zeros(dim_g); n],
            b: vec![SymMatrix::zeros(dim_g); n],
        }
    }

    /// Linear-objective, affine-constraint instance: `min cᵀx s.t. A₀ + Σ xᵢAᵢ ⪰ 0`.
    pub fn linear_sdp(c: Vec<f64>, a0: SymMatrix, a: Vec<SymMatrix>) -> Self {
        let n = c.len();
        let dim_g = a0.n();
        Self {
            q: vec![vec![0.0; n]; n],
            c,
            t: vec![0.0; n],
            e: Vec::new(),
            s: Vec::new(),
            r: Vec::new(),
            a0,
            a,
            b: vec![SymMatrix::zeros(dim_g); n],
        }
    }
}

impl NlsdpProblem for PolyProblem {
    fn name(&self) -> &str {
        "poly"
    }
    fn dim_x(&self) -> usize {
        self.c.len()
    }
    fn dim_h(&self) -> usize {
        self.e.len()
    }
    fn dim_g(&self) -> usize {
        self.a0.n()
    }

    fn f(&self, x: &[f64]) -> f64 {
        let quad: f64 = self.q.iter().zip(x).map(|(row, xi)| xi * dot(row, x)).sum();
        let cubic: f64 = self.t.iter().zip(x).map(|(t, xi)| t * xi.powi(3)).sum();
        0.5 * quad + dot(&self.c, x) + cubic / 6.0
    }

    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| dot(&self.q[i], x) + self.c[i] + 0.5 * self.t[i] * x[i] * x[i])
            .collect()
    }

    fn h(&self, x: &[f64]) -> Vec<f64> {
        let nx = dot(x, x);
        (0..self.e.len())
            .map(|k| dot(&self.e[k], x) + 0.5 * self.s[k] * nx - self.r[k])
            .collect()
    }

    fn jac_h(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let xd = dot(x, d);
        (0..self.e.len())
            .map(|k| dot(&self.e[k], d) + self.s[k] * xd)
            .collect()
    }

    fn jac_h_adj(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; x.len()];
        for (k, yk) in y.iter().enumerate() {
            for i in 0..x.len() {
                v[i] += yk * (self.e[k][i] + self.s[k] * x[i]);
            }
        }
        v
    }

    fn g(&self, x: &[f64]) -> SymMatrix {
        let mut g = self.a0.clone();
        for (i, xi) in x.iter().enumerate() {
            g.axpy(*xi, &self.a[i]);
            g.axpy(xi * xi, &self.b[i]);
        }
        g
    }

    fn dg(&self, x: &[f64], d: &[f64]) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.dim_g());
        for i in 0..x.len() {
            g.axpy(d[i], &self.a[i]);
            g.axpy(2.0 * x[i] * d[i], &self.b[i]);
        }
        g
    }

    fn dg_adj(&self, x: &[f64], gamma: &SymMatrix) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                frobenius_inner(&self.a[i], gamma).expect("dimension")
                    + 2.0 * x[i] * frobenius_inner(&self.b[i], gamma).expect("dimension")
            })
            .collect()
    }

    fn hess_lagrangian(&self, x: &[f64], lambda: &KElement, d: &[f64]) -> Vec<f64> {
        let ys: f64 = lambda.vec.iter().zip(&self.s).map(|(y, s)| y * s).sum();
        (0..x.len())
            .map(|i| {
                let bg = frobenius_inner(&self.b[i], &lambda.mat).expect("dimension");
                dot(&self.q[i], d) + self.t[i] * x[i] * d[i] + ys * d[i] + 2.0 * bg * d[i]
            })
            .collect()
    }
}

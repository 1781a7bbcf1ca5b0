//! Second-order objects at a pair `(G, Γ)` in the graph of the normal cone
//! of `Sⁿ₊`: the σ-term, the closed-form Moreau envelope of the second
//! subderivative of the indicator (with a projected-gradient oracle), the
//! SOSC certificate, and sampled checks of the uniform second-order
//! expansion of `½ dist²(·, Sⁿ₊)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cone::{
    in_normal_cone, moreau_env_indicator, project_critical_cone, project_nsd, project_psd,
};
use crate::error::{Error, Result};
use crate::problem::{constraint_map, residual_r, KktPoint, NlsdpProblem};
use crate::symmat::{frobenius_inner, pi_signature, EigenDecomposition, Mat, SymMatrix};

/// Validated pair `(G, Γ)` with the decomposition of `A = G + Γ` and a
/// penalty parameter.
#[derive(Clone, Debug)]
pub struct SecondOrderData {
    g: SymMatrix,
    gamma: SymMatrix,
    rho: f64,
    e: EigenDecomposition,
}

/// Scale-aware tolerance used for the normal-cone precondition.
pub fn pair_tol(g: &SymMatrix, gamma: &SymMatrix) -> f64 {
    1e-8 * g.frobenius_norm().max(gamma.frobenius_norm()).max(1.0)
}

fn check_pair(g: &SymMatrix, gamma: &SymMatrix) -> Result<()> {
    if g.n() != gamma.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: gamma.n(),
        });
    }
    if !in_normal_cone(g, gamma, pair_tol(g, gamma)) {
        let violation = (g - &project_psd(&(g + gamma))).frobenius_norm();
        return Err(Error::InvalidPair { violation });
    }
    Ok(())
}

impl SecondOrderData {
    pub fn new(g: SymMatrix, gamma: SymMatrix, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!(
                "penalty must be positive, got {rho}"
            )));
        }
        check_pair(&g, &gamma)?;
        let e = EigenDecomposition::of(&(&g + &gamma))?;
        Ok(Self { g, gamma, rho, e })
    }

    /// Pair `(Π₊(A), Π₋(A))` read off a single matrix `A`.
    pub fn from_sum(a: &SymMatrix, rho: f64) -> Result<Self> {
        let e = EigenDecomposition::of(a)?;
        let g = e.spectral(|l| l.max(0.0));
        let gamma = e.spectral(|l| l.min(0.0));
        Self::new(g, gamma, rho)
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidInput(format!(
                "penalty must be positive, got {rho}"
            )));
        }
        Ok(Self {
            rho,
            ..self.clone()
        })
    }

    pub fn g(&self) -> &SymMatrix {
        &self.g
    }
    pub fn gamma(&self) -> &SymMatrix {
        &self.gamma
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }
    /// Decomposition of `G + Γ`.
    pub fn decomposition(&self) -> &EigenDecomposition {
        &self.e
    }
}

/// `Υ = 2 Σ_{i∈α, j∈γ} (λⱼ/λᵢ)(PᵀZP)²ᵢⱼ` from the decomposition of `G + Γ`.
pub fn sigma_term_eig(e: &EigenDecomposition, z: &SymMatrix) -> Result<f64> {
    let zt = e.to_eigenbasis(z)?;
    let l = e.lambda();
    let mut s = 0.0;
    for &i in e.alpha() {
        for &j in e.gamma() {
            s += (l[j] / l[i]) * zt.get(i, j).powi(2);
        }
    }
    Ok(2.0 * s)
}

/// σ-term `2⟨Γ, Z G† Z⟩` at the pair `(G, Γ)`; never positive.
pub fn sigma_term(g: &SymMatrix, gamma: &SymMatrix, z: &SymMatrix) -> Result<f64> {
    check_pair(g, gamma)?;
    let e = EigenDecomposition::of(&(g + gamma))?;
    sigma_term_eig(&e, z)
}

/// Closed form of `inf_Z {−Υ(Z) + ρ‖Z − B‖²}` over the critical cone, plus
/// `ρ‖b‖²`.
pub fn d2_moreau_envelope(s: &SecondOrderData, b: &[f64], bm: &SymMatrix) -> Result<f64> {
    let e = &s.e;
    let bt = e.to_eigenbasis(bm)?;
    let rho = s.rho;
    let l = e.lambda();
    let (alpha, beta, gamma) = (e.alpha(), e.beta(), e.gamma());

    let mut beta_gamma = 0.0;
    for &i in beta {
        for &j in gamma {
            beta_gamma += bt.get(i, j).powi(2);
        }
    }
    let gamma_gamma = bt.submatrix(gamma).frobenius_norm_sq();
    let beta_dist = if beta.is_empty() {
        0.0
    } else {
        project_nsd(&bt.submatrix(beta)).frobenius_norm_sq()
    };
    let mut cross = 0.0;
    for &i in alpha {
        for &j in gamma {
            let r = l[j] / l[i];
            cross += -2.0 * rho * r * bt.get(i, j).powi(2) / (rho - r);
        }
    }
    let vec_part: f64 = b.iter().map(|v| v * v).sum();
    Ok(2.0 * rho * beta_gamma + rho * gamma_gamma + rho * beta_dist + cross + rho * vec_part)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub max_iter: usize,
    /// Required bound on the optimality gap, relative to `max(1, |value|)`.
    pub gap_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            gap_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    /// Certified upper bound on `value − optimum`.
    pub gap: f64,
    pub iterations: usize,
}

fn pseudo_inverse(g: &SymMatrix) -> Result<SymMatrix> {
    let e = EigenDecomposition::of(g)?;
    let tol = e.zero_tol();
    Ok(e.spectral(|l| if l.abs() > tol { 1.0 / l } else { 0.0 }))
}

fn sym_product(a: &Mat, b: &Mat) -> SymMatrix {
    SymMatrix::from_dense_symmetrized(&a.matmul(b))
}

/// Direct minimization of `−2⟨Γ, Z G† Z⟩ + ρ‖Z − B‖²` over the critical
/// cone by projected gradient, working in the original coordinates.
///
/// The objective is `2ρ`-strongly convex, so the norm of a subgradient at
/// the current iterate bounds the gap; iteration stops once that bound is
/// below the requested tolerance.
pub fn d2_moreau_oracle(
    s: &SecondOrderData,
    b: &[f64],
    bm: &SymMatrix,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    let rho = s.rho;
    let n = s.g.n();
    if bm.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bm.n(),
        });
    }
    let gp = pseudo_inverse(&s.g)?.to_dense();
    let gd = s.gamma.to_dense();
    let gp_norm = EigenDecomposition::of(&SymMatrix::from_dense_symmetrized(&gp))?
        .lambda()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let ga_norm = EigenDecomposition::of(&s.gamma)?
        .lambda()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let lip = 2.0 * rho + 4.0 * ga_norm * gp_norm;
    let mu = 2.0 * rho;
    let vec_part: f64 = b.iter().map(|v| v * v).sum::<f64>() * rho;

    let objective = |z: &SymMatrix| -> f64 {
        let zd = z.to_dense();
        let zgz = sym_product(&zd.matmul(&gp), &zd);
        let ups = 2.0 * frobenius_inner(&s.gamma, &zgz).expect("dimension");
        -ups + rho * (z - bm).frobenius_norm_sq()
    };
    let gradient = |z: &SymMatrix| -> SymMatrix {
        let zd = z.to_dense();
        let t1 = gd.matmul(&zd).matmul(&gp);
        let t2 = gp.matmul(&zd).matmul(&gd);
        let mut g = SymMatrix::from_dense_symmetrized(&t1);
        g += &SymMatrix::from_dense_symmetrized(&t2);
        let mut out = g.scaled(-2.0);
        out.axpy(2.0 * rho, &(z - bm));
        out
    };

    let mut z = project_critical_cone(&s.e, bm)?;
    let mut grad = gradient(&z);
    let mut gap = f64::INFINITY;
    for it in 1..=cfg.max_iter {
        let mut trial = z.clone();
        trial.axpy(-1.0 / lip, &grad);
        let zn = project_critical_cone(&s.e, &trial)?;
        let grad_n = gradient(&zn);
        // ∇φ(Z⁺) − ∇φ(Z) + L(Z − Z⁺) is a subgradient of φ + δ at Z⁺.
        let mut v = &grad_n - &grad;
        v.axpy(lip, &(&z - &zn));
        gap = v.frobenius_norm_sq() / (2.0 * mu);
        z = zn;
        grad = grad_n;
        let value = objective(&z) + vec_part;
        if gap <= cfg.gap_tol * value.abs().max(1.0) {
            return Ok(OracleResult {
                value,
                gap,
                iterations: it,
            });
        }
    }
    Err(Error::OracleFailure {
        iterations: cfg.max_iter,
        gap,
    })
}

/// Outcome of the SOSC test at a KKT point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoscReport {
    /// Minimum of `⟨∇²ₓₓL d, d⟩ − Υ(DG d)` over unit `d` in the critical cone.
    pub min_value: f64,
    pub certificate_direction: Vec<f64>,
    pub holds: bool,
    /// Whether `min_value` is exact (subspace case or a subspace lower bound
    /// already above the threshold) rather than a multistart estimate.
    pub exact: bool,
    /// Dimension of the linear hull used for the critical cone.
    pub subspace_dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoscConfig {
    pub sosc_tol: f64,
    pub kkt_tol: f64,
    pub multistarts: usize,
    pub seed: u64,
}

impl Default for SoscConfig {
    fn default() -> Self {
        Self {
            sosc_tol: 1e-6,
            kkt_tol: 1e-8,
            multistarts: 64,
            seed: 7,
        }
    }
}

/// Quadratic form of the SOSC at `pt`, as a symmetric matrix in `x`.
pub fn sosc_form(prob: &dyn NlsdpProblem, pt: &KktPoint) -> Result<SymMatrix> {
    let p = prob.dim_x();
    let a = &prob.g(&pt.x) + pt.gamma();
    let e = EigenDecomposition::of(&a)?;
    let q = |d: &[f64]| -> Result<f64> {
        let hd = prob.hess_lagrangian(&pt.x, &pt.lambda, d);
        let curv: f64 = hd.iter().zip(d).map(|(a, b)| a * b).sum();
        Ok(curv - sigma_term_eig(&e, &prob.dg(&pt.x, d))?)
    };
    let unit = |i: usize| -> Vec<f64> { (0..p).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let diag: Vec<f64> = (0..p).map(|i| q(&unit(i))).collect::<Result<_>>()?;
    let mut m = SymMatrix::zeros(p);
    for i in 0..p {
        m.set(i, i, diag[i]);
        for j in (i + 1)..p {
            let mut d = unit(i);
            d[j] = 1.0;
            m.set(i, j, 0.5 * (q(&d)? - diag[i] - diag[j]));
        }
    }
    Ok(m)
}

/// Linear description of the critical cone at `pt`: an orthonormal basis of
/// the subspace `{∇h d = 0, [DG d]~_βγ = 0, [DG d]~_γγ = 0}` and the
/// restriction of `d ↦ [DG d]~_ββ` to it (one matrix per basis vector).
pub struct CriticalCone {
    pub basis: Vec<Vec<f64>>,
    pub beta_maps: Vec<SymMatrix>,
}

impl CriticalCone {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_subspace(&self) -> bool {
        self.beta_maps.iter().all(|m| m.max_abs() <= 1e-12)
    }

    pub fn lift(&self, w: &[f64]) -> Vec<f64> {
        let p = self.basis.first().map_or(0, |b| b.len());
        let mut d = vec![0.0; p];
        for (wk, bk) in w.iter().zip(&self.basis) {
            for (di, bi) in d.iter_mut().zip(bk) {
                *di += wk * bi;
            }
        }
        d
    }

    pub fn beta_image(&self, w: &[f64]) -> Option<SymMatrix> {
        let first = self.beta_maps.first()?;
        let mut m = SymMatrix::zeros(first.n());
        for (wk, bk) in w.iter().zip(&self.beta_maps) {
            m.axpy(*wk, bk);
        }
        Some(m)
    }
}

pub fn critical_cone(prob: &dyn NlsdpProblem, pt: &KktPoint) -> Result<CriticalCone> {
    let p = prob.dim_x();
    let a = &prob.g(&pt.x) + pt.gamma();
    let e = EigenDecomposition::of(&a)?;
    let (beta, gamma) = (e.beta().to_vec(), e.gamma().to_vec());
    // Rows of the linear map, one per scalar constraint.
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut cols_beta = Vec::with_capacity(p);
    let mut col_values: Vec<Vec<f64>> = Vec::with_capacity(p);
    for i in 0..p {
        let d: Vec<f64> = (0..p).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
        let mut vals = prob.jac_h(&pt.x, &d);
        let zt = e.to_eigenbasis(&prob.dg(&pt.x, &d))?;
        for &bi in &beta {
            for &gj in &gamma {
                vals.push(zt.get(bi, gj));
            }
        }
        for (a, &gi) in gamma.iter().enumerate() {
            for &gj in &gamma[a..] {
                vals.push(zt.get(gi, gj));
            }
        }
        col_values.push(vals);
        cols_beta.push(zt.submatrix(&beta));
    }
    let k = col_values.first().map_or(0, |c| c.len());
    for r in 0..k {
        rows.push((0..p).map(|i| col_values[i][r]).collect());
    }
    let gram = SymMatrix::from_fn(p, |i, j| rows.iter().map(|r| r[i] * r[j]).sum());
    let eg = EigenDecomposition::of(&gram)?;
    let scale = eg.max_eigenvalue().abs().max(1.0);
    let basis: Vec<Vec<f64>> = (0..p)
        .filter(|&i| eg.lambda()[i].abs() <= 1e-12 * scale)
        .map(|i| eg.p().column(i))
        .collect();
    let beta_maps = basis
        .iter()
        .map(|bk| {
            let mut m = SymMatrix::zeros(beta.len());
            for (i, c) in bk.iter().enumerate() {
                m.axpy(*c, &cols_beta[i]);
            }
            m
        })
        .collect();
    Ok(CriticalCone { basis, beta_maps })
}

/// Minimum of the SOSC form over the unit sphere of the critical cone.
pub fn sosc_certificate(
    prob: &dyn NlsdpProblem,
    pt: &KktPoint,
    cfg: &SoscConfig,
) -> Result<SoscReport> {
    pt.check_dims(prob)?;
    let residual = residual_r(prob, pt);
    if !(residual <= cfg.kkt_tol) {
        return Err(Error::NotKkt { residual });
    }
    let m = sosc_form(prob, pt)?;
    let cone = critical_cone(prob, pt)?;
    let k = cone.dim();
    if k == 0 {
        return Ok(SoscReport {
            min_value: f64::INFINITY,
            certificate_direction: vec![0.0; prob.dim_x()],
            holds: true,
            exact: true,
            subspace_dim: 0,
        });
    }
    let ms = SymMatrix::from_fn(k, |a, b| {
        let da = &cone.basis[a];
        let mdb = m.to_dense().matvec(&cone.basis[b]);
        da.iter().zip(&mdb).map(|(x, y)| x * y).sum()
    });
    let es = EigenDecomposition::of(&ms)?;
    let low = es.min_eigenvalue();
    let low_w = es.p().column(k - 1);
    if cone.is_subspace() || low > cfg.sosc_tol {
        return Ok(SoscReport {
            min_value: low,
            certificate_direction: cone.lift(&low_w),
            holds: low > cfg.sosc_tol,
            exact: true,
            subspace_dim: k,
        });
    }

    let feasible = |w: &[f64]| -> bool {
        cone.beta_image(w)
            .and_then(|b| EigenDecomposition::of(&b).ok())
            .map_or(true, |e| e.min_eigenvalue() >= -1e-8)
    };
    let qv = |w: &[f64]| -> f64 {
        let mw = ms.to_dense().matvec(w);
        w.iter().zip(&mw).map(|(a, b)| a * b).sum()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |w: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        if feasible(&w) {
            let v = qv(&w);
            if best.as_ref().map_or(true, |(b, _)| v < *b) {
                *best = Some((v, w));
            }
        }
    };
    for i in 0..k {
        let w = es.p().column(i);
        consider(w.clone(), &mut best);
        consider(w.iter().map(|v| -v).collect(), &mut best);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ms_norm = es.lambda().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let b_norm_sq: f64 = cone.beta_maps.iter().map(|b| b.frobenius_norm_sq()).sum();
    for _ in 0..cfg.multistarts {
        let mut w: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
        normalize(&mut w);
        for mu in [1.0, 1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e8] {
            let step = 1.0 / (2.0 * ms_norm + 2.0 * mu * b_norm_sq + 1e-12);
            for _ in 0..400 {
                let mw = ms.to_dense().matvec(&w);
                let neg = cone.beta_image(&w).map(|b| project_nsd(&b));
                let mut grad: Vec<f64> = mw.iter().map(|v| 2.0 * v).collect();
                if let Some(neg) = &neg {
                    for (gk, bk) in grad.iter_mut().zip(&cone.beta_maps) {
                        *gk += 2.0 * mu * frobenius_inner(bk, neg).expect("dimension");
                    }
                }
                // Riemannian gradient on the sphere.
                let radial: f64 = grad.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (wk, gk) in w.iter_mut().zip(&grad) {
                    *wk -= step * (gk - radial * *wk);
                }
                normalize(&mut w);
            }
        }
        consider(w, &mut best);
    }
    let (min_value, w) =
        best.ok_or_else(|| Error::DegenerateSampling("no feasible direction found".into()))?;
    Ok(SoscReport {
        min_value,
        certificate_direction: cone.lift(&w),
        holds: min_value > cfg.sosc_tol,
        exact: false,
        subspace_dim: k,
    })
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub(crate) fn normalize(w: &mut [f64]) {
    let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in w.iter_mut() {
            *v /= n;
        }
    }
}

/// Random symmetric matrix with unit Frobenius norm.
pub(crate) fn random_unit_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let m = SymMatrix::from_fn(n, |_, _| gaussian(rng));
    let nf = m.frobenius_norm();
    if nf > 0.0 {
        m.scaled(1.0 / nf)
    } else {
        SymMatrix::identity(n).scaled(1.0 / (n as f64).sqrt())
    }
}

/// Orthogonal matrix built from Givens rotations with angles in `[−θ, θ]`.
pub(crate) fn random_rotation(rng: &mut ChaCha8Rng, n: usize, theta: f64) -> Mat {
    let mut q = Mat::identity(n);
    for p in 0..n {
        for r in (p + 1)..n {
            let a = rng.gen_range(-theta..=theta);
            let (s, c) = a.sin_cos();
            for i in 0..n {
                let x = q.get(i, p);
                let y = q.get(i, r);
                q.set(i, p, c * x - s * y);
                q.set(i, r, s * x + c * y);
            }
        }
    }
    q
}

/// Sampling plan for the uniform expansion tests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionSampling {
    pub base_points: usize,
    pub directions: usize,
    pub scales: Vec<f64>,
    pub seed: u64,
    /// Ball radius as a fraction of the smallest eigenvalue gap of `Ā`.
    pub radius_fraction: f64,
}

impl Default for ExpansionSampling {
    fn default() -> Self {
        Self {
            base_points: 20,
            directions: 10,
            scales: vec![1e-1, 1e-2, 1e-3, 1e-4],
            seed: 42,
            radius_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub seed: u64,
    pub radius: f64,
    pub scales: Vec<f64>,
    /// Largest cubic ratio seen at each scale.
    pub max_ratio: Vec<f64>,
    /// Single constant bounding every sampled ratio.
    pub bound: f64,
    pub admissible_points: usize,
    pub rejected_points: usize,
    /// Ratio at the smallest scale is at most three times the ratio at the
    /// largest scale.
    pub bounded: bool,
}

/// Points `A` near `Ā` with the same eigenvalue grouping and the same zero
/// block, drawn as `R(Ā + D)Rᵀ` with a small rotation `R` and a groupwise
/// constant diagonal shift `D` that leaves zero eigenvalues at zero.
pub fn sample_same_signature(
    abar: &SymMatrix,
    count: usize,
    radius_fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SymMatrix>, f64, usize)> {
    let n = abar.n();
    let eb = EigenDecomposition::of(abar)?;
    let group_tol = eb.zero_tol();
    let sig = pi_signature(&eb, group_tol);
    let lam = eb.lambda();
    let gap = crate::symmat::min_eigen_gap(&eb, group_tol);
    let radius = if gap.is_finite() {
        radius_fraction * gap
    } else {
        radius_fraction * lam.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    };
    let beta: Vec<usize> = eb.beta().to_vec();
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    let scale = abar.frobenius_norm().max(1.0);
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let mut shifted = lam.to_vec();
        for block in &sig.blocks {
            if block.iter().any(|i| beta.contains(i)) {
                continue;
            }
            let delta = rng.gen_range(-0.5..0.5) * radius / (n as f64).sqrt();
            for &i in block {
                shifted[i] += delta;
            }
        }
        let theta = 0.25 * radius / (scale * n as f64);
        let r = eb.p().matmul(&random_rotation(rng, n, theta));
        let a = SymMatrix::from_diag(&shifted).congruence(&r);
        let ea = EigenDecomposition::of(&a)?;
        let same_sig = pi_signature(&ea, group_tol) == sig && ea.beta().len() == beta.len();
        if (&a - abar).frobenius_norm() <= radius && same_sig {
            out.push(a);
        } else {
            rejected += 1;
        }
    }
    if out.is_empty() {
        return Err(Error::DegenerateSampling(format!(
            "no admissible point within radius {radius:.3e} after {attempts} attempts"
        )));
    }
    Ok((out, radius, rejected))
}

/// Relative size of the rounding error in a difference of the given terms.
fn noise_floor(terms: &[f64]) -> f64 {
    16.0 * f64::EPSILON * terms.iter().map(|t| t.abs()).sum::<f64>()
}

/// Cubic ratio of the second-order expansion of `½‖Π₋(·)‖²` at `A` along
/// `H`, with the quadratic term taken from the closed form at `ρ = 1`.
pub fn moreau_expansion_ratio(a: &SymMatrix, s: &SecondOrderData, h: &SymMatrix) -> Result<f64> {
    let e1 = moreau_env_indicator(&(a + h));
    let e0 = moreau_env_indicator(a);
    let lin = frobenius_inner(&project_nsd(a), h)?;
    let quad = 0.5 * d2_moreau_envelope(s, &[], h)?;
    let r = (e1 - e0 - lin - quad).abs();
    let floor = noise_floor(&[e1, e0, lin, quad]);
    Ok((r - floor).max(0.0) / h.frobenius_norm().powi(3))
}

/// Sampled check of the uniform second-order expansion of the Moreau
/// envelope around `Ā`.
pub fn expansion_residual_moreau(
    abar: &SymMatrix,
    spec: &ExpansionSampling,
) -> Result<ExpansionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (points, radius, rejected) =
        sample_same_signature(abar, spec.base_points, spec.radius_fraction, &mut rng)?;
    let n = abar.n();
    let mut max_ratio = vec![0.0f64; spec.scales.len()];
    for a in &points {
        let s = SecondOrderData::from_sum(a, 1.0)?;
        for _ in 0..spec.directions {
            let dir = random_unit_sym(&mut rng, n);
            for (k, &t) in spec.scales.iter().enumerate() {
                let ratio = moreau_expansion_ratio(a, &s, &dir.scaled(t))?;
                max_ratio[k] = max_ratio[k].max(ratio);
            }
        }
    }
    let bound = max_ratio.iter().copied().fold(0.0, f64::max);
    let bounded = match (max_ratio.first(), max_ratio.last()) {
        (Some(&big), Some(&small)) => small <= 3.0 * big + 1e-300 || small == 0.0,
        _ => true,
    };
    Ok(ExpansionReport {
        seed: spec.seed,
        radius,
        scales: spec.scales.clone(),
        max_ratio,
        bound,
        admissible_points: points.len(),
        rejected_points: rejected,
        bounded,
    })
}

/// Value of the SOSC form at a single direction (for brute-force checks).
pub fn sosc_form_value(prob: &dyn NlsdpProblem, pt: &KktPoint, d: &[f64]) -> Result<f64> {
    let a = &constraint_map(prob, &pt.x).mat + pt.gamma();
    let e = EigenDecomposition::of(&a)?;
    let hd = prob.hess_lagrangian(&pt.x, &pt.lambda, d);
    let curv: f64 = hd.iter().zip(d).map(|(a, b)| a * b).sum();
    Ok(curv - sigma_term_eig(&e, &prob.dg(&pt.x, d))?)
}

//! Randomized property suites over the numerical building blocks. The same
//! suites back the `verify` command of the harness and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alm::{aug_lagrangian_grad_x, aug_lagrangian_value, multiplier_update, update_slack};
use crate::cone::{
    dir_deriv_projection, in_normal_cone, moreau_env_indicator, project_k, project_nsd,
    project_psd, KElement,
};
use crate::error::Result;
use crate::problem::{constraint_map, fixture, NlsdpProblem, PolyProblem};
use crate::symmat::{eig_sym, frobenius_inner, EigenDecomposition, Mat, SymMatrix, JACOBI_OFF_TOL};
use crate::varanalysis::{
    d2_moreau_envelope, d2_moreau_oracle, expansion_residual_moreau, gaussian, random_unit_sym,
    sample_same_signature, sigma_term_eig, ExpansionSampling, OracleConfig, SecondOrderData,
};

/// Outcome of one named property over all cases of a suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed value of the check statistic.
    pub worst: f64,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            worst: 0.0,
        }
    }

    /// Records one case with statistic `stat`.
    fn record(&mut self, ok: bool, stat: f64) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
        }
        if stat.is_nan() || stat > self.worst {
            self.worst = stat;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub instances: usize,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Result<Mat> {
    let m = SymMatrix::from_fn(n, |_, _| gaussian(rng));
    Ok(eig_sym(&m, 0.0)?.p().clone())
}

/// `Q·Diag(λ)·Qᵀ` where the eigenvalues come in groups at least `sep`
/// apart, with a zero group present about half the time.
fn separated_matrix(rng: &mut ChaCha8Rng, n: usize, sep: f64) -> Result<SymMatrix> {
    let groups = rng.gen_range(1..=n);
    let mut values: Vec<f64> = Vec::with_capacity(groups);
    let with_zero = rng.gen_bool(0.5);
    if with_zero {
        values.push(0.0);
    }
    while values.len() < groups {
        let v = rng.gen_range(-2.0..2.0);
        if values.iter().all(|w| (v - *w).abs() >= sep) {
            values.push(v);
        }
    }
    let lam: Vec<f64> = (0..n)
        .map(|i| {
            if i < groups {
                values[i]
            } else {
                values[rng.gen_range(0..groups)]
            }
        })
        .collect();
    let q = random_orthogonal(rng, n)?;
    Ok(SymMatrix::from_diag(&lam).congruence(&q))
}

fn scale(a: &SymMatrix) -> f64 {
    a.frobenius_norm().max(1.0)
}

/// Reconstruction, orthogonality, ordering and determinism of the
/// eigensolver on random matrices with entries in `[−1, 1]`.
pub fn eigen_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut recon = CheckResult::new("reconstruction");
    let mut orth = CheckResult::new("orthogonality");
    let mut order = CheckResult::new("ordering");
    let mut det = CheckResult::new("determinism");
    for _ in 0..cases {
        let n = rng.gen_range(1..=8);
        let a = random_sym(&mut rng, n);
        let e = EigenDecomposition::of(&a)?;
        let err = (&e.reconstruct() - &a).frobenius_norm() / scale(&a);
        recon.record(err <= 1e-10, err);
        let o = e.p().orthogonality_error();
        orth.record(o <= 1e-10, o);
        let sorted = e.lambda().windows(2).all(|w| w[0] >= w[1]);
        order.record(sorted, 0.0);
        let again = EigenDecomposition::of(&a)?;
        det.record(again == e, 0.0);
    }
    Ok(SuiteReport {
        name: "eigen".into(),
        seed,
        instances: cases,
        checks: vec![recon, orth, order, det],
    })
}

/// Scales used in the uniform B-differentiability check.
pub const B_DIFF_SCALES: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Projection calculus on random instances of size at most 8.
pub fn cone_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut moreau = CheckResult::new("moreau-decomposition");
    let mut comp = CheckResult::new("complementarity");
    let mut nonexp = CheckResult::new("nonexpansiveness");
    let mut grad = CheckResult::new("envelope-gradient");
    let mut dird = CheckResult::new("directional-derivative");
    let mut bdiff = CheckResult::new("uniform-b-differentiability");

    for _ in 0..cases {
        let n = rng.gen_range(1..=8);
        let a = random_sym(&mut rng, n);
        let s = scale(&a);
        let p = project_psd(&a);
        let q = project_nsd(&a);
        let split = (&(&p + &q) - &a).frobenius_norm() / s;
        let ip = frobenius_inner(&p, &q)?.abs() / (s * s);
        moreau.record(split <= 1e-8 && ip <= 1e-8, split.max(ip));
        comp.record(in_normal_cone(&p, &q, 1e-8 * s), ip);

        let b = random_sym(&mut rng, n);
        let lhs = (&p - &project_psd(&b)).frobenius_norm();
        let rhs = (&a - &b).frobenius_norm();
        nonexp.record(
            lhs <= rhs * (1.0 + 1e-12) + 1e-14,
            lhs / rhs.max(f64::MIN_POSITIVE),
        );

        // Derivative checks use inputs with well-separated eigenvalue groups.
        let c = separated_matrix(&mut rng, n, 0.2)?;
        let d = random_unit_sym(&mut rng, n);
        // The envelope is only C¹ across a zero eigenvalue, so the
        // second-order accurate difference needs inputs away from it.
        let g = loop {
            let g = random_sym(&mut rng, n);
            let eg = EigenDecomposition::of(&g)?;
            if eg.lambda().iter().all(|l| l.abs() >= 1e-2) {
                break g;
            }
        };
        let h = 1e-4;
        let env = |t: f64| moreau_env_indicator(&(&g + &d.scaled(t)));
        let fd = (env(h) - env(-h)) / (2.0 * h);
        let exact = frobenius_inner(&project_nsd(&g), &d)?;
        let gerr = (fd - exact).abs();
        grad.record(gerr <= 1e-6 * scale(&g), gerr);

        let ec = EigenDecomposition::of(&c)?;
        let pc = project_psd(&c);
        let deriv = dir_deriv_projection(&ec, &d)?;
        let steps = [1e-2, 1e-3, 1e-4];
        let errs: Vec<f64> = steps
            .iter()
            .map(|&t| {
                (&(&project_psd(&(&c + &d.scaled(t))) - &pc).scaled(1.0 / t) - &deriv)
                    .frobenius_norm()
            })
            .collect();
        // Difference quotients carry eigensolver error divided by the step.
        let solver = 4.0 * JACOBI_OFF_TOL * c.frobenius_norm().max(1.0);
        let monotone =
            (1..steps.len()).all(|i| errs[i] < errs[i - 1] || errs[i] <= solver / steps[i]);
        dird.record(monotone, errs[2]);

        let (worst, ok) = b_diff_case(&mut rng, &c)?;
        bdiff.record(ok, worst);
    }
    Ok(SuiteReport {
        name: "cone".into(),
        seed,
        instances: cases,
        checks: vec![moreau, comp, nonexp, grad, dird, bdiff],
    })
}

/// Largest B-differentiability remainder ratio
/// `‖Π(A+H) − Π(A) − Π′(A;H)‖/‖H‖²` around `abar`, and whether the ratio at
/// every smaller scale stays within three times the ratio at `10⁻²`. Each
/// scale is allowed the remainder the eigensolver stopping rule can leave
/// in the two projections.
fn b_diff_case(rng: &mut ChaCha8Rng, abar: &SymMatrix) -> Result<(f64, bool)> {
    let n = abar.n();
    let (points, _, _) = sample_same_signature(abar, 4, 0.25, rng)?;
    let mut per_scale = [0.0f64; B_DIFF_SCALES.len()];
    let mut allowance = [0.0f64; B_DIFF_SCALES.len()];
    for a in &points {
        let e = EigenDecomposition::of(a)?;
        let pa = project_psd(a);
        for _ in 0..3 {
            let dir = random_unit_sym(rng, n);
            for (k, &t) in B_DIFF_SCALES.iter().enumerate() {
                let h = dir.scaled(t);
                let lin = dir_deriv_projection(&e, &h)?;
                let pah = project_psd(&(a + &h));
                let rem = (&(&pah - &pa) - &lin).frobenius_norm();
                per_scale[k] = per_scale[k].max(rem / (t * t));
                let solver = 4.0 * JACOBI_OFF_TOL * (a.frobenius_norm() + t).max(1.0);
                allowance[k] = allowance[k].max(solver / (t * t));
            }
        }
    }
    let worst = per_scale.iter().copied().fold(0.0, f64::max);
    let ok = worst.is_finite()
        && per_scale
            .iter()
            .zip(&allowance)
            .all(|(&r, &slack)| r <= 3.0 * per_scale[0] + slack);
    Ok((worst, ok))
}

/// Penalties cycled through by the second-order suite.
pub const SUITE_RHOS: [f64; 3] = [0.5, 1.0, 10.0];

/// Closed-form second subderivative envelope against the oracle, plus
/// monotonicity in the penalty, degree-2 homogeneity and the sign of the
/// σ-term.
pub fn second_order_suite(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle = CheckResult::new("closed-form-vs-oracle");
    let mut mono = CheckResult::new("monotone-in-rho");
    let mut homog = CheckResult::new("homogeneity");
    let mut sign = CheckResult::new("sigma-sign");
    let cfg = OracleConfig::default();
    for k in 0..cases {
        let n = rng.gen_range(1..=5);
        let rho = SUITE_RHOS[k % SUITE_RHOS.len()];
        let a = separated_matrix(&mut rng, n, 0.3)?;
        let s = SecondOrderData::from_sum(&a, rho)?;
        let m = rng.gen_range(0..=2);
        let b: Vec<f64> = (0..m).map(|_| gaussian(&mut rng)).collect();
        let bm = random_sym(&mut rng, n);

        let cf = d2_moreau_envelope(&s, &b, &bm)?;
        let (ok, err) = match d2_moreau_oracle(&s, &b, &bm, &cfg) {
            Ok(r) => {
                let err = (cf - r.value).abs() / cf.abs().max(1.0);
                (err <= 1e-6, err)
            }
            Err(_) => (false, f64::INFINITY),
        };
        oracle.record(ok, err);

        let hi = d2_moreau_envelope(&s.with_rho(2.0 * rho)?, &b, &bm)?;
        mono.record(hi >= cf - 1e-12 * cf.abs().max(1.0), (cf - hi).max(0.0));

        let t = 3.7;
        let bt: Vec<f64> = b.iter().map(|v| t * v).collect();
        let scaled = d2_moreau_envelope(&s, &bt, &bm.scaled(t))?;
        let herr = (scaled - t * t * cf).abs() / (t * t * cf).abs().max(1.0);
        homog.record(herr <= 1e-10, herr);

        let ups = sigma_term_eig(s.decomposition(), &bm)?;
        sign.record(ups <= 1e-12, ups.max(0.0));
    }
    Ok(SuiteReport {
        name: "second-order".into(),
        seed,
        instances: cases,
        checks: vec![oracle, mono, homog, sign],
    })
}

/// Base matrices of the expansion suite.
pub fn expansion_bases() -> Vec<SymMatrix> {
    vec![
        SymMatrix::from_diag(&[1.0, -1.0]),
        SymMatrix::from_diag(&[2.0, 0.0, -1.0]),
    ]
}

/// Sampled uniform second-order expansion of `½‖Π₋(·)‖²`.
pub fn expansion_suite(seed: u64) -> Result<SuiteReport> {
    let mut check = CheckResult::new("cubic-ratio-bounded");
    let spec = ExpansionSampling {
        seed,
        ..ExpansionSampling::default()
    };
    for abar in expansion_bases() {
        let rep = expansion_residual_moreau(&abar, &spec)?;
        check.record(rep.bounded && rep.bound.is_finite(), rep.bound);
    }
    Ok(SuiteReport {
        name: "expansion".into(),
        seed,
        instances: 2,
        checks: vec![check],
    })
}

fn random_kelement(rng: &mut ChaCha8Rng, m: usize, n: usize) -> KElement {
    KElement::new((0..m).map(|_| gaussian(rng)).collect(), random_sym(rng, n))
}

/// Identities of the augmented Lagrangian at random points of the two
/// fixtures and a random polynomial instance.
pub fn alm_identity_suite(points: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grad = CheckResult::new("gradient-finite-difference");
    let mut mono = CheckResult::new("monotone-in-rho");
    let mut concave = CheckResult::new("concave-in-multiplier");
    let mut dlam = CheckResult::new("multiplier-gradient");
    let mut comp = CheckResult::new("update-complementarity");

    let f1 = fixture("example-6.1")?;
    let f2 = fixture("example-6.2")?;
    let poly = PolyProblem::random(seed, 3, 1, 3);
    let probs: [&dyn NlsdpProblem; 3] = [f1.problem.as_ref(), f2.problem.as_ref(), &poly];

    for prob in probs {
        let (nx, m, n) = (prob.dim_x(), prob.dim_h(), prob.dim_g());
        for _ in 0..points {
            let x: Vec<f64> = (0..nx).map(|_| 0.5 * gaussian(&mut rng)).collect();
            let lam = random_kelement(&mut rng, m, n);
            let rho = [1.0, 10.0][rng.gen_range(0..2)];
            let val = |x: &[f64], l: &KElement, r: f64| aug_lagrangian_value(prob, x, l, r);

            let g = aug_lagrangian_grad_x(prob, &x, &lam, rho)?;
            let h = 1e-6;
            let mut err = 0.0f64;
            for i in 0..nx {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (val(&xp, &lam, rho)? - val(&xm, &lam, rho)?) / (2.0 * h);
                err = err.max((fd - g[i]).abs());
            }
            let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rel = err / gnorm.max(1.0);
            grad.record(rel <= 1e-5, rel);

            let lo = val(&x, &lam, rho)?;
            let hi = val(&x, &lam, 3.0 * rho)?;
            let tol = 1e-12 * lo.abs().max(1.0);
            mono.record(hi >= lo - tol, (lo - hi).max(0.0));

            let lam2 = random_kelement(&mut rng, m, n);
            let mid = lam.add_scaled(1.0, &lam2).scaled(0.5);
            let gap = 0.5 * val(&x, &lam, rho)? + 0.5 * val(&x, &lam2, rho)? - val(&x, &mid, rho)?;
            concave.record(gap <= 1e-10 * lo.abs().max(1.0), gap.max(0.0));

            let dir = random_kelement(&mut rng, m, n);
            let dir = dir.scaled(1.0 / dir.norm().max(f64::MIN_POSITIVE));
            let t = 1e-6;
            let fd = (val(&x, &lam.add_scaled(t, &dir), rho)?
                - val(&x, &lam.add_scaled(-t, &dir), rho)?)
                / (2.0 * t);
            let phi = constraint_map(prob, &x);
            let w = phi.add_scaled(1.0 / rho, &lam);
            let exact = phi.sub(&project_k(&w)).inner(&dir);
            let derr = (fd - exact).abs() / exact.abs().max(1.0);
            dlam.record(derr <= 1e-5, derr);

            let slack = update_slack(prob, &x, &lam, rho)?;
            let next = multiplier_update(prob, &x, &lam, rho)?;
            let ok =
                in_normal_cone(&slack.mat, &next.mat, 1e-8) && slack.vec.iter().all(|v| *v == 0.0);
            comp.record(ok, frobenius_inner(&slack.mat, &next.mat)?.abs());
        }
    }
    Ok(SuiteReport {
        name: "alm-identities".into(),
        seed,
        instances: 3 * points,
        checks: vec![grad, mono, concave, dlam, comp],
    })
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        eigen_suite(1000, seed)?,
        cone_suite(500, seed)?,
        second_order_suite(200, seed)?,
        expansion_suite(seed)?,
        alm_identity_suite(20, seed)?,
    ])
}

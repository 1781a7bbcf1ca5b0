use nalgebra::{DMatrix, DVector};
use nlsdp_core::problem::{fixture, residual_r, PolyProblem};
use nlsdp_core::varanalysis::{
    d2_moreau_envelope, d2_moreau_oracle, sigma_term, sosc_certificate, OracleConfig,
    SecondOrderData, SoscConfig,
};
use nlsdp_core::{KElement, KktPoint, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_dense(a: &SymMatrix) -> DMatrix<f64> {
    let n = a.n();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

fn from_dense(m: &DMatrix<f64>) -> SymMatrix {
    SymMatrix::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}

fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
        .qr()
        .q()
}

/// Complementary pair `G = Q Diag(g) Qᵀ ⪰ 0`, `Γ = Q Diag(γ) Qᵀ ⪯ 0`.
fn pair(q: &DMatrix<f64>, g: &[f64], gamma: &[f64]) -> (SymMatrix, SymMatrix) {
    let d = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(v));
    (
        from_dense(&(q * d(g) * q.transpose())),
        from_dense(&(q * d(gamma) * q.transpose())),
    )
}

#[test]
fn sigma_term_matches_pseudo_inverse_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let layouts: [(&[f64], &[f64]); 3] = [
        (&[2.0, 0.5, 0.0], &[0.0, 0.0, -1.5]),
        (&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, -2.0, -0.3]),
        (&[3.0, 1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, -1.0, -4.0]),
    ];
    for (g, gm) in layouts {
        for _ in 0..10 {
            let q = random_orthogonal(&mut rng, g.len());
            let (gs, gms) = pair(&q, g, gm);
            let z = SymMatrix::from_fn(g.len(), |_, _| rng.gen_range(-1.0..1.0));
            let pinv = to_dense(&gs).pseudo_inverse(1e-9).unwrap();
            let zd = to_dense(&z);
            let oracle = 2.0 * (to_dense(&gms).component_mul(&(&zd * pinv * &zd))).sum();
            let v = sigma_term(&gs, &gms, &z).unwrap();
            assert!(
                (v - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                "{v} vs {oracle}"
            );
            assert!(v <= 1e-12);
        }
    }
}

#[test]
fn closed_form_matches_oracle_on_mixed_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let q = random_orthogonal(&mut rng, 3);
    let (g, gm) = pair(&q, &[1.3, 0.0, 0.0], &[0.0, 0.0, -0.7]);
    for rho in [0.5, 1.0, 10.0] {
        let s = SecondOrderData::new(g.clone(), gm.clone(), rho).unwrap();
        let bm = SymMatrix::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
        let b = vec![rng.gen_range(-1.0..1.0)];
        let closed = d2_moreau_envelope(&s, &b, &bm).unwrap();
        let oracle = d2_moreau_oracle(&s, &b, &bm, &OracleConfig::default()).unwrap();
        assert!(oracle.gap <= 1e-9);
        assert!(
            (closed - oracle.value).abs() <= 1e-6 * closed.abs().max(1.0),
            "ρ={rho}: {closed} vs {}",
            oracle.value
        );
    }
}

/// Instance with `x̄ = 0`, `G(0) = Diag(1, 0, 0)` and `Γ̄ = Diag(0, 0, −1)`,
/// so the constraint pair has one index in each of the three blocks.
fn three_block_instance(rng: &mut ChaCha8Rng, q_scale: f64) -> (PolyProblem, KktPoint) {
    let p = 4;
    let mut prob = PolyProblem::random(rng.gen(), p, 0, 3);
    prob.a0 = SymMatrix::from_diag(&[1.0, 0.0, 0.0]);
    let m = SymMatrix::from_fn(p, |_, _| rng.gen_range(-1.0..1.0));
    prob.q = (0..p)
        .map(|i| (0..p).map(|j| q_scale * m.get(i, j)).collect())
        .collect();
    let gamma = SymMatrix::from_diag(&[0.0, 0.0, -1.0]);
    prob.c = prob.a.iter().map(|a| a.get(2, 2)).collect();
    let pt = KktPoint::new(vec![0.0; p], KElement::new(vec![], gamma));
    (prob, pt)
}

/// Minimum of the SOSC form over unit directions of the critical cone by a
/// grid over the unit circle of the equality null space.
///
/// With `U = DG(0)d = Σ dᵢAᵢ` the cone is `{U₁₂ = 0, U₂₂ = 0, U₁₁ ≥ 0}`
/// (0-based indices β = {1}, γ = {2}) and the form is
/// `dᵀ(Q + 2 Diag(⟨Bᵢ, Γ̄⟩))d + 2U₀₂²`.
fn grid_minimum(prob: &PolyProblem) -> Option<f64> {
    let p = prob.c.len();
    let cons = DMatrix::from_fn(2, p, |r, i| match r {
        0 => prob.a[i].get(1, 2),
        _ => prob.a[i].get(2, 2),
    });
    // Eigenvectors of CᵀC with zero eigenvalue span the null space of C.
    let eig = nalgebra::SymmetricEigen::new(cons.transpose() * &cons);
    let scale = eig.eigenvalues.amax();
    let basis: Vec<DVector<f64>> = (0..p)
        .filter(|&k| eig.eigenvalues[k].abs() <= 1e-12 * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    assert_eq!(basis.len(), 2);
    let h = DMatrix::from_fn(p, p, |i, j| {
        prob.q[i][j]
            + if i == j {
                -2.0 * prob.b[i].get(2, 2)
            } else {
                0.0
            }
    });
    let mut best: Option<f64> = None;
    let steps = 200_000;
    for k in 0..steps {
        let th = std::f64::consts::TAU * k as f64 / steps as f64;
        let d = &basis[0] * th.cos() + &basis[1] * th.sin();
        let u = |r: usize, c: usize| -> f64 { (0..p).map(|i| d[i] * prob.a[i].get(r, c)).sum() };
        if u(1, 1) < 0.0 {
            continue;
        }
        let v = d.dot(&(&h * &d)) + 2.0 * u(0, 2).powi(2);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    }
    best
}

#[test]
fn sosc_certificate_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut both_signs = (false, false);
    for case in 0..24 {
        let q_scale = if case % 2 == 0 { 0.3 } else { 2.0 };
        let (prob, pt) = three_block_instance(&mut rng, q_scale);
        assert!(residual_r(&prob, &pt) <= 1e-14);
        let Some(grid) = grid_minimum(&prob) else {
            continue;
        };
        let rep = sosc_certificate(&prob, &pt, &SoscConfig::default()).unwrap();
        assert!(
            (rep.min_value - grid).abs() <= 1e-6 * grid.abs().max(1.0),
            "case {case}: certificate {} vs grid {grid}",
            rep.min_value
        );
        if grid.abs() > 1e-3 {
            assert_eq!(rep.holds, grid > 0.0, "case {case}");
            if grid > 0.0 {
                both_signs.0 = true;
            } else {
                both_signs.1 = true;
            }
        }
    }
    assert!(both_signs.0 && both_signs.1, "grid never saw both outcomes");
}

#[test]
fn fixtures_satisfy_sosc() {
    for (name, expected) in [("example-6.1", 4.0), ("example-6.2", 3.0)] {
        let fx = fixture(name).unwrap();
        let rep =
            sosc_certificate(fx.problem.as_ref(), &fx.solution, &SoscConfig::default()).unwrap();
        assert!(rep.holds, "{name}");
        assert!(
            (rep.min_value - expected).abs() <= 1e-10,
            "{name}: {}",
            rep.min_value
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_is_nondecreasing_in_rho(seed in any::<u64>(), r1 in 0.1f64..5.0, f in 1.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_orthogonal(&mut rng, 4);
        let (g, gm) = pair(&q, &[2.0, 0.7, 0.0, 0.0], &[0.0, 0.0, 0.0, -1.1]);
        let bm = SymMatrix::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let lo = d2_moreau_envelope(&SecondOrderData::new(g.clone(), gm.clone(), r1).unwrap(), &[], &bm).unwrap();
        let hi = d2_moreau_envelope(&SecondOrderData::new(g, gm, r1 * f).unwrap(), &[], &bm).unwrap();
        prop_assert!(hi >= lo - 1e-12 * lo.abs().max(1.0));
    }
}

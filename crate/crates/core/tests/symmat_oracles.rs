use nalgebra::{DMatrix, DVector, SymmetricEigen};
use nlsdp_core::symmat::{pi_signature, JACOBI_OFF_TOL};
use nlsdp_core::{eig_sym, frobenius_inner, EigenDecomposition, SymMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_dense(a: &SymMatrix) -> DMatrix<f64> {
    let n = a.n();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j))
}

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Largest eigenvalue by power iteration on `A + sI`, shifted so that the
/// top of the spectrum dominates in magnitude.
fn power_top(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let shift = a.iter().map(|v| v.abs()).sum::<f64>();
    let b = a + DMatrix::identity(n, n) * shift;
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    let mut est = 0.0;
    for _ in 0..100_000 {
        let w = &b * &v;
        let next = v.dot(&w);
        v = w.normalize();
        if (next - est).abs() <= 1e-15 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    est - shift
}

/// Nonincreasing spectrum from nalgebra's symmetric eigensolver.
fn reference_spectrum(a: &SymMatrix) -> Vec<f64> {
    let mut l: Vec<f64> = SymmetricEigen::new(to_dense(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    l.sort_by(|x, y| y.total_cmp(x));
    l
}

#[test]
fn spectrum_matches_reference_solver_and_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let a = random_sym(&mut rng, 4);
        let e = EigenDecomposition::of(&a).unwrap();
        let reference = reference_spectrum(&a);
        for (l, r) in e.lambda().iter().zip(&reference) {
            assert!((l - r).abs() <= 1e-8, "{:?} vs {reference:?}", e.lambda());
        }
        let top = power_top(&to_dense(&a));
        // The power iteration converges slowly on close top pairs; those
        // are skipped rather than compared loosely.
        if reference[0] - reference[1] > 1e-2 {
            assert!(
                (e.lambda()[0] - top).abs() <= 1e-8,
                "{} vs {top}",
                e.lambda()[0]
            );
        }
    }
}

#[test]
fn eigenvectors_satisfy_the_eigen_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..=8 {
        let a = random_sym(&mut rng, n);
        let d = to_dense(&a);
        let e = EigenDecomposition::of(&a).unwrap();
        for (k, &l) in e.lambda().iter().enumerate() {
            let v = DVector::from_vec(e.p().column(k));
            let r = (&d * &v - &v * l).norm();
            assert!(r <= 1e-10 * d.norm().max(1.0), "n={n} k={k} residual {r:e}");
            let first = v.iter().find(|c| c.abs() > 1e-12).copied().unwrap();
            assert!(first > 0.0);
        }
    }
}

#[test]
fn index_sets_follow_the_zero_tolerance() {
    let a = SymMatrix::from_diag(&[3.0, 1e-10, -1e-10, -2.0]);
    let e = eig_sym(&a, 1e-9).unwrap();
    assert_eq!(e.alpha(), &[0]);
    assert_eq!(e.beta(), &[1, 2]);
    assert_eq!(e.gamma(), &[3]);
    let sig = pi_signature(&e, 1e-9);
    assert_eq!(sig.blocks, vec![vec![0], vec![1, 2], vec![3]]);
}

#[test]
fn diagonal_matrices_need_no_rotation() {
    let a = SymMatrix::from_diag(&[-1.0, 4.0, 2.0]);
    let e = EigenDecomposition::of(&a).unwrap();
    assert_eq!(e.lambda(), &[4.0, 2.0, -1.0]);
    assert!((&e.reconstruct() - &a).frobenius_norm() == 0.0);
}

fn sym_strategy(max_n: usize) -> impl Strategy<Value = SymMatrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-10.0f64..10.0, n * n)
            .prop_map(move |v| SymMatrix::from_fn(n, |i, j| v[i.min(j) * n + i.max(j)]))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decomposition_invariants(a in sym_strategy(7)) {
        let e = EigenDecomposition::of(&a).unwrap();
        let scale = a.frobenius_norm().max(1.0);
        prop_assert!((&e.reconstruct() - &a).frobenius_norm() <= 1e3 * JACOBI_OFF_TOL * scale);
        prop_assert!(e.p().orthogonality_error() <= 1e-10);
        prop_assert!(e.lambda().windows(2).all(|w| w[0] >= w[1]));
        let trace: f64 = e.lambda().iter().sum();
        prop_assert!((trace - a.trace()).abs() <= 1e-10 * scale * a.n() as f64);
        let mut idx: Vec<usize> = e.alpha().iter().chain(e.beta()).chain(e.gamma()).copied().collect();
        idx.sort_unstable();
        prop_assert_eq!(idx, (0..a.n()).collect::<Vec<_>>());
    }

    #[test]
    fn svec_preserves_inner_products(a in sym_strategy(5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_sym(&mut rng, a.n());
        let sa = a.svec();
        let sb = b.svec();
        let dot: f64 = sa.iter().zip(&sb).map(|(x, y)| x * y).sum();
        let ip = frobenius_inner(&a, &b).unwrap();
        prop_assert!((dot - ip).abs() <= 1e-12 * (1.0 + ip.abs()));
        let back = SymMatrix::from_svec(a.n(), &sa).unwrap();
        prop_assert!((&back - &a).frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
    }
}

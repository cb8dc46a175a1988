//! Sparse factorizations checked against dense nalgebra oracles.

use std::sync::Arc;

use manifold_mcmc::linalg::{cholesky, lu, normal_matrix, CholeskySymbolic, SparseMatrix};
use manifold_mcmc::systems::{build_polymer, ConstraintSystem};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let rows = a.to_dense();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| rows[i][j])
}

fn from_rows(rows: Vec<Vec<f64>>) -> DMatrix<f64> {
    let (n, m) = (rows.len(), rows.first().map_or(0, Vec::len));
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(f64::MIN_POSITIVE)
}

/// `BᵀB + I` for a random sparse square `B`: SPD with a random pattern.
fn spd_strategy(max_order: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..=max_order).prop_flat_map(|n| {
        let entry = (0..n, 0..n, -1.0..1.0_f64);
        prop::collection::vec(entry, 0..=3 * n).prop_map(move |mut triplets| {
            triplets.extend((0..n).map(|i| (i, i, 1.0)));
            let b = SparseMatrix::from_triplets(n, n, &triplets).unwrap();
            let mut a = normal_matrix(&b);
            let n = a.nrows();
            let diag: Vec<usize> = (0..n).map(|i| a.pattern().find(i, i).unwrap()).collect();
            for p in diag {
                a.values_mut()[p] += 1.0;
            }
            a
        })
    })
}

/// Diagonally weighted random square matrix, generally unsymmetric.
fn square_strategy(max_order: usize) -> impl Strategy<Value = SparseMatrix> {
    (1..=max_order).prop_flat_map(|n| {
        let entry = (0..n, 0..n, -1.0..1.0_f64);
        prop::collection::vec(entry, 0..=3 * n).prop_map(move |mut triplets| {
            triplets.extend((0..n).map(|i| (i, i, 4.0)));
            SparseMatrix::from_triplets(n, n, &triplets).unwrap()
        })
    })
}

fn rhs(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 5.0).collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_reconstructs_permuted_matrix(a in spd_strategy(30)) {
        let f = cholesky(&a, None).unwrap();
        let l = from_rows(f.l_dense());
        let ad = dense(&a);
        let perm = f.permutation();
        let permuted = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| ad[(perm[i], perm[j])]);
        prop_assert!(rel_err(&(&l * l.transpose()), &permuted) < 1e-10);
        prop_assert!(f.diag().all(|d| d > 0.0));
    }

    #[test]
    fn cholesky_solve_residual(a in spd_strategy(50)) {
        let f = cholesky(&a, None).unwrap();
        let b = rhs(a.nrows());
        let x = f.solve(&b);
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        prop_assert!(inf_norm(&r) <= 1e-9 * inf_norm(&b));
    }

    #[test]
    fn diagonal_product_is_root_determinant(a in spd_strategy(30)) {
        let f = cholesky(&a, None).unwrap();
        let det = dense(&a).determinant();
        let prod: f64 = f.diag().product();
        prop_assert!((prod - det.sqrt()).abs() <= 1e-8 * det.sqrt());
        prop_assert!((f.log_diag_sum() - 0.5 * det.ln()).abs() <= 1e-8 * det.ln().abs().max(1.0));
    }

    #[test]
    fn shared_symbolic_matches_fresh_analysis(a in spd_strategy(30), scale in 1.0..3.0_f64) {
        let symbolic = Arc::new(CholeskySymbolic::analyze(a.pattern()).unwrap());
        let mut b = a.clone();
        let n = b.nrows();
        for i in 0..n {
            let p = b.pattern().find(i, i).unwrap();
            b.values_mut()[p] *= scale;
        }
        let shared = cholesky(&b, Some(&symbolic)).unwrap();
        let fresh = cholesky(&b, None).unwrap();
        prop_assert_eq!(shared.permutation(), fresh.permutation());
        for (x, y) in shared.l_dense().iter().flatten().zip(fresh.l_dense().iter().flatten()) {
            prop_assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
    }

    #[test]
    fn lu_reconstructs_and_solves(a in square_strategy(40)) {
        let f = lu(&a).unwrap();
        let l = from_rows(f.l_dense());
        let u = from_rows(f.u_dense());
        let ad = dense(&a);
        let (rp, cp) = (f.row_permutation(), f.column_permutation());
        let permuted = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| ad[(rp[i], cp[j])]);
        prop_assert!(rel_err(&(&l * &u), &permuted) < 1e-10);

        let b = rhs(a.nrows());
        let x = f.solve(&b);
        let oracle = ad.lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
        for (xi, oi) in x.iter().zip(oracle.iter()) {
            prop_assert!((xi - oi).abs() <= 1e-9 * oi.abs().max(1.0));
        }
    }

    #[test]
    fn normal_matrix_matches_dense_product(
        triplets in prop::collection::vec((0..10usize, 0..4usize, -2.0..2.0_f64), 0..30)
    ) {
        let q = SparseMatrix::from_triplets(10, 4, &triplets).unwrap();
        let qd = dense(&q);
        let oracle = qd.transpose() * &qd;
        let got = dense(&normal_matrix(&q));
        prop_assert!((got - oracle).abs().max() <= 1e-12);
    }
}

#[test]
fn spd_solve_matches_dense_oracle() {
    let n = 20;
    let b = DMatrix::from_fn(n, n, |i, j| (((i * 31 + j * 17) % 13) as f64 - 6.0) / 6.0);
    let ad = b.transpose() * &b + DMatrix::identity(n, n);
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| ad[(i, j)]).collect()).collect();
    let a = SparseMatrix::from_dense(&rows).unwrap();
    let rhs = rhs(n);
    let x = cholesky(&a, None).unwrap().solve(&rhs);
    let oracle = ad.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs));
    for (xi, oi) in x.iter().zip(oracle.iter()) {
        assert!((xi - oi).abs() <= 1e-9 * oi.abs().max(1.0));
    }
}

#[test]
fn polymer_gram_factor_reconstructs() {
    let (sys, init) = build_polymer(8).unwrap();
    let a = normal_matrix(&sys.jacobian(&init.x0));
    let f = cholesky(&a, None).unwrap();
    let ad = dense(&a);
    let perm = f.permutation();
    let permuted = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| ad[(perm[i], perm[j])]);
    let l = from_rows(f.l_dense());
    assert!(rel_err(&(&l * l.transpose()), &permuted) < 1e-10);
    let oracle = ad.cholesky().unwrap().l();
    let prod: f64 = f.diag().product();
    let oracle_prod: f64 = oracle.diagonal().iter().product();
    assert!((prod - oracle_prod).abs() < 1e-10 * oracle_prod);
}

#[test]
fn polymer_newton_matrix_lu_matches_dense() {
    let (sys, init) = build_polymer(8).unwrap();
    let qx = sys.jacobian(&init.x0);
    let y: Vec<f64> = init.x0.iter().enumerate().map(|(i, v)| v + 0.05 * ((i % 5) as f64 - 2.0)).collect();
    let qy = sys.jacobian(&y);
    let plan = manifold_mcmc::linalg::GramPlan::new(qx.pattern());
    let a = plan.apply(&qy, &qx);
    let b = sys.eval_q(&y);
    let x = lu(&a).unwrap().solve(&b);
    let oracle = dense(&a).lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
    for (xi, oi) in x.iter().zip(oracle.iter()) {
        assert!((xi - oi).abs() <= 1e-10 * oi.abs().max(1.0));
    }
}

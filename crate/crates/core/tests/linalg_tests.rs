//! Solver-layer tests: LDLT factorization against dense oracles, the saddle
//! solver's constraint exactness and error reporting, and the sparse kernels
//! used by upscaling.

use nlmc_flow::linalg::{
    factor, norm_inf, solve_saddle, solve_spd, triple_product, MatrixOrdering, SaddleSystem,
    SparseMatrix, TripletBuilder,
};
use nlmc_flow::Error;

/// 1-D Laplacian with a mass shift: SPD, well conditioned.
fn shifted_laplacian(n: usize, shift: f64) -> SparseMatrix {
    let mut tb = TripletBuilder::new(n, n);
    for i in 0..n {
        tb.push(i, i, shift);
        if i + 1 < n {
            tb.push_pair(i, i + 1, 1.0);
        }
    }
    tb.build(true)
}

fn dense_matvec(d: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

#[test]
fn ldlt_reproduces_known_solution() {
    for (n, ordering) in [(40, MatrixOrdering::Natural), (40, MatrixOrdering::Rcm)] {
        let a = shifted_laplacian(n, 0.7);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 1.5).collect();
        let b = a.matvec(&x_true);
        let f = factor(&a, ordering).unwrap();
        let x = f.solve(&b);
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "{ordering:?}: error {err}");
    }
}

#[test]
fn solve_spd_reports_residual() {
    let a = shifted_laplacian(60, 1e-3);
    let x_true: Vec<f64> = (0..60).map(|i| (i % 7) as f64 - 3.0).collect();
    let b = a.matvec(&x_true);
    let (x, resid) = solve_spd(&a, &b).unwrap();
    assert!(resid < 1e-12, "relative residual {resid}");
    let worst = x
        .iter()
        .zip(&x_true)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0f64, f64::max);
    assert!(worst < 1e-9);
}

#[test]
fn zero_pivot_is_reported_with_its_index() {
    // Third row/column identically zero -> zero pivot at index 2.
    let mut tb = TripletBuilder::new(4, 4);
    tb.push(0, 0, 2.0);
    tb.push(1, 1, 2.0);
    tb.push(3, 3, 2.0);
    let a = tb.build(true);
    match factor(&a, MatrixOrdering::Natural) {
        Err(Error::Solver(msg)) => assert!(msg.contains("index 2"), "got: {msg}"),
        other => panic!("expected a solver error, got {other:?}"),
    }
}

/// Saddle problem small enough to verify by hand:
/// minimize 1/2 x'Ax - f'x subject to Bx = t.
#[test]
fn saddle_solution_satisfies_kkt() {
    let a = shifted_laplacian(8, 0.5);
    let mut bb = TripletBuilder::new(2, 8);
    for j in 0..4 {
        bb.push(0, j, 0.25);
    }
    for j in 4..8 {
        bb.push(1, j, 0.25);
    }
    let b = bb.build(false);
    let system = SaddleSystem {
        a: a.clone(),
        b: b.clone(),
        augment: None,
    };
    let sol = solve_saddle(system, &[1.0, 0.0], &|i| format!("row {i}")).unwrap();
    assert!(sol.constraint_residual < 1e-12);
    // KKT stationarity: A x + B' mu = 0 (zero load).
    let mut grad = a.matvec(&sol.primal);
    let bt = b.transpose();
    let correction = bt.matvec(&sol.multipliers);
    for (g, c) in grad.iter_mut().zip(&correction) {
        *g += c;
    }
    assert!(norm_inf(&grad) <= 1e-10 * (1.0 + norm_inf(&sol.multipliers)));
    // Constraint values: mean of first half 1, second half 0.
    let bx = b.matvec(&sol.primal);
    assert!((bx[0] - 1.0).abs() < 1e-12 && bx[1].abs() < 1e-12);
}

#[test]
fn duplicate_constraint_row_is_named() {
    let a = shifted_laplacian(6, 0.5);
    let mut bb = TripletBuilder::new(2, 6);
    for j in 0..6 {
        bb.push(0, j, 1.0);
        bb.push(1, j, 1.0); // same row again -> rank deficient
    }
    let b = bb.build(false);
    let system = SaddleSystem {
        a,
        b,
        augment: None,
    };
    let err = solve_saddle(system, &[1.0, 1.0], &|i| format!("constraint #{i}")).unwrap_err();
    match err {
        Error::Solver(msg) => assert!(
            msg.contains("constraint #") && msg.contains("rank-deficient"),
            "got: {msg}"
        ),
        other => panic!("expected solver error, got {other:?}"),
    }
}

/// A pure-Neumann operator (singular) with a mean constraint only solves with
/// the augmented form, mirroring whole-domain patches.
#[test]
fn augmented_form_handles_singular_flow_block() {
    let n = 10;
    let mut tb = TripletBuilder::new(n, n);
    for i in 0..n - 1 {
        tb.push_pair(i, i + 1, 1.0);
    }
    let a = tb.build(true); // Neumann Laplacian: constant null space
    let mut bb = TripletBuilder::new(1, n);
    for j in 0..n {
        bb.push(0, j, 1.0 / n as f64);
    }
    let b = bb.build(false);
    let rho = SaddleSystem::default_rho(&a, &b);
    let system = SaddleSystem {
        a: a.clone(),
        b: b.clone(),
        augment: Some(rho),
    };
    let sol = solve_saddle(system, &[3.0], &|_| "mean".into()).unwrap();
    assert!(sol.constraint_residual < 1e-12);
    // Stationarity on the ORIGINAL system: A x + B' mu = 0.
    let mut grad = a.matvec(&sol.primal);
    for (g, c) in grad.iter_mut().zip(b.transpose().matvec(&sol.multipliers)) {
        *g += c;
    }
    assert!(norm_inf(&grad) <= 1e-9 * (1.0 + norm_inf(&sol.multipliers)));
    // With A singular on constants, the minimizer under a mean constraint is
    // the constant vector itself.
    for &v in &sol.primal {
        assert!((v - 3.0).abs() < 1e-9, "expected the constant 3, got {v}");
    }
}

#[test]
fn triple_product_matches_dense() {
    // R: 3x5 with overlapping supports; A: 5x5 symmetric.
    let mut rb = TripletBuilder::new(3, 5);
    let entries = [
        (0, 0, 1.0),
        (0, 1, 0.5),
        (1, 1, 0.25),
        (1, 2, 1.5),
        (1, 3, -0.5),
        (2, 3, 2.0),
        (2, 4, 1.0),
    ];
    for (r, c, v) in entries {
        rb.push(r, c, v);
    }
    let r = rb.build(false);
    let a = shifted_laplacian(5, 0.3);
    let coarse = triple_product(&r, &a).unwrap();
    assert!(coarse.symmetric);
    let rd = r.to_dense();
    let ad = a.to_dense();
    for i in 0..3 {
        // row i of R*A
        let ra = dense_matvec(&ad, &rd[i]); // A symmetric, so A*r_i = (r_i A)'
        for j in 0..3 {
            let want: f64 = ra.iter().zip(&rd[j]).map(|(x, y)| x * y).sum();
            let got = coarse.get(i, j);
            assert!(
                (got - want).abs() <= 1e-13 * want.abs().max(1.0),
                "({i},{j}): {got} vs {want}"
            );
        }
    }
    // Bit-exact symmetry of the product.
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(coarse.get(i, j).to_bits(), coarse.get(j, i).to_bits());
        }
    }
}

#[test]
fn sparse_kernels_match_dense() {
    let a = shifted_laplacian(6, 0.4);
    // row_sums
    let sums = a.row_sums();
    let dense = a.to_dense();
    for (i, row) in dense.iter().enumerate() {
        let want: f64 = row.iter().sum();
        assert!((sums[i] - want).abs() < 1e-15);
    }
    // with_added_diag
    let delta: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
    let shifted = a.with_added_diag(&delta);
    for i in 0..6 {
        assert_eq!(shifted.get(i, i), a.get(i, i) + delta[i]);
    }
    // add_scaled
    let m = SparseMatrix::from_diag(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let k = a.add_scaled(&m, 10.0).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let want = a.get(i, j) + if i == j { 10.0 * (i + 1) as f64 } else { 0.0 };
            assert_eq!(k.get(i, j), want);
        }
    }
    // transpose
    let mut tb = TripletBuilder::new(2, 3);
    tb.push(0, 2, 5.0);
    tb.push(1, 0, -1.0);
    let r = tb.build(false);
    let rt = r.transpose();
    assert_eq!(rt.nrows(), 3);
    assert_eq!(rt.get(2, 0), 5.0);
    assert_eq!(rt.get(0, 1), -1.0);
}

#[test]
fn refinement_tightens_residual() {
    // Mildly ill-conditioned diagonal scaling stresses plain substitution.
    let n = 50;
    let mut tb = TripletBuilder::new(n, n);
    for i in 0..n {
        let scale = 10f64.powi((i % 13) as i32 - 6);
        tb.push(i, i, 2.0 * scale);
        if i + 1 < n {
            tb.push(i, i + 1, -0.5 * scale);
            tb.push(i + 1, i, -0.5 * scale);
        }
    }
    let a = tb.build(false).symmetrized();
    let x_true: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
    let b = a.matvec(&x_true);
    let f = factor(&a, MatrixOrdering::Natural).unwrap();
    let (x, resid) = f.solve_refined(&a, &b, 1e-15, 5);
    assert!(resid <= 1e-13, "refined residual {resid}");
    let raw = f.solve(&b);
    let norm_b = norm_inf(&b).max(1e-300);
    let raw_resid = {
        let ax = a.matvec(&raw);
        ax.iter()
            .zip(&b)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max)
            / norm_b
    };
    assert!(resid <= raw_resid * 1.0 + 1e-30, "refinement made things worse");
    let _ = x;
}

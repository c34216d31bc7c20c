use bullwhip_core::linalg::sym_eigen;
use bullwhip_core::sdp::{assemble, check_solution, solve, LmiBlock, SolveStatus, SolverOptions};
use bullwhip_core::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-5.0..5.0);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// min t s.t. tI - S ⪰ 0.
fn lambda_max(s: &Matrix) -> bullwhip_core::SdpProblem {
    let n = s.rows();
    assemble(
        1,
        vec![1.0],
        vec![LmiBlock::new(s.scale(-1.0), vec![Matrix::identity(n)])],
        vec!["t".into()],
    )
    .unwrap()
}

#[test]
fn largest_eigenvalue_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = SolverOptions::default();
    for case in 0..50 {
        let n = 1 + case % 6;
        let s = random_symmetric(n, &mut rng);
        let sol = solve(&lambda_max(&s), &opts);
        let want = sym_eigen(&s).unwrap().max();
        assert_eq!(sol.status, SolveStatus::Optimal, "case {case}");
        assert!(
            (sol.objective_value - want).abs() <= 1e-5,
            "case {case}: {} vs {want}",
            sol.objective_value
        );
    }
}

#[test]
fn scalar_bounds_are_exact() {
    let opts = SolverOptions::default();
    for (lo, hi) in [(-3.0, 5.0), (0.0, 1.0), (2.5, 2.5 + 1e-3), (-100.0, -99.0)] {
        // min x s.t. x ≥ lo, x ≤ hi
        let p = assemble(
            1,
            vec![1.0],
            vec![LmiBlock::scalar(-lo, &[1.0]), LmiBlock::scalar(hi, &[-1.0])],
            vec![],
        )
        .unwrap();
        let sol = solve(&p, &opts);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.z[0] - lo).abs() <= 1e-6, "{lo}: {}", sol.z[0]);
        // and the maximization direction
        let p = assemble(
            1,
            vec![-1.0],
            vec![LmiBlock::scalar(-lo, &[1.0]), LmiBlock::scalar(hi, &[-1.0])],
            vec![],
        )
        .unwrap();
        let sol = solve(&p, &opts);
        assert!((sol.z[0] - hi).abs() <= 1e-6);
    }
}

#[test]
fn smallest_eigenvalue_via_maximization() {
    // max s s.t. S - sI ⪰ 0
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 2..=5 {
        let s = random_symmetric(n, &mut rng);
        let p = assemble(
            1,
            vec![-1.0],
            vec![LmiBlock::new(s.clone(), vec![Matrix::identity(n).scale(-1.0)])],
            vec![],
        )
        .unwrap();
        let sol = solve(&p, &SolverOptions::default());
        let want = sym_eigen(&s).unwrap().min();
        assert!((sol.z[0] - want).abs() <= 1e-5);
    }
}

#[test]
fn infeasible_problem_is_flagged() {
    // x ≥ 1 and x ≤ 0
    let p = assemble(
        1,
        vec![1.0],
        vec![LmiBlock::scalar(-1.0, &[1.0]), LmiBlock::scalar(0.0, &[-1.0])],
        vec![],
    )
    .unwrap();
    assert_eq!(solve(&p, &SolverOptions::default()).status, SolveStatus::Infeasible);
    // a 2×2 block that is indefinite for every x
    let p = assemble(
        1,
        vec![0.0],
        vec![LmiBlock::new(
            Matrix::from_rows(&[[1.0, 0.0], [0.0, -1.0]]),
            vec![Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]])],
        )],
        vec![],
    )
    .unwrap();
    assert_eq!(solve(&p, &SolverOptions::default()).status, SolveStatus::Infeasible);
}

#[test]
fn solutions_are_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_symmetric(4, &mut rng);
    let a = solve(&lambda_max(&s), &SolverOptions::default());
    let b = solve(&lambda_max(&s), &SolverOptions::default());
    assert_eq!(a, b);
}

#[test]
fn reported_eigenvalues_agree_with_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_symmetric(5, &mut rng);
    let p = lambda_max(&s);
    let opts = SolverOptions::default();
    let sol = solve(&p, &opts);
    let report = check_solution(&p, &sol.z, opts.feas_tol);
    assert!(report.feasible);
    assert_eq!(report.min_eigen, sol.min_eigen_per_block);
}

fn sym_strategy(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-3.0f64..3.0, n * n).prop_map(move |d| {
        let m = Matrix::from_vec(n, n, d).unwrap();
        m.symmetrized()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn optimum_is_feasible_and_no_worse_than_oracle(s in (1usize..=5).prop_flat_map(sym_strategy)) {
        let opts = SolverOptions::default();
        let p = lambda_max(&s);
        let sol = solve(&p, &opts);
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        let report = check_solution(&p, &sol.z, opts.feas_tol);
        prop_assert!(report.feasible);
        let want = sym_eigen(&s).unwrap().max();
        // Feasible points can't beat the true optimum; the gap is tiny.
        prop_assert!(sol.objective_value >= want - opts.feas_tol);
        prop_assert!(sol.objective_value - want <= 1e-5);
    }

    #[test]
    fn central_path_decreases(s in (2usize..=4).prop_flat_map(sym_strategy)) {
        let sol = solve(&lambda_max(&s), &SolverOptions::default());
        for w in sol.central_path.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn shifting_the_matrix_shifts_the_optimum(
        s in (1usize..=4).prop_flat_map(sym_strategy),
        c in -10.0f64..10.0,
    ) {
        let n = s.rows();
        let opts = SolverOptions::default();
        let a = solve(&lambda_max(&s), &opts).objective_value;
        let shifted = &s + &Matrix::identity(n).scale(c);
        let b = solve(&lambda_max(&shifted), &opts).objective_value;
        prop_assert!((b - a - c).abs() <= 2e-5);
    }
}

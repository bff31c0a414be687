mod common;

use common::{max_diff, problem, random_vec, rng};
use faer::linalg::solvers::Solve;
use faer::Mat;
use proptest::prelude::*;
use vem_bddc::bddc::{BddcPreconditioner, PrimalKind};
use vem_bddc::krylov::{gmres, pcg, Identity, LinearOperator, SolverConfig};
use vem_bddc::linalg::{norm, symmetric_eigenvalues};
use vem_bddc::mesh::MeshFamily;
use vem_bddc::schur::InterfaceOperator;

/// QᵀΛQ with eigenvalues spread over [1, cond].
fn random_spd(seed: u64, n: usize, cond: f64) -> Mat<f64> {
    let mut r = rng(seed);
    let g = Mat::from_fn(n, n, |_, _| random_vec(&mut r, 1)[0]);
    let q = g.qr().compute_Q();
    let lam: Vec<f64> = (0..n).map(|i| cond.powf(i as f64 / (n - 1) as f64)).collect();
    let d = Mat::from_fn(n, n, |i, j| if i == j { lam[i] } else { 0.0 });
    let a = &q * d * q.transpose();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

fn residual(a: &Mat<f64>, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, y)| b - y).collect();
    norm(&r) / norm(b)
}

#[test]
fn pcg_matches_direct_solve_on_random_spd() {
    for trial in 0..100 {
        let a = random_spd(trial, 50, 1e3);
        let b = random_vec(&mut rng(1000 + trial), 50);
        let cfg = SolverConfig {
            tol: 1e-10,
            ..Default::default()
        };
        let (x, rep) = pcg(&a, &Identity(50), &b, &cfg).unwrap();
        let direct = a.partial_piv_lu().solve(Mat::from_fn(50, 1, |i, _| b[i]));
        let xd: Vec<f64> = (0..50).map(|i| direct[(i, 0)]).collect();
        assert!(rep.converged, "trial {trial}");
        assert!(residual(&a, &x, &b) <= 1e-9, "trial {trial}");
        assert!(max_diff(&x, &xd) <= 1e-6 * vem_bddc::linalg::norm_inf(&xd), "trial {trial}");
        let k = rep.condition.unwrap();
        assert!(k.kappa >= 1.0);
    }
}

#[test]
fn identity_preconditioner_meets_true_residual() {
    let a = random_spd(7, 50, 1e2);
    let b = random_vec(&mut rng(8), 50);
    let (x, rep) = pcg(&a, &Identity(50), &b, &SolverConfig::default()).unwrap();
    assert!(residual(&a, &x, &b) <= 1e-6);
    assert!((rep.true_residual_history.last().unwrap() - rep.final_residual()).abs() < 1e-12);
}

#[test]
fn max_iterations_gives_unconverged_report() {
    let a = random_spd(9, 50, 1e4);
    let b = random_vec(&mut rng(10), 50);
    let cfg = SolverConfig {
        max_iter: 3,
        ..Default::default()
    };
    let (_, rep) = pcg(&a, &Identity(50), &b, &cfg).unwrap();
    assert!(!rep.converged && rep.iterations == 3);
    let (_, rep) = gmres(&a, &b, &cfg).unwrap();
    assert!(!rep.converged && rep.iterations == 3);
}

#[test]
fn residual_csv_round_trip() {
    let a = random_spd(11, 20, 10.0);
    let b = random_vec(&mut rng(12), 20);
    let (_, rep) = pcg(&a, &Identity(20), &b, &SolverConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("res.csv");
    rep.write_residual_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iteration,residual"));
    let vals: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(vals, rep.residual_history);
}

fn interface_problem() -> (InterfaceOperator, BddcPreconditioner) {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let pre = BddcPreconditioner::new(&op, &pb.part, PrimalKind::VerticesPlusNormalAvg).unwrap();
    (op, pre)
}

#[test]
fn gmres_and_pcg_agree_on_interface_problem() {
    let (op, pre) = interface_problem();
    let g = op.rhs();
    let cfg = SolverConfig {
        tol: 1e-12,
        ..Default::default()
    };
    let (x, _) = pcg(&op, &pre, &g, &cfg).unwrap();
    let (y, _) = gmres(&op, &g, &cfg).unwrap();
    assert!(max_diff(&x, &y) <= 1e-8, "{:e}", max_diff(&x, &y));
}

#[test]
fn iteration_counts_are_deterministic() {
    let (op, pre) = interface_problem();
    let g = op.rhs();
    let cfg = SolverConfig::default();
    let a = pcg(&op, &pre, &g, &cfg).unwrap().1;
    let b = pcg(&op, &pre, &g, &cfg).unwrap().1;
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.residual_history, b.residual_history);
    let c = gmres(&op, &g, &cfg).unwrap().1;
    let d = gmres(&op, &g, &cfg).unwrap().1;
    assert_eq!(c.residual_history, d.residual_history);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let a = random_spd(1, 5, 2.0);
    assert!(pcg(&a, &Identity(5), &[1.0; 4], &SolverConfig::default()).is_err());
    assert!(gmres(&a, &[1.0; 6], &SolverConfig::default()).is_err());
    let bad = SolverConfig {
        tol: 0.0,
        ..Default::default()
    };
    assert!(pcg(&a, &Identity(5), &[1.0; 5], &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lanczos_estimates_interlace(seed in 0u64..1_000_000, n in 5usize..40, logc in 0.5f64..4.0, steps in 2usize..12) {
        let a = random_spd(seed, n, 10f64.powf(logc));
        let b = random_vec(&mut rng(seed ^ 0x5eed), n);
        let cfg = SolverConfig { max_iter: steps, tol: 1e-14, ..Default::default() };
        let (_, rep) = pcg(&a, &Identity(n), &b, &cfg).unwrap();
        let ev = symmetric_eigenvalues(&a).unwrap();
        let k = rep.condition.unwrap();
        prop_assert!(k.lambda_max <= ev[n - 1] + 1e-8);
        prop_assert!(k.lambda_min >= ev[0] - 1e-8);
        prop_assert!(k.kappa >= 1.0);
    }

    #[test]
    fn pcg_error_decreases_in_energy_norm(seed in 0u64..1_000_000) {
        let n = 30;
        let a = random_spd(seed, n, 1e3);
        let xs = random_vec(&mut rng(seed + 1), n);
        let b = a.apply_vec(&xs);
        let energy = |x: &[f64]| {
            let e: Vec<f64> = x.iter().zip(&xs).map(|(x, y)| x - y).collect();
            vem_bddc::linalg::dot(&e, &a.apply_vec(&e))
        };
        let mut last = f64::INFINITY;
        for steps in 1..15 {
            let cfg = SolverConfig { max_iter: steps, tol: 1e-14, ..Default::default() };
            let (x, _) = pcg(&a, &Identity(n), &b, &cfg).unwrap();
            let e = energy(&x);
            prop_assert!(e <= last * (1.0 + 1e-10));
            last = e;
        }
    }

    #[test]
    fn gmres_residual_is_monotone(seed in 0u64..1_000_000) {
        let n = 25;
        let mut r = rng(seed);
        let a = Mat::from_fn(n, n, |i, j| if i == j { 4.0 } else { 0.0 } + random_vec(&mut r, 1)[0]);
        let b = random_vec(&mut r, n);
        let (x, rep) = gmres(&a, &b, &SolverConfig { tol: 1e-10, ..Default::default() }).unwrap();
        prop_assert!(rep.converged);
        prop_assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(residual(&a, &x, &b) <= 1e-9);
    }
}

//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so the
//! lines are visible under `cargo test`.

use std::process::ExitCode;
use std::time::Instant;
use vem_bddc::bddc::{BddcPreconditioner, PrimalKind};
use vem_bddc::harness::{
    compare_to_reference, convergence_study, format_diff_table, run_cell, run_experiment, verify, ConvergenceSolver,
    ExactSolution, ExperimentSpec, MeshContext, Method, ResultRow, VerifyLevel,
};
use vem_bddc::krylov::{pcg, LinearOperator, SolverConfig};
use vem_bddc::linalg::norm;
use vem_bddc::mesh::{generate_mesh, MeshFamily};
use vem_bddc::partition::partition_regular;
use vem_bddc::schur::InterfaceOperator;
use vem_bddc::vem::{assemble, manufactured, solve_monolithic_direct};

const NORMAL: Method = Method::Pcg(PrimalKind::VerticesPlusNormalAvg);
const FULL: Method = Method::Pcg(PrimalKind::VerticesPlusFullAvg);

struct Suite {
    failed: Vec<String>,
    rows: Vec<ResultRow>,
}

impl Suite {
    fn report(&mut self, id: &str, name: &str, pass: bool, detail: String) {
        println!("[{}] {id}. {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id.to_string());
        }
    }
}

fn cell<'a>(rows: &'a [ResultRow], primal: &str, m: usize, n: usize) -> Option<&'a ResultRow> {
    rows.iter().find(|r| r.primal == primal && r.inv_big_h == m && r.inv_h == n)
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b)
}

fn criterion_1(s: &mut Suite) {
    let t = Instant::now();
    let mesh = generate_mesh(MeshFamily::Quad, 16, 1, 0).unwrap();
    let sys = assemble(&mesh, &vec![1.0; mesh.num_cells()], &|p| manufactured::load(p, 1.0)).unwrap();
    let (u0, p0) = solve_monolithic_direct(&sys).unwrap();
    let part = partition_regular(&mesh, 2).unwrap();
    let op = InterfaceOperator::new(&part, &sys).unwrap();
    let pre = BddcPreconditioner::new(&op, &part, PrimalKind::VerticesPlusNormalAvg).unwrap();
    let cfg = SolverConfig {
        tol: 1e-12,
        ..Default::default()
    };
    let (x, _) = pcg(&op, &pre, &op.rhs(), &cfg).unwrap();
    let (u, p) = op.recover(&part, &x);
    let (eu, ep) = (rel_err(&u, &u0), rel_err(&p, &p0));
    let secs = t.elapsed().as_secs_f64();
    s.report(
        "1",
        "oracle equivalence QUAD n=16 N=4",
        eu <= 1e-8 && ep <= 1e-8 && secs < 10.0,
        format!("rel. error u {eu:.1e}, p {ep:.1e}, {secs:.1}s"),
    );
}

fn criterion_2(s: &mut Suite) {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut lines = Vec::new();
    for fam in [MeshFamily::Quad, MeshFamily::Tri, MeshFamily::Hexa] {
        for (m, n) in [(2, 8), (4, 16), (8, 32)] {
            let ctx = MeshContext::generate(fam, n, 1, 100).unwrap();
            for run in run_cell(&ctx, m, &[NORMAL, FULL], &SolverConfig::default()) {
                let lmin = run.row.lambda_min.unwrap_or(f64::NAN);
                let dev = (lmin - 1.0).abs();
                if !(dev <= worst.0) {
                    worst = (dev, format!("{fam} ({m},{n}) {}", run.row.primal));
                }
                lines.push(format!("{fam}({m},{n}){}={lmin:.5}", run.row.primal));
            }
        }
    }
    // the exact spectrum of the smallest case, for reference
    let mesh = generate_mesh(MeshFamily::Quad, 8, 1, 0).unwrap();
    let sys = assemble(&mesh, &vec![1.0; mesh.num_cells()], &|p| manufactured::load(p, 1.0)).unwrap();
    let part = partition_regular(&mesh, 2).unwrap();
    let op = InterfaceOperator::new(&part, &sys).unwrap();
    let pre = BddcPreconditioner::new(&op, &part, PrimalKind::VerticesPlusNormalAvg).unwrap();
    let d = op.dim();
    let mut a = faer::Mat::<f64>::zeros(d, d);
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let z = pre.apply_vec(&op.apply_vec(&e));
        for i in 0..d {
            a[(i, j)] = z[i];
        }
    }
    let mut ev: Vec<f64> = a.eigenvalues().unwrap().iter().map(|c| c.re).collect();
    ev.sort_by(f64::total_cmp);
    let dense_min = ev.iter().copied().find(|&v| v > 1e-8).unwrap();
    s.report(
        "2",
        "Lanczos λ_min in [0.9999, 1.0001]",
        worst.0 <= 1e-4,
        format!(
            "worst |λ_min - 1| = {:.1e} at {}; dense smallest nonzero eigenvalue QUAD (2,8) v+n = {dense_min:.10}; {}",
            worst.0,
            worst.1,
            lines.join(" ")
        ),
    );
}

fn criterion_3(s: &mut Suite, rows: &[ResultRow]) {
    let pts: Vec<(f64, f64)> = [16, 32, 64, 128]
        .iter()
        .filter_map(|&n| cell(rows, "v+f", 4, n).and_then(|r| Some(((n / 4) as f64, r.kappa?))))
        .collect();
    let monotone = pts.len() == 4 && pts.windows(2).all(|w| w[1].1 > w[0].1);
    let x: Vec<f64> = pts.iter().map(|p| (1.0 + p.0.ln()).powi(2)).collect();
    let k: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let c = x.iter().zip(&k).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let fit: Vec<f64> = x.iter().map(|a| c * a).collect();
    let resid = rel_err(&fit, &k);
    s.report(
        "3",
        "quasi-optimality QUAD 1/H=4 v+f",
        monotone && c > 0.0 && resid <= 0.25,
        format!(
            "κ₂ at H/h=4,8,16,32: {:?}; C = {c:.3}, relative fit residual {:.1}%",
            k.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>(),
            100.0 * resid
        ),
    );
}

/// Judged on v+f, whose published diagonal the criterion cites; the published
/// v+n diagonals spread wider than the band, so v+n is reported only.
fn criterion_4(s: &mut Suite, rows: &[ResultRow]) {
    let mut ok = false;
    let mut parts = Vec::new();
    for primal in ["v+f", "v+n"] {
        let its: Vec<usize> = [4, 8, 16, 32]
            .iter()
            .filter_map(|&m| cell(rows, primal, m, 4 * m).map(|r| r.iterations))
            .collect();
        let spread = its.iter().max().unwrap_or(&0) - its.iter().min().unwrap_or(&0);
        if primal == "v+f" {
            ok = its.len() == 4 && spread <= 3;
        }
        parts.push(format!("{primal} {its:?} (spread {spread})"));
    }
    s.report("4", "scalability QUAD H/h=4, N=16..1024 (v+f; v+n for reference)", ok, parts.join("; "));
}

fn criterion_5(s: &mut Suite, rows: &[ResultRow], secs: f64) {
    let mut ok = secs < 1800.0;
    let mut parts = Vec::new();
    for (id, primal) in [(3, "v+n"), (4, "v+f")] {
        let sub: Vec<ResultRow> = rows.iter().filter(|r| r.primal == primal).cloned().collect();
        let diff = compare_to_reference(id, &sub);
        let out: Vec<String> = diff
            .iter()
            .filter(|d| !d.within_band)
            .map(|d| {
                format!(
                    "({},{}) κ {:.2} vs {:.2}, it {} vs {}",
                    d.inv_big_h,
                    d.inv_h,
                    d.kappa.unwrap_or(f64::NAN),
                    d.ref_kappa.unwrap_or(f64::NAN),
                    d.iterations,
                    d.ref_iterations
                )
            })
            .collect();
        ok &= diff.len() == 15 && out.is_empty();
        parts.push(format!("table {id}: {} of {} in band {out:?}", diff.len() - out.len(), diff.len()));
        print!("{}", format_diff_table(&diff));
    }
    s.report("5", "QUAD tables 3a/4a within ±4 it, ±30% κ₂", ok, format!("{}; sweep {secs:.0}s", parts.join("; ")));
}

fn criterion_6(s: &mut Suite) {
    let spec = ExperimentSpec {
        n: vec![8, 16, 32],
        m: vec![2, 4, 8],
        methods: vec![Method::Gmres, Method::Pcg(PrimalKind::VerticesOnly)],
        solver: SolverConfig {
            allow_indefinite: true,
            ..Default::default()
        },
        ..ExperimentSpec::table(1, MeshFamily::Quad).unwrap()
    };
    let rows = run_experiment(&spec, None).unwrap();
    let g = |m, n| cell(&rows, "-", m, n).filter(|r| r.converged).map(|r| r.iterations);
    let v: Vec<&ResultRow> = rows.iter().filter(|r| r.primal == "v").collect();
    let v_max = v.iter().map(|r| r.iterations).max().unwrap_or(usize::MAX);
    let indef: usize = v.iter().map(|r| r.indefinite_steps).sum();
    let ok = match (g(2, 8), g(8, 32)) {
        (Some(a), Some(b)) => b >= 3 * a && v.iter().all(|r| r.converged) && v_max <= 30,
        _ => false,
    };
    s.report(
        "6",
        "GMRES vs vertex-only BDDC trend",
        ok,
        format!(
            "GMRES (2,8) {:?} -> (8,32) {:?}; vertex-only PCG {:?} (max {v_max}, {indef} indefinite steps continued)",
            g(2, 8),
            g(8, 32),
            v.iter().map(|r| ((r.inv_big_h, r.inv_h), r.iterations)).collect::<Vec<_>>()
        ),
    );
    s.rows.extend(rows);
}

fn criterion_7(s: &mut Suite) {
    let mut by: Vec<(String, f64, usize)> = Vec::new();
    for r in s.rows.iter().filter(|r| r.converged) {
        let key = format!("{} {}", r.method, r.primal);
        let d = r.div_max.unwrap_or(f64::INFINITY);
        match by.iter_mut().find(|e| e.0 == key) {
            Some(e) => {
                e.1 = e.1.max(d);
                e.2 += 1;
            }
            None => by.push((key, d, 1)),
        }
    }
    let worst = by.iter().map(|e| e.1).fold(0.0, f64::max);
    s.report(
        "7",
        "‖Bu_h‖∞ ≤ 1e-9 on every converged solve",
        worst <= 1e-9 && !by.is_empty(),
        by.iter().map(|(k, d, c)| format!("{k}: max {d:.1e} over {c} solves")).collect::<Vec<_>>().join("; "),
    );
}

fn criterion_8(s: &mut Suite) {
    let rows = convergence_study(MeshFamily::Quad, &[8, 16, 32], ConvergenceSolver::Monolithic, &ExactSolution::MANUFACTURED, 1).unwrap();
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.velocity_rate).collect();
    let prates: Vec<f64> = rows.iter().filter_map(|r| r.pressure_rate).collect();
    s.report(
        "8",
        "VEM velocity H¹ rate ≥ 1.9 on QUAD 8→16→32",
        rates.len() == 2 && rates.iter().all(|&r| r >= 1.9),
        format!("velocity rates {rates:.3?}, pressure rates {prates:.3?}"),
    );
}

fn criterion_9(s: &mut Suite) {
    let rep = verify(VerifyLevel::Full);
    let fails: Vec<String> = rep.failures().iter().map(|c| c.name.clone()).collect();
    s.report(
        "9",
        "property suites (verify --level full)",
        rep.passed(),
        format!("{} checks, failed: {fails:?}", rep.checks.len()),
    );
}

fn cvt_qualitative(s: &mut Suite) {
    let mut ok = false;
    let mut parts = Vec::new();
    let mut rows = Vec::new();
    for m in [4, 8, 16, 32] {
        let ctx = MeshContext::generate(MeshFamily::Cvt, 4 * m, 1, 100).unwrap();
        rows.extend(run_cell(&ctx, m, &[NORMAL, FULL], &SolverConfig::default()).into_iter().map(|r| r.row));
    }
    for primal in ["v+f", "v+n"] {
        let sub: Vec<&ResultRow> = rows.iter().filter(|r| r.primal == primal).collect();
        let its: Vec<usize> = sub.iter().map(|r| r.iterations).collect();
        let spread = its.iter().max().unwrap() - its.iter().min().unwrap();
        if primal == "v+f" {
            ok = sub.iter().all(|r| r.converged) && spread <= 8;
        }
        let kappas: Vec<String> = sub.iter().map(|r| r.kappa.map_or("-".into(), |k| format!("{k:.2}"))).collect();
        parts.push(format!("{primal} its {its:?} (spread {spread}) κ₂ {kappas:?}"));
    }
    s.rows.extend(rows);
    s.report("CVT", "bounded iterations under scaling, H/h=4 (v+f; v+n for reference)", ok, parts.join("; "));
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let t = Instant::now();
    let mut s = Suite {
        failed: Vec::new(),
        rows: Vec::new(),
    };
    criterion_1(&mut s);
    criterion_2(&mut s);
    let sweep_start = Instant::now();
    let spec = ExperimentSpec {
        methods: vec![NORMAL, FULL],
        ..ExperimentSpec::table(3, MeshFamily::Quad).unwrap()
    };
    let rows = run_experiment(&spec, None).unwrap();
    let sweep_secs = sweep_start.elapsed().as_secs_f64();
    criterion_3(&mut s, &rows);
    criterion_4(&mut s, &rows);
    criterion_5(&mut s, &rows, sweep_secs);
    s.rows.extend(rows);
    criterion_6(&mut s);
    cvt_qualitative(&mut s);
    criterion_7(&mut s);
    criterion_8(&mut s);
    criterion_9(&mut s);
    println!("acceptance: {} failed {:?} ({:.0}s)", s.failed.len(), s.failed, t.elapsed().as_secs_f64());
    if s.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

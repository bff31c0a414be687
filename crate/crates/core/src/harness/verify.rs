use super::experiment::{run_experiment, ExperimentSpec, ResultRow};
use super::reference::{compare_to_reference, format_diff_table, DiffRow};
use crate::bddc::{BddcPreconditioner, PartialVector, PrimalKind};
use crate::error::{Error, Result};
use crate::krylov::{lanczos_condition_estimate, pcg, Identity, LinearOperator, SolverConfig};
use crate::linalg::{dot, norm, norm_inf, symmetric_eigenvalues};
use crate::mesh::{generate_mesh, MeshFamily};
use crate::partition::{partition_regular, SubdomainPartition};
use crate::schur::InterfaceOperator;
use crate::vem::manufactured::load;
use crate::vem::quadrature::gauss_lobatto_edge_rule;
use crate::vem::{assemble, solve_monolithic_direct, GlobalSystem};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum VerifyLevel {
    /// unit invariants on tiny meshes
    Fast,
    /// adds oracle cross-checks of the interface operator and BDDC
    Full,
    /// adds the QUAD table sweeps and a diff against the bundled values
    Tables,
}

impl FromStr for VerifyLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(VerifyLevel::Fast),
            "full" => Ok(VerifyLevel::Full),
            "tables" => Ok(VerifyLevel::Tables),
            _ => Err(Error::InvalidArgument(format!("unknown verify level '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub diff: Vec<DiffRow>,
    pub table_rows: Vec<ResultRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn record(&mut self, name: &str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        if !self.diff.is_empty() {
            write!(f, "\n{}", format_diff_table(&self.diff))?;
        }
        let fails = self.failures().len();
        write!(f, "{} checks, {} failed", self.checks.len(), fails)
    }
}

struct Small {
    sys: GlobalSystem,
    part: SubdomainPartition,
    op: InterfaceOperator,
}

fn small(family: MeshFamily, n: usize, m: usize) -> Result<Small> {
    let mesh = generate_mesh(family, n, 1, 100)?;
    let sys = assemble(&mesh, &vec![1.0; mesh.num_cells()], &|p| load(p, 1.0))?;
    let part = partition_regular(&mesh, m)?;
    let op = InterfaceOperator::new(&part, &sys)?;
    Ok(Small { sys, part, op })
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_partial(pre: &BddcPreconditioner, rng: &mut ChaCha8Rng, zero_mean_p0: bool) -> PartialVector {
    let mut w = PartialVector {
        primal: random_vec(rng, pre.num_primal()),
        p0: random_vec(rng, pre.num_subdomains()),
        dual: pre.dual_sizes().into_iter().map(|n| random_vec(rng, n)).collect(),
    };
    if zero_mean_p0 {
        pre.project_pressure(&mut w.p0);
    }
    w
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn fast_checks(rep: &mut VerifyReport) {
    rep.record("edge quadrature exact to degree 3", (|| {
        let (x, w) = gauss_lobatto_edge_rule(3)?;
        let err = (0..=3)
            .map(|d| {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                (q - exact).abs()
            })
            .fold(0.0, f64::max);
        Ok((err <= 1e-14, format!("max error {err:.1e}")))
    })());
    rep.record("generated meshes are star-shaped", (|| {
        let mut bad = Vec::new();
        for fam in MeshFamily::ALL {
            let q = generate_mesh(fam, 8, 1, 100)?.quality_report();
            if !q.star_shaped.iter().all(|&b| b) {
                bad.push(fam.to_string());
            }
        }
        Ok((bad.is_empty(), if bad.is_empty() { "all families".into() } else { bad.join(",") }))
    })());
    rep.record("counting scaling is a partition of unity", (|| {
        let mut worst: f64 = 0.0;
        for fam in [MeshFamily::Quad, MeshFamily::Cvt] {
            let mesh = generate_mesh(fam, 16, 1, 100)?;
            let part = partition_regular(&mesh, 4)?;
            let mut sum = vec![0.0; part.num_interface_dofs()];
            for list in &part.subdomain_interface {
                for &g in list {
                    sum[g] += 1.0 / part.multiplicity[g] as f64;
                }
            }
            worst = worst.max(sum.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max));
        }
        Ok((worst <= 1e-15, format!("max |Σδ† - 1| = {worst:.1e}")))
    })());
    rep.record("monolithic velocity is divergence-free", (|| {
        let mesh = generate_mesh(MeshFamily::Hexa, 8, 1, 100)?;
        let sys = assemble(&mesh, &vec![1.0; mesh.num_cells()], &|p| load(p, 1.0))?;
        let (u, _) = solve_monolithic_direct(&sys)?;
        let d = norm_inf(&sys.b.mul_vec(&u));
        Ok((d <= 1e-9, format!("‖Bu‖∞ = {d:.1e}")))
    })());
    rep.record("PCG and Lanczos on known spectra", (|| {
        let b = vec![1.0, -2.0, 0.5, 3.0, 1.0];
        let (_, r) = pcg(&Identity(5), &Identity(5), &b, &SolverConfig::default()).map_err(Error::from)?;
        let k1 = r.condition.map_or(f64::NAN, |c| c.kappa);
        let d = Mat::from_fn(2, 2, |i, j| if i == j { [1.0, 4.0][i] } else { 0.0 });
        let (_, r) = pcg(&d, &Identity(2), &[1.0, 1.0], &SolverConfig::default()).map_err(Error::from)?;
        let k4 = lanczos_condition_estimate(&r.alphas, &r.betas).map_or(f64::NAN, |c| c.kappa);
        let ok = (k1 - 1.0).abs() < 1e-12 && (k4 - 4.0).abs() < 1e-10;
        Ok((ok, format!("κ(I) = {k1}, κ(diag(1,4)) = {k4}")))
    })());
    rep.record("interface operator is symmetric", (|| {
        let s = small(MeshFamily::Tri, 8, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y) = (random_vec(&mut rng, s.op.dim()), random_vec(&mut rng, s.op.dim()));
        let d = (dot(&x, &s.op.apply_vec(&y)) - dot(&y, &s.op.apply_vec(&x))).abs();
        let scale = norm(&x) * norm(&s.op.apply_vec(&y));
        Ok((d <= 1e-12 * scale, format!("|xᵀŜy - yᵀŜx| = {d:.1e}")))
    })());
}

fn full_checks(rep: &mut VerifyReport) {
    rep.record("interface BDDC-PCG matches monolithic solve (QUAD n=16, N=4)", (|| {
        let s = small(MeshFamily::Quad, 16, 2)?;
        let (u0, p0) = solve_monolithic_direct(&s.sys)?;
        let pre = BddcPreconditioner::new(&s.op, &s.part, PrimalKind::VerticesPlusNormalAvg)?;
        let cfg = SolverConfig {
            tol: 1e-12,
            ..Default::default()
        };
        let (x, _) = pcg(&s.op, &pre, &s.op.rhs(), &cfg).map_err(Error::from)?;
        let (u, p) = s.op.recover(&s.part, &x);
        let eu = norm(&u.iter().zip(&u0).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&u0);
        let ep = norm(&p.iter().zip(&p0).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&p0);
        Ok((eu <= 1e-8 && ep <= 1e-8, format!("rel. error u {eu:.1e}, p {ep:.1e}")))
    })());
    rep.record("local velocity Schur complements are SPD", (|| {
        let s = small(MeshFamily::Cvt, 8, 2)?;
        let mut worst = f64::INFINITY;
        let mut asym: f64 = 0.0;
        for solver in &s.op.solvers {
            let n = solver.num_interface();
            let mut m = Mat::<f64>::zeros(n, n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                let (y, _) = solver.apply_schur(&e, 0.0);
                for i in 0..n {
                    m[(i, j)] = y[i];
                }
            }
            for i in 0..n {
                for j in 0..n {
                    asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
            let ev = symmetric_eigenvalues(&m)?;
            worst = worst.min(ev[0] / ev[n - 1]);
        }
        Ok((worst > 0.0 && asym <= 1e-10, format!("min λ_min/λ_max {worst:.2e}, asymmetry {asym:.1e}")))
    })());
    for fam in [MeshFamily::Quad, MeshFamily::Tri, MeshFamily::Hexa] {
        for kind in [PrimalKind::VerticesPlusNormalAvg, PrimalKind::VerticesPlusFullAvg] {
            let built = small(fam, 16, 4).and_then(|s| {
                let pre = BddcPreconditioner::new(&s.op, &s.part, kind)?;
                Ok((s, pre))
            });
            let (s, pre) = match built {
                Ok(x) => x,
                Err(e) => {
                    rep.record(&format!("BDDC setup {fam} {kind}"), Err(e));
                    continue;
                }
            };
            let d = pre.assumption1_defect();
            rep.record(&format!("dual flux-free ({fam} {kind})"), Ok((d <= 1e-12, format!("max |B_0Δ v_Δ| = {d:.1e}"))));
            let a = pre.coarse_asymmetry();
            let scale = pre.coarse_matrix().norm_max();
            rep.record(
                &format!("coarse matrix symmetric ({fam} {kind})"),
                Ok((a <= 1e-12 * scale.max(1.0), format!("{a:.1e}"))),
            );
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let ut = random_vec(&mut rng, s.op.num_interface());
            let p0 = random_vec(&mut rng, s.op.num_subdomains());
            let (back, _) = pre.assemble_changed(&pre.restrict_changed_scaled(&ut, &p0));
            let e = max_diff(&back, &ut);
            rep.record(&format!("R̃ᵀR̃_D = I ({fam} {kind})"), Ok((e <= 1e-14, format!("{e:.1e}"))));
            let w = random_partial(&pre, &mut rng, false);
            let ed = |w: &PartialVector| {
                let (u, p) = pre.assemble_changed_scaled(w);
                pre.restrict_changed(&u, &p)
            };
            let once = ed(&w);
            let e = max_diff(&once.flatten(), &ed(&once).flatten());
            rep.record(&format!("E_D idempotent ({fam} {kind})"), Ok((e <= 1e-12, format!("{e:.1e}"))));
        }
    }
    rep.record("partially assembled solve inverts S̃ (QUAD n=8, N=4, v+f)", (|| {
        let s = small(MeshFamily::Quad, 8, 2)?;
        let pre = BddcPreconditioner::new(&s.op, &s.part, PrimalKind::VerticesPlusFullAvg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let x = random_partial(&pre, &mut rng, true);
            let y = pre.solve_partial(&pre.apply_partial_schur(&s.op, &x));
            worst = worst.max(max_diff(&x.flatten(), &y.flatten()));
        }
        Ok((worst <= 1e-9, format!("max error {worst:.1e}")))
    })());
}

fn table_checks(rep: &mut VerifyReport) {
    let mut by_table: Vec<Vec<ResultRow>> = Vec::new();
    for id in 1..=4 {
        let rows = ExperimentSpec::table(id, MeshFamily::Quad).and_then(|spec| run_experiment(&spec, None));
        match rows {
            Ok(rows) => {
                rep.diff.extend(compare_to_reference(id, &rows));
                rep.table_rows.extend(rows.iter().cloned());
                by_table.push(rows);
            }
            Err(e) => {
                rep.record(&format!("table {id} QUAD"), Err(e));
                by_table.push(Vec::new());
            }
        }
    }
    let find = |t: &[ResultRow], m: usize, n: usize| t.iter().find(|r| r.inv_big_h == m && r.inv_h == n).map(|r| r.iterations);
    rep.record("table 1 QUAD: GMRES iterations at least triple from (2,8) to (8,32)", (|| {
        let (a, b) = (find(&by_table[0], 2, 8), find(&by_table[0], 8, 32));
        match (a, b) {
            (Some(a), Some(b)) => Ok((b >= 3 * a, format!("{a} -> {b}"))),
            _ => Ok((false, "missing cells".into())),
        }
    })());
    rep.record("table 2 QUAD: vertex-only PCG converges within 30 iterations up to (8,32)", (|| {
        let rows: Vec<&ResultRow> = by_table[1].iter().filter(|r| r.inv_h <= 32).collect();
        let worst = rows.iter().map(|r| r.iterations).max().unwrap_or(usize::MAX);
        let ok = !rows.is_empty() && rows.iter().all(|r| r.converged) && worst <= 30;
        Ok((ok, format!("max {worst} iterations")))
    })());
    for id in [3, 4] {
        let d: Vec<&DiffRow> = rep.diff.iter().filter(|r| r.table == id).collect();
        let out = d.iter().filter(|r| !r.within_band).count();
        rep.checks.push(Check {
            name: format!("table {id} QUAD within ±4 iterations and ±30% κ₂"),
            passed: d.len() == 15 && out == 0,
            detail: format!("{} of {} cells outside the band", out, d.len()),
        });
    }
    let div = rep.table_rows.iter().filter_map(|r| r.div_max).fold(0.0, f64::max);
    rep.checks.push(Check {
        name: "table runs: discrete velocity divergence-free".into(),
        passed: div <= 1e-9,
        detail: format!("max ‖Bu‖∞ = {div:.1e}"),
    });
}

/// Runs all checks up to `level`.
pub fn verify(level: VerifyLevel) -> VerifyReport {
    let mut rep = VerifyReport::default();
    fast_checks(&mut rep);
    if level >= VerifyLevel::Full {
        full_checks(&mut rep);
    }
    if level >= VerifyLevel::Tables {
        table_checks(&mut rep);
    }
    rep
}

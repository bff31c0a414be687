use super::experiment::csv_error;
use crate::bddc::{BddcPreconditioner, PrimalKind};
use crate::error::{Error, Result};
use crate::krylov::{pcg, SolverConfig};
use crate::linalg::norm_inf;
use crate::mesh::{generate_mesh, MeshFamily, Point2};
use crate::partition::partition_regular;
use crate::schur::InterfaceOperator;
use crate::vem::manufactured::{self, pressure_l2_error, velocity_h1_error};
use crate::vem::{assemble, solve_monolithic_direct};
use serde::Serialize;
use std::path::Path;

/// Load and exact fields for ν = 1.
#[derive(Clone, Copy)]
pub struct ExactSolution {
    pub load: fn(Point2) -> [f64; 2],
    pub velocity_gradient: fn(Point2) -> [[f64; 2]; 2],
    pub pressure: fn(Point2) -> f64,
}

impl ExactSolution {
    pub const MANUFACTURED: ExactSolution = ExactSolution {
        load: |p| manufactured::load(p, 1.0),
        velocity_gradient: manufactured::exact_velocity_gradient,
        pressure: manufactured::exact_pressure,
    };

    pub const ZERO: ExactSolution = ExactSolution {
        load: |_| [0.0; 2],
        velocity_gradient: |_| [[0.0; 2]; 2],
        pressure: |_| 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceSolver {
    Monolithic,
    /// BDDC-PCG on `m × m` subdomains
    Interface { m: usize, primal: PrimalKind },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub family: String,
    pub n: usize,
    pub h: f64,
    pub velocity_h1_error: f64,
    pub pressure_l2_error: f64,
    pub velocity_rate: Option<f64>,
    pub pressure_rate: Option<f64>,
    pub div_max: f64,
}

/// Errors against `exact` on meshes `ns`, with rates from consecutive pairs.
pub fn convergence_study(
    family: MeshFamily,
    ns: &[usize],
    solver: ConvergenceSolver,
    exact: &ExactSolution,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in ns {
        let mesh = generate_mesh(family, n, seed, 100)?;
        let nu = vec![1.0; mesh.num_cells()];
        let load = exact.load;
        let sys = assemble(&mesh, &nu, &move |p| load(p))?;
        let (u, p) = match solver {
            ConvergenceSolver::Monolithic => solve_monolithic_direct(&sys)?,
            ConvergenceSolver::Interface { m, primal } => {
                let part = partition_regular(&mesh, m)?;
                let op = InterfaceOperator::new(&part, &sys)?;
                let pre = BddcPreconditioner::new(&op, &part, primal)?;
                let cfg = SolverConfig {
                    tol: 1e-10,
                    ..Default::default()
                };
                let (x, rep) = pcg(&op, &pre, &op.rhs(), &cfg)?;
                if !rep.converged {
                    return Err(Error::Breakdown {
                        iterations: rep.iterations,
                        msg: "interface solve did not converge".into(),
                    });
                }
                op.recover(&part, &x)
            }
        };
        let h = mesh.h();
        let eu = velocity_h1_error(&mesh, &sys, &u, &exact.velocity_gradient);
        let ep = pressure_l2_error(&mesh, &p, &exact.pressure);
        let rate = |e0: f64, e1: f64, h0: f64| {
            (e0 > 0.0 && e1 > 0.0).then(|| (e0 / e1).ln() / (h0 / h).ln())
        };
        let (velocity_rate, pressure_rate) = match rows.last() {
            Some(prev) => (
                rate(prev.velocity_h1_error, eu, prev.h),
                rate(prev.pressure_l2_error, ep, prev.h),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            family: family.to_string(),
            n,
            h,
            velocity_h1_error: eu,
            pressure_l2_error: ep,
            velocity_rate,
            pressure_rate,
            div_max: norm_inf(&sys.b.mul_vec(&u)),
        });
    }
    Ok(rows)
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

use crate::bddc::{BddcPreconditioner, PrimalKind};
use crate::error::{Error, Result};
use crate::krylov::{gmres, pcg, KrylovError, SolveReport, SolverConfig};
use crate::linalg::norm_inf;
use crate::mesh::{generate_mesh, MeshFamily, PolygonalMesh};
use crate::partition::{partition_regular, SubdomainPartition};
use crate::schur::InterfaceOperator;
use crate::vem::manufactured::{exact_pressure, exact_velocity_gradient, load, pressure_l2_error, velocity_h1_error};
use crate::vem::{assemble, GlobalSystem};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// unpreconditioned GMRES on the interface problem
    Gmres,
    /// BDDC-preconditioned CG
    Pcg(PrimalKind),
}

impl Method {
    pub fn solver_name(self) -> &'static str {
        match self {
            Method::Gmres => "gmres",
            Method::Pcg(_) => "pcg",
        }
    }

    pub fn primal_label(self) -> &'static str {
        match self {
            Method::Gmres => "-",
            Method::Pcg(k) => k.label(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Gmres => f.write_str("gmres"),
            Method::Pcg(k) => write!(f, "pcg:{k}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("gmres") => Ok(Method::Gmres),
            Some((m, k)) if m.eq_ignore_ascii_case("pcg") => Ok(Method::Pcg(k.parse()?)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method '{s}' (expected gmres or pcg:<v|v+n|v+f|v+x>)"
            ))),
        }
    }
}

/// A sweep over fine mesh sizes `n = 1/h` and subdomains per side `m = 1/H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub family: MeshFamily,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    pub seed: u64,
    pub lloyd_iters: usize,
    /// cells with `n < min_ratio * m` are skipped (the tables' blank cells)
    pub min_ratio: usize,
}

impl ExperimentSpec {
    pub const TABLE_N: [usize; 5] = [8, 16, 32, 64, 128];
    pub const TABLE_M: [usize; 5] = [2, 4, 8, 16, 32];

    /// Spec for one of the four reference tables.
    pub fn table(id: usize, family: MeshFamily) -> Result<Self> {
        let (method, allow_indefinite) = match id {
            1 => (Method::Gmres, false),
            // vertex constraints alone leave M⁻¹ indefinite on fluxes; the
            // iteration is continued and the indefinite steps counted
            2 => (Method::Pcg(PrimalKind::VerticesOnly), true),
            3 => (Method::Pcg(PrimalKind::VerticesPlusNormalAvg), false),
            4 => (Method::Pcg(PrimalKind::VerticesPlusFullAvg), false),
            _ => return Err(Error::InvalidArgument(format!("table id {id} is not in 1..=4"))),
        };
        Ok(ExperimentSpec {
            family,
            n: Self::TABLE_N.to_vec(),
            m: Self::TABLE_M.to_vec(),
            methods: vec![method],
            solver: SolverConfig {
                allow_indefinite,
                ..Default::default()
            },
            seed: 1,
            lloyd_iters: 100,
            min_ratio: 4,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n.is_empty() || self.m.is_empty() || self.methods.is_empty() {
            return bad("experiment needs at least one n, one m and one method".into());
        }
        for &n in &self.n {
            if !n.is_power_of_two() || !(8..=128).contains(&n) {
                return bad(format!("1/h = {n} is not a power of two in 8..=128"));
            }
        }
        for &m in &self.m {
            if !m.is_power_of_two() || !(2..=32).contains(&m) {
                return bad(format!("1/H = {m} is not a power of two in 2..=32"));
            }
        }
        if self.min_ratio == 0 {
            return bad("min_ratio must be positive".into());
        }
        self.solver.validate()
    }

    /// `(n, m)` pairs that are run, grouped by n.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &m in &self.m {
                if n >= self.min_ratio * m {
                    out.push((n, m));
                }
            }
        }
        out
    }
}

/// One CSV line. The first eleven columns are the reported quantities; the
/// rest make the run auditable and replayable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub family: String,
    pub inv_h: usize,
    #[serde(rename = "inv_H")]
    pub inv_big_h: usize,
    pub primal: String,
    pub iterations: usize,
    pub kappa: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub velocity_h1_error: Option<f64>,
    pub pressure_l2_error: Option<f64>,
    pub wall_time_s: f64,
    pub method: String,
    pub converged: bool,
    pub indefinite_steps: usize,
    pub div_max: Option<f64>,
    pub interface_dofs: usize,
    pub mesh_sha256: String,
    pub partition_sha256: String,
    pub status: String,
}

pub fn fingerprint(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Mesh and assembled system shared by every partition of one `n`.
#[derive(Debug)]
pub struct MeshContext {
    /// cells per side (1/h)
    pub n: usize,
    pub mesh: PolygonalMesh,
    pub sys: GlobalSystem,
    pub mesh_sha256: String,
    pub setup_s: f64,
}

impl MeshContext {
    pub fn generate(family: MeshFamily, n: usize, seed: u64, lloyd_iters: usize) -> Result<Self> {
        let t = Instant::now();
        let mesh = generate_mesh(family, n, seed, lloyd_iters)?;
        Self::from_mesh(mesh, Some(n), t)
    }

    /// `n` defaults to an estimate from the cell count.
    pub fn from_mesh(mesh: PolygonalMesh, n: Option<usize>, started: Instant) -> Result<Self> {
        let nu = vec![1.0; mesh.num_cells()];
        let sys = assemble(&mesh, &nu, &|p| load(p, 1.0))?;
        let mesh_sha256 = fingerprint(&mesh.to_text());
        Ok(MeshContext {
            n: n.unwrap_or_else(|| estimate_n(&mesh)),
            mesh,
            sys,
            mesh_sha256,
            setup_s: started.elapsed().as_secs_f64(),
        })
    }
}

/// Result of one method on one partition, with the recovered fields.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub row: ResultRow,
    pub report: Option<SolveReport>,
    /// velocity on free dofs and cell pressures (empty unless solved)
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

fn solve_interface(
    op: &InterfaceOperator,
    part: &SubdomainPartition,
    method: Method,
    cfg: &SolverConfig,
) -> Result<std::result::Result<(Vec<f64>, SolveReport), KrylovError>> {
    let g = op.rhs();
    Ok(match method {
        Method::Gmres => gmres(op, &g, cfg),
        Method::Pcg(kind) => {
            let pre = BddcPreconditioner::new(op, part, kind)?;
            pcg(op, &pre, &g, cfg)
        }
    })
}

/// Partitions `ctx` into `m × m` subdomains and runs every method on the
/// shared interface operator. Failures end up in `status`, not as errors.
pub fn run_cell(ctx: &MeshContext, m: usize, methods: &[Method], cfg: &SolverConfig) -> Vec<CellRun> {
    let t0 = Instant::now();
    let blank = |method: Method, status: String, part_sha: String, n_gamma: usize| ResultRow {
        family: ctx.mesh.family().to_string(),
        inv_h: ctx.n,
        inv_big_h: m,
        primal: method.primal_label().into(),
        iterations: 0,
        kappa: None,
        lambda_min: None,
        lambda_max: None,
        velocity_h1_error: None,
        pressure_l2_error: None,
        wall_time_s: 0.0,
        method: method.solver_name().into(),
        converged: false,
        indefinite_steps: 0,
        div_max: None,
        interface_dofs: n_gamma,
        mesh_sha256: ctx.mesh_sha256.clone(),
        partition_sha256: part_sha,
        status,
    };
    let setup = partition_regular(&ctx.mesh, m).and_then(|part| {
        let op = InterfaceOperator::new(&part, &ctx.sys)?;
        Ok((part, op))
    });
    let (part, op) = match setup {
        Ok(x) => x,
        Err(e) => {
            return methods
                .iter()
                .map(|&method| CellRun {
                    row: blank(method, format!("setup failed: {e}"), String::new(), 0),
                    report: None,
                    u: Vec::new(),
                    p: Vec::new(),
                })
                .collect()
        }
    };
    let part_sha = fingerprint(&part.dump_cells());
    let shared_s = ctx.setup_s + t0.elapsed().as_secs_f64();
    methods
        .iter()
        .map(|&method| {
            let t = Instant::now();
            let mut row = blank(method, "ok".into(), part_sha.clone(), op.num_interface());
            let outcome = solve_interface(&op, &part, method, cfg);
            let run = match outcome {
                Err(e) => {
                    row.status = format!("setup failed: {e}");
                    CellRun {
                        row,
                        report: None,
                        u: Vec::new(),
                        p: Vec::new(),
                    }
                }
                Ok(Err(KrylovError::Breakdown { reason, report, .. })) => {
                    row.iterations = report.iterations;
                    row.status = format!("breakdown: {reason}");
                    CellRun {
                        row,
                        report: Some(report),
                        u: Vec::new(),
                        p: Vec::new(),
                    }
                }
                Ok(Err(e)) => {
                    row.status = format!("failed: {e}");
                    CellRun {
                        row,
                        report: None,
                        u: Vec::new(),
                        p: Vec::new(),
                    }
                }
                Ok(Ok((x, report))) => {
                    let (u, p) = op.recover(&part, &x);
                    row.iterations = report.iterations;
                    row.converged = report.converged;
                    row.indefinite_steps = report.indefinite_steps;
                    if let Some(c) = report.condition {
                        row.kappa = Some(c.kappa);
                        row.lambda_min = Some(c.lambda_min);
                        row.lambda_max = Some(c.lambda_max);
                    }
                    row.div_max = Some(norm_inf(&ctx.sys.b.mul_vec(&u)));
                    row.velocity_h1_error = Some(velocity_h1_error(&ctx.mesh, &ctx.sys, &u, &exact_velocity_gradient));
                    row.pressure_l2_error = Some(pressure_l2_error(&ctx.mesh, &p, &exact_pressure));
                    if !report.converged {
                        row.status = "not converged".into();
                    }
                    CellRun {
                        row,
                        report: Some(report),
                        u,
                        p,
                    }
                }
            };
            let mut run = run;
            run.row.wall_time_s = shared_s + t.elapsed().as_secs_f64();
            run
        })
        .collect()
}

/// Nearest power of two to the cells per side implied by the cell count.
fn estimate_n(mesh: &PolygonalMesh) -> usize {
    let c = mesh.num_cells() as f64;
    let side = match mesh.family() {
        MeshFamily::Tri => (c / 2.0).sqrt(),
        _ => c.sqrt(),
    };
    1usize << side.max(1.0).log2().round() as u32
}

/// Runs every cell of the spec, appending rows to `out` as they finish.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut writer = match out {
        Some(path) => Some(csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut current: Option<(usize, MeshContext)> = None;
    for (n, m) in spec.cells() {
        if current.as_ref().map(|c| c.0) != Some(n) {
            current = Some((n, MeshContext::generate(spec.family, n, spec.seed, spec.lloyd_iters)?));
        }
        let ctx = &current.as_ref().unwrap().1;
        for run in run_cell(ctx, m, &spec.methods, &spec.solver) {
            let row = run.row;
            if let (Some(w), Some(path)) = (writer.as_mut(), out) {
                w.serialize(&row).map_err(|e| csv_error(path, e))?;
                w.flush().map_err(|e| Error::io(path, e))?;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_rows_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

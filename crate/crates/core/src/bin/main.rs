use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use vem_bddc::bddc::PrimalKind;
use vem_bddc::harness::{
    compare_to_reference, convergence_study, format_diff_table, run_cell, run_experiment, table_plots, verify,
    write_convergence_csv, write_rows_csv, ConvergenceSolver, ExactSolution, ExperimentSpec, KeyValueConfig,
    MeshContext, Method, VerifyLevel,
};
use vem_bddc::krylov::SolverConfig;
use vem_bddc::mesh::{generate_mesh, MeshFamily, PolygonalMesh};
use vem_bddc::{Error, Result};

#[derive(Parser)]
#[command(name = "vem-bddc", version, about = "Divergence-free VEM Stokes solver with BDDC interface preconditioning")]
struct Cli {
    /// key = value file; command-line flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh utilities
    Mesh {
        #[command(subcommand)]
        cmd: MeshCommand,
    },
    /// Solve the manufactured problem on one mesh and partition
    Solve(SolveArgs),
    /// Reproduce one of the four tables for a mesh family
    Table(TableArgs),
    /// Discretization errors and rates over a list of meshes
    Convergence(ConvergenceArgs),
    /// Run the self-check tiers
    Verify {
        #[arg(long)]
        level: Option<VerifyLevel>,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a mesh of the unit square
    Gen(MeshGenArgs),
}

#[derive(Args)]
struct MeshGenArgs {
    #[arg(long)]
    family: Option<MeshFamily>,
    /// cells per side (1/h)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Lloyd iterations (CVT only)
    #[arg(long)]
    lloyd: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// mesh file written by `mesh gen`
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// subdomains per side (1/H)
    #[arg(long = "invH")]
    inv_big_h: Option<usize>,
    /// v, v+n, v+f or v+x
    #[arg(long)]
    primal: Option<PrimalKind>,
    /// pcg or gmres
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// continue PCG through indefinite steps (default for the v primal space)
    #[arg(long)]
    allow_indefinite: Option<bool>,
    /// one-row result CSV
    #[arg(long)]
    out: Option<PathBuf>,
    /// residual history CSV
    #[arg(long)]
    residuals: Option<PathBuf>,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long)]
    id: Option<usize>,
    #[arg(long)]
    family: Option<MeshFamily>,
    /// restrict 1/h (comma separated)
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// restrict 1/H (comma separated)
    #[arg(long, value_delimiter = ',')]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// directory for SVG charts
    #[arg(long)]
    plots: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    #[arg(long)]
    family: Option<MeshFamily>,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// solve through BDDC-PCG on this many subdomains per side instead of a
    /// monolithic direct solve
    #[arg(long = "invH")]
    inv_big_h: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &KeyValueConfig, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get(key),
    }
}

fn pick_list<T: std::str::FromStr>(flag: Option<Vec<T>>, cfg: &KeyValueConfig, key: &str) -> Result<Option<Vec<T>>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get_list(key),
    }
}

fn required<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{what} is required (flag or config key)")))
}

fn mesh_gen(a: MeshGenArgs, cfg: &KeyValueConfig) -> Result<()> {
    let family = required(pick(a.family, cfg, "family")?, "family")?;
    let n = required(pick(a.n, cfg, "n")?, "n")?;
    let seed = pick(a.seed, cfg, "seed")?.unwrap_or(1);
    let lloyd = pick(a.lloyd, cfg, "lloyd")?.unwrap_or(100);
    let out = required(pick(a.out, cfg, "out")?, "out")?;
    let mesh = generate_mesh(family, n, seed, lloyd)?;
    mesh.write(&out)?;
    let q = mesh.quality_report();
    println!(
        "{family} n={n}: {} cells, {} vertices, h={:.4}, min edge ratio {:.3} -> {}",
        mesh.num_cells(),
        mesh.num_vertices(),
        mesh.h(),
        q.min_edge_ratio,
        out.display()
    );
    Ok(())
}

fn solve(a: SolveArgs, cfg: &KeyValueConfig) -> Result<()> {
    let path: PathBuf = required(pick(a.mesh, cfg, "mesh")?, "mesh")?;
    let m = required(pick(a.inv_big_h, cfg, "invH")?, "invH")?;
    let method_name = pick(a.method, cfg, "method")?.unwrap_or_else(|| "pcg".into());
    let method = match method_name.to_ascii_lowercase().as_str() {
        "gmres" => Method::Gmres,
        "pcg" => Method::Pcg(pick(a.primal, cfg, "primal")?.unwrap_or(PrimalKind::VerticesPlusNormalAvg)),
        other => return Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
    };
    let defaults = SolverConfig::default();
    let solver = SolverConfig {
        tol: pick(a.tol, cfg, "tol")?.unwrap_or(defaults.tol),
        max_iter: pick(a.max_iter, cfg, "max-iter")?.unwrap_or(defaults.max_iter),
        restart: cfg.get("restart")?,
        allow_indefinite: pick(a.allow_indefinite, cfg, "allow-indefinite")?
            .unwrap_or(method == Method::Pcg(PrimalKind::VerticesOnly)),
    };
    let t = Instant::now();
    let mesh = PolygonalMesh::read(&path)?;
    let ctx = MeshContext::from_mesh(mesh, None, t)?;
    let run = run_cell(&ctx, m, &[method], &solver).remove(0);
    let r = &run.row;
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "{} n={} 1/H={} {} {}: {} iterations, κ₂ {}, λ [{}, {}], ‖Bu‖∞ {}, errors H¹ {} L² {}, {:.2}s [{}]",
        r.family,
        r.inv_h,
        r.inv_big_h,
        r.method,
        r.primal,
        r.iterations,
        opt(r.kappa),
        opt(r.lambda_min),
        opt(r.lambda_max),
        r.div_max.map_or("-".into(), |d| format!("{d:.1e}")),
        opt(r.velocity_h1_error),
        opt(r.pressure_l2_error),
        r.wall_time_s,
        r.status
    );
    if let Some(out) = pick(a.out, cfg, "out")? {
        write_rows_csv(std::slice::from_ref(r), &out)?;
    }
    if let (Some(p), Some(rep)) = (pick::<PathBuf>(a.residuals, cfg, "residuals")?, &run.report) {
        rep.write_residual_csv(p)?;
    }
    if r.status != "ok" {
        return Err(Error::Breakdown {
            iterations: r.iterations,
            msg: r.status.clone(),
        });
    }
    Ok(())
}

fn table(a: TableArgs, cfg: &KeyValueConfig) -> Result<()> {
    let id = required(pick(a.id, cfg, "id")?, "id")?;
    let family = pick(a.family, cfg, "family")?.unwrap_or(MeshFamily::Quad);
    let mut spec = ExperimentSpec::table(id, family)?;
    if let Some(n) = pick_list(a.n_list, cfg, "n-list")? {
        spec.n = n;
    }
    if let Some(m) = pick_list(a.m_list, cfg, "m-list")? {
        spec.m = m;
    }
    if let Some(s) = pick(a.seed, cfg, "seed")? {
        spec.seed = s;
    }
    if let Some(tol) = cfg.get("tol")? {
        spec.solver.tol = tol;
    }
    let out: Option<PathBuf> = pick(a.out, cfg, "out")?;
    let rows = run_experiment(&spec, out.as_deref())?;
    let diff = compare_to_reference(id, &rows);
    print!("{}", format_diff_table(&diff));
    if let Some(dir) = pick::<PathBuf>(a.plots, cfg, "plots")? {
        write_plots(&dir, &format!("table{id}_{family}"), &rows)?;
    }
    Ok(())
}

fn write_plots(dir: &Path, prefix: &str, rows: &[vem_bddc::harness::ResultRow]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for (name, chart) in table_plots(rows) {
        let path = dir.join(format!("{prefix}_{name}.svg"));
        std::fs::write(&path, chart.to_svg()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    Ok(())
}

fn convergence(a: ConvergenceArgs, cfg: &KeyValueConfig) -> Result<()> {
    let family = pick(a.family, cfg, "family")?.unwrap_or(MeshFamily::Quad);
    let ns = pick_list(a.n_list, cfg, "n-list")?.unwrap_or_else(|| vec![8, 16, 32]);
    let seed = pick(a.seed, cfg, "seed")?.unwrap_or(1);
    let solver = match pick(a.inv_big_h, cfg, "invH")? {
        Some(m) => ConvergenceSolver::Interface {
            m,
            primal: PrimalKind::VerticesPlusNormalAvg,
        },
        None => ConvergenceSolver::Monolithic,
    };
    let rows = convergence_study(family, &ns, solver, &ExactSolution::MANUFACTURED, seed)?;
    let rate = |r: Option<f64>| r.map_or("-".into(), |x| format!("{x:.2}"));
    println!("   n        h   |u-u_h|_1   rate   |p-p_h|_0   rate   ‖Bu‖∞");
    for r in &rows {
        println!(
            "{:>4} {:>8.5} {:>11.3e} {:>6} {:>11.3e} {:>6} {:>8.1e}",
            r.n,
            r.h,
            r.velocity_h1_error,
            rate(r.velocity_rate),
            r.pressure_l2_error,
            rate(r.pressure_rate),
            r.div_max
        );
    }
    if let Some(out) = pick::<PathBuf>(a.out, cfg, "out")? {
        write_convergence_csv(&rows, out)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = match &cli.config {
        Some(p) => KeyValueConfig::read(p)?,
        None => KeyValueConfig::default(),
    };
    match cli.cmd {
        Command::Mesh {
            cmd: MeshCommand::Gen(a),
        } => mesh_gen(a, &cfg)?,
        Command::Solve(a) => solve(a, &cfg)?,
        Command::Table(a) => table(a, &cfg)?,
        Command::Convergence(a) => convergence(a, &cfg)?,
        Command::Verify { level } => {
            let level = pick(level, &cfg, "level")?.unwrap_or(VerifyLevel::Fast);
            let rep = verify(level);
            println!("{rep}");
            return Ok(rep.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

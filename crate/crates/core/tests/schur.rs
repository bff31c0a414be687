mod common;

use common::{max_diff, problem, random_vec, rng};
use faer::Mat;
use vem_bddc::krylov::LinearOperator;
use vem_bddc::linalg::{dense_solve, dot, norm, norm_inf, symmetric_eigenvalues};
use vem_bddc::mesh::MeshFamily;
use vem_bddc::partition::subdomain_local_systems;
use vem_bddc::schur::InterfaceOperator;
use vem_bddc::vem::{assemble, solve_monolithic_direct, GlobalSystem};

/// Dense local saddle block rebuilt from the subdomain blocks.
fn dense_local(op: &InterfaceOperator, s: usize) -> Mat<f64> {
    let b = &op.solvers[s].blocks;
    let (ni, m) = (b.interior.len(), b.cells.len());
    let n = ni + m + 1;
    let mut k = Mat::zeros(n, n);
    for (r, c, v) in b.a_ii.triplets() {
        k[(r, c)] += v;
    }
    for (r, c, v) in b.b_ii.triplets() {
        k[(ni + r, c)] += v;
        k[(c, ni + r)] += v;
    }
    for (j, a) in b.cell_areas.iter().enumerate() {
        k[(ni + j, n - 1)] = *a;
        k[(n - 1, ni + j)] = *a;
    }
    k
}

#[test]
fn local_solves_are_accurate() {
    let pb = problem(MeshFamily::Quad, 16, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let mut r = rng(11);
    for s in 0..op.num_subdomains() {
        let solver = &op.solvers[s];
        let n = solver.local_dim();
        assert!(solver.solve(&vec![0.0; n]).iter().all(|&v| v == 0.0));
        let k = dense_local(&op, s);
        for _ in 0..10 {
            let rhs = random_vec(&mut r, n);
            let x = solver.solve(&rhs);
            let kx = k.apply_vec(&x);
            let res: Vec<f64> = kx.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            assert!(norm(&res) <= 1e-12 * norm(&rhs), "subdomain {s}");
        }
        // manufactured interior solution
        let xe = random_vec(&mut r, n);
        let x = solver.solve(&k.apply_vec(&xe));
        assert!(max_diff(&x, &xe) < 1e-9);
    }
}

#[test]
fn operator_is_symmetric_and_linear() {
    let pb = problem(MeshFamily::Quad, 16, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let n = op.dim();
    let mut r = rng(5);
    for _ in 0..20 {
        let (x, y) = (random_vec(&mut r, n), random_vec(&mut r, n));
        let (sx, sy) = (op.apply_vec(&x), op.apply_vec(&y));
        let d = (dot(&x, &sy) - dot(&y, &sx)).abs();
        assert!(d <= 1e-12 * norm(&x) * norm(&y) * op_scale(&op), "asymmetry {d:e}");
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let sz = op.apply_vec(&z);
        let lin: Vec<f64> = sx.iter().zip(&sy).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        assert!(max_diff(&sz, &lin) <= 1e-12 * norm_inf(&lin).max(1.0));
    }
}

/// Scale of the operator entries (A has O(1) entries for ν = 1).
fn op_scale(op: &InterfaceOperator) -> f64 {
    op.solvers.iter().map(|s| s.blocks.a_gg.max_abs()).fold(1.0, f64::max)
}

#[test]
fn counts_one_local_solve_per_subdomain() {
    let pb = problem(MeshFamily::Tri, 8, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    op.reset_counters();
    let x = vec![1.0; op.dim()];
    op.apply_vec(&x);
    op.apply_vec(&x);
    let c = op.counters();
    assert_eq!((c.applications, c.local_solves), (2, 2 * op.num_subdomains()));
}

#[test]
fn pressure_block_structure() {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let ng = op.num_interface();
    let mut x = vec![0.0; op.dim()];
    x[ng..].copy_from_slice(&[1.0, -2.0, 0.5, 3.0]);
    let y = op.apply_vec(&x);
    assert!(y[ng..].iter().all(|&v| v == 0.0));
    // constant p_0 is in the kernel
    let y = op.apply_vec(&[vec![0.0; ng], vec![1.0; 4]].concat());
    assert!(norm_inf(&y) < 1e-12);
}

/// Explicit Schur complement by dense elimination of the whole system in the
/// variables (u_I, q, λ | u_Γ, p_0), with p = q + p_0 on each subdomain and
/// an area-weighted zero-mean multiplier λ per subdomain.
fn dense_schur(sys: &GlobalSystem, part: &vem_bddc::partition::SubdomainPartition) -> Mat<f64> {
    let nf = sys.num_free_velocity();
    let nc = sys.num_pressure();
    let nsub = part.num_subdomains;
    let ng = part.num_interface_dofs();
    let interior: Vec<usize> = (0..nf).filter(|&k| part.interface_index[k].is_none()).collect();
    let ni = interior.len();
    // position of each unknown in the dense ordering
    let n_elim = ni + nc + nsub;
    let n = n_elim + ng + nsub;
    let mut upos = vec![0; nf];
    for (k, &d) in interior.iter().enumerate() {
        upos[d] = k;
    }
    for (g, &d) in part.interface_dofs.iter().enumerate() {
        upos[d] = n_elim + g;
    }
    let (a, b) = (sys.a.to_dense(), sys.b.to_dense());
    let mut k = Mat::<f64>::zeros(n, n);
    for i in 0..nf {
        for j in 0..nf {
            k[(upos[i], upos[j])] = a[(i, j)];
        }
    }
    for c in 0..nc {
        let s = part.cell_subdomain[c];
        for j in 0..nf {
            let v = b[(c, j)];
            for row in [ni + c, n_elim + ng + s] {
                k[(row, upos[j])] += v;
                k[(upos[j], row)] += v;
            }
        }
        k[(ni + c, ni + nc + s)] = sys.cell_areas[c];
        k[(ni + nc + s, ni + c)] = sys.cell_areas[c];
    }
    let kee = Mat::from_fn(n_elim, n_elim, |i, j| k[(i, j)]);
    let keg = Mat::from_fn(n_elim, n - n_elim, |i, j| k[(i, n_elim + j)]);
    let kge = Mat::from_fn(n - n_elim, n_elim, |i, j| k[(n_elim + i, j)]);
    let kgg = Mat::from_fn(n - n_elim, n - n_elim, |i, j| k[(n_elim + i, n_elim + j)]);
    let w = dense_solve(&kee, &keg).unwrap();
    kgg - kge * w
}

#[test]
fn matches_dense_elimination() {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let s = dense_schur(&pb.sys, &pb.part);
    let n = op.dim();
    let mut err: f64 = 0.0;
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.apply_vec(&e);
        for i in 0..n {
            err = err.max((col[i] - s[(i, j)]).abs());
        }
    }
    assert!(err <= 1e-10, "max error {err:e}");
}

#[test]
fn velocity_schur_blocks_are_spd() {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    for solver in &op.solvers {
        let ng = solver.num_interface();
        let mut s = Mat::zeros(ng, ng);
        for j in 0..ng {
            let mut e = vec![0.0; ng];
            e[j] = 1.0;
            let (col, _) = solver.apply_schur(&e, 0.0);
            for i in 0..ng {
                s[(i, j)] = col[i];
            }
        }
        let sym = Mat::from_fn(ng, ng, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
        let asym = (0..ng).flat_map(|i| (0..ng).map(move |j| (i, j))).map(|(i, j)| (s[(i, j)] - s[(j, i)]).abs());
        assert!(asym.fold(0.0, f64::max) < 1e-12);
        let ev = symmetric_eigenvalues(&sym).unwrap();
        assert!(ev[0] > 0.0, "subdomain {}: λ_min = {:e}", solver.id(), ev[0]);
    }
}

#[test]
fn rhs_zero_and_locality() {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let zero = assemble(&pb.mesh, &vec![1.0; pb.mesh.num_cells()], &|_| [0.0, 0.0]).unwrap();
    let op = InterfaceOperator::new(&pb.part, &zero).unwrap();
    assert!(op.rhs().iter().all(|&v| v == 0.0));
    // load supported in subdomain 0 only
    let sub0 = |p: vem_bddc::mesh::Point2| if p.x < 0.5 && p.y < 0.5 { [1.0, 2.0] } else { [0.0, 0.0] };
    let sys = assemble(&pb.mesh, &vec![1.0; pb.mesh.num_cells()], &sub0).unwrap();
    let op = InterfaceOperator::new(&pb.part, &sys).unwrap();
    let g = op.rhs();
    let ng = op.num_interface();
    assert!(g[ng..].iter().all(|&v| v == 0.0));
    let closure = &pb.part.subdomain_interface[0];
    for (pos, v) in g[..ng].iter().enumerate() {
        if !closure.contains(&pos) {
            assert_eq!(*v, 0.0);
        }
    }
    assert!(norm(&g) > 0.0);
}

#[test]
fn consistent_with_monolithic_solution() {
    let pb = problem(MeshFamily::Quad, 16, 2);
    let op = InterfaceOperator::new(&pb.part, &pb.sys).unwrap();
    let (u, p) = solve_monolithic_direct(&pb.sys).unwrap();
    let x = op.restrict(&pb.part, &u, &p);
    let sx = op.apply_vec(&x);
    let g = op.rhs();
    assert!(max_diff(&sx, &g) <= 1e-9 * norm_inf(&g).max(1.0), "{:e}", max_diff(&sx, &g));

    let (u2, p2) = op.recover(&pb.part, &x);
    assert!(max_diff(&u, &u2) <= 1e-8);
    assert!(max_diff(&p, &p2) <= 1e-8);
    let mut div = vec![0.0; pb.sys.num_pressure()];
    pb.sys.b.mul_vec_add(1.0, &u2, &mut div);
    assert!(norm_inf(&div) <= 1e-9);
}

#[test]
fn zero_data_recovers_zero() {
    let pb = problem(MeshFamily::Hexa, 8, 2);
    let zero = assemble(&pb.mesh, &vec![1.0; pb.mesh.num_cells()], &|_| [0.0, 0.0]).unwrap();
    let op = InterfaceOperator::new(&pb.part, &zero).unwrap();
    let (u, p) = op.recover(&pb.part, &vec![0.0; op.dim()]);
    assert!(u.iter().chain(&p).all(|&v| v == 0.0));
}

#[test]
fn missing_pressure_constraint_is_reported() {
    let pb = problem(MeshFamily::Quad, 8, 2);
    let mut blocks = subdomain_local_systems(&pb.part, &pb.sys).unwrap();
    blocks[2].cell_areas.iter_mut().for_each(|a| *a = 0.0);
    let err = InterfaceOperator::from_blocks(blocks, pb.part.num_interface_dofs()).unwrap_err();
    assert!(err.to_string().contains("subdomain 2"), "{err}");
}

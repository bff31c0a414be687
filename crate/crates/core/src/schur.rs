//! Static condensation onto the interface saddle-point problem.
//!
//! Interface unknowns are `x = (u_Γ, p_0)`: assembled interface velocities
//! followed by one constant pressure per subdomain. Interior pressures keep the
//! full cell vector of the subdomain; a Lagrange multiplier on the area vector
//! removes its constant, which lives in `p_0` instead.

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{dot, SparseLu};
use crate::partition::{subdomain_local_systems, SubdomainBlocks, SubdomainPartition};
use crate::vem::GlobalSystem;
use rayon::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Factorized interior saddle block
/// `K = [[A_II, B_IIᵀ, 0], [B_II, 0, a], [0, aᵀ, 0]]` of one subdomain.
#[derive(Debug)]
pub struct SubdomainSolver {
    pub blocks: SubdomainBlocks,
    lu: SparseLu,
}

impl SubdomainSolver {
    pub fn new(blocks: SubdomainBlocks) -> Result<Self> {
        let (ni, m) = (blocks.interior.len(), blocks.cells.len());
        let dim = ni + m + 1;
        let mut t = blocks.a_ii.triplets();
        for (r, c, v) in blocks.b_ii.triplets() {
            t.push((ni + r, c, v));
            t.push((c, ni + r, v));
        }
        for (k, &a) in blocks.cell_areas.iter().enumerate() {
            t.push((ni + k, dim - 1, a));
            t.push((dim - 1, ni + k, a));
        }
        let lu = SparseLu::new(dim, &t, &format!("interior saddle block of subdomain {}", blocks.id)).map_err(
            |e| match e {
                Error::Singular { what, msg } => Error::Singular {
                    what,
                    msg: format!("{msg}; is the interior pressure constraint missing?"),
                },
                e => e,
            },
        )?;
        Ok(SubdomainSolver { blocks, lu })
    }

    pub fn id(&self) -> usize {
        self.blocks.id
    }

    /// Size of the local saddle system (interior velocity + cells + 1).
    pub fn local_dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn num_interior(&self) -> usize {
        self.blocks.interior.len()
    }

    pub fn num_cells(&self) -> usize {
        self.blocks.cells.len()
    }

    pub fn num_interface(&self) -> usize {
        self.blocks.interface.len()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve(rhs)
    }

    /// Local right-hand side for given interface data: `[g_I - A_IΓ u; -B_IΓ u; 0]`.
    fn condensed_rhs(&self, g_i: &[f64], u: &[f64]) -> Vec<f64> {
        let b = &self.blocks;
        let ni = b.interior.len();
        let mut rhs = vec![0.0; self.local_dim()];
        rhs[..ni].copy_from_slice(g_i);
        b.a_ig.mul_vec_add(-1.0, u, &mut rhs[..ni]);
        b.b_ig.mul_vec_add(-1.0, u, &mut rhs[ni..ni + b.cells.len()]);
        rhs
    }

    /// `[A_ΓI, B_IΓᵀ, 0] w` for a local solution vector `w`.
    fn couple_back(&self, w: &[f64], out: &mut [f64]) {
        let b = &self.blocks;
        let ni = b.interior.len();
        b.a_ig.tr_mul_vec_add(1.0, &w[..ni], out);
        b.b_ig.tr_mul_vec_add(1.0, &w[ni..ni + b.cells.len()], out);
    }

    /// Local Schur complement S^(i) applied to `(u_Γ^(i), p_0^(i))`.
    pub fn apply_schur(&self, u: &[f64], p0: f64) -> (Vec<f64>, f64) {
        let b = &self.blocks;
        let w = self.solve(&self.condensed_rhs(&vec![0.0; b.interior.len()], u));
        let mut y = b.a_gg.mul_vec(u);
        self.couple_back(&w, &mut y);
        for (yi, bi) in y.iter_mut().zip(&b.b_0g) {
            *yi += p0 * bi;
        }
        (y, dot(&b.b_0g, u))
    }

    /// Interface load `f_Γ - [A_ΓI, B_IΓᵀ] K⁻¹ [f_I; 0; 0]`.
    pub fn condensed_load(&self) -> Vec<f64> {
        let b = &self.blocks;
        let mut rhs = vec![0.0; self.local_dim()];
        rhs[..b.interior.len()].copy_from_slice(&b.f_i);
        let w = self.solve(&rhs);
        let mut g = vec![0.0; b.interface.len()];
        self.couple_back(&w, &mut g);
        b.f_g.iter().zip(&g).map(|(f, x)| f - x).collect()
    }

    /// Interior velocity and full cell pressures for given interface data.
    pub fn recover(&self, u: &[f64], p0: f64) -> (Vec<f64>, Vec<f64>) {
        let b = &self.blocks;
        let ni = b.interior.len();
        let w = self.solve(&self.condensed_rhs(&b.f_i, u));
        let p = w[ni..ni + b.cells.len()].iter().map(|q| q + p0).collect();
        (w[..ni].to_vec(), p)
    }
}

/// Counter snapshot for reporting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveCounters {
    pub local_solves: usize,
    pub applications: usize,
}

/// Implicit global interface operator Ŝ = Σ_i R_iᵀ S^(i) R_i.
#[derive(Debug)]
pub struct InterfaceOperator {
    pub solvers: Vec<SubdomainSolver>,
    n_gamma: usize,
    subdomain_areas: Vec<f64>,
    local_solves: AtomicUsize,
    applications: AtomicUsize,
}

impl InterfaceOperator {
    /// Extracts subdomain blocks and factorizes them (in parallel).
    pub fn new(part: &SubdomainPartition, sys: &GlobalSystem) -> Result<Self> {
        let blocks = subdomain_local_systems(part, sys)?;
        Self::from_blocks(blocks, part.num_interface_dofs())
    }

    pub fn from_blocks(blocks: Vec<SubdomainBlocks>, n_gamma: usize) -> Result<Self> {
        let subdomain_areas = blocks.iter().map(|b| b.cell_areas.iter().sum()).collect();
        let solvers = blocks
            .into_par_iter()
            .map(SubdomainSolver::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(InterfaceOperator {
            solvers,
            n_gamma,
            subdomain_areas,
            local_solves: AtomicUsize::new(0),
            applications: AtomicUsize::new(0),
        })
    }

    pub fn num_subdomains(&self) -> usize {
        self.solvers.len()
    }

    pub fn num_interface(&self) -> usize {
        self.n_gamma
    }

    pub fn subdomain_areas(&self) -> &[f64] {
        &self.subdomain_areas
    }

    pub fn counters(&self) -> SolveCounters {
        SolveCounters {
            local_solves: self.local_solves.load(Ordering::Relaxed),
            applications: self.applications.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counters(&self) {
        self.local_solves.store(0, Ordering::Relaxed);
        self.applications.store(0, Ordering::Relaxed);
    }

    fn gather(&self, s: usize, u_gamma: &[f64]) -> Vec<f64> {
        self.solvers[s].blocks.interface.iter().map(|&g| u_gamma[g]).collect()
    }

    /// Ŝx, one local solve per subdomain.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "interface vector has wrong length");
        assert_eq!(y.len(), self.dim(), "interface vector has wrong length");
        let ng = self.n_gamma;
        let parts: Vec<(Vec<f64>, f64)> = (0..self.num_subdomains())
            .into_par_iter()
            .map(|s| self.solvers[s].apply_schur(&self.gather(s, &x[..ng]), x[ng + s]))
            .collect();
        y.fill(0.0);
        for (s, (ys, y0)) in parts.into_iter().enumerate() {
            for (k, &g) in self.solvers[s].blocks.interface.iter().enumerate() {
                y[g] += ys[k];
            }
            y[ng + s] = y0;
        }
        self.local_solves.fetch_add(self.num_subdomains(), Ordering::Relaxed);
        self.applications.fetch_add(1, Ordering::Relaxed);
    }

    /// ĝ = Σ_i R_iᵀ (f_Γ^(i) - condensed interior load, 0).
    pub fn rhs(&self) -> Vec<f64> {
        let loads: Vec<Vec<f64>> = self.solvers.par_iter().map(SubdomainSolver::condensed_load).collect();
        let mut g = vec![0.0; self.dim()];
        for (s, l) in loads.iter().enumerate() {
            for (k, &pos) in self.solvers[s].blocks.interface.iter().enumerate() {
                g[pos] += l[k];
            }
        }
        g
    }

    /// Shifts the `p_0` block to zero area-weighted mean.
    pub fn project_pressure(&self, x: &mut [f64]) {
        let ng = self.n_gamma;
        let total: f64 = self.subdomain_areas.iter().sum();
        let mean = dot(&x[ng..], &self.subdomain_areas) / total;
        for v in &mut x[ng..] {
            *v -= mean;
        }
    }

    /// Interface part `(u_Γ, p_0)` of a global solution (p_0 = subdomain means).
    pub fn restrict(&self, part: &SubdomainPartition, u_free: &[f64], p: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = part.interface_dofs.iter().map(|&k| u_free[k]).collect();
        for s in &self.solvers {
            let b = &s.blocks;
            let area: f64 = b.cell_areas.iter().sum();
            x.push(b.cells.iter().zip(&b.cell_areas).map(|(&c, a)| a * p[c]).sum::<f64>() / area);
        }
        x
    }

    /// Back-substitutes interior unknowns; returns (u on free dofs, p per cell)
    /// with the pressure recentred to zero mean over Ω.
    pub fn recover(&self, part: &SubdomainPartition, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ng = self.n_gamma;
        let n_free = part.dofmap.num_free_velocity_dofs();
        let mut u = vec![0.0; n_free];
        for (g, &k) in part.interface_dofs.iter().enumerate() {
            u[k] = x[g];
        }
        let local: Vec<(Vec<f64>, Vec<f64>)> = (0..self.num_subdomains())
            .into_par_iter()
            .map(|s| self.solvers[s].recover(&self.gather(s, &x[..ng]), x[ng + s]))
            .collect();
        let n_cells = part.cell_subdomain.len();
        let mut p = vec![0.0; n_cells];
        let mut areas = vec![0.0; n_cells];
        for (s, (ui, ps)) in local.into_iter().enumerate() {
            let b = &self.solvers[s].blocks;
            for (k, &d) in b.interior.iter().enumerate() {
                u[d] = ui[k];
            }
            for (k, &c) in b.cells.iter().enumerate() {
                p[c] = ps[k];
                areas[c] = b.cell_areas[k];
            }
        }
        let mean = dot(&p, &areas) / areas.iter().sum::<f64>();
        for v in &mut p {
            *v -= mean;
        }
        (u, p)
    }
}

impl LinearOperator for InterfaceOperator {
    fn dim(&self) -> usize {
        self.n_gamma + self.solvers.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y)
    }
}

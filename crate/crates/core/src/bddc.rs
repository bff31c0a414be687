//! BDDC preconditioner for the interface saddle-point operator.
//!
//! Primal unknowns are the subdomain-vertex velocities, optional edge averages
//! made explicit by a change of basis, and the subdomain pressure constants.
//! All remaining interface velocities are dual: duplicated per subdomain and
//! averaged with counting weights.

use crate::error::{Error, Result};
use crate::krylov::LinearOperator;
use crate::linalg::{dot, CsrMatrix, DenseLu, SparseLu};
use crate::partition::SubdomainPartition;
use crate::schur::{InterfaceOperator, SubdomainSolver};
use faer::Mat;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimalKind {
    VerticesOnly,
    /// vertices plus the normal flux through each subdomain edge
    VerticesPlusNormalAvg,
    /// vertices plus both averages (normal and tangential) per subdomain edge
    VerticesPlusFullAvg,
    /// vertices plus the x-component average per subdomain edge (comparison only)
    VerticesPlusComponentAvg,
}

impl PrimalKind {
    /// The three kinds used by the tables.
    pub const TABLE_KINDS: [PrimalKind; 3] = [
        PrimalKind::VerticesOnly,
        PrimalKind::VerticesPlusNormalAvg,
        PrimalKind::VerticesPlusFullAvg,
    ];

    pub fn constraints_per_edge(self) -> usize {
        match self {
            PrimalKind::VerticesOnly => 0,
            PrimalKind::VerticesPlusNormalAvg | PrimalKind::VerticesPlusComponentAvg => 1,
            PrimalKind::VerticesPlusFullAvg => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PrimalKind::VerticesOnly => "v",
            PrimalKind::VerticesPlusNormalAvg => "v+n",
            PrimalKind::VerticesPlusFullAvg => "v+f",
            PrimalKind::VerticesPlusComponentAvg => "v+x",
        }
    }

    /// Whether every dual field has zero subdomain flux by construction.
    pub fn controls_flux(self) -> bool {
        matches!(self, PrimalKind::VerticesPlusNormalAvg | PrimalKind::VerticesPlusFullAvg)
    }
}

impl fmt::Display for PrimalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PrimalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v" => Ok(PrimalKind::VerticesOnly),
            "v+n" => Ok(PrimalKind::VerticesPlusNormalAvg),
            "v+f" => Ok(PrimalKind::VerticesPlusFullAvg),
            "v+x" => Ok(PrimalKind::VerticesPlusComponentAvg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown primal kind '{s}' (expected v, v+n, v+f or v+x)"
            ))),
        }
    }
}

/// Weighted averages over one subdomain edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeConstraint {
    /// index into `SubdomainPartition::edges`
    pub edge: usize,
    /// interface positions of the edge dofs, node-major then component
    pub positions: Vec<usize>,
    /// constraint rows over `positions`
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSpace {
    pub kind: PrimalKind,
    /// interface positions of the subdomain-vertex dofs
    pub vertex_positions: Vec<usize>,
    pub edge_constraints: Vec<EdgeConstraint>,
}

impl PrimalSpace {
    /// n_Π, velocity part of the coarse space.
    pub fn num_primal(&self) -> usize {
        self.vertex_positions.len() + self.edge_constraints.iter().map(|c| c.rows.len()).sum::<usize>()
    }
}

/// Builds the primal constraints from the Gauss-Lobatto edge weights.
pub fn select_primal(part: &SubdomainPartition, kind: PrimalKind) -> Result<PrimalSpace> {
    let mut vertex_positions = Vec::with_capacity(2 * part.vertex_nodes.len());
    for &v in &part.vertex_nodes {
        for c in 0..2 {
            vertex_positions.push(part.interface_position(v, c).expect("vertex node on the interface"));
        }
    }
    let nc = kind.constraints_per_edge();
    let mut edge_constraints = Vec::new();
    if nc > 0 {
        for (e, edge) in part.edges.iter().enumerate() {
            let n = 2 * edge.nodes.len();
            // short arms (a single midpoint) become fully primal
            if n < nc {
                return Err(Error::DegenerateEdge {
                    i: edge.i,
                    j: edge.j,
                    msg: format!("{n} dofs for {nc} constraints"),
                });
            }
            let positions: Vec<usize> = edge
                .nodes
                .iter()
                .flat_map(|&node| (0..2).map(move |c| (node, c)))
                .map(|(node, c)| part.interface_position(node, c).expect("edge node on the interface"))
                .collect();
            let flat = |w: &[[f64; 2]]| w.iter().flat_map(|p| [p[0], p[1]]).collect::<Vec<f64>>();
            let rows = match kind {
                PrimalKind::VerticesPlusNormalAvg => vec![flat(&edge.flux_weights)],
                PrimalKind::VerticesPlusFullAvg => vec![flat(&edge.flux_weights), flat(&edge.tangent_weights)],
                PrimalKind::VerticesPlusComponentAvg => {
                    vec![edge.line_weights.iter().flat_map(|&w| [w, 0.0]).collect()]
                }
                PrimalKind::VerticesOnly => unreachable!(),
            };
            edge_constraints.push(EdgeConstraint { edge: e, positions, rows });
        }
    }
    Ok(PrimalSpace {
        kind,
        vertex_positions,
        edge_constraints,
    })
}

/// Change of interface basis u = T ũ. Each edge constraint value replaces one
/// pivot dof of its edge; all other coordinates are untouched.
#[derive(Debug, Clone)]
pub struct ChangeOfBasis {
    pub t: CsrMatrix,
    pub t_inv: CsrMatrix,
    /// interface positions whose changed coordinate is primal
    pub is_primal: Vec<bool>,
    /// global primal id of each primal position
    pub primal_index: Vec<Option<usize>>,
}

impl ChangeOfBasis {
    pub fn new(n_gamma: usize, primal: &PrimalSpace, part: &SubdomainPartition) -> Result<Self> {
        let mut t = Vec::new();
        let mut t_inv = Vec::new();
        let mut is_primal = vec![false; n_gamma];
        let mut primal_index = vec![None; n_gamma];
        let mut next = 0;
        for &p in &primal.vertex_positions {
            is_primal[p] = true;
            primal_index[p] = Some(next);
            next += 1;
        }
        let mut pivot_rows = vec![false; n_gamma];
        for ec in &primal.edge_constraints {
            let edge = &part.edges[ec.edge];
            let pivots = complete_pivots(&ec.rows).ok_or_else(|| Error::DegenerateEdge {
                i: edge.i,
                j: edge.j,
                msg: "edge constraints are linearly dependent".into(),
            })?;
            let c = ec.rows.len();
            let cp = Mat::from_fn(c, c, |r, k| ec.rows[r][pivots[k]]);
            let cp_inv = crate::linalg::dense_solve(&cp, &Mat::identity(c, c)).ok_or_else(|| Error::DegenerateEdge {
                i: edge.i,
                j: edge.j,
                msg: "singular pivot block".into(),
            })?;
            for (k, &pk) in pivots.iter().enumerate() {
                let row = ec.positions[pk];
                pivot_rows[row] = true;
                is_primal[row] = true;
                primal_index[row] = Some(next + k);
                for (l, &pl) in pivots.iter().enumerate() {
                    t.push((row, ec.positions[pl], cp_inv[(k, l)]));
                }
                for (o, &pos) in ec.positions.iter().enumerate() {
                    if pivots.contains(&o) {
                        continue;
                    }
                    let v: f64 = (0..c).map(|l| cp_inv[(k, l)] * ec.rows[l][o]).sum();
                    if v != 0.0 {
                        t.push((row, pos, -v));
                    }
                }
                // ξ_k = C_k u over the whole edge
                for (o, &pos) in ec.positions.iter().enumerate() {
                    if ec.rows[k][o] != 0.0 {
                        t_inv.push((row, pos, ec.rows[k][o]));
                    }
                }
            }
            next += c;
        }
        for p in 0..n_gamma {
            if !pivot_rows[p] {
                t.push((p, p, 1.0));
                t_inv.push((p, p, 1.0));
            }
        }
        Ok(ChangeOfBasis {
            t: CsrMatrix::from_triplets(n_gamma, n_gamma, &t),
            t_inv: CsrMatrix::from_triplets(n_gamma, n_gamma, &t_inv),
            is_primal,
            primal_index,
        })
    }

    pub fn dim(&self) -> usize {
        self.is_primal.len()
    }

    /// u = T ũ
    pub fn to_original(&self, ut: &[f64]) -> Vec<f64> {
        self.t.mul_vec(ut)
    }

    /// ũ = T⁻¹ u
    pub fn to_changed(&self, u: &[f64]) -> Vec<f64> {
        self.t_inv.mul_vec(u)
    }

    /// r̃ = Tᵀ r (residuals transform with the transpose)
    pub fn residual_to_changed(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.t.tr_mul_vec_add(1.0, r, &mut out);
        out
    }
}

/// Columns chosen by Gaussian elimination with complete pivoting.
fn complete_pivots(rows: &[Vec<f64>]) -> Option<Vec<usize>> {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let n = a.first()?.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut chosen = Vec::new();
    for s in 0..a.len() {
        let mut best = (0.0, s, 0);
        for (r, row) in a.iter().enumerate().skip(s) {
            for (c, v) in row.iter().enumerate() {
                if !chosen.contains(&c) && v.abs() > best.0 {
                    best = (v.abs(), r, c);
                }
            }
        }
        if best.0 <= 1e-12 * scale {
            return None;
        }
        a.swap(s, best.1);
        let (c, piv) = (best.2, a[s][best.2]);
        for r in s + 1..a.len() {
            let f = a[r][c] / piv;
            for k in 0..n {
                a[r][k] -= f * a[s][k];
            }
        }
        chosen.push(c);
    }
    Some(chosen)
}

/// Vector of the partially assembled space: shared primal values and
/// subdomain constants, plus one dual block per subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialVector {
    pub primal: Vec<f64>,
    pub p0: Vec<f64>,
    pub dual: Vec<Vec<f64>>,
}

impl PartialVector {
    pub fn dot(&self, other: &PartialVector) -> f64 {
        dot(&self.primal, &other.primal)
            + dot(&self.p0, &other.p0)
            + self.dual.iter().zip(&other.dual).map(|(a, b)| dot(a, b)).sum::<f64>()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.primal.clone();
        v.extend(&self.p0);
        for d in &self.dual {
            v.extend(d);
        }
        v
    }
}

/// Per-subdomain dual problem and its coupling to the coarse unknowns.
#[derive(Debug)]
struct LocalDual {
    /// global interface positions (R_Γ^(i))
    interface: Vec<usize>,
    /// local interface indices that are primal, and their global primal ids
    primal_local: Vec<usize>,
    primal_global: Vec<usize>,
    dual_local: Vec<usize>,
    dual_pos: Vec<usize>,
    dual_scale: Vec<f64>,
    /// local T restricted to this subdomain's interface
    t_local: CsrMatrix,
    /// Tᵀ B_0Γ in changed local coordinates
    b0: Vec<f64>,
    ni: usize,
    /// factorized [[A_II, A_IΔ, B_IIᵀ, 0], [A_ΔI, A_ΔΔ, B_ΔIᵀ, 0], [B_II, B_IΔ, 0, a], [0, 0, aᵀ, 0]]
    lu: SparseLu,
    /// coupling of the local dual problem to (local primal, p_0)
    l: CsrMatrix,
    /// K_Δ⁻¹ L
    phi: Mat<f64>,
}

impl LocalDual {
    fn coarse_local_ids(&self, n_primal: usize, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.primal_global.iter().copied().chain(std::iter::once(n_primal + s))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BddcCounters {
    pub applications: usize,
    pub dual_solves: usize,
    pub coarse_solves: usize,
}

#[derive(Debug)]
pub struct BddcPreconditioner {
    pub primal: PrimalSpace,
    pub basis: ChangeOfBasis,
    locals: Vec<LocalDual>,
    n_gamma: usize,
    n_primal: usize,
    subdomain_areas: Vec<f64>,
    coarse: Mat<f64>,
    coarse_lu: DenseLu,
    bordered: bool,
    coarse_asymmetry: f64,
    applications: AtomicUsize,
    dual_solves: AtomicUsize,
    coarse_solves: AtomicUsize,
}

impl BddcPreconditioner {
    pub fn new(op: &InterfaceOperator, part: &SubdomainPartition, kind: PrimalKind) -> Result<Self> {
        Self::with_primal(op, part, select_primal(part, kind)?)
    }

    pub fn with_primal(op: &InterfaceOperator, part: &SubdomainPartition, primal: PrimalSpace) -> Result<Self> {
        let n_sub = op.num_subdomains();
        if n_sub < 2 {
            return Err(Error::InvalidArgument("BDDC needs at least two subdomains".into()));
        }
        let n_gamma = op.num_interface();
        if part.num_interface_dofs() != n_gamma || part.num_subdomains != n_sub {
            return Err(Error::Dimension("partition does not match the interface operator".into()));
        }
        let basis = ChangeOfBasis::new(n_gamma, &primal, part)?;
        let n_primal = primal.num_primal();
        let locals = op
            .solvers
            .par_iter()
            .map(|s| build_local(s, &basis, &part.multiplicity))
            .collect::<Result<Vec<_>>>()?;

        let nc = n_primal + n_sub;
        let mut coarse = Mat::<f64>::zeros(nc, nc);
        let mut coarse_asymmetry: f64 = 0.0;
        for (s, (loc, solver)) in locals.iter().zip(&op.solvers).enumerate() {
            let local = local_coarse_matrix(loc, solver);
            let k = local.nrows();
            for a in 0..k {
                for b in 0..k {
                    coarse_asymmetry = coarse_asymmetry.max((local[(a, b)] - local[(b, a)]).abs());
                }
            }
            let ids: Vec<usize> = loc.coarse_local_ids(n_primal, s).collect();
            for a in 0..k {
                for b in 0..k {
                    coarse[(ids[a], ids[b])] += 0.5 * (local[(a, b)] + local[(b, a)]);
                }
            }
        }
        let subdomain_areas = op.subdomain_areas().to_vec();
        // constant p_0 is in the kernel once every dual field is flux-free
        let mut ones = vec![0.0; nc];
        ones[n_primal..].fill(1.0);
        let kernel_res = (0..nc)
            .map(|i| (0..nc).map(|j| coarse[(i, j)] * ones[j]).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let bordered = kernel_res <= 1e-10 * coarse.norm_max().max(f64::MIN_POSITIVE);
        let coarse_lu = if bordered {
            let mut aug = Mat::<f64>::zeros(nc + 1, nc + 1);
            for i in 0..nc {
                for j in 0..nc {
                    aug[(i, j)] = coarse[(i, j)];
                }
            }
            for (s, &a) in subdomain_areas.iter().enumerate() {
                aug[(n_primal + s, nc)] = a;
                aug[(nc, n_primal + s)] = a;
            }
            DenseLu::new(&aug, "coarse problem (bordered)")
        } else {
            DenseLu::new(&coarse, "coarse problem")
        }
        .map_err(|e| match e {
            Error::Singular { what, msg } => Error::Singular {
                what,
                msg: format!("{msg}; kernel not removed"),
            },
            e => e,
        })?;
        Ok(BddcPreconditioner {
            primal,
            basis,
            locals,
            n_gamma,
            n_primal,
            subdomain_areas,
            coarse,
            coarse_lu,
            bordered,
            coarse_asymmetry,
            applications: AtomicUsize::new(0),
            dual_solves: AtomicUsize::new(0),
            coarse_solves: AtomicUsize::new(0),
        })
    }

    pub fn num_subdomains(&self) -> usize {
        self.locals.len()
    }

    /// n_Π
    pub fn num_primal(&self) -> usize {
        self.n_primal
    }

    /// n_Π + N
    pub fn coarse_dim(&self) -> usize {
        self.n_primal + self.num_subdomains()
    }

    /// Assembled coarse matrix S_CC.
    pub fn coarse_matrix(&self) -> &Mat<f64> {
        &self.coarse
    }

    /// max |S_CC^(i) - S_CC^(i)ᵀ| over subdomains before symmetrization.
    pub fn coarse_asymmetry(&self) -> f64 {
        self.coarse_asymmetry
    }

    /// Whether the coarse solve pins the constant pressure mode.
    pub fn coarse_is_bordered(&self) -> bool {
        self.bordered
    }

    pub fn dual_sizes(&self) -> Vec<usize> {
        self.locals.iter().map(|l| l.dual_local.len()).collect()
    }

    pub fn counters(&self) -> BddcCounters {
        BddcCounters {
            applications: self.applications.load(Ordering::Relaxed),
            dual_solves: self.dual_solves.load(Ordering::Relaxed),
            coarse_solves: self.coarse_solves.load(Ordering::Relaxed),
        }
    }

    pub fn reset_counters(&self) {
        self.applications.store(0, Ordering::Relaxed);
        self.dual_solves.store(0, Ordering::Relaxed);
        self.coarse_solves.store(0, Ordering::Relaxed);
    }

    /// max over subdomains and dual basis fields of |B_0Δ^(i) v_Δ|.
    pub fn assumption1_defect(&self) -> f64 {
        self.locals
            .iter()
            .flat_map(|l| l.dual_local.iter().map(move |&k| l.b0[k].abs()))
            .fold(0.0, f64::max)
    }

    fn zero_partial(&self) -> PartialVector {
        PartialVector {
            primal: vec![0.0; self.n_primal],
            p0: vec![0.0; self.num_subdomains()],
            dual: self.locals.iter().map(|l| vec![0.0; l.dual_local.len()]).collect(),
        }
    }

    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(x.len(), self.n_gamma + self.num_subdomains(), "interface vector has wrong length");
        (x[..self.n_gamma].to_vec(), x[self.n_gamma..].to_vec())
    }

    /// R̃ in changed coordinates: copy primal values, duplicate duals.
    pub fn restrict_changed(&self, ut: &[f64], p0: &[f64]) -> PartialVector {
        let mut w = self.zero_partial();
        for (pos, id) in self.basis.primal_index.iter().enumerate() {
            if let Some(id) = id {
                w.primal[*id] = ut[pos];
            }
        }
        w.p0.copy_from_slice(p0);
        for (d, l) in w.dual.iter_mut().zip(&self.locals) {
            for (k, &pos) in l.dual_pos.iter().enumerate() {
                d[k] = ut[pos];
            }
        }
        w
    }

    /// R̃_D in changed coordinates: duals weighted by δ†.
    pub fn restrict_changed_scaled(&self, ut: &[f64], p0: &[f64]) -> PartialVector {
        let mut w = self.restrict_changed(ut, p0);
        for (d, l) in w.dual.iter_mut().zip(&self.locals) {
            for (v, s) in d.iter_mut().zip(&l.dual_scale) {
                *v *= s;
            }
        }
        w
    }

    /// R̃ᵀ: sums dual copies. Returns (ũ, p0).
    pub fn assemble_changed(&self, w: &PartialVector) -> (Vec<f64>, Vec<f64>) {
        self.assemble_impl(w, false)
    }

    /// R̃_Dᵀ: δ†-weighted average of dual copies. Returns (ũ, p0).
    pub fn assemble_changed_scaled(&self, w: &PartialVector) -> (Vec<f64>, Vec<f64>) {
        self.assemble_impl(w, true)
    }

    fn assemble_impl(&self, w: &PartialVector, scaled: bool) -> (Vec<f64>, Vec<f64>) {
        let mut ut = vec![0.0; self.n_gamma];
        for (pos, id) in self.basis.primal_index.iter().enumerate() {
            if let Some(id) = id {
                ut[pos] = w.primal[*id];
            }
        }
        for (d, l) in w.dual.iter().zip(&self.locals) {
            for (k, &pos) in l.dual_pos.iter().enumerate() {
                ut[pos] += if scaled { l.dual_scale[k] * d[k] } else { d[k] };
            }
        }
        (ut, w.p0.clone())
    }

    /// Local interface vector (original coordinates) of subdomain `s`.
    fn local_original(&self, w: &PartialVector, s: usize) -> Vec<f64> {
        let l = &self.locals[s];
        let mut lt = vec![0.0; l.interface.len()];
        for (k, &id) in l.primal_local.iter().zip(&l.primal_global) {
            lt[*k] = w.primal[id];
        }
        for (k, &loc) in l.dual_local.iter().enumerate() {
            lt[loc] = w.dual[s][k];
        }
        l.t_local.mul_vec(&lt)
    }

    /// Per-subdomain fluxes B_0Γ^(i) of a partially assembled vector.
    pub fn partial_flux(&self, w: &PartialVector, op: &InterfaceOperator) -> Vec<f64> {
        (0..self.num_subdomains())
            .map(|s| dot(&op.solvers[s].blocks.b_0g, &self.local_original(w, s)))
            .collect()
    }

    /// S̃ w: partially assembled Schur complement, one local solve per subdomain.
    pub fn apply_partial_schur(&self, op: &InterfaceOperator, w: &PartialVector) -> PartialVector {
        let parts: Vec<(Vec<f64>, f64)> = (0..self.num_subdomains())
            .into_par_iter()
            .map(|s| {
                let (y, flux) = op.solvers[s].apply_schur(&self.local_original(w, s), w.p0[s]);
                let mut yt = vec![0.0; y.len()];
                self.locals[s].t_local.tr_mul_vec_add(1.0, &y, &mut yt);
                (yt, flux)
            })
            .collect();
        let mut out = self.zero_partial();
        for (s, (yt, flux)) in parts.into_iter().enumerate() {
            let l = &self.locals[s];
            for (k, &id) in l.primal_local.iter().zip(&l.primal_global) {
                out.primal[id] += yt[*k];
            }
            for (k, &loc) in l.dual_local.iter().enumerate() {
                out.dual[s][k] = yt[loc];
            }
            out.p0[s] = flux;
        }
        out
    }

    /// S̃⁻¹ g by independent dual solves and one coarse solve.
    pub fn solve_partial(&self, g: &PartialVector) -> PartialVector {
        let n_sub = self.num_subdomains();
        let np = self.n_primal;
        let y: Vec<Vec<f64>> = (0..n_sub)
            .into_par_iter()
            .map(|s| {
                let l = &self.locals[s];
                let mut rhs = vec![0.0; l.lu.dim()];
                rhs[l.ni..l.ni + l.dual_local.len()].copy_from_slice(&g.dual[s]);
                l.lu.solve(&rhs)
            })
            .collect();
        self.dual_solves.fetch_add(n_sub, Ordering::Relaxed);
        let mut gc: Vec<f64> = g.primal.iter().chain(&g.p0).copied().collect();
        for (s, (l, ys)) in self.locals.iter().zip(&y).enumerate() {
            let mut lt = vec![0.0; l.l.ncols()];
            l.l.tr_mul_vec_add(1.0, ys, &mut lt);
            for (k, id) in l.coarse_local_ids(np, s).enumerate() {
                gc[id] -= lt[k];
            }
        }
        if self.bordered {
            gc.push(0.0);
        }
        let mut zc = self.coarse_lu.solve(&gc);
        zc.truncate(np + n_sub);
        self.coarse_solves.fetch_add(1, Ordering::Relaxed);
        let dual: Vec<Vec<f64>> = (0..n_sub)
            .into_par_iter()
            .map(|s| {
                let l = &self.locals[s];
                let zl: Vec<f64> = l.coarse_local_ids(np, s).map(|id| zc[id]).collect();
                (0..l.dual_local.len())
                    .map(|k| {
                        let row = l.ni + k;
                        y[s][row] - (0..zl.len()).map(|c| l.phi[(row, c)] * zl[c]).sum::<f64>()
                    })
                    .collect()
            })
            .collect();
        PartialVector {
            primal: zc[..np].to_vec(),
            p0: zc[np..].to_vec(),
            dual,
        }
    }

    /// Shifts the `p_0` block to zero area-weighted mean.
    pub fn project_pressure(&self, p0: &mut [f64]) {
        let mean = dot(p0, &self.subdomain_areas) / self.subdomain_areas.iter().sum::<f64>();
        for v in p0 {
            *v -= mean;
        }
    }

    /// z = T R̃_Dᵀ S̃⁻¹ R̃_D Tᵀ r, then p_0 projected.
    pub fn apply_into(&self, r: &[f64], z: &mut [f64]) {
        let (rg, r0) = self.split(r);
        let rt = self.basis.residual_to_changed(&rg);
        let w = self.solve_partial(&self.restrict_changed_scaled(&rt, &r0));
        let (ut, mut p0) = self.assemble_changed_scaled(&w);
        self.project_pressure(&mut p0);
        z[..self.n_gamma].copy_from_slice(&self.basis.to_original(&ut));
        z[self.n_gamma..].copy_from_slice(&p0);
        self.applications.fetch_add(1, Ordering::Relaxed);
    }
}

impl LinearOperator for BddcPreconditioner {
    fn dim(&self) -> usize {
        self.n_gamma + self.num_subdomains()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_into(x, y)
    }
}

fn build_local(solver: &SubdomainSolver, basis: &ChangeOfBasis, multiplicity: &[usize]) -> Result<LocalDual> {
    let b = &solver.blocks;
    let id = b.id;
    let interface = b.interface.clone();
    let ng = interface.len();
    let mut local_of = std::collections::HashMap::with_capacity(ng);
    for (k, &g) in interface.iter().enumerate() {
        local_of.insert(g, k);
    }
    let mut tt = Vec::new();
    for (k, &g) in interface.iter().enumerate() {
        for (c, v) in basis.t.row(g) {
            let lc = *local_of
                .get(&c)
                .ok_or_else(|| Error::Dimension(format!("change of basis leaves subdomain {id}")))?;
            tt.push((k, lc, v));
        }
    }
    let t_local = CsrMatrix::from_triplets(ng, ng, &tt);
    let (mut primal_local, mut primal_global, mut dual_local, mut dual_pos, mut dual_scale) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, &g) in interface.iter().enumerate() {
        match basis.primal_index[g] {
            Some(p) => {
                primal_local.push(k);
                primal_global.push(p);
            }
            None => {
                dual_local.push(k);
                dual_pos.push(g);
                dual_scale.push(1.0 / multiplicity[g] as f64);
            }
        }
    }
    let (ni, nd, m, np) = (b.interior.len(), dual_local.len(), b.cells.len(), primal_local.len());
    let a_ig = b.a_ig.matmul(&t_local);
    let a_gg = t_local.transpose().matmul(&b.a_gg).matmul(&t_local);
    let b_ig = b.b_ig.matmul(&t_local);
    let mut b0 = vec![0.0; ng];
    t_local.tr_mul_vec_add(1.0, &b.b_0g, &mut b0);

    let mut dual_idx = vec![None; ng];
    let mut primal_idx = vec![None; ng];
    for (k, &loc) in dual_local.iter().enumerate() {
        dual_idx[loc] = Some(k);
    }
    for (k, &loc) in primal_local.iter().enumerate() {
        primal_idx[loc] = Some(k);
    }
    let (od, oq, ol) = (ni, ni + nd, ni + nd + m);
    let dim = ol + 1;
    let mut kt = b.a_ii.triplets();
    let mut lt = Vec::new();
    for (r, c, v) in a_ig.triplets() {
        if let Some(d) = dual_idx[c] {
            kt.push((r, od + d, v));
            kt.push((od + d, r, v));
        } else if let Some(p) = primal_idx[c] {
            lt.push((r, p, v));
        }
    }
    for (r, c, v) in a_gg.triplets() {
        if let Some(dr) = dual_idx[r] {
            if let Some(dc) = dual_idx[c] {
                kt.push((od + dr, od + dc, v));
            } else if let Some(pc) = primal_idx[c] {
                lt.push((od + dr, pc, v));
            }
        }
    }
    for (r, c, v) in b.b_ii.triplets() {
        kt.push((oq + r, c, v));
        kt.push((c, oq + r, v));
    }
    for (r, c, v) in b_ig.triplets() {
        if let Some(d) = dual_idx[c] {
            kt.push((oq + r, od + d, v));
            kt.push((od + d, oq + r, v));
        } else if let Some(p) = primal_idx[c] {
            lt.push((oq + r, p, v));
        }
    }
    for (k, &a) in b.cell_areas.iter().enumerate() {
        kt.push((oq + k, ol, a));
        kt.push((ol, oq + k, a));
    }
    for (k, &loc) in dual_local.iter().enumerate() {
        if b0[loc] != 0.0 {
            lt.push((od + k, np, b0[loc]));
        }
    }
    let lu = SparseLu::new(dim, &kt, &format!("dual block of subdomain {id}")).map_err(|e| match e {
        Error::Singular { what, msg } => Error::Singular {
            what,
            msg: format!("{msg}; primal constraints are insufficient"),
        },
        e => e,
    })?;
    let l = CsrMatrix::from_triplets(dim, np + 1, &lt);
    let phi = lu.solve_mat(&l.to_dense());
    Ok(LocalDual {
        interface,
        primal_local,
        primal_global,
        dual_local,
        dual_pos,
        dual_scale,
        t_local,
        b0,
        ni,
        lu,
        l,
        phi,
    })
}

/// C_i - L_iᵀ Φ_i over (local primal, p_0).
fn local_coarse_matrix(loc: &LocalDual, solver: &SubdomainSolver) -> Mat<f64> {
    let np = loc.primal_local.len();
    let a_gg = loc
        .t_local
        .transpose()
        .matmul(&solver.blocks.a_gg)
        .matmul(&loc.t_local);
    let mut c = Mat::<f64>::zeros(np + 1, np + 1);
    for (a, &ka) in loc.primal_local.iter().enumerate() {
        for (bb, &kb) in loc.primal_local.iter().enumerate() {
            c[(a, bb)] = a_gg.get(ka, kb);
        }
        c[(a, np)] = loc.b0[ka];
        c[(np, a)] = loc.b0[ka];
    }
    let lt_phi = loc.l.to_dense().transpose() * &loc.phi;
    c - lt_phi
}

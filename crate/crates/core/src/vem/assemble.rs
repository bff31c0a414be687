use super::dofmap::DofMap;
use super::local::{local_matrices, LocalElementMatrices};
use crate::error::{Error, Result};
use crate::linalg::{norm, CsrMatrix, SparseLu};
use crate::mesh::{Point2, PolygonalMesh};
use rayon::prelude::*;

/// Assembled saddle-point system after homogeneous Dirichlet elimination.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub dofmap: DofMap,
    /// n_u × n_u over free velocity dofs
    pub a: CsrMatrix,
    /// n_p × n_u; row K is the flux ∫_∂K v·n
    pub b: CsrMatrix,
    pub f: Vec<f64>,
    pub viscosity: Vec<f64>,
    pub cell_areas: Vec<f64>,
    pub elements: Vec<LocalElementMatrices>,
    /// unreduced global dof of every local dof, per cell
    pub cell_dofs: Vec<Vec<usize>>,
}

impl GlobalSystem {
    pub fn num_free_velocity(&self) -> usize {
        self.a.nrows()
    }

    pub fn num_pressure(&self) -> usize {
        self.b.nrows()
    }

    /// Free-dof indices of a cell's local dofs (`None` on the boundary).
    pub fn cell_free_dofs(&self, c: usize) -> Vec<Option<usize>> {
        self.cell_dofs[c].iter().map(|&d| self.dofmap.free_index(d)).collect()
    }
}

/// Scatters element contributions; `nu` holds one viscosity per cell.
pub fn assemble(mesh: &PolygonalMesh, nu: &[f64], f: &(dyn Fn(Point2) -> [f64; 2] + Sync)) -> Result<GlobalSystem> {
    if nu.len() != mesh.num_cells() {
        return Err(Error::Dimension(format!(
            "{} viscosities for {} cells",
            nu.len(),
            mesh.num_cells()
        )));
    }
    let dofmap = DofMap::new(mesh);
    let elements: Vec<LocalElementMatrices> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            local_matrices(&mesh.cell_points(c), nu[c], f).map_err(|e| match e {
                Error::Geometry { msg, .. } => Error::Geometry { cell: c, msg },
                e => e,
            })
        })
        .collect::<Result<_>>()?;
    let cell_dofs: Vec<Vec<usize>> = (0..mesh.num_cells()).map(|c| dofmap.cell_dofs(mesh, c)).collect();

    let n_u = dofmap.num_free_velocity_dofs();
    let mut ta = Vec::new();
    let mut tb = Vec::new();
    let mut rhs = vec![0.0; n_u];
    for (c, (el, dofs)) in elements.iter().zip(&cell_dofs).enumerate() {
        if dofs.len() != el.b.len() {
            return Err(Error::Dimension(format!("cell {c}: local/global dof count mismatch")));
        }
        let free: Vec<Option<usize>> = dofs.iter().map(|&d| dofmap.free_index(d)).collect();
        for (i, fi) in free.iter().enumerate() {
            let Some(gi) = *fi else { continue };
            rhs[gi] += el.f[i];
            tb.push((c, gi, el.b[i]));
            for (j, fj) in free.iter().enumerate() {
                if let Some(gj) = *fj {
                    ta.push((gi, gj, el.a[(i, j)]));
                }
            }
        }
    }
    Ok(GlobalSystem {
        a: CsrMatrix::from_triplets(n_u, n_u, &ta),
        b: CsrMatrix::from_triplets(mesh.num_cells(), n_u, &tb),
        f: rhs,
        viscosity: nu.to_vec(),
        cell_areas: elements.iter().map(|e| e.area).collect(),
        dofmap,
        elements,
        cell_dofs,
    })
}

/// Solves [[A, Bᵀ, 0], [B, 0, a], [0, aᵀ, 0]] by sparse LU, with `a` the cell
/// areas enforcing a zero-mean pressure. Returns (u on free dofs, p per cell).
pub fn solve_monolithic_direct(sys: &GlobalSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = sys.num_free_velocity();
    let np = sys.num_pressure();
    let dim = nu + np + 1;
    let mut t = sys.a.triplets();
    for (r, c, v) in sys.b.triplets() {
        t.push((nu + r, c, v));
        t.push((c, nu + r, v));
    }
    for (k, &a) in sys.cell_areas.iter().enumerate() {
        t.push((nu + k, dim - 1, a));
        t.push((dim - 1, nu + k, a));
    }
    let lu = SparseLu::new(dim, &t, "monolithic saddle-point system")?;
    let mut rhs = vec![0.0; dim];
    rhs[..nu].copy_from_slice(&sys.f);
    let x = lu.solve(&rhs);
    let k = CsrMatrix::from_triplets(dim, dim, &t);
    let mut r = k.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(&rhs) {
        *ri -= bi;
    }
    let scale = norm(&rhs).max(f64::MIN_POSITIVE);
    if norm(&rhs) > 0.0 && norm(&r) > 1e-10 * scale {
        return Err(Error::Singular {
            what: "monolithic saddle-point system".into(),
            msg: format!("relative residual {:.3e}", norm(&r) / scale),
        });
    }
    Ok((x[..nu].to_vec(), x[nu..nu + np].to_vec()))
}

//! Element matrices of the divergence-free k = 2 virtual element.
//!
//! Local velocity dofs are ordered `comp * 2k + node`, nodes being the k
//! vertices followed by the k edge midpoints (edge `l` joins vertices `l` and
//! `l+1`). Polynomials are expanded in scaled monomials `((x - x̄)/h)^α`, six per
//! component, coefficient index `comp * 6 + j`.

use super::quadrature::{gauss_legendre_unit, integrate_polygon};
use crate::error::{Error, Result};
use crate::linalg::dense_solve;
use crate::mesh::{polygon_area, polygon_centroid, polygon_diameter, Point2};
use faer::Mat;

/// Exponents (a, b) of ξ^a η^b.
pub const MONOMIALS: [(i32, i32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
pub const NUM_POLY: usize = 12;

/// Scaled monomial basis of P2 on one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMonomials {
    pub center: Point2,
    pub h: f64,
}

impl ScaledMonomials {
    fn local(&self, p: Point2) -> (f64, f64) {
        ((p.x - self.center.x) / self.h, (p.y - self.center.y) / self.h)
    }

    pub fn value(&self, j: usize, p: Point2) -> f64 {
        let (xi, eta) = self.local(p);
        let (a, b) = MONOMIALS[j];
        xi.powi(a) * eta.powi(b)
    }

    /// Physical gradient.
    pub fn grad(&self, j: usize, p: Point2) -> [f64; 2] {
        let (xi, eta) = self.local(p);
        let (a, b) = MONOMIALS[j];
        let gx = if a > 0 { a as f64 * xi.powi(a - 1) * eta.powi(b) } else { 0.0 };
        let gy = if b > 0 { b as f64 * xi.powi(a) * eta.powi(b - 1) } else { 0.0 };
        [gx / self.h, gy / self.h]
    }

    /// Physical Laplacian (constant for quadratics).
    pub fn laplacian(&self, j: usize) -> f64 {
        let (a, b) = MONOMIALS[j];
        let v = |e: i32| if e == 2 { 2.0 } else { 0.0 };
        (v(a) + v(b)) / (self.h * self.h)
    }

    /// Vector polynomial value from 12 coefficients.
    pub fn eval(&self, coef: &[f64], p: Point2) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..6).map(|j| coef[c * 6 + j] * self.value(j, p)).sum();
        }
        out
    }

    /// Row `c` holds ∇ of component `c`.
    pub fn eval_grad(&self, coef: &[f64], p: Point2) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (c, row) in out.iter_mut().enumerate() {
            for j in 0..6 {
                let g = self.grad(j, p);
                row[0] += coef[c * 6 + j] * g[0];
                row[1] += coef[c * 6 + j] * g[1];
            }
        }
        out
    }
}

/// ∫_K ξ^a η^b dx for a + b ≤ 5 by the divergence theorem, exact for polygons.
pub fn polygon_moment(pts: &[Point2], basis: &ScaledMonomials, a: i32, b: i32) -> f64 {
    let k = pts.len();
    let gl = gauss_legendre_unit(4);
    let mut s = 0.0;
    for l in 0..k {
        let (p, q) = (pts[l], pts[(l + 1) % k]);
        let dy = q.y - p.y;
        if dy == 0.0 {
            continue;
        }
        for &(t, w) in &gl {
            let x = Point2::new(p.x + t * (q.x - p.x), p.y + t * dy);
            let (xi, eta) = basis.local(x);
            s += w * dy * basis.h * xi.powi(a + 1) * eta.powi(b) / (a + 1) as f64;
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalElementMatrices {
    /// Symmetric stiffness over the 2·(n_v + n_e) local velocity dofs.
    pub a: Mat<f64>,
    /// Divergence row: entry = ∫_∂K φ·n ds.
    pub b: Vec<f64>,
    pub f: Vec<f64>,
    /// Energy projector onto [P2]²: dofs → 12 monomial coefficients.
    pub projector: Mat<f64>,
    pub basis: ScaledMonomials,
    pub area: f64,
}

/// Per-node boundary data of one cell.
struct CellNodes {
    points: Vec<Point2>,
    /// (edge, Gauss-Lobatto weight) pairs containing each node
    edges: Vec<Vec<(usize, f64)>>,
    normals: Vec<[f64; 2]>,
    /// Σ_e w n_e: the flux of the trace basis function through ∂K
    flux: Vec<[f64; 2]>,
    /// Σ_e w
    weight: Vec<f64>,
    perimeter: f64,
}

fn cell_nodes(pts: &[Point2]) -> CellNodes {
    let k = pts.len();
    let mut points: Vec<Point2> = pts.to_vec();
    points.extend((0..k).map(|l| pts[l].midpoint(pts[(l + 1) % k])));
    let mut normals = Vec::with_capacity(k);
    let mut lengths = Vec::with_capacity(k);
    for l in 0..k {
        let (p, q) = (pts[l], pts[(l + 1) % k]);
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let len = dx.hypot(dy);
        normals.push([dy / len, -dx / len]);
        lengths.push(len);
    }
    let mut edges = vec![Vec::new(); 2 * k];
    for l in 0..k {
        let w_end = lengths[l] / 6.0;
        edges[l].push((l, w_end));
        edges[(l + 1) % k].push((l, w_end));
        edges[k + l].push((l, 4.0 * lengths[l] / 6.0));
    }
    let flux = edges
        .iter()
        .map(|es| {
            es.iter().fold([0.0, 0.0], |acc, &(e, w)| {
                [acc[0] + w * normals[e][0], acc[1] + w * normals[e][1]]
            })
        })
        .collect();
    let weight = edges.iter().map(|es| es.iter().map(|&(_, w)| w).sum()).collect();
    CellNodes {
        points,
        edges,
        normals,
        flux,
        weight,
        perimeter: lengths.iter().sum(),
    }
}

/// Cell average of `f` by centroid sub-triangulation (degree 6 rule per triangle).
pub fn cell_average(pts: &[Point2], f: &dyn Fn(Point2) -> [f64; 2]) -> [f64; 2] {
    let area = polygon_area(pts);
    [
        integrate_polygon(pts, 4, |x| f(x)[0]) / area,
        integrate_polygon(pts, 4, |x| f(x)[1]) / area,
    ]
}

/// Builds A_K, B_K, f_K and Π_K for a counterclockwise polygon.
pub fn local_matrices(pts: &[Point2], nu: f64, f: &dyn Fn(Point2) -> [f64; 2]) -> Result<LocalElementMatrices> {
    local_matrices_with_load(pts, nu, cell_average(pts, f))
}

pub fn local_matrices_with_load(pts: &[Point2], nu: f64, f_avg: [f64; 2]) -> Result<LocalElementMatrices> {
    let geom_err = |msg: String| Error::Geometry { cell: 0, msg };
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    let k = pts.len();
    let area = polygon_area(pts);
    if !(area > 0.0) {
        return Err(geom_err("non-positive area".into()));
    }
    let center = polygon_centroid(pts);
    let basis = ScaledMonomials {
        center,
        h: polygon_diameter(pts),
    };
    let nodes = cell_nodes(pts);
    let nn = 2 * k;
    let ndof = 2 * nn;
    let rel = |n: usize, c: usize| {
        let p = nodes.points[n];
        if c == 0 { p.x - center.x } else { p.y - center.y }
    };

    // D: dof values of each monomial
    let mut d = Mat::<f64>::zeros(ndof, NUM_POLY);
    for c in 0..2 {
        for n in 0..nn {
            for j in 0..6 {
                d[(c * nn + n, c * 6 + j)] = basis.value(j, nodes.points[n]);
            }
        }
    }

    // B̃: a_K(m_α, φ) for non-constant α, boundary mean for constant α.
    // ∫_K φ_c' uses ∫_K v_c' = ∫_∂K (v·n)(x_c' - x̄_c') ds, valid since div v ∈ P0.
    let mut bt = Mat::<f64>::zeros(NUM_POLY, ndof);
    for cp in 0..2 {
        for j in 0..6 {
            let row = cp * 6 + j;
            for n in 0..nn {
                if j == 0 {
                    bt[(row, cp * nn + n)] = nodes.weight[n] / nodes.perimeter;
                    continue;
                }
                let g = basis.grad(j, nodes.points[n]);
                let lap = basis.laplacian(j);
                for c in 0..2 {
                    let mut v = -lap * nodes.flux[n][c] * rel(n, cp);
                    if c == cp {
                        v += nodes.edges[n]
                            .iter()
                            .map(|&(e, w)| w * (g[0] * nodes.normals[e][0] + g[1] * nodes.normals[e][1]))
                            .sum::<f64>();
                    }
                    bt[(row, c * nn + n)] = nu * v;
                }
            }
        }
    }

    // exact stiffness of the monomials
    let mut moments = [[0.0f64; 3]; 3];
    for (a, row) in moments.iter_mut().enumerate() {
        for (b, m) in row.iter_mut().enumerate() {
            if a + b <= 2 {
                *m = polygon_moment(pts, &basis, a as i32, b as i32);
            }
        }
    }
    let mut g = Mat::<f64>::zeros(NUM_POLY, NUM_POLY);
    let h2 = basis.h * basis.h;
    for j in 1..6 {
        for jj in 1..6 {
            let (a, b) = MONOMIALS[j];
            let (aa, bb) = MONOMIALS[jj];
            let mut s = 0.0;
            if a > 0 && aa > 0 {
                s += (a * aa) as f64 * moments[(a + aa - 2) as usize][(b + bb) as usize];
            }
            if b > 0 && bb > 0 {
                s += (b * bb) as f64 * moments[(a + aa) as usize][(b + bb - 2) as usize];
            }
            for c in 0..2 {
                g[(c * 6 + j, c * 6 + jj)] = nu * s / h2;
            }
        }
    }
    let mut gt = g.clone();
    for c in 0..2 {
        for beta in 0..NUM_POLY {
            gt[(c * 6, beta)] = (0..ndof).map(|i| bt[(c * 6, i)] * d[(i, beta)]).sum();
        }
    }
    let projector = dense_solve(&gt, &bt).ok_or_else(|| geom_err("singular projector system".into()))?;

    let consistency = projector.transpose() * &g * &projector;
    let tau = (0..ndof).map(|i| consistency[(i, i)]).sum::<f64>() / ndof as f64;
    let defect = Mat::<f64>::identity(ndof, ndof) - &d * &projector;
    let a_raw = consistency + (defect.transpose() * &defect) * faer::Scale(tau);
    let a = Mat::from_fn(ndof, ndof, |i, j| 0.5 * (a_raw[(i, j)] + a_raw[(j, i)]));

    let mut b = vec![0.0; ndof];
    let mut f = vec![0.0; ndof];
    for c in 0..2 {
        for n in 0..nn {
            b[c * nn + n] = nodes.flux[n][c];
            f[c * nn + n] = nodes.flux[n][c] * (f_avg[0] * rel(n, 0) + f_avg[1] * rel(n, 1));
        }
    }
    Ok(LocalElementMatrices {
        a,
        b,
        f,
        projector,
        basis,
        area,
    })
}

impl LocalElementMatrices {
    /// Evaluation matrix D (dof values of each monomial).
    pub fn dof_matrix(&self, pts: &[Point2]) -> Mat<f64> {
        let k = pts.len();
        let nn = 2 * k;
        let mut points: Vec<Point2> = pts.to_vec();
        points.extend((0..k).map(|l| pts[l].midpoint(pts[(l + 1) % k])));
        let mut d = Mat::<f64>::zeros(2 * nn, NUM_POLY);
        for c in 0..2 {
            for n in 0..nn {
                for j in 0..6 {
                    d[(c * nn + n, c * 6 + j)] = self.basis.value(j, points[n]);
                }
            }
        }
        d
    }

    /// Monomial coefficients of Π_K applied to local dofs.
    pub fn project(&self, dofs: &[f64]) -> Vec<f64> {
        (0..NUM_POLY)
            .map(|r| (0..dofs.len()).map(|i| self.projector[(r, i)] * dofs[i]).sum())
            .collect()
    }
}

/// Local dofs of a vector field: values at vertices then midpoints, component-major.
pub fn sample_dofs(pts: &[Point2], v: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
    let k = pts.len();
    let mut points: Vec<Point2> = pts.to_vec();
    points.extend((0..k).map(|l| pts[l].midpoint(pts[(l + 1) % k])));
    let vals: Vec<[f64; 2]> = points.iter().map(|&p| v(p)).collect();
    (0..2).flat_map(|c| vals.iter().map(move |x| x[c])).collect()
}

//! Polygonal meshes of the unit square: data structure, geometry, validation.

mod generate;
mod io;
mod voronoi;

pub use generate::generate_mesh;
pub use voronoi::{cvt_from_sites, lloyd_relaxed_sites, random_sites};

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn midpoint(self, o: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + o.x), 0.5 * (self.y + o.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeshFamily {
    Quad,
    Hexa,
    Tri,
    Cvt,
}

impl MeshFamily {
    pub const ALL: [MeshFamily; 4] = [MeshFamily::Quad, MeshFamily::Hexa, MeshFamily::Tri, MeshFamily::Cvt];

    pub fn name(self) -> &'static str {
        match self {
            MeshFamily::Quad => "QUAD",
            MeshFamily::Hexa => "HEXA",
            MeshFamily::Tri => "TRI",
            MeshFamily::Cvt => "CVT",
        }
    }

    /// Cells line up with square subdomains whenever 1/H divides n.
    pub fn is_structured(self) -> bool {
        matches!(self, MeshFamily::Quad | MeshFamily::Tri)
    }
}

impl fmt::Display for MeshFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeshFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "QUAD" => Ok(MeshFamily::Quad),
            "HEXA" | "HEX" => Ok(MeshFamily::Hexa),
            "TRI" => Ok(MeshFamily::Tri),
            "CVT" | "VORONOI" => Ok(MeshFamily::Cvt),
            _ => Err(Error::InvalidArgument(format!("unknown mesh family '{s}'"))),
        }
    }
}

/// A mesh edge with canonical orientation `vertices[0] < vertices[1]`.
/// `cells[0]` traverses the edge in canonical direction, `cells[1]` against it.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[0].is_none() || self.cells[1].is_none()
    }

    pub fn adjacent_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub area: f64,
    pub centroid: Point2,
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQualityReport {
    /// min over cells of shortest edge / diameter
    pub min_edge_ratio: f64,
    /// max h_K / min h_K
    pub uniformity_ratio: f64,
    /// polygon kernel has positive area
    pub star_shaped: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalMesh {
    family: MeshFamily,
    vertices: Vec<Point2>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    cell_edges: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    h: f64,
}

const GEOM_TOL: f64 = 1e-12;

impl PolygonalMesh {
    /// Builds and validates a mesh of the unit square from counterclockwise cells.
    pub fn new(family: MeshFamily, vertices: Vec<Point2>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(Error::Validation("mesh has no cells".into()));
        }
        for (i, p) in vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::Validation(format!("vertex {i} is not finite")));
            }
            if p.x < -GEOM_TOL || p.x > 1.0 + GEOM_TOL || p.y < -GEOM_TOL || p.y > 1.0 + GEOM_TOL {
                return Err(Error::Validation(format!("vertex {i} lies outside the unit square")));
            }
        }
        let mut used = vec![false; nv];
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(Error::Validation(format!("cell {c} has fewer than 3 vertices")));
            }
            for &v in cell {
                if v >= nv {
                    return Err(Error::Validation(format!(
                        "cell {c} references vertex {v} but the mesh has {nv} vertices"
                    )));
                }
                used[v] = true;
            }
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Validation(format!("cell {c} repeats a vertex")));
            }
            let pts: Vec<Point2> = cell.iter().map(|&v| vertices[v]).collect();
            let area = polygon_area(&pts);
            if !(area > 0.0) {
                return Err(Error::Validation(format!(
                    "cell {c} is clockwise or degenerate (signed area {area:e})"
                )));
            }
            if !polygon_is_simple(&pts) {
                return Err(Error::Validation(format!("cell {c} self-intersects")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!("vertex {v} belongs to no cell")));
        }

        let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let k = cell.len();
            let mut ce = Vec::with_capacity(k);
            for l in 0..k {
                let (a, b) = (cell[l], cell[(l + 1) % k]);
                let key = (a.min(b), a.max(b));
                let side = usize::from(a > b);
                let id = *edge_id.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        cells: [None, None],
                    });
                    edges.len() - 1
                });
                if edges[id].cells[side].is_some() {
                    return Err(Error::Validation(format!(
                        "edge ({},{}) is traversed in the same direction by two cells (second: {c})",
                        key.0, key.1
                    )));
                }
                edges[id].cells[side] = Some(c);
                ce.push(id);
            }
            cell_edges.push(ce);
        }

        let mut boundary_vertex = vec![false; nv];
        for e in &edges {
            if e.is_boundary() {
                let (p, q) = (vertices[e.vertices[0]], vertices[e.vertices[1]]);
                if !on_same_square_side(p, q) {
                    return Err(Error::Validation(format!(
                        "edge ({},{}) has one adjacent cell but does not lie on the domain boundary",
                        e.vertices[0], e.vertices[1]
                    )));
                }
                boundary_vertex[e.vertices[0]] = true;
                boundary_vertex[e.vertices[1]] = true;
            }
        }

        let mut mesh = PolygonalMesh {
            family,
            vertices,
            cells,
            edges,
            cell_edges,
            boundary_vertex,
            h: 0.0,
        };
        let mut total = 0.0;
        let mut h: f64 = 0.0;
        for c in 0..mesh.num_cells() {
            let g = mesh.cell_geometry(c);
            total += g.area;
            h = h.max(g.diameter);
        }
        if (total - 1.0).abs() > GEOM_TOL {
            return Err(Error::Validation(format!(
                "cell areas sum to {total:.17} instead of 1"
            )));
        }
        mesh.h = h;
        Ok(mesh)
    }

    pub fn family(&self) -> MeshFamily {
        self.family
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Global edge ids of cell `c`; local edge `l` runs from vertex `l` to `l+1`.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        &self.cell_edges[c]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let pts = self.cell_points(c);
        CellGeometry {
            area: polygon_area(&pts),
            centroid: polygon_centroid(&pts),
            diameter: polygon_diameter(&pts),
        }
    }

    pub fn cell_areas(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|c| polygon_area(&self.cell_points(c))).collect()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point2 {
        let [a, b] = self.edges[e].vertices;
        self.vertices[a].midpoint(self.vertices[b])
    }

    /// Cells sharing each vertex, in increasing cell order.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_vertices()];
        for (c, cell) in self.cells.iter().enumerate() {
            for &v in cell {
                out[v].push(c);
            }
        }
        out
    }

    pub fn quality_report(&self) -> MeshQualityReport {
        let mut min_edge_ratio = f64::INFINITY;
        let (mut hmin, mut hmax) = (f64::INFINITY, 0.0f64);
        let mut star_shaped = Vec::with_capacity(self.num_cells());
        for c in 0..self.num_cells() {
            let pts = self.cell_points(c);
            let d = polygon_diameter(&pts);
            let k = pts.len();
            let shortest = (0..k).map(|l| pts[l].dist(pts[(l + 1) % k])).fold(f64::INFINITY, f64::min);
            min_edge_ratio = min_edge_ratio.min(shortest / d);
            hmin = hmin.min(d);
            hmax = hmax.max(d);
            star_shaped.push(polygon_kernel_area(&pts) > 1e-12 * polygon_area(&pts));
        }
        MeshQualityReport {
            min_edge_ratio,
            uniformity_ratio: hmax / hmin,
            star_shaped,
        }
    }
}

fn on_same_square_side(p: Point2, q: Point2) -> bool {
    let near = |a: f64, b: f64| (a - b).abs() <= GEOM_TOL;
    (near(p.x, 0.0) && near(q.x, 0.0))
        || (near(p.x, 1.0) && near(q.x, 1.0))
        || (near(p.y, 0.0) && near(q.y, 0.0))
        || (near(p.y, 1.0) && near(q.y, 1.0))
}

/// Signed shoelace area (positive for counterclockwise order).
pub fn polygon_area(pts: &[Point2]) -> f64 {
    let k = pts.len();
    let mut s = 0.0;
    for l in 0..k {
        let (p, q) = (pts[l], pts[(l + 1) % k]);
        s += p.x * q.y - q.x * p.y;
    }
    0.5 * s
}

pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    // shift to the first vertex to limit cancellation
    let o = pts[0];
    let k = pts.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for l in 0..k {
        let (p, q) = (pts[l], pts[(l + 1) % k]);
        let (px, py, qx, qy) = (p.x - o.x, p.y - o.y, q.x - o.x, q.y - o.y);
        let cr = px * qy - qx * py;
        a += cr;
        cx += (px + qx) * cr;
        cy += (py + qy) * cr;
    }
    Point2::new(o.x + cx / (3.0 * a), o.y + cy / (3.0 * a))
}

pub fn polygon_diameter(pts: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(pts[i].dist(pts[j]));
        }
    }
    d
}

fn cross(o: Point2, a: Point2, b: Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn segments_intersect(p1: Point2, p2: Point2, q1: Point2, q2: Point2) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Proper crossings between non-adjacent edges.
pub fn polygon_is_simple(pts: &[Point2]) -> bool {
    let k = pts.len();
    for i in 0..k {
        for j in i + 2..k {
            if i == 0 && j == k - 1 {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % k], pts[j], pts[(j + 1) % k]) {
                return false;
            }
        }
    }
    true
}

/// Keeps the part of `poly` where `dist <= eps`. Each vertex carries the label
/// of the edge leaving it; edges cut out are replaced by one with `new_label`.
pub(crate) fn clip_polygon<L: Copy>(
    poly: &[(Point2, L)],
    dist: impl Fn(Point2) -> f64,
    new_label: L,
    eps: f64,
) -> Vec<(Point2, L)> {
    let k = poly.len();
    let d: Vec<f64> = poly.iter().map(|(p, _)| dist(*p)).collect();
    if d.iter().all(|&v| v <= eps) {
        return poly.to_vec();
    }
    let mut out = Vec::with_capacity(k + 1);
    for l in 0..k {
        let m = (l + 1) % k;
        let (p, lab) = poly[l];
        let q = poly[m].0;
        let (pin, qin) = (d[l] <= eps, d[m] <= eps);
        let cut = |t: f64| Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
        match (pin, qin) {
            (true, true) => out.push((p, lab)),
            (true, false) => {
                out.push((p, lab));
                out.push((cut(d[l] / (d[l] - d[m])), new_label));
            }
            (false, true) => out.push((cut(d[l] / (d[l] - d[m])), lab)),
            (false, false) => {}
        }
    }
    out
}

/// Area of the polygon kernel (points that see the whole polygon).
pub fn polygon_kernel_area(pts: &[Point2]) -> f64 {
    let k = pts.len();
    let mut ker: Vec<(Point2, ())> = pts.iter().map(|&p| (p, ())).collect();
    for l in 0..k {
        let (a, b) = (pts[l], pts[(l + 1) % k]);
        // interior lies to the left of a->b
        ker = clip_polygon(&ker, |p| -cross(a, b, p), (), 0.0);
        if ker.len() < 3 {
            return 0.0;
        }
    }
    let kp: Vec<Point2> = ker.into_iter().map(|(p, _)| p).collect();
    polygon_area(&kp).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn unit_square_geometry() {
        let pts = unit_square();
        assert_eq!(polygon_area(&pts), 1.0);
        assert_eq!(polygon_centroid(&pts), Point2::new(0.5, 0.5));
        assert_eq!(polygon_diameter(&pts), 2f64.sqrt());
    }

    #[test]
    fn right_triangle_geometry() {
        let pts = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        assert_eq!(polygon_area(&pts), 0.5);
        let c = polygon_centroid(&pts);
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15 && (c.y - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(polygon_diameter(&pts), 2f64.sqrt());
    }

    #[test]
    fn regular_hexagon_area() {
        let r = 0.3;
        let pts: Vec<Point2> = (0..6)
            .map(|k| {
                let t = std::f64::consts::PI / 3.0 * k as f64;
                Point2::new(0.5 + r * t.cos(), 0.5 + r * t.sin())
            })
            .collect();
        let exact = 3.0 * 3f64.sqrt() * r * r / 2.0;
        assert!((polygon_area(&pts) - exact).abs() < 1e-15);
    }

    #[test]
    fn one_cell_mesh_is_all_boundary() {
        let m = PolygonalMesh::new(MeshFamily::Quad, unit_square(), vec![vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(m.num_edges(), 4);
        assert!(m.edges().iter().all(Edge::is_boundary));
        assert!(m.boundary_vertex_flags().iter().all(|&b| b));
        assert_eq!(m.h(), 2f64.sqrt());
    }

    #[test]
    fn clockwise_cell_rejected() {
        let err = PolygonalMesh::new(MeshFamily::Quad, unit_square(), vec![vec![0, 3, 2, 1]]).unwrap_err();
        assert!(err.to_string().contains("cell 0"), "{err}");
    }

    #[test]
    fn kernel_of_nonconvex_star() {
        // L-shaped hexagon is star-shaped w.r.t. the corner square
        let l = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(0.5, 0.5),
            Point2::new(0.5, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!((polygon_kernel_area(&l) - 0.25).abs() < 1e-14);
    }
}

use super::{clip_polygon, voronoi, MeshFamily, Point2, PolygonalMesh};
use crate::error::{Error, Result};
use std::collections::HashMap;

/// Generates a mesh of the unit square. `seed` and `lloyd_iters` only matter for CVT.
pub fn generate_mesh(family: MeshFamily, n: usize, seed: u64, lloyd_iters: usize) -> Result<PolygonalMesh> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    match family {
        MeshFamily::Quad => quad_mesh(n),
        MeshFamily::Tri => tri_mesh(n),
        MeshFamily::Hexa => hexa_mesh(n),
        MeshFamily::Cvt => voronoi::cvt_mesh(n, seed, lloyd_iters),
    }
}

fn grid_vertices(n: usize) -> Vec<Point2> {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push(Point2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    v
}

fn quad_mesh(n: usize) -> Result<PolygonalMesh> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::new(MeshFamily::Quad, grid_vertices(n), cells)
}

fn tri_mesh(n: usize) -> Result<PolygonalMesh> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolygonalMesh::new(MeshFamily::Tri, grid_vertices(n), cells)
}

/// Pointy-top hexagons with column spacing 1/n and row spacing 1/n, clipped to
/// the square. Work happens on the integer lattice (x·2n, y·3n) so clipping and
/// vertex merging are exact.
fn hexa_mesh(n: usize) -> Result<PolygonalMesh> {
    let (xmax, ymax) = (2 * n as i64, 3 * n as i64);
    let mut key_to_vertex: HashMap<(i64, i64), usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for j in 0..=n as i64 {
        let cy = 3 * j;
        let centers: Vec<i64> = if j % 2 == 0 {
            (0..=n as i64).map(|i| 2 * i).collect()
        } else {
            (0..n as i64).map(|i| 2 * i + 1).collect()
        };
        for cx in centers {
            let hex = [(0, -2), (1, -1), (1, 1), (0, 2), (-1, 1), (-1, -1)];
            let mut poly: Vec<(Point2, ())> = hex
                .iter()
                .map(|&(dx, dy)| (Point2::new((cx + dx) as f64, (cy + dy) as f64), ()))
                .collect();
            poly = clip_polygon(&poly, |p| -p.x, (), 0.0);
            poly = clip_polygon(&poly, |p| p.x - xmax as f64, (), 0.0);
            poly = clip_polygon(&poly, |p| -p.y, (), 0.0);
            poly = clip_polygon(&poly, |p| p.y - ymax as f64, (), 0.0);
            let mut cell: Vec<usize> = Vec::with_capacity(poly.len());
            for (p, _) in poly {
                let key = (p.x as i64, p.y as i64);
                let v = *key_to_vertex.entry(key).or_insert_with(|| {
                    vertices.push(Point2::new(
                        key.0 as f64 / xmax as f64,
                        key.1 as f64 / ymax as f64,
                    ));
                    vertices.len() - 1
                });
                if cell.last() != Some(&v) && cell.first() != Some(&v) {
                    cell.push(v);
                }
            }
            if cell.len() >= 3 {
                cells.push(cell);
            }
        }
    }
    PolygonalMesh::new(MeshFamily::Hexa, vertices, cells)
}

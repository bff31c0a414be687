//! Clipped Voronoi diagrams and Lloyd relaxation for the CVT family.

use super::{clip_polygon, polygon_area, polygon_centroid, MeshFamily, Point2, PolygonalMesh};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Which generator or square side an edge of a clipped cell comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Label {
    Side(u8),
    Site(u32),
}

type LabeledPolygon = Vec<(Point2, Label)>;

const RETRY_BUDGET: usize = 5;

fn unit_square_cell() -> LabeledPolygon {
    vec![
        (Point2::new(0.0, 0.0), Label::Side(0)),
        (Point2::new(1.0, 0.0), Label::Side(1)),
        (Point2::new(1.0, 1.0), Label::Side(2)),
        (Point2::new(0.0, 1.0), Label::Side(3)),
    ]
}

/// Uniform bucket grid over the unit square.
struct Buckets {
    g: usize,
    items: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(sites: &[Point2]) -> Self {
        let g = ((sites.len() as f64).sqrt().ceil() as usize).max(1);
        let mut items = vec![Vec::new(); g * g];
        for (i, s) in sites.iter().enumerate() {
            let (bx, by) = Self::coord(g, *s);
            items[by * g + bx].push(i as u32);
        }
        Buckets { g, items }
    }

    fn coord(g: usize, p: Point2) -> (usize, usize) {
        let f = |t: f64| ((t * g as f64) as usize).min(g - 1);
        (f(p.x.clamp(0.0, 1.0)), f(p.y.clamp(0.0, 1.0)))
    }
}

fn clip_by_site(poly: &LabeledPolygon, s: Point2, t: Point2, j: usize) -> LabeledPolygon {
    let d = Point2::new(t.x - s.x, t.y - s.y);
    let m = s.midpoint(t);
    clip_polygon(poly, |p| (p.x - m.x) * d.x + (p.y - m.y) * d.y, Label::Site(j as u32), 0.0)
}

fn voronoi_cell(sites: &[Point2], buckets: &Buckets, i: usize) -> LabeledPolygon {
    let s = sites[i];
    let g = buckets.g as i64;
    let width = 1.0 / buckets.g as f64;
    let (bx, by) = Buckets::coord(buckets.g, s);
    let (bx, by) = (bx as i64, by as i64);
    let mut poly = unit_square_cell();
    let mut ring = 0i64;
    loop {
        for y in (by - ring)..=(by + ring) {
            for x in (bx - ring)..=(bx + ring) {
                let on_ring = (y - by).abs() == ring || (x - bx).abs() == ring;
                if !on_ring || x < 0 || y < 0 || x >= g || y >= g {
                    continue;
                }
                for &j in &buckets.items[(y * g + x) as usize] {
                    let j = j as usize;
                    if j != i {
                        poly = clip_by_site(&poly, s, sites[j], j);
                    }
                }
            }
        }
        // unvisited sites are at least ring*width away; they can only cut the
        // cell if closer than twice its radius
        let radius = poly.iter().map(|(p, _)| p.dist(s)).fold(0.0, f64::max);
        if ring as f64 * width >= 2.0 * radius || ring > g {
            return poly;
        }
        ring += 1;
    }
}

fn voronoi_cells(sites: &[Point2]) -> Vec<LabeledPolygon> {
    let buckets = Buckets::new(sites);
    (0..sites.len()).map(|i| voronoi_cell(sites, &buckets, i)).collect()
}

/// `n²` uniformly random sites in the open unit square.
pub fn random_sites(n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * n).map(|_| Point2::new(rng.random::<f64>(), rng.random::<f64>())).collect()
}

/// Lloyd iterations: every site moves to the centroid of its clipped cell.
pub fn lloyd_relaxed_sites(mut sites: Vec<Point2>, iters: usize) -> Vec<Point2> {
    for _ in 0..iters {
        let cells = voronoi_cells(&sites);
        for (s, cell) in sites.iter_mut().zip(&cells) {
            let pts: Vec<Point2> = cell.iter().map(|(p, _)| *p).collect();
            if pts.len() >= 3 && polygon_area(&pts) > 0.0 {
                *s = polygon_centroid(&pts);
            }
        }
    }
    sites
}

/// Merges vertices by their combinatorial signature: the sorted set of
/// generators/sides meeting there. Cell `i` of the mesh belongs to site `i`.
fn mesh_from_cells(cells: &[LabeledPolygon]) -> Result<PolygonalMesh> {
    let mut key_to_vertex: HashMap<[Label; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut out = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let k = cell.len();
        if k < 3 {
            return Err(Error::Validation(format!("Voronoi cell {i} is empty")));
        }
        let mut idx = Vec::with_capacity(k);
        for l in 0..k {
            let prev = cell[(l + k - 1) % k].1;
            let (p, next) = cell[l];
            let mut key = [Label::Site(i as u32), prev, next];
            key.sort();
            if key[0] == key[1] || key[1] == key[2] {
                return Err(Error::Validation(format!("Voronoi cell {i} has a degenerate vertex")));
            }
            let v = *key_to_vertex.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            });
            idx.push(v);
        }
        out.push(idx);
    }
    PolygonalMesh::new(MeshFamily::Cvt, vertices, out)
}

/// Builds the clipped Voronoi mesh of `sites` after `lloyd_iters` relaxation
/// steps. Degenerate configurations (coincident or cocircular sites) are
/// perturbed and retried a fixed number of times.
pub fn cvt_from_sites(sites: Vec<Point2>, lloyd_iters: usize, seed: u64) -> Result<PolygonalMesh> {
    if sites.len() < 2 {
        return Err(Error::InvalidArgument("need at least two sites".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let scale = 1e-6 / (sites.len() as f64).sqrt();
    let mut sites = sites;
    let mut last_err = None;
    for attempt in 0..=RETRY_BUDGET {
        if attempt > 0 {
            for s in sites.iter_mut() {
                s.x = (s.x + scale * (rng.random::<f64>() - 0.5)).clamp(1e-9, 1.0 - 1e-9);
                s.y = (s.y + scale * (rng.random::<f64>() - 0.5)).clamp(1e-9, 1.0 - 1e-9);
            }
        }
        let relaxed = lloyd_relaxed_sites(sites.clone(), lloyd_iters);
        match mesh_from_cells(&voronoi_cells(&relaxed)) {
            Ok(m) => return Ok(m),
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Validation(format!(
        "CVT generation failed after {} attempts: {}",
        RETRY_BUDGET + 1,
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

pub(super) fn cvt_mesh(n: usize, seed: u64, lloyd_iters: usize) -> Result<PolygonalMesh> {
    cvt_from_sites(random_sites(n, seed), lloyd_iters, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_symmetric_sites_need_perturbation() {
        // the centre is equidistant from all four sites, so the unperturbed
        // diagram has a degree-4 vertex
        let sites = vec![
            Point2::new(0.25, 0.25),
            Point2::new(0.75, 0.25),
            Point2::new(0.75, 0.75),
            Point2::new(0.25, 0.75),
        ];
        let m = cvt_from_sites(sites, 0, 3).unwrap();
        assert_eq!(m.num_cells(), 4);
    }

    #[test]
    fn duplicate_sites_are_perturbed() {
        let mut sites = random_sites(4, 11);
        sites[5] = sites[3];
        let m = cvt_from_sites(sites, 5, 11).unwrap();
        assert_eq!(m.num_cells(), 16);
    }
}

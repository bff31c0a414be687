use crate::error::{Error, Result};
use crate::mesh::{polygon_centroid, Point2};

/// Gauss-Lobatto rule on [-1, 1]. Only the 3-point rule (order 3, used by the
/// k = 2 edge dofs) is provided.
pub fn gauss_lobatto_edge_rule(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match order {
        3 => Ok((vec![-1.0, 0.0, 1.0], vec![1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0])),
        _ => Err(Error::InvalidArgument(format!(
            "Gauss-Lobatto rule of order {order} is not supported (only 3)"
        ))),
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Legendre on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

/// Collapsed (Duffy) tensor rule on the triangle (0,0),(1,0),(0,1):
/// `(s, t, weight)`, exact for total degree 2n - 2.
pub fn triangle_rule(n: usize) -> Vec<(f64, f64, f64)> {
    let g = gauss_legendre_unit(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            out.push((u, v * (1.0 - u), wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Integrates over a counterclockwise polygon split into triangles from its centroid.
pub fn integrate_polygon(pts: &[Point2], n: usize, mut f: impl FnMut(Point2) -> f64) -> f64 {
    let c = polygon_centroid(pts);
    let rule = triangle_rule(n);
    let k = pts.len();
    let mut total = 0.0;
    for l in 0..k {
        let (p, q) = (pts[l], pts[(l + 1) % k]);
        let (ax, ay, bx, by) = (p.x - c.x, p.y - c.y, q.x - c.x, q.y - c.y);
        let jac = ax * by - ay * bx;
        for &(s, t, w) in &rule {
            total += w * jac * f(Point2::new(c.x + s * ax + t * bx, c.y + s * ay + t * by));
        }
    }
    total
}

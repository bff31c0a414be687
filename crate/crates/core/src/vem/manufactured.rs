//! Manufactured Stokes solution on the unit square and discrete error norms.
//!
//! u = (-sin²(πx) sin(2πy), sin²(πy) sin(2πx)),  p = sin(πx) - sin(πy),
//! with load f = -νΔu - ∇p so that a(u, v) + b(v, p) = (f, v).

use super::assemble::GlobalSystem;
use super::quadrature::integrate_polygon;
use crate::mesh::{Point2, PolygonalMesh};
use std::f64::consts::PI;

pub fn exact_velocity(p: Point2) -> [f64; 2] {
    let (sx, sy) = ((PI * p.x).sin(), (PI * p.y).sin());
    [-sx * sx * (2.0 * PI * p.y).sin(), sy * sy * (2.0 * PI * p.x).sin()]
}

/// Row `c` is ∇u_c.
pub fn exact_velocity_gradient(p: Point2) -> [[f64; 2]; 2] {
    let (s2x, s2y) = ((2.0 * PI * p.x).sin(), (2.0 * PI * p.y).sin());
    let (c2x, c2y) = ((2.0 * PI * p.x).cos(), (2.0 * PI * p.y).cos());
    let (sx, sy) = ((PI * p.x).sin(), (PI * p.y).sin());
    [
        [-PI * s2x * s2y, -2.0 * PI * sx * sx * c2y],
        [2.0 * PI * sy * sy * c2x, PI * s2x * s2y],
    ]
}

pub fn exact_pressure(p: Point2) -> f64 {
    (PI * p.x).sin() - (PI * p.y).sin()
}

pub fn load(p: Point2, nu: f64) -> [f64; 2] {
    let (s2x, s2y) = ((2.0 * PI * p.x).sin(), (2.0 * PI * p.y).sin());
    let (c2x, c2y) = ((2.0 * PI * p.x).cos(), (2.0 * PI * p.y).cos());
    let pi2 = PI * PI;
    let lap = [
        s2y * (2.0 * pi2 - 4.0 * pi2 * c2x),
        s2x * (-2.0 * pi2 + 4.0 * pi2 * c2y),
    ];
    let grad_p = [PI * (PI * p.x).cos(), -PI * (PI * p.y).cos()];
    [-nu * lap[0] - grad_p[0], -nu * lap[1] - grad_p[1]]
}

/// (Σ_K |u - Π_K u_h|²_{1,K})^½ for a free-dof velocity vector.
pub fn velocity_h1_error(
    mesh: &PolygonalMesh,
    sys: &GlobalSystem,
    u_free: &[f64],
    exact_grad: &dyn Fn(Point2) -> [[f64; 2]; 2],
) -> f64 {
    let u = sys.dofmap.expand(u_free);
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let el = &sys.elements[c];
        let local: Vec<f64> = sys.cell_dofs[c].iter().map(|&d| u[d]).collect();
        let coef = el.project(&local);
        total += integrate_polygon(&mesh.cell_points(c), 4, |x| {
            let gh = el.basis.eval_grad(&coef, x);
            let ge = exact_grad(x);
            (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| (ge[i][j] - gh[i][j]).powi(2))
                .sum()
        });
    }
    total.sqrt()
}

/// ‖p - p_h‖_{L²} for a piecewise-constant pressure.
pub fn pressure_l2_error(mesh: &PolygonalMesh, p_h: &[f64], exact: &dyn Fn(Point2) -> f64) -> f64 {
    (0..mesh.num_cells())
        .map(|c| integrate_polygon(&mesh.cell_points(c), 4, |x| (exact(x) - p_h[c]).powi(2)))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_matches_finite_differences() {
        let nu = 1.7;
        let h = 1e-3;
        for &(x, y) in &[(0.3, 0.7), (0.11, 0.52), (0.9, 0.25)] {
            let p = Point2::new(x, y);
            let u = |dx: f64, dy: f64| exact_velocity(Point2::new(x + dx, y + dy));
            let f = load(p, nu);
            for c in 0..2 {
                let lap = (u(h, 0.0)[c] + u(-h, 0.0)[c] + u(0.0, h)[c] + u(0.0, -h)[c] - 4.0 * u(0.0, 0.0)[c]) / (h * h);
                let e = |dx: f64, dy: f64| exact_pressure(Point2::new(x + dx, y + dy));
                let gp = if c == 0 { (e(h, 0.0) - e(-h, 0.0)) / (2.0 * h) } else { (e(0.0, h) - e(0.0, -h)) / (2.0 * h) };
                assert!((f[c] - (-nu * lap - gp)).abs() < 1e-3, "comp {c}: {} vs {}", f[c], -nu * lap - gp);
            }
            let g = exact_velocity_gradient(p);
            for c in 0..2 {
                let gx = (u(h, 0.0)[c] - u(-h, 0.0)[c]) / (2.0 * h);
                let gy = (u(0.0, h)[c] - u(0.0, -h)[c]) / (2.0 * h);
                assert!((g[c][0] - gx).abs() < 1e-4 && (g[c][1] - gy).abs() < 1e-4);
            }
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
    }
}

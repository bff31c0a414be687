//! Preconditioned CG with Lanczos eigenvalue estimates, and full GMRES.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, symmetric_eigenvalues};
use crate::schur::SolveCounters;
use faer::Mat;
use std::path::Path;

/// Matrix-free square operator.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// y = A x (y is overwritten)
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl LinearOperator for Mat<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = (0..x.len()).map(|j| self[(i, j)] * x[j]).sum();
        }
    }
}

impl LinearOperator for crate::linalg::CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.mul_vec_add(1.0, x, y);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// relative residual tolerance
    pub tol: f64,
    pub max_iter: usize,
    /// GMRES restart length; `None` keeps the full Krylov basis
    pub restart: Option<usize>,
    /// PCG only: keep iterating through non-positive pᵀAp or rᵀz instead of
    /// failing; such steps are counted in the report
    pub allow_indefinite: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-6,
            max_iter: 5000,
            restart: None,
            allow_indefinite: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if self.restart == Some(0) {
            return Err(Error::InvalidArgument("restart length must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Stopping measure per iteration (index 0 = initial): sqrt(rᵀz / r₀ᵀz₀)
    /// for PCG, ‖r‖/‖r₀‖ for GMRES.
    pub residual_history: Vec<f64>,
    /// ‖r‖/‖r₀‖ in the Euclidean norm (PCG only; equals the history for GMRES).
    pub true_residual_history: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// PCG steps with pᵀAp ≤ 0 or rᵀz < 0 (only nonzero with `allow_indefinite`)
    pub indefinite_steps: usize,
    pub condition: Option<ConditionEstimate>,
    pub counters: SolveCounters,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// `iteration,residual` CSV.
    pub fn write_residual_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_err(path.as_ref(), e))?;
        w.write_record(["iteration", "residual"]).map_err(|e| csv_err(path.as_ref(), e))?;
        for (k, r) in self.residual_history.iter().enumerate() {
            w.write_record([k.to_string(), format!("{r:.17e}")])
                .map_err(|e| csv_err(path.as_ref(), e))?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

#[derive(Debug, thiserror::Error)]
pub enum KrylovError {
    #[error("{0}")]
    Config(#[from] Error),
    #[error("breakdown at iteration {}: {reason}", report.iterations)]
    Breakdown {
        reason: String,
        iterate: Vec<f64>,
        report: SolveReport,
    },
}

impl From<KrylovError> for Error {
    fn from(e: KrylovError) -> Self {
        match e {
            KrylovError::Config(e) => e,
            KrylovError::Breakdown { reason, report, .. } => Error::Breakdown {
                iterations: report.iterations,
                msg: reason,
            },
        }
    }
}

fn check_dims(a: &dyn LinearOperator, b: &[f64]) -> std::result::Result<(), KrylovError> {
    if a.dim() != b.len() {
        return Err(Error::Dimension(format!("operator of size {} with rhs of length {}", a.dim(), b.len())).into());
    }
    Ok(())
}

/// Preconditioned conjugate gradients from x₀ = 0, stopping when
/// sqrt(rᵀz / r₀ᵀz₀) ≤ tol. Non-positive curvature or rᵀz < 0 is a breakdown.
pub fn pcg(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    cfg: &SolverConfig,
) -> std::result::Result<(Vec<f64>, SolveReport), KrylovError> {
    cfg.validate()?;
    check_dims(a, b)?;
    check_dims(m, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        report.converged = true;
        report.residual_history.push(0.0);
        report.true_residual_history.push(0.0);
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = m.apply_vec(&r);
    let mut rz = dot(&r, &z);
    if rz < 0.0 && cfg.allow_indefinite {
        report.indefinite_steps += 1;
    } else if !(rz > 0.0) {
        return Err(KrylovError::Breakdown {
            reason: format!("preconditioned initial residual has rᵀz = {rz:e}"),
            iterate: x,
            report,
        });
    }
    let rz0 = rz.abs();
    report.residual_history.push(1.0);
    report.true_residual_history.push(1.0);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    while report.iterations < cfg.max_iter {
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq < 0.0 && cfg.allow_indefinite {
            report.indefinite_steps += 1;
        } else if !(pq > 0.0) {
            return Err(KrylovError::Breakdown {
                reason: format!("non-positive curvature pᵀAp = {pq:e}"),
                iterate: x,
                report,
            });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        report.iterations += 1;
        report.alphas.push(alpha);
        if rz_new < 0.0 && cfg.allow_indefinite {
            report.indefinite_steps += 1;
        } else if !(rz_new >= 0.0) {
            return Err(KrylovError::Breakdown {
                reason: format!("indefinite preconditioner direction, rᵀz = {rz_new:e}"),
                iterate: x,
                report,
            });
        }
        let rel = (rz_new.abs() / rz0).sqrt();
        report.residual_history.push(rel);
        report.true_residual_history.push(norm(&r) / b_norm);
        if rel <= cfg.tol {
            report.converged = true;
            break;
        }
        let beta = rz_new / rz;
        report.betas.push(beta);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_new;
    }
    if report.indefinite_steps == 0 {
        report.condition = lanczos_condition_estimate(&report.alphas, &report.betas);
    }
    Ok((x, report))
}

/// Extreme eigenvalues of the Lanczos tridiagonal built from PCG coefficients.
/// Needs at least one α; `betas` may be one shorter than `alphas`.
pub fn lanczos_condition_estimate(alphas: &[f64], betas: &[f64]) -> Option<ConditionEstimate> {
    let k = alphas.len();
    if k == 0 || betas.len() + 1 < k {
        return None;
    }
    let mut t = Mat::<f64>::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let ev = symmetric_eigenvalues(&t).ok()?;
    let (lambda_min, lambda_max) = (ev[0], ev[k - 1]);
    Some(ConditionEstimate {
        lambda_min,
        lambda_max,
        kappa: lambda_max / lambda_min,
    })
}

/// Unpreconditioned GMRES from x₀ = 0 with modified Gram-Schmidt Arnoldi.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    cfg: &SolverConfig,
) -> std::result::Result<(Vec<f64>, SolveReport), KrylovError> {
    cfg.validate()?;
    check_dims(a, b)?;
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut report = SolveReport::default();
    let b_norm = norm(b);
    report.residual_history.push(if b_norm == 0.0 { 0.0 } else { 1.0 });
    if b_norm == 0.0 {
        report.converged = true;
        report.true_residual_history = report.residual_history.clone();
        return Ok((x, report));
    }
    let m_max = cfg.restart.unwrap_or(cfg.max_iter).min(cfg.max_iter);
    let mut r = b.to_vec();
    'outer: loop {
        let beta = norm(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        let mut w = vec![0.0; n];
        let mut done = false;
        for j in 0..m_max {
            a.apply(&basis[j], &mut w);
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                col[i] = dot(&w, v);
                axpy(-col[i], v, &mut w);
            }
            let wn = norm(&w);
            col[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[j] / d, col[j + 1] / d) };
            col[j] = d;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            report.iterations += 1;
            let rel = g[j + 1].abs() / b_norm;
            report.residual_history.push(rel);
            let happy = wn <= 1e-14 * beta;
            if rel <= cfg.tol || happy {
                done = true;
                report.converged = true;
            }
            if done || report.iterations >= cfg.max_iter || j + 1 == m_max {
                // back substitution for the least-squares coefficients
                let k = j + 1;
                let mut y = vec![0.0; k];
                for i in (0..k).rev() {
                    let s: f64 = (i + 1..k).map(|l| h[l][i] * y[l]).sum();
                    y[i] = (g[i] - s) / h[i][i];
                }
                for (i, yi) in y.iter().enumerate() {
                    axpy(*yi, &basis[i], &mut x);
                }
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        if done || report.iterations >= cfg.max_iter {
            break 'outer;
        }
        r = b.to_vec();
        axpy(-1.0, &a.apply_vec(&x), &mut r);
    }
    report.true_residual_history = report.residual_history.clone();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> Mat<f64> {
        Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    #[test]
    fn identity_converges_in_one_step() {
        let b = vec![0.3, -1.0, 2.0, 0.5, 0.1];
        let (x, rep) = pcg(&Identity(5), &Identity(5), &b, &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-15));
        let c = rep.condition.unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-14 && (c.lambda_min - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_ten_condition() {
        let a = diag(&(1..=10).map(f64::from).collect::<Vec<_>>());
        let b = vec![1.0; 10];
        let cfg = SolverConfig { tol: 1e-14, ..Default::default() };
        let (_, rep) = pcg(&a, &Identity(10), &b, &cfg).unwrap();
        let c = rep.condition.unwrap();
        assert!((c.kappa - 10.0).abs() / 10.0 < 0.05, "{c:?}");
    }

    #[test]
    fn two_by_two_lanczos_is_exact() {
        let a = diag(&[1.0, 4.0]);
        let cfg = SolverConfig { tol: 1e-15, ..Default::default() };
        let (_, rep) = pcg(&a, &Identity(2), &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(rep.iterations, 2);
        assert!((rep.condition.unwrap().kappa - 4.0).abs() < 1e-10);
    }

    #[test]
    fn gmres_trivial_cases() {
        let (x, rep) = gmres(&Identity(3), &[0.0; 3], &SolverConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0; 3]);
        let rot = Mat::from_fn(2, 2, |i, j| [[0.0, -1.0], [1.0, 0.0]][i][j]);
        let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
        let (x, rep) = gmres(&rot, &[1.0, 2.0], &cfg).unwrap();
        assert!(rep.iterations <= 2 && rep.converged);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_curvature_is_reported() {
        let a = diag(&[1.0, -1.0]);
        match pcg(&a, &Identity(2), &[0.0, 1.0], &SolverConfig::default()) {
            Err(KrylovError::Breakdown { .. }) => {}
            other => panic!("expected breakdown, got {other:?}"),
        }
    }

    #[test]
    fn restarted_gmres_converges() {
        let n = 30;
        let a = Mat::from_fn(n, n, |i, j| {
            if i == j {
                4.0
            } else if j == i + 1 {
                -1.0
            } else if i == j + 1 {
                -2.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let cfg = SolverConfig { tol: 1e-10, max_iter: 500, restart: Some(5), ..Default::default() };
        let (x, rep) = gmres(&a, &b, &cfg).unwrap();
        assert!(rep.converged);
        let r: Vec<f64> = a.apply_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm(&r) / norm(&b) < 1e-9);
    }
}

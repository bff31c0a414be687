//! Small sparse/dense linear algebra layer on top of faer.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat};
use std::sync::Once;

static SEQUENTIAL: Once = Once::new();

/// faer's own threading would make reductions order-dependent; all parallelism
/// in this crate is per subdomain instead.
pub(crate) fn ensure_sequential_faer() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds the matrix summing duplicates in insertion order, so two entries
    /// fed the same contributions in the same order come out bit-identical.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = triplets[k];
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            out.extend(self.row(r).map(|(c, v)| (r, c, v)));
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_add(1.0, x, &mut y);
        y
    }

    /// y += s A x
    pub fn mul_vec_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, yr) in y.iter_mut().enumerate() {
            let acc: f64 = self.row(r).map(|(c, v)| v * x[c]).sum();
            *yr += s * acc;
        }
    }

    /// y += s Aᵀ x
    pub fn tr_mul_vec_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                y[c] += s * v * xr;
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.ncols, other.nrows);
        let mut t = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        for r in 0..self.nrows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            t.extend(touched.iter().map(|&c| (r, c, acc[c])));
        }
        CsrMatrix::from_triplets(self.nrows, other.ncols, &t)
    }

    /// Extracts rows/cols given by index maps (`None` drops the row/col).
    pub fn select(&self, row_map: &[Option<usize>], nrows: usize, col_map: &[Option<usize>], ncols: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let Some(rr) = row_map[r] else { continue };
            for (c, v) in self.row(r) {
                if let Some(cc) = col_map[c] {
                    t.push((rr, cc, v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &t)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// max |A - Aᵀ| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Writes `i j value` lines, 0-based.
    pub fn write_triplets(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }
}

/// Sparse LU with partial pivoting; used for every indefinite saddle block.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    dim: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("dim", &self.dim).finish()
    }
}

impl SparseLu {
    /// Factorizes a square matrix given as triplets (duplicates are summed).
    /// A probe solve guards against numerically singular input.
    pub fn new(dim: usize, triplets: &[(usize, usize, f64)], what: &str) -> Result<Self> {
        ensure_sequential_faer();
        let singular = |msg: String| Error::Singular {
            what: what.to_string(),
            msg,
        };
        if dim == 0 {
            return Err(singular("empty system".into()));
        }
        let t: Vec<_> = triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &t)
            .map_err(|e| singular(format!("bad structure: {e:?}")))?;
        let lu = a.sp_lu().map_err(|e| singular(format!("{e:?}")))?;
        let this = SparseLu { lu, dim };
        let probe: Vec<f64> = (0..dim).map(|i| 1.0 + ((i * 7919) % 17) as f64 / 17.0).collect();
        let x = this.solve(&probe);
        let csr = CsrMatrix::from_triplets(dim, dim, triplets);
        let mut r = csr.mul_vec(&x);
        for (ri, bi) in r.iter_mut().zip(&probe) {
            *ri -= bi;
        }
        let rel = norm(&r) / norm(&probe);
        if !rel.is_finite() || rel > 1e-6 {
            return Err(singular(format!("probe residual {rel:.3e}")));
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let mut x = Col::<f64>::from_fn(self.dim, |i| b[i]);
        self.lu.solve_in_place(x.as_mat_mut());
        x.iter().copied().collect()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// y += s x
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// Dense solve with partial pivoting; `None` when the result is not finite or
/// the residual shows the matrix is numerically singular.
pub fn dense_solve(a: &Mat<f64>, b: &Mat<f64>) -> Option<Mat<f64>> {
    ensure_sequential_faer();
    let x = a.partial_piv_lu().solve(b);
    if x.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) {
        return None;
    }
    let r = a * &x - b;
    let scale = b.norm_max().max(f64::MIN_POSITIVE) + a.norm_max() * x.norm_max();
    (r.norm_max() <= 1e-9 * scale).then_some(x)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    ensure_sequential_faer();
    let mut ev = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Singular {
            what: "eigenvalue problem".into(),
            msg: format!("{e:?}"),
        })?;
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Dense LU with partial pivoting, checked for numerical singularity once.
pub struct DenseLu {
    lu: faer::linalg::solvers::PartialPivLu<f64>,
    dim: usize,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("dim", &self.dim).finish()
    }
}

impl DenseLu {
    pub fn new(a: &Mat<f64>, what: &str) -> Result<Self> {
        ensure_sequential_faer();
        let dim = a.nrows();
        let singular = |msg: String| Error::Singular {
            what: what.to_string(),
            msg,
        };
        if dim == 0 || a.ncols() != dim {
            return Err(singular(format!("not a nonempty square matrix ({}x{})", dim, a.ncols())));
        }
        let this = DenseLu {
            lu: a.partial_piv_lu(),
            dim,
        };
        let probe = Mat::from_fn(dim, 1, |i, _| 1.0 + ((i * 7919) % 17) as f64 / 17.0);
        let x = this.lu.solve(&probe);
        let r = a * &x - &probe;
        let scale = probe.norm_max() + a.norm_max() * x.norm_max();
        if !x.norm_max().is_finite() || r.norm_max() > 1e-9 * scale {
            return Err(singular(format!("probe residual {:.3e}", r.norm_max() / scale)));
        }
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let mut x = Col::<f64>::from_fn(self.dim, |i| b[i]);
        self.lu.solve_in_place(x.as_mat_mut());
        x.iter().copied().collect()
    }
}

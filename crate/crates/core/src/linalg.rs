//! Dense helpers shared by the oracle and the recursions.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU, SVD};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative singular-value threshold below which a column is considered dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Default condition-number guard for oracle solves.
pub const DEFAULT_KAPPA_MAX: f64 = 1e8;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// `‖a − b‖_F / max(‖a‖_F, ‖b‖_F)`, zero when both are zero.
pub fn relative_difference(a: &Mat, b: &Mat) -> f64 {
    let scale = a.norm().max(b.norm());
    let diff = (a - b).norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn is_symmetric(m: &Mat, rel_tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= rel_tol * m.norm().max(f64::MIN_POSITIVE)
}

/// Scale-aware PSD floor: `1e-10 · trace/n`, never below a few ulps of the largest entry.
pub fn psd_floor(m: &Mat) -> f64 {
    let n = m.nrows().max(1) as f64;
    let max_abs = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    (1e-10 * (m.trace() / n)).max(64.0 * f64::EPSILON * max_abs)
}

/// Eigenvalues of the symmetric part, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    symmetric_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Symmetric square root `S` with `S S = m`, clamping eigenvalues in `[-floor, 0)` to zero.
pub fn psd_sqrt(m: &Mat, what: &str) -> Result<Mat> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    if !m.is_square() || !all_finite(m) {
        return Err(Error::Statistics(format!("{what} is not a finite square matrix")));
    }
    let floor = psd_floor(m);
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut roots = Vector::zeros(n);
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -floor {
            return Err(Error::Statistics(format!(
                "{what} is not positive semidefinite (eigenvalue {lambda:.3e})"
            )));
        }
        roots[i] = lambda.max(0.0).sqrt();
    }
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * Mat::from_diagonal(&roots) * v.transpose())))
}

/// Cholesky factorization of a symmetric positive definite matrix behind a condition guard.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    chol: Cholesky<f64, nalgebra::Dyn>,
    condition: f64,
}

impl SpdSolver {
    pub fn new(m: &Mat, kappa_max: f64, what: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::model(format!("{what} is not square")));
        }
        let sym = symmetrize(m);
        let eig = symmetric_eigenvalues(&sym);
        let (lo, hi) = match (eig.first(), eig.last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (1.0, 1.0),
        };
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let guard = |condition| Error::Conditioning {
            what: what.to_string(),
            condition,
            limit: kappa_max,
        };
        if condition.is_nan() || condition > kappa_max {
            return Err(guard(condition));
        }
        let chol = Cholesky::new(sym).ok_or_else(|| guard(f64::INFINITY))?;
        Ok(Self { chol, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, b: &Mat) -> Mat {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub full_column_rank: bool,
}

pub fn column_rank(m: &Mat) -> RankInfo {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return RankInfo { rank: 0, sigma_min: 0.0, sigma_max: 0.0, full_column_rank: true };
    }
    if rows == 0 {
        return RankInfo { rank: 0, sigma_min: 0.0, sigma_max: 0.0, full_column_rank: false };
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let sigma_max = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let sigma_min = sv.iter().fold(f64::INFINITY, |a, &s| a.min(s));
    let rank = sv.iter().filter(|&&s| sigma_max > 0.0 && s > RANK_TOL * sigma_max).count();
    RankInfo {
        rank,
        sigma_min,
        sigma_max,
        full_column_rank: cols <= rows && rank == cols,
    }
}

/// Solves a general square system by LU; fails if the matrix is singular.
pub fn lu_solve(a: &Mat, b: &Mat, what: &str) -> Result<Mat> {
    LU::new(a.clone())
        .solve(b)
        .ok_or_else(|| Error::Conditioning { what: what.to_string(), condition: f64::INFINITY, limit: f64::INFINITY })
}

pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn stack_vectors(parts: &[Vector]) -> Vector {
    let n = parts.iter().map(|p| p.len()).sum();
    let mut out = Vector::zeros(n);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(p);
        r += p.len();
    }
    out
}

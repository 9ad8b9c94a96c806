//! Restarted GMRES with right ILU(0) preconditioning, and a sparse direct
//! LU for systems the iteration cannot handle. Both are serial and
//! therefore deterministic.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::femcore::CsrMatrix;

const RESTART: usize = 60;

/// Incomplete LU factorization on the pattern of `A`; unit lower factor.
pub struct Ilu0 {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let (row_ptr, col_idx, values) = a.parts();
        let (row_ptr, col_idx, mut values) = (row_ptr.to_vec(), col_idx.to_vec(), values.to_vec());
        let n = a.n();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            if let Some(k) = (row_ptr[i]..row_ptr[i + 1]).find(|&k| col_idx[k] == i) {
                diag[i] = k;
            }
            if diag[i] == usize::MAX {
                return Err(Error::Singular(i));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let row = row_ptr[i]..row_ptr[i + 1];
            for k in row.clone() {
                pos[col_idx[k]] = k;
            }
            for kk in row.clone() {
                let k = col_idx[kk];
                if k >= i {
                    break;
                }
                let lik = values[kk] / values[diag[k]];
                values[kk] = lik;
                for kj in diag[k] + 1..row_ptr[k + 1] {
                    let p = pos[col_idx[kj]];
                    if p != usize::MAX {
                        values[p] -= lik * values[kj];
                    }
                }
            }
            for k in row {
                pos[col_idx[k]] = usize::MAX;
            }
            let d = values[diag[i]];
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Singular(i));
            }
        }
        Ok(Ilu0 {
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// `x = (LU)^-1 r`.
    pub fn apply(&self, r: &[f64], x: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = r[i];
            for k in self.row_ptr[i]..self.diag[i] {
                s -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.values[k] * x[self.col_idx[k]];
            }
            x[i] = s / self.values[self.diag[i]];
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect()
}

/// `b - A x` with error-free product and sum transformations, accurate to
/// about one rounding of the result even under heavy cancellation.
fn residual_compensated(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.n())
        .map(|i| {
            let (cols, vals) = a.row(i);
            let (mut s, mut err) = (b[i], 0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                let p = v * x[j];
                let pe = v.mul_add(x[j], -p);
                let t = s - p;
                let z = t - s;
                err += (s - (t - z)) + (-p - z) - pe;
                s = t;
            }
            s + err
        })
        .collect()
}

/// Restart cycles without a twofold residual reduction before giving up.
const STAGNATION_CYCLES: usize = 8;

/// Solve `A x = b` to relative residual `tol`. The starting guess is the
/// preconditioned right-hand side, so systems the preconditioner inverts
/// exactly (diagonal, small dense) finish without iterating. Gives up early
/// when restarts stop making progress.
pub fn linear_solve(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, matrix has {n} rows", b.len())));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let m = Ilu0::new(a)?;
    let mut x = vec![0.0; n];
    m.apply(b, &mut x);

    let target = tol * bnorm;
    let mut iters = 0;
    let mut best = (f64::INFINITY, 0);
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        let r = residual(a, &x, b);
        let beta = norm(&r);
        if !beta.is_finite() {
            return Err(Error::Solver("non-finite residual".into()));
        }
        if beta <= target {
            return Ok(x);
        }
        if beta < 0.5 * best.0 {
            best = (beta, 0);
        } else {
            best.1 += 1;
        }
        if iters >= max_iters || best.1 >= STAGNATION_CYCLES {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: beta / bnorm,
            });
        }
        let restart = RESTART.min(max_iters - iters).min(n);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart {
            m.apply(&v[k], &mut z);
            a.mul_vec_into(&z, &mut w);
            for (j, vj) in v.iter().enumerate() {
                let hj = dot(&w, vj);
                h[j][k] = hj;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hj * vi);
            }
            let hk = norm(&w);
            h[k + 1][k] = hk;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            iters += 1;
            if g[k].abs() <= 0.5 * target || hk == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / hk).collect());
        }
        if k == 0 {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: beta / bnorm,
            });
        }
        // Back substitution for the Krylov coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yj, vj) in y.iter().zip(&v) {
            update.iter_mut().zip(vj).for_each(|(u, vi)| *u += yj * vi);
        }
        m.apply(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}

/// Sparse LU with partial pivoting plus up to five steps of iterative
/// refinement on compensated residuals, returning once the relative
/// residual reaches `tol`.
pub fn direct_solve(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, matrix has {n} rows", b.len())));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for i in 0..n {
        let (cols, vals) = a.row(i);
        triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| Triplet::new(i, j, v)));
    }
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Solver(format!("sparse matrix construction failed: {e:?}")))?;
    let lu = m.sp_lu().map_err(|e| match e {
        faer::sparse::linalg::LuError::SymbolicSingular { index } => Error::Singular(index),
        other => Error::Solver(format!("sparse LU failed: {other:?}")),
    })?;
    let solve = |r: &[f64]| -> Result<Vec<f64>> {
        let mut rhs = faer::Mat::from_fn(n, 1, |i, _| r[i]);
        lu.solve_in_place(&mut rhs);
        let x: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Singular(i)),
            None => Ok(x),
        }
    };
    let mut x = solve(b)?;
    let mut rel = f64::INFINITY;
    for _ in 0..6 {
        let r = residual_compensated(a, &x, b);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(x);
        }
        let dx = solve(&r)?;
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
    Err(Error::NoConvergence {
        iterations: 0,
        residual: rel,
    })
}

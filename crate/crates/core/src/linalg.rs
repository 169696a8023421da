//! Dense linear-algebra primitives shared by the model and the solvers.
//!
//! Everything here works on `nalgebra::DMatrix<f64>`; the problem sizes
//! (n up to ~10) make dense Kronecker solves affordable.

use nalgebra::{Complex, DMatrix};

use crate::error::{LqdgError, Result};

/// Absolute tolerance used for symmetry and semidefiniteness checks.
pub const SYM_TOL: f64 = 1e-10;

/// Relative singular-value threshold for numerical rank.
pub const RANK_TOL: f64 = 1e-8;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITER: usize = 10_000;

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Eigenvalues of a general real square matrix (real Schur form).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if !m.is_square() {
        return Err(LqdgError::Dimension(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if !all_finite(m) {
        return Err(LqdgError::Numerical("non-finite matrix entries".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| LqdgError::Numerical("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest eigenvalue modulus of `m`.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix (the symmetric part is used).
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(m: &DMatrix<f64>, tol: f64) -> bool {
    is_symmetric(m, tol) && min_sym_eigenvalue(m) >= -tol
}

/// Symmetric positive-semidefinite square root, with negative eigenvalues
/// clamped to zero. `C = sqrt(W)` satisfies `CᵀC = W` for PSD `W`.
pub fn psd_sqrt(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetrize(w).symmetric_eigen();
    let d = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&d) * v.transpose()))
}

/// Numerical rank of a complex matrix, judged relative to its largest
/// singular value.
pub fn complex_rank(m: &DMatrix<Complex<f64>>, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Column-major `vec` operator.
fn vec_of(m: &DMatrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Solves `P_k = W_k + Fᵀ P_k F` for several right-hand sides sharing `F`,
/// by vectorizing to `(I − Fᵀ⊗Fᵀ) vec(P) = vec(W)`. The outputs are
/// symmetrized.
pub fn solve_discrete_lyapunov_many(
    f: &DMatrix<f64>,
    ws: &[&DMatrix<f64>],
) -> Result<Vec<DMatrix<f64>>> {
    let n = f.nrows();
    if !f.is_square() {
        return Err(LqdgError::Dimension("Lyapunov F must be square".into()));
    }
    for w in ws {
        if w.nrows() != n || w.ncols() != n {
            return Err(LqdgError::Dimension(format!(
                "Lyapunov W is {}x{}, expected {n}x{n}",
                w.nrows(),
                w.ncols()
            )));
        }
    }
    let rho = spectral_radius(f)?;
    if rho >= 1.0 {
        return Err(LqdgError::Unstable { radius: rho });
    }
    let ft = f.transpose();
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - ft.kronecker(&ft);
    solve_vectorized(&lhs, ws, n)
}

/// Solves the transposed-side equation `S = X + F S Fᵀ`.
pub fn solve_discrete_lyapunov_dual(f: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_discrete_lyapunov_many(&f.transpose(), &[x]).map(|mut v| v.remove(0))
}

fn solve_vectorized(
    lhs: &DMatrix<f64>,
    ws: &[&DMatrix<f64>],
    n: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let lu = lhs.clone().lu();
    let mut rhs = DMatrix::<f64>::zeros(n * n, ws.len());
    for (c, w) in ws.iter().enumerate() {
        rhs.set_column(c, &nalgebra::DVector::from_vec(vec_of(w)));
    }
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| LqdgError::Numerical("singular vectorized Lyapunov system".into()))?;
    // one step of iterative refinement
    let resid = &rhs - lhs * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    let out: Vec<DMatrix<f64>> = (0..ws.len())
        .map(|c| symmetrize(&DMatrix::from_column_slice(n, n, sol.column(c).as_slice())))
        .collect();
    if out.iter().any(|p| !all_finite(p)) {
        return Err(LqdgError::Numerical("non-finite Lyapunov solution".into()));
    }
    Ok(out)
}

/// Dense LU solve `M X = G` reporting a condition-number estimate on failure.
pub fn solve_dense(m: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    match lu.solve(g) {
        Some(x) if all_finite(&x) => Ok(x),
        _ => Err(LqdgError::Numerical(format!(
            "singular linear system (condition estimate {:.3e})",
            condition_estimate(m)
        ))),
    }
}

/// 2-norm condition number from singular values; `inf` when singular.
pub fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Builds a matrix from row-major nested vectors. An empty outer vector
/// yields a 0x0 matrix; ragged rows are rejected.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(LqdgError::Dimension("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_row_iterator(
        nr,
        nc,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

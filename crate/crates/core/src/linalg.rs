//! Dense symmetric eigensolver and related kernels.
//!
//! Everything here is deterministic: the cyclic Jacobi sweep order, the
//! all-ones power-iteration start and the sign convention (largest-magnitude
//! entry positive) are fixed, so repeated runs produce bit-identical output.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

const MAX_JACOBI_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns. Each eigenvector is sign-fixed so its largest-magnitude entry is
/// positive.
pub fn sym_eig(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols(), "sym_eig requires a square matrix");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    if frob == 0.0 {
        return (Array1::zeros(n), v);
    }

    for _ in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += m[[p, q]] * m[[p, q]];
                }
            }
            (2.0 * s).sqrt()
        };
        if off <= 1e-14 * frob {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let app = m[[p, p]];
                let aqq = m[[q, q]];
                m[[p, p]] = c * c * app - 2.0 * s * c * apq + s * s * aqq;
                m[[q, q]] = s * s * app + 2.0 * s * c * apq + c * c * aqq;
                m[[p, q]] = 0.0;
                m[[q, p]] = 0.0;
                for i in 0..n {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = m[[i, p]];
                    let aiq = m[[i, q]];
                    m[[i, p]] = c * aip - s * aiq;
                    m[[p, i]] = m[[i, p]];
                    m[[i, q]] = s * aip + c * aiq;
                    m[[q, i]] = m[[i, q]];
                }
                for i in 0..n {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }

    // Sort descending by eigenvalue; stable so ties keep sweep order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());

    let mut evals = Array1::<f64>::zeros(n);
    let mut evecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        evals[dst] = m[[src, src]];
        let mut col = v.column(src).to_owned();
        canonical_sign(&mut col);
        evecs.column_mut(dst).assign(&col);
    }
    (evals, evecs)
}

/// Flip `v` in place so the entry with the largest magnitude is positive.
/// The first such entry wins on ties.
pub fn canonical_sign(v: &mut Array1<f64>) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Inverse of a symmetric positive definite matrix with a condition-number
/// guard. Fails when any eigenvalue is non-positive or the spectral condition
/// number exceeds `max_cond`.
pub fn spd_inverse(a: &Array2<f64>, max_cond: f64) -> Result<(Array2<f64>, f64)> {
    let (evals, evecs) = sym_eig(a);
    let n = a.nrows();
    let lam_max = evals[0];
    let lam_min = evals[n - 1];
    if lam_min <= 0.0 || lam_max <= 0.0 {
        return Err(Error::SingularCovariance { cond: f64::INFINITY });
    }
    let cond = lam_max / lam_min;
    if cond > max_cond {
        return Err(Error::SingularCovariance { cond });
    }
    Ok((recompose(&evecs, &evals.mapv(|l| 1.0 / l)), cond))
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues below
/// `rel_tol` times the largest are treated as zero.
pub fn psd_pinv(a: &Array2<f64>, rel_tol: f64) -> Array2<f64> {
    let (evals, evecs) = sym_eig(a);
    let cutoff = rel_tol * evals[0].abs().max(f64::MIN_POSITIVE);
    let inv = evals.mapv(|l| if l > cutoff { 1.0 / l } else { 0.0 });
    recompose(&evecs, &inv)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_eig_max(a: &Array2<f64>) -> f64 {
    sym_eig(a).0[0]
}

fn recompose(evecs: &Array2<f64>, evals: &Array1<f64>) -> Array2<f64> {
    let n = evecs.nrows();
    let mut scaled = evecs.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|x| x * evals[j]);
    }
    let mut out = scaled.dot(&evecs.t());
    // Symmetrize away rounding noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = m;
            out[[j, i]] = m;
        }
    }
    out
}

/// Result of a power iteration.
pub struct PowerResult {
    pub vector: Array1<f64>,
    pub converged: bool,
}

/// Dominant-eigenvector power iteration with a deterministic all-ones start.
///
/// `apply` computes the matrix-vector product. Convergence is a sign-aligned
/// step shorter than `tol`. Returns `None` when the operator annihilates the
/// iterate (dominant eigenvalue numerically zero).
pub fn power_iteration<F>(n: usize, apply: F, tol: f64, max_iters: usize) -> Option<PowerResult>
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut x = Array1::<f64>::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut converged = false;
    for _ in 0..max_iters {
        let mut y = apply(&x);
        let norm = y.dot(&y).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return None;
        }
        y.mapv_inplace(|v| v / norm);
        let d_plus = (&y - &x).mapv(|v| v * v).sum().sqrt();
        let d_minus = (&y + &x).mapv(|v| v * v).sum().sqrt();
        let step = d_plus.min(d_minus);
        x = y;
        if step < tol {
            converged = true;
            break;
        }
    }
    canonical_sign(&mut x);
    Some(PowerResult { vector: x, converged })
}

/// Orthogonal projector onto the null space of `a^T` (columns of `a` span the
/// excluded subspace): `I - a (a^T a)^+ a^T`.
pub fn complement_projector(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let gram = a.t().dot(a);
    let pinv = psd_pinv(&gram, 1e-12);
    let mut p = Array2::<f64>::eye(n);
    p -= &a.dot(&pinv).dot(&a.t());
    p
}

//! Small dense symmetric eigenproblems (n ≤ 32).

use crate::error::{Error, Result};
use crate::math::Matrix;

pub const MAX_EIGEN_DIM: usize = 32;

/// Eigenpairs sorted by descending eigenvalue; `vectors` holds one
/// eigenvector per column.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Lower-triangular Cholesky factor, or `None` when `a` is not numerically
/// positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Cyclic Jacobi rotations on a symmetric matrix.
pub fn symmetric_eig(a: &Matrix) -> Result<EigenDecomposition> {
    check_square(a, "A")?;
    if !a.is_symmetric(1e-10) {
        return Err(Error::invalid("matrix is not symmetric"));
    }
    let n = a.rows();
    let mut m = a.clone();
    // symmetrize exactly so rotations see a consistent matrix
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    Ok(sorted(values, &v))
}

/// Solves `A v = λ B v` for symmetric `A` and symmetric positive-definite
/// `B` by Cholesky reduction. If `B` fails to factor, a single ridge of
/// `1e-9 · trace(B) / n` is added to its diagonal before giving up.
///
/// Eigenvectors are B-orthonormal and sign-normalized so their
/// largest-magnitude component is positive.
pub fn symmetric_generalized_eig(a: &Matrix, b: &Matrix) -> Result<EigenDecomposition> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if a.shape() != b.shape() {
        return Err(Error::dim("A and B must have the same shape"));
    }
    if !b.is_symmetric(1e-10) {
        return Err(Error::invalid("B is not symmetric"));
    }
    let n = a.rows();
    let l = match cholesky(b) {
        Some(l) => l,
        None => {
            let ridge = 1e-9 * b.trace() / n as f64;
            let mut bb = b.clone();
            for i in 0..n {
                bb[(i, i)] += ridge;
            }
            cholesky(&bb).ok_or(Error::NotPositiveDefinite)?
        }
    };
    let linv = lower_inverse(&l);
    // C = L⁻¹ A L⁻ᵀ
    let c = linv.matmul(a)?.matmul(&linv.transpose())?;
    let mut c_sym = c.clone();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c_sym[(i, j)] = avg;
            c_sym[(j, i)] = avg;
        }
    }
    let std = symmetric_eig(&c_sym)?;
    // v = L⁻ᵀ y
    let mut vectors = linv.transpose().matmul(&std.vectors)?;
    normalize_signs(&mut vectors);
    Ok(EigenDecomposition {
        values: std.values,
        vectors,
    })
}

fn check_square(m: &Matrix, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(format!("{name} must be square, got {:?}", m.shape())));
    }
    if m.rows() > MAX_EIGEN_DIM {
        return Err(Error::invalid(format!(
            "{name} is {}x{}; eigenproblems are limited to n ≤ {MAX_EIGEN_DIM}",
            m.rows(),
            m.rows()
        )));
    }
    Ok(())
}

fn lower_inverse(l: &Matrix) -> Matrix {
    let n = l.rows();
    let mut inv = Matrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

fn sorted(values: Vec<f64>, vectors: &Matrix) -> EigenDecomposition {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut out = Matrix::zeros(vectors.rows(), n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..vectors.rows() {
            out[(r, new)] = vectors[(r, old)];
        }
    }
    let mut out_vectors = out;
    normalize_signs(&mut out_vectors);
    EigenDecomposition {
        values: order.iter().map(|&i| values[i]).collect(),
        vectors: out_vectors,
    }
}

fn normalize_signs(vectors: &mut Matrix) {
    for c in 0..vectors.cols() {
        let mut pivot = 0;
        for r in 0..vectors.rows() {
            if vectors[(r, c)].abs() > vectors[(pivot, c)].abs() + 1e-12 {
                pivot = r;
            }
        }
        if vectors[(pivot, c)] < 0.0 {
            for r in 0..vectors.rows() {
                vectors[(r, c)] = -vectors[(r, c)];
            }
        }
    }
}

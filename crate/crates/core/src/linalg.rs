//! Small dense complex linear-algebra helpers on top of `faer`.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn zeros(n: usize, m: usize) -> CMat {
    Mat::zeros(n, m)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(a: MatRef<'_, C64>) -> CMat {
    a.adjoint().to_owned()
}

pub fn scale(a: &CMat, s: C64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn add_scaled(acc: &mut CMat, a: &CMat, s: C64) {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc[(i, j)] += a[(i, j)] * s;
        }
    }
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

/// Largest entry modulus.
pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

pub fn hermiticity_residual(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..=j.min(a.nrows() - 1) {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// Replaces `a` by `(a + a†)/2`.
pub fn symmetrize(a: &mut CMat) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (a[(i, j)] + a[(j, i)].conj());
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
        a[(j, j)] = C64::new(a[(j, j)].re, 0.0);
    }
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Frobenius-free operator-norm proxy: max absolute row sum.
pub fn inf_norm(a: &CMat) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> Result<HermitianEigen> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::Eigensolver { node: 0 })?;
    let values = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok(HermitianEigen {
        values,
        vectors: evd.U().to_owned(),
    })
}

pub fn eigvalsh(a: &CMat) -> Result<Vec<f64>> {
    let v = a
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::Eigensolver { node: 0 })?;
    Ok(v.into_iter().collect())
}

/// Orthogonal projector `V V†` onto the span of the given orthonormal columns.
pub fn projector_from_columns(v: MatRef<'_, C64>) -> CMat {
    let n = v.nrows();
    let mut p = zeros(n, n);
    for k in 0..v.ncols() {
        for j in 0..n {
            let vj = v[(j, k)].conj();
            if vj == C64::new(0.0, 0.0) {
                continue;
            }
            for i in 0..n {
                p[(i, j)] += v[(i, k)] * vj;
            }
        }
    }
    p
}

/// Orthonormal basis of the range of a projector of known rank, via its eigenvectors.
pub fn projector_frame(p: &CMat, rank: usize) -> Result<CMat> {
    let e = eigh(p)?;
    let n = p.nrows();
    Ok(e.vectors.as_ref().submatrix(0, n - rank, n, rank).to_owned())
}

/// Determinant by Gaussian elimination with partial pivoting (small matrices).
pub fn det(a: &CMat) -> C64 {
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = C64::new(1.0, 0.0);
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[(i, k)].norm() > m[(piv, k)].norm() {
                piv = i;
            }
        }
        if m[(piv, k)].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if piv != k {
            for j in 0..n {
                let t = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = t;
            }
            d = -d;
        }
        let pk = m[(k, k)];
        d *= pk;
        for i in k + 1..n {
            let f = m[(i, k)] / pk;
            if f == C64::new(0.0, 0.0) {
                continue;
            }
            for j in k..n {
                let t = m[(k, j)];
                m[(i, j)] -= f * t;
            }
        }
    }
    d
}

/// Smallest singular value proxy for small square matrices: sqrt of the smallest eigenvalue of A†A.
pub fn min_singular_value(a: &CMat) -> Result<f64> {
    let ata = a.adjoint() * a;
    let ev = eigvalsh(&ata)?;
    Ok(ev.first().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Inverse through an LU factorization with partial pivoting.
pub fn inverse(a: &CMat) -> Result<CMat> {
    use faer::linalg::solvers::Solve;
    if a.nrows() != a.ncols() {
        return Err(Error::Incompatible(format!("cannot invert a {}x{} matrix", a.nrows(), a.ncols())));
    }
    Ok(a.partial_piv_lu().solve(identity(a.nrows())))
}

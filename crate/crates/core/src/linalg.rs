//! Small complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest entry magnitude of `V^H V - I`.
pub fn orthonormality_error(v: &CMatrix) -> f64 {
    let gram = v.adjoint() * v;
    let mut worst = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { ONE } else { ZERO };
            worst = worst.max((gram[(r, c)] - target).norm());
        }
    }
    worst
}

/// Principal square root of a Hermitian positive semidefinite matrix, with
/// negative eigenvalues clamped to zero.
pub fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    if n == 1 {
        return CMatrix::from_element(1, 1, Complex64::new(m[(0, 0)].re.max(0.0).sqrt(), 0.0));
    }
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * eig.eigenvectors.adjoint()
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// `log2 det(A)` for Hermitian positive definite `A`, via Cholesky.
pub fn log2_det_hpd(a: &CMatrix) -> Option<f64> {
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        acc += l[(i, i)].norm().log2();
    }
    Some(2.0 * acc)
}

/// Subspace chordal distance `||A A^H - B B^H||_F / sqrt(2)`, insensitive to
/// per-column phase.
pub fn chordal_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    (pa - pb).norm() / std::f64::consts::SQRT_2
}

/// Largest entry error between `a` and `b` after rotating each column of `a`
/// onto the phase of the matching column of `b`.
pub fn column_phase_aligned_error(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let mut worst = 0.0f64;
    for c in 0..a.ncols() {
        let inner = a.column(c).dotc(&b.column(c));
        let phase = if inner.norm() > 0.0 { inner / inner.norm() } else { ONE };
        for r in 0..a.nrows() {
            worst = worst.max((a[(r, c)] * phase - b[(r, c)]).norm());
        }
    }
    worst
}

//! Small dense complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Conjugate transpose.
pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &CMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `‖M − M†‖_F / max(‖M‖_F, 1)`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    frobenius(&(m - m.adjoint())) / frobenius(m).max(1.0)
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    frobenius(&(u.adjoint() * u - identity(n)))
}

/// Eigendecomposition of a Hermitian matrix, `h = E diag(w) E†`, eigenvalues
/// in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(h: &CMatrix) -> HermitianEigen {
    let sym = (h + h.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub fn eigh_real(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `exp(−i t H)` for Hermitian `H` given its eigendecomposition.
pub fn expi_from_eigen(eig: &HermitianEigen, t: f64) -> CMatrix {
    let phases = eig.values.map(|w| Complex64::from_polar(1.0, -w * t));
    scale_columns(&eig.vectors, &phases) * eig.vectors.adjoint()
}

/// Multiplies column `j` of `m` by `d[j]`, i.e. `m · diag(d)`.
pub fn scale_columns(m: &CMatrix, d: &DVector<Complex64>) -> CMatrix {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= d[j];
    }
    out
}

/// Modified Gram-Schmidt on the columns, in place.
pub fn orthonormalize_columns(m: &mut CMatrix) {
    let n = m.ncols();
    for j in 0..n {
        for i in 0..j {
            let qi = m.column(i).clone_owned();
            let proj = qi.dotc(&m.column(j));
            let mut col = m.column_mut(j);
            col -= qi * proj;
        }
        let norm = m.column(j).norm();
        if norm > 0.0 {
            let mut col = m.column_mut(j);
            col /= c(norm);
        }
    }
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

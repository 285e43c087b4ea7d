//! Lie-group linear algebra on `U(N)` and `u(N)`.
//!
//! The logarithm of a unitary and the derivative of the exponential map are
//! both evaluated in an eigenbasis. With `A = Λ diag(λ) Λ†`,
//!
//! ```text
//! dexp|_A(D) = e^A Λ (Γ ∘ (Λ† D Λ)) Λ†,     Γ_rs = γ(λ_s − λ_r),
//! dlog|_W(B) = Λ ((Λ† W† B Λ) / Γ) Λ†,       γ(z) = (e^z − 1) / z,
//! ```
//!
//! with `∘` and `/` taken elementwise.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};

/// Below this gap `γ` is evaluated by its Taylor series.
pub const GAMMA_SERIES_THRESHOLD: f64 = 1e-8;

/// `dlog` refuses to divide by Γ entries smaller than this.
pub const GAMMA_DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Eigenphases within this distance of each other trigger a Gram-Schmidt pass
/// over the eigenvectors returned by the Schur factorisation.
const CLUSTER_TOLERANCE: f64 = 1e-8;

/// An anti-Hermitian matrix, an element of `u(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AntiHermitian(CMatrix);

impl AntiHermitian {
    /// Anti-Hermitises `m` exactly: `(m − m†) / 2`.
    pub fn new(m: CMatrix) -> Self {
        let ah = (&m - m.adjoint()).scale(0.5);
        AntiHermitian(ah)
    }

    /// `−i H` for a Hermitian `H`.
    pub fn from_hamiltonian(h: &CMatrix) -> Self {
        Self::new(-(h * linalg::I))
    }

    pub fn zeros(n: usize) -> Self {
        AntiHermitian(CMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::frobenius(&self.0)
    }

    /// Eigendecomposition through the Hermitian matrix `iA`.
    pub fn eigen_frame(&self) -> EigenFrame {
        let h = &self.0 * linalg::I;
        let eig = linalg::eigh(&h);
        let eigenvalues = eig
            .values
            .iter()
            .map(|&w| Complex64::new(0.0, -w))
            .collect();
        EigenFrame {
            eigenvalues,
            vectors: eig.vectors,
        }
    }

    /// `e^A`, unitary.
    pub fn exp(&self) -> UnitaryMatrix {
        self.eigen_frame().exp()
    }
}

/// A unitary matrix, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(CMatrix);

impl UnitaryMatrix {
    /// Accepts `m` if `‖m†m − I‖_F ≤ 1e−10 √N`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "unitary must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let defect = linalg::unitarity_defect(&m);
        if !(defect <= 1e-10 * (n as f64).sqrt()) {
            return Err(Error::invalid(format!(
                "matrix is not unitary: ‖U†U − I‖_F = {defect:e}"
            )));
        }
        Ok(UnitaryMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        UnitaryMatrix(linalg::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.0.adjoint())
    }

    /// Product of two unitaries.
    pub fn compose(&self, other: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix(&self.0 * &other.0)
    }

    pub fn scale_phase(&self, phi: f64) -> UnitaryMatrix {
        UnitaryMatrix(self.0.map(|z| z * Complex64::from_polar(1.0, phi)))
    }

    /// Haar-distributed random unitary (QR of a complex Ginibre matrix with
    /// the phases of `R`'s diagonal absorbed).
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryMatrix {
        let z = CMatrix::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) / std::f64::consts::SQRT_2
        });
        let qr = z.qr();
        let (q, r) = qr.unpack();
        let phases = DVector::from_fn(n, |i, _| {
            let d = r[(i, i)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0)
            }
        });
        let mut u = linalg::scale_columns(&q, &phases);
        linalg::orthonormalize_columns(&mut u);
        UnitaryMatrix(u)
    }
}

/// Eigenvalues and a unitary matrix of eigenvectors (one per column).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: CMatrix,
}

impl EigenFrame {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Λ diag(f(λ)) Λ†`.
    pub fn reconstruct_with(&self, f: impl Fn(Complex64) -> Complex64) -> CMatrix {
        let d = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&z| f(z)));
        linalg::scale_columns(&self.vectors, &d) * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(|z| z)
    }

    pub fn exp(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.reconstruct_with(|z| z.exp()))
    }

    pub fn gamma(&self) -> CMatrix {
        gamma_matrix(&self.eigenvalues)
    }
}

/// Real coordinates of the traceless part of an anti-Hermitian matrix in a
/// fixed orthonormal basis of `su(N)`. See [`su_project`] for the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SuCoordinates(pub DVector<f64>);

impl SuCoordinates {
    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Dimension of `su(n)`.
pub fn su_dim(n: usize) -> usize {
    n * n - 1
}

/// `e^z − 1` without cancellation for small `|z|`.
fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let em1 = x.exp_m1();
    let half_sin = (0.5 * y).sin();
    // e^x cos y − 1 = (e^x − 1) cos y − 2 sin²(y/2)
    let re = em1 * y.cos() - 2.0 * half_sin * half_sin;
    let im = x.exp() * y.sin();
    Complex64::new(re, im)
}

/// `γ(z) = (e^z − 1)/z`, continuously extended with `γ(0) = 1`.
pub fn gamma(z: Complex64) -> Complex64 {
    if z.norm() < GAMMA_SERIES_THRESHOLD {
        c(1.0) + z / 2.0 + z * z / 6.0
    } else {
        expm1(z) / z
    }
}

/// `Γ_rs = γ(λ_s − λ_r)`, with the diagonal set to exactly one.
pub fn gamma_matrix(eigvals: &[Complex64]) -> CMatrix {
    let n = eigvals.len();
    CMatrix::from_fn(n, n, |r, s| {
        if r == s {
            c(1.0)
        } else {
            gamma(eigvals[s] - eigvals[r])
        }
    })
}

/// Principal logarithm of a unitary: every eigenvalue of the result is `iθ`
/// with `θ ∈ (−π, π]`. Returns the logarithm and its eigenframe, which also
/// diagonalises `w`.
pub fn matrix_log_unitary(w: &UnitaryMatrix) -> Result<(AntiHermitian, EigenFrame)> {
    let m = w.matrix();
    let n = m.nrows();
    let defect = linalg::unitarity_defect(m);
    if !(defect <= 1e-10 * (n as f64).sqrt()) {
        return Err(Error::invalid(format!(
            "logarithm needs a unitary input, ‖W†W − I‖_F = {defect:e}"
        )));
    }

    let (mut q, t) = Schur::new(m.clone()).unpack();
    let phases: Vec<f64> = (0..n).map(|i| principal_phase(t[(i, i)])).collect();

    let clustered = (0..n).any(|i| {
        (i + 1..n).any(|j| {
            let d = (phases[i] - phases[j]).abs();
            d.min(2.0 * std::f64::consts::PI - d) < CLUSTER_TOLERANCE
        })
    });
    if clustered {
        linalg::orthonormalize_columns(&mut q);
    }

    let frame = EigenFrame {
        eigenvalues: phases.iter().map(|&th| Complex64::new(0.0, th)).collect(),
        vectors: q,
    };
    let log = AntiHermitian::new(frame.reconstruct());
    Ok((log, frame))
}

/// Argument of a unit-modulus number mapped into `(−π, π]`.
pub fn principal_phase(z: Complex64) -> f64 {
    let th = z.im.atan2(z.re);
    if th <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        th
    }
}

/// Directional derivative of `exp` at `a` along `d`.
pub fn dexp(a: &AntiHermitian, d: &AntiHermitian) -> CMatrix {
    dexp_in_frame(&a.eigen_frame(), d.matrix())
}

/// `dexp` with a precomputed eigenframe of the base point.
pub fn dexp_in_frame(frame: &EigenFrame, d: &CMatrix) -> CMatrix {
    let lam = &frame.vectors;
    let gam = frame.gamma();
    let inner = (lam.adjoint() * d * lam).component_mul(&gam);
    let exp_diag = DVector::from_iterator(frame.dim(), frame.eigenvalues.iter().map(|z| z.exp()));
    // e^A Λ = Λ diag(e^λ)
    linalg::scale_columns(lam, &exp_diag) * inner * lam.adjoint()
}

/// `(dexp|_{log W})^{-1}(B)` where `frame` is the eigenframe of `log W`.
pub fn dlog(w: &UnitaryMatrix, frame: &EigenFrame, b: &CMatrix) -> Result<CMatrix> {
    dlog_pulled_back(frame, &(w.matrix().adjoint() * b))
}

/// `dlog` taking `Y = W† B` directly, which the Jacobian assembles without
/// ever forming `B`.
pub fn dlog_pulled_back(frame: &EigenFrame, y: &CMatrix) -> Result<CMatrix> {
    let lam = &frame.vectors;
    let gam = frame.gamma();
    let smallest = gam.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if smallest < GAMMA_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateBranch(smallest));
    }
    let inner = (lam.adjoint() * y * lam).component_div(&gam);
    Ok(lam * inner * lam.adjoint())
}

/// Helmert-style orthonormal basis of the hyperplane orthogonal to the
/// all-ones vector; row `j` is `(1, …, 1, −(j+1), 0, …) / √((j+1)(j+2))`.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n.saturating_sub(1), n, |j, l| {
        let jj = (j + 1) as f64;
        let norm = (jj * (jj + 1.0)).sqrt();
        match l.cmp(&(j + 1)) {
            std::cmp::Ordering::Less => 1.0 / norm,
            std::cmp::Ordering::Equal => -jj / norm,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// Real coordinates of the traceless part of `a`.
///
/// Layout: for each strictly upper pair `(j, k)` in row-major order the two
/// entries `√2 Re a_jk, √2 Im a_jk`, followed by the `N − 1` Helmert
/// coordinates of the imaginary diagonal. The `iI` component is dropped, and
/// `‖coords‖₂ = ‖a − (Tr a / N) I‖_F`.
pub fn su_project(a: &AntiHermitian) -> SuCoordinates {
    su_project_matrix(a.matrix())
}

pub(crate) fn su_project_matrix(a: &CMatrix) -> SuCoordinates {
    let n = a.nrows();
    let mut v = Vec::with_capacity(su_dim(n));
    let s2 = std::f64::consts::SQRT_2;
    for j in 0..n {
        for k in j + 1..n {
            let z = a[(j, k)];
            v.push(s2 * z.re);
            v.push(s2 * z.im);
        }
    }
    let diag = DVector::from_fn(n, |l, _| a[(l, l)].im);
    v.extend((helmert_basis(n) * diag).iter());
    SuCoordinates(DVector::from_vec(v))
}

/// Adjoint (and inverse on `su(N)`) of [`su_project`].
pub fn su_embed(v: &SuCoordinates, n: usize) -> Result<AntiHermitian> {
    if v.len() != su_dim(n) {
        return Err(Error::invalid(format!(
            "su({n}) coordinates must have length {}, got {}",
            su_dim(n),
            v.len()
        )));
    }
    let s2 = std::f64::consts::SQRT_2;
    let mut a = CMatrix::zeros(n, n);
    let mut idx = 0;
    for j in 0..n {
        for k in j + 1..n {
            let z = Complex64::new(v.0[idx], v.0[idx + 1]) / s2;
            a[(j, k)] = z;
            a[(k, j)] = -z.conj();
            idx += 2;
        }
    }
    let diag = helmert_basis(n).transpose() * v.0.rows(idx, n - 1);
    for l in 0..n {
        a[(l, l)] = Complex64::new(0.0, diag[l]);
    }
    Ok(AntiHermitian(a))
}

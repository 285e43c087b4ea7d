//! Control systems, pulse bases and the spin-chain problem presets.
//!
//! The Hamiltonian is bilinear in the controls,
//! `H[f(t)] = H₀ + Σ_r f_r(t) H_r`, and each control is expanded in a common
//! time basis, `f_r(t) = Σ_k α_rk b_k(t)`. Coefficients are stored
//! control-major: all `K` coefficients of control 0, then control 1, ….

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::algebra::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::objective::TargetSpec;
use crate::quadrature;

/// Tail height of the calibrated Hermite basis outside `(0, T)`.
pub const HERMITE_TAIL: f64 = 1e-8;

const HERMITE_TAIL_SAMPLES: usize = 1000;

/// The Gaussian envelope needs this many Gauss-Legendre nodes on `[0, T]`
/// even when `4K` would be fewer.
const HERMITE_GRAM_MIN_NODES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ControlSystem {
    drift: CMatrix,
    controls: Vec<CMatrix>,
}

impl ControlSystem {
    pub fn new(drift: CMatrix, controls: Vec<CMatrix>) -> Result<Self> {
        let n = drift.nrows();
        if !drift.is_square() || n < 2 {
            return Err(Error::invalid(
                "drift Hamiltonian must be square with N ≥ 2",
            ));
        }
        if controls.is_empty() {
            return Err(Error::invalid(
                "at least one control Hamiltonian is required",
            ));
        }
        for (i, h) in std::iter::once(&drift).chain(&controls).enumerate() {
            if h.nrows() != n || h.ncols() != n {
                return Err(Error::invalid(format!("Hamiltonian {i} is not {n}x{n}")));
            }
            if linalg::hermiticity_defect(h) > 1e-12 {
                return Err(Error::invalid(format!("Hamiltonian {i} is not Hermitian")));
            }
        }
        Ok(ControlSystem { drift, controls })
    }

    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    pub fn controls(&self) -> &[CMatrix] {
        &self.controls
    }

    /// `H₀ + Σ_r f_r H_r`.
    pub fn hamiltonian(&self, amplitudes: &[f64]) -> CMatrix {
        let mut h = self.drift.clone();
        for (hr, &f) in self.controls.iter().zip(amplitudes) {
            if f != 0.0 {
                h += hr * c(f);
            }
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    PiecewiseConstant,
    Hermite,
}

/// `K` real basis functions on `[0, T]` with their `L²([0, T])` Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseBasis {
    kind: BasisKind,
    len: usize,
    duration: f64,
    /// Hermite only: `b_k(t) = h_k((t − T/2) / scale)`.
    scale: f64,
    gram: DMatrix<f64>,
}

impl PulseBasis {
    /// Indicators of the `k` uniform subintervals of `[0, duration]`.
    pub fn piecewise_constant(k: usize, duration: f64) -> Result<Self> {
        check_basis_args(k, duration)?;
        Ok(PulseBasis {
            kind: BasisKind::PiecewiseConstant,
            len: k,
            duration,
            scale: 0.0,
            gram: DMatrix::from_diagonal_element(k, k, duration / k as f64),
        })
    }

    /// The first `k` Hermite functions centred on `duration / 2`, scaled so
    /// that the largest value any of them takes outside `(0, duration)` is
    /// [`HERMITE_TAIL`].
    pub fn hermite(k: usize, duration: f64) -> Result<Self> {
        check_basis_args(k, duration)?;
        let edge = calibrate_hermite_edge(k);
        let scale = 0.5 * duration / edge;
        let mut basis = PulseBasis {
            kind: BasisKind::Hermite,
            len: k,
            duration,
            scale,
            gram: DMatrix::zeros(0, 0),
        };
        basis.gram = basis.hermite_gram();
        Ok(basis)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Number of basis functions `K`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Time scale of the Hermite functions; zero for piecewise-constant.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Value of basis function `k` (zero-based) at time `t`.
    ///
    /// Piecewise-constant functions are indicators of `(kT/K, (k+1)T/K]`, so
    /// they sum to one on `(0, T]`.
    pub fn eval(&self, k: usize, t: f64) -> Result<f64> {
        if k >= self.len {
            return Err(Error::invalid(format!(
                "basis index {k} out of range for K = {}",
                self.len
            )));
        }
        Ok(match self.kind {
            BasisKind::PiecewiseConstant => {
                if self.interval_of(t) == Some(k) {
                    1.0
                } else {
                    0.0
                }
            }
            BasisKind::Hermite => self.eval_all(t)[k],
        })
    }

    /// All `K` basis values at `t`.
    pub fn eval_all(&self, t: f64) -> Vec<f64> {
        match self.kind {
            BasisKind::PiecewiseConstant => {
                let mut out = vec![0.0; self.len];
                if let Some(k) = self.interval_of(t) {
                    out[k] = 1.0;
                }
                out
            }
            BasisKind::Hermite => {
                hermite_functions((t - 0.5 * self.duration) / self.scale, self.len)
            }
        }
    }

    /// Basis values at a quadrature node `t` belonging to the step
    /// `[lo, hi]`, taking one-sided limits for discontinuous bases. Steps must
    /// not straddle a piecewise-constant interval boundary.
    pub fn eval_all_in_step(&self, t: f64, lo: f64, hi: f64) -> Vec<f64> {
        match self.kind {
            BasisKind::PiecewiseConstant => self.eval_all(0.5 * (lo + hi)),
            BasisKind::Hermite => self.eval_all(t),
        }
    }

    fn interval_of(&self, t: f64) -> Option<usize> {
        if !(t > 0.0) || t > self.duration * (1.0 + 1e-14) {
            return None;
        }
        let x = t * self.len as f64 / self.duration;
        let nearest = x.round();
        let upper = if (x - nearest).abs() < 1e-12 * self.len as f64 {
            nearest
        } else {
            x.ceil()
        };
        Some((upper as usize).clamp(1, self.len) - 1)
    }

    fn hermite_gram(&self) -> DMatrix<f64> {
        let (nodes, weights) = quadrature::gauss_legendre_on(
            (4 * self.len).max(HERMITE_GRAM_MIN_NODES),
            0.0,
            self.duration,
        );
        let mut values = DMatrix::zeros(nodes.len(), self.len);
        for (i, &t) in nodes.iter().enumerate() {
            let row = self.eval_all(t);
            for (k, v) in row.into_iter().enumerate() {
                values[(i, k)] = v * weights[i].sqrt();
            }
        }
        let g = values.transpose() * &values;
        (&g + g.transpose()) * 0.5
    }
}

fn check_basis_args(k: usize, duration: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("basis needs K ≥ 1"));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok(())
}

/// Orthonormal Hermite functions `h_0(x), …, h_{k−1}(x)` by the normalised
/// three-term recurrence. A running exponent keeps the recurrence in range
/// where the Gaussian factor alone would underflow.
pub fn hermite_functions(x: f64, k: usize) -> Vec<f64> {
    const BIG: f64 = 1e150;
    let mut out = Vec::with_capacity(k);
    let mut log_scale = -0.5 * x * x;
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut raw = Vec::with_capacity(k);
    for j in 0..k {
        raw.push((cur, log_scale));
        let jf = j as f64;
        let next = x * (2.0 / (jf + 1.0)).sqrt() * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            cur /= BIG;
            prev /= BIG;
            log_scale += BIG.ln();
        }
    }
    for (v, ls) in raw {
        out.push(if v == 0.0 { 0.0 } else { v * ls.exp() });
    }
    out
}

/// Largest `|h_j(x)|` over `j < k` and the sampled tail `x ∈ [edge, 2·edge]`.
/// The functions have definite parity, so one side covers both.
fn hermite_tail_max(k: usize, edge: f64) -> f64 {
    (0..HERMITE_TAIL_SAMPLES)
        .map(|i| edge * (1.0 + i as f64 / (HERMITE_TAIL_SAMPLES - 1) as f64))
        .flat_map(|x| hermite_functions(x, k))
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Bisection for the dimensionless half-width `x₀` at which the tail maximum
/// equals [`HERMITE_TAIL`].
fn calibrate_hermite_edge(k: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = (2.0 * k as f64 + 1.0).sqrt() + 40.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if hermite_tail_max(k, mid) > HERMITE_TAIL {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Real coefficient vector `a`, control-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector(pub DVector<f64>);

impl ParameterVector {
    pub fn zeros(n_controls: usize, k: usize) -> Self {
        ParameterVector(DVector::zeros(n_controls * k))
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        ParameterVector(DVector::from_vec(v))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean norm of the coefficients.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Coefficients of control `r`.
    pub fn control(&self, r: usize, k: usize) -> &[f64] {
        &self.0.as_slice()[r * k..(r + 1) * k]
    }

    pub fn get(&self, r: usize, k: usize, k_len: usize) -> f64 {
        self.0[r * k_len + k]
    }
}

/// Pulse amplitudes `f_r(t) = Σ_k α_rk b_k(t)` for every control.
pub fn synthesize(basis: &PulseBasis, a: &ParameterVector, t: f64) -> Vec<f64> {
    amplitudes_from_values(basis, a, &basis.eval_all(t))
}

/// Amplitudes from precomputed basis values at some time.
pub fn amplitudes_from_values(basis: &PulseBasis, a: &ParameterVector, b: &[f64]) -> Vec<f64> {
    let k = basis.len();
    let r = a.len() / k;
    (0..r)
        .map(|ri| a.control(ri, k).iter().zip(b).map(|(x, y)| x * y).sum())
        .collect()
}

/// Integrated-power norm `√(Σ_r ∫₀ᵀ f_r(t)² dt) = √(Σ_r a_rᵀ G a_r)`.
pub fn pulse_norm(basis: &PulseBasis, a: &ParameterVector) -> f64 {
    let k = basis.len();
    let r = a.len() / k;
    let g = basis.gram();
    (0..r)
        .map(|ri| {
            let ar = DVector::from_column_slice(a.control(ri, k));
            ar.dot(&(g * &ar))
        })
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

/// A pulse of integrated-power norm `rho` whose direction is a normalised
/// standard Gaussian draw, deterministic in `seed`.
pub fn random_pulse(basis: &PulseBasis, n_controls: usize, rho: f64, seed: u64) -> ParameterVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_controls * basis.len();
    let g = ParameterVector(DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)));
    if rho == 0.0 {
        return ParameterVector::zeros(n_controls, basis.len());
    }
    let norm = pulse_norm(basis, &g);
    ParameterVector(g.0 * (rho / norm))
}

/// A control problem: system, basis, target, stopping tolerance on the gate
/// error, and an optional fluence bound.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub system: ControlSystem,
    pub basis: PulseBasis,
    pub target: TargetSpec,
    pub tolerance: f64,
    pub fluence_bound: Option<f64>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        system: ControlSystem,
        basis: PulseBasis,
        target: TargetSpec,
        tolerance: f64,
        fluence_bound: Option<f64>,
    ) -> Result<Self> {
        if !(tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if let Some(b) = fluence_bound {
            if !(b > 0.0) {
                return Err(Error::invalid("fluence bound must be positive"));
            }
        }
        if target.dim() != system.dim() {
            return Err(Error::invalid(format!(
                "target is {0}x{0} but the system has N = {1}",
                target.dim(),
                system.dim()
            )));
        }
        Ok(ProblemSpec {
            name: name.into(),
            system,
            basis,
            target,
            tolerance,
            fluence_bound,
        })
    }

    /// Number of optimisation variables `R·K`.
    pub fn n_params(&self) -> usize {
        self.system.n_controls() * self.basis.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let (z, o, i) = (c(0.0), c(1.0), Complex64::new(0.0, 1.0));
        match self {
            Pauli::X => CMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        }
    }
}

/// `σ` acting on `site` (zero-based, leftmost tensor factor) of `qubits`.
pub fn pauli_on(p: Pauli, site: usize, qubits: usize) -> CMatrix {
    product_on(&[(p, site)], qubits)
}

/// Tensor product of the given single-site Paulis, identity elsewhere.
pub fn product_on(ops: &[(Pauli, usize)], qubits: usize) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for site in 0..qubits {
        let factor = ops
            .iter()
            .find(|(_, s)| *s == site)
            .map(|(p, _)| p.matrix())
            .unwrap_or_else(|| linalg::identity(2));
        out = linalg::kron(&out, &factor);
    }
    out
}

/// Ising chain in a field gradient, open boundary:
/// `H₀ = Σ σ_z⁽ⁿ⁾σ_z⁽ⁿ⁺¹⁾ − Σ (n+2) σ_z⁽ⁿ⁾` (sites numbered from one),
/// controls `Σ σ_x⁽ⁿ⁾` and `Σ σ_y⁽ⁿ⁾`.
pub fn ising_chain_system(qubits: usize) -> Result<ControlSystem> {
    if qubits == 0 {
        return Err(Error::invalid("chain needs at least one qubit"));
    }
    let n = 1 << qubits;
    let mut h0 = CMatrix::zeros(n, n);
    for s in 0..qubits.saturating_sub(1) {
        h0 += product_on(&[(Pauli::Z, s), (Pauli::Z, s + 1)], qubits);
    }
    for s in 0..qubits {
        let omega = (s + 1) as f64 + 2.0;
        h0 -= pauli_on(Pauli::Z, s, qubits) * c(omega);
    }
    let sum = |p| (0..qubits).fold(CMatrix::zeros(n, n), |acc, s| acc + pauli_on(p, s, qubits));
    ControlSystem::new(h0, vec![sum(Pauli::X), sum(Pauli::Y)])
}

/// Heisenberg chain with a transverse field of Rabi frequency 10, open
/// boundary, and a single detuning control `σ_z` on the first spin.
pub fn heisenberg_chain_system(qubits: usize) -> Result<ControlSystem> {
    if qubits == 0 {
        return Err(Error::invalid("chain needs at least one qubit"));
    }
    let n = 1 << qubits;
    let mut h0 = CMatrix::zeros(n, n);
    for s in 0..qubits.saturating_sub(1) {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            h0 += product_on(&[(p, s), (p, s + 1)], qubits);
        }
    }
    for s in 0..qubits {
        h0 += pauli_on(Pauli::X, s, qubits) * c(10.0);
    }
    ControlSystem::new(h0, vec![pauli_on(Pauli::Z, 0, qubits)])
}

/// The `n`-dimensional quantum Fourier transform, `F_jk = ω^{jk}/√n`.
pub fn qft(n: usize) -> UnitaryMatrix {
    let norm = 1.0 / (n as f64).sqrt();
    let m = CMatrix::from_fn(n, n, |j, k| {
        let phase = 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
        Complex64::from_polar(norm, phase)
    });
    UnitaryMatrix::new(m).expect("QFT is unitary")
}

pub const ISING_QFT_QUBITS: usize = 5;
pub const ISING_QFT_DURATION: f64 = 125.0;
pub const ISING_QFT_BASIS_LEN: usize = 1000;
pub const HEISENBERG_QUBITS: usize = 5;
pub const HEISENBERG_DURATION: f64 = 90.0;
pub const HEISENBERG_BASIS_LEN: usize = 1500;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Five-qubit Ising chain, QFT target, `T = 125`, `K = 1000`
/// piecewise-constant controls, `ε = 1e−4`.
pub fn build_ising_qft_problem() -> ProblemSpec {
    build_ising_qft_problem_scaled(ISING_QFT_QUBITS, ISING_QFT_BASIS_LEN, ISING_QFT_DURATION)
        .expect("preset parameters are valid")
}

/// The Ising QFT problem with `qubits` sites, `k` intervals and duration `t`.
pub fn build_ising_qft_problem_scaled(qubits: usize, k: usize, t: f64) -> Result<ProblemSpec> {
    let system = ising_chain_system(qubits)?;
    let basis = PulseBasis::piecewise_constant(k, t)?;
    let target = TargetSpec::full(qft(1 << qubits));
    ProblemSpec::new("ising-qft", system, basis, target, DEFAULT_TOLERANCE, None)
}

/// Five-qubit Heisenberg chain, `T = 90`, `K = 1500` piecewise-constant
/// intervals, with a caller-supplied target.
pub fn build_heisenberg_tgate_problem(target: TargetSpec) -> Result<ProblemSpec> {
    build_heisenberg_tgate_problem_scaled(
        HEISENBERG_QUBITS,
        HEISENBERG_BASIS_LEN,
        HEISENBERG_DURATION,
        target,
    )
}

pub fn build_heisenberg_tgate_problem_scaled(
    qubits: usize,
    k: usize,
    t: f64,
    target: TargetSpec,
) -> Result<ProblemSpec> {
    let system = heisenberg_chain_system(qubits)?;
    let basis = PulseBasis::piecewise_constant(k, t)?;
    ProblemSpec::new(
        "heisenberg-t",
        system,
        basis,
        target,
        DEFAULT_TOLERANCE,
        None,
    )
}

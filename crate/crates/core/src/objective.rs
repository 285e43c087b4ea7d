//! Residual `L(a) = P log(V† U_a(T))`, gate errors, the Jacobian of `L`
//! and the ill-conditioning measure.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::algebra::{self, su_dim, EigenFrame, SuCoordinates, UnitaryMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{ControlSystem, ParameterVector, PulseBasis};
use crate::propagation::{self, PropagationResult};
use crate::quadrature::SIMPSON_WEIGHTS;

/// Eigenphases this close to `π` are reported as branch ties.
pub const BRANCH_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    /// Keep all of `su(N)`.
    FullSu,
    /// `N = system_dim · env_dim`; drop the `I ⊗ su(env_dim)` directions.
    Subsystem { system_dim: usize, env_dim: usize },
}

/// The target unitary together with the projector `P` of the residual.
#[derive(Debug, Clone)]
pub struct TargetSpec {
    target: UnitaryMatrix,
    projector: Projector,
    /// Subsystem only: orthonormal basis (as columns, in `su(N)`
    /// coordinates) of the complement of `I ⊗ su(env)`.
    complement: Option<DMatrix<f64>>,
}

impl TargetSpec {
    pub fn full(target: UnitaryMatrix) -> Self {
        TargetSpec {
            target,
            projector: Projector::FullSu,
            complement: None,
        }
    }

    /// Target `W ⊗ I_env`, ignoring whatever happens on the environment.
    pub fn subsystem(w: UnitaryMatrix, env_dim: usize) -> Result<Self> {
        if env_dim < 2 {
            return Err(Error::invalid("environment dimension must be at least 2"));
        }
        let system_dim = w.dim();
        let v = linalg::kron(w.matrix(), &linalg::identity(env_dim));
        let target = UnitaryMatrix::new(v)?;
        Ok(TargetSpec {
            target,
            projector: Projector::Subsystem {
                system_dim,
                env_dim,
            },
            complement: Some(subsystem_complement(system_dim, env_dim)?),
        })
    }

    pub fn target(&self) -> &UnitaryMatrix {
        &self.target
    }

    pub fn projector(&self) -> Projector {
        self.projector
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Length `m` of the residual vector.
    pub fn residual_dim(&self) -> usize {
        match self.projector {
            Projector::FullSu => su_dim(self.dim()),
            Projector::Subsystem { env_dim, .. } => su_dim(self.dim()) - su_dim(env_dim),
        }
    }

    /// `P` applied to an anti-Hermitian matrix.
    pub fn project(&self, a: &CMatrix) -> DVector<f64> {
        let coords = algebra::su_project_matrix(a).0;
        match &self.complement {
            None => coords,
            Some(basis) => basis.tr_mul(&coords),
        }
    }

    /// The same target multiplied by the global phase `e^{iφ}`.
    pub fn with_phase(&self, phi: f64) -> Self {
        TargetSpec {
            target: self.target.scale_phase(phi),
            ..self.clone()
        }
    }
}

fn subsystem_complement(system_dim: usize, env_dim: usize) -> Result<DMatrix<f64>> {
    let n = system_dim * env_dim;
    let m = su_dim(n);
    let k = su_dim(env_dim);
    let id = linalg::identity(system_dim);
    let norm = 1.0 / (system_dim as f64).sqrt();
    let mut env = DMatrix::zeros(m, k);
    for j in 0..k {
        let mut e = DVector::zeros(k);
        e[j] = 1.0;
        let g = algebra::su_embed(&SuCoordinates(e), env_dim)?;
        let lifted = algebra::su_project_matrix(&linalg::kron(&id, g.matrix())).0;
        env.set_column(j, &(lifted * norm));
    }
    let proj = DMatrix::identity(m, m) - &env * env.transpose();
    let (values, vectors) = linalg::eigh_real(&proj);
    let keep: Vec<usize> = (0..m).filter(|&i| values[i] > 0.5).collect();
    debug_assert_eq!(keep.len(), m - k);
    Ok(DMatrix::from_fn(m, keep.len(), |r, j| {
        vectors[(r, keep[j])]
    }))
}

/// The residual at one parameter vector.
#[derive(Debug, Clone)]
pub struct Residual {
    pub coords: DVector<f64>,
    /// `W = V† U(T)`.
    pub w: UnitaryMatrix,
    /// Eigenframe of the phase-aligned logarithm `log(e^{−iψ} W)`.
    pub log_frame: EigenFrame,
    /// The two shortest candidate logarithms have squared norms within
    /// [`BRANCH_TIE_TOLERANCE`] (relative), so the branch is ambiguous.
    pub branch_tie: bool,
}

impl Residual {
    /// `‖L‖₂`.
    pub fn geodesic_error(&self) -> f64 {
        self.coords.norm()
    }
}

/// Places the branch cut of the logarithm in one of the `N` gaps between the
/// eigenphases of `W`, choosing the gap that minimises the traceless norm
/// `Σ (θ_j − θ̄)²`, then rotates `W` by a global phase so that the cut sits at
/// `±π`. The choice depends only on the phase differences, so `W` and
/// `e^{iφ}W` get the same logarithm up to the dropped `iI` direction, and
/// the result is never longer than the principal branch, which is one of the
/// candidates.
fn align_phases(frame: &EigenFrame) -> (EigenFrame, bool) {
    use std::f64::consts::PI;
    let mut phases: Vec<f64> = frame.eigenvalues.iter().map(|z| z.im).collect();
    let n = phases.len();
    let mut sorted = phases.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // Cut after sorted[i]: sorted[..=i] move up by 2π.
    let spread = |i: usize| -> f64 {
        let lifted = |j: usize| sorted[j] + if j <= i { 2.0 * PI } else { 0.0 };
        let mean = (0..n).map(lifted).sum::<f64>() / n as f64;
        (0..n).map(|j| (lifted(j) - mean).powi(2)).sum()
    };
    let mut candidates: Vec<(f64, usize)> = (0..n).map(|i| (spread(i), i)).collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (best, cut) = candidates[0];
    let tie = n > 1 && candidates[1].0 - best <= BRANCH_TIE_TOLERANCE * best.max(1.0);
    let hi = if cut + 1 < n {
        sorted[cut + 1]
    } else {
        sorted[0] + 2.0 * PI
    };
    let shift = 0.5 * (sorted[cut] + hi) - PI;
    for p in phases.iter_mut() {
        let mut x = *p - shift;
        while x > PI {
            x -= 2.0 * PI;
        }
        while x <= -PI {
            x += 2.0 * PI;
        }
        *p = x;
    }
    let aligned = EigenFrame {
        eigenvalues: phases
            .into_iter()
            .map(|th| Complex64::new(0.0, th))
            .collect(),
        vectors: frame.vectors.clone(),
    };
    (aligned, tie)
}

#[derive(Debug, Clone)]
pub struct JacobianData {
    /// `m × R·K`, columns control-major.
    pub jacobian: DMatrix<f64>,
    pub residual: Residual,
}

/// `L = P log W` for `W = V† U(T)`, with the logarithm's branch fixed
/// relative to the eigenphases as in [`align_phases`].
pub fn residual_from_unitary(target: &TargetSpec, u: &CMatrix) -> Result<Residual> {
    if u.nrows() != target.dim() {
        return Err(Error::invalid(format!(
            "propagator is {0}x{0}, target is {1}x{1}",
            u.nrows(),
            target.dim()
        )));
    }
    let w = UnitaryMatrix::new(target.target().matrix().adjoint() * u)?;
    let (_, principal) = algebra::matrix_log_unitary(&w)?;
    let (frame, branch_tie) = align_phases(&principal);
    Ok(Residual {
        coords: target.project(&frame.reconstruct()),
        w,
        log_frame: frame,
        branch_tie,
    })
}

pub fn residual(target: &TargetSpec, prop: &PropagationResult) -> Result<Residual> {
    residual_from_unitary(target, prop.final_propagator())
}

/// Gate error `√((1 − |Tr V†U| / N) / 2)`, the minimum over global phases
/// of `‖U − e^{iφ}V‖_F / (2√N)`.
pub fn gate_error_hs(u: &CMatrix, v: &CMatrix) -> f64 {
    let n = u.nrows() as f64;
    let overlap = v
        .iter()
        .zip(u.iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>();
    ((1.0 - overlap.norm() / n) / 2.0).max(0.0).sqrt()
}

/// Gate error against a target spec. For subsystem targets `W ⊗ I` the
/// environment factor is free, and the minimum of `‖U − W ⊗ U_env‖_F /
/// (2√N)` over environment unitaries is `√((1 − ‖M‖_* / N) / 2)` with
/// `M = Tr_sys((W† ⊗ I) U)` and `‖·‖_*` the trace norm.
pub fn gate_error(target: &TargetSpec, u: &CMatrix) -> f64 {
    match target.projector() {
        Projector::FullSu => gate_error_hs(u, target.target().matrix()),
        Projector::Subsystem {
            system_dim,
            env_dim,
        } => {
            let n = (system_dim * env_dim) as f64;
            let x = target.target().matrix().adjoint() * u;
            let mut m = CMatrix::zeros(env_dim, env_dim);
            for s in 0..system_dim {
                m += x.view((s * env_dim, s * env_dim), (env_dim, env_dim));
            }
            let trace_norm: f64 = m.singular_values().iter().sum();
            ((1.0 - trace_norm / n) / 2.0).max(0.0).sqrt()
        }
    }
}

/// Propagation, residual and gate error at one parameter vector.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub propagation: PropagationResult,
    pub residual: Residual,
    pub gate_error: f64,
}

pub fn evaluate(
    system: &ControlSystem,
    basis: &PulseBasis,
    target: &TargetSpec,
    a: &ParameterVector,
) -> Result<Evaluation> {
    let propagation = propagation::propagate(system, basis, a)?;
    let residual = residual(target, &propagation)?;
    let gate_error = gate_error(target, propagation.final_propagator());
    Ok(Evaluation {
        propagation,
        residual,
        gate_error,
    })
}

/// Jacobian of `L` at the pulse that produced `prop`. Uses the closed-form
/// per-interval integrals when `prop` carries step eigenframes and the
/// Lobatto quadrature otherwise.
pub fn jacobian(
    system: &ControlSystem,
    basis: &PulseBasis,
    target: &TargetSpec,
    prop: &PropagationResult,
) -> Result<JacobianData> {
    if prop.step_frames.is_some() {
        jacobian_pwc_exact(system, basis, target, prop)
    } else {
        jacobian_lobatto(system, basis, target, prop)
    }
}

/// `P(dlog(W†·))` applied to `W†B = −iX`.
fn column_from_integral(
    target: &TargetSpec,
    frame: &EigenFrame,
    x: &CMatrix,
) -> Result<DVector<f64>> {
    let y = x * (-linalg::I);
    let d = algebra::dlog_pulled_back(frame, &y)?;
    Ok(target.project(&d))
}

/// Exact Jacobian for piecewise-constant pulses propagated one step per
/// interval. On interval `k` with step Hamiltonian `E diag(e) E†`,
/// `∫ U†H_rU dt = U_k† E (h Γ ∘ E†H_rE) E† U_k` with
/// `Γ_ab = γ(i(e_a − e_b)h)`.
pub fn jacobian_pwc_exact(
    system: &ControlSystem,
    basis: &PulseBasis,
    target: &TargetSpec,
    prop: &PropagationResult,
) -> Result<JacobianData> {
    let frames = prop
        .step_frames
        .as_ref()
        .ok_or_else(|| Error::invalid("exact Jacobian needs per-step eigenframes"))?;
    let k_len = basis.len();
    if frames.len() != k_len {
        return Err(Error::invalid(
            "one propagation step per interval is required",
        ));
    }
    let residual = residual(target, prop)?;
    let r_len = system.n_controls();
    let h = prop.step;

    let columns: Vec<Result<DVector<f64>>> = (0..r_len * k_len)
        .into_par_iter()
        .map(|col| {
            let (r, k) = (col / k_len, col % k_len);
            let frame = &frames[k];
            let e = &frame.vectors;
            let en = &frame.energies;
            let n = en.len();
            let weights = CMatrix::from_fn(n, n, |a, b| {
                algebra::gamma(linalg::I * ((en[a] - en[b]) * h)) * h
            });
            let inner = (e.adjoint() * &system.controls()[r] * e).component_mul(&weights);
            let uk = &prop.cumulative[k];
            let ue = uk.adjoint() * e;
            let x = &ue * inner * ue.adjoint();
            column_from_integral(target, &residual.log_frame, &x)
        })
        .collect();

    assemble(columns, target.residual_dim(), residual)
}

/// Jacobian by the composite three-point Lobatto rule on the propagation
/// grid, valid for any basis. Since `P∘dlog` is linear, it is applied once
/// per quadrature node and the basis weights are contracted afterwards.
pub fn jacobian_lobatto(
    system: &ControlSystem,
    basis: &PulseBasis,
    target: &TargetSpec,
    prop: &PropagationResult,
) -> Result<JacobianData> {
    let residual = residual(target, prop)?;
    let steps = prop.steps();
    let k_len = basis.len();
    let m = target.residual_dim();
    let h = prop.step;

    // weights[node, k]: node 2s is t_s, node 2s + 1 the midpoint of step s.
    let n_nodes = 2 * steps + 1;
    let mut weights = DMatrix::<f64>::zeros(n_nodes, k_len);
    for s in 0..steps {
        let (lo, hi) = (prop.times[s], prop.times[s + 1]);
        for (j, t) in [lo, 0.5 * (lo + hi), hi].into_iter().enumerate() {
            let b = basis.eval_all_in_step(t, lo, hi);
            let w = h * SIMPSON_WEIGHTS[j];
            for (k, bk) in b.into_iter().enumerate() {
                weights[(2 * s + j, k)] += w * bk;
            }
        }
    }

    let node_u = |i: usize| -> &CMatrix {
        if i.is_multiple_of(2) {
            &prop.cumulative[i / 2]
        } else {
            &prop.midpoints[i / 2]
        }
    };

    let mut jac = DMatrix::zeros(m, system.n_controls() * k_len);
    for (r, hr) in system.controls().iter().enumerate() {
        let z: Vec<Result<DVector<f64>>> = (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let u = node_u(i);
                column_from_integral(target, &residual.log_frame, &(u.adjoint() * hr * u))
            })
            .collect();
        let mut zm = DMatrix::zeros(m, n_nodes);
        for (i, col) in z.into_iter().enumerate() {
            zm.set_column(i, &col?);
        }
        let block = zm * &weights;
        jac.columns_mut(r * k_len, k_len).copy_from(&block);
    }
    check_finite(&jac)?;
    Ok(JacobianData {
        jacobian: jac,
        residual,
    })
}

fn assemble(
    columns: Vec<Result<DVector<f64>>>,
    m: usize,
    residual: Residual,
) -> Result<JacobianData> {
    let mut jac = DMatrix::zeros(m, columns.len());
    for (j, col) in columns.into_iter().enumerate() {
        jac.set_column(j, &col?);
    }
    check_finite(&jac)?;
    Ok(JacobianData {
        jacobian: jac,
        residual,
    })
}

fn check_finite(jac: &DMatrix<f64>) -> Result<()> {
    if jac.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("Jacobian has non-finite entries"))
    }
}

/// `‖Jᵀ(JJᵀ)⁻¹L‖`, the norm of the minimum-norm solution of `Jp = −L`.
///
/// Eigenvalues of `JJᵀ` below `1e−14·Tr(JJᵀ)/m` count as zero; if `L` has a
/// component of relative size above `1e−6` in that null space the result
/// is `+∞`.
pub fn ill_conditioning(jd: &JacobianData) -> f64 {
    min_norm_solution_norm(&jd.jacobian, &jd.residual.coords)
}

pub fn min_norm_solution_norm(j: &DMatrix<f64>, l: &DVector<f64>) -> f64 {
    let l_norm = l.norm();
    if l_norm == 0.0 {
        return 0.0;
    }
    let m = j.nrows();
    let gram = j * j.transpose();
    let floor = 1e-14 * gram.trace() / m as f64;
    let (d, q) = linalg::eigh_real(&gram);
    let coeffs = q.tr_mul(l);
    let mut outside = 0.0;
    let mut sum = 0.0;
    for i in 0..m {
        if d[i] > floor {
            sum += coeffs[i] * coeffs[i] / d[i];
        } else {
            outside += coeffs[i] * coeffs[i];
        }
    }
    if outside.sqrt() > 1e-6 * l_norm {
        f64::INFINITY
    } else {
        sum.sqrt()
    }
}

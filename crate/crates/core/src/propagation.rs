//! Discretised propagators `U_a(t)` on a uniform time grid.
//!
//! Piecewise-constant pulses are stepped exactly, one matrix exponential per
//! interval, keeping each step's eigenframe for the Jacobian. General bases
//! use the fourth-order two-node Magnus integrator. Either way the values of
//! `U` at step midpoints come from cubic Hermite interpolation, since they
//! only feed the three-point quadrature.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen};
use crate::model::{
    amplitudes_from_values, synthesize, BasisKind, ControlSystem, ParameterVector, PulseBasis,
};

/// Minimum steps per basis function used for non-piecewise-constant bases.
pub const DEFAULT_STEPS_PER_BASIS_FUNCTION: usize = 4;

/// Upper bound on `h·‖H(t)‖₂` for the default Magnus step count.
pub const MAX_STEP_PHASE: f64 = 0.05;

/// Eigendecomposition of the constant Hamiltonian of one step.
#[derive(Debug, Clone)]
pub struct StepFrame {
    pub energies: DVector<f64>,
    pub vectors: CMatrix,
}

impl From<HermitianEigen> for StepFrame {
    fn from(e: HermitianEigen) -> Self {
        StepFrame {
            energies: e.values,
            vectors: e.vectors,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// `t_0 = 0 < t_1 < … < t_S = T`.
    pub times: Vec<f64>,
    pub step: f64,
    /// `U(t_s, t_{s−1})`, one per step.
    pub step_propagators: Vec<CMatrix>,
    /// `U(t_s)`, with `U(t_0) = I`.
    pub cumulative: Vec<CMatrix>,
    /// Interpolated `U` at the midpoint of each step.
    pub midpoints: Vec<CMatrix>,
    /// Per-step eigenframes; present only for exact piecewise-constant
    /// stepping with one step per interval.
    pub step_frames: Option<Vec<StepFrame>>,
}

impl PropagationResult {
    pub fn steps(&self) -> usize {
        self.step_propagators.len()
    }

    /// `U(T)`.
    pub fn final_propagator(&self) -> &CMatrix {
        self.cumulative
            .last()
            .expect("at least the initial propagator")
    }

    fn assemble(
        times: Vec<f64>,
        step: f64,
        step_propagators: Vec<CMatrix>,
        endpoint_hamiltonians: &[(CMatrix, CMatrix)],
        step_frames: Option<Vec<StepFrame>>,
    ) -> Result<Self> {
        let n = step_propagators[0].nrows();
        let mut cumulative = Vec::with_capacity(step_propagators.len() + 1);
        cumulative.push(linalg::identity(n));
        for (s, u) in step_propagators.iter().enumerate() {
            let next = u * &cumulative[s];
            if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::NonFinitePropagation(s));
            }
            cumulative.push(next);
        }
        let midpoints = endpoint_hamiltonians
            .iter()
            .enumerate()
            .map(|(s, (h0, h1))| {
                midpoint_interpolate(&cumulative[s], h0, &cumulative[s + 1], h1, step)
            })
            .collect();
        Ok(PropagationResult {
            times,
            step,
            step_propagators,
            cumulative,
            midpoints,
            step_frames,
        })
    }
}

fn check_params(system: &ControlSystem, basis: &PulseBasis, a: &ParameterVector) -> Result<()> {
    let expected = system.n_controls() * basis.len();
    if a.len() != expected {
        return Err(Error::invalid(format!(
            "parameter vector has length {}, expected R·K = {expected}",
            a.len()
        )));
    }
    if !a.is_finite() {
        return Err(Error::invalid("parameter vector has non-finite entries"));
    }
    Ok(())
}

fn uniform_grid(duration: f64, steps: usize) -> (Vec<f64>, f64) {
    let h = duration / steps as f64;
    ((0..=steps).map(|s| s as f64 * h).collect(), h)
}

/// Propagates with the default scheme for the basis: exact stepping for
/// piecewise-constant pulses, Magnus-4 with `4K` steps otherwise.
pub fn propagate(
    system: &ControlSystem,
    basis: &PulseBasis,
    a: &ParameterVector,
) -> Result<PropagationResult> {
    match basis.kind() {
        BasisKind::PiecewiseConstant => propagate_pwc(system, basis, a),
        BasisKind::Hermite => propagate_magnus4(system, basis, a, default_steps(system, basis, a)),
    }
}

/// Step count for Magnus propagation of a smooth pulse: at least `4K`, at
/// most [`MAX_STEP_PHASE`] radians of `‖H(t)‖₂` per step, and small enough
/// that the fourth-derivative error term `T·h⁴·max‖H⁗‖/4320` stays below
/// `1e−10`. Amplitudes and their derivatives are sampled on an `8K`-point
/// grid.
pub fn default_steps(system: &ControlSystem, basis: &PulseBasis, a: &ParameterVector) -> usize {
    let spectral = |h: &CMatrix| {
        let v = linalg::eigh(h).values;
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    };
    let k = basis.len();
    let duration = basis.duration();
    let samples = 8 * k;
    let dt = duration / samples as f64;
    let values: Vec<Vec<f64>> = (0..=samples)
        .map(|i| synthesize(basis, a, i as f64 * dt))
        .collect();
    let norms: Vec<f64> = system.controls().iter().map(spectral).collect();
    let mut peak = 0.0f64;
    let mut fourth = 0.0f64;
    for i in 0..=samples {
        peak = peak.max(values[i].iter().zip(&norms).map(|(f, n)| f.abs() * n).sum());
        if (2..=samples.saturating_sub(2)).contains(&i) {
            let d4: f64 = (0..norms.len())
                .map(|r| {
                    let f = |j: usize| values[j][r];
                    let diff = f(i - 2) - 4.0 * f(i - 1) + 6.0 * f(i) - 4.0 * f(i + 1) + f(i + 2);
                    (diff / dt.powi(4)).abs() * norms[r]
                })
                .sum();
            fourth = fourth.max(d4);
        }
    }
    let omega = spectral(system.drift()) + peak;
    let by_phase = duration * omega / MAX_STEP_PHASE;
    let by_smoothness = duration * (duration * fourth / (4320.0 * 1e-10)).powf(0.25);
    let s = by_phase.max(by_smoothness).ceil().min(1e8) as usize;
    (DEFAULT_STEPS_PER_BASIS_FUNCTION * k).max(s)
}

/// Exact stepping of a piecewise-constant pulse, one step per interval.
pub fn propagate_pwc(
    system: &ControlSystem,
    basis: &PulseBasis,
    a: &ParameterVector,
) -> Result<PropagationResult> {
    if basis.kind() != BasisKind::PiecewiseConstant {
        return Err(Error::invalid(
            "exact stepping needs a piecewise-constant basis",
        ));
    }
    check_params(system, basis, a)?;
    let k = basis.len();
    let r = system.n_controls();
    let (times, h) = uniform_grid(basis.duration(), k);

    let steps: Vec<(CMatrix, StepFrame, CMatrix)> = (0..k)
        .into_par_iter()
        .map(|s| {
            let amps: Vec<f64> = (0..r).map(|ri| a.get(ri, s, k)).collect();
            let ham = system.hamiltonian(&amps);
            let eig = linalg::eigh(&ham);
            let u = linalg::expi_from_eigen(&eig, h);
            (u, eig.into(), ham)
        })
        .collect();

    let mut props = Vec::with_capacity(k);
    let mut frames = Vec::with_capacity(k);
    let mut endpoints = Vec::with_capacity(k);
    for (u, frame, ham) in steps {
        props.push(u);
        frames.push(frame);
        endpoints.push((ham.clone(), ham));
    }
    PropagationResult::assemble(times, h, props, &endpoints, Some(frames))
}

/// Fourth-order Magnus stepping with `steps` uniform steps.
///
/// With `A(t) = −iH(t)` sampled at the Gauss-Legendre nodes
/// `t_{s−1} + (1/2 ∓ √3/6) h`, each step is
/// `exp((h/2)(A₁ + A₂) + (√3 h²/12)[A₂, A₁])`.
pub fn propagate_magnus4(
    system: &ControlSystem,
    basis: &PulseBasis,
    a: &ParameterVector,
    steps: usize,
) -> Result<PropagationResult> {
    if steps == 0 {
        return Err(Error::invalid("Magnus propagation needs at least one step"));
    }
    check_params(system, basis, a)?;
    let (times, h) = uniform_grid(basis.duration(), steps);
    let offset = 3f64.sqrt() / 6.0;

    let results: Vec<(CMatrix, (CMatrix, CMatrix))> = (0..steps)
        .into_par_iter()
        .map(|s| {
            let (lo, hi) = (times[s], times[s + 1]);
            let ham_at = |t: f64| {
                let b = basis.eval_all_in_step(t, lo, hi);
                system.hamiltonian(&amplitudes_from_values(basis, a, &b))
            };
            let h1 = ham_at(lo + (0.5 - offset) * h);
            let h2 = ham_at(lo + (0.5 + offset) * h);
            let u = magnus4_step(&h1, &h2, h);
            (u, (ham_at(lo), ham_at(hi)))
        })
        .collect();

    let (props, endpoints): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    PropagationResult::assemble(times, h, props, &endpoints, None)
}

/// One Magnus-4 step from the Hamiltonians at the two Gauss nodes.
pub fn magnus4_step(h1: &CMatrix, h2: &CMatrix, h: f64) -> CMatrix {
    // With A = −iH: (h/2)(A₁+A₂) + (√3h²/12)[A₂,A₁] = −i[(h/2)(H₁+H₂) + i(√3h²/12)[H₁,H₂]]
    let comm = linalg::commutator(h1, h2);
    let k = (h1 + h2) * c(0.5 * h) + comm * (linalg::I * (3f64.sqrt() * h * h / 12.0));
    let eig = linalg::eigh(&k);
    linalg::expi_from_eigen(&eig, 1.0)
}

/// Cubic Hermite interpolant of `U` at the midpoint of a step, from the
/// endpoint values and derivatives `U' = −iHU`:
/// `(U₀ + U₁)/2 + (h/8)(U₀' − U₁')`. Not re-unitarised.
pub fn midpoint_interpolate(
    u0: &CMatrix,
    h0: &CMatrix,
    u1: &CMatrix,
    h1: &CMatrix,
    h: f64,
) -> CMatrix {
    let d0 = (h0 * u0) * (-linalg::I);
    let d1 = (h1 * u1) * (-linalg::I);
    (u0 + u1) * c(0.5) + (d0 - d1) * c(h / 8.0)
}

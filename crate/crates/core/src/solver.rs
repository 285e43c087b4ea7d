//! Newton-Raphson trust-region driver, initial-norm selection and the
//! BFGS-GRAPE baseline.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::algebra::UnitaryMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{
    pulse_norm, random_pulse, BasisKind, ControlSystem, ParameterVector, ProblemSpec, PulseBasis,
};
use crate::objective::{self, Evaluation, JacobianData};
use crate::propagation;
use crate::trustregion::{self, RadiusState, MIN_RADIUS};

/// Consecutive rejected steps at the minimum radius before giving up.
pub const MAX_REJECTIONS_AT_MIN_RADIUS: usize = 10;

/// Floor on the initial trust radius.
pub const MIN_INITIAL_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Stalled,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "Converged",
            Status::MaxIterations => "MaxIterations",
            Status::Stalled => "Stalled",
        }
    }
}

/// One row of the iteration log. Record 0 describes the initial pulse.
/// Rejected trial steps get their own rows, carrying the unchanged errors of
/// the current iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Accepted iterations so far.
    pub index: usize,
    pub gate_error: f64,
    pub geodesic_error: f64,
    pub pulse_norm: f64,
    /// Trust radius after the update (Newton) or step length (BFGS).
    pub radius: f64,
    /// Relative model error of the step; NaN where undefined.
    pub ratio: f64,
    pub accepted: bool,
    pub wall_seconds: f64,
    pub propagations: usize,
}

impl IterationRecord {
    /// Equality ignoring the wall-clock field.
    pub fn same_outcome(&self, other: &IterationRecord) -> bool {
        let eq = |a: f64, b: f64| a == b || (a.is_nan() && b.is_nan());
        self.index == other.index
            && eq(self.gate_error, other.gate_error)
            && eq(self.geodesic_error, other.geodesic_error)
            && eq(self.pulse_norm, other.pulse_norm)
            && eq(self.radius, other.radius)
            && eq(self.ratio, other.ratio)
            && self.accepted == other.accepted
            && self.propagations == other.propagations
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub problem: String,
    pub algorithm: &'static str,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub final_params: ParameterVector,
    pub status: Status,
}

impl SolveReport {
    pub fn final_record(&self) -> &IterationRecord {
        self.records
            .last()
            .expect("reports hold the initial record")
    }

    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.final_record().index
    }

    /// Accepted records only, starting with the initial one.
    pub fn accepted(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.accepted)
    }

    /// Accepted iterations needed to bring the gate error to `eps`.
    pub fn iterations_to(&self, eps: f64) -> Option<usize> {
        self.accepted()
            .find(|r| r.gate_error <= eps)
            .map(|r| r.index)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Maximum number of accepted iterations.
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 200,
            seed: 0,
        }
    }
}

struct Tracker<'a> {
    problem: &'a ProblemSpec,
    start: Instant,
    propagations: usize,
    records: Vec<IterationRecord>,
}

impl<'a> Tracker<'a> {
    fn new(problem: &'a ProblemSpec) -> Self {
        Tracker {
            problem,
            start: Instant::now(),
            propagations: 0,
            records: Vec::new(),
        }
    }

    fn evaluate(&mut self, a: &ParameterVector) -> Result<Evaluation> {
        self.propagations += 1;
        let p = self.problem;
        objective::evaluate(&p.system, &p.basis, &p.target, a)
    }

    fn record(
        &mut self,
        index: usize,
        eval: &Evaluation,
        a: &ParameterVector,
        radius: f64,
        ratio: f64,
        accepted: bool,
    ) {
        self.records.push(IterationRecord {
            index,
            gate_error: eval.gate_error,
            geodesic_error: eval.residual.geodesic_error(),
            pulse_norm: pulse_norm(&self.problem.basis, a),
            radius,
            ratio,
            accepted,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            propagations: self.propagations,
        });
    }
}

fn jacobian_at(problem: &ProblemSpec, eval: &Evaluation) -> Result<JacobianData> {
    objective::jacobian(
        &problem.system,
        &problem.basis,
        &problem.target,
        &eval.propagation,
    )
}

fn check_start(problem: &ProblemSpec, a0: &ParameterVector) -> Result<()> {
    if a0.len() != problem.n_params() {
        return Err(Error::invalid(format!(
            "initial pulse has {} parameters, problem needs {}",
            a0.len(),
            problem.n_params()
        )));
    }
    Ok(())
}

/// `min(‖a⁰‖/10, ill-conditioning)`, floored at [`MIN_INITIAL_RADIUS`].
pub fn initial_radius(a0: &ParameterVector, ill_conditioning: f64) -> f64 {
    (a0.norm() / 10.0)
        .min(ill_conditioning)
        .max(MIN_INITIAL_RADIUS)
}

/// Newton-Raphson iteration `a ← a + p` with trust-region steps.
pub fn newton_raphson_solve(
    problem: &ProblemSpec,
    a0: &ParameterVector,
    options: SolveOptions,
) -> Result<SolveReport> {
    check_start(problem, a0)?;
    let mut tracker = Tracker::new(problem);
    let mut a = a0.clone();
    let mut eval = tracker.evaluate(&a)?;

    let finish = |tracker: Tracker, a: ParameterVector, status| SolveReport {
        problem: problem.name.clone(),
        algorithm: "newton",
        seed: options.seed,
        records: tracker.records,
        final_params: a,
        status,
    };

    if eval.gate_error <= problem.tolerance {
        tracker.record(0, &eval, &a, f64::NAN, f64::NAN, true);
        return Ok(finish(tracker, a, Status::Converged));
    }
    let mut jd = jacobian_at(problem, &eval)?;
    let mut state = RadiusState::new(initial_radius(&a, objective::ill_conditioning(&jd)));
    tracker.record(0, &eval, &a, state.radius, f64::NAN, true);

    let mut accepted = 0;
    let mut stuck = 0;
    while accepted < options.max_iter {
        let step = trustregion::newton_step(&jd.jacobian, &jd.residual.coords, state.radius)?;
        let step_norm = step.step.norm();
        if step_norm == 0.0 {
            return Ok(finish(tracker, a, Status::Stalled));
        }
        let trial = ParameterVector(&a.0 + &step.step);
        let current = jd.residual.coords.norm_squared();
        let model_decrease = current - step.model_value;
        let trial_eval = tracker.evaluate(&trial);
        let actual_decrease = match &trial_eval {
            Ok(e) => current - e.residual.coords.norm_squared(),
            Err(_) => f64::NEG_INFINITY,
        };
        let next = trustregion::adapt_radius(state, model_decrease, actual_decrease);

        if next.accepted {
            accepted += 1;
            stuck = 0;
            a = trial;
            eval = trial_eval?;
            state = next;
            tracker.record(accepted, &eval, &a, state.radius, state.last_ratio, true);
            if eval.gate_error <= problem.tolerance {
                return Ok(finish(tracker, a, Status::Converged));
            }
            jd = jacobian_at(problem, &eval)?;
        } else {
            let at_floor = state.radius <= MIN_RADIUS;
            state = RadiusState {
                radius: (state.radius.min(step_norm) / 4.0).max(MIN_RADIUS),
                ..next
            };
            tracker.record(accepted, &eval, &a, state.radius, f64::NAN, false);
            stuck = if at_floor { stuck + 1 } else { 0 };
            if stuck >= MAX_REJECTIONS_AT_MIN_RADIUS {
                return Ok(finish(tracker, a, Status::Stalled));
            }
        }
    }
    Ok(finish(tracker, a, Status::MaxIterations))
}

/// Result of the initial-norm search.
#[derive(Debug, Clone)]
pub struct NormSearch {
    pub best_norm: f64,
    /// `(norm, median ill-conditioning)` for every grid point.
    pub curve: Vec<(f64, f64)>,
}

/// Geometric grid of `size` norms from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    if size == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..size)
        .map(|i| lo * (ratio * i as f64 / (size - 1) as f64).exp())
        .collect()
}

/// Search grid for the initial norm: `[B/100, 4B/5]` under a fluence bound,
/// otherwise four decades centred on `√T·‖H₀‖/max_r‖H_r‖`.
pub fn initial_norm_grid(problem: &ProblemSpec, bound: Option<f64>, size: usize) -> Vec<f64> {
    match bound {
        Some(b) => geometric_grid(b / 100.0, 0.8 * b, size),
        None => {
            let centre = heuristic_norm(&problem.system, &problem.basis);
            geometric_grid(centre / 100.0, centre * 100.0, size)
        }
    }
}

fn spectral_norm(h: &linalg::CMatrix) -> f64 {
    linalg::eigh(h)
        .values
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
}

fn heuristic_norm(system: &ControlSystem, basis: &PulseBasis) -> f64 {
    let drift = spectral_norm(system.drift()).max(1.0);
    let control = system
        .controls()
        .iter()
        .map(spectral_norm)
        .fold(0.0f64, f64::max)
        .max(1e-12);
    basis.duration().sqrt() * drift / control
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median ill-conditioning over `samples` random pulses of norm `rho`; the
/// pulse directions depend only on `seed`, so they are shared across norms.
pub fn median_ill_conditioning(
    problem: &ProblemSpec,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let r = problem.system.n_controls();
    let mut values = (0..samples)
        .map(|j| {
            let a = random_pulse(&problem.basis, r, rho, seed.wrapping_add(j as u64));
            let eval = objective::evaluate(&problem.system, &problem.basis, &problem.target, &a)?;
            let jd = jacobian_at(problem, &eval)?;
            Ok(objective::ill_conditioning(&jd))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(median(&mut values))
}

/// The norm minimising the median ill-conditioning on the search grid.
pub fn find_best_initial_norm(
    problem: &ProblemSpec,
    bound: Option<f64>,
    grid_size: usize,
    samples_per_norm: usize,
    seed: u64,
) -> Result<NormSearch> {
    if grid_size == 0 || samples_per_norm == 0 {
        return Err(Error::invalid(
            "grid size and samples per norm must be positive",
        ));
    }
    if let Some(b) = bound {
        if !(b > 0.0) {
            return Err(Error::invalid("fluence bound must be positive"));
        }
    }
    let grid = initial_norm_grid(problem, bound, grid_size);
    let curve = grid
        .par_iter()
        .map(|&rho| {
            Ok((
                rho,
                median_ill_conditioning(problem, rho, samples_per_norm, seed)?,
            ))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let best = curve
        .iter()
        .filter(|(_, v)| v.is_finite())
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or(Error::NoFiniteConditioning)?;
    Ok(NormSearch {
        best_norm: best.0,
        curve,
    })
}

/// A smooth random pulse of integrated-power norm `rho`: each control is a
/// random combination of the first four sine modes on `[0, T]` (sampled at
/// interval midpoints) or of the first four Hermite functions.
pub fn smooth_random_pulse(
    basis: &PulseBasis,
    n_controls: usize,
    rho: f64,
    seed: u64,
) -> ParameterVector {
    const MODES: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = basis.len();
    let mut a = ParameterVector::zeros(n_controls, k);
    for r in 0..n_controls {
        let coeffs: Vec<f64> = (0..MODES).map(|_| rng.sample(StandardNormal)).collect();
        match basis.kind() {
            BasisKind::PiecewiseConstant => {
                for i in 0..k {
                    let x = (i as f64 + 0.5) / k as f64;
                    a.0[r * k + i] = coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * x).sin())
                        .sum();
                }
            }
            BasisKind::Hermite => {
                for (j, c) in coeffs.iter().enumerate().take(k) {
                    a.0[r * k + j] = *c;
                }
            }
        }
    }
    let norm = pulse_norm(basis, &a);
    if rho == 0.0 || norm == 0.0 {
        return ParameterVector::zeros(n_controls, k);
    }
    ParameterVector(a.0 * (rho / norm))
}

/// `U(T)` of a smooth random pulse, a target that is reachable by
/// construction.
pub fn reachable_target(
    system: &ControlSystem,
    basis: &PulseBasis,
    rho: f64,
    seed: u64,
) -> Result<UnitaryMatrix> {
    let a = smooth_random_pulse(basis, system.n_controls(), rho, seed);
    let prop = propagation::propagate(system, basis, &a)?;
    UnitaryMatrix::new(prop.final_propagator().clone())
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Function evaluations per line search.
    pub max_trials: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 200,
            c1: 1e-4,
            c2: 0.9,
            max_trials: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub status: Status,
}

/// Quasi-Newton minimisation with inverse-Hessian BFGS updates and a
/// weak-Wolfe bracketing line search.
///
/// `f` returns the value and gradient together with an auxiliary payload
/// handed to `converged`, which is consulted at the start point and after
/// every iteration.
pub fn bfgs_minimize<T>(
    mut f: impl FnMut(&DVector<f64>) -> Result<(f64, DVector<f64>, T)>,
    x0: DVector<f64>,
    options: BfgsOptions,
    mut converged: impl FnMut(usize, &DVector<f64>, f64, f64, &T) -> bool,
) -> Result<BfgsOutcome> {
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut g, aux) = f(&x)?;
    let outcome = |x, value, gradient, iterations, status| BfgsOutcome {
        x,
        value,
        gradient,
        iterations,
        status,
    };
    if converged(0, &x, fx, 0.0, &aux) {
        return Ok(outcome(x, fx, g, 0, Status::Converged));
    }
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;

    for iter in 1..=options.max_iter {
        if g.norm() == 0.0 {
            return Ok(outcome(x, fx, g, iter - 1, Status::Stalled));
        }
        let mut d = -(&h_inv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            d = -g.clone();
            slope = -g.norm_squared();
        }

        let (mut lo, mut hi) = (0.0, f64::INFINITY);
        let mut alpha = 1.0;
        let mut found = None;
        for _ in 0..options.max_trials {
            let xt = &x + &d * alpha;
            let (ft, gt, aux_t) = f(&xt)?;
            if !(ft <= fx + options.c1 * alpha * slope) {
                hi = alpha;
            } else if gt.dot(&d) < options.c2 * slope {
                lo = alpha;
            } else {
                found = Some((xt, ft, gt, aux_t));
                break;
            }
            alpha = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * alpha
            };
        }
        let Some((xn, fn_, gn, aux_n)) = found else {
            return Ok(outcome(x, fx, g, iter - 1, Status::Stalled));
        };

        let s = &xn - &x;
        let y = &gn - &g;
        let sy = s.dot(&y);
        if sy > 0.0 {
            if !scaled {
                h_inv *= sy / y.norm_squared();
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ, expanded
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let step = s.norm();
        x = xn;
        fx = fn_;
        g = gn;
        if converged(iter, &x, fx, step, &aux_n) {
            return Ok(outcome(x, fx, g, iter, Status::Converged));
        }
    }
    Ok(outcome(x, fx, g, options.max_iter, Status::MaxIterations))
}

/// BFGS-GRAPE on `‖L(a)‖²` with gradient `2JᵀL`, stopping on the gate
/// error.
pub fn bfgs_grape_solve(
    problem: &ProblemSpec,
    a0: &ParameterVector,
    options: SolveOptions,
) -> Result<SolveReport> {
    check_start(problem, a0)?;
    let tracker = std::cell::RefCell::new(Tracker::new(problem));
    let value = |x: &DVector<f64>| -> Result<(f64, DVector<f64>, Evaluation)> {
        let a = ParameterVector(x.clone());
        let eval = tracker.borrow_mut().evaluate(&a)?;
        let jd = jacobian_at(problem, &eval)?;
        let l = &jd.residual.coords;
        Ok((l.norm_squared(), jd.jacobian.tr_mul(l) * 2.0, eval))
    };
    let converged = |iter: usize, x: &DVector<f64>, _f: f64, step: f64, eval: &Evaluation| {
        let a = ParameterVector(x.clone());
        let radius = if iter == 0 { f64::NAN } else { step };
        tracker
            .borrow_mut()
            .record(iter, eval, &a, radius, f64::NAN, true);
        eval.gate_error <= problem.tolerance
    };
    let bfgs = BfgsOptions {
        max_iter: options.max_iter,
        ..BfgsOptions::default()
    };
    let out = bfgs_minimize(value, a0.0.clone(), bfgs, converged)?;
    Ok(SolveReport {
        problem: problem.name.clone(),
        algorithm: "bfgs",
        seed: options.seed,
        records: tracker.into_inner().records,
        final_params: ParameterVector(out.x),
        status: out.status,
    })
}

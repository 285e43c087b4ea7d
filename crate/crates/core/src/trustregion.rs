//! Trust-region subproblem `min xᵀAx + 2gᵀx` over `‖x‖ ≤ r`, the
//! Newton-Raphson step built on it, and the radius controller.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

pub const MIN_RADIUS: f64 = 1e-12;
pub const MAX_RADIUS: f64 = 1e6;

/// Lower and upper edge of the target band for the relative model error.
pub const RATIO_BAND: (f64, f64) = (0.2, 0.3);

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub step: DVector<f64>,
    /// Multiplier of the ball constraint, `≤ 0`; zero for interior solutions.
    pub lambda: f64,
    /// For [`solve_tr_subproblem`] the quadratic `xᵀAx + 2gᵀx`; for
    /// [`newton_step`] the predicted error `‖L + Jp‖²`.
    pub model_value: f64,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusState {
    pub radius: f64,
    /// Relative model error of the last trial step; NaN before the first.
    pub last_ratio: f64,
    pub accepted: bool,
}

impl RadiusState {
    pub fn new(radius: f64) -> Self {
        RadiusState {
            radius: radius.clamp(MIN_RADIUS, MAX_RADIUS),
            last_ratio: f64::NAN,
            accepted: true,
        }
    }
}

struct DiagonalSolution {
    x: DVector<f64>,
    mu: f64,
    on_boundary: bool,
}

/// Global minimiser of `Σ d_i x_i² + 2 c_i x_i` over `‖x‖ ≤ r` for `d ≥ 0`.
fn solve_diagonal(d: &DVector<f64>, c: &DVector<f64>, r: f64) -> DiagonalSolution {
    let n = d.len();
    let d_max = d.iter().cloned().fold(0.0, f64::max);
    let zero = 1e-12 * d_max;
    let c_norm = c.norm();
    if c_norm == 0.0 {
        return DiagonalSolution {
            x: DVector::zeros(n),
            mu: 0.0,
            on_boundary: false,
        };
    }

    let null_part: f64 = (0..n)
        .filter(|&i| d[i] <= zero)
        .map(|i| c[i] * c[i])
        .sum::<f64>()
        .sqrt();
    if null_part <= 1e-10 * c_norm {
        let x = DVector::from_fn(n, |i, _| if d[i] > zero { -c[i] / d[i] } else { 0.0 });
        if x.norm() <= r {
            return DiagonalSolution {
                x,
                mu: 0.0,
                on_boundary: false,
            };
        }
    }

    let norm_at = |mu: f64| -> f64 {
        (0..n)
            .map(|i| {
                let den = d[i] + mu;
                if c[i] == 0.0 {
                    0.0
                } else {
                    (c[i] / den).powi(2)
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let d_min = d.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lo = (0..n).map(|i| c[i].abs() / r - d[i]).fold(0.0, f64::max);
    let mut hi = c_norm / r - d_min;
    let mut mu = if lo > 0.0 { lo } else { hi };
    for _ in 0..200 {
        let nrm = norm_at(mu);
        let f = 1.0 / nrm - 1.0 / r;
        if (nrm - r).abs() <= 1e-14 * r || hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
        if f < 0.0 {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        let deriv: f64 = (0..n)
            .map(|i| c[i] * c[i] / (d[i] + mu).powi(3))
            .sum::<f64>()
            / nrm.powi(3);
        let next = mu - f / deriv;
        mu = if next.is_finite() && next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    let x = DVector::from_fn(n, |i, _| {
        if c[i] == 0.0 {
            0.0
        } else {
            -c[i] / (d[i] + mu)
        }
    });
    // Rescale away the last rounding so feasibility holds exactly.
    let x = if x.norm() > r { &x * (r / x.norm()) } else { x };
    DiagonalSolution {
        x,
        mu,
        on_boundary: true,
    }
}

fn quadratic(a: &DMatrix<f64>, g: &DVector<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x)) + 2.0 * g.dot(x)
}

/// Global minimiser of `xᵀAx + 2gᵀx` over `‖x‖ ≤ r` for symmetric PSD `A`.
pub fn solve_tr_subproblem(
    a: &DMatrix<f64>,
    g: &DVector<f64>,
    r: f64,
) -> Result<SubproblemSolution> {
    let n = g.len();
    if a.shape() != (n, n) {
        return Err(Error::invalid(format!(
            "A is {}x{}, g has length {n}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let (mut d, q) = linalg::eigh_real(a);
    let scale = d.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if n > 0 && d[0] < -1e-10 * scale {
        return Err(Error::invalid(format!(
            "A is not positive semidefinite: eigenvalue {:e}",
            d[0]
        )));
    }
    d.apply(|x| *x = x.max(0.0));
    let c = q.tr_mul(g);
    let sol = solve_diagonal(&d, &c, r);
    let step = &q * &sol.x;
    let model_value = quadratic(a, g, &step);
    Ok(SubproblemSolution {
        step,
        lambda: -sol.mu,
        model_value,
        on_boundary: sol.on_boundary,
    })
}

/// Newton-Raphson step: minimises `‖L + Jp‖²` over `‖p‖ ≤ r`.
///
/// When `J` is wide (`m < M`) the problem is solved for `p = Jᵀy` in the
/// eigenbasis of `JJᵀ`, so only `m × m` matrices are factored.
pub fn newton_step(j: &DMatrix<f64>, l: &DVector<f64>, r: f64) -> Result<SubproblemSolution> {
    let (m, big_m) = j.shape();
    if l.len() != m {
        return Err(Error::invalid(format!(
            "residual has length {}, Jacobian has {m} rows",
            l.len()
        )));
    }
    if !(r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let l2 = l.norm_squared();
    if j.iter().all(|&x| x == 0.0) {
        if l2 > 0.0 {
            return Err(Error::DegenerateModel);
        }
        return Ok(SubproblemSolution {
            step: DVector::zeros(big_m),
            lambda: 0.0,
            model_value: 0.0,
            on_boundary: false,
        });
    }

    let sol = if m >= big_m {
        let a = j.tr_mul(j);
        let g = j.tr_mul(l);
        solve_tr_subproblem(&a, &g, r)?
    } else {
        let gram = j * j.transpose();
        let floor = 1e-14 * gram.trace() / m as f64;
        let (mut d, q) = linalg::eigh_real(&gram);
        d.apply(|x| {
            if *x <= floor {
                *x = 0.0
            }
        });
        let sqrt_d = d.map(f64::sqrt);
        let c = (q.tr_mul(l)).component_mul(&sqrt_d);
        let sol = solve_diagonal(&d, &c, r);
        let y_eig = DVector::from_fn(m, |i, _| {
            if d[i] > 0.0 {
                sol.x[i] / sqrt_d[i]
            } else {
                0.0
            }
        });
        let step = j.tr_mul(&(&q * y_eig));
        SubproblemSolution {
            step,
            lambda: -sol.mu,
            model_value: 0.0,
            on_boundary: sol.on_boundary,
        }
    };
    let predicted = (j * &sol.step + l).norm_squared();
    Ok(SubproblemSolution {
        model_value: predicted,
        ..sol
    })
}

/// Radius update from the predicted and realised decrease of `‖L‖²`.
///
/// A step that does not decrease the error is rejected and `r` quartered.
/// Otherwise the relative model error
/// `q = (model_decrease − actual_decrease) / |actual_decrease|` is compared
/// with [`RATIO_BAND`]: below it `r` doubles, above it `r` halves.
pub fn adapt_radius(state: RadiusState, model_decrease: f64, actual_decrease: f64) -> RadiusState {
    if !(actual_decrease > 0.0) {
        return RadiusState {
            radius: (state.radius / 4.0).clamp(MIN_RADIUS, MAX_RADIUS),
            last_ratio: f64::NAN,
            accepted: false,
        };
    }
    let ratio = (model_decrease - actual_decrease) / actual_decrease.abs();
    let radius = if ratio < RATIO_BAND.0 {
        state.radius * 2.0
    } else if ratio > RATIO_BAND.1 {
        state.radius / 2.0
    } else {
        state.radius
    };
    RadiusState {
        radius: radius.clamp(MIN_RADIUS, MAX_RADIUS),
        last_ratio: ratio,
        accepted: true,
    }
}

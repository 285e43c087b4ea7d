use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use qgate_core::model::{amplitudes_from_values, ParameterVector, PulseBasis};
use rustfft::FftPlanner;

use crate::output::fmt_f64;

/// Power spectra `|f̂_r(ω)|²` of every control on an angular-frequency grid
/// symmetric about zero. `f̂(ω) = ∫ f(t) e^{−iωt} dt`, approximated by a
/// Riemann sum over the time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub omega: Vec<f64>,
    /// `power[r][i]` belongs to `omega[i]`.
    pub power: Vec<Vec<f64>>,
}

impl SpectrumTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega");
        for r in 0..self.power.len() {
            let _ = write!(out, ",power_{r}");
        }
        out.push('\n');
        for (i, w) in self.omega.iter().enumerate() {
            out.push_str(&fmt_f64(*w));
            for p in &self.power {
                out.push(',');
                out.push_str(&fmt_f64(p[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// `8K` time samples.
pub fn default_samples(basis: &PulseBasis) -> usize {
    8 * basis.len()
}

/// Samples each control at the midpoints of `samples` uniform cells of
/// `[0, T]` and transforms. Frequencies are `2πm/T`; for even `samples` the
/// unpaired Nyquist bin is dropped so the grid stays symmetric.
pub fn pulse_spectrum(basis: &PulseBasis, a: &ParameterVector, samples: usize) -> SpectrumTable {
    let n = samples.max(2);
    let t = basis.duration();
    let dt = t / n as f64;
    let k = basis.len();
    let n_controls = a.len() / k;
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|j| amplitudes_from_values(basis, a, &basis.eval_all((j as f64 + 0.5) * dt)))
        .collect();
    let signals: Vec<Vec<Complex64>> = (0..n_controls)
        .map(|r| samples.iter().map(|f| Complex64::new(f[r], 0.0)).collect())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = (n as i64 - 1) / 2;
    let bins: Vec<i64> = (-half..=half).collect();
    let omega = bins.iter().map(|&m| 2.0 * PI * m as f64 / t).collect();
    let power = signals
        .into_iter()
        .map(|mut s| {
            fft.process(&mut s);
            bins.iter()
                .map(|&m| (s[m.rem_euclid(n as i64) as usize] * dt).norm_sqr())
                .collect()
        })
        .collect();
    SpectrumTable { omega, power }
}

//! CSV and JSON emission. Floats are written with 17 significant digits so
//! that they parse back bit-exactly.

use std::fmt::Write as _;
use std::path::Path;

use qgate_core::solver::IterationRecord;

use crate::error::{CliError, Result};

pub const ITERATION_HEADER: &str =
    "iter,gate_error,geodesic_error,pulse_norm,radius,ratio,accepted,wall_seconds";

pub const SWEEP_HEADER: &str = "norm,seed,ill_conditioning,time_to_eps,final_norm";

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn iteration_csv(records: &[IterationRecord]) -> String {
    let mut out = format!("{ITERATION_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.index,
            fmt_f64(r.gate_error),
            fmt_f64(r.geodesic_error),
            fmt_f64(r.pulse_norm),
            fmt_f64(r.radius),
            fmt_f64(r.ratio),
            r.accepted,
            fmt_f64(r.wall_seconds),
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

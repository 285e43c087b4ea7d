//! Dense complex matrices as text: a header line `N`, then `N` rows of `2N`
//! whitespace-separated numbers `re im re im ...`.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use qgate_core::CMatrix;

use crate::error::{CliError, Result};
use crate::output::fmt_f64;

pub fn parse_matrix(text: &str, path: &Path) -> Result<CMatrix> {
    let bad = |line: usize, msg: String| CliError::MatrixFormat {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| bad(1, "empty file".into()))?;
    let n: usize = header
        .parse()
        .map_err(|_| bad(hline, format!("expected the dimension, found {header:?}")))?;
    if n == 0 {
        return Err(bad(hline, "dimension must be positive".into()));
    }
    let mut m = CMatrix::zeros(n, n);
    for row in 0..n {
        let (lno, line) = lines
            .next()
            .ok_or_else(|| bad(hline, format!("expected {n} rows, found {row}")))?;
        let values = line
            .split_whitespace()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| bad(lno, format!("not a number: {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * n {
            return Err(bad(
                lno,
                format!("expected {} numbers, found {}", 2 * n, values.len()),
            ));
        }
        for col in 0..n {
            m[(row, col)] = Complex64::new(values[2 * col], values[2 * col + 1]);
        }
    }
    if let Some((lno, _)) = lines.next() {
        return Err(bad(lno, "trailing data after the last row".into()));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, path)
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut out = format!("{}\n", m.nrows());
    for row in 0..m.nrows() {
        let fields: Vec<String> = (0..m.ncols())
            .flat_map(|col| {
                let z = m[(row, col)];
                [fmt_f64(z.re), fmt_f64(z.im)]
            })
            .collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|e| CliError::io(path, e))
}

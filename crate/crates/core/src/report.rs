//! JSON and CSV artifacts.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::lengths::MarkedSpectrum;
use crate::thermo::{ThermoEstimate, TypkReport};

/// Pretty JSON with a trailing newline. Key order follows struct field
/// order and `serde_json::Map` (sorted), so output is reproducible.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Small CSV table of plot-ready series.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row.iter().map(|v| format!("{v}")).collect());
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        s
    }
}

/// `T, #R_T, log #R_T, log sum_{R_T} l` at each cutoff.
pub fn count_series(spec: &MarkedSpectrum, cutoffs: &[f64]) -> CsvTable {
    let mut t = CsvTable::new(&["T", "count", "log_count", "log_length_sum"]);
    for &c in cutoffs {
        let idx = spec.indices_upto(c);
        let sum: f64 = idx.iter().map(|&i| spec.lengths()[i]).sum();
        t.push(&[c, idx.len() as f64, (idx.len() as f64).ln(), sum.ln()]);
    }
    t
}

/// Per-cutoff values of an estimate; window fits are aligned with the last
/// cutoffs of their windows.
pub fn estimate_series(e: &ThermoEstimate) -> CsvTable {
    let mut t = CsvTable::new(&["T", "per_cutoff", "window_fit"]);
    let offset = e.cutoffs.len() - e.window_fits.len().min(e.cutoffs.len());
    for (k, (&c, &v)) in e.cutoffs.iter().zip(&e.per_cutoff).enumerate() {
        let fit = if k >= offset { e.window_fits[k - offset] } else { f64::NAN };
        t.push(&[c, v, fit]);
    }
    t
}

/// `n` against both eigenvalue-ratio sequences and their residuals.
pub fn typk_series(r: &TypkReport) -> CsvTable {
    let mut t = CsvTable::new(&["n", "ratio_projections", "ratio_projection_image", "residual_projections", "residual_projection_image"]);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    for (n, (a, b)) in r
        .sequence_projections
        .iter()
        .zip(&r.sequence_projection_image)
        .enumerate()
    {
        t.push(&[
            (n + 1) as f64,
            *a,
            *b,
            rel(*a, r.trace_projections),
            rel(*b, r.trace_projection_image),
        ]);
    }
    t
}

/// Writes `contents` to `dir/name`, creating `dir` if needed.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

//! Plain-text CSV formats for responses, spectra, counts and run artifacts.
//!
//! Every number is written with 17 significant digits so that a write/read
//! round trip reproduces the same `f64` bit pattern.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Result, UnfoldError};
use crate::metrics::RunOutcome;
use crate::solver::RunTrace;
use crate::types::{DetectorCounts, EnergyGrid, ResponseMatrix, Spectrum};

pub const SPECTRUM_HEADER: &str = "group_upper_bound_MeV,fluence";
pub const TRACE_HEADER: &str = "iteration,best_fitness,best_qs";
pub const CELL_HEADER: &str = "run,seed,history_qs,last_qs,history_p1,initial_min_qs";

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| UnfoldError::io(path, e))
}

/// Writes through a temporary sibling and renames, so readers never observe
/// a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| UnfoldError::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    fs::write(&tmp, contents).map_err(|e| UnfoldError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| UnfoldError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> UnfoldError {
    UnfoldError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Non-blank lines with 1-based line numbers, comment lines (`#`) removed.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64> {
    let field = field.trim();
    field
        .parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))
}

fn parse_row(path: &Path, line: usize, text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|f| parse_field(path, line, f)).collect()
}

/// Reads a response matrix: a `# response m=<m> n=<n>` header, then `m`
/// rows of `n` comma-separated values.
pub fn read_response(path: &Path) -> Result<ResponseMatrix> {
    let text = read_text(path)?;
    let (header_line, header) = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| parse_err(path, 1, "empty response file"))?;
    let (m, n) = parse_response_header(header).ok_or_else(|| {
        parse_err(path, header_line, format!("expected `# response m=<m> n=<n>`, found {header:?}"))
    })?;

    let mut rows = Vec::with_capacity(m);
    let mut last_line = header_line;
    for (line, text) in data_lines(&text) {
        let row = parse_row(path, line, text)?;
        if row.len() != n {
            return Err(parse_err(path, line, format!("expected {n} values, found {}", row.len())));
        }
        rows.push(row);
        last_line = line;
    }
    if rows.len() != m {
        return Err(parse_err(path, last_line, format!("expected {m} rows, found {}", rows.len())));
    }
    ResponseMatrix::from_rows(&rows).map_err(|e| {
        let line = match &e {
            UnfoldError::Unconstrained { axis: "row", index } => row_line(&text, *index).unwrap_or(last_line),
            _ => header_line,
        };
        parse_err(path, line, e.to_string())
    })
}

fn row_line(text: &str, row: usize) -> Option<usize> {
    data_lines(text).nth(row).map(|(line, _)| line)
}

fn parse_response_header(header: &str) -> Option<(usize, usize)> {
    let rest = header.strip_prefix('#')?.trim().strip_prefix("response")?;
    let mut m = None;
    let mut n = None;
    for token in rest.split_whitespace() {
        match token.split_once('=')? {
            ("m", v) => m = v.parse().ok(),
            ("n", v) => n = v.parse().ok(),
            _ => return None,
        }
    }
    Some((m?, n?))
}

pub fn write_response(path: &Path, response: &ResponseMatrix) -> Result<()> {
    let mut out = format!("# response m={} n={}\n", response.rows(), response.cols());
    for row in response.row_iter() {
        out.push_str(&join(row.iter().copied()));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Reads a spectrum: optional header, a leading floor-boundary row, then one
/// `upper_bound,fluence` row per group.
pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let text = read_text(path)?;
    let mut lines = data_lines(&text).peekable();
    if let Some((_, first)) = lines.peek() {
        if first.split(',').next().is_some_and(|f| f.trim().parse::<f64>().is_err()) {
            lines.next();
        }
    }
    let (floor_line, floor_text) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "spectrum file has no grid floor row"))?;
    let floor = parse_field(path, floor_line, floor_text.split(',').next().unwrap_or(""))?;

    let mut boundaries = vec![floor];
    let mut fluence = Vec::new();
    let mut last_line = floor_line;
    for (line, text) in lines {
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 columns, found {}", fields.len())));
        }
        boundaries.push(parse_field(path, line, fields[0])?);
        fluence.push(parse_field(path, line, fields[1])?);
        last_line = line;
    }
    let grid = EnergyGrid::new(boundaries).map_err(|e| parse_err(path, last_line, e.to_string()))?;
    Spectrum::new(Arc::new(grid), fluence).map_err(|e| {
        let line = match &e {
            UnfoldError::InvalidValue { index, .. } => floor_line + 1 + index,
            _ => last_line,
        };
        parse_err(path, line, e.to_string())
    })
}

pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let b = spectrum.grid().boundaries();
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    out.push_str(&fmt_num(b[0]));
    out.push_str(",\n");
    for (upper, phi) in b[1..].iter().zip(spectrum.fluence()) {
        out.push_str(&format!("{},{}\n", fmt_num(*upper), fmt_num(*phi)));
    }
    write_atomic(path, &out)
}

/// Reads detector counts, one value per line.
pub fn read_counts(path: &Path) -> Result<DetectorCounts> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut lines = Vec::new();
    for (line, text) in data_lines(&text) {
        values.push(parse_field(path, line, text)?);
        lines.push(line);
    }
    DetectorCounts::new(values).map_err(|e| {
        let line = match &e {
            UnfoldError::InvalidValue { index, .. } => lines[*index],
            _ => 1,
        };
        parse_err(path, line, e.to_string())
    })
}

pub fn write_counts(path: &Path, counts: &DetectorCounts) -> Result<()> {
    let mut out = String::new();
    for c in counts.values() {
        out.push_str(&fmt_num(*c));
        out.push('\n');
    }
    write_atomic(path, &out)
}

/// Per-generation trace; `best_qs` is left empty when no reference was given.
pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &trace.records {
        let qs = r.best_qs.map(fmt_num).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.iteration, fmt_num(r.best_fitness), qs));
    }
    write_atomic(path, &out)
}

pub fn write_cell(path: &Path, runs: &[RunOutcome]) -> Result<()> {
    let mut out = String::from(CELL_HEADER);
    out.push('\n');
    for (i, r) in runs.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            i,
            r.seed,
            join([r.history_qs, r.last_qs, r.history_p1, r.initial_min_qs])
        ));
    }
    write_atomic(path, &out)
}

pub fn read_cell(path: &Path) -> Result<Vec<RunOutcome>> {
    let text = read_text(path)?;
    let mut runs = Vec::new();
    for (line, row) in data_lines(&text).skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(path, line, format!("expected 6 columns, found {}", fields.len())));
        }
        let seed = fields[1]
            .trim()
            .parse::<u64>()
            .map_err(|_| parse_err(path, line, format!("bad seed {:?}", fields[1])))?;
        let num = |k: usize| parse_field(path, line, fields[k]);
        runs.push(RunOutcome {
            seed,
            history_qs: num(2)?,
            last_qs: num(3)?,
            history_p1: num(4)?,
            initial_min_qs: num(5)?,
        });
    }
    Ok(runs)
}

pub(crate) fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_num).collect::<Vec<_>>().join(",")
}

//! Domain types for the discretized unfolding problem `C = R·φ`.
//!
//! All types validate their invariants on construction and are immutable
//! afterwards, so they can be shared freely between worker threads.

use std::sync::Arc;

use crate::error::{Result, UnfoldError};

/// Lower edge of the default energy grid, MeV.
pub const DEFAULT_GRID_FLOOR_MEV: f64 = 1e-9;
/// Upper edge of the default energy grid, MeV.
pub const DEFAULT_GRID_CEILING_MEV: f64 = 15.8;
/// Number of energy groups in the default grid.
pub const DEFAULT_GROUP_COUNT: usize = 53;

/// Energy group boundaries in MeV, strictly increasing and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid {
    boundaries: Vec<f64>,
}

impl EnergyGrid {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(UnfoldError::InvalidGrid(format!(
                "need at least 2 boundaries, got {}",
                boundaries.len()
            )));
        }
        for (i, &b) in boundaries.iter().enumerate() {
            if !b.is_finite() || b <= 0.0 {
                return Err(UnfoldError::InvalidGrid(format!(
                    "boundary {i} = {b} is not a positive finite energy"
                )));
            }
        }
        if let Some(i) = boundaries.windows(2).position(|w| w[1] <= w[0]) {
            return Err(UnfoldError::InvalidGrid(format!(
                "boundaries not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { boundaries })
    }

    /// `groups` groups with logarithmically spaced boundaries from `floor` to `ceiling`.
    pub fn log_spaced(groups: usize, floor: f64, ceiling: f64) -> Result<Self> {
        if groups == 0 {
            return Err(UnfoldError::InvalidGrid("group count must be at least 1".into()));
        }
        if !(floor > 0.0 && ceiling > floor && ceiling.is_finite()) {
            return Err(UnfoldError::InvalidGrid(format!(
                "need 0 < floor < ceiling, got [{floor}, {ceiling}]"
            )));
        }
        let (lo, hi) = (floor.ln(), ceiling.ln());
        let step = (hi - lo) / groups as f64;
        let mut boundaries: Vec<f64> = (0..=groups).map(|k| (lo + step * k as f64).exp()).collect();
        // pin the ends so they survive the exp/ln round trip exactly
        boundaries[0] = floor;
        boundaries[groups] = ceiling;
        Self::new(boundaries)
    }

    /// The default 53-group log grid spanning 1e-9 to 15.8 MeV.
    pub fn standard() -> Self {
        Self::with_groups(DEFAULT_GROUP_COUNT)
    }

    /// Log grid over the default energy span with an arbitrary group count.
    pub fn with_groups(groups: usize) -> Self {
        Self::log_spaced(groups.max(1), DEFAULT_GRID_FLOOR_MEV, DEFAULT_GRID_CEILING_MEV)
            .expect("default span is valid")
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn group_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Geometric mean of each group's edges.
    pub fn centers(&self) -> Vec<f64> {
        self.boundaries.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect()
    }

    /// Group centers on the lethargy-like axis `ln(E)`.
    pub fn log_centers(&self) -> Vec<f64> {
        self.boundaries
            .windows(2)
            .map(|w| 0.5 * (w[0].ln() + w[1].ln()))
            .collect()
    }
}

/// Per-group neutron fluence over an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Arc<EnergyGrid>,
    fluence: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: Arc<EnergyGrid>, fluence: Vec<f64>) -> Result<Self> {
        if fluence.len() != grid.group_count() {
            return Err(UnfoldError::DimensionMismatch {
                what: "spectrum fluence",
                expected: grid.group_count(),
                found: fluence.len(),
            });
        }
        check_nonnegative("fluence", &fluence)?;
        Ok(Self { grid, fluence })
    }

    /// Spectrum on a default log grid sized to `fluence`.
    pub fn on_default_grid(fluence: Vec<f64>) -> Result<Self> {
        let grid = Arc::new(EnergyGrid::with_groups(fluence.len()));
        Self::new(grid, fluence)
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        &self.grid
    }

    pub fn fluence(&self) -> &[f64] {
        &self.fluence
    }

    pub fn len(&self) -> usize {
        self.fluence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fluence.is_empty()
    }
}

/// Detector response matrix: `rows` detection units by `cols` energy groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl ResponseMatrix {
    /// Builds a matrix from row-major values.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(UnfoldError::Empty("response matrix"));
        }
        if values.len() != rows * cols {
            return Err(UnfoldError::DimensionMismatch {
                what: "response matrix values",
                expected: rows * cols,
                found: values.len(),
            });
        }
        check_nonnegative("response entry", &values)?;
        for r in 0..rows {
            if !values[r * cols..(r + 1) * cols].iter().any(|&v| v > 0.0) {
                return Err(UnfoldError::Unconstrained { axis: "row", index: r });
            }
        }
        for c in 0..cols {
            if !(0..rows).any(|r| values[r * cols + c] > 0.0) {
                return Err(UnfoldError::Unconstrained { axis: "column", index: c });
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(UnfoldError::DimensionMismatch {
                what: "response matrix row",
                expected: cols,
                found: bad.len(),
            });
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn identity(size: usize) -> Self {
        let mut values = vec![0.0; size * size];
        for i in 0..size {
            values[i * size + i] = 1.0;
        }
        Self::new(size, size, values).expect("identity is a valid response")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols)
    }

    /// Row-major entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Detector readings, one strictly positive value per detection unit.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorCounts {
    values: Vec<f64>,
}

impl DetectorCounts {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(UnfoldError::Empty("detector counts"));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(UnfoldError::InvalidValue {
                    what: "detector count",
                    index,
                    value,
                });
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Counts, response and the per-group search box `(0, b_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldProblem {
    response: ResponseMatrix,
    counts: DetectorCounts,
    bounds: Vec<f64>,
}

impl UnfoldProblem {
    pub fn new(response: ResponseMatrix, counts: DetectorCounts) -> Result<Self> {
        let bounds = derive_bounds(&response, &counts)?;
        Ok(Self {
            response,
            counts,
            bounds,
        })
    }

    pub fn response(&self) -> &ResponseMatrix {
        &self.response
    }

    pub fn counts(&self) -> &DetectorCounts {
        &self.counts
    }

    /// Per-group upper bounds of the search box.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn detectors(&self) -> usize {
        self.response.rows()
    }

    pub fn groups(&self) -> usize {
        self.response.cols()
    }
}

/// Per-group bound `b_i = min over detectors j with R_ji > 0 of C_j / R_ji`.
///
/// A gene at its bound, with every other gene at zero, reproduces at most
/// the measured count on every detector.
pub fn derive_bounds(response: &ResponseMatrix, counts: &DetectorCounts) -> Result<Vec<f64>> {
    if counts.len() != response.rows() {
        return Err(UnfoldError::DimensionMismatch {
            what: "detector counts",
            expected: response.rows(),
            found: counts.len(),
        });
    }
    (0..response.cols())
        .map(|col| {
            response
                .row_iter()
                .zip(counts.values())
                .filter(|(row, _)| row[col] > 0.0)
                .map(|(row, &c)| c / row[col])
                .min_by(f64::total_cmp)
                .ok_or(UnfoldError::Unconstrained { axis: "column", index: col })
        })
        .collect()
}

fn check_nonnegative(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(index) => Err(UnfoldError::InvalidValue {
            what,
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

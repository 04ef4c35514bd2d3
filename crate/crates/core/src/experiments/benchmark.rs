//! Multi-run GA/DEA benchmarks over a library of reference spectra.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io;
use super::synth::{generate_synthetic, generate_synthetic_response, SyntheticShape, SyntheticSpec};
use crate::error::{Result, UnfoldError};
use crate::fitness::{FitnessFunction, FitnessKind, FitnessParams};
use crate::forward::{convolve, add_noise, NoiseSpec};
use crate::metrics::{RunOutcome, RunSummary};
use crate::solver::{run_dea_with, run_ga_with, Algorithm, DeaConfig, GaConfig, RunHooks, RunTrace};
use crate::types::{EnergyGrid, ResponseMatrix, Spectrum, UnfoldProblem};

pub const RESPONSE_FILE: &str = "response.csv";
pub const MANIFEST_FILE: &str = "synth.json";
pub const SPECTRUM_SUFFIX: &str = ".spectrum.csv";
pub const COUNTS_SUFFIX: &str = ".counts.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LibrarySource {
    File,
    Synthetic,
}

/// A named reference spectrum and the problem built from it.
#[derive(Debug, Clone)]
pub struct LibraryEntry {
    pub name: String,
    pub reference: Spectrum,
    pub problem: UnfoldProblem,
}

/// Reference spectra sharing one response matrix and one energy grid.
#[derive(Debug, Clone)]
pub struct SpectrumLibrary {
    pub source: LibrarySource,
    pub response: ResponseMatrix,
    pub entries: Vec<LibraryEntry>,
}

/// Entry of a synthetic manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSpectrum {
    pub name: String,
    pub shape: SyntheticShape,
    pub p1: f64,
    #[serde(default)]
    pub seed: u64,
}

/// `synth.json`: everything needed to regenerate a synthetic library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManifest {
    pub m: usize,
    pub n: usize,
    pub response_seed: u64,
    pub relative_sigma: f64,
    pub noise_seed: u64,
    pub spectra: Vec<ManifestSpectrum>,
}

impl SpectrumLibrary {
    /// Folds each reference through `response` and adds noise; the noise
    /// seed advances by one per spectrum.
    pub fn from_references(
        source: LibrarySource,
        response: ResponseMatrix,
        references: Vec<(String, Spectrum)>,
        noise: &NoiseSpec,
    ) -> Result<Self> {
        let entries = references
            .into_iter()
            .enumerate()
            .map(|(k, (name, reference))| {
                let spec = NoiseSpec {
                    seed: noise.seed.wrapping_add(k as u64),
                    ..*noise
                };
                let counts = add_noise(&convolve(&response, reference.fluence())?, &spec)?;
                let problem = UnfoldProblem::new(response.clone(), counts)?;
                Ok(LibraryEntry { name, reference, problem })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_entries(source, response, entries)
    }

    pub fn from_entries(source: LibrarySource, response: ResponseMatrix, entries: Vec<LibraryEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(UnfoldError::Empty("spectrum library"));
        }
        let grid = entries[0].reference.grid().clone();
        for e in &entries {
            if **e.reference.grid() != *grid {
                return Err(UnfoldError::InvalidConfig(format!(
                    "spectrum {:?} does not share the library grid",
                    e.name
                )));
            }
            if e.reference.len() != response.cols() {
                return Err(UnfoldError::DimensionMismatch {
                    what: "library spectrum groups",
                    expected: response.cols(),
                    found: e.reference.len(),
                });
            }
            if e.name.is_empty() || e.name.contains(['/', '\\']) {
                return Err(UnfoldError::InvalidConfig(format!("bad spectrum name {:?}", e.name)));
            }
        }
        Ok(Self {
            source,
            response,
            entries,
        })
    }

    pub fn from_manifest(manifest: &SyntheticManifest) -> Result<Self> {
        let response = generate_synthetic_response(manifest.m, manifest.n, manifest.response_seed)?;
        let grid = EnergyGrid::with_groups(manifest.n);
        let references = manifest
            .spectra
            .iter()
            .map(|s| {
                let spec = SyntheticSpec {
                    shape: s.shape,
                    target_p1: s.p1,
                    seed: s.seed,
                };
                Ok((s.name.clone(), generate_synthetic(&spec, &grid)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = NoiseSpec::new(manifest.relative_sigma, manifest.noise_seed)?;
        Self::from_references(LibrarySource::Synthetic, response, references, &noise)
    }

    /// Loads `dir/synth.json` if present, otherwise `dir/response.csv` plus
    /// every `<name>.spectrum.csv`. A `<name>.counts.csv` is used verbatim
    /// when present; otherwise counts are synthesized with `noise`.
    pub fn load(dir: &Path, noise: &NoiseSpec) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(|e| UnfoldError::io(&manifest_path, e))?;
            let manifest: SyntheticManifest = serde_json::from_str(&text).map_err(|e| UnfoldError::Parse {
                path: manifest_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            return Self::from_manifest(&manifest);
        }

        let response = io::read_response(&dir.join(RESPONSE_FILE))?;
        let mut names: Vec<String> = fs::read_dir(dir)
            .map_err(|e| UnfoldError::io(dir, e))?
            .filter_map(|entry| entry.ok()?.file_name().into_string().ok())
            .filter_map(|f| f.strip_suffix(SPECTRUM_SUFFIX).map(str::to_owned))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(UnfoldError::InvalidConfig(format!(
                "{} holds no *{SPECTRUM_SUFFIX} files",
                dir.display()
            )));
        }
        let mut entries = Vec::with_capacity(names.len());
        for (k, name) in names.into_iter().enumerate() {
            let reference = io::read_spectrum(&dir.join(format!("{name}{SPECTRUM_SUFFIX}")))?;
            let counts_path = dir.join(format!("{name}{COUNTS_SUFFIX}"));
            let counts = if counts_path.exists() {
                io::read_counts(&counts_path)?
            } else {
                let spec = NoiseSpec {
                    seed: noise.seed.wrapping_add(k as u64),
                    ..*noise
                };
                if reference.len() != response.cols() {
                    return Err(UnfoldError::DimensionMismatch {
                        what: "library spectrum groups",
                        expected: response.cols(),
                        found: reference.len(),
                    });
                }
                add_noise(&convolve(&response, reference.fluence())?, &spec)?
            };
            let problem = UnfoldProblem::new(response.clone(), counts)?;
            entries.push(LibraryEntry { name, reference, problem });
        }
        Self::from_entries(LibrarySource::File, response, entries)
    }

    /// Writes the library as a directory `load` reads back unchanged.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        io::write_response(&dir.join(RESPONSE_FILE), &self.response)?;
        for e in &self.entries {
            io::write_spectrum(&dir.join(format!("{}{SPECTRUM_SUFFIX}", e.name)), &e.reference)?;
            io::write_counts(&dir.join(format!("{}{COUNTS_SUFFIX}", e.name)), e.problem.counts())?;
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<EnergyGrid> {
        self.entries[0].reference.grid()
    }

    pub fn entry(&self, name: &str) -> Option<&LibraryEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub algorithms: Vec<Algorithm>,
    pub fitness_kinds: Vec<FitnessKind>,
    pub runs_per_cell: usize,
    pub base_seed: u64,
    /// Solver settings; the seed field is replaced per run.
    pub ga: GaConfig,
    pub dea: DeaConfig,
    pub params: FitnessParams,
    /// Worker threads; `None` uses the global rayon pool.
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Reuse cell files left by an earlier invocation.
    #[serde(skip)]
    pub resume: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            fitness_kinds: FitnessKind::ALL.to_vec(),
            runs_per_cell: 20,
            base_seed: 0,
            ga: GaConfig::default(),
            dea: DeaConfig::default(),
            params: FitnessParams::default(),
            workers: None,
            resume: false,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs_per_cell == 0 {
            return Err(UnfoldError::InvalidConfig("runs_per_cell must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(UnfoldError::Empty("algorithm list"));
        }
        if self.fitness_kinds.is_empty() {
            return Err(UnfoldError::Empty("fitness kind list"));
        }
        if self.workers == Some(0) {
            return Err(UnfoldError::InvalidConfig("worker count must be at least 1".into()));
        }
        self.ga.validate()?;
        self.dea.validate()?;
        self.params.validate()
    }

    pub fn seed_for(&self, run_index: usize) -> u64 {
        self.base_seed.wrapping_add(run_index as u64)
    }
}

/// Outcome of one (spectrum, algorithm, fitness) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub spectrum: String,
    pub algorithm: Algorithm,
    pub fitness: FitnessKind,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub source: LibrarySource,
    pub config: BenchmarkConfig,
    pub spectra: Vec<String>,
    pub cells: Vec<CellResult>,
}

impl BenchmarkGrid {
    pub fn cell(&self, spectrum: &str, algorithm: Algorithm, fitness: FitnessKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.spectrum == spectrum && c.algorithm == algorithm && c.fitness == fitness)
    }

    pub fn summary(&self, spectrum: &str, algorithm: Algorithm, fitness: FitnessKind) -> Option<&RunSummary> {
        self.cell(spectrum, algorithm, fitness)?.summary.as_ref()
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.summary.is_none()).count()
    }
}

/// Runs one solver with `seed`, recording Qs against `reference`.
pub fn run_single(
    algorithm: Algorithm,
    problem: &UnfoldProblem,
    fitness: &FitnessFunction,
    config: &BenchmarkConfig,
    seed: u64,
    reference: &Spectrum,
) -> Result<RunTrace> {
    let hooks = RunHooks::with_reference(reference.fluence());
    match algorithm {
        Algorithm::Ga => run_ga_with(problem, fitness, &GaConfig { seed, ..config.ga }, hooks),
        Algorithm::Dea => run_dea_with(problem, fitness, &DeaConfig { seed, ..config.dea }, hooks),
    }
}

fn cell_stem(spectrum: &str, algorithm: Algorithm, fitness: FitnessKind) -> String {
    format!("{spectrum}_{}_{}", algorithm.token(), fitness.token())
}

pub fn cell_path(out: &Path, spectrum: &str, algorithm: Algorithm, fitness: FitnessKind) -> PathBuf {
    out.join("cells").join(format!("{}.csv", cell_stem(spectrum, algorithm, fitness)))
}

pub fn trace_path(out: &Path, spectrum: &str, algorithm: Algorithm, fitness: FitnessKind, run: usize) -> PathBuf {
    out.join("traces")
        .join(format!("{}_run{run}.csv", cell_stem(spectrum, algorithm, fitness)))
}

/// Earlier results for a cell, if a complete file with the expected seeds exists.
fn resumed_runs(path: &Path, config: &BenchmarkConfig) -> Option<Vec<RunOutcome>> {
    let runs = io::read_cell(path).ok()?;
    let complete = runs.len() == config.runs_per_cell
        && runs.iter().enumerate().all(|(i, r)| r.seed == config.seed_for(i));
    complete.then_some(runs)
}

fn run_cell(
    entry: &LibraryEntry,
    algorithm: Algorithm,
    kind: FitnessKind,
    config: &BenchmarkConfig,
    out: Option<&Path>,
) -> Result<RunSummary> {
    if let (Some(out), true) = (out, config.resume) {
        if let Some(runs) = resumed_runs(&cell_path(out, &entry.name, algorithm, kind), config) {
            return RunSummary::from_outcomes(algorithm, kind, &entry.name, runs);
        }
    }
    let fitness = FitnessFunction::new(kind, config.params)?;
    let runs = (0..config.runs_per_cell)
        .into_par_iter()
        .map(|k| {
            let trace = run_single(algorithm, &entry.problem, &fitness, config, config.seed_for(k), &entry.reference)?;
            if let Some(out) = out {
                io::write_trace(&trace_path(out, &entry.name, algorithm, kind, k), &trace)?;
            }
            RunOutcome::from_trace(&trace, &entry.reference)
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(out) = out {
        io::write_cell(&cell_path(out, &entry.name, algorithm, kind), &runs)?;
    }
    RunSummary::from_outcomes(algorithm, kind, &entry.name, runs)
}

/// Runs every (spectrum, algorithm, fitness) cell. With `out`, per-run
/// traces and per-cell CSVs are written as they complete and `summary.json`
/// is written last. A failing cell records its error; the others proceed.
pub fn benchmark(library: &SpectrumLibrary, config: &BenchmarkConfig, out: Option<&Path>) -> Result<BenchmarkGrid> {
    config.validate()?;
    let jobs: Vec<(&LibraryEntry, Algorithm, FitnessKind)> = library
        .entries
        .iter()
        .flat_map(|e| {
            config
                .algorithms
                .iter()
                .flat_map(move |&a| config.fitness_kinds.iter().map(move |&k| (e, a, k)))
        })
        .collect();

    let execute = || {
        jobs.par_iter()
            .map(|&(entry, algorithm, kind)| {
                let result = run_cell(entry, algorithm, kind, config, out);
                CellResult {
                    spectrum: entry.name.clone(),
                    algorithm,
                    fitness: kind,
                    error: result.as_ref().err().map(ToString::to_string),
                    summary: result.ok(),
                }
            })
            .collect::<Vec<_>>()
    };
    let cells = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| UnfoldError::InvalidConfig(format!("worker pool: {e}")))?
            .install(execute),
        None => execute(),
    };

    let grid = BenchmarkGrid {
        source: library.source,
        config: config.clone(),
        spectra: library.entries.iter().map(|e| e.name.clone()).collect(),
        cells,
    };
    if let Some(out) = out {
        io::write_atomic(&out.join(SUMMARY_FILE), &serde_json::to_string_pretty(&grid)?)?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn manifest() -> SyntheticManifest {
        SyntheticManifest {
            m: 6,
            n: 12,
            response_seed: 1,
            relative_sigma: 0.05,
            noise_seed: 2,
            spectra: vec![
                ManifestSpectrum {
                    name: "rough".into(),
                    shape: SyntheticShape::DoublePeak,
                    p1: 1.2,
                    seed: 0,
                },
                ManifestSpectrum {
                    name: "smooth".into(),
                    shape: SyntheticShape::SingleGaussian,
                    p1: 0.001,
                    seed: 0,
                },
            ],
        }
    }

    fn small_config() -> BenchmarkConfig {
        BenchmarkConfig {
            fitness_kinds: vec![FitnessKind::F2, FitnessKind::F3],
            runs_per_cell: 2,
            base_seed: 10,
            ga: GaConfig {
                population_size: 8,
                max_iterations: 5,
                ..GaConfig::default()
            },
            dea: DeaConfig {
                population_size: 8,
                max_iterations: 5,
                ..DeaConfig::default()
            },
            ..BenchmarkConfig::default()
        }
    }

    #[test]
    fn grid_covers_every_cell_with_sequential_seeds() {
        let lib = SpectrumLibrary::from_manifest(&manifest()).unwrap();
        let grid = benchmark(&lib, &small_config(), None).unwrap();
        assert_eq!(grid.cells.len(), 2 * 2 * 2);
        assert_eq!(grid.failed_cells(), 0);
        let s = grid.summary("smooth", Algorithm::Dea, FitnessKind::F2).unwrap();
        assert_eq!(s.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![10, 11]);
    }

    #[test]
    fn artifacts_resume_and_reproduce() {
        let lib = SpectrumLibrary::from_manifest(&manifest()).unwrap();
        let dir = tempdir().unwrap();
        let first = benchmark(&lib, &small_config(), Some(dir.path())).unwrap();
        let cell = cell_path(dir.path(), "rough", Algorithm::Ga, FitnessKind::F3);
        assert_eq!(fs::read_to_string(&cell).unwrap().lines().count(), 3);
        assert!(trace_path(dir.path(), "rough", Algorithm::Ga, FitnessKind::F3, 1).exists());
        let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();

        // a tampered cell file is trusted on resume, proving no recomputation
        let mut runs = io::read_cell(&cell).unwrap();
        runs[0].history_qs = 12345.0;
        io::write_cell(&cell, &runs).unwrap();
        let resumed = benchmark(
            &lib,
            &BenchmarkConfig {
                resume: true,
                ..small_config()
            },
            Some(dir.path()),
        )
        .unwrap();
        assert_eq!(
            resumed.summary("rough", Algorithm::Ga, FitnessKind::F3).unwrap().runs[0].history_qs,
            12345.0
        );

        let again = benchmark(&lib, &small_config(), Some(dir.path())).unwrap();
        assert_eq!(again, first);
        assert_eq!(fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap(), summary);
    }

    #[test]
    fn failing_cell_is_recorded_and_others_proceed() {
        let lib = SpectrumLibrary::from_manifest(&manifest()).unwrap();
        let dir = tempdir().unwrap();
        // a directory squatting on one cell file makes only that cell fail
        fs::create_dir_all(cell_path(dir.path(), "rough", Algorithm::Ga, FitnessKind::F2)).unwrap();
        let grid = benchmark(&lib, &small_config(), Some(dir.path())).unwrap();
        assert_eq!(grid.failed_cells(), 1);
        let bad = grid.cell("rough", Algorithm::Ga, FitnessKind::F2).unwrap();
        assert!(bad.error.is_some() && bad.summary.is_none());
        assert!(grid.summary("rough", Algorithm::Dea, FitnessKind::F2).is_some());
    }

    #[test]
    fn library_directory_round_trip() {
        let lib = SpectrumLibrary::from_manifest(&manifest()).unwrap();
        let dir = tempdir().unwrap();
        lib.write_dir(dir.path()).unwrap();
        let back = SpectrumLibrary::load(dir.path(), &NoiseSpec::default()).unwrap();
        assert_eq!(back.source, LibrarySource::File);
        assert_eq!(back.response, lib.response);
        assert_eq!(back.entries.len(), 2);
        for (a, b) in back.entries.iter().zip(&lib.entries) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.reference, b.reference);
            assert_eq!(a.problem.counts(), b.problem.counts());
        }

        fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_string(&manifest()).unwrap(),
        )
        .unwrap();
        let synthetic = SpectrumLibrary::load(dir.path(), &NoiseSpec::default()).unwrap();
        assert_eq!(synthetic.source, LibrarySource::Synthetic);
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.runs_per_cell = 0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.algorithms.clear();
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.workers = Some(0);
        assert!(c.validate().is_err());
    }
}

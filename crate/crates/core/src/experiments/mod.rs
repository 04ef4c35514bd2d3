//! Landscape scans, population sampling, benchmarks and data files.

pub mod benchmark;
pub mod dynamic;
pub mod io;
pub mod landscape;
pub mod synth;

pub use benchmark::{
    benchmark, BenchmarkConfig, BenchmarkGrid, CellResult, LibraryEntry, LibrarySource, ManifestSpectrum,
    SpectrumLibrary, SyntheticManifest,
};
pub use dynamic::{sample_ranks, DynamicSample, DynamicSampler};
pub use landscape::{static_landscape, Landscape, LandscapeSample, SamplingMode};
pub use synth::{generate_synthetic, generate_synthetic_response, SyntheticShape, SyntheticSpec};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spectrum_unfold::experiments::io;
use spectrum_unfold::fitness::penalty_p1;
use spectrum_unfold::{DetectorCounts, ResponseMatrix, Spectrum};
use tempfile::{tempdir, TempDir};

fn unfold(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unfold"))
        .args(args)
        .env_remove("UNFOLD_WORKERS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Identity 5×5 response, counts equal to a known spectrum, and that spectrum.
fn toy_files() -> (TempDir, PathBuf, PathBuf, PathBuf) {
    let dir = tempdir().unwrap();
    let truth = vec![1.0, 2.0, 3.0, 2.0, 1.0];
    let r = dir.path().join("response.csv");
    let c = dir.path().join("counts.csv");
    let f = dir.path().join("reference.csv");
    io::write_response(&r, &ResponseMatrix::identity(5)).unwrap();
    io::write_counts(&c, &DetectorCounts::new(truth.clone()).unwrap()).unwrap();
    io::write_spectrum(&f, &Spectrum::on_default_grid(truth).unwrap()).unwrap();
    (dir, r, c, f)
}

fn files_of(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn missing_counts_is_usage_error() {
    let (_d, r, _c, _f) = toy_files();
    let out = unfold(&["unfold", "--response", s(&r), "--algo", "dea", "--fitness", "f2", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--counts"));
}

#[test]
fn help_exits_zero() {
    assert_eq!(unfold(&["--help"]).status.code(), Some(0));
    assert_eq!(unfold(&["benchmark", "--help"]).status.code(), Some(0));
}

#[test]
fn malformed_input_names_file_and_line() {
    let (d, r, c, _f) = toy_files();
    fs::write(&c, "1\n2\nthree\n4\n5\n").unwrap();
    let out_dir = d.path().join("out");
    let out = unfold(&[
        "unfold", "--response", s(&r), "--counts", s(&c), "--algo", "ga", "--fitness", "f2", "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("counts.csv:3"), "{err}");
}

#[test]
fn bad_config_is_usage_error() {
    let (d, r, c, _f) = toy_files();
    let out = unfold(&[
        "unfold", "--response", s(&r), "--counts", s(&c), "--algo", "dea", "--fitness", "f2", "--pop", "2", "--out",
        s(&d.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_runtime_error() {
    let (d, r, c, _f) = toy_files();
    let blocker = d.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = unfold(&[
        "unfold", "--response", s(&r), "--counts", s(&c), "--algo", "dea", "--fitness", "f2", "--pop", "6", "--iters",
        "3", "--out", s(&blocker.join("sub")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unfold_identity_smoke_and_determinism() {
    let (d, r, c, f) = toy_files();
    let run = |name: &str| {
        let out_dir = d.path().join(name);
        let out = unfold(&[
            "unfold", "--response", s(&r), "--counts", s(&c), "--reference", s(&f), "--algo", "dea", "--fitness",
            "f2", "--pop", "20", "--iters", "200", "--seed", "42", "--dynamic", "--out", s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("history-best Qs"));
        out_dir
    };
    let a = run("a");
    let b = run("b");
    let spectrum = io::read_spectrum(&a.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.len(), 5);
    let trace = fs::read_to_string(a.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 201);
    // 20 individuals → 2 samples per generation
    assert_eq!(fs::read_to_string(a.join("dynamic.csv")).unwrap().lines().count(), 1 + 2 * 200);
    assert_eq!(files_of(&a), files_of(&b));
}

#[test]
fn synth_hits_smoothness_target() {
    let d = tempdir().unwrap();
    let out = unfold(&["synth", "--shape", "thermal-plus-fast", "--p1", "0.001", "--out", s(d.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let reference = io::read_spectrum(&d.path().join("reference.spectrum.csv")).unwrap();
    let p1 = penalty_p1(reference.fluence()).unwrap();
    assert!((p1 - 0.001).abs() <= 0.2 * 0.001, "p1 = {p1}");
    let response = io::read_response(&d.path().join("response.csv")).unwrap();
    assert_eq!((response.rows(), response.cols()), (15, 53));
    assert_eq!(io::read_counts(&d.path().join("reference.counts.csv")).unwrap().len(), 15);

    let bad = unfold(&["synth", "--shape", "flat", "--p1", "0.5", "--out", s(d.path())]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn landscape_writes_one_row_per_sample() {
    let d = tempdir().unwrap();
    assert_eq!(
        unfold(&["synth", "--shape", "double-peak", "--p1", "1.2", "--m", "6", "--n", "12", "--out", s(d.path())])
            .status
            .code(),
        Some(0)
    );
    let csv = d.path().join("land.csv");
    let out = unfold(&[
        "landscape",
        "--response",
        s(&d.path().join("response.csv")),
        "--counts",
        s(&d.path().join("reference.counts.csv")),
        "--reference",
        s(&d.path().join("reference.spectrum.csv")),
        "--samples",
        "250",
        "--out",
        s(&csv),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 251);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 17);
}

#[test]
fn benchmark_resume_skips_completed_cells() {
    let lib = tempdir().unwrap();
    fs::write(
        lib.path().join("synth.json"),
        r#"{"m":6,"n":12,"response_seed":0,"relative_sigma":0.05,"noise_seed":0,
            "spectra":[{"name":"rough","shape":"double-peak","p1":1.2},
                       {"name":"smooth","shape":"single-gaussian","p1":0.001}]}"#,
    )
    .unwrap();
    let out = tempdir().unwrap();
    let args = [
        "benchmark", "--library", s(lib.path()), "--runs", "2", "--fitness-set", "f2,f4", "--pop", "8", "--iters", "5",
        "--out", s(out.path()),
    ];
    let first = unfold(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let cells = fs::read_dir(out.path().join("cells")).unwrap().count();
    assert_eq!(cells, 2 * 2 * 2);
    let traces = fs::read_dir(out.path().join("traces")).unwrap().count();
    assert_eq!(traces, 2 * 2 * 2 * 2);

    // traces are only written by runs that actually execute
    fs::remove_dir_all(out.path().join("traces")).unwrap();
    let mut resumed = args.to_vec();
    resumed.push("--resume");
    let second = unfold(&resumed);
    assert_eq!(second.status.code(), Some(0));
    assert!(!out.path().join("traces").exists());
}

#[test]
fn benchmark_with_bad_library_is_usage_error() {
    let lib = tempdir().unwrap();
    let out = unfold(&["benchmark", "--library", s(lib.path()), "--out", s(&lib.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn worker_variable_is_validated() {
    let lib = tempdir().unwrap();
    fs::write(
        lib.path().join("synth.json"),
        r#"{"m":4,"n":6,"response_seed":0,"relative_sigma":0.0,"noise_seed":0,
            "spectra":[{"name":"a","shape":"single-gaussian","p1":0.1}]}"#,
    )
    .unwrap();
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_unfold"))
            .args([
                "benchmark", "--library", s(lib.path()), "--runs", "1", "--fitness-set", "f2", "--algos", "dea", "--pop",
                "6", "--iters", "3", "--out", s(&lib.path().join("o")),
            ])
            .env("UNFOLD_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert_eq!(run("2").status.code(), Some(0));
    assert_eq!(run("zero").status.code(), Some(2));
}

//! End-to-end tests of the `sketchforge` binary: exit-code contract,
//! pipeline plumbing, determinism, and version refusal.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sketchforge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn sketchforge")
}

fn assert_code(out: &Output, code: i32, ctx: &str) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "{ctx}: stdout={} stderr={}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Deterministic pseudo-random PGM so fixtures need no RNG dependency.
fn write_pgm(path: &Path, w: usize, h: usize, seed: u64) {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for _ in 0..w * h {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        bytes.push((state >> 33) as u8);
    }
    fs::write(path, bytes).unwrap();
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let photos = dir.path().join("photos");
        let sketches = dir.path().join("sketches");
        fs::create_dir_all(&photos).unwrap();
        fs::create_dir_all(&sketches).unwrap();
        for i in 0..3 {
            write_pgm(&photos.join(format!("p{i}.pgm")), 48, 48, 10 + i);
            write_pgm(&sketches.join(format!("p{i}.pgm")), 48, 48, 50 + i);
        }
        Fixture { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn arg(&self, rel: &str) -> String {
        self.path(rel).display().to_string()
    }

    /// init-weights + build-ref with the small test extractor.
    fn with_store(self) -> Self {
        let out = run(&[
            "init-weights",
            "--extractor",
            "small:4,4,6,6,6",
            "--seed",
            "1",
            "--out",
            &self.arg("w.skfw"),
        ]);
        assert_code(&out, 0, "init-weights");
        let out = run(&[
            "build-ref",
            "--photos",
            &self.arg("photos"),
            "--sketches",
            &self.arg("sketches"),
            "--weights",
            &self.arg("w.skfw"),
            "--extractor",
            "small:4,4,6,6,6",
            "--out",
            &self.arg("ref.skrs"),
        ]);
        assert_code(&out, 0, "build-ref");
        self
    }
}

#[test]
fn missing_store_is_a_usage_error() {
    let fx = Fixture::new();
    let out = run(&[
        "train",
        "--photos",
        &fx.arg("photos"),
        "--store",
        &fx.arg("nope.skrs"),
        "--weights",
        &fx.arg("nope.skfw"),
        "--out",
        &fx.arg("run"),
    ]);
    assert_code(&out, 2, "train with missing store");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let fx = Fixture::new();
    fs::write(fx.path("bad.cfg"), "learning_rate = 0.1\n").unwrap();
    let out = run(&["--config", &fx.arg("bad.cfg"), "selfcheck"]);
    assert_code(&out, 2, "unknown config key");
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn config_file_values_are_used_and_flags_override() {
    let fx = Fixture::new().with_store();
    fs::write(
        fx.path("run.cfg"),
        "extractor = small:4,4,6,6,6\niterations = 1\nbatch_size = 2\nlambda_adv = 0\nlambda_tv = 0\naugment = false\n",
    )
    .unwrap();
    let out = run(&[
        "--config",
        &fx.arg("run.cfg"),
        "train",
        "--photos",
        &fx.arg("photos"),
        "--store",
        &fx.arg("ref.skrs"),
        "--weights",
        &fx.arg("w.skfw"),
        "--out",
        &fx.arg("run"),
        "--iterations",
        "2",
    ]);
    assert_code(&out, 0, "train via config file");
    let history = fs::read_to_string(fx.path("run/history.csv")).unwrap();
    // flag overrode the file's iterations = 1
    assert_eq!(history.lines().count(), 3, "header + 2 rows: {history}");
    assert!(history.starts_with("iter,l_p,l_gan_g,l_gan_d,l_tv,lr\n"));
    assert!(fx.path("run/checkpoint-init.skcp").is_file());
    assert!(fx.path("run/checkpoint-final.skcp").is_file());
}

#[test]
fn prep_skips_landmarkless_photos_and_is_deterministic() {
    let fx = Fixture::new();
    fs::create_dir_all(fx.path("raw")).unwrap();
    fs::create_dir_all(fx.path("lms")).unwrap();
    write_pgm(&fx.path("raw/a.pgm"), 260, 280, 3);
    write_pgm(&fx.path("raw/b.pgm"), 260, 280, 4);
    // 68 landmarks; only the eye points (37..48, 1-based) matter
    let mut lm = String::new();
    for i in 0..68 {
        let (x, y) = if (36..42).contains(&i) {
            (100.0 + (i - 36) as f64, 150.0)
        } else if (42..48).contains(&i) {
            (160.0 + (i - 42) as f64, 150.0)
        } else {
            (10.0 + i as f64, 20.0 + i as f64)
        };
        lm.push_str(&format!("{x} {y}\n"));
    }
    fs::write(fx.path("lms/a.txt"), lm).unwrap();

    let args = [
        "prep",
        "--photos",
        &fx.arg("raw"),
        "--landmarks",
        &fx.arg("lms"),
        "--out",
        &fx.arg("aligned"),
    ];
    let out = run(&args);
    assert_code(&out, 0, "prep with one missing landmark file");
    let manifest = fs::read_to_string(fx.path("aligned/manifest.txt")).unwrap();
    assert!(manifest.contains("ok a"));
    assert!(manifest.contains("skip b"));
    let aligned = fs::read(fx.path("aligned/a.pgm")).unwrap();
    assert!(aligned.starts_with(b"P5\n200 250\n"));
    assert!(!fx.path("aligned/b.pgm").exists());

    // rerun is bitwise identical
    let out = run(&args);
    assert_code(&out, 0, "prep rerun");
    assert_eq!(aligned, fs::read(fx.path("aligned/a.pgm")).unwrap());
}

#[test]
fn prep_on_empty_dir_writes_empty_manifest() {
    let fx = Fixture::new();
    fs::create_dir_all(fx.path("raw")).unwrap();
    fs::create_dir_all(fx.path("lms")).unwrap();
    let out = run(&[
        "prep",
        "--photos",
        &fx.arg("raw"),
        "--landmarks",
        &fx.arg("lms"),
        "--out",
        &fx.arg("aligned"),
    ]);
    assert_code(&out, 0, "prep on empty dir");
    assert_eq!(fs::read_to_string(fx.path("aligned/manifest.txt")).unwrap(), "");
}

#[test]
fn match_reports_self_identity_and_dumps_pixels() {
    let fx = Fixture::new().with_store();
    let out = run(&[
        "match",
        "--photo",
        &fx.arg("photos/p0.pgm"),
        "--store",
        &fx.arg("ref.skrs"),
        "--weights",
        &fx.arg("w.skfw"),
        "--extractor",
        "small:4,4,6,6,6",
        "--layer",
        "3",
        "--dump-pixels",
        &fx.arg("recon.pgm"),
    ]);
    assert_code(&out, 0, "match");
    let stdout = String::from_utf8_lossy(&out.stdout);
    // a reference photo matches its own pair everywhere with cosine 1
    assert!(stdout.contains("mean cosine 1.0000"), "{stdout}");
    let recon = fs::read(fx.path("recon.pgm")).unwrap();
    assert!(recon.starts_with(b"P5\n48 48\n"));
}

#[test]
fn synth_preserves_extent_and_is_deterministic() {
    let fx = Fixture::new().with_store();
    let out = run(&[
        "train",
        "--photos",
        &fx.arg("photos"),
        "--store",
        &fx.arg("ref.skrs"),
        "--weights",
        &fx.arg("w.skfw"),
        "--extractor",
        "small:4,4,6,6,6",
        "--out",
        &fx.arg("run"),
        "--iterations",
        "1",
        "--batch-size",
        "1",
        "--lambda-adv",
        "0",
        "--lambda-tv",
        "0",
        "--no-augment",
    ]);
    assert_code(&out, 0, "short train");

    // one full-size photo checks the extent contract
    fs::create_dir_all(fx.path("full")).unwrap();
    write_pgm(&fx.path("full/big.pgm"), 200, 250, 99);
    let args = [
        "synth",
        "--checkpoint",
        &fx.arg("run/checkpoint-final.skcp"),
        "--photos",
        &fx.arg("full"),
        "--out",
        &fx.arg("synth"),
    ];
    let out = run(&args);
    assert_code(&out, 0, "synth");
    let sketch = fs::read(fx.path("synth/big.pgm")).unwrap();
    assert!(sketch.starts_with(b"P5\n200 250\n"));

    let out = run(&args);
    assert_code(&out, 0, "synth rerun");
    assert_eq!(sketch, fs::read(fx.path("synth/big.pgm")).unwrap());
}

#[test]
fn eval_emits_csv_with_and_without_smoothing() {
    let fx = Fixture::new();
    write_pgm(&fx.path("a.pgm"), 48, 48, 7);
    write_pgm(&fx.path("b.pgm"), 48, 48, 8);
    fs::write(
        fx.path("pairs.txt"),
        format!("x {} {}\n", fx.arg("a.pgm"), fx.arg("b.pgm")),
    )
    .unwrap();

    let out = run(&["eval", "--pairs", &fx.arg("pairs.txt")]);
    assert_code(&out, 0, "eval");
    let csv = String::from_utf8_lossy(&out.stdout);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("name,ssim,fsim,ssim_smoothed,fsim_smoothed")
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("x,"), "{row}");
    assert!(row.ends_with(",,"), "smoothed columns empty: {row}");

    let out = run(&[
        "eval",
        "--pairs",
        &fx.arg("pairs.txt"),
        "--smooth",
        "--out",
        &fx.arg("scores.csv"),
    ]);
    assert_code(&out, 0, "eval --smooth");
    let csv = fs::read_to_string(fx.path("scores.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert_eq!(row.split(',').count(), 5);
    assert!(row.split(',').skip(1).all(|f| f.parse::<f64>().is_ok()), "{row}");

    // identical inputs score ssim = fsim = 1
    fs::write(
        fx.path("same.txt"),
        format!("s {} {}\n", fx.arg("a.pgm"), fx.arg("a.pgm")),
    )
    .unwrap();
    let out = run(&["eval", "--pairs", &fx.arg("same.txt")]);
    assert_code(&out, 0, "eval identity");
    let csv = String::from_utf8_lossy(&out.stdout);
    let fields: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(1)
        .take(2)
        .map(|f| f.parse().unwrap())
        .collect();
    assert!((fields[0] - 1.0).abs() <= 1e-9, "ssim {}", fields[0]);
    assert!((fields[1] - 1.0).abs() <= 1e-6, "fsim {}", fields[1]);
}

#[test]
fn selfcheck_passes_on_fresh_build() {
    let out = run(&["selfcheck", "--trials", "1"]);
    assert_code(&out, 0, "selfcheck");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all checks passed"), "{stdout}");
}

#[test]
fn version_mismatched_files_are_refused_with_versions() {
    let fx = Fixture::new().with_store();

    // corrupt the store version field (bytes 4..8 after the magic)
    let mut store = fs::read(fx.path("ref.skrs")).unwrap();
    store[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(fx.path("bad.skrs"), &store).unwrap();
    let out = run(&[
        "train",
        "--photos",
        &fx.arg("photos"),
        "--store",
        &fx.arg("bad.skrs"),
        "--weights",
        &fx.arg("w.skfw"),
        "--extractor",
        "small:4,4,6,6,6",
        "--out",
        &fx.arg("run"),
    ]);
    assert_code(&out, 1, "version-mismatched store");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("99") && stderr.contains("version 1"), "{stderr}");

    // checkpoint with a future version
    let mut ckpt = Vec::new();
    ckpt.extend_from_slice(b"SKCP");
    ckpt.extend_from_slice(&99u32.to_le_bytes());
    fs::write(fx.path("bad.skcp"), &ckpt).unwrap();
    let out = run(&[
        "synth",
        "--checkpoint",
        &fx.arg("bad.skcp"),
        "--photos",
        &fx.arg("photos"),
        "--out",
        &fx.arg("synth"),
    ]);
    assert_code(&out, 1, "version-mismatched checkpoint");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("99") && stderr.contains("1"), "{stderr}");
}

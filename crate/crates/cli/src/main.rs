//! Operator surface for the sketchforge pipeline: dataset prep, reference
//! store construction, patch-match inspection, training, synthesis,
//! evaluation and self-verification.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sketchforge::eval::{bilateral_filter, fsim, ssim, BilateralParams};
use sketchforge::features::{Extractor, Tap};
use sketchforge::image_io::{atomic_write, read_image, write_image};
use sketchforge::patchmatch::{
    build_reference_store, compose_pseudo_feature, exhaustive_match_patches, extract_patches,
    match_patches, naive_reconstruction, preselect_references, ReferenceStore, STORE_VERSION,
};
use sketchforge::preprocess::{align, read_landmarks};
use sketchforge::tensor::{chw, Real, Tensor};
use sketchforge::train::{gradient_check_all, load_checkpoint, train, FD_TOL};

use config::{ExtractorKind, RunConfig};

/// Usage problems exit 2, runtime failures exit 1.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn runtime(err: impl fmt::Display) -> CliError {
    CliError::Runtime(err.to_string())
}

#[derive(Parser)]
#[command(
    name = "sketchforge",
    version,
    about = "Semi-supervised face sketch synthesis toolkit"
)]
struct Cli {
    /// Key=value config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOverrides {
    /// Extractor topology: vgg19 or small:w1,w2,w3,w4,w5.
    #[arg(long)]
    extractor: Option<String>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write randomly initialized feature-extractor weights.
    InitWeights {
        #[command(flatten)]
        common: CommonOverrides,
        /// Output weight file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Align photos to the canonical 250x200 frame using landmark files.
    Prep {
        /// Directory of PGM/PPM photos.
        #[arg(long)]
        photos: PathBuf,
        /// Directory of landmark files (<stem>.txt, 68 "x y" lines).
        #[arg(long)]
        landmarks: PathBuf,
        /// Output directory (created if absent).
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the reference store from aligned photo/sketch pairs.
    BuildRef {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        photos: PathBuf,
        #[arg(long)]
        sketches: PathBuf,
        /// Extractor weight file.
        #[arg(long)]
        weights: PathBuf,
        /// Output store file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Match one photo against the store and report the result.
    Match {
        #[command(flatten)]
        common: CommonOverrides,
        #[arg(long)]
        photo: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Feature layer (1..=5) the match field is computed on.
        #[arg(long, default_value_t = 3)]
        layer: u8,
        /// Write the pixel-level projection of the match field here.
        #[arg(long)]
        dump_pixels: Option<PathBuf>,
    },
    /// Train the generator/discriminator pair.
    Train {
        #[command(flatten)]
        common: CommonOverrides,
        /// Directory of aligned training photos.
        #[arg(long)]
        photos: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        /// Output directory for checkpoints and history.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        lambda_tv: Option<Real>,
        #[arg(long)]
        lambda_adv: Option<Real>,
        /// Disable online color augmentation.
        #[arg(long)]
        no_augment: bool,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Run the generator over a directory of photos.
    Synth {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        photos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score synthesized sketches against ground truth (CSV output).
    Eval {
        /// List file: one "name synth_path truth_path" per line.
        #[arg(long)]
        pairs: PathBuf,
        /// Also score bilateral-smoothed copies.
        #[arg(long)]
        smooth: bool,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify gradients and the patch matcher against oracles.
    Selfcheck {
        #[command(flatten)]
        common: CommonOverrides,
        /// Randomized trials per component.
        #[arg(long, default_value_t = 3)]
        trials: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match base_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command, cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn base_config(path: Option<&Path>) -> Result<RunConfig, config::ConfigError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn apply_common(cfg: &mut RunConfig, common: &CommonOverrides) -> Result<(), CliError> {
    if let Some(e) = &common.extractor {
        cfg.extractor = ExtractorKind::parse(e).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    Ok(())
}

fn run(command: Command, mut cfg: RunConfig) -> Result<(), CliError> {
    match command {
        Command::InitWeights { common, out } => {
            apply_common(&mut cfg, &common)?;
            cmd_init_weights(&cfg, &out)
        }
        Command::Prep {
            photos,
            landmarks,
            out,
        } => cmd_prep(&photos, &landmarks, &out),
        Command::BuildRef {
            common,
            photos,
            sketches,
            weights,
            out,
        } => {
            apply_common(&mut cfg, &common)?;
            cmd_build_ref(&cfg, &photos, &sketches, &weights, &out)
        }
        Command::Match {
            common,
            photo,
            store,
            weights,
            layer,
            dump_pixels,
        } => {
            apply_common(&mut cfg, &common)?;
            cmd_match(&cfg, &photo, &store, &weights, layer, dump_pixels.as_deref())
        }
        Command::Train {
            common,
            photos,
            store,
            weights,
            out,
            iterations,
            batch_size,
            lr,
            lambda_tv,
            lambda_adv,
            no_augment,
            checkpoint_every,
        } => {
            apply_common(&mut cfg, &common)?;
            if let Some(v) = iterations {
                cfg.train.iterations = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(v) = lr {
                cfg.train.lr_initial = v;
            }
            if let Some(v) = lambda_tv {
                cfg.train.weights.lambda_tv = v;
            }
            if let Some(v) = lambda_adv {
                cfg.train.weights.lambda_adv = v;
            }
            if no_augment {
                cfg.train.augment = false;
            }
            if let Some(v) = checkpoint_every {
                cfg.train.checkpoint_every = v;
            }
            cmd_train(&cfg, &photos, &store, &weights, &out)
        }
        Command::Synth {
            checkpoint,
            photos,
            out,
        } => cmd_synth(&checkpoint, &photos, &out),
        Command::Eval { pairs, smooth, out } => cmd_eval(&cfg, &pairs, smooth, out.as_deref()),
        Command::Selfcheck { common, trials } => {
            apply_common(&mut cfg, &common)?;
            cmd_selfcheck(&cfg, trials)
        }
    }
}

// ---------------------------------------------------------------- helpers

fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_dir() {
        return Err(usage(format!("{what} directory {} not found", path.display())));
    }
    Ok(())
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(usage(format!("{what} file {} not found", path.display())));
    }
    Ok(())
}

/// PGM/PPM files in `dir`, as (stem, path), sorted by stem.
fn list_images(dir: &Path) -> Result<Vec<(String, PathBuf)>, CliError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(runtime)?;
    for entry in entries {
        let path = entry.map_err(runtime)?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("pgm") | Some("ppm")) {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| runtime(format!("unusable file name {}", path.display())))?
                .to_string();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

fn load_extractor(cfg: &RunConfig, weights: &Path) -> Result<Extractor, CliError> {
    require_file(weights, "weights")?;
    Extractor::load(weights, cfg.extractor.spec()).map_err(runtime)
}

fn load_store(path: &Path) -> Result<ReferenceStore, CliError> {
    require_file(path, "store")?;
    ReferenceStore::load(path).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("unsupported store version") {
            runtime(format!("{msg} (this build reads version {STORE_VERSION})"))
        } else {
            runtime(msg)
        }
    })
}

fn to_gray(img: &Tensor) -> Tensor {
    let (c, h, w) = chw(img);
    if c == 1 {
        return img.clone();
    }
    let plane = h * w;
    let d = img.data();
    let gray: Vec<Real> = (0..plane)
        .map(|i| 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i])
        .collect();
    Tensor::new(&[1, h, w], gray).expect("gray shape")
}

// --------------------------------------------------------------- commands

fn cmd_init_weights(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let extractor = Extractor::random(cfg.extractor.spec(), cfg.train.seed);
    extractor.save(out).map_err(runtime)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_prep(photos: &Path, landmarks: &Path, out: &Path) -> Result<(), CliError> {
    require_dir(photos, "photo")?;
    require_dir(landmarks, "landmark")?;
    std::fs::create_dir_all(out).map_err(runtime)?;

    let mut manifest = String::new();
    let mut aligned = 0usize;
    for (stem, path) in list_images(photos)? {
        let lm_path = landmarks.join(format!("{stem}.txt"));
        if !lm_path.is_file() {
            eprintln!("warning: no landmarks for {stem}, skipping");
            manifest.push_str(&format!("skip {stem} missing-landmarks\n"));
            continue;
        }
        let image = read_image(&path).map_err(runtime)?;
        let lm = read_landmarks(&lm_path).map_err(runtime)?;
        let warped = align(&image, &lm).map_err(runtime)?;
        let (c, _, _) = chw(&warped);
        let ext = if c == 1 { "pgm" } else { "ppm" };
        write_image(&out.join(format!("{stem}.{ext}")), &warped).map_err(runtime)?;
        manifest.push_str(&format!("ok {stem}\n"));
        aligned += 1;
    }
    atomic_write(&out.join("manifest.txt"), manifest.as_bytes()).map_err(runtime)?;
    println!("aligned {aligned} photos into {}", out.display());
    Ok(())
}

fn cmd_build_ref(
    cfg: &RunConfig,
    photos: &Path,
    sketches: &Path,
    weights: &Path,
    out: &Path,
) -> Result<(), CliError> {
    require_dir(photos, "photo")?;
    require_dir(sketches, "sketch")?;
    let extractor = load_extractor(cfg, weights)?;

    let sketch_files = list_images(sketches)?;
    let mut pairs = Vec::new();
    for (stem, photo_path) in list_images(photos)? {
        let sketch_path = sketch_files
            .iter()
            .find(|(s, _)| *s == stem)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| runtime(format!("no sketch for photo {stem}")))?;
        let photo = read_image(&photo_path).map_err(runtime)?;
        let sketch = read_image(&sketch_path).map_err(runtime)?;
        pairs.push((photo, to_gray(&sketch), stem));
    }
    if pairs.is_empty() {
        return Err(usage(format!("no PGM/PPM photos in {}", photos.display())));
    }

    let mut taps = cfg.train.weights.layers.clone();
    if !taps.contains(&Tap::RELU5_1) {
        taps.push(Tap::RELU5_1);
    }
    let store = build_reference_store(&pairs, &extractor, &taps, cfg.train.patch_k)
        .map_err(runtime)?;
    store.save(out).map_err(runtime)?;
    println!(
        "stored {} pairs ({} taps, k={}) in {}",
        store.pairs.len(),
        store.taps.len(),
        store.patch_k,
        out.display()
    );
    Ok(())
}

fn cmd_match(
    cfg: &RunConfig,
    photo: &Path,
    store: &Path,
    weights: &Path,
    layer: u8,
    dump_pixels: Option<&Path>,
) -> Result<(), CliError> {
    if !(1..=5).contains(&layer) {
        return Err(usage(format!("layer must be 1..=5, got {layer}")));
    }
    let tap = Tap(layer);
    require_file(photo, "photo")?;
    let store = load_store(store)?;
    if !store.taps.contains(&tap) {
        return Err(usage(format!(
            "store lacks features for layer {layer}; rebuild with pm_layers including it"
        )));
    }
    let extractor = load_extractor(cfg, weights)?;

    let image = read_image(photo).map_err(runtime)?;
    let (_, h, w) = chw(&image);
    let mut taps = vec![tap];
    if tap != Tap::RELU5_1 {
        taps.push(Tap::RELU5_1);
    }
    let feats = extractor.extract(&image, &taps).map_err(runtime)?;
    let (sig, _) = sketchforge::features::preselect_signature(&feats).map_err(runtime)?;
    let candidates =
        preselect_references(&sig, &store, cfg.train.k_ref).map_err(runtime)?;
    let (grid, patches) = extract_patches(feats.get(tap).map_err(runtime)?, store.patch_k, tap)
        .map_err(runtime)?;
    let result = match_patches(&grid, &patches, &store, &candidates, tap).map_err(runtime)?;

    let mean_score = result.entries.iter().map(|e| e.score as f64).sum::<f64>()
        / result.entries.len().max(1) as f64;
    let names: Vec<&str> = candidates
        .iter()
        .map(|&i| store.pairs[i].id.as_str())
        .collect();
    println!(
        "layer {layer}: {} patches over candidates [{}], mean cosine {:.4}",
        result.entries.len(),
        names.join(", "),
        mean_score
    );
    for &ci in &candidates {
        let hits = result.entries.iter().filter(|e| e.pair == ci).count();
        println!("  {}: {} patches", store.pairs[ci].id, hits);
    }

    if let Some(dump) = dump_pixels {
        let img = naive_reconstruction(&result, &store, h, w).map_err(runtime)?;
        write_image(dump, &img).map_err(runtime)?;
        println!("wrote {}", dump.display());
    }
    Ok(())
}

fn cmd_train(
    cfg: &RunConfig,
    photos: &Path,
    store: &Path,
    weights: &Path,
    out: &Path,
) -> Result<(), CliError> {
    require_dir(photos, "photo")?;
    let store = load_store(store)?;
    let extractor = load_extractor(cfg, weights)?;
    std::fs::create_dir_all(out).map_err(runtime)?;

    let mut images = Vec::new();
    for (_, path) in list_images(photos)? {
        images.push(read_image(&path).map_err(runtime)?);
    }
    if images.is_empty() {
        return Err(usage(format!("no PGM/PPM photos in {}", photos.display())));
    }

    let outcome = train(&cfg.train, &extractor, &store, &images, Some(out)).map_err(runtime)?;
    if let Some(last) = outcome.history.last() {
        println!(
            "finished {} iterations: l_p {:.4}, l_gan_g {:.4}, l_gan_d {:.4}, l_tv {:.6}",
            outcome.history.len(),
            last.l_p,
            last.l_gan_g,
            last.l_gan_d,
            last.l_tv
        );
    } else {
        println!("finished 0 iterations");
    }
    println!("checkpoints and history.csv in {}", out.display());
    Ok(())
}

fn cmd_synth(checkpoint: &Path, photos: &Path, out: &Path) -> Result<(), CliError> {
    require_file(checkpoint, "checkpoint")?;
    require_dir(photos, "photo")?;
    std::fs::create_dir_all(out).map_err(runtime)?;

    let (generator, _, _, _) = load_checkpoint(checkpoint).map_err(runtime)?;
    let mut count = 0usize;
    for (stem, path) in list_images(photos)? {
        let photo = read_image(&path).map_err(runtime)?;
        let sketch = generator.forward(&photo).map_err(runtime)?;
        write_image(&out.join(format!("{stem}.pgm")), &sketch).map_err(runtime)?;
        count += 1;
    }
    println!("synthesized {count} sketches into {}", out.display());
    Ok(())
}

fn cmd_eval(
    cfg: &RunConfig,
    pairs: &Path,
    smooth: bool,
    out: Option<&Path>,
) -> Result<(), CliError> {
    require_file(pairs, "pairs list")?;
    let text = std::fs::read_to_string(pairs).map_err(runtime)?;
    let params = BilateralParams {
        sigma_spatial: cfg.smooth_sigma_spatial,
        sigma_range: cfg.smooth_sigma_range,
        radius: cfg.smooth_radius,
    };

    let mut csv = String::from("name,ssim,fsim,ssim_smoothed,fsim_smoothed\n");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(usage(format!(
                "{}:{}: expected `name synth_path truth_path`",
                pairs.display(),
                lineno + 1
            )));
        }
        let (name, a_path, b_path) = (fields[0], fields[1], fields[2]);
        let a = to_gray(&read_image(Path::new(a_path)).map_err(runtime)?);
        let b = to_gray(&read_image(Path::new(b_path)).map_err(runtime)?);
        let s = ssim(&a, &b, 1.0).map_err(runtime)?;
        let f = fsim(&a, &b).map_err(runtime)?;
        if smooth {
            let sm = bilateral_filter(&a, &params);
            let ss = ssim(&sm, &b, 1.0).map_err(runtime)?;
            let fs = fsim(&sm, &b).map_err(runtime)?;
            csv.push_str(&format!("{name},{s},{f},{ss},{fs}\n"));
        } else {
            csv.push_str(&format!("{name},{s},{f},,\n"));
        }
    }

    match out {
        Some(p) => {
            atomic_write(p, csv.as_bytes()).map_err(runtime)?;
            println!("wrote {}", p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_selfcheck(cfg: &RunConfig, trials: usize) -> Result<(), CliError> {
    let mut failed = false;

    println!("gradient checks (tolerance {FD_TOL:.0e}):");
    let reports = gradient_check_all(trials, 5, cfg.train.seed).map_err(runtime)?;
    for report in reports {
        let ok = report.passed();
        failed |= !ok;
        println!(
            "  {:<20} {} (max rel err {:.3e})",
            report.component,
            if ok { "pass" } else { "FAIL" },
            report.max_rel_err
        );
    }

    println!("matcher oracle comparison:");
    match matcher_oracle_check(cfg.train.seed) {
        Ok(instances) => println!("  convolution vs exhaustive  pass ({instances} instances)"),
        Err(msg) => {
            failed = true;
            println!("  convolution vs exhaustive  FAIL ({msg})");
        }
    }

    if failed {
        return Err(CliError::Runtime("selfcheck failed".into()));
    }
    println!("all checks passed");
    Ok(())
}

/// Random small instances: the convolution-based matcher must agree with
/// the exhaustive cosine search on indices exactly and scores within 1e-5.
fn matcher_oracle_check(seed: u64) -> Result<usize, String> {
    use rand::Rng as _;
    use rand::SeedableRng as _;
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = 25;
    for inst in 0..instances {
        let extractor = Extractor::random(
            sketchforge::features::ExtractorSpec::small([4, 4, 6, 6, 6]),
            seed.wrapping_add(inst),
        );
        let n = rng.gen_range(2..=3);
        let pairs: Vec<(Tensor, Tensor, String)> = (0..n)
            .map(|i| {
                let mk = |r: &mut ChaCha8Rng| {
                    let data: Vec<Real> = (0..40 * 40).map(|_| r.gen_range(0.0..1.0)).collect();
                    Tensor::new(&[1, 40, 40], data).unwrap()
                };
                (mk(&mut rng), mk(&mut rng), format!("p{i}"))
            })
            .collect();
        let store = build_reference_store(&pairs, &extractor, &[Tap::RELU3_1, Tap::RELU5_1], 3)
            .map_err(|e| e.to_string())?;

        let qdata: Vec<Real> = (0..40 * 40).map(|_| rng.gen_range(0.0..1.0)).collect();
        let query = Tensor::new(&[1, 40, 40], qdata).unwrap();
        let feats = extractor
            .extract(&query, &[Tap::RELU3_1])
            .map_err(|e| e.to_string())?;
        let fm = feats.get(Tap::RELU3_1).map_err(|e| e.to_string())?;
        let (grid, patches) = extract_patches(fm, 3, Tap::RELU3_1).map_err(|e| e.to_string())?;
        let cands: Vec<usize> = (0..n as usize).collect();

        let fast =
            match_patches(&grid, &patches, &store, &cands, Tap::RELU3_1).map_err(|e| e.to_string())?;
        let slow = exhaustive_match_patches(&grid, &patches, &store, &cands, Tap::RELU3_1)
            .map_err(|e| e.to_string())?;
        for (j, (a, b)) in fast.entries.iter().zip(&slow.entries).enumerate() {
            if a.pair != b.pair || a.patch != b.patch {
                return Err(format!(
                    "instance {inst} patch {j}: ({},{}) vs ({},{})",
                    a.pair, a.patch, b.pair, b.patch
                ));
            }
            if (a.score - b.score).abs() > 1e-5 {
                return Err(format!(
                    "instance {inst} patch {j}: score {} vs {}",
                    a.score, b.score
                ));
            }
        }
        // pseudo feature composition must succeed on the agreed field
        compose_pseudo_feature(&fast, &store).map_err(|e| e.to_string())?;
    }
    Ok(instances as usize)
}

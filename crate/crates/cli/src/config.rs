//! Plain-text `key = value` run configuration. Every key has an explicit
//! schema entry; unknown keys are rejected so typos fail loudly. Values
//! given on the command line override values from the file.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use sketchforge::features::{ExtractorSpec, Tap};
use sketchforge::train::TrainConfig;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Which extractor topology weight files are interpreted against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtractorKind {
    Vgg19,
    Small([usize; 5]),
}

impl ExtractorKind {
    pub fn spec(&self) -> ExtractorSpec {
        match self {
            ExtractorKind::Vgg19 => ExtractorSpec::vgg19(),
            ExtractorKind::Small(w) => ExtractorSpec::small(*w),
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        if s == "vgg19" {
            return Ok(ExtractorKind::Vgg19);
        }
        if let Some(rest) = s.strip_prefix("small:") {
            let widths: Vec<usize> = rest
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| ConfigError(format!("bad extractor widths {rest:?}")))?;
            if widths.len() != 5 || widths.iter().any(|&w| w == 0) {
                return Err(ConfigError(format!(
                    "extractor small: needs 5 positive widths, got {rest:?}"
                )));
            }
            return Ok(ExtractorKind::Small([
                widths[0], widths[1], widths[2], widths[3], widths[4],
            ]));
        }
        Err(ConfigError(format!(
            "unknown extractor {s:?} (expected vgg19 or small:w1,w2,w3,w4,w5)"
        )))
    }
}

/// All tunables a run can carry. Defaults mirror the library defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub extractor: ExtractorKind,
    pub train: TrainConfig,
    /// Bilateral smoothing used by `eval --smooth`.
    pub smooth_sigma_spatial: f64,
    pub smooth_sigma_range: f64,
    pub smooth_radius: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            extractor: ExtractorKind::Vgg19,
            train: TrainConfig::default(),
            smooth_sigma_spatial: 3.0,
            smooth_sigma_range: 0.1,
            smooth_radius: 7,
        }
    }
}

const KEYS: &[&str] = &[
    "extractor",
    "iterations",
    "batch_size",
    "lr",
    "seed",
    "k_ref",
    "patch_k",
    "augment",
    "checkpoint_every",
    "gen_features",
    "gen_blocks",
    "disc_widths",
    "lambda_p",
    "lambda_adv",
    "lambda_tv",
    "pm_layers",
    "smooth_sigma_spatial",
    "smooth_sigma_range",
    "smooth_radius",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse::<T>()
        .map_err(|_| ConfigError(format!("bad value {value:?} for key {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|t| t.trim().parse::<T>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError(format!("bad list {value:?} for key {key}")))
}

fn parse_layers(key: &str, value: &str) -> Result<Vec<Tap>, ConfigError> {
    let nums: Vec<u8> = parse_list(key, value)?;
    if nums.is_empty() || nums.iter().any(|&l| !(1..=5).contains(&l)) {
        return Err(ConfigError(format!(
            "{key} must list layers from 1..=5, got {value:?}"
        )));
    }
    let set: BTreeSet<u8> = nums.into_iter().collect();
    Ok(set.into_iter().map(Tap).collect())
}

impl RunConfig {
    /// Applies one `key = value` assignment, rejecting unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError(format!("unknown key {key:?}")));
        }
        match key {
            "extractor" => self.extractor = ExtractorKind::parse(value)?,
            "iterations" => self.train.iterations = parse_num(key, value)?,
            "batch_size" => self.train.batch_size = parse_num(key, value)?,
            "lr" => self.train.lr_initial = parse_num(key, value)?,
            "seed" => self.train.seed = parse_num(key, value)?,
            "k_ref" => self.train.k_ref = parse_num(key, value)?,
            "patch_k" => self.train.patch_k = parse_num(key, value)?,
            "augment" => {
                self.train.augment = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(ConfigError(format!("augment must be true/false, got {value:?}"))),
                }
            }
            "checkpoint_every" => self.train.checkpoint_every = parse_num(key, value)?,
            "gen_features" => self.train.gen_features = parse_num(key, value)?,
            "gen_blocks" => self.train.gen_blocks = parse_num(key, value)?,
            "disc_widths" => self.train.disc_widths = parse_list(key, value)?,
            "lambda_p" => self.train.weights.lambda_p = parse_num(key, value)?,
            "lambda_adv" => self.train.weights.lambda_adv = parse_num(key, value)?,
            "lambda_tv" => self.train.weights.lambda_tv = parse_num(key, value)?,
            "pm_layers" => self.train.weights.layers = parse_layers(key, value)?,
            "smooth_sigma_spatial" => self.smooth_sigma_spatial = parse_num(key, value)?,
            "smooth_sigma_range" => self.smooth_sigma_range = parse_num(key, value)?,
            "smooth_radius" => self.smooth_radius = parse_num(key, value)?,
            _ => unreachable!("key membership already checked"),
        }
        Ok(())
    }

    /// Parses a config file: one `key = value` per line, `#` comments,
    /// blank lines ignored.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ConfigError(format!("{}:{}: {}", path.display(), lineno + 1, e.0)))?;
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train.iterations, 200);
        assert_eq!(cfg.train.batch_size, 6);
        assert_eq!(cfg.train.k_ref, 5);
        assert_eq!(cfg.extractor, ExtractorKind::Vgg19);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.set("learning_rate", "0.1").is_err());
    }

    #[test]
    fn extractor_forms_parse() {
        assert_eq!(ExtractorKind::parse("vgg19").unwrap(), ExtractorKind::Vgg19);
        assert_eq!(
            ExtractorKind::parse("small:4,6,8,8,8").unwrap(),
            ExtractorKind::Small([4, 6, 8, 8, 8])
        );
        assert!(ExtractorKind::parse("small:1,2").is_err());
        assert!(ExtractorKind::parse("resnet").is_err());
    }

    #[test]
    fn layer_list_normalizes_and_validates() {
        let mut cfg = RunConfig::default();
        cfg.set("pm_layers", "5,3,4,3").unwrap();
        assert_eq!(cfg.train.weights.layers, vec![Tap(3), Tap(4), Tap(5)]);
        assert!(cfg.set("pm_layers", "0,3").is_err());
        assert!(cfg.set("pm_layers", "").is_err());
    }
}

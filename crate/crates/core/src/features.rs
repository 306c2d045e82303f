//! Feature extractor with the VGG-19 prefix topology and named taps
//! relu1_1 .. relu5_1. Weights load from a portable little-endian file so
//! pretrained and randomly initialized extractors are interchangeable.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image_io::atomic_write;
use crate::tensor::{chw, conv2d_valid, max_pool2, relu, Real, Tensor};

pub const WEIGHT_MAGIC: &[u8; 4] = b"SKFW";
pub const WEIGHT_VERSION: u32 = 1;
const NORM_MAGIC: &[u8; 4] = b"NORM";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad magic (expected SKFW)")]
    BadMagic { path: String },
    #[error("{path}: unsupported weight file version {0}", .version)]
    BadVersion { path: String, version: u32 },
    #[error("{path}: truncated weight file")]
    Truncated { path: String },
    #[error("{path}: conv layer {layer}: file has {found:?}, spec expects {expected:?} (out,in,kh,kw)")]
    LayerShapeMismatch {
        path: String,
        layer: usize,
        found: [u32; 4],
        expected: [u32; 4],
    },
    #[error("{path}: file has {found} conv layers, spec expects {expected}")]
    LayerCountMismatch {
        path: String,
        found: usize,
        expected: usize,
    },
    #[error("unknown tap name {0:?} (expected relu1_1..relu5_1)")]
    UnknownTap(String),
    #[error("tap {0} not present in feature set")]
    MissingTap(Tap),
    #[error("image {h}x{w} too small (minimum 32x32)")]
    ImageTooSmall { h: usize, w: usize },
    #[error("image must have 1 or 3 channels, got {0}")]
    BadImageChannels(usize),
}

/// One of the named extractor taps; `Tap(l)` is the activation after the
/// first conv+relu of block `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tap(pub u8);

impl Tap {
    pub const RELU1_1: Tap = Tap(1);
    pub const RELU2_1: Tap = Tap(2);
    pub const RELU3_1: Tap = Tap(3);
    pub const RELU4_1: Tap = Tap(4);
    pub const RELU5_1: Tap = Tap(5);

    pub fn parse(name: &str) -> Result<Tap, FeatureError> {
        match name {
            "relu1_1" => Ok(Tap(1)),
            "relu2_1" => Ok(Tap(2)),
            "relu3_1" => Ok(Tap(3)),
            "relu4_1" => Ok(Tap(4)),
            "relu5_1" => Ok(Tap(5)),
            other => {
                // bare block index is accepted in config files
                if let Ok(l @ 1..=5) = other.parse::<u8>() {
                    return Ok(Tap(l));
                }
                Err(FeatureError::UnknownTap(other.to_string()))
            }
        }
    }

    /// Spatial down-sampling factor of this tap relative to the input.
    pub fn scale(self) -> usize {
        1 << (self.0 - 1)
    }
}

impl std::fmt::Display for Tap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "relu{}_1", self.0)
    }
}

/// Topology description: per block, the number of 3x3 convs and the channel
/// width. A 2x2 max pool sits between consecutive blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractorSpec {
    pub blocks: Vec<(usize, usize)>,
}

impl ExtractorSpec {
    /// VGG-19 prefix up to relu5_1.
    pub fn vgg19() -> Self {
        Self {
            blocks: vec![(2, 64), (2, 128), (4, 256), (4, 512), (1, 512)],
        }
    }

    /// Narrow five-block topology for desk-scale fixtures and tests.
    pub fn small(widths: [usize; 5]) -> Self {
        Self {
            blocks: widths.iter().map(|&w| (1, w)).collect(),
        }
    }

    /// (out, in) channel pairs for every conv layer in order.
    pub fn conv_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut in_c = 3usize;
        for &(convs, width) in &self.blocks {
            for _ in 0..convs {
                dims.push((width, in_c));
                in_c = width;
            }
        }
        dims
    }

    /// Spatial extent of a tap for an input of the given extent (ceil
    /// pooling between blocks).
    pub fn tap_extent(&self, tap: Tap, h: usize, w: usize) -> (usize, usize) {
        let (mut th, mut tw) = (h, w);
        for _ in 1..tap.0 {
            th = th.div_ceil(2);
            tw = tw.div_ceil(2);
        }
        (th, tw)
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// out x in x 3 x 3
    pub weight: Tensor,
    pub bias: Vec<Real>,
}

/// Optional per-channel input normalization carried by the weight file;
/// pretrained VGG-19 weights need mean subtraction, random weights do not.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: [Real; 3],
    pub std: [Real; 3],
}

#[derive(Debug, Clone)]
pub struct Extractor {
    pub spec: ExtractorSpec,
    pub convs: Vec<ConvLayer>,
    pub norm: Option<Normalization>,
}

/// Per-tap feature maps of one image.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub maps: BTreeMap<Tap, Tensor>,
    pub source: String,
}

impl FeatureSet {
    pub fn get(&self, tap: Tap) -> Result<&Tensor, FeatureError> {
        self.maps.get(&tap).ok_or(FeatureError::MissingTap(tap))
    }
}

impl Extractor {
    pub fn random(spec: ExtractorSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let convs = spec
            .conv_dims()
            .iter()
            .map(|&(out, inp)| {
                let fan_in = (inp * 9) as Real;
                let scale = (2.0 / fan_in).sqrt();
                let n = out * inp * 9;
                let data: Vec<Real> = (0..n)
                    .map(|_| {
                        let u: Real = rng.gen_range(-1.0..1.0);
                        u * scale
                    })
                    .collect();
                ConvLayer {
                    weight: Tensor::new(&[out, inp, 3, 3], data).expect("conv shape"),
                    bias: vec![0.0; out],
                }
            })
            .collect();
        Self {
            spec,
            convs,
            norm: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(WEIGHT_MAGIC);
        bytes.extend_from_slice(&WEIGHT_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.convs.len() as u32).to_le_bytes());
        for layer in &self.convs {
            let s = layer.weight.shape();
            for &d in s {
                bytes.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in layer.weight.data() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            for &v in &layer.bias {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        if let Some(norm) = &self.norm {
            bytes.extend_from_slice(NORM_MAGIC);
            for &v in norm.mean.iter().chain(norm.std.iter()) {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        atomic_write(path, &bytes).map_err(|e| FeatureError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Loads weights, validating the file against the expected topology.
    pub fn load(path: &Path, spec: ExtractorSpec) -> Result<Self, FeatureError> {
        let pstr = path.display().to_string();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| FeatureError::Io {
                path: pstr.clone(),
                source: e,
            })?;
        let mut cursor = Cursor {
            bytes: &bytes,
            pos: 0,
            path: &pstr,
        };
        if cursor.take(4)? != WEIGHT_MAGIC {
            return Err(FeatureError::BadMagic { path: pstr });
        }
        let version = cursor.u32()?;
        if version != WEIGHT_VERSION {
            return Err(FeatureError::BadVersion {
                path: pstr,
                version,
            });
        }
        let count = cursor.u32()? as usize;
        let dims = spec.conv_dims();
        if count != dims.len() {
            return Err(FeatureError::LayerCountMismatch {
                path: pstr,
                found: count,
                expected: dims.len(),
            });
        }
        let mut convs = Vec::with_capacity(count);
        for (layer, &(out, inp)) in dims.iter().enumerate() {
            let found = [cursor.u32()?, cursor.u32()?, cursor.u32()?, cursor.u32()?];
            let expected = [out as u32, inp as u32, 3, 3];
            if found != expected {
                return Err(FeatureError::LayerShapeMismatch {
                    path: pstr,
                    layer,
                    found,
                    expected,
                });
            }
            let n = out * inp * 9;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(cursor.f32()? as Real);
            }
            let mut bias = Vec::with_capacity(out);
            for _ in 0..out {
                bias.push(cursor.f32()? as Real);
            }
            convs.push(ConvLayer {
                weight: Tensor::new(&[out, inp, 3, 3], data).expect("conv shape"),
                bias,
            });
        }
        let norm = if cursor.remaining() > 0 {
            if cursor.take(4)? != NORM_MAGIC {
                return Err(FeatureError::BadMagic { path: pstr });
            }
            let mut vals = [0.0 as Real; 6];
            for v in &mut vals {
                *v = cursor.f32()? as Real;
            }
            Some(Normalization {
                mean: [vals[0], vals[1], vals[2]],
                std: [vals[3], vals[4], vals[5]],
            })
        } else {
            None
        };
        Ok(Self { spec, convs, norm })
    }

    /// Runs the extractor and returns the requested taps. Grayscale inputs
    /// are channel-replicated to 3; values are expected in [0,1].
    pub fn extract(&self, image: &Tensor, taps: &[Tap]) -> Result<FeatureSet, FeatureError> {
        let (c, h, w) = chw(image);
        if h < 32 || w < 32 {
            return Err(FeatureError::ImageTooSmall { h, w });
        }
        let rgb = to_rgb(image, c, h, w)?;
        let input = match &self.norm {
            Some(n) => normalize(&rgb, n),
            None => rgb,
        };
        let deepest = taps.iter().map(|t| t.0).max().unwrap_or(0);
        let mut maps = BTreeMap::new();
        let mut cur = input;
        let mut conv_idx = 0usize;
        for (block, &(convs, _)) in self.spec.blocks.iter().enumerate() {
            let l = block as u8 + 1;
            if l > deepest {
                break;
            }
            if block > 0 {
                cur = max_pool2(&cur);
            }
            for ci in 0..convs {
                cur = relu(&self.conv_forward(conv_idx, &cur));
                conv_idx += 1;
                if ci == 0 && taps.contains(&Tap(l)) {
                    maps.insert(Tap(l), cur.clone());
                }
                if ci == 0 && l == deepest {
                    break;
                }
            }
            conv_idx = self.spec.blocks[..=block].iter().map(|&(c, _)| c).sum();
        }
        Ok(FeatureSet {
            maps,
            source: String::new(),
        })
    }

    fn conv_forward(&self, idx: usize, input: &Tensor) -> Tensor {
        let layer = &self.convs[idx];
        let padded = zero_pad(input, 1);
        let mut out = conv2d_valid(&padded, &layer.weight, 1).expect("extractor conv");
        add_channel_bias(&mut out, &layer.bias);
        out
    }
}

/// Flattened relu5_1 map scaled to unit L2 norm; the bool flags an all-zero
/// map (signature left as zeros).
pub fn preselect_signature(features: &FeatureSet) -> Result<(Vec<Real>, bool), FeatureError> {
    let fm = features.get(Tap::RELU5_1)?;
    let norm = fm.norm_l2();
    if norm == 0.0 {
        return Ok((vec![0.0; fm.len()], true));
    }
    Ok((fm.data().iter().map(|&v| v / norm).collect(), false))
}

pub fn cosine(a: &[Real], b: &[Real]) -> Real {
    let dot: Real = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: Real = a.iter().map(|&x| x * x).sum::<Real>().sqrt();
    let nb: Real = b.iter().map(|&y| y * y).sum::<Real>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn zero_pad(input: &Tensor, pad: usize) -> Tensor {
    let (c, h, w) = chw(input);
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros(&[c, ph, pw]);
    for ci in 0..c {
        for i in 0..h {
            let src = ci * h * w + i * w;
            let dst = ci * ph * pw + (i + pad) * pw + pad;
            out.data_mut()[dst..dst + w].copy_from_slice(&input.data()[src..src + w]);
        }
    }
    out
}

pub fn add_channel_bias(t: &mut Tensor, bias: &[Real]) {
    let (c, h, w) = chw(t);
    debug_assert_eq!(c, bias.len());
    for ci in 0..c {
        for v in &mut t.data_mut()[ci * h * w..(ci + 1) * h * w] {
            *v += bias[ci];
        }
    }
}

fn to_rgb(image: &Tensor, c: usize, h: usize, w: usize) -> Result<Tensor, FeatureError> {
    match c {
        3 => Ok(image.clone().reshaped(&[3, h, w]).expect("rgb shape")),
        1 => {
            let mut data = Vec::with_capacity(3 * h * w);
            for _ in 0..3 {
                data.extend_from_slice(&image.data()[..h * w]);
            }
            Ok(Tensor::new(&[3, h, w], data).expect("replicated shape"))
        }
        other => Err(FeatureError::BadImageChannels(other)),
    }
}

fn normalize(rgb: &Tensor, n: &Normalization) -> Tensor {
    let (_, h, w) = chw(rgb);
    let mut out = rgb.clone();
    for ci in 0..3 {
        let (m, s) = (n.mean[ci], n.std[ci]);
        for v in &mut out.data_mut()[ci * h * w..(ci + 1) * h * w] {
            *v = (*v - m) / s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_spec() -> ExtractorSpec {
        ExtractorSpec::small([4, 6, 8, 8, 8])
    }

    fn random_image(seed: u64, c: usize, h: usize, w: usize) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        Tensor::new(&[c, h, w], data).unwrap()
    }

    #[test]
    fn tap_extents_match_ceil_pooling() {
        let spec = ExtractorSpec::vgg19();
        assert_eq!(spec.tap_extent(Tap::RELU3_1, 250, 200), (63, 50));
        assert_eq!(spec.tap_extent(Tap::RELU4_1, 250, 200), (32, 25));
        assert_eq!(spec.tap_extent(Tap::RELU5_1, 250, 200), (16, 13));
    }

    #[test]
    fn extract_extents_agree_with_formula() {
        let ext = Extractor::random(small_spec(), 7);
        let img = random_image(1, 3, 50, 38);
        let fs = ext
            .extract(&img, &[Tap::RELU1_1, Tap::RELU3_1, Tap::RELU5_1])
            .unwrap();
        for tap in [Tap::RELU1_1, Tap::RELU3_1, Tap::RELU5_1] {
            let (th, tw) = small_spec().tap_extent(tap, 50, 38);
            let fm = fs.get(tap).unwrap();
            assert_eq!(&fm.shape()[1..], &[th, tw], "tap {tap}");
        }
    }

    #[test]
    fn extract_is_deterministic_and_gray_replicates() {
        let ext = Extractor::random(small_spec(), 3);
        let gray = random_image(2, 1, 36, 40);
        let mut rgb_data = Vec::new();
        for _ in 0..3 {
            rgb_data.extend_from_slice(gray.data());
        }
        let rgb = Tensor::new(&[3, 36, 40], rgb_data).unwrap();
        let a = ext.extract(&gray, &[Tap::RELU3_1]).unwrap();
        let b = ext.extract(&gray, &[Tap::RELU3_1]).unwrap();
        let c = ext.extract(&rgb, &[Tap::RELU3_1]).unwrap();
        assert_eq!(a.get(Tap::RELU3_1).unwrap().data(), b.get(Tap::RELU3_1).unwrap().data());
        assert_eq!(a.get(Tap::RELU3_1).unwrap().data(), c.get(Tap::RELU3_1).unwrap().data());
    }

    #[test]
    fn zero_image_zero_bias_gives_zero_features() {
        let ext = Extractor::random(small_spec(), 11);
        let img = Tensor::zeros(&[3, 32, 32]);
        let fs = ext
            .extract(&img, &[Tap::RELU1_1, Tap::RELU2_1, Tap::RELU3_1, Tap::RELU4_1, Tap::RELU5_1])
            .unwrap();
        for (_, fm) in &fs.maps {
            assert!(fm.data().iter().all(|&v| v == 0.0));
        }
    }

    // Re-compose the extractor from raw tensor ops and compare.
    #[test]
    fn extract_matches_recomposition_oracle() {
        let spec = small_spec();
        let ext = Extractor::random(spec.clone(), 21);
        let img = random_image(4, 3, 34, 33);
        let fs = ext.extract(&img, &[Tap::RELU2_1, Tap::RELU4_1]).unwrap();

        let mut cur = img.clone();
        let mut conv_idx = 0;
        let mut oracle: BTreeMap<Tap, Tensor> = BTreeMap::new();
        for (block, &(convs, _)) in spec.blocks.iter().enumerate() {
            if block > 0 {
                cur = max_pool2(&cur);
            }
            for ci in 0..convs {
                let layer = &ext.convs[conv_idx];
                let mut out = conv2d_valid(&zero_pad(&cur, 1), &layer.weight, 1).unwrap();
                add_channel_bias(&mut out, &layer.bias);
                cur = relu(&out);
                conv_idx += 1;
                if ci == 0 {
                    oracle.insert(Tap(block as u8 + 1), cur.clone());
                }
            }
        }
        for tap in [Tap::RELU2_1, Tap::RELU4_1] {
            let a = fs.get(tap).unwrap();
            let b = &oracle[&tap];
            assert_eq!(a.shape(), b.shape());
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1e-5);
            }
        }
    }

    // The file stores f32; a reloaded value must equal the original
    // quantized to storage precision (bit-exact in f32 builds).
    fn assert_stored(orig: &[Real], back: &[Real]) {
        assert_eq!(orig.len(), back.len());
        for (&x, &y) in orig.iter().zip(back) {
            assert_eq!((x as f32) as Real, y);
        }
    }

    #[test]
    fn weight_file_round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.skfw");
        let mut ext = Extractor::random(small_spec(), 9);
        ext.norm = Some(Normalization {
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        });
        ext.save(&path).unwrap();
        let back = Extractor::load(&path, small_spec()).unwrap();
        for (a, b) in ext.convs.iter().zip(&back.convs) {
            assert_stored(a.weight.data(), b.weight.data());
            assert_stored(&a.bias, &b.bias);
        }
        let (na, nb) = (ext.norm.clone().unwrap(), back.norm.clone().unwrap());
        assert_stored(&na.mean, &nb.mean);
        assert_stored(&na.std, &nb.std);

        // extraction from the reloaded weights matches the in-memory
        // extractor to storage precision
        let img = random_image(5, 3, 32, 32);
        let fa = ext.extract(&img, &[Tap::RELU3_1]).unwrap();
        let fb = back.extract(&img, &[Tap::RELU3_1]).unwrap();
        for (x, y) in fa
            .get(Tap::RELU3_1)
            .unwrap()
            .data()
            .iter()
            .zip(fb.get(Tap::RELU3_1).unwrap().data())
        {
            assert!((x - y).abs() <= 1e-5);
        }
    }

    #[test]
    fn load_rejects_wrong_topology_naming_layer() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("w.skfw");
        Extractor::random(small_spec(), 1).save(&path).unwrap();
        let wrong = ExtractorSpec::small([4, 6, 9, 8, 8]);
        match Extractor::load(&path, wrong) {
            Err(FeatureError::LayerShapeMismatch { layer, .. }) => assert_eq!(layer, 2),
            other => panic!("expected layer shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_magic_and_truncation() {
        let dir = tempdir().unwrap();
        let bad = dir.path().join("bad.skfw");
        std::fs::write(&bad, b"NOPE").unwrap();
        assert!(matches!(
            Extractor::load(&bad, small_spec()),
            Err(FeatureError::BadMagic { .. })
        ));

        let path = dir.path().join("w.skfw");
        Extractor::random(small_spec(), 1).save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let trunc = dir.path().join("t.skfw");
        std::fs::write(&trunc, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            Extractor::load(&trunc, small_spec()),
            Err(FeatureError::Truncated { .. })
        ));
    }

    #[test]
    fn signature_is_unit_norm_and_scale_invariant() {
        let ext = Extractor::random(small_spec(), 13);
        let img = random_image(6, 3, 32, 32);
        let fs = ext.extract(&img, &[Tap::RELU5_1]).unwrap();
        let (sig, zero) = preselect_signature(&fs).unwrap();
        assert!(!zero);
        let norm: Real = sig.iter().map(|&v| v * v).sum::<Real>().sqrt();
        assert!((norm - 1.0).abs() <= 1e-6);

        let mut scaled = fs.clone();
        let fm = scaled.maps.get_mut(&Tap::RELU5_1).unwrap();
        *fm = fm.map(|v| v * 7.0);
        let (sig7, _) = preselect_signature(&scaled).unwrap();
        for (a, b) in sig.iter().zip(&sig7) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn cosine_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<Real> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<Real> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dot: Real = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: Real = a.iter().map(|x| x * x).sum::<Real>().sqrt();
        let nb: Real = b.iter().map(|x| x * x).sum::<Real>().sqrt();
        assert!((cosine(&a, &b) - dot / (na * nb)).abs() <= 1e-6);
    }

    #[test]
    fn rejects_small_image_and_unknown_tap() {
        let ext = Extractor::random(small_spec(), 1);
        let img = Tensor::zeros(&[3, 16, 16]);
        assert!(matches!(
            ext.extract(&img, &[Tap::RELU1_1]),
            Err(FeatureError::ImageTooSmall { .. })
        ));
        assert!(matches!(
            Tap::parse("relu6_1"),
            Err(FeatureError::UnknownTap(_))
        ));
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        if self.pos + n > self.bytes.len() {
            return Err(FeatureError::Truncated {
                path: self.path.to_string(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, FeatureError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

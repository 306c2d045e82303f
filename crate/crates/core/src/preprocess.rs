//! Geometric normalization: a two-eye similarity transform warps each face
//! so the eye centers land at (75,125) and (125,125) on a 250x200 canvas.
//! Landmarks are ingested from files; detection itself is external.

use std::path::Path;

use thiserror::Error;

use crate::tensor::{chw, Real, Tensor};

/// Eye-center targets in (x, y) pixel coordinates, origin top-left.
pub const TARGET_LEFT_EYE: (f64, f64) = (75.0, 125.0);
pub const TARGET_RIGHT_EYE: (f64, f64) = (125.0, 125.0);
pub const ALIGNED_HEIGHT: usize = 250;
pub const ALIGNED_WIDTH: usize = 200;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("landmark file {path}: expected 68 points, found {found}")]
    WrongPointCount { path: String, found: usize },
    #[error("landmark file {path}: malformed line {line}")]
    MalformedLine { path: String, line: usize },
    #[error("landmark set contains non-finite coordinates")]
    NonFinite,
    #[error("eye centers coincide; similarity transform undefined")]
    CoincidentEyes,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// The standard 68-point annotation; eyes are points 37-48 (1-based).
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    pub points: [(f64, f64); 68],
    pub source: String,
}

impl LandmarkSet {
    pub fn new(points: [(f64, f64); 68], source: &str) -> Result<Self, PreprocessError> {
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(PreprocessError::NonFinite);
        }
        Ok(Self {
            points,
            source: source.to_string(),
        })
    }
}

/// Reads 68 whitespace-separated "x y" lines.
pub fn read_landmarks(path: &Path) -> Result<LandmarkSet, PreprocessError> {
    let pstr = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| PreprocessError::Io {
        path: pstr.clone(),
        source: e,
    })?;
    let mut points = Vec::with_capacity(68);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| PreprocessError::MalformedLine {
                path: pstr.clone(),
                line: i + 1,
            })?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| PreprocessError::MalformedLine {
                path: pstr.clone(),
                line: i + 1,
            })?;
        points.push((x, y));
    }
    let found = points.len();
    let arr: [(f64, f64); 68] = points
        .try_into()
        .map_err(|_| PreprocessError::WrongPointCount { path: pstr, found })?;
    LandmarkSet::new(arr, path.file_stem().and_then(|s| s.to_str()).unwrap_or(""))
}

/// p' = s R(theta) p + t, kept as the complex coefficient a = s e^(i theta)
/// plus the translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    /// (re, im) of the rotation-scale coefficient.
    pub a: (f64, f64),
    pub t: (f64, f64),
}

impl SimilarityTransform {
    pub fn scale(&self) -> f64 {
        (self.a.0 * self.a.0 + self.a.1 * self.a.1).sqrt()
    }

    pub fn rotation(&self) -> f64 {
        self.a.1.atan2(self.a.0)
    }

    pub fn apply(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.a.0 * p.0 - self.a.1 * p.1 + self.t.0,
            self.a.1 * p.0 + self.a.0 * p.1 + self.t.1,
        )
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let d = self.a.0 * self.a.0 + self.a.1 * self.a.1;
        let inv_a = (self.a.0 / d, -self.a.1 / d);
        let it = (
            -(inv_a.0 * self.t.0 - inv_a.1 * self.t.1),
            -(inv_a.1 * self.t.0 + inv_a.0 * self.t.1),
        );
        SimilarityTransform { a: inv_a, t: it }
    }
}

/// Mean of the six landmark points of each eye (points 37-42 and 43-48,
/// 1-based).
pub fn eye_centers(lm: &LandmarkSet) -> ((f64, f64), (f64, f64)) {
    let mean = |range: std::ops::Range<usize>| {
        let n = range.len() as f64;
        let (sx, sy) = lm.points[range]
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / n, sy / n)
    };
    (mean(36..42), mean(42..48))
}

/// The unique similarity mapping the left eye to (75,125) and the right eye
/// to (125,125).
pub fn estimate_similarity(
    eyes: ((f64, f64), (f64, f64)),
) -> Result<SimilarityTransform, PreprocessError> {
    let (l, r) = eyes;
    let dx = r.0 - l.0;
    let dy = r.1 - l.1;
    let denom = dx * dx + dy * dy;
    if denom == 0.0 {
        return Err(PreprocessError::CoincidentEyes);
    }
    let tx = TARGET_RIGHT_EYE.0 - TARGET_LEFT_EYE.0;
    let ty = TARGET_RIGHT_EYE.1 - TARGET_LEFT_EYE.1;
    // a = (target_r - target_l) / (r - l), complex division
    let a = (
        (tx * dx + ty * dy) / denom,
        (ty * dx - tx * dy) / denom,
    );
    let t = (
        TARGET_LEFT_EYE.0 - (a.0 * l.0 - a.1 * l.1),
        TARGET_LEFT_EYE.1 - (a.1 * l.0 + a.0 * l.1),
    );
    Ok(SimilarityTransform { a, t })
}

/// Inverse-mapped bilinear warp into the 250x200 aligned canvas.
/// Out-of-source samples replicate the nearest edge pixel.
pub fn warp_crop(image: &Tensor, transform: &SimilarityTransform) -> Tensor {
    let (c, h, w) = chw(image);
    let inv = transform.inverse();
    let (oh, ow) = (ALIGNED_HEIGHT, ALIGNED_WIDTH);
    let mut out = vec![0.0 as Real; c * oh * ow];
    let src = image.data();
    crate::par::for_each_indexed(&mut out, ow, |row_idx, row| {
        let ci = row_idx / oh;
        let y = row_idx % oh;
        for (x, slot) in row.iter_mut().enumerate() {
            let (sx, sy) = inv.apply((x as f64, y as f64));
            let sx = sx.clamp(0.0, (w - 1) as f64);
            let sy = sy.clamp(0.0, (h - 1) as f64);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = (sx - x0 as f64) as Real;
            let fy = (sy - y0 as f64) as Real;
            let base = ci * h * w;
            let v00 = src[base + y0 * w + x0];
            let v01 = src[base + y0 * w + x1];
            let v10 = src[base + y1 * w + x0];
            let v11 = src[base + y1 * w + x1];
            let top = v00 + fx * (v01 - v00);
            let bot = v10 + fx * (v11 - v10);
            *slot = top + fy * (bot - top);
        }
    });
    Tensor::new(&[c, oh, ow], out).expect("aligned shape")
}

/// Full alignment of one image given its landmarks.
pub fn align(image: &Tensor, lm: &LandmarkSet) -> Result<Tensor, PreprocessError> {
    let transform = estimate_similarity(eye_centers(lm))?;
    Ok(warp_crop(image, &transform))
}

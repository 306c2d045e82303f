//! Pseudo sketch feature generation: dense k x k patch extraction over
//! feature maps, cosine matching against a reference store realized as a
//! convolution, top-k reference preselection, pseudo feature composition
//! and the naive pixel-space projection of the match field.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::features::{cosine, preselect_signature, Extractor, FeatureError, Tap};
use crate::image_io::atomic_write;
use crate::par;
use crate::tensor::{chw, conv2d_valid, Real, Tensor};

pub const STORE_MAGIC: &[u8; 4] = b"SKRS";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PatchMatchError {
    #[error("patch extent {0} must be odd")]
    EvenPatch(usize),
    #[error("patch extent {k} exceeds feature map {h}x{w}")]
    PatchTooLarge { k: usize, h: usize, w: usize },
    #[error("empty candidate list")]
    NoCandidates,
    #[error("empty reference store")]
    EmptyStore,
    #[error("match references pair {pair} patch {patch}, store has {pairs} pairs / {patches} patches")]
    DanglingIndex {
        pair: usize,
        patch: usize,
        pairs: usize,
        patches: usize,
    },
    #[error("pair {id:?}: extent {h}x{w} differs from the set's {eh}x{ew}")]
    ExtentMismatch {
        id: String,
        h: usize,
        w: usize,
        eh: usize,
        ew: usize,
    },
    #[error("query grid is {qh}x{qw}x{qc} at tap {tap}, store features are {rh}x{rw}x{rc}")]
    GridMismatch {
        tap: Tap,
        qc: usize,
        qh: usize,
        qw: usize,
        rc: usize,
        rh: usize,
        rw: usize,
    },
    #[error("store missing tap {0}")]
    MissingTap(Tap),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad store magic (expected SKRS)")]
    BadMagic { path: String },
    #[error("{path}: unsupported store version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: truncated store file")]
    Truncated { path: String },
}

/// Geometry of a dense patch decomposition: k x k windows at stride 1 whose
/// centers exclude the floor(k/2) border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub k: usize,
    pub channels: usize,
    /// Feature-map extents the grid was built over.
    pub h: usize,
    pub w: usize,
    pub tap: Tap,
}

impl PatchGrid {
    /// Number of center rows/cols.
    pub fn rows(&self) -> usize {
        self.h - 2 * (self.k / 2)
    }

    pub fn cols(&self) -> usize {
        self.w - 2 * (self.k / 2)
    }

    /// Total patch count m = (H - 2*floor(k/2)) * (W - 2*floor(k/2)).
    pub fn count(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Center coordinates (row, col) of patch j, row-major enumeration.
    pub fn center(&self, j: usize) -> (usize, usize) {
        let half = self.k / 2;
        (j / self.cols() + half, j % self.cols() + half)
    }
}

/// Per-patch best match: reference pair index, patch index within that
/// pair's grid, and the cosine similarity. Indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchEntry {
    pub pair: usize,
    pub patch: usize,
    pub score: Real,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub tap: Tap,
    pub query_grid: PatchGrid,
    /// Grid geometry of the reference maps (shared across pairs).
    pub ref_grid: PatchGrid,
    pub entries: Vec<MatchEntry>,
}

/// Matched sketch feature patches, one per query patch.
#[derive(Debug, Clone)]
pub struct PseudoSketchFeature {
    pub tap: Tap,
    pub grid: PatchGrid,
    /// m x C x k x k patch stack.
    pub patches: Tensor,
    pub matches: MatchResult,
}

#[derive(Debug, Clone)]
pub struct RefPair {
    pub id: String,
    pub photo_feats: BTreeMap<Tap, Tensor>,
    pub sketch_feats: BTreeMap<Tap, Tensor>,
    pub signature: Vec<Real>,
    /// Aligned sketch image (1 x H x W), kept for the naive reconstruction.
    pub sketch_image: Tensor,
}

/// Precomputed reference set: per-pair photo/sketch feature maps, relu5_1
/// preselection signatures and the aligned sketch images.
#[derive(Debug, Clone)]
pub struct ReferenceStore {
    pub taps: Vec<Tap>,
    pub patch_k: usize,
    pub pairs: Vec<RefPair>,
}

/// Dense patch extraction. Returns the grid geometry plus an
/// m x C x k x k stack; patch j is the window centered at `grid.center(j)`.
pub fn extract_patches(fm: &Tensor, k: usize, tap: Tap) -> Result<(PatchGrid, Tensor), PatchMatchError> {
    if k % 2 == 0 {
        return Err(PatchMatchError::EvenPatch(k));
    }
    let (c, h, w) = chw(fm);
    if k > h || k > w {
        return Err(PatchMatchError::PatchTooLarge { k, h, w });
    }
    let grid = PatchGrid {
        k,
        channels: c,
        h,
        w,
        tap,
    };
    let m = grid.count();
    let half = k / 2;
    let mut out = vec![0.0 as Real; m * c * k * k];
    let src = fm.data();
    let cols = grid.cols();
    par::for_each_indexed(&mut out, c * k * k, |j, patch| {
        let (r, cc) = (j / cols + half, j % cols + half);
        for ci in 0..c {
            for a in 0..k {
                let srow = ci * h * w + (r - half + a) * w + (cc - half);
                let drow = ci * k * k + a * k;
                patch[drow..drow + k].copy_from_slice(&src[srow..srow + k]);
            }
        }
    });
    let patches = Tensor::new(&[m, c, k, k], out).expect("patch stack shape");
    Ok((grid, patches))
}

/// Indices of the `k_ref` store pairs whose signatures have the highest
/// cosine similarity with the query signature, descending; ties broken by
/// lower pair index.
pub fn preselect_references(
    query_sig: &[Real],
    store: &ReferenceStore,
    k_ref: usize,
) -> Result<Vec<usize>, PatchMatchError> {
    if store.pairs.is_empty() {
        return Err(PatchMatchError::EmptyStore);
    }
    let mut scored: Vec<(usize, Real)> = store
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (i, cosine(query_sig, &p.signature)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k_ref.min(store.pairs.len()));
    Ok(scored.into_iter().map(|(i, _)| i).collect())
}

/// Cosine matching of query patches against the candidate pairs' photo
/// features at one tap, realized as a convolution: the L2-normalized query
/// patches act as kernels over the reference map, and per-window norms come
/// from a second convolution with an all-ones kernel over the squared map.
///
/// Ties break toward the lexicographically smallest (pair, patch); a
/// zero-norm query or reference window contributes similarity 0.
pub fn match_patches(
    grid: &PatchGrid,
    patches: &Tensor,
    store: &ReferenceStore,
    candidates: &[usize],
    tap: Tap,
) -> Result<MatchResult, PatchMatchError> {
    if candidates.is_empty() {
        return Err(PatchMatchError::NoCandidates);
    }
    let m = grid.count();
    let (k, c) = (grid.k, grid.channels);

    // L2-normalize each query patch; zero-norm patches stay zero.
    let mut kernels = patches.clone();
    let mut query_norms = vec![0.0 as Real; m];
    for j in 0..m {
        let sl = &mut kernels.data_mut()[j * c * k * k..(j + 1) * c * k * k];
        let norm = sl.iter().map(|&v| v * v).sum::<Real>().sqrt();
        query_norms[j] = norm;
        if norm > 0.0 {
            for v in sl.iter_mut() {
                *v /= norm;
            }
        }
    }

    let mut ordered: Vec<usize> = candidates.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let mut ref_grid = None;
    let mut best = vec![
        MatchEntry {
            pair: ordered[0],
            patch: 0,
            score: Real::NEG_INFINITY,
        };
        m
    ];
    for &pair_idx in &ordered {
        let pair = &store.pairs[pair_idx];
        let fm = pair
            .photo_feats
            .get(&tap)
            .ok_or(PatchMatchError::MissingTap(tap))?;
        let (rc, rh, rw) = chw(fm);
        if rc != c {
            return Err(PatchMatchError::GridMismatch {
                tap,
                qc: c,
                qh: grid.h,
                qw: grid.w,
                rc,
                rh,
                rw,
            });
        }
        if k > rh || k > rw {
            return Err(PatchMatchError::PatchTooLarge { k, h: rh, w: rw });
        }
        let rg = PatchGrid {
            k,
            channels: c,
            h: rh,
            w: rw,
            tap,
        };
        if let Some(prev) = ref_grid {
            if prev != rg {
                return Err(PatchMatchError::GridMismatch {
                    tap,
                    qc: c,
                    qh: grid.h,
                    qw: grid.w,
                    rc,
                    rh,
                    rw,
                });
            }
        }
        ref_grid = Some(rg);

        // dot(Q_hat_j, window) for every window position
        let dots = conv2d_valid(fm, &kernels, 1)?;
        // per-window L2 norms
        let squared = fm.map(|v| v * v);
        let ones = Tensor::filled(&[1, c, k, k], 1.0);
        let norms = conv2d_valid(&squared, &ones, 1)?.map(|v| v.max(0.0).sqrt());
        let positions = rg.count();
        debug_assert_eq!(norms.len(), positions);

        let norms = norms.into_data();
        let dots = dots.into_data();
        let best_slice = &mut best[..];
        par::for_each_indexed(best_slice, 1, |j, slot| {
            let entry = &mut slot[0];
            if query_norms[j] == 0.0 {
                // similarity 0 everywhere; keep the lowest (pair, patch)
                if entry.score < 0.0 {
                    *entry = MatchEntry {
                        pair: pair_idx,
                        patch: 0,
                        score: 0.0,
                    };
                }
                return;
            }
            let row = &dots[j * positions..(j + 1) * positions];
            for (p, (&dot, &nr)) in row.iter().zip(&norms).enumerate() {
                let sim = if nr == 0.0 { 0.0 } else { dot / nr };
                if sim > entry.score {
                    *entry = MatchEntry {
                        pair: pair_idx,
                        patch: p,
                        score: sim,
                    };
                }
            }
        });
    }
    Ok(MatchResult {
        tap,
        query_grid: *grid,
        ref_grid: ref_grid.expect("at least one candidate"),
        entries: best,
    })
}

/// Reference matcher: exhaustive double-loop cosine search with the same
/// tie-break rule. Kept deliberately independent of the convolution path;
/// `selfcheck` and the acceptance suite compare the two.
pub fn exhaustive_match_patches(
    grid: &PatchGrid,
    patches: &Tensor,
    store: &ReferenceStore,
    candidates: &[usize],
    tap: Tap,
) -> Result<MatchResult, PatchMatchError> {
    if candidates.is_empty() {
        return Err(PatchMatchError::NoCandidates);
    }
    let mut ordered: Vec<usize> = candidates.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let m = grid.count();
    let (k, c) = (grid.k, grid.channels);
    let plen = c * k * k;
    let mut best = vec![
        MatchEntry {
            pair: ordered[0],
            patch: 0,
            score: Real::NEG_INFINITY,
        };
        m
    ];
    let mut ref_grid = None;
    for &pair_idx in &ordered {
        let fm = store.pairs[pair_idx]
            .photo_feats
            .get(&tap)
            .ok_or(PatchMatchError::MissingTap(tap))?;
        let (rg, rpatches) = extract_patches(fm, k, tap)?;
        ref_grid = Some(rg);
        for j in 0..m {
            let q = &patches.data()[j * plen..(j + 1) * plen];
            let nq = q.iter().map(|&v| v * v).sum::<Real>().sqrt();
            for p in 0..rg.count() {
                let r = &rpatches.data()[p * plen..(p + 1) * plen];
                let nr = r.iter().map(|&v| v * v).sum::<Real>().sqrt();
                let sim = if nq == 0.0 || nr == 0.0 {
                    0.0
                } else {
                    let dot: Real = q.iter().zip(r).map(|(&a, &b)| a * b).sum();
                    dot / (nq * nr)
                };
                if sim > best[j].score {
                    best[j] = MatchEntry {
                        pair: pair_idx,
                        patch: p,
                        score: sim,
                    };
                }
            }
        }
    }
    Ok(MatchResult {
        tap,
        query_grid: *grid,
        ref_grid: ref_grid.expect("candidates nonempty"),
        entries: best,
    })
}

/// Indexes the matched (pair, patch) into the sketch-side feature maps,
/// yielding the pseudo sketch feature patch stack.
pub fn compose_pseudo_feature(
    matches: &MatchResult,
    store: &ReferenceStore,
) -> Result<PseudoSketchFeature, PatchMatchError> {
    let rg = matches.ref_grid;
    let (k, c) = (rg.k, rg.channels);
    let plen = c * k * k;
    let m = matches.entries.len();
    let mut out = vec![0.0 as Real; m * plen];
    for (j, entry) in matches.entries.iter().enumerate() {
        if entry.pair >= store.pairs.len() || entry.patch >= rg.count() {
            return Err(PatchMatchError::DanglingIndex {
                pair: entry.pair,
                patch: entry.patch,
                pairs: store.pairs.len(),
                patches: rg.count(),
            });
        }
        let fm = store.pairs[entry.pair]
            .sketch_feats
            .get(&matches.tap)
            .ok_or(PatchMatchError::MissingTap(matches.tap))?;
        let (r, cc) = rg.center(entry.patch);
        let half = k / 2;
        let dst = &mut out[j * plen..(j + 1) * plen];
        for ci in 0..c {
            for a in 0..k {
                let srow = ci * rg.h * rg.w + (r - half + a) * rg.w + (cc - half);
                let drow = ci * k * k + a * k;
                dst[drow..drow + k].copy_from_slice(&fm.data()[srow..srow + k]);
            }
        }
    }
    Ok(PseudoSketchFeature {
        tap: matches.tap,
        grid: matches.query_grid,
        patches: Tensor::new(&[m, c, k, k], out).expect("pseudo patch shape"),
        matches: matches.clone(),
    })
}

/// Pixel-level projection of a match field: each query patch center maps to
/// the 2^(l-1)-scaled pixel block of the matched reference sketch.
/// Overlapping contributions are averaged; uncovered pixels replicate the
/// nearest covered pixel.
pub fn naive_reconstruction(
    matches: &MatchResult,
    store: &ReferenceStore,
    out_h: usize,
    out_w: usize,
) -> Result<Tensor, PatchMatchError> {
    let s = matches.tap.scale();
    let qg = matches.query_grid;
    let rg = matches.ref_grid;
    let mut sum = vec![0.0 as Real; out_h * out_w];
    let mut count = vec![0u32; out_h * out_w];
    for (j, entry) in matches.entries.iter().enumerate() {
        if entry.pair >= store.pairs.len() || entry.patch >= rg.count() {
            return Err(PatchMatchError::DanglingIndex {
                pair: entry.pair,
                patch: entry.patch,
                pairs: store.pairs.len(),
                patches: rg.count(),
            });
        }
        let sketch = &store.pairs[entry.pair].sketch_image;
        let (_, sh, sw) = chw(sketch);
        let (qr, qc) = qg.center(j);
        let (rr, rc) = rg.center(entry.patch);
        for dy in 0..s {
            let oy = qr * s + dy;
            if oy >= out_h {
                break;
            }
            let sy = (rr * s + dy).min(sh - 1);
            for dx in 0..s {
                let ox = qc * s + dx;
                if ox >= out_w {
                    break;
                }
                let sx = (rc * s + dx).min(sw - 1);
                sum[oy * out_w + ox] += sketch.data()[sy * sw + sx];
                count[oy * out_w + ox] += 1;
            }
        }
    }
    let mut img = vec![0.0 as Real; out_h * out_w];
    for i in 0..out_h * out_w {
        if count[i] > 0 {
            img[i] = sum[i] / count[i] as Real;
        }
    }
    // replicate the nearest covered pixel into uncovered cells
    let half = qg.k / 2;
    let row_lo = half * s;
    let row_hi = (((qg.h - half) * s).min(out_h)).max(row_lo + 1) - 1;
    let col_lo = half * s;
    let col_hi = (((qg.w - half) * s).min(out_w)).max(col_lo + 1) - 1;
    for y in 0..out_h {
        let cy = y.clamp(row_lo, row_hi);
        for x in 0..out_w {
            let cx = x.clamp(col_lo, col_hi);
            if count[y * out_w + x] == 0 {
                img[y * out_w + x] = img[cy * out_w + cx];
            }
        }
    }
    Ok(Tensor::new(&[1, out_h, out_w], img).expect("reconstruction shape"))
}

/// Extracts per-layer features and signatures for a set of aligned
/// photo-sketch pairs. Pairs must share one spatial extent.
pub fn build_reference_store(
    pairs: &[(Tensor, Tensor, String)],
    extractor: &Extractor,
    taps: &[Tap],
    patch_k: usize,
) -> Result<ReferenceStore, PatchMatchError> {
    if pairs.is_empty() {
        return Err(PatchMatchError::EmptyStore);
    }
    if patch_k % 2 == 0 {
        return Err(PatchMatchError::EvenPatch(patch_k));
    }
    let (_, eh, ew) = chw(&pairs[0].0);
    for (photo, sketch, id) in pairs {
        for img in [photo, sketch] {
            let (_, h, w) = chw(img);
            if (h, w) != (eh, ew) {
                return Err(PatchMatchError::ExtentMismatch {
                    id: id.clone(),
                    h,
                    w,
                    eh,
                    ew,
                });
            }
        }
    }
    let mut all_taps = taps.to_vec();
    if !all_taps.contains(&Tap::RELU5_1) {
        all_taps.push(Tap::RELU5_1);
    }
    let built: Vec<Result<RefPair, PatchMatchError>> = par::map_collect(pairs.len(), |i| {
        let (photo, sketch, id) = &pairs[i];
        let photo_fs = extractor.extract(photo, &all_taps)?;
        let sketch_fs = extractor.extract(sketch, taps)?;
        let (signature, _) = preselect_signature(&photo_fs)?;
        let mut photo_feats = photo_fs.maps;
        if !taps.contains(&Tap::RELU5_1) {
            photo_feats.remove(&Tap::RELU5_1);
        }
        let sketch_gray = to_gray(sketch);
        Ok(RefPair {
            id: id.clone(),
            photo_feats,
            sketch_feats: sketch_fs.maps,
            signature,
            sketch_image: sketch_gray,
        })
    });
    let mut out = Vec::with_capacity(pairs.len());
    for pair in built {
        out.push(pair?);
    }
    Ok(ReferenceStore {
        taps: taps.to_vec(),
        patch_k,
        pairs: out,
    })
}

fn to_gray(img: &Tensor) -> Tensor {
    let (c, h, w) = chw(img);
    if c == 1 {
        return img.clone().reshaped(&[1, h, w]).expect("gray shape");
    }
    let mut data = vec![0.0 as Real; h * w];
    for (i, v) in data.iter_mut().enumerate() {
        // Rec. 601 luma
        *v = 0.299 * img.data()[i] + 0.587 * img.data()[h * w + i] + 0.114 * img.data()[2 * h * w + i];
    }
    Tensor::new(&[1, h, w], data).expect("gray shape")
}

impl ReferenceStore {
    pub fn save(&self, path: &Path) -> Result<(), PatchMatchError> {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(STORE_MAGIC);
        bytes.extend_from_slice(&STORE_VERSION.to_le_bytes());
        bytes.extend_from_slice(&(self.pairs.len() as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.taps.len() as u32).to_le_bytes());
        for tap in &self.taps {
            bytes.push(tap.0);
        }
        bytes.extend_from_slice(&(self.patch_k as u32).to_le_bytes());
        for pair in &self.pairs {
            let id = pair.id.as_bytes();
            bytes.extend_from_slice(&(id.len() as u32).to_le_bytes());
            bytes.extend_from_slice(id);
            for tap in &self.taps {
                write_map(&mut bytes, &pair.photo_feats[tap]);
                write_map(&mut bytes, &pair.sketch_feats[tap]);
            }
            bytes.extend_from_slice(&(pair.signature.len() as u32).to_le_bytes());
            for &v in &pair.signature {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
            write_map(&mut bytes, &pair.sketch_image);
        }
        atomic_write(path, &bytes).map_err(|e| PatchMatchError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PatchMatchError> {
        let pstr = path.display().to_string();
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| PatchMatchError::Io {
                path: pstr.clone(),
                source: e,
            })?;
        let mut rd = StoreReader {
            bytes: &bytes,
            pos: 0,
            path: &pstr,
        };
        if rd.take(4)? != STORE_MAGIC {
            return Err(PatchMatchError::BadMagic { path: pstr });
        }
        let version = rd.u32()?;
        if version != STORE_VERSION {
            return Err(PatchMatchError::BadVersion {
                path: pstr,
                version,
            });
        }
        let n = rd.u32()? as usize;
        let ntaps = rd.u32()? as usize;
        let mut taps = Vec::with_capacity(ntaps);
        for _ in 0..ntaps {
            taps.push(Tap(rd.take(1)?[0]));
        }
        let patch_k = rd.u32()? as usize;
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let id_len = rd.u32()? as usize;
            let id = String::from_utf8_lossy(rd.take(id_len)?).into_owned();
            let mut photo_feats = BTreeMap::new();
            let mut sketch_feats = BTreeMap::new();
            for &tap in &taps {
                photo_feats.insert(tap, rd.map()?);
                sketch_feats.insert(tap, rd.map()?);
            }
            let sig_len = rd.u32()? as usize;
            let mut signature = Vec::with_capacity(sig_len);
            for _ in 0..sig_len {
                signature.push(rd.f32()? as Real);
            }
            let sketch_image = rd.map()?;
            pairs.push(RefPair {
                id,
                photo_feats,
                sketch_feats,
                signature,
                sketch_image,
            });
        }
        Ok(Self {
            taps,
            patch_k,
            pairs,
        })
    }
}

fn write_map(bytes: &mut Vec<u8>, t: &Tensor) {
    let (c, h, w) = chw(t);
    for d in [c, h, w] {
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct StoreReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> StoreReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PatchMatchError> {
        if self.pos + n > self.bytes.len() {
            return Err(PatchMatchError::Truncated {
                path: self.path.to_string(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PatchMatchError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, PatchMatchError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn map(&mut self) -> Result<Tensor, PatchMatchError> {
        let c = self.u32()? as usize;
        let h = self.u32()? as usize;
        let w = self.u32()? as usize;
        let mut data = Vec::with_capacity(c * h * w);
        for _ in 0..c * h * w {
            data.push(self.f32()? as Real);
        }
        Tensor::new(&[c, h, w], data).map_err(|_| PatchMatchError::Truncated {
            path: self.path.to_string(),
        })
    }
}

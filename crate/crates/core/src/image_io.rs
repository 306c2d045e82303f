//! Binary PGM (P5) and PPM (P6) ingestion and emission. Pixels are scaled
//! to [0,1] on read and quantized back to 8-bit on write. Writes are
//! atomic: a sibling temp file is renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::{chw, Real, Tensor};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: expected P5/P6 magic, found {found:?}")]
    BadMagic { path: String, found: String },
    #[error("{path}: malformed header")]
    BadHeader { path: String },
    #[error("{path}: unsupported maxval {0} (only 255)", .maxval)]
    BadMaxval { path: String, maxval: u32 },
    #[error("{path}: truncated pixel data")]
    Truncated { path: String },
    #[error("write requires a 1- or 3-channel tensor, got {0} channels")]
    BadChannels(usize),
}

fn io_err(path: &Path, source: std::io::Error) -> ImageError {
    ImageError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn next_token(reader: &mut impl BufRead) -> Option<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        if reader.read(&mut byte).ok()? == 0 {
            return if tok.is_empty() { None } else { Some(tok) };
        }
        let c = byte[0] as char;
        if c == '#' {
            // comment runs to end of line
            let mut skip = String::new();
            reader.read_line(&mut skip).ok()?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if !tok.is_empty() {
                return Some(tok);
            }
        } else {
            tok.push(c);
        }
    }
}

/// Reads a binary PGM/PPM into a C x H x W tensor with values in [0,1].
pub fn read_image(path: &Path) -> Result<Tensor, ImageError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = BufReader::new(file);
    let pstr = path.display().to_string();
    let bad_header = || ImageError::BadHeader { path: pstr.clone() };
    let magic = next_token(&mut reader).ok_or_else(bad_header)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(ImageError::BadMagic {
                path: pstr,
                found: other.to_string(),
            })
        }
    };
    let w: usize = next_token(&mut reader)
        .and_then(|t| t.parse().ok())
        .ok_or_else(bad_header)?;
    let h: usize = next_token(&mut reader)
        .and_then(|t| t.parse().ok())
        .ok_or_else(bad_header)?;
    let maxval: u32 = next_token(&mut reader)
        .and_then(|t| t.parse().ok())
        .ok_or_else(bad_header)?;
    if maxval != 255 {
        return Err(ImageError::BadMaxval { path: pstr, maxval });
    }
    if w == 0 || h == 0 {
        return Err(bad_header());
    }
    let mut raw = vec![0u8; w * h * channels];
    reader
        .read_exact(&mut raw)
        .map_err(|_| ImageError::Truncated { path: pstr })?;
    // interleaved bytes to planar channels
    let mut data = vec![0.0 as Real; channels * h * w];
    for i in 0..h * w {
        for c in 0..channels {
            data[c * h * w + i] = raw[i * channels + c] as Real / 255.0;
        }
    }
    Ok(Tensor::new(&[channels, h, w], data).expect("image shape"))
}

/// Writes a tensor as binary PGM (1 channel) or PPM (3 channels).
pub fn write_image(path: &Path, img: &Tensor) -> Result<(), ImageError> {
    let (c, h, w) = chw(img);
    if c != 1 && c != 3 {
        return Err(ImageError::BadChannels(c));
    }
    let magic = if c == 1 { "P5" } else { "P6" };
    let mut bytes = Vec::with_capacity(32 + c * h * w);
    bytes.extend_from_slice(format!("{magic}\n{w} {h}\n255\n").as_bytes());
    for i in 0..h * w {
        for ci in 0..c {
            let v = img.data()[ci * h * w + i].clamp(0.0, 1.0);
            bytes.push((v * 255.0).round() as u8);
        }
    }
    atomic_write(path, &bytes).map_err(|e| io_err(path, e))
}

/// Writes bytes via a temp file plus rename so readers never observe a
/// partially written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

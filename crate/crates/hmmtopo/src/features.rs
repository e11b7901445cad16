//! Feature sequences and the `HMF1` binary file format.
//!
//! Format, little-endian throughout:
//!
//! ```text
//! bytes 0..4   magic "HMF1"
//! bytes 4..8   u32 T   (frame count)
//! bytes 8..12  u32 D   (dimension)
//! then         T*D f32 values, row-major (frame-major)
//! ```
//!
//! The format is intentionally minimal so round trips are bit-exact and
//! testable without any external toolkit.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HMF1";

/// T frames of D-dimensional real-valued features.
///
/// Values are stored as `f32` (matching the on-disk format exactly) and
/// widened to `f64` for density evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    t: usize,
    d: usize,
    data: Vec<f32>,
    /// Seconds per frame; informational only, not serialized.
    pub frame_period: f64,
}

impl FeatureSequence {
    pub fn new(t: usize, d: usize, data: Vec<f32>) -> Result<Self> {
        if t == 0 || d == 0 {
            return Err(Error::Usage(format!("degenerate shape {t}x{d}")));
        }
        if data.len() != t * d {
            return Err(Error::Usage(format!(
                "expected {} values for {t}x{d}, got {}",
                t * d,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Usage(format!("non-finite feature at index {i}")));
        }
        Ok(FeatureSequence {
            t,
            d,
            data,
            frame_period: 0.01,
        })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let t = rows.len();
        let d = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(t * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::Usage("ragged feature rows".into()));
            }
            data.extend_from_slice(r);
        }
        Self::new(t, d, data)
    }

    pub fn frames(&self) -> usize {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.d..(t + 1) * self.d]
    }

    /// One frame widened to f64, written into `buf`.
    pub(crate) fn frame_f64(&self, t: usize, buf: &mut [f64]) {
        for (o, &v) in buf.iter_mut().zip(self.frame(t)) {
            *o = v as f64;
        }
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }
}

/// Write a sequence in `HMF1` form.
pub fn write_features(seq: &FeatureSequence, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(12 + seq.data.len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(seq.t as u32).to_le_bytes());
    bytes.extend_from_slice(&(seq.d as u32).to_le_bytes());
    for v in &seq.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Read a sequence in `HMF1` form.
pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let t = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = t
        .checked_mul(d)
        .ok_or_else(|| Error::Usage(format!("{}: header overflow", path.display())))?;
    let payload = &bytes[12..];
    let got = payload.len() / 4;
    if got != expected || payload.len() % 4 != 0 {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            got,
        });
    }
    let mut data = Vec::with_capacity(expected);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                path: path.into(),
                index: i,
            });
        }
        data.push(v);
    }
    if t == 0 || d == 0 {
        return Err(Error::Usage(format!(
            "{}: degenerate shape {t}x{d}",
            path.display()
        )));
    }
    FeatureSequence::new(t, d, data)
}

//! Binary container for measured or externally generated ATFs.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header   8 bytes  magic "DPMATF01"
//!          u32      number of frequency blocks B
//! block    f64      frequency in Hz
//!          u64      M_b   bright control rows
//!          u64      M_d   dark control rows
//!          u64      L     loudspeakers
//!          u64      V_b   bright validation rows (may be 0)
//!          u64      V_d   dark validation rows (0 iff V_b is 0)
//!          (M_b+M_d)·L × (f64 re, f64 im)   control ATFs, row-major
//!          (V_b+V_d)·L × (f64 re, f64 im)   validation ATFs, row-major
//! ```
//!
//! Rows are bright zone first inside each matrix.

use std::fs;
use std::path::Path;

use super::atf::AtfMatrix;
use super::geometry::SceneGeometry;
use crate::error::{Error, Result};
use crate::C64;

pub const MAGIC: &[u8; 8] = b"DPMATF01";

/// Control ATFs at one frequency plus optional validation-point ATFs.
#[derive(Debug, Clone, PartialEq)]
pub struct AtfBundle {
    pub control: AtfMatrix,
    pub validation: Option<AtfMatrix>,
}

impl AtfBundle {
    pub fn freq(&self) -> f64 {
        self.control.freq()
    }

    /// Checks that the control matrix matches the scene's microphone and
    /// loudspeaker counts.
    pub fn check_against(&self, geom: &SceneGeometry) -> Result<()> {
        let c = &self.control;
        let want = (geom.n_bright(), geom.n_dark(), geom.n_speakers());
        let got = (c.n_bright(), c.n_dark(), c.n_cols());
        if want != got {
            return Err(Error::InvalidArgument(format!(
                "ATF dimensions (M_b, M_d, L) = {got:?} do not match the scene {want:?}"
            )));
        }
        Ok(())
    }
}

pub fn encode(bundles: &[AtfBundle]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(bundles.len() as u32).to_le_bytes());
    for b in bundles {
        let l = b.control.n_cols();
        if let Some(v) = &b.validation {
            if v.n_cols() != l {
                return Err(Error::Dimension {
                    context: "validation ATF columns",
                    expected: l,
                    actual: v.n_cols(),
                });
            }
        }
        let (vb, vd) = b
            .validation
            .as_ref()
            .map_or((0, 0), |v| (v.n_bright(), v.n_dark()));
        out.extend_from_slice(&b.control.freq().to_le_bytes());
        for n in [b.control.n_bright(), b.control.n_dark(), l, vb, vd] {
            out.extend_from_slice(&(n as u64).to_le_bytes());
        }
        let mats = std::iter::once(&b.control).chain(b.validation.as_ref());
        for z in mats.flat_map(|m| m.entries()) {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated at byte {}", self.pos)),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<usize, String> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| format!("count {v} too large"))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(
        &mut self,
        freq: f64,
        n_bright: usize,
        n_dark: usize,
        l: usize,
    ) -> std::result::Result<AtfMatrix, String> {
        let rows = n_bright
            .checked_add(n_dark)
            .ok_or_else(|| "row count overflow".to_string())?;
        let count = rows.checked_mul(l).ok_or_else(|| "entry count overflow".to_string())?;
        if count.saturating_mul(16) > self.buf.len() - self.pos {
            return Err(format!("truncated at byte {}", self.pos));
        }
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            entries.push(C64::new(self.f64()?, self.f64()?));
        }
        AtfMatrix::new(freq, n_bright, rows, l, entries).map_err(|e| e.to_string())
    }
}

pub fn decode(buf: &[u8]) -> std::result::Result<Vec<AtfBundle>, String> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic, not an ATF container".into());
    }
    let n_blocks = r.u32()?;
    // Every block header takes 48 bytes, which bounds a believable count.
    let mut out = Vec::with_capacity((n_blocks as usize).min((buf.len() - r.pos) / 48));
    for _ in 0..n_blocks {
        let freq = r.f64()?;
        let (mb, md, l, vb, vd) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
        if (vb == 0) != (vd == 0) {
            return Err("validation rows must cover both zones or neither".into());
        }
        let control = r.matrix(freq, mb, md, l)?;
        let validation = if vb > 0 {
            Some(r.matrix(freq, vb, vd, l)?)
        } else {
            None
        };
        out.push(AtfBundle { control, validation });
    }
    if r.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - r.pos));
    }
    Ok(out)
}

pub fn write_atf_file(path: &Path, bundles: &[AtfBundle]) -> Result<()> {
    fs::write(path, encode(bundles)?).map_err(|e| Error::io(path, e))
}

pub fn read_atf_file(path: &Path) -> Result<Vec<AtfBundle>> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|detail| Error::AtfFile {
        path: path.to_path_buf(),
        detail,
    })
}

/// The bundle stored for frequency `f`, matched to within 1e-6 Hz.
pub fn find_bundle(bundles: &[AtfBundle], f: f64) -> Option<&AtfBundle> {
    bundles.iter().find(|b| (b.freq() - f).abs() <= 1e-6)
}

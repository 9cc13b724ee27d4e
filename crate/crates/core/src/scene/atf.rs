use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::geometry::{distance, SceneGeometry};
use crate::error::{Error, Result};
use crate::C64;

/// Frequency-domain transfer matrix from `L` loudspeakers to `M` microphones,
/// stored row-major with the bright-zone rows first.
#[derive(Debug, Clone, PartialEq)]
pub struct AtfMatrix {
    freq: f64,
    n_bright: usize,
    n_rows: usize,
    n_cols: usize,
    entries: Vec<C64>,
}

/// Contiguous run of rows borrowed from an [`AtfMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct RowBlock<'a> {
    entries: &'a [C64],
    n_cols: usize,
}

impl<'a> RowBlock<'a> {
    pub fn new(entries: &'a [C64], n_cols: usize) -> Result<Self> {
        if n_cols == 0 || entries.len() % n_cols != 0 {
            return Err(Error::Dimension {
                context: "row block",
                expected: n_cols,
                actual: entries.len(),
            });
        }
        Ok(RowBlock { entries, n_cols })
    }

    pub fn n_rows(&self) -> usize {
        self.entries.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, m: usize) -> &'a [C64] {
        &self.entries[m * self.n_cols..(m + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &'a [C64]> {
        self.entries.chunks_exact(self.n_cols)
    }

    pub fn mul_vec(&self, g: &[C64]) -> Result<Vec<C64>> {
        if g.len() != self.n_cols {
            return Err(Error::Dimension {
                context: "matrix-vector product",
                expected: self.n_cols,
                actual: g.len(),
            });
        }
        Ok(self.rows().map(|row| dot(row, g)).collect())
    }
}

#[inline]
pub(crate) fn dot(row: &[C64], g: &[C64]) -> C64 {
    row.iter().zip(g).map(|(h, x)| h * x).sum()
}

impl AtfMatrix {
    pub fn new(
        freq: f64,
        n_bright: usize,
        n_rows: usize,
        n_cols: usize,
        entries: Vec<C64>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "ATF matrix must be non-empty, got {n_rows}x{n_cols}"
            )));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::Dimension {
                context: "ATF entries",
                expected: n_rows * n_cols,
                actual: entries.len(),
            });
        }
        if n_bright > n_rows {
            return Err(Error::InvalidArgument(format!(
                "bright row count {n_bright} exceeds row count {n_rows}"
            )));
        }
        if let Some(i) = entries.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "non-finite ATF entry at ({}, {})",
                i / n_cols,
                i % n_cols
            )));
        }
        Ok(AtfMatrix {
            freq,
            n_bright,
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn from_rows(freq: f64, n_bright: usize, rows: Vec<Vec<C64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::Dimension {
                context: "ATF row length",
                expected: n_cols,
                actual: bad.len(),
            });
        }
        Self::new(freq, n_bright, n_rows, n_cols, rows.concat())
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_bright(&self) -> usize {
        self.n_bright
    }

    pub fn n_dark(&self) -> usize {
        self.n_rows - self.n_bright
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, m: usize, l: usize) -> C64 {
        self.entries[m * self.n_cols + l]
    }

    pub fn row(&self, m: usize) -> &[C64] {
        &self.entries[m * self.n_cols..(m + 1) * self.n_cols]
    }

    pub fn block(&self) -> RowBlock<'_> {
        RowBlock {
            entries: &self.entries,
            n_cols: self.n_cols,
        }
    }

    pub fn bright_block(&self) -> RowBlock<'_> {
        RowBlock {
            entries: &self.entries[..self.n_bright * self.n_cols],
            n_cols: self.n_cols,
        }
    }

    pub fn dark_block(&self) -> RowBlock<'_> {
        RowBlock {
            entries: &self.entries[self.n_bright * self.n_cols..],
            n_cols: self.n_cols,
        }
    }

    pub fn mul_vec(&self, g: &[C64]) -> Result<Vec<C64>> {
        self.block().mul_vec(g)
    }

    /// `H^H v`.
    pub fn adjoint_mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.n_rows {
            return Err(Error::Dimension {
                context: "adjoint product",
                expected: self.n_rows,
                actual: v.len(),
            });
        }
        let mut out = vec![C64::new(0.0, 0.0); self.n_cols];
        for (row, e) in self.block().rows().zip(v) {
            for (o, h) in out.iter_mut().zip(row) {
                *o += h.conj() * e;
            }
        }
        Ok(out)
    }

    /// Copy of the rows listed in `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Vec<C64>> {
        let mut out = Vec::with_capacity(idx.len() * self.n_cols);
        for &m in idx {
            if m >= self.n_rows {
                return Err(Error::InvalidArgument(format!(
                    "row index {m} out of range for {} rows",
                    self.n_rows
                )));
            }
            out.extend_from_slice(self.row(m));
        }
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> AtfMatrix {
        AtfMatrix {
            entries: self.entries.iter().map(|z| z * alpha).collect(),
            ..self.clone()
        }
    }

    pub(crate) fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.entries
    }
}

/// Point-source Green's function `exp(-j 2π f r / c) / (4π r)` between every
/// microphone and loudspeaker of the scene.
pub fn freefield_atf(geom: &SceneGeometry, f: f64) -> Result<AtfMatrix> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frequency must be non-negative, got {f}"
        )));
    }
    let c = geom.sound_speed();
    let k = 2.0 * PI * f / c;
    let mut entries = Vec::with_capacity(geom.n_mics() * geom.n_speakers());
    for (m, mic) in geom.control_mics().enumerate() {
        for (l, spk) in geom.speakers().iter().enumerate() {
            let r = distance(mic, spk);
            if r == 0.0 {
                return Err(Error::SingularGeometry { mic: m, speaker: l });
            }
            entries.push(C64::from_polar(1.0 / (4.0 * PI * r), -k * r));
        }
    }
    AtfMatrix::new(f, geom.n_bright(), geom.n_mics(), geom.n_speakers(), entries)
}

/// Additive circular complex Gaussian perturbation of the ATFs.
///
/// `variance` is the total variance per complex entry, split evenly between
/// the real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationModel {
    pub variance: f64,
    pub seed: u64,
}

impl PerturbationModel {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation variance must be >= 0, got {variance}"
            )));
        }
        Ok(PerturbationModel { variance, seed })
    }
}

/// One sample of `CN(0, variance)`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `H + V` with a fresh draw of `V` on every call.
pub fn perturb_atf<R: Rng + ?Sized>(h: &AtfMatrix, pert: &PerturbationModel, rng: &mut R) -> AtfMatrix {
    let mut out = h.clone();
    if pert.variance > 0.0 {
        for z in out.entries_mut() {
            *z += complex_gaussian(rng, pert.variance);
        }
    }
    out
}

//! Bright-zone NMSE, acoustic contrast, steady-state summaries and the
//! analytic per-iteration complexity model.

use serde::{Deserialize, Serialize};

use crate::engine::ControlFilter;
use crate::error::{Error, Result};
use crate::scene::{AtfMatrix, DesiredField, RowBlock};
use crate::C64;

/// NMSE values are clamped here so that an exact match stays finite.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// `10 log10(Σ|d − p|² / Σ|d|²)` over the bright zone, clamped at [`NMSE_FLOOR_DB`].
pub fn nmse_db(d_bright: &[C64], p_bright: &[C64]) -> Result<f64> {
    if d_bright.is_empty() || d_bright.len() != p_bright.len() {
        return Err(Error::Dimension {
            context: "NMSE inputs",
            expected: d_bright.len().max(1),
            actual: p_bright.len(),
        });
    }
    let den: f64 = d_bright.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::Metric("NMSE reference field is zero".into()));
    }
    let num: f64 = d_bright.iter().zip(p_bright).map(|(d, p)| (d - p).norm_sqr()).sum();
    Ok((10.0 * (num / den).log10()).max(NMSE_FLOOR_DB))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contrast {
    Finite(f64),
    /// The dark zone receives no energy at all.
    DarkSilent,
}

impl Contrast {
    pub fn db(self) -> f64 {
        match self {
            Contrast::Finite(v) => v,
            Contrast::DarkSilent => f64::INFINITY,
        }
    }
}

/// `10 log10(M_d ‖H_b g‖² / (M_b ‖H_d g‖²))`.
pub fn acoustic_contrast_db(h_b: RowBlock<'_>, h_d: RowBlock<'_>, g: &[C64]) -> Result<Contrast> {
    if g.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Err(Error::Metric("acoustic contrast of the zero filter".into()));
    }
    let (mb, md) = (h_b.n_rows(), h_d.n_rows());
    if mb == 0 || md == 0 {
        return Err(Error::Metric("acoustic contrast needs both zones".into()));
    }
    let eb: f64 = h_b.mul_vec(g)?.iter().map(|z| z.norm_sqr()).sum();
    let ed: f64 = h_d.mul_vec(g)?.iter().map(|z| z.norm_sqr()).sum();
    if ed == 0.0 {
        return Ok(Contrast::DarkSilent);
    }
    if eb == 0.0 {
        return Err(Error::Metric("bright zone receives no energy".into()));
    }
    Ok(Contrast::Finite(10.0 * ((md as f64 * eb) / (mb as f64 * ed)).log10()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointSet {
    Control,
    Validation,
}

impl PointSet {
    pub fn as_str(self) -> &'static str {
        match self {
            PointSet::Control => "control",
            PointSet::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub iteration: usize,
    pub nmse_db: f64,
    pub ac_db: f64,
    pub point_set: PointSet,
    /// NMSE sits on [`NMSE_FLOOR_DB`].
    pub nmse_clamped: bool,
    /// Dark zone was silent; `ac_db` is +∞.
    pub ac_infinite: bool,
}

/// NMSE and contrast of filter `g` against one set of microphones.
pub fn evaluate(
    h: &AtfMatrix,
    d: &DesiredField,
    g: &ControlFilter,
    iteration: usize,
    point_set: PointSet,
) -> Result<MetricSample> {
    let p = h.bright_block().mul_vec(g.weights())?;
    let nmse = nmse_db(d.bright(), &p)?;
    let ac = acoustic_contrast_db(h.bright_block(), h.dark_block(), g.weights())?;
    Ok(MetricSample {
        iteration,
        nmse_db: nmse,
        ac_db: ac.db(),
        point_set,
        nmse_clamped: nmse <= NMSE_FLOOR_DB,
        ac_infinite: matches!(ac, Contrast::DarkSilent),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub mean_db: f64,
    pub std_db: f64,
}

/// Mean and population standard deviation of the last `window` values.
pub fn steady_state(values: &[f64], window: usize) -> Result<SteadyState> {
    if window == 0 || window > values.len() {
        return Err(Error::InvalidArgument(format!(
            "steady-state window {window} invalid for {} samples",
            values.len()
        )));
    }
    let tail = &values[values.len() - window..];
    let (mean, std) = mean_std(tail);
    Ok(SteadyState {
        mean_db: mean,
        std_db: std,
    })
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Steady state of the NMSE and contrast sequences of one run.
pub fn steady_state_samples(samples: &[MetricSample], window: usize) -> Result<(SteadyState, SteadyState)> {
    let nmse: Vec<f64> = samples.iter().map(|s| s.nmse_db).collect();
    let ac: Vec<f64> = samples.iter().map(|s| s.ac_db).collect();
    Ok((steady_state(&nmse, window)?, steady_state(&ac, window)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityParams {
    pub m: Option<usize>,
    pub l: usize,
    pub fft_len: usize,
    pub m_k: Option<usize>,
    pub l_k: Option<usize>,
    pub c_k: Option<usize>,
    pub n_k: Option<usize>,
}

/// Per-iteration operation counts, split into the FFT term and the
/// frequency-domain processing term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub additions: f64,
    pub multiplications: f64,
    pub fft_additions: f64,
    pub fft_multiplications: f64,
    pub processing_additions: u64,
    pub processing_multiplications: u64,
    pub params: ComplexityParams,
}

fn require_positive(pairs: &[(&str, usize)]) -> Result<()> {
    for (name, v) in pairs {
        if *v == 0 {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
    }
    Ok(())
}

fn profile(transforms: usize, fft_len: usize, proc_add: u64, proc_mul: u64, params: ComplexityParams) -> ComplexityProfile {
    let f = fft_len as f64;
    let fft_add = transforms as f64 * f * f.log2();
    let fft_mul = transforms as f64 * (f / 2.0) * f.log2();
    ComplexityProfile {
        additions: fft_add + proc_add as f64,
        multiplications: fft_mul + proc_mul as f64,
        fft_additions: fft_add,
        fft_multiplications: fft_mul,
        processing_additions: proc_add,
        processing_multiplications: proc_mul,
        params,
    }
}

/// Centralized processor: `(M+L) F log2 F + M L` additions and
/// `(M+L) (F/2) log2 F + (M+1) L` multiplications.
pub fn complexity_cpm(m: usize, l: usize, fft_len: usize) -> Result<ComplexityProfile> {
    require_positive(&[("M", m), ("L", l), ("F", fft_len)])?;
    let params = ComplexityParams {
        m: Some(m),
        l,
        fft_len,
        m_k: None,
        l_k: None,
        c_k: None,
        n_k: None,
    };
    Ok(profile(m + l, fft_len, (m * l) as u64, ((m + 1) * l) as u64, params))
}

/// Processor of node `k`: `(M_k+L_k) F log2 F + (|C_k|+|N_k|−1) L` additions
/// and `(M_k+L_k) (F/2) log2 F + (|C_k|+|N_k|+1) L` multiplications.
pub fn complexity_dpmd(
    m_k: usize,
    l_k: usize,
    c_k: usize,
    n_k: usize,
    l: usize,
    fft_len: usize,
) -> Result<ComplexityProfile> {
    require_positive(&[("M_k", m_k), ("L_k", l_k), ("|C_k|", c_k), ("|N_k|", n_k), ("L", l), ("F", fft_len)])?;
    if c_k != m_k {
        return Err(Error::InvalidArgument(format!(
            "|C_k| = {c_k} must equal M_k = {m_k}"
        )));
    }
    let params = ComplexityParams {
        m: None,
        l,
        fft_len,
        m_k: Some(m_k),
        l_k: Some(l_k),
        c_k: Some(c_k),
        n_k: Some(n_k),
    };
    Ok(profile(
        m_k + l_k,
        fft_len,
        ((c_k + n_k - 1) * l) as u64,
        ((c_k + n_k + 1) * l) as u64,
        params,
    ))
}

//! Rectangular-room image-source backend.
//!
//! Walls share one absorption coefficient derived from T60 with Sabine's
//! formula. Each image contributes `β^order / (4π r)` at the nearest sample
//! of its propagation delay, and the ATF entry is the DFT bin closest to the
//! requested frequency of the resulting `window_len`-sample response.

use std::f64::consts::{LN_10, PI};

use super::atf::AtfMatrix;
use super::geometry::{distance, Point, SceneGeometry};
use crate::error::{Error, Result};
use crate::C64;

/// Uniform wall absorption giving the requested reverberation time.
pub fn sabine_absorption(room: Point, sound_speed: f64, t60: f64) -> Result<f64> {
    if !(t60.is_finite() && t60 > 0.0) {
        return Err(Error::InvalidArgument(format!("t60 must be positive, got {t60}")));
    }
    let [x, y, z] = room;
    let volume = x * y * z;
    let surface = 2.0 * (x * y + x * z + y * z);
    let alpha = 24.0 * LN_10 * volume / (sound_speed * surface * t60);
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "t60 = {t60} s gives wall absorption {alpha:.4}, outside (0, 1]"
        )));
    }
    Ok(alpha)
}

#[derive(Debug, Clone, Copy)]
pub struct ImageSourceParams {
    pub fs: f64,
    pub window_len: usize,
    pub max_order: u32,
}

impl ImageSourceParams {
    fn validate(&self, f: f64) -> Result<()> {
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sampling rate must be positive, got {}",
                self.fs
            )));
        }
        if !(f.is_finite() && f >= 0.0) || 2.0 * f > self.fs {
            return Err(Error::InvalidArgument(format!(
                "frequency {f} Hz is above the Nyquist frequency {} Hz",
                self.fs / 2.0
            )));
        }
        if self.window_len == 0 {
            return Err(Error::InvalidArgument("window length must be positive".into()));
        }
        Ok(())
    }
}

pub fn image_source_atf(
    geom: &SceneGeometry,
    f: f64,
    t60: f64,
    fs: f64,
    window_len: usize,
    max_order: u32,
) -> Result<AtfMatrix> {
    let alpha = sabine_absorption(geom.room_dims(), geom.sound_speed(), t60)?;
    image_source_atf_with_absorption(
        geom,
        f,
        alpha,
        ImageSourceParams {
            fs,
            window_len,
            max_order,
        },
    )
}

pub fn image_source_atf_with_absorption(
    geom: &SceneGeometry,
    f: f64,
    absorption: f64,
    params: ImageSourceParams,
) -> Result<AtfMatrix> {
    params.validate(f)?;
    if !(absorption > 0.0 && absorption <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "absorption {absorption} outside (0, 1]"
        )));
    }
    let beta = (1.0 - absorption).sqrt();
    let n = params.window_len;
    let bin = (f * n as f64 / params.fs).round();
    let omega = 2.0 * PI * bin / n as f64;
    let samples_per_metre = params.fs / geom.sound_speed();
    let images = image_offsets(params.max_order);
    let room = geom.room_dims();

    let mut entries = Vec::with_capacity(geom.n_mics() * geom.n_speakers());
    for (m, mic) in geom.control_mics().enumerate() {
        for (l, spk) in geom.speakers().iter().enumerate() {
            if distance(mic, spk) == 0.0 {
                return Err(Error::SingularGeometry { mic: m, speaker: l });
            }
            let mut acc = C64::new(0.0, 0.0);
            for img in &images {
                let mut pos = [0.0; 3];
                for a in 0..3 {
                    let sign = if img.parity[a] == 0 { 1.0 } else { -1.0 };
                    pos[a] = sign * spk[a] + 2.0 * img.cell[a] as f64 * room[a];
                }
                let r = distance(&pos, mic);
                let delay = (r * samples_per_metre).round();
                if delay >= n as f64 {
                    continue;
                }
                let gain = beta.powi(img.order as i32) / (4.0 * PI * r);
                if gain == 0.0 {
                    continue;
                }
                acc += C64::from_polar(gain, -omega * delay);
            }
            entries.push(acc);
        }
    }
    AtfMatrix::new(f, geom.n_bright(), geom.n_mics(), geom.n_speakers(), entries)
}

struct Image {
    parity: [u8; 3],
    cell: [i64; 3],
    order: u32,
}

/// All image indices with at most `max_order` wall reflections.
fn image_offsets(max_order: u32) -> Vec<Image> {
    let reach = (max_order as i64 + 1) / 2 + 1;
    let mut out = Vec::new();
    for qx in 0..2u8 {
        for qy in 0..2u8 {
            for qz in 0..2u8 {
                for nx in -reach..=reach {
                    for ny in -reach..=reach {
                        for nz in -reach..=reach {
                            let parity = [qx, qy, qz];
                            let cell = [nx, ny, nz];
                            let order: i64 = (0..3)
                                .map(|a| (cell[a] - parity[a] as i64).abs() + cell[a].abs())
                                .sum();
                            if order <= max_order as i64 {
                                out.push(Image {
                                    parity,
                                    cell,
                                    order: order as u32,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

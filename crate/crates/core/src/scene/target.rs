use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::atf::{complex_gaussian, AtfMatrix};
use super::geometry::SceneGeometry;
use crate::engine::ControlFilter;
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Plane wave over the bright zone, silence in the dark zone.
    Planewave,
    /// `d = H(n) g° + z(n)` for a hidden filter `g°` and measurement noise `z`.
    Oracle,
}

/// Desired pressure at the microphones, bright zone first.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredField {
    pub freq: f64,
    pub values: Vec<C64>,
    pub n_bright: usize,
    pub mode: TargetMode,
}

impl DesiredField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bright(&self) -> &[C64] {
        &self.values[..self.n_bright]
    }

    pub fn dark(&self) -> &[C64] {
        &self.values[self.n_bright..]
    }
}

pub fn planewave_target(
    geom: &SceneGeometry,
    f: f64,
    direction: [f64; 3],
    amplitude: f64,
) -> Result<DesiredField> {
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "plane-wave direction must be a unit vector, |direction| = {norm}"
        )));
    }
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "plane-wave amplitude must be positive, got {amplitude}"
        )));
    }
    let k = 2.0 * PI * f / geom.sound_speed();
    let mut values: Vec<C64> = geom
        .bright_mics()
        .iter()
        .map(|x| {
            let proj: f64 = (0..3).map(|a| direction[a] * x[a]).sum();
            C64::from_polar(amplitude, -k * proj)
        })
        .collect();
    values.resize(geom.n_mics(), C64::new(0.0, 0.0));
    Ok(DesiredField {
        freq: f,
        values,
        n_bright: geom.n_bright(),
        mode: TargetMode::Planewave,
    })
}

/// `d = H g° + z` with `z` scaled to the requested signal-to-noise ratio.
/// An infinite `snr_db` disables the noise.
pub fn oracle_target<R: Rng + ?Sized>(
    h: &AtfMatrix,
    g_o: &ControlFilter,
    snr_db: f64,
    rng: &mut R,
) -> Result<DesiredField> {
    let mut values = h.mul_vec(g_o.weights())?;
    if snr_db.is_nan() {
        return Err(Error::InvalidArgument("SNR must not be NaN".into()));
    }
    if snr_db != f64::INFINITY {
        let power: f64 = values.iter().map(|z| z.norm_sqr()).sum();
        if power == 0.0 {
            return Err(Error::DegenerateSignal(
                "H g° is zero, so no finite SNR can be met".into(),
            ));
        }
        let noise_var = power / (values.len() as f64 * 10f64.powf(snr_db / 10.0));
        for v in values.iter_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    Ok(DesiredField {
        freq: h.freq(),
        values,
        n_bright: h.n_bright(),
        mode: TargetMode::Oracle,
    })
}

/// Hidden filter with i.i.d. `CN(0, 1)` entries.
pub fn sample_oracle_filter<R: Rng + ?Sized>(n_speakers: usize, rng: &mut R) -> Result<ControlFilter> {
    if n_speakers == 0 {
        return Err(Error::InvalidArgument("need at least one loudspeaker".into()));
    }
    let weights = (0..n_speakers).map(|_| complex_gaussian(rng, 1.0)).collect();
    ControlFilter::new(weights, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::atf::{freefield_atf, perturb_atf, PerturbationModel};
    use crate::scene::geometry::paper_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const BROADSIDE: [f64; 3] = [0.0, 1.0, 0.0];

    #[test]
    fn planewave_dark_zone_is_null_and_bright_has_unit_modulus() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let d = planewave_target(&g, 1000.0, BROADSIDE, 2.5).unwrap();
        assert!(d.dark().iter().all(|z| *z == C64::new(0.0, 0.0)));
        assert!(d.bright().iter().all(|z| (z.norm() - 2.5).abs() < 1e-12));
    }

    #[test]
    fn planewave_phase_step_between_mics() {
        let x = [1.0, 1.0, 1.0];
        let y = [1.075, 1.0, 1.0];
        let g = SceneGeometry::new(
            [3.0, 3.0, 3.0],
            vec![[2.0, 2.0, 2.0]],
            vec![x, y],
            vec![[1.0, 2.0, 1.0]],
            vec![],
            343.0,
            1.0,
        )
        .unwrap();
        let d = planewave_target(&g, 1000.0, [1.0, 0.0, 0.0], 1.0).unwrap();
        let dphi = (d.values[0] / d.values[1]).arg();
        assert!((dphi - 2.0 * PI * 1000.0 * 0.075 / 343.0).abs() < 1e-12);
        assert!((dphi - 1.3738).abs() < 1e-4);
    }

    #[test]
    fn planewave_translation_covariance() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let shifted = paper_geometry(2.4, 1.0).unwrap();
        // Larger standoff moves the zones by +0.2 m along y.
        let f = 812.0;
        let dir = [0.6, 0.8, 0.0];
        let a = planewave_target(&g, f, dir, 1.0).unwrap();
        let b = planewave_target(&shifted, f, dir, 1.0).unwrap();
        let t = [0.0, 0.2, 0.0];
        let k = 2.0 * PI * f / 343.0;
        let factor = C64::from_polar(1.0, -k * (dir[1] * t[1]));
        for (x, y) in a.bright().iter().zip(b.bright()) {
            assert!((x * factor - y).norm() < 1e-9);
        }
    }

    #[test]
    fn planewave_rejects_non_unit_direction() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        assert!(planewave_target(&g, 100.0, [0.0, 2.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn noiseless_oracle_target() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let h = freefield_atf(&g, 1000.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let g_o = sample_oracle_filter(9, &mut rng).unwrap();
        let d = oracle_target(&h, &g_o, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(d.values, h.mul_vec(g_o.weights()).unwrap());
    }

    #[test]
    fn zero_oracle_filter_is_degenerate() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let h = freefield_atf(&g, 1000.0).unwrap();
        let zero = ControlFilter::zeros(9, 1000.0);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        assert!(matches!(
            oracle_target(&h, &zero, 20.0, &mut rng),
            Err(Error::DegenerateSignal(_))
        ));
    }

    #[test]
    fn empirical_snr() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let h = freefield_atf(&g, 1000.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let g_o = sample_oracle_filter(9, &mut rng).unwrap();
        let clean = h.mul_vec(g_o.weights()).unwrap();
        let signal: f64 = clean.iter().map(|z| z.norm_sqr()).sum();
        let n = 10_000;
        let mut noise = 0.0;
        for _ in 0..n {
            let d = oracle_target(&h, &g_o, 20.0, &mut rng).unwrap();
            noise += d.values.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
        let snr = 10.0 * (signal / (noise / n as f64)).log10();
        assert!((19.5..=20.5).contains(&snr), "snr {snr}");
    }

    #[test]
    fn oracle_filter_statistics_and_determinism() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        let pooled: Vec<C64> = (0..100_000 / 9 + 1)
            .flat_map(|_| sample_oracle_filter(9, &mut rng).unwrap().weights().to_vec())
            .take(100_000)
            .collect();
        let mean = pooled.iter().sum::<C64>() / pooled.len() as f64;
        let var = pooled.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / pooled.len() as f64;
        assert!((0.98..=1.02).contains(&var), "variance {var}");

        let a = sample_oracle_filter(9, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        let b = sample_oracle_filter(9, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a, b);
    }

    #[test]
    fn synthesis_is_pure_given_stream() {
        let g = paper_geometry(2.0, 1.0).unwrap();
        let h = freefield_atf(&g, 600.0).unwrap();
        let pert = PerturbationModel::new(0.0707, 0).unwrap();
        let run = |seed| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let g_o = sample_oracle_filter(9, &mut rng).unwrap();
            let hn = perturb_atf(&h, &pert, &mut rng);
            oracle_target(&hn, &g_o, 20.0, &mut rng).unwrap().values
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }
}

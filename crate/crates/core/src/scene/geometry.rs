use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Maximum distance between a validation point and its control microphone.
pub const VALIDATION_RADIUS: f64 = 0.05;

/// Room box, loudspeaker array, control microphones and validation points.
///
/// Microphones are stored bright zone first so that row `m` of any ATF
/// built from this scene belongs to the bright zone iff `m < n_bright()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    room_dims: Point,
    speakers: Vec<Point>,
    bright_mics: Vec<Point>,
    dark_mics: Vec<Point>,
    validation_points: Vec<Point>,
    sound_speed: f64,
    array_plane_height: f64,
}

impl SceneGeometry {
    pub fn new(
        room_dims: Point,
        speakers: Vec<Point>,
        bright_mics: Vec<Point>,
        dark_mics: Vec<Point>,
        validation_points: Vec<Point>,
        sound_speed: f64,
        array_plane_height: f64,
    ) -> Result<Self> {
        if room_dims.iter().any(|&d| !(d.is_finite() && d > 0.0)) {
            return Err(Error::Geometry(format!(
                "room dimensions must be positive, got {room_dims:?}"
            )));
        }
        if !(sound_speed.is_finite() && sound_speed > 0.0) {
            return Err(Error::Geometry(format!(
                "sound speed must be positive, got {sound_speed}"
            )));
        }
        for (what, pts) in [
            ("loudspeaker", &speakers),
            ("bright microphone", &bright_mics),
            ("dark microphone", &dark_mics),
        ] {
            if pts.is_empty() {
                return Err(Error::Geometry(format!("need at least one {what}")));
            }
        }
        let labelled = speakers
            .iter()
            .enumerate()
            .map(|(i, p)| ("loudspeaker", i, p))
            .chain(bright_mics.iter().enumerate().map(|(i, p)| ("bright microphone", i, p)))
            .chain(dark_mics.iter().enumerate().map(|(i, p)| ("dark microphone", i, p)))
            .chain(
                validation_points
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ("validation point", i, p)),
            );
        for (what, i, p) in labelled {
            let inside = (0..3).all(|a| p[a].is_finite() && p[a] > 0.0 && p[a] < room_dims[a]);
            if !inside {
                return Err(Error::Geometry(format!(
                    "{what} {i} at {p:?} lies outside the room {room_dims:?}"
                )));
            }
        }
        let geom = SceneGeometry {
            room_dims,
            speakers,
            bright_mics,
            dark_mics,
            validation_points,
            sound_speed,
            array_plane_height,
        };
        for (v, p) in geom.validation_points.iter().enumerate() {
            let near = geom
                .control_mics()
                .filter(|m| distance(m, p) <= VALIDATION_RADIUS)
                .count();
            if near != 1 {
                return Err(Error::Geometry(format!(
                    "validation point {v} at {p:?} is within {VALIDATION_RADIUS} m of {near} control microphones, expected exactly one"
                )));
            }
        }
        Ok(geom)
    }

    pub fn room_dims(&self) -> Point {
        self.room_dims
    }

    pub fn speakers(&self) -> &[Point] {
        &self.speakers
    }

    pub fn bright_mics(&self) -> &[Point] {
        &self.bright_mics
    }

    pub fn dark_mics(&self) -> &[Point] {
        &self.dark_mics
    }

    pub fn validation_points(&self) -> &[Point] {
        &self.validation_points
    }

    pub fn sound_speed(&self) -> f64 {
        self.sound_speed
    }

    pub fn array_plane_height(&self) -> f64 {
        self.array_plane_height
    }

    pub fn n_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn n_bright(&self) -> usize {
        self.bright_mics.len()
    }

    pub fn n_dark(&self) -> usize {
        self.dark_mics.len()
    }

    pub fn n_mics(&self) -> usize {
        self.n_bright() + self.n_dark()
    }

    /// Control microphones, bright zone first.
    pub fn control_mics(&self) -> impl Iterator<Item = &Point> {
        self.bright_mics.iter().chain(self.dark_mics.iter())
    }

    /// The same room and array with the validation points as its microphones.
    ///
    /// A validation point belongs to the zone of the control microphone it
    /// sits next to; the returned scene keeps the bright-first ordering.
    /// Returns `None` when the scene has no validation points.
    pub fn validation_scene(&self) -> Option<SceneGeometry> {
        if self.validation_points.is_empty() {
            return None;
        }
        let mut bright = Vec::new();
        let mut dark = Vec::new();
        for p in &self.validation_points {
            let owner = self
                .control_mics()
                .position(|m| distance(m, p) <= VALIDATION_RADIUS)
                .expect("validated at construction");
            if owner < self.n_bright() {
                bright.push(*p);
            } else {
                dark.push(*p);
            }
        }
        if bright.is_empty() || dark.is_empty() {
            return None;
        }
        Some(SceneGeometry {
            room_dims: self.room_dims,
            speakers: self.speakers.clone(),
            bright_mics: bright,
            dark_mics: dark,
            validation_points: Vec::new(),
            sound_speed: self.sound_speed,
            array_plane_height: self.array_plane_height,
        })
    }
}

/// Parameters of the reference desk-scale layout: a 9-element line array
/// facing two 4×4 microphone grids inside an 8.088 × 7.346 × 2.865 m room.
///
/// Absolute placement is not fixed by the layout itself; the plan view is
/// centered in the room with the array `standoff` metres from the zone
/// centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaperLayout {
    pub room_dims: Point,
    pub n_speakers: usize,
    pub speaker_spacing: f64,
    pub grid_size: usize,
    pub mic_spacing: f64,
    /// Distance from the loudspeaker line to the zone centres.
    pub standoff: f64,
    /// Centre-to-centre distance between the bright and dark zones.
    pub zone_separation: f64,
    pub plane_height: f64,
    /// Offset added to every control microphone to obtain its validation point.
    pub validation_offset: Point,
    pub sound_speed: f64,
}

impl Default for PaperLayout {
    fn default() -> Self {
        PaperLayout {
            room_dims: [8.088, 7.346, 2.865],
            n_speakers: 9,
            speaker_spacing: 0.06,
            grid_size: 4,
            mic_spacing: 0.075,
            standoff: 2.0,
            zone_separation: 1.0,
            plane_height: 1.485,
            validation_offset: [0.005, 0.005, 0.0],
            sound_speed: 343.0,
        }
    }
}

impl PaperLayout {
    pub fn build(&self) -> Result<SceneGeometry> {
        if !(self.standoff > 0.0) {
            return Err(Error::Geometry(format!(
                "standoff must be positive, got {}",
                self.standoff
            )));
        }
        if self.n_speakers == 0 || self.grid_size == 0 {
            return Err(Error::Geometry(
                "layout needs at least one loudspeaker and one microphone per zone".into(),
            ));
        }
        let [rx, ry, _] = self.room_dims;
        let xc = rx / 2.0;
        let y_array = ry / 2.0 - self.standoff / 2.0;
        let y_zone = y_array + self.standoff;
        let z = self.plane_height;

        let mid = (self.n_speakers as f64 - 1.0) / 2.0;
        let speakers = (0..self.n_speakers)
            .map(|l| [xc + (l as f64 - mid) * self.speaker_spacing, y_array, z])
            .collect();

        let grid = |cx: f64| -> Vec<Point> {
            let half = (self.grid_size as f64 - 1.0) / 2.0;
            let mut pts = Vec::with_capacity(self.grid_size * self.grid_size);
            for row in 0..self.grid_size {
                for col in 0..self.grid_size {
                    pts.push([
                        cx + (col as f64 - half) * self.mic_spacing,
                        y_zone + (row as f64 - half) * self.mic_spacing,
                        z,
                    ]);
                }
            }
            pts
        };
        let bright = grid(xc - self.zone_separation / 2.0);
        let dark = grid(xc + self.zone_separation / 2.0);
        let off = self.validation_offset;
        let validation = bright
            .iter()
            .chain(dark.iter())
            .map(|p| [p[0] + off[0], p[1] + off[1], p[2] + off[2]])
            .collect();

        SceneGeometry::new(
            self.room_dims,
            speakers,
            bright,
            dark,
            validation,
            self.sound_speed,
            z,
        )
    }
}

/// Reference layout with the given standoff and zone separation.
pub fn paper_geometry(standoff: f64, zone_separation: f64) -> Result<SceneGeometry> {
    PaperLayout {
        standoff,
        zone_separation,
        ..PaperLayout::default()
    }
    .build()
}

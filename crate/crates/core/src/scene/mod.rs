//! Room and array geometry, ATF synthesis and import, and target fields.

mod atf;
mod file;
mod geometry;
mod image_source;
mod target;

pub use atf::{freefield_atf, perturb_atf, AtfMatrix, PerturbationModel, RowBlock};
pub use file::{
    decode as decode_atf, encode as encode_atf, find_bundle, read_atf_file, write_atf_file,
    AtfBundle,
};
pub use geometry::{paper_geometry, PaperLayout, Point, SceneGeometry, VALIDATION_RADIUS};
pub use image_source::{
    image_source_atf, image_source_atf_with_absorption, sabine_absorption, ImageSourceParams,
};
pub use target::{
    oracle_target, planewave_target, sample_oracle_filter, DesiredField, TargetMode,
};

pub(crate) use atf::{complex_gaussian, dot};

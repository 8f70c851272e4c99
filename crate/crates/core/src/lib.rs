//! Segmentation of grayscale micrographs into intensity regions and texture
//! classes.
//!
//! The image is first split into a cartoon and a texture component
//! ([`decomposition`]). The cartoon is segmented into up to four phases by a
//! local multiphase Chan-Vese model solved with threshold dynamics
//! ([`cartoon_segmentation`]). The texture is analysed with an empirical
//! curvelet transform whose Fourier partition is detected from the data
//! ([`spectral_partition`], [`empirical_curvelet`]); local subband energies
//! ([`texture_features`]) are then clustered ([`clustering`]).
//! [`pipeline`] ties the stages together and provides image I/O, presets and
//! a synthetic scene generator.

pub mod cartoon_segmentation;
pub mod clustering;
pub mod decomposition;
pub mod empirical_curvelet;
pub mod error;
pub mod imagecore;
mod par;
pub mod pipeline;
pub mod spectral_partition;
pub mod texture_features;

pub use error::{Error, Result};
pub use imagecore::{Image, LabelMap};

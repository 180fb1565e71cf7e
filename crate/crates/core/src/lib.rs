//! Light-field spatial super-resolution.
//!
//! Two-stage pipeline: an all-to-one network super-resolves each
//! sub-aperture view by fusing pairwise correlations with every other view,
//! then a spatial-angular regularization network restores cross-view
//! (parallax) consistency over the whole field. Includes a synthetic
//! light-field generator, training with gradient-checked reverse-mode
//! autodiff, quality metrics, and checkpointing.

pub mod ato;
pub mod autograd;
pub mod checkpoint;
pub mod color;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod io;
pub mod lightfield;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod regnet;
pub mod resample;
pub mod tensor;
pub mod train;

pub use ato::{AtaMode, AtaModel, AtoConfig, AtoModel};
pub use error::{Error, Result};
pub use regnet::{regularize, RegConfig, RegModel};
pub use lightfield::{Disparity, EpiOrientation, EpiSlice, LightField, SynthSpec};
pub use tensor::{Real, Tensor};

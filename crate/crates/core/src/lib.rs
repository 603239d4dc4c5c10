//! Local surrogate explanations of black-box classifiers with sampling and
//! weighting aligned to natural image statistics.
//!
//! The pieces compose as: [`segment::slic_segment`] splits an image into
//! superpixels, [`perturb`] realizes masked neighbours, [`metrics`] scores
//! their distance to the original, and [`surrogate::explain_image`] fits a
//! weighted ridge model on the mask bits. [`synth2d`] and [`imagexp`] hold the
//! two evaluation pipelines.

pub mod blackbox;
pub mod error;
pub mod forest;
pub mod image;
pub mod imagexp;
pub mod metrics;
pub mod perturb;
pub mod rng;
pub mod segment;
pub mod surrogate;
pub mod synth2d;
pub mod synthetic;

pub use blackbox::{BlackBox, BlackBoxSpec, ConstantBlackBox, QuadrantClassifier};
pub use error::{Error, Result};
pub use image::{Explanation, Image, InterpretableMask, RelevanceMap, SuperpixelSegmentation};
pub use metrics::{DistanceKind, KernelConfig, MsssimConfig};
pub use perturb::{DistortionSpec, SamplerKind, SamplerSpec};
pub use surrogate::{explain_image, ExplainConfig, RidgeConfig};

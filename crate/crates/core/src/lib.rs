//! Latent fingerprint identification by fusing two local minutia
//! descriptors.
//!
//! Every minutia is described twice: by a real-valued Minutia Cylinder Code
//! ([`mcc`]) and by a fixed-length embedding ([`embedding`]), either loaded
//! from a file or synthesized. Two templates are compared by building
//! cosine similarity matrices per channel ([`pairing`]), selecting candidate
//! minutia pairs greedily, and consolidating them with a geometric
//! relaxation ([`relaxation`]) into a global score. [`fusion`] combines the
//! channels at the pair-set, matrix or rank level; [`evaluation`] runs 1:N
//! identification and CMC analysis; [`synth`] and [`benchmark`] provide a
//! reproducible synthetic workload.

pub mod benchmark;
pub mod config;
pub mod descriptor;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod mcc;
pub mod pairing;
pub mod par;
pub mod relaxation;
pub mod synth;
pub mod template;

pub use descriptor::DescriptorSet;
pub use embedding::{EmbeddingConfig, EmbeddingMode, EmbeddingSet};
pub use error::{Error, Result};
pub use evaluation::{CmcCurve, Gallery, IdentificationResult};
pub use fusion::{Channel, FusionConfig, MatchResult, PreparedTemplate};
pub use mcc::{Cylinder, CylinderConfig};
pub use pairing::{PairSet, PairSource, SimilarityMatrix};
pub use par::Execution;
pub use relaxation::RelaxationParams;
pub use template::{Minutia, MinutiaeTemplate, RigidTransform};

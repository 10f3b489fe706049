//! Patch-correspondence dataset construction from sparse SfM reconstructions.
//!
//! A [`scene::SceneModel`] is read from COLMAP text files; the
//! [`sampler`] selects viewpoint-diverse positive pairs per track; [`patch`]
//! cuts scale- and rotation-normalized patches and serializes them;
//! [`mining`] implements the batch-hard triplet loss with geometric negative
//! validity; [`evaluation`] scores descriptors on patch verification,
//! matching, retrieval and wide-baseline stereo; [`synth`] builds exact
//! synthetic scenes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptors;
pub mod evaluation;
pub mod geometry;
pub mod mining;
pub mod patch;
pub mod sampler;
pub mod scene;
pub mod synth;

//! Evaluation toolkit for 3D semantic object maps.
//!
//! The crate scores object-cuboid maps against ground truth (3D IoU, mAP over
//! IoU sweeps, object map quality), measures trajectory error (ATE/RPE),
//! turns labeled point clouds into instance cuboids, and ships a small
//! ray-cast + Bayesian voxel fusion simulator used to run the
//! ground-truth-vs-estimated segmentation/pose ablation.
//!
//! Data-parallel loops go through [`par::Execution`]. With the default
//! `parallel` feature they run on rayon; without it every path is sequential
//! and produces identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod io;
pub mod par;
pub mod quality;
pub mod sim;
pub mod trajectory;
pub mod vocabulary;

pub use error::{Error, Result};
pub use geometry::{Aabb, Cuboid, Point, RigidPose};
pub use par::Execution;
pub use vocabulary::{ClassId, ClassVocabulary, ObjectMap};

//! Layout-object-position neural fields over posed RGB-D scenes.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`scene`]: camera geometry, frames, floor-plan partitions and a
//!   procedural apartment generator with ground truth.
//! * [`embed`]: embedding providers and fusion of per-pixel targets into a
//!   voxel-merged feature point cloud.
//! * [`hashgrid`]: multi-resolution hash encoding with table gradients.
//! * [`field`]: MLP heads, symmetric contrastive losses, training and
//!   checkpoints.
//! * [`query`]: region inference and text/image localization.
//! * [`topomap`]: topometric graph construction, update and JSON schema.
//! * [`planner`]: A* over the topometric graph and waypoint emission.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops read
// better than zipped iterators in the small fixed-size geometry kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod embed;
pub mod error;
pub mod field;
pub mod geometry;
pub mod hashgrid;
pub mod numeric;
pub mod planner;
pub mod plausibility;
pub mod query;
pub mod scene;
pub mod topomap;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use geometry::{Aabb, Point3};

//! Camera geometry, posed RGB-D frames, floor-plan partitions and the
//! synthetic apartment generator.

pub mod camera;
pub mod frame;
pub mod io;
pub mod partition;
pub mod synth;

pub use camera::{back_project, project, Intrinsics, Pose};
pub use frame::{Frame, PixelBox, BACKGROUND};
pub use partition::{DecisionEntry, HalfPlane, LabeledRect, RegionPartition, Sign};
pub use synth::{
    generate_scene, Doorway, ObjectClass, Room, SceneConfig, SceneObject, SyntheticScene, WallAxis,
};

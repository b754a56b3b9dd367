//! Object-wise scenes: serialization, 3D edits and joint rendering.

pub mod edit;
pub mod model;
pub mod render;

pub use edit::{apply_edit, invert_edit, EditKind, EditOp};
pub use model::{load_library, parse_scene_file, Scene, SceneFile, SceneObject, BUILTIN_LIBRARY, SCENE_FORMAT};
pub use render::{occlusion_mask, pose_scene, render_scene, render_scene_hard, PosedObject, SceneRender};

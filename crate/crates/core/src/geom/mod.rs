//! Rotations, pinhole projection, free-form deformation and the
//! box-relative translation code.

pub mod camera;
pub mod ffd;
pub mod mesh;
pub mod quat;
pub mod state;

pub use camera::{project_points, Camera};
pub use ffd::{ffd_apply, FfdLattice, FfdWeights};
pub use mesh::{Aabb, Mesh, MeshLibrary};
pub use quat::{rotate_point, wrap_angle, yaw_to_quaternion, Quaternion, YawAngle};
pub use state::{
    pose_mesh, reparam_decode, reparam_encode, translation_vector, BBox2, ObjectState, ReparamCode,
};

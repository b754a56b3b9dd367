//! Analysis-by-synthesis de-rendering of object silhouettes into editable
//! 3D scene representations.
//!
//! Each object is described by a mesh chosen from a small library, a
//! free-form deformation lattice, a per-axis scale, a yaw angle and a
//! box-relative translation code. A soft silhouette rasterizer with exact
//! analytic gradients lets those parameters be fitted to target masks with
//! Adam; a hard rasterizer produces instance, depth, normal and pose-bin
//! layers for edited scenes.

pub mod bench;
pub mod error;
pub mod geom;
pub mod losses;
pub mod optim;
pub mod raster;
pub mod scene;

pub use error::{Error, Result};

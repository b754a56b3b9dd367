//! Soft silhouette rendering with analytic gradients, hard multi-layer
//! rasterization and raster file formats.

pub mod hard;
pub mod io;
pub mod soft;

pub use hard::{render_hard, HardObject, RenderLayers, POSE_BINS};
pub use soft::{
    binarize, render_silhouette_soft, render_vertices_soft, silhouette_gradient, silhouette_loss_and_gradient,
    SilhouetteFit, SilhouetteImage, SoftRasterConfig,
};

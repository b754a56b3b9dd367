//! Adam, per-object silhouette fitting, exhaustive mesh selection and the
//! score-function selection gradient.

pub mod adam;
pub mod fit;
pub mod reinforce;

pub use adam::{adam_step, AdamConfig, AdamMoments};
pub use fit::{fit_object, select_mesh_exhaustive, AblationFlags, FitConfig, FitResult, FreeVariable};
pub use reinforce::{
    exact_selection_gradient, reinforce_gradient, reinforce_gradient_with, reinforce_summary, EstimatorSummary,
    MeshDistribution,
};

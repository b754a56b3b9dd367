use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{pose_mesh, BBox2, Camera, FfdLattice, Mesh, MeshLibrary, ObjectState, YawAngle};
use crate::losses::ValidMask;
use crate::raster::{binarize, render_silhouette_soft, silhouette_loss_and_gradient, SoftRasterConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub meshes: usize,
    /// Coordinates compared per mesh, drawn from those with a non-negligible
    /// analytic gradient.
    pub samples_per_mesh: usize,
    pub step: f64,
    pub tolerance: f64,
    pub gradient_floor: f64,
    pub sharpness_gamma: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            meshes: 20,
            samples_per_mesh: 24,
            step: 1e-4,
            tolerance: 1e-2,
            gradient_floor: 1e-6,
            sharpness_gamma: 1.0,
            seed: 0,
        }
    }
}

/// Worst sampled disagreement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradSample {
    pub mesh: usize,
    pub vertex: usize,
    pub axis: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub config: GradCheckConfig,
    pub checked: usize,
    pub passed: usize,
    pub worst: Option<GradSample>,
}

impl GradCheckReport {
    /// Zero when nothing could be checked.
    pub fn pass_rate(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }

    pub fn is_pass(&self, min_rate: f64) -> bool {
        self.checked > 0 && self.pass_rate() >= min_rate
    }
}

/// A perturbed posed vehicle and the binarized silhouette of its unperturbed
/// pose, for gradient checks on a 64×64 view.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub camera: Camera,
    pub mesh: Mesh,
    pub target: crate::raster::SilhouetteImage,
    pub mask: ValidMask,
}

pub fn gradcheck_case(rng: &mut impl Rng, cfg: &SoftRasterConfig) -> Result<GradCheckCase> {
    let camera = Camera::centered(64.0, 64, 64);
    let lib = MeshLibrary::builtin_vehicles();
    let center = Vector2::new(32.0 + rng.random_range(-6.0..6.0), 32.0 + rng.random_range(-6.0..6.0));
    let state = ObjectState {
        mesh_index: rng.random_range(0..lib.len()),
        ffd: FfdLattice::zero(),
        scale: Vector3::new(rng.random_range(1.6..2.2), rng.random_range(1.3..2.0), rng.random_range(3.5..5.0)),
        yaw: YawAngle::new(rng.random_range(0.0..std::f64::consts::TAU)),
        free_rotation: None,
        center_2d: center,
        ray_distance: rng.random_range(8.0..12.0),
        bbox: BBox2 { x: center.x, y: center.y, w: 24.0, h: 16.0 },
    };
    let truth = pose_mesh(lib.get(state.mesh_index).expect("index drawn in range"), &state, &camera)?;
    let target = binarize(&render_silhouette_soft(&truth, &camera, cfg)?, cfg);
    let mut mesh = truth;
    for v in &mut mesh.vertices {
        *v += Vector3::from_fn(|_, _| rng.random_range(-0.15..0.15));
    }
    Ok(GradCheckCase { camera, mesh, target, mask: ValidMask::all(64, 64, true) })
}

/// Compares analytic vertex gradients of the masked reprojection loss with
/// central finite differences on random posed meshes.
pub fn gradient_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.meshes == 0 || cfg.samples_per_mesh == 0 {
        return Err(Error::InvalidArgument("gradient check needs at least one mesh and one sample".into()));
    }
    if !(cfg.step > 0.0) || !(cfg.tolerance > 0.0) {
        return Err(Error::InvalidArgument("step and tolerance must be positive".into()));
    }
    let raster = SoftRasterConfig::with_gamma(cfg.sharpness_gamma);
    raster.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradCheckReport { config: *cfg, checked: 0, passed: 0, worst: None };
    for m in 0..cfg.meshes {
        let case = gradcheck_case(&mut rng, &raster)?;
        let loss = |verts: &[Vector3<f64>]| -> Result<f64> {
            Ok(silhouette_loss_and_gradient(verts, &case.mesh.triangles, &case.camera, &raster, &case.target, &case.mask)?.loss)
        };
        let grads = silhouette_loss_and_gradient(&case.mesh.vertices, &case.mesh.triangles, &case.camera, &raster, &case.target, &case.mask)?
            .vertex_gradients;
        let candidates: Vec<(usize, usize)> = (0..grads.len())
            .flat_map(|v| (0..3).map(move |a| (v, a)))
            .filter(|&(v, a)| grads[v][a].abs() > cfg.gradient_floor)
            .collect();
        let n = cfg.samples_per_mesh.min(candidates.len());
        for k in sample(&mut rng, candidates.len(), n) {
            let (vertex, axis) = candidates[k];
            let mut verts = case.mesh.vertices.clone();
            verts[vertex][axis] += cfg.step;
            let plus = loss(&verts)?;
            verts[vertex][axis] -= 2.0 * cfg.step;
            let minus = loss(&verts)?;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let analytic = grads[vertex][axis];
            let relative_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
            report.checked += 1;
            if relative_error < cfg.tolerance {
                report.passed += 1;
            }
            if report.worst.is_none_or(|w| relative_error > w.relative_error) {
                report.worst = Some(GradSample { mesh: m, vertex, axis, analytic, numeric, relative_error });
            }
        }
    }
    Ok(report)
}

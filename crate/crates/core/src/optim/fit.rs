//! Direct per-object fitting of the geometric code to a target silhouette.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamMoments};
use crate::geom::ffd::{FfdWeights, LATTICE_POINTS};
use crate::geom::state::{pose_vertices, ray_direction_jacobian, reparam_encode, translation_vector};
use crate::geom::{Camera, FfdLattice, MeshLibrary, ObjectState, Quaternion, YawAngle};
use crate::losses::ValidMask;
use crate::raster::{silhouette_loss_and_gradient, SilhouetteImage, SoftRasterConfig};
use crate::{Error, Result};

/// Parameter groups that may be optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeVariable {
    Scale,
    Yaw,
    OffsetE,
    LogTau,
    Ffd,
}

impl FreeVariable {
    pub const ALL: [FreeVariable; 5] = [Self::Scale, Self::Yaw, Self::OffsetE, Self::LogTau, Self::Ffd];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "scale" => Self::Scale,
            "yaw" => Self::Yaw,
            "offset_e" => Self::OffsetE,
            "log_tau" => Self::LogTau,
            "ffd" => Self::Ffd,
            _ => return None,
        })
    }
}

/// Switches for the ablated parametrizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    /// Rotation restricted to yaw; otherwise a full quaternion renormalized
    /// after every step.
    pub yaw_constraint: bool,
    /// Distance optimized as `log τ`; otherwise as `log t`.
    pub normalized_distance: bool,
    /// Mesh chosen from the library with free-form deformation; otherwise
    /// mesh 0 with the lattice frozen at zero.
    pub multicad_ffd: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            yaw_constraint: true,
            normalized_distance: true,
            multicad_ffd: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub iterations: u32,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub free_variables: BTreeSet<FreeVariable>,
    pub ablation_flags: AblationFlags,
    pub raster: SoftRasterConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.03,
            iterations: 16,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            free_variables: FreeVariable::ALL.into_iter().collect(),
            ablation_flags: AblationFlags::default(),
            raster: SoftRasterConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("at least one iteration is required".into()));
        }
        if self.free_variables.is_empty() {
            return Err(Error::InvalidArgument("no free variables".into()));
        }
        self.raster.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    fn is_free(&self, v: FreeVariable) -> bool {
        self.free_variables.contains(&v) && (v != FreeVariable::Ffd || self.ablation_flags.multicad_ffd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub state: ObjectState,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_trace: Vec<f64>,
    pub selected_mesh: usize,
    pub config: FitConfig,
}

/// Offsets of each parameter group inside the flat parameter vector.
#[derive(Debug, Clone, Copy, Default)]
struct Layout {
    scale: Option<usize>,
    yaw: Option<usize>,
    quaternion: Option<usize>,
    offset: Option<usize>,
    distance: Option<usize>,
    ffd: Option<usize>,
    len: usize,
}

impl Layout {
    fn new(cfg: &FitConfig) -> Self {
        let mut l = Self::default();
        let mut take = |n: usize| {
            let at = l.len;
            l.len += n;
            Some(at)
        };
        if cfg.is_free(FreeVariable::Scale) {
            l.scale = take(3);
        }
        if cfg.is_free(FreeVariable::Yaw) {
            if cfg.ablation_flags.yaw_constraint {
                l.yaw = take(1);
            } else {
                l.quaternion = take(4);
            }
        }
        if cfg.is_free(FreeVariable::OffsetE) {
            l.offset = take(2);
        }
        if cfg.is_free(FreeVariable::LogTau) {
            l.distance = take(1);
        }
        if cfg.is_free(FreeVariable::Ffd) {
            l.ffd = take(3 * LATTICE_POINTS);
        }
        l
    }

    fn name(&self, i: usize, normalized: bool) -> String {
        let groups = [
            (self.scale, 3, "scale"),
            (self.yaw, 1, "yaw"),
            (self.quaternion, 4, "quaternion"),
            (self.offset, 2, "offset_e"),
            (self.distance, 1, if normalized { "log_tau" } else { "log_t" }),
            (self.ffd, 3 * LATTICE_POINTS, "ffd"),
        ];
        for (at, n, name) in groups {
            if let Some(at) = at {
                if (at..at + n).contains(&i) {
                    return if n == 1 { name.to_string() } else { format!("{name}[{}]", i - at) };
                }
            }
        }
        format!("#{i}")
    }
}

/// Lattice offset per unit of the FFD optimization parameters. Adam moves
/// every coordinate by roughly the learning rate per step, so without this
/// the 192 control offsets swamp the pose in the first iterations.
pub const FFD_PARAM_UNIT: f64 = 0.05;

fn ffd_unit() -> f64 {
    FFD_PARAM_UNIT
}

/// Maps between an object state and the flat parameter vector.
struct Parametrization<'a> {
    layout: Layout,
    normalized_distance: bool,
    base: ObjectState,
    camera: &'a Camera,
}

impl Parametrization<'_> {
    fn encode(&self, state: &ObjectState) -> Result<Vec<f64>> {
        let l = &self.layout;
        let mut p = vec![0.0; l.len];
        let code = reparam_encode(state)?;
        if let Some(at) = l.scale {
            for a in 0..3 {
                p[at + a] = state.scale[a].ln();
            }
        }
        if let Some(at) = l.yaw {
            p[at] = state.yaw.radians();
        }
        if let Some(at) = l.quaternion {
            p[at..at + 4].copy_from_slice(&state.rotation().as_array());
        }
        if let Some(at) = l.offset {
            p[at] = code.offset_e.x;
            p[at + 1] = code.offset_e.y;
        }
        if let Some(at) = l.distance {
            p[at] = if self.normalized_distance { code.log_tau } else { state.ray_distance.ln() };
        }
        if let Some(at) = l.ffd {
            for (dst, src) in p[at..at + 3 * LATTICE_POINTS].iter_mut().zip(state.ffd.to_flat()) {
                *dst = src / ffd_unit();
            }
        }
        Ok(p)
    }

    fn decode(&self, p: &[f64]) -> Result<ObjectState> {
        let l = &self.layout;
        let mut s = self.base.clone();
        let b = s.bbox;
        if let Some(at) = l.scale {
            s.scale = Vector3::new(p[at].exp(), p[at + 1].exp(), p[at + 2].exp());
        }
        if let Some(at) = l.yaw {
            s.yaw = YawAngle::new(p[at]);
        }
        if let Some(at) = l.quaternion {
            let q = Quaternion::new_normalized(p[at], p[at + 1], p[at + 2], p[at + 3])?;
            s.free_rotation = Some(q);
            s.yaw = YawAngle::from_quaternion(&q);
        }
        if let Some(at) = l.offset {
            s.center_2d = Vector2::new(b.x + p[at] * b.w, b.y + p[at + 1] * b.h);
        }
        if let Some(at) = l.distance {
            s.ray_distance = if self.normalized_distance {
                (p[at] - 0.5 * (b.w * b.h).ln()).exp()
            } else {
                p[at].exp()
            };
        }
        if let Some(at) = l.ffd {
            let flat: Vec<f64> = p[at..at + 3 * LATTICE_POINTS].iter().map(|x| x * ffd_unit()).collect();
            s.ffd = FfdLattice::from_flat(&flat)?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Chains camera-frame vertex gradients back to the parameters.
    fn chain(
        &self,
        state: &ObjectState,
        deformed: &[Vector3<f64>],
        weights: &FfdWeights,
        vertex_grads: &[Vector3<f64>],
    ) -> Result<Vec<f64>> {
        let l = &self.layout;
        let mut g = vec![0.0; l.len];
        let rot = state.rotation_matrix();
        let scale = state.scale;
        // gradients expressed in the object frame, before rotation
        let local: Vec<Vector3<f64>> = vertex_grads.iter().map(|gv| rot.transpose() * gv).collect();
        let scaled: Vec<Vector3<f64>> = deformed.iter().map(|v| v.component_mul(&scale)).collect();
        let grad_t: Vector3<f64> = vertex_grads.iter().sum();

        if let Some(at) = l.scale {
            for (lg, sv) in local.iter().zip(&scaled) {
                for a in 0..3 {
                    g[at + a] += lg[a] * sv[a];
                }
            }
        }
        if let Some(at) = l.yaw {
            let d_rot = state.yaw.to_matrix_derivative();
            g[at] = vertex_grads.iter().zip(&scaled).map(|(gv, sv)| gv.dot(&(d_rot * sv))).sum();
        }
        if let Some(at) = l.quaternion {
            let q = state.rotation();
            let d_rots = quaternion_matrix_derivatives(&q);
            let mut gq = [0.0; 4];
            for (c, d_rot) in d_rots.iter().enumerate() {
                gq[c] = vertex_grads.iter().zip(&scaled).map(|(gv, sv)| gv.dot(&(d_rot * sv))).sum();
            }
            // tangent projection: the iterate is renormalized after each step
            let qa = q.as_array();
            let radial: f64 = gq.iter().zip(&qa).map(|(a, b)| a * b).sum();
            for c in 0..4 {
                g[at + c] = gq[c] - radial * qa[c];
            }
        }
        if let Some(at) = l.offset {
            let jac = ray_direction_jacobian(self.camera, &state.center_2d) * state.ray_distance;
            let b = state.bbox;
            g[at] = grad_t.dot(&jac.column(0)) * b.w;
            g[at + 1] = grad_t.dot(&jac.column(1)) * b.h;
        }
        if let Some(at) = l.distance {
            // both log τ and log t scale the translation multiplicatively
            g[at] = grad_t.dot(&translation_vector(state, self.camera)?);
        }
        if let Some(at) = l.ffd {
            for (v, lg) in local.iter().enumerate() {
                let d = lg.component_mul(&scale) * ffd_unit();
                if d == Vector3::zeros() {
                    continue;
                }
                for (c, &w) in weights.vertex(v).iter().enumerate() {
                    for a in 0..3 {
                        g[at + 3 * c + a] += w * d[a];
                    }
                }
            }
        }
        Ok(g)
    }
}

/// `∂R/∂w, ∂R/∂x, ∂R/∂y, ∂R/∂z` of the quaternion rotation matrix.
fn quaternion_matrix_derivatives(q: &Quaternion) -> [Matrix3<f64>; 4] {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    [
        Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0,
        Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0,
        Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0,
        Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0,
    ]
}

struct Evaluation {
    state: ObjectState,
    loss: f64,
    grads: Vec<f64>,
}

/// Fits the free parameters of `init` to `target` by Adam on the masked
/// reprojection loss of the soft silhouette.
///
/// The loss trace holds the loss after each update, so its last entry is
/// the loss of the returned state.
pub fn fit_object(
    target: &SilhouetteImage,
    mask: &ValidMask,
    init: &ObjectState,
    mesh_lib: &MeshLibrary,
    camera: &Camera,
    cfg: &FitConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    init.validate()?;
    let mut base = init.clone();
    if !cfg.ablation_flags.multicad_ffd {
        base.mesh_index = 0;
        base.ffd = FfdLattice::zero();
    }
    if !cfg.ablation_flags.yaw_constraint && base.free_rotation.is_none() {
        base.free_rotation = Some(base.yaw.to_quaternion());
    }
    let mesh = mesh_lib
        .get(base.mesh_index)
        .ok_or_else(|| Error::InvalidState(format!("mesh index {} out of range", base.mesh_index)))?;
    let weights = FfdWeights::new(mesh)?;
    let param = Parametrization {
        layout: Layout::new(cfg),
        normalized_distance: cfg.ablation_flags.normalized_distance,
        base,
        camera,
    };

    let evaluate = |p: &[f64]| -> Result<Evaluation> {
        let state = param.decode(p)?;
        let deformed = weights.deform(mesh, &state.ffd);
        let posed = pose_vertices(mesh, &weights, &state, camera)?;
        let fit = silhouette_loss_and_gradient(&posed, &mesh.triangles, camera, &cfg.raster, target, mask)?;
        let grads = param.chain(&state, &deformed, &weights, &fit.vertex_gradients)?;
        Ok(Evaluation { state, loss: fit.loss, grads })
    };

    let mut params = param.encode(&param.base)?;
    let mut current = evaluate(&params)?;
    let initial_loss = current.loss;
    if !initial_loss.is_finite() {
        return Err(Error::Divergence(0));
    }
    let adam = cfg.adam();
    let mut moments = AdamMoments::zeros(params.len());
    let mut trace = Vec::with_capacity(cfg.iterations as usize);
    for step in 1..=cfg.iterations {
        if let Some(i) = current.grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(
                param.layout.name(i, cfg.ablation_flags.normalized_distance),
            ));
        }
        adam_step(&mut params, &current.grads, &mut moments, &adam, step)?;
        if let Some(at) = param.layout.quaternion {
            let n = params[at..at + 4].iter().map(|v| v * v).sum::<f64>().sqrt();
            params[at..at + 4].iter_mut().for_each(|v| *v /= n);
        }
        current = match evaluate(&params) {
            Ok(e) => e,
            Err(source) => {
                return Err(Error::FitAborted {
                    iteration: step,
                    partial_trace: trace,
                    source: Box::new(source),
                })
            }
        };
        if !current.loss.is_finite() {
            return Err(Error::Divergence(step as usize));
        }
        trace.push(current.loss);
    }
    Ok(FitResult {
        selected_mesh: current.state.mesh_index,
        state: current.state,
        initial_loss,
        final_loss: *trace.last().expect("at least one iteration"),
        loss_trace: trace,
        config: cfg.clone(),
    })
}

/// Fits every library mesh and keeps the lowest final loss (ties go to the
/// lower index). Without the multi-mesh ablation flag only mesh 0 is used.
/// Candidates whose fit aborts are skipped; the first error is returned
/// when every candidate fails.
pub fn select_mesh_exhaustive(
    target: &SilhouetteImage,
    mask: &ValidMask,
    init: &ObjectState,
    mesh_lib: &MeshLibrary,
    camera: &Camera,
    cfg: &FitConfig,
) -> Result<FitResult> {
    if mesh_lib.is_empty() {
        return Err(Error::InvalidArgument("mesh library is empty".into()));
    }
    if !cfg.ablation_flags.multicad_ffd {
        return fit_object(target, mask, init, mesh_lib, camera, cfg);
    }
    let results: Vec<Result<FitResult>> = (0..mesh_lib.len())
        .into_par_iter()
        .map(|m| {
            let mut start = init.clone();
            if start.mesh_index != m {
                start.mesh_index = m;
                start.ffd = FfdLattice::zero();
            }
            fit_object(target, mask, &start, mesh_lib, camera, cfg)
        })
        .collect();
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for (m, r) in results.into_iter().enumerate() {
        match r {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.final_loss < b.final_loss) {
                    best = Some(fit);
                }
            }
            Err(e) => {
                warn!("mesh {m} fit failed: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one candidate"))
}

use nalgebra::{Matrix3, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::camera::Camera;
use super::ffd::{FfdLattice, FfdWeights};
use super::mesh::Mesh;
use super::quat::{Quaternion, YawAngle};
use crate::{Error, Result};

/// 2D detection box: center `(x, y)` and size `(w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox2 {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox2 {
    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0) || !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::InvalidState(format!(
                "bounding box needs positive width and height, got {}×{}",
                self.w, self.h
            )));
        }
        Ok(())
    }
}

impl From<[f64; 4]> for BBox2 {
    fn from(v: [f64; 4]) -> Self {
        Self { x: v[0], y: v[1], w: v[2], h: v[3] }
    }
}

impl From<BBox2> for [f64; 4] {
    fn from(b: BBox2) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

/// Full geometric code of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub mesh_index: usize,
    #[serde(default, skip_serializing_if = "FfdLattice::is_zero")]
    pub ffd: FfdLattice,
    #[serde(with = "vec3_array")]
    pub scale: Vector3<f64>,
    pub yaw: YawAngle,
    /// Unconstrained rotation, present only when the one-axis yaw
    /// constraint is lifted. Overrides `yaw` for posing.
    #[serde(default, rename = "quaternion", skip_serializing_if = "Option::is_none")]
    pub free_rotation: Option<Quaternion>,
    #[serde(with = "vec2_array")]
    pub center_2d: Vector2<f64>,
    pub ray_distance: f64,
    pub bbox: BBox2,
}

impl ObjectState {
    pub fn validate(&self) -> Result<()> {
        if !(self.ray_distance > 0.0) || !self.ray_distance.is_finite() {
            return Err(Error::InvalidState("ray distance must be positive".into()));
        }
        if self.scale.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidState("scale components must be positive".into()));
        }
        if !self.center_2d.iter().all(|c| c.is_finite()) || !self.yaw.radians().is_finite() {
            return Err(Error::InvalidState("non-finite pose".into()));
        }
        if !self.ffd.is_finite() {
            return Err(Error::InvalidState("non-finite lattice offsets".into()));
        }
        if let Some(q) = &self.free_rotation {
            if !q.is_unit() {
                return Err(Error::NonUnitQuaternion { norm: q.norm() });
            }
        }
        self.bbox.validate()
    }

    /// Rotation used for posing.
    pub fn rotation(&self) -> Quaternion {
        self.free_rotation.unwrap_or_else(|| self.yaw.to_quaternion())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        match &self.free_rotation {
            Some(q) => q.to_matrix(),
            None => self.yaw.to_matrix(),
        }
    }
}

/// Box-relative translation code: center offset and log normalized distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReparamCode {
    #[serde(with = "vec2_array")]
    pub offset_e: Vector2<f64>,
    pub log_tau: f64,
}

/// `e = ((x3D - x2D) / w, (y3D - y2D) / h)`, `log τ = log(t √(w h))`.
pub fn reparam_encode(state: &ObjectState) -> Result<ReparamCode> {
    state.bbox.validate()?;
    let b = &state.bbox;
    Ok(ReparamCode {
        offset_e: Vector2::new(
            (state.center_2d.x - b.x) / b.w,
            (state.center_2d.y - b.y) / b.h,
        ),
        log_tau: state.ray_distance.ln() + 0.5 * (b.w * b.h).ln(),
    })
}

/// Inverse of [`reparam_encode`]: returns `(center_2d, ray_distance)`.
pub fn reparam_decode(code: &ReparamCode, bbox: &BBox2) -> Result<(Vector2<f64>, f64)> {
    bbox.validate()?;
    let center = Vector2::new(bbox.x + code.offset_e.x * bbox.w, bbox.y + code.offset_e.y * bbox.h);
    let t = (code.log_tau - 0.5 * (bbox.w * bbox.h).ln()).exp();
    Ok((center, t))
}

/// Camera-frame translation `t · d̂`, with `d̂` the unit ray through the
/// projected center. `t` is the Euclidean distance along that ray.
pub fn translation_vector(state: &ObjectState, camera: &Camera) -> Result<Vector3<f64>> {
    if !(state.ray_distance > 0.0) {
        return Err(Error::InvalidState("ray distance must be positive".into()));
    }
    Ok(state.ray_distance * camera.ray_direction(&state.center_2d)?)
}

/// Derivative of the unit ray direction with respect to the pixel position.
pub fn ray_direction_jacobian(camera: &Camera, pixel: &Vector2<f64>) -> Matrix3x2<f64> {
    let r = camera.pixel_direction(pixel);
    let n = r.norm();
    let d = r / n;
    let proj = (Matrix3::identity() - d * d.transpose()) / n;
    let dr = Matrix3x2::new(1.0 / camera.focal_x, 0.0, 0.0, 1.0 / camera.focal_y, 0.0, 0.0);
    proj * dr
}

/// Posed vertices `R · (S · FFD(v)) + T` given precomputed lattice weights.
pub fn pose_vertices(
    mesh: &Mesh,
    weights: &FfdWeights,
    state: &ObjectState,
    camera: &Camera,
) -> Result<Vec<Vector3<f64>>> {
    let deformed = weights.deform(mesh, &state.ffd);
    let rot = state.rotation_matrix();
    let t = translation_vector(state, camera)?;
    Ok(deformed
        .iter()
        .map(|v| rot * v.component_mul(&state.scale) + t)
        .collect())
}

/// Deforms, scales, rotates and translates `mesh` into the camera frame.
pub fn pose_mesh(mesh: &Mesh, state: &ObjectState, camera: &Camera) -> Result<Mesh> {
    state.validate()?;
    let weights = FfdWeights::new(mesh)?;
    Ok(mesh.with_vertices(pose_vertices(mesh, &weights, state, camera)?))
}

mod vec3_array {
    use nalgebra::Vector3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector3<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector3<f64>, D::Error> {
        <[f64; 3]>::deserialize(d).map(Vector3::from)
    }
}

pub(crate) mod vec2_array {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector2<f64>, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector2<f64>, D::Error> {
        <[f64; 2]>::deserialize(d).map(Vector2::from)
    }
}

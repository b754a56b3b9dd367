use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::model::{Scene, SceneObject};
use crate::geom::state::vec2_array;
use crate::geom::{Quaternion, YawAngle};
use crate::{Error, Result};

/// Largest allowed gap between an edit's start position and the object's
/// current projected center.
pub const SOURCE_TOLERANCE_PX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Move,
    Delete,
    Duplicate,
}

/// Object-wise edit: move the projected center from `src_center` to
/// `tgt_center`, bring the object `zoom_rho` times closer along its ray and
/// spin it by `delta_ry` about the camera y axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditOp {
    pub object_id: u32,
    #[serde(default, with = "opt_vec2", skip_serializing_if = "Option::is_none")]
    pub src_center: Option<Vector2<f64>>,
    #[serde(default, with = "opt_vec2", skip_serializing_if = "Option::is_none")]
    pub tgt_center: Option<Vector2<f64>>,
    #[serde(default = "one")]
    pub zoom_rho: f64,
    #[serde(default)]
    pub delta_ry: f64,
    pub kind: EditKind,
}

fn one() -> f64 {
    1.0
}

impl EditOp {
    pub fn move_object(object_id: u32, src: Vector2<f64>, tgt: Vector2<f64>, zoom_rho: f64, delta_ry: f64) -> Self {
        Self {
            object_id,
            src_center: Some(src),
            tgt_center: Some(tgt),
            zoom_rho,
            delta_ry,
            kind: EditKind::Move,
        }
    }

    pub fn delete(object_id: u32) -> Self {
        Self {
            object_id,
            src_center: None,
            tgt_center: None,
            zoom_rho: 1.0,
            delta_ry: 0.0,
            kind: EditKind::Delete,
        }
    }

    pub fn duplicate(object_id: u32, tgt: Vector2<f64>, zoom_rho: f64, delta_ry: f64) -> Self {
        Self {
            tgt_center: Some(tgt),
            zoom_rho,
            delta_ry,
            kind: EditKind::Duplicate,
            ..Self::delete(object_id)
        }
    }
}

/// Applies the move rule to one object in place.
fn move_object(scene: &Scene, obj: &mut SceneObject, op: &EditOp) -> Result<()> {
    if !(op.zoom_rho > 0.0) || !op.zoom_rho.is_finite() {
        return Err(Error::InvalidEdit(format!("zoom factor must be positive, got {}", op.zoom_rho)));
    }
    if !op.delta_ry.is_finite() {
        return Err(Error::InvalidEdit("rotation must be finite".into()));
    }
    let state = &mut obj.state;
    if let Some(src) = op.src_center {
        if (src - state.center_2d).amax() > SOURCE_TOLERANCE_PX {
            return Err(Error::InvalidEdit(format!(
                "start position ({}, {}) does not match object {} at ({}, {})",
                src.x, src.y, obj.id, state.center_2d.x, state.center_2d.y
            )));
        }
    }
    let tgt = op.tgt_center.unwrap_or(state.center_2d);
    if !tgt.iter().all(|c| c.is_finite()) {
        return Err(Error::InvalidEdit("target position must be finite".into()));
    }
    let distance = state.ray_distance / op.zoom_rho;
    if !(distance > scene.camera.near_plane) {
        return Err(Error::InvalidEdit(format!(
            "object {} would sit at distance {distance}, inside the near plane {}",
            obj.id, scene.camera.near_plane
        )));
    }
    state.center_2d = tgt;
    state.ray_distance = distance;
    state.yaw = state.yaw.rotated_by(op.delta_ry);
    if let Some(q) = state.free_rotation {
        let spin = YawAngle::new(op.delta_ry).to_quaternion();
        let q: Quaternion = spin.compose(&q);
        state.free_rotation = Some(q);
    }
    Ok(())
}

/// Returns the edited scene; the input is left untouched.
pub fn apply_edit(scene: &Scene, op: &EditOp) -> Result<Scene> {
    let mut out = scene.clone();
    let index = out
        .objects
        .iter()
        .position(|o| o.id == op.object_id)
        .ok_or(Error::UnknownObject(op.object_id))?;
    match op.kind {
        EditKind::Move => {
            let mut obj = out.objects[index].clone();
            move_object(scene, &mut obj, op)?;
            out.objects[index] = obj;
        }
        EditKind::Delete => {
            out.objects.remove(index);
        }
        EditKind::Duplicate => {
            let mut copy = out.objects[index].clone();
            copy.id = scene.next_id();
            move_object(scene, &mut copy, op)?;
            out.objects.push(copy);
        }
    }
    Ok(out)
}

/// Inverse of a move: swapped positions, reciprocal zoom, negated rotation.
pub fn invert_edit(op: &EditOp) -> Result<EditOp> {
    if op.kind != EditKind::Move {
        return Err(Error::InvalidEdit(format!("{:?} edits cannot be inverted without a snapshot", op.kind)));
    }
    if !(op.zoom_rho > 0.0) {
        return Err(Error::InvalidEdit("zoom factor must be positive".into()));
    }
    Ok(EditOp {
        object_id: op.object_id,
        src_center: op.tgt_center,
        tgt_center: op.src_center,
        zoom_rho: 1.0 / op.zoom_rho,
        delta_ry: -op.delta_ry,
        kind: EditKind::Move,
    })
}

mod opt_vec2 {
    use nalgebra::Vector2;
    use serde::{Deserialize, Deserializer, Serializer};

    use super::vec2_array;

    pub fn serialize<S: Serializer>(v: &Option<Vector2<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => vec2_array::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector2<f64>>, D::Error> {
        Ok(Option::<[f64; 2]>::deserialize(d)?.map(Vector2::from))
    }
}

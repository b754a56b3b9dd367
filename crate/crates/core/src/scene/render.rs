use rayon::prelude::*;

use super::model::Scene;
use crate::geom::{pose_mesh, Mesh, YawAngle};
use crate::losses::ValidMask;
use crate::raster::{render_hard, render_silhouette_soft, HardObject, RenderLayers, SilhouetteImage, SoftRasterConfig};
use crate::{Error, Result};

/// Joint hard layers plus each object's independent soft silhouette, in
/// scene order.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRender {
    pub layers: RenderLayers,
    pub silhouettes: Vec<(u32, SilhouetteImage)>,
}

/// One object's mesh in camera coordinates.
#[derive(Debug, Clone)]
pub struct PosedObject {
    pub id: u32,
    pub mesh: Mesh,
    pub yaw: YawAngle,
}

fn tag(id: u32) -> impl Fn(Error) -> Error {
    move |e| Error::Object { id, source: Box::new(e) }
}

pub fn pose_scene(scene: &Scene) -> Result<Vec<PosedObject>> {
    scene
        .objects
        .iter()
        .map(|o| {
            let mesh = scene
                .mesh_lib
                .get(o.state.mesh_index)
                .ok_or_else(|| Error::InvalidState(format!("mesh index {} out of range", o.state.mesh_index)))
                .map_err(tag(o.id))?;
            Ok(PosedObject {
                id: o.id,
                mesh: pose_mesh(mesh, &o.state, &scene.camera).map_err(tag(o.id))?,
                yaw: YawAngle::from_quaternion(&o.state.rotation()),
            })
        })
        .collect()
}

fn hard_layers(posed: &[PosedObject], scene: &Scene) -> RenderLayers {
    let objects: Vec<HardObject<'_>> = posed
        .iter()
        .map(|p| HardObject {
            id: p.id,
            mesh: &p.mesh,
            yaw: p.yaw,
        })
        .collect();
    render_hard(&objects, &scene.camera)
}

/// Instance, depth, normal and pose-bin layers for the whole scene.
pub fn render_scene_hard(scene: &Scene) -> Result<RenderLayers> {
    Ok(hard_layers(&pose_scene(scene)?, scene))
}

pub fn render_scene(scene: &Scene, cfg: &SoftRasterConfig) -> Result<SceneRender> {
    let posed = pose_scene(scene)?;
    let layers = hard_layers(&posed, scene);
    let silhouettes = posed
        .par_iter()
        .map(|p| {
            render_silhouette_soft(&p.mesh, &scene.camera, cfg)
                .map(|s| (p.id, s))
                .map_err(tag(p.id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneRender { layers, silhouettes })
}

/// Pixels usable for fitting `object_id`: false where another object's
/// surface is strictly nearer than this object's own surface. Pixels the
/// object does not cover stay valid.
pub fn occlusion_mask(scene: &Scene, object_id: u32) -> Result<ValidMask> {
    let posed = pose_scene(scene)?;
    let own = posed.iter().find(|p| p.id == object_id).ok_or(Error::UnknownObject(object_id))?;
    let alone = hard_layers(std::slice::from_ref(own), scene);
    let others: Vec<PosedObject> = posed.iter().filter(|p| p.id != object_id).cloned().collect();
    let rest = hard_layers(&others, scene);
    let values = alone.depth.iter().zip(&rest.depth).map(|(own, other)| !(own.is_finite() && other < own)).collect();
    Ok(ValidMask {
        width: scene.camera.width,
        height: scene.camera.height,
        values,
    })
}

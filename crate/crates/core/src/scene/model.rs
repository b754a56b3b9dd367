use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geom::{BBox2, Camera, FfdLattice, MeshLibrary, ObjectState, Quaternion, YawAngle};
use crate::{Error, Result};

/// Version tag of the scene file format.
pub const SCENE_FORMAT: &str = "d3sdn-scene/1";
/// `mesh_lib` value selecting the built-in vehicle library.
pub const BUILTIN_LIBRARY: &str = "builtin:vehicles";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectRecord", into = "ObjectRecord")]
pub struct SceneObject {
    pub id: u32,
    pub state: ObjectState,
}

/// Flat JSON form of a scene object. Spelled out rather than flattened so
/// parse errors keep their field path.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectRecord {
    id: u32,
    mesh_index: usize,
    scale: [f64; 3],
    yaw: YawAngle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quaternion: Option<Quaternion>,
    center_2d: [f64; 2],
    ray_distance: f64,
    bbox: BBox2,
    #[serde(default, skip_serializing_if = "FfdLattice::is_zero")]
    ffd: FfdLattice,
}

impl TryFrom<ObjectRecord> for SceneObject {
    type Error = Error;

    fn try_from(r: ObjectRecord) -> Result<Self> {
        if let Some(q) = r.quaternion {
            if !q.is_unit() {
                return Err(Error::NonUnitQuaternion { norm: q.norm() });
            }
        }
        Ok(Self {
            id: r.id,
            state: ObjectState {
                mesh_index: r.mesh_index,
                ffd: r.ffd,
                scale: r.scale.into(),
                yaw: r.yaw,
                free_rotation: r.quaternion,
                center_2d: r.center_2d.into(),
                ray_distance: r.ray_distance,
                bbox: r.bbox,
            },
        })
    }
}

impl From<SceneObject> for ObjectRecord {
    fn from(o: SceneObject) -> Self {
        let s = o.state;
        Self {
            id: o.id,
            mesh_index: s.mesh_index,
            scale: s.scale.into(),
            yaw: s.yaw,
            quaternion: s.free_rotation,
            center_2d: s.center_2d.into(),
            ray_distance: s.ray_distance,
            bbox: s.bbox,
            ffd: s.ffd,
        }
    }
}

/// Camera, ordered objects and the mesh library they index into.
#[derive(Debug, Clone)]
pub struct Scene {
    pub camera: Camera,
    pub mesh_lib_path: String,
    pub mesh_lib: Arc<MeshLibrary>,
    pub objects: Vec<SceneObject>,
}

impl PartialEq for Scene {
    fn eq(&self, other: &Self) -> bool {
        self.camera == other.camera && self.mesh_lib_path == other.mesh_lib_path && self.objects == other.objects
    }
}

/// On-disk scene record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub format: String,
    pub camera: Camera,
    pub mesh_lib: String,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(camera: Camera, mesh_lib_path: String, mesh_lib: Arc<MeshLibrary>, objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Self {
            camera,
            mesh_lib_path,
            mesh_lib,
            objects,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// Empty scene over the built-in library.
    pub fn builtin(camera: Camera) -> Self {
        Self {
            camera,
            mesh_lib_path: BUILTIN_LIBRARY.into(),
            mesh_lib: Arc::new(MeshLibrary::builtin_vehicles()),
            objects: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        let mut seen = HashSet::new();
        for obj in &self.objects {
            if obj.id == 0 {
                return Err(Error::InvalidState("object id 0 is reserved for background".into()));
            }
            if !seen.insert(obj.id) {
                return Err(Error::InvalidState(format!("duplicate object id {}", obj.id)));
            }
            if obj.state.mesh_index >= self.mesh_lib.len() {
                return Err(Error::Object {
                    id: obj.id,
                    source: Box::new(Error::InvalidState(format!(
                        "mesh index {} out of range for a library of {}",
                        obj.state.mesh_index,
                        self.mesh_lib.len()
                    ))),
                });
            }
            obj.state.validate().map_err(|e| Error::Object { id: obj.id, source: Box::new(e) })?;
        }
        Ok(())
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: u32) -> Option<&mut SceneObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn next_id(&self) -> u32 {
        self.objects.iter().map(|o| o.id).max().unwrap_or(0) + 1
    }

    pub fn to_file(&self) -> SceneFile {
        SceneFile {
            format: SCENE_FORMAT.into(),
            camera: self.camera,
            mesh_lib: self.mesh_lib_path.clone(),
            objects: self.objects.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    /// Builds a scene from a parsed file, resolving a relative library path
    /// against `base_dir`.
    pub fn from_file(file: SceneFile, base_dir: Option<&Path>) -> Result<Self> {
        if file.format != SCENE_FORMAT {
            return Err(Error::Parse(format!("format: expected `{SCENE_FORMAT}`, got `{}`", file.format)));
        }
        let lib = load_library(&file.mesh_lib, base_dir)?;
        Self::new(file.camera, file.mesh_lib, Arc::new(lib), file.objects)
    }

    /// Parses scene JSON; errors name the offending field path.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        Self::from_file(parse_scene_file(text)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Deserializes a scene file, reporting the JSON path of the first error.
pub fn parse_scene_file(text: &str) -> Result<SceneFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse(format!("{path}: {}", e.into_inner()))
    })
}

pub fn load_library(spec: &str, base_dir: Option<&Path>) -> Result<MeshLibrary> {
    if spec == BUILTIN_LIBRARY {
        return Ok(MeshLibrary::builtin_vehicles());
    }
    let mut path = PathBuf::from(spec);
    if path.is_relative() {
        if let Some(base) = base_dir {
            path = base.join(path);
        }
    }
    MeshLibrary::load_dir(&path)
}

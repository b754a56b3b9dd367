use std::sync::Arc;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{pose_mesh, BBox2, Camera, FfdLattice, MeshLibrary, ObjectState, YawAngle};
use crate::losses::ValidMask;
use crate::raster::{binarize, render_silhouette_soft, SilhouetteImage, SoftRasterConfig};
use crate::scene::{occlusion_mask, Scene, SceneObject, BUILTIN_LIBRARY};
use crate::{Error, Result};

/// Objects with fewer visible pixels are not scored.
pub const MIN_VISIBLE_PIXELS: usize = 256;
/// Objects hidden by at least this fraction of their footprint are not scored.
pub const MAX_OCCLUSION_RATIO: f64 = 0.7;

/// Camera height above the ground plane, in meters.
const CAMERA_HEIGHT: f64 = 1.65;
const DEPTH_RANGE: (f64, f64) = (7.0, 16.0);
const MAX_OBJECTS: usize = 5;
const PLACEMENT_TRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl Difficulty {
    /// Maximum yaw (radians), relative distance and relative scale
    /// perturbations of the initial guess.
    pub fn perturbation(self) -> (f64, f64, f64) {
        match self {
            Self::Easy => (5f64.to_radians(), 0.05, 0.0),
            Self::Hard => (15f64.to_radians(), 0.10, 0.10),
        }
    }
}

impl std::str::FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Self::Easy),
            "hard" => Ok(Self::Hard),
            _ => Err(Error::InvalidArgument(format!("unknown difficulty `{s}` (easy, hard)"))),
        }
    }
}

/// Benchmark camera: a wide dashboard-style view (720 px focal length at
/// 1248×384) downscaled by six.
pub fn bench_camera() -> Camera {
    Camera::new(120.0, 120.0, 104.0, 32.0, 208, 64, 0.1).expect("valid camera")
}

/// Typical width, height and length in meters for a library entry.
pub fn class_dimensions(name: &str) -> Vector3<f64> {
    let (w, h, l) = match name {
        "sedan" => (1.8, 1.45, 4.6),
        "hatchback" => (1.75, 1.5, 4.0),
        "suv" => (1.9, 1.75, 4.7),
        "van" => (1.95, 2.0, 5.0),
        "bus" => (2.55, 3.1, 10.5),
        "pickup" => (1.95, 1.8, 5.3),
        "box_truck" => (2.3, 3.0, 7.0),
        "coupe" => (1.8, 1.3, 4.4),
        _ => (1.8, 1.5, 4.5),
    };
    Vector3::new(w, h, l)
}

/// Ground-truth fitting inputs for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTarget {
    pub id: u32,
    /// Binarized silhouette of the object rendered alone.
    pub silhouette: SilhouetteImage,
    /// Pixels not hidden by nearer objects.
    pub mask: ValidMask,
    pub visible_pixels: usize,
    /// Hidden fraction of the object's own footprint.
    pub occlusion_ratio: f64,
    /// Whether the object passes the visibility filters.
    pub scored: bool,
}

impl ObjectTarget {
    /// The silhouette restricted to visible pixels.
    pub fn visible(&self) -> SilhouetteImage {
        masked(&self.silhouette, &self.mask)
    }
}

pub fn masked(image: &SilhouetteImage, mask: &ValidMask) -> SilhouetteImage {
    SilhouetteImage {
        width: image.width,
        height: image.height,
        values: image.values.iter().zip(&mask.values).map(|(&v, &m)| if m { v } else { 0.0 }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub seed: u64,
    pub difficulty: Difficulty,
    pub truth: Scene,
    pub targets: Vec<ObjectTarget>,
    /// Same objects with perturbed pose and size.
    pub init: Scene,
}

/// Binarized silhouette of one state, rendered alone.
pub fn object_silhouette(lib: &MeshLibrary, state: &ObjectState, camera: &Camera) -> Result<SilhouetteImage> {
    let mesh = lib
        .get(state.mesh_index)
        .ok_or_else(|| Error::InvalidState(format!("mesh index {} out of range", state.mesh_index)))?;
    let cfg = SoftRasterConfig::default();
    Ok(binarize(&render_silhouette_soft(&pose_mesh(mesh, state, camera)?, camera, &cfg)?, &cfg))
}

/// Tight box around the covered pixels, or None when nothing is covered or
/// the silhouette touches the image border.
fn interior_box(sil: &SilhouetteImage) -> Option<BBox2> {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..sil.height {
        for x in 0..sil.width {
            if sil.values[y * sil.width + x] >= 0.5 {
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX || x0 == 0 || y0 == 0 || x1 + 1 == sil.width || y1 + 1 == sil.height {
        return None;
    }
    let (w, h) = ((x1 + 1 - x0) as f64, (y1 + 1 - y0) as f64);
    Some(BBox2 {
        x: x0 as f64 + w / 2.0,
        y: y0 as f64 + h / 2.0,
        w,
        h,
    })
}

/// Ground footprint (x, z, radius) of a placed object.
type Footprint = (f64, f64, f64);

fn sample_object(
    rng: &mut ChaCha8Rng,
    lib: &MeshLibrary,
    camera: &Camera,
    placed: &[Footprint],
) -> Result<Option<(ObjectState, Footprint)>> {
    for _ in 0..PLACEMENT_TRIES {
        let mesh_index = rng.random_range(0..lib.len());
        let jitter = Vector3::from_fn(|_, _| rng.random_range(0.95..1.05));
        let scale = class_dimensions(lib.name(mesh_index).unwrap_or("")).component_mul(&jitter);
        let z = rng.random_range(DEPTH_RANGE.0..DEPTH_RANGE.1);
        let x = rng.random_range(-0.6..0.6) * z;
        let yaw = YawAngle::new(rng.random_range(0.0..std::f64::consts::TAU));
        let radius = 0.5 * scale.x.hypot(scale.z);
        if placed.iter().any(|&(px, pz, pr)| (px - x).hypot(pz - z) < pr + radius + 0.3) {
            continue;
        }
        // resting on the ground; camera y points down
        let center = Vector3::new(x, CAMERA_HEIGHT - scale.y / 2.0, z);
        let center_2d = camera.project_unchecked(&center);
        let mut state = ObjectState {
            mesh_index,
            ffd: FfdLattice::zero(),
            scale,
            yaw,
            free_rotation: None,
            center_2d,
            ray_distance: center.norm(),
            bbox: BBox2 { x: center_2d.x, y: center_2d.y, w: 1.0, h: 1.0 },
        };
        let sil = object_silhouette(lib, &state, camera)?;
        if let Some(bbox) = interior_box(&sil) {
            state.bbox = bbox;
            return Ok(Some((state, (x, z, radius))));
        }
    }
    Ok(None)
}

fn perturb(rng: &mut ChaCha8Rng, state: &ObjectState, difficulty: Difficulty) -> ObjectState {
    let (yaw, dist, scale) = difficulty.perturbation();
    let mut s = state.clone();
    s.yaw = s.yaw.rotated_by(rng.random_range(-yaw..=yaw));
    s.ray_distance *= 1.0 + rng.random_range(-dist..=dist);
    if scale > 0.0 {
        let f = Vector3::from_fn(|_, _| 1.0 + rng.random_range(-scale..=scale));
        s.scale = s.scale.component_mul(&f);
    }
    s
}

/// Random ground-truth scene on the built-in library with per-object
/// targets and a perturbed initial guess. Resamples until at least one
/// object passes the visibility filters.
pub fn gen_synthetic_scene(seed: u64, difficulty: Difficulty) -> Result<SyntheticScene> {
    gen_synthetic_scene_with(seed, difficulty, Arc::new(MeshLibrary::builtin_vehicles()), BUILTIN_LIBRARY, bench_camera())
}

pub fn gen_synthetic_scene_with(
    seed: u64,
    difficulty: Difficulty,
    lib: Arc<MeshLibrary>,
    lib_ref: &str,
    camera: Camera,
) -> Result<SyntheticScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(1..=MAX_OBJECTS);
        let mut placed = Vec::new();
        let mut objects = Vec::new();
        for _ in 0..n {
            if let Some((state, footprint)) = sample_object(&mut rng, &lib, &camera, &placed)? {
                placed.push(footprint);
                objects.push(SceneObject { id: objects.len() as u32 + 1, state });
            }
        }
        if objects.is_empty() {
            continue;
        }
        let truth = Scene::new(camera, lib_ref.to_string(), lib.clone(), objects)?;
        let targets = truth
            .objects
            .iter()
            .map(|o| {
                let silhouette = object_silhouette(&lib, &o.state, &camera)?;
                let mask = occlusion_mask(&truth, o.id)?;
                let full = silhouette.area();
                let visible = masked(&silhouette, &mask).area();
                let occlusion_ratio = 1.0 - visible as f64 / full as f64;
                Ok(ObjectTarget {
                    id: o.id,
                    silhouette,
                    mask,
                    visible_pixels: visible,
                    occlusion_ratio,
                    scored: visible >= MIN_VISIBLE_PIXELS && occlusion_ratio < MAX_OCCLUSION_RATIO,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !targets.iter().any(|t| t.scored) {
            continue;
        }
        let mut init = truth.clone();
        for o in &mut init.objects {
            o.state = perturb(&mut rng, &o.state, difficulty);
        }
        return Ok(SyntheticScene {
            seed,
            difficulty,
            truth,
            targets,
            init,
        });
    }
}

/// Ground-truth single-object scene with a centered camera view, used for
/// mesh-selection trials.
pub fn gen_single_object_scene(seed: u64, difficulty: Difficulty) -> Result<SyntheticScene> {
    let lib = Arc::new(MeshLibrary::builtin_vehicles());
    let camera = bench_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b1e_c700_0000);
    loop {
        let Some((state, _)) = sample_object(&mut rng, &lib, &camera, &[])? else {
            continue;
        };
        let silhouette = object_silhouette(&lib, &state, &camera)?;
        let area = silhouette.area();
        if area < MIN_VISIBLE_PIXELS {
            continue;
        }
        let truth = Scene::new(camera, BUILTIN_LIBRARY.into(), lib.clone(), vec![SceneObject { id: 1, state }])?;
        let mut init = truth.clone();
        init.objects[0].state = perturb(&mut rng, &init.objects[0].state, difficulty);
        let mask = ValidMask::all(camera.width, camera.height, true);
        return Ok(SyntheticScene {
            seed,
            difficulty,
            truth,
            targets: vec![ObjectTarget {
                id: 1,
                silhouette,
                mask,
                visible_pixels: area,
                occlusion_ratio: 0.0,
                scored: true,
            }],
            init,
        });
    }
}

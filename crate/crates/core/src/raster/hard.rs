use nalgebra::{Vector2, Vector3};

use crate::geom::{Camera, Mesh, YawAngle};

/// Number of yaw bins in the pose map.
pub const POSE_BINS: usize = 24;

/// Hard-rasterized per-pixel layers. Background pixels carry instance 0,
/// infinite depth, a zero normal and pose bin −1.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderLayers {
    pub width: usize,
    pub height: usize,
    pub instance: Vec<u32>,
    /// Ray distance from the camera center to the visible surface.
    pub depth: Vec<f64>,
    pub normal: Vec<Vector3<f64>>,
    pub pose_bins: Vec<i32>,
}

impl RenderLayers {
    pub fn background(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            instance: vec![0; n],
            depth: vec![f64::INFINITY; n],
            normal: vec![Vector3::zeros(); n],
            pose_bins: vec![-1; n],
        }
    }

    /// Pixels owned by `id`.
    pub fn pixel_count(&self, id: u32) -> usize {
        self.instance.iter().filter(|&&i| i == id).count()
    }

    /// Checks that all four layers agree on which pixels are background.
    pub fn is_consistent(&self) -> bool {
        (0..self.instance.len()).all(|i| {
            let bg = self.instance[i] == 0;
            bg == self.depth[i].is_infinite()
                && bg == (self.normal[i] == Vector3::zeros())
                && bg == (self.pose_bins[i] == -1)
                && (bg || (self.normal[i].norm() - 1.0).abs() < 1e-9)
        })
    }
}

/// One object to be rasterized: its id, camera-frame mesh and yaw.
#[derive(Debug, Clone, Copy)]
pub struct HardObject<'a> {
    pub id: u32,
    pub mesh: &'a Mesh,
    pub yaw: YawAngle,
}

/// Z-buffered hard rasterization of all objects; the nearest surface along
/// each pixel ray wins. Zero-area projected triangles and triangles touching
/// the near plane are skipped.
pub fn render_hard(objects: &[HardObject<'_>], camera: &Camera) -> RenderLayers {
    let mut layers = RenderLayers::background(camera.width, camera.height);
    for obj in objects {
        draw_object(&mut layers, obj, camera);
    }
    layers
}

fn draw_object(layers: &mut RenderLayers, obj: &HardObject<'_>, camera: &Camera) {
    let bin = obj.yaw.bin(POSE_BINS) as i32;
    let verts = &obj.mesh.vertices;
    for t in &obj.mesh.triangles {
        let v = [verts[t[0]], verts[t[1]], verts[t[2]]];
        if v.iter().any(|p| !(p.z > camera.near_plane)) {
            continue;
        }
        let c = v.map(|p| camera.project_unchecked(&p));
        let area = edge(c[0], c[1], c[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let mut normal = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let len = normal.norm();
        if len == 0.0 {
            continue;
        }
        normal /= len;
        // face the camera: the normal points against the viewing direction
        if normal.dot(&v[0]) > 0.0 {
            normal = -normal;
        }
        let plane_offset = normal.dot(&v[0]);

        let lo = c[0].inf(&c[1]).inf(&c[2]);
        let hi = c[0].sup(&c[1]).sup(&c[2]);
        let x0 = (lo.x - 0.5).ceil().max(0.0) as usize;
        let y0 = (lo.y - 0.5).ceil().max(0.0) as usize;
        let x1 = (hi.x - 0.5).floor().min(camera.width as f64 - 1.0);
        let y1 = (hi.y - 0.5).floor().min(camera.height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                let w = [edge(c[1], c[2], p), edge(c[2], c[0], p), edge(c[0], c[1], p)];
                let inside = if area > 0.0 {
                    w.iter().all(|&e| e >= 0.0)
                } else {
                    w.iter().all(|&e| e <= 0.0)
                };
                if !inside {
                    continue;
                }
                // intersect the pixel ray with the triangle's plane
                let ray = camera.pixel_direction(&p);
                let denom = normal.dot(&ray);
                if denom == 0.0 {
                    continue;
                }
                let hit = ray * (plane_offset / denom);
                let dist = hit.norm();
                let i = y * camera.width + x;
                if dist < layers.depth[i] {
                    layers.depth[i] = dist;
                    layers.instance[i] = obj.id;
                    layers.normal[i] = normal;
                    layers.pose_bins[i] = bin;
                }
            }
        }
    }
}

#[inline]
fn edge(a: Vector2<f64>, b: Vector2<f64>, p: Vector2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

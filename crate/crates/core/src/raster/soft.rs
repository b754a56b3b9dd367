use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::{Camera, Mesh};
use crate::losses::ValidMask;
use crate::{Error, Result};

/// Triangles whose signed distance is below `-CULL_SIGMAS · γ` are skipped
/// for a pixel. A skipped factor differs from 1 by at most σ(−12) ≈ 6e-6;
/// the exact cutoff (≈37, where `1 − σ` rounds to 1) costs about 5× more.
pub const CULL_SIGMAS: f64 = 12.0;

/// Coverage differences this small take the zero subgradient of |x|, so
/// round-off does not read as a full-size L1 slope.
pub const L1_DEAD_ZONE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftRasterConfig {
    /// Softness length scale in pixels.
    pub sharpness_gamma: f64,
    /// Coverage cutoff used by [`binarize`].
    pub hard_threshold: f64,
}

impl Default for SoftRasterConfig {
    fn default() -> Self {
        Self {
            sharpness_gamma: 1.0,
            hard_threshold: 0.5,
        }
    }
}

impl SoftRasterConfig {
    pub fn with_gamma(sharpness_gamma: f64) -> Self {
        Self {
            sharpness_gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sharpness_gamma > 0.0) || !self.sharpness_gamma.is_finite() {
            return Err(Error::InvalidArgument("sharpness must be positive".into()));
        }
        Ok(())
    }
}

/// Row-major per-pixel coverage in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SilhouetteImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl SilhouetteImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {width}×{height} image",
                values.len()
            )));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("coverage outside [0, 1]".into()));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Self {
        Self {
            width,
            height,
            values: mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Number of pixels with coverage at least one half.
    pub fn area(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 0.5).count()
    }
}

/// Thresholds coverage: `v ≥ hard_threshold ↦ 1`, otherwise 0.
pub fn binarize(soft: &SilhouetteImage, cfg: &SoftRasterConfig) -> SilhouetteImage {
    SilhouetteImage {
        width: soft.width,
        height: soft.height,
        values: soft
            .values
            .iter()
            .map(|&v| if v >= cfg.hard_threshold { 1.0 } else { 0.0 })
            .collect(),
    }
}

#[inline]
fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `1 - σ(x)` evaluated without cancellation.
#[inline]
fn one_minus_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

#[derive(Clone, Copy)]
struct ProjectedTriangle {
    corners: [Vector2<f64>; 3],
    vertex_ids: [usize; 3],
    /// Orientation sign of the projected corners (0 for degenerate).
    orientation: f64,
    x_range: (usize, usize),
    y_range: (usize, usize),
}

/// Signed distance from a pixel center to a triangle boundary together with
/// the closest-edge data needed for its derivative.
#[derive(Clone, Copy)]
struct EdgeDistance {
    signed: f64,
    edge: usize,
    param: f64,
    /// Unit vector from the closest boundary point to the pixel.
    normal: Vector2<f64>,
}

impl ProjectedTriangle {
    fn signed_distance(&self, p: Vector2<f64>) -> EdgeDistance {
        let mut best = EdgeDistance {
            signed: f64::INFINITY,
            edge: 0,
            param: 0.0,
            normal: Vector2::zeros(),
        };
        let mut inside = self.orientation != 0.0;
        let mut best_sq = f64::INFINITY;
        for e in 0..3 {
            let a = self.corners[e];
            let b = self.corners[(e + 1) % 3];
            let ab = b - a;
            let ap = p - a;
            if cross(ab, ap) * self.orientation < 0.0 {
                inside = false;
            }
            let len_sq = ab.norm_squared();
            let s = if len_sq > 0.0 { (ap.dot(&ab) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
            let diff = ap - ab * s;
            let d_sq = diff.norm_squared();
            if d_sq < best_sq {
                best_sq = d_sq;
                best.edge = e;
                best.param = s;
                best.normal = diff;
            }
        }
        let dist = best_sq.sqrt();
        best.normal = if dist > 0.0 { best.normal / dist } else { Vector2::zeros() };
        best.signed = if inside { dist } else { -dist };
        best
    }
}

/// Projected triangles in front of the near plane, with their pixel
/// windows. Errors when no triangle survives.
fn project_triangles(
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    camera: &Camera,
    gamma: f64,
) -> Result<(Vec<Vector2<f64>>, Vec<ProjectedTriangle>)> {
    let in_front: Vec<bool> = vertices.iter().map(|v| v.z > camera.near_plane).collect();
    let projected: Vec<Vector2<f64>> = vertices
        .iter()
        .zip(&in_front)
        .map(|(v, &ok)| if ok { camera.project_unchecked(v) } else { Vector2::zeros() })
        .collect();
    let margin = CULL_SIGMAS * gamma;
    let mut out = Vec::with_capacity(triangles.len());
    let mut any_front = false;
    for t in triangles {
        if !t.iter().all(|&i| in_front[i]) {
            continue;
        }
        any_front = true;
        let corners = [projected[t[0]], projected[t[1]], projected[t[2]]];
        let area = cross(corners[1] - corners[0], corners[2] - corners[0]);
        let lo = corners[0].inf(&corners[1]).inf(&corners[2]) - Vector2::repeat(margin);
        let hi = corners[0].sup(&corners[1]).sup(&corners[2]) + Vector2::repeat(margin);
        // pixel centers sit at integer + 0.5
        let range = |lo: f64, hi: f64, n: usize| {
            let a = (lo - 0.5).ceil().max(0.0);
            let b = (hi - 0.5).floor().min(n as f64 - 1.0);
            if !(a <= b) {
                (1, 0)
            } else {
                (a as usize, b as usize)
            }
        };
        let x_range = range(lo.x, hi.x, camera.width);
        let y_range = range(lo.y, hi.y, camera.height);
        if x_range.0 > x_range.1 || y_range.0 > y_range.1 {
            continue;
        }
        out.push(ProjectedTriangle {
            corners,
            vertex_ids: *t,
            orientation: area.signum() * (area != 0.0) as i32 as f64,
            x_range,
            y_range,
        });
    }
    if !any_front {
        return Err(Error::ObjectBehindCamera);
    }
    Ok((projected, out))
}

/// Per-pixel product of `1 - σ(d/γ)` factors, with underflowed factors
/// counted separately so exclusion products stay exact.
struct CoverageAccumulator {
    product: Vec<f64>,
    zeros: Vec<u32>,
}

impl CoverageAccumulator {
    fn new(n: usize) -> Self {
        Self {
            product: vec![1.0; n],
            zeros: vec![0; n],
        }
    }

    fn coverage(&self, i: usize) -> f64 {
        if self.zeros[i] > 0 {
            1.0
        } else {
            1.0 - self.product[i]
        }
    }

    /// Product of all factors except one equal to `factor`.
    fn others(&self, i: usize, factor: f64) -> f64 {
        match (factor == 0.0, self.zeros[i]) {
            (true, 1) => self.product[i],
            (true, _) => 0.0,
            (false, 0) => self.product[i] / factor,
            (false, _) => 0.0,
        }
    }
}

fn accumulate(tris: &[ProjectedTriangle], camera: &Camera, gamma: f64) -> CoverageAccumulator {
    let mut acc = CoverageAccumulator::new(camera.pixel_count());
    for tri in tris {
        for y in tri.y_range.0..=tri.y_range.1 {
            for x in tri.x_range.0..=tri.x_range.1 {
                let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                let d = tri.signed_distance(p).signed;
                if d < -CULL_SIGMAS * gamma {
                    continue;
                }
                let f = one_minus_sigmoid(d / gamma);
                let i = y * camera.width + x;
                if f == 0.0 {
                    acc.zeros[i] += 1;
                } else {
                    acc.product[i] *= f;
                }
            }
        }
    }
    acc
}

/// Soft coverage `1 − ∏_T (1 − σ(d_T(p)/γ))` of a camera-frame mesh.
/// Triangles with a vertex at or behind the near plane are dropped.
pub fn render_silhouette_soft(mesh: &Mesh, camera: &Camera, cfg: &SoftRasterConfig) -> Result<SilhouetteImage> {
    render_vertices_soft(&mesh.vertices, &mesh.triangles, camera, cfg)
}

pub fn render_vertices_soft(
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    camera: &Camera,
    cfg: &SoftRasterConfig,
) -> Result<SilhouetteImage> {
    cfg.validate()?;
    let (_, tris) = project_triangles(vertices, triangles, camera, cfg.sharpness_gamma)?;
    let acc = accumulate(&tris, camera, cfg.sharpness_gamma);
    Ok(SilhouetteImage {
        width: camera.width,
        height: camera.height,
        values: (0..camera.pixel_count()).map(|i| acc.coverage(i)).collect(),
    })
}

/// Rendered silhouette, its masked reprojection loss and the loss gradient
/// with respect to every vertex.
#[derive(Debug, Clone)]
pub struct SilhouetteFit {
    pub rendered: SilhouetteImage,
    pub loss: f64,
    pub vertex_gradients: Vec<Vector3<f64>>,
}

/// Reprojection loss of the soft silhouette and its exact gradient with
/// respect to all camera-frame vertex coordinates.
pub fn silhouette_loss_and_gradient(
    vertices: &[Vector3<f64>],
    triangles: &[[usize; 3]],
    camera: &Camera,
    cfg: &SoftRasterConfig,
    target: &SilhouetteImage,
    mask: &ValidMask,
) -> Result<SilhouetteFit> {
    cfg.validate()?;
    let dims = (camera.width, camera.height);
    for actual in [target.dims(), (mask.width, mask.height)] {
        if actual != dims {
            return Err(Error::DimensionMismatch { expected: dims, actual });
        }
    }
    let gamma = cfg.sharpness_gamma;
    let (_, tris) = project_triangles(vertices, triangles, camera, gamma)?;
    let acc = accumulate(&tris, camera, gamma);
    let rendered = SilhouetteImage {
        width: camera.width,
        height: camera.height,
        values: (0..camera.pixel_count()).map(|i| acc.coverage(i)).collect(),
    };

    let valid = mask.count();
    let mut grads = vec![Vector3::zeros(); vertices.len()];
    if valid == 0 {
        return Ok(SilhouetteFit { rendered, loss: 0.0, vertex_gradients: grads });
    }
    let inv_n = 1.0 / valid as f64;
    let mut loss = 0.0;
    let mut d_loss = vec![0.0; camera.pixel_count()];
    for (i, ((&c, &t), &m)) in rendered.values.iter().zip(&target.values).zip(&mask.values).enumerate() {
        if m {
            let diff = c - t;
            loss += diff.abs();
            d_loss[i] = if diff > L1_DEAD_ZONE {
                inv_n
            } else if diff < -L1_DEAD_ZONE {
                -inv_n
            } else {
                0.0
            };
        }
    }
    loss *= inv_n;

    let mut grad_2d = vec![Vector2::zeros(); vertices.len()];
    for tri in &tris {
        for y in tri.y_range.0..=tri.y_range.1 {
            for x in tri.x_range.0..=tri.x_range.1 {
                let i = y * camera.width + x;
                // a saturated factor zeroes every other triangle's slope and its own
                if d_loss[i] == 0.0 || acc.zeros[i] > 0 {
                    continue;
                }
                let p = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
                let ed = tri.signed_distance(p);
                if ed.signed < -CULL_SIGMAS * gamma {
                    continue;
                }
                let f = one_minus_sigmoid(ed.signed / gamma);
                // dC/dd = ∏_{others} (1 − σ) · σ'(d/γ) / γ
                let dc_dd = acc.others(i, f) * f * (1.0 - f) / gamma;
                let g = d_loss[i] * dc_dd;
                if g == 0.0 {
                    continue;
                }
                let sign = if ed.signed >= 0.0 { 1.0 } else { -1.0 };
                // d|p − q|/d(edge endpoints) = −n (1 − s), −n s
                let a = tri.vertex_ids[ed.edge];
                let b = tri.vertex_ids[(ed.edge + 1) % 3];
                let k = -g * sign;
                grad_2d[a] += ed.normal * (k * (1.0 - ed.param));
                grad_2d[b] += ed.normal * (k * ed.param);
            }
        }
    }
    for ((g3, g2), v) in grads.iter_mut().zip(&grad_2d).zip(vertices) {
        if *g2 != Vector2::zeros() {
            *g3 = camera.projection_jacobian(v).transpose() * g2;
        }
    }
    Ok(SilhouetteFit { rendered, loss, vertex_gradients: grads })
}

/// Gradient of `loss_reproj(render_silhouette_soft(mesh), target, mask)`
/// with respect to every vertex coordinate.
pub fn silhouette_gradient(
    mesh: &Mesh,
    camera: &Camera,
    cfg: &SoftRasterConfig,
    target: &SilhouetteImage,
    mask: &ValidMask,
) -> Result<Vec<Vector3<f64>>> {
    silhouette_loss_and_gradient(&mesh.vertices, &mesh.triangles, camera, cfg, target, mask)
        .map(|fit| fit.vertex_gradients)
}

use nalgebra::{Matrix2x3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pinhole camera. The camera frame has +x right, +y down and +z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    #[serde(rename = "fx")]
    pub focal_x: f64,
    #[serde(rename = "fy")]
    pub focal_y: f64,
    #[serde(rename = "cx")]
    pub principal_x: f64,
    #[serde(rename = "cy")]
    pub principal_y: f64,
    pub width: usize,
    pub height: usize,
    #[serde(rename = "near")]
    pub near_plane: f64,
}

impl Camera {
    pub fn new(
        focal_x: f64,
        focal_y: f64,
        principal_x: f64,
        principal_y: f64,
        width: usize,
        height: usize,
        near_plane: f64,
    ) -> Result<Self> {
        let cam = Self {
            focal_x,
            focal_y,
            principal_x,
            principal_y,
            width,
            height,
            near_plane,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera with the principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self {
            focal_x: focal,
            focal_y: focal,
            principal_x: width as f64 / 2.0,
            principal_y: height as f64 / 2.0,
            width,
            height,
            near_plane: 0.1,
        }
    }

    /// 624×192 processing preset.
    pub fn preset_624x192() -> Self {
        Self::centered(362.0, 624, 192)
    }

    /// 512×256 processing preset.
    pub fn preset_512x256() -> Self {
        Self::centered(300.0, 512, 256)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.focal_x) || !ok(self.focal_y) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        if !ok(self.near_plane) {
            return Err(Error::InvalidCamera("near plane must be positive".into()));
        }
        if !self.principal_x.is_finite() || !self.principal_y.is_finite() {
            return Err(Error::InvalidCamera("principal point must be finite".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image must be non-empty".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Projects a single camera-frame point; no near-plane check.
    #[inline]
    pub fn project_unchecked(&self, p: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(
            self.focal_x * p.x / p.z + self.principal_x,
            self.focal_y * p.y / p.z + self.principal_y,
        )
    }

    /// Jacobian of [`Camera::project_unchecked`] with respect to the point.
    #[inline]
    pub fn projection_jacobian(&self, p: &Vector3<f64>) -> Matrix2x3<f64> {
        let iz = 1.0 / p.z;
        Matrix2x3::new(
            self.focal_x * iz,
            0.0,
            -self.focal_x * p.x * iz * iz,
            0.0,
            self.focal_y * iz,
            -self.focal_y * p.y * iz * iz,
        )
    }

    /// Un-normalized inverse-intrinsics direction `(K⁻¹ [x, y, 1])`.
    pub fn pixel_direction(&self, pixel: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.principal_x) / self.focal_x,
            (pixel.y - self.principal_y) / self.focal_y,
            1.0,
        )
    }

    /// Unit direction of the camera ray through `pixel`.
    pub fn ray_direction(&self, pixel: &Vector2<f64>) -> Result<Vector3<f64>> {
        let d = self.pixel_direction(pixel);
        let n = d.norm();
        if !n.is_finite() || d.z / n <= 0.0 {
            return Err(Error::RayNotForward { x: pixel.x, y: pixel.y });
        }
        Ok(d / n)
    }
}

/// Pinhole projection of camera-frame points to pixel coordinates.
pub fn project_points(points: &[Vector3<f64>], camera: &Camera) -> Result<Vec<Vector2<f64>>> {
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if !(p.z > camera.near_plane) {
                return Err(Error::BehindNearPlane {
                    index,
                    z: p.z,
                    near: camera.near_plane,
                });
            }
            Ok(camera.project_unchecked(p))
        })
        .collect()
}

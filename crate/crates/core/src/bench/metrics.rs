use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::Quaternion;
use crate::raster::SilhouetteImage;
use crate::{Error, Result};

/// The four per-object accuracy measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoMetrics {
    pub orientation_similarity: f64,
    pub distance_log_error: f64,
    pub scale_error: f64,
    pub reprojection_error: f64,
}

/// `(1 + cos θ) / 2` with θ the geodesic angle between the rotations.
pub fn orientation_similarity(pred: &Quaternion, truth: &Quaternion) -> f64 {
    (1.0 + pred.angle_to(truth).cos()) / 2.0
}

/// `|log t − log t̃|`.
pub fn distance_log_error(pred: f64, truth: f64) -> Result<f64> {
    if !(pred > 0.0) || !(truth > 0.0) {
        return Err(Error::InvalidArgument(format!("distances must be positive, got {pred} and {truth}")));
    }
    Ok((pred.ln() - truth.ln()).abs())
}

/// Euclidean distance between scale vectors.
pub fn scale_error(pred: &Vector3<f64>, truth: &Vector3<f64>) -> f64 {
    (pred - truth).norm()
}

/// Mean per-pixel absolute disagreement; the XOR rate for binary masks.
pub fn reprojection_error_metric(pred: &SilhouetteImage, truth: &SilhouetteImage) -> Result<f64> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimensionMismatch {
            expected: truth.dims(),
            actual: pred.dims(),
        });
    }
    let n = pred.values.len();
    if n == 0 {
        return Ok(0.0);
    }
    let sum: f64 = pred.values.iter().zip(&truth.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geom::YawAngle;

    #[test]
    fn orientation_examples() {
        let a = YawAngle::new(0.3).to_quaternion();
        assert!((orientation_similarity(&a, &a) - 1.0).abs() < 1e-12);
        let b = YawAngle::new(0.3 + PI).to_quaternion();
        assert!(orientation_similarity(&a, &b).abs() < 1e-12);
        let c = YawAngle::new(0.3 + PI / 2.0).to_quaternion();
        assert!((orientation_similarity(&a, &c) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn orientation_symmetry_and_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut q = || {
                Quaternion::new_normalized(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .unwrap()
            };
            let (a, b) = (q(), q());
            let s = orientation_similarity(&a, &b);
            assert!((0.0..=1.0).contains(&s));
            assert!((s - orientation_similarity(&b, &a)).abs() < 1e-12);
            assert!((s - orientation_similarity(&a.neg(), &b)).abs() < 1e-12);
            assert!((s - orientation_similarity(&a, &b.neg())).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance_log_error(10.0, 10.0).unwrap(), 0.0);
        assert!((distance_log_error(std::f64::consts::E * 3.0, 3.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((distance_log_error(12.0, 10.0).unwrap() - 0.1823215567939546).abs() < 1e-12);
        assert!(distance_log_error(0.0, 1.0).is_err());
        assert!(distance_log_error(1.0, -2.0).is_err());
    }

    #[test]
    fn scale_examples() {
        let s = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(scale_error(&s, &s), 0.0);
        assert!((scale_error(&(s + Vector3::new(0.3, 0.0, 0.4)), &s) - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..5.0));
            let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..5.0));
            let mut sq = 0.0;
            for k in 0..3 {
                sq += (a[k] - b[k]) * (a[k] - b[k]);
            }
            assert!((scale_error(&a.into(), &b.into()) - sq.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn reprojection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mask: Vec<f64> = (0..40 * 50).map(|_| rng.random_range(0..2) as f64).collect();
        let a = SilhouetteImage::from_values(40, 50, mask).unwrap();
        assert_eq!(reprojection_error_metric(&a, &a).unwrap(), 0.0);
        let inv = SilhouetteImage::from_values(40, 50, a.values.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert_eq!(reprojection_error_metric(&inv, &a).unwrap(), 1.0);
        // flip exactly 100 of 2000 pixels
        let mut flipped = a.clone();
        for v in flipped.values.iter_mut().step_by(20) {
            *v = 1.0 - *v;
        }
        assert_eq!(reprojection_error_metric(&flipped, &a).unwrap(), 0.05);
        let small = SilhouetteImage::zeros(10, 10);
        assert!(reprojection_error_metric(&small, &a).is_err());
    }
}

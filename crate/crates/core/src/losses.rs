//! Attribute prediction loss, masked reprojection loss and their weighted
//! combination.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geom::{Quaternion, ReparamCode};
use crate::raster::SilhouetteImage;
use crate::{Error, Result};

/// Default weight of the reprojection term.
pub const DEFAULT_LAMBDA_REPROJ: f64 = 0.1;

/// Per-pixel supervision mask; `true` where the silhouette is compared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<bool>,
}

impl ValidMask {
    pub fn all(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }
}

/// Rotation as either a yaw-constrained angle or a free quaternion. Both
/// enter the loss as quaternions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RotationCode {
    Yaw(f64),
    Quaternion(Quaternion),
}

impl RotationCode {
    pub fn to_quaternion(self) -> Quaternion {
        match self {
            Self::Yaw(theta) => crate::geom::YawAngle::new(theta).to_quaternion(),
            Self::Quaternion(q) => q,
        }
    }
}

/// One object's scale, rotation and translation code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attributes {
    pub scale: Vector3<f64>,
    pub rotation: RotationCode,
    pub code: ReparamCode,
}

/// Predicted and reference attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttributePair {
    pub predicted: Attributes,
    pub target: Attributes,
}

/// `‖log s̃ − log s‖² + (1 − (q̃·q)²) + ‖ẽ − e‖² + (log τ̃ − log τ)²`.
pub fn loss_pred(pair: &AttributePair) -> Result<f64> {
    let (p, t) = (&pair.predicted, &pair.target);
    for s in [&p.scale, &t.scale] {
        if s.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::InvalidArgument("scale components must be positive".into()));
        }
    }
    let (qp, qt) = (p.rotation.to_quaternion(), t.rotation.to_quaternion());
    if !qp.is_unit() || !qt.is_unit() {
        return Err(Error::NonUnitQuaternion {
            norm: if qp.is_unit() { qt.norm() } else { qp.norm() },
        });
    }
    let scale_term = p.scale.map(f64::ln) - t.scale.map(f64::ln);
    let dot = qp.dot(&qt);
    let rotation_term = (1.0 - dot * dot).max(0.0);
    let offset_term = p.code.offset_e - t.code.offset_e;
    let tau_term = p.code.log_tau - t.code.log_tau;
    Ok(scale_term.norm_squared() + rotation_term + offset_term.norm_squared() + tau_term * tau_term)
}

fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

/// Mean absolute silhouette difference over the mask's valid pixels; zero
/// when no pixel is valid.
pub fn loss_reproj(rendered: &SilhouetteImage, target: &SilhouetteImage, mask: &ValidMask) -> Result<f64> {
    check_dims(rendered.dims(), target.dims())?;
    check_dims(rendered.dims(), (mask.width, mask.height))?;
    let (mut sum, mut count) = (0.0, 0usize);
    for ((r, t), &m) in rendered.values.iter().zip(&target.values).zip(&mask.values) {
        if m {
            sum += (r - t).abs();
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// `loss_pred + λ · loss_reproj`.
pub fn loss_total(
    pair: &AttributePair,
    rendered: &SilhouetteImage,
    target: &SilhouetteImage,
    mask: &ValidMask,
    lambda_reproj: f64,
) -> Result<f64> {
    if !(lambda_reproj >= 0.0) {
        return Err(Error::InvalidArgument("reprojection weight must be non-negative".into()));
    }
    Ok(loss_pred(pair)? + lambda_reproj * loss_reproj(rendered, target, mask)?)
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector2;
    use proptest::prelude::*;

    use super::*;

    fn attrs(scale: [f64; 3], rotation: RotationCode, e: [f64; 2], log_tau: f64) -> Attributes {
        Attributes {
            scale: Vector3::from(scale),
            rotation,
            code: ReparamCode {
                offset_e: Vector2::from(e),
                log_tau,
            },
        }
    }

    fn image(w: usize, h: usize, f: impl Fn(usize) -> f64) -> SilhouetteImage {
        SilhouetteImage::from_values(w, h, (0..w * h).map(f).collect()).unwrap()
    }

    #[test]
    fn pred_examples() {
        let a = attrs([1.5, 1.2, 4.0], RotationCode::Yaw(0.7), [0.1, -0.2], 4.0);
        assert_eq!(loss_pred(&AttributePair { predicted: a, target: a }).unwrap(), 0.0);

        let q = Quaternion::new_normalized(0.3, -0.2, 0.9, 0.1).unwrap();
        let mut flipped = a;
        flipped.rotation = RotationCode::Quaternion(q.neg());
        let mut orig = a;
        orig.rotation = RotationCode::Quaternion(q);
        let l = loss_pred(&AttributePair { predicted: flipped, target: orig }).unwrap();
        assert!(l.abs() < 1e-15);

        let p = attrs([2.0, 1.0, 1.0], RotationCode::Yaw(0.0), [0.0, 0.0], 1.0);
        let t = attrs([1.0, 1.0, 1.0], RotationCode::Yaw(0.0), [0.0, 0.0], 1.0);
        let l = loss_pred(&AttributePair { predicted: p, target: t }).unwrap();
        let expected = 2f64.ln().powi(2);
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.4805).abs() < 1e-4);
    }

    #[test]
    fn pred_rejects_bad_scale() {
        let a = attrs([1.0, 0.0, 1.0], RotationCode::Yaw(0.0), [0.0, 0.0], 1.0);
        let b = attrs([1.0, 1.0, 1.0], RotationCode::Yaw(0.0), [0.0, 0.0], 1.0);
        assert!(loss_pred(&AttributePair { predicted: a, target: b }).is_err());
    }

    #[test]
    fn reproj_examples() {
        let ones = image(8, 4, |_| 1.0);
        let zeros = image(8, 4, |_| 0.0);
        let full = ValidMask::all(8, 4, true);
        assert_eq!(loss_reproj(&ones, &ones, &full).unwrap(), 0.0);
        assert_eq!(loss_reproj(&ones, &zeros, &full).unwrap(), 1.0);
        assert_eq!(loss_reproj(&ones, &zeros, &ValidMask::all(8, 4, false)).unwrap(), 0.0);

        // left half supervised; disagreement on every third pixel
        let r = image(8, 4, |i| if i % 3 == 0 { 0.75 } else { 0.25 });
        let t = image(8, 4, |_| 0.25);
        let mask = ValidMask {
            width: 8,
            height: 4,
            values: (0..32).map(|i| i % 8 < 4).collect(),
        };
        let (mut sum, mut n) = (0.0, 0);
        for y in 0..4 {
            for x in 0..4 {
                let i = y * 8 + x;
                sum += (r.values[i] - t.values[i]).abs();
                n += 1;
            }
        }
        assert!((loss_reproj(&r, &t, &mask).unwrap() - sum / n as f64).abs() < 1e-15);
        assert!(loss_reproj(&r, &image(4, 8, |_| 0.0), &mask).is_err());
    }

    #[test]
    fn total_examples() {
        let a = attrs([1.0, 1.0, 1.0], RotationCode::Yaw(0.0), [0.0, 0.0], 1.0);
        let pair = AttributePair { predicted: a, target: a };
        let z = image(2, 2, |_| 0.0);
        let o = image(2, 2, |_| 1.0);
        let m = ValidMask::all(2, 2, true);
        assert_eq!(loss_total(&pair, &z, &z, &m, 0.1).unwrap(), 0.0);
        let mut b = a;
        b.code.log_tau = 1.0 + 0.5f64.sqrt();
        let pair = AttributePair { predicted: b, target: a };
        let total = loss_total(&pair, &o, &z, &m, 0.1).unwrap();
        assert!((total - 0.6).abs() < 1e-12);
        assert!(loss_total(&pair, &o, &z, &m, -0.1).is_err());
    }

    proptest! {
        #[test]
        fn reproj_symmetric_and_bounded(vals in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>()), 12)) {
            let a = image(4, 3, |i| vals[i].0);
            let b = image(4, 3, |i| vals[i].1);
            let m = ValidMask { width: 4, height: 3, values: vals.iter().map(|v| v.2).collect() };
            let ab = loss_reproj(&a, &b, &m).unwrap();
            prop_assert_eq!(ab, loss_reproj(&b, &a, &m).unwrap());
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn total_is_affine_in_reproj(lambda in 0.0f64..2.0, log_tau in -1.0f64..1.0) {
            let a = attrs([1.0, 2.0, 3.0], RotationCode::Yaw(0.3), [0.0, 0.1], 0.0);
            let mut b = a;
            b.code.log_tau = log_tau;
            let pair = AttributePair { predicted: b, target: a };
            let m = ValidMask::all(2, 1, true);
            let zero = image(2, 1, |_| 0.0);
            let half = image(2, 1, |i| i as f64);
            let l0 = loss_total(&pair, &zero, &zero, &m, lambda).unwrap();
            let l1 = loss_total(&pair, &half, &zero, &m, lambda).unwrap();
            prop_assert!((l0 - loss_pred(&pair).unwrap()).abs() < 1e-15);
            prop_assert!((l1 - l0 - lambda * 0.5).abs() < 1e-12);
        }
    }
}

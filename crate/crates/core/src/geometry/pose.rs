use core::f64::consts::PI;

use nalgebra::{Quaternion, Rotation3, Unit, UnitQuaternion};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{Vec2, Vec3};
use crate::{Error, Result};

/// Maximum deviation from unit norm accepted when a quaternion enters the
/// library from outside (files, planner replies, callers).
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// Rigid transform in SE(3): position in meters, unit quaternion (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose6D {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl TryFrom<PoseRepr> for Pose6D {
    type Error = Error;
    fn try_from(r: PoseRepr) -> Result<Self> {
        Pose6D::new(Vec3::from(r.position), r.orientation)
    }
}

impl From<Pose6D> for PoseRepr {
    fn from(p: Pose6D) -> Self {
        PoseRepr {
            position: p.position.into(),
            orientation: p.wxyz(),
        }
    }
}

impl Pose6D {
    /// Builds a pose from a position and a (w, x, y, z) quaternion, which must
    /// be unit-norm within [`UNIT_NORM_TOL`]; it is renormalized exactly.
    pub fn new(position: Vec3, wxyz: [f64; 4]) -> Result<Self> {
        if !position.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("pose position must be finite"));
        }
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        check_unit(&q)?;
        Ok(Self {
            position,
            orientation: UnitQuaternion::new_normalize(q),
        })
    }

    pub fn from_parts(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn identity() -> Self {
        Self::from_parts(Vec3::zeros(), UnitQuaternion::identity())
    }

    /// Flat pose with heading `yaw` (radians) about world z.
    pub fn from_xyz_yaw(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self::from_parts(Vec3::new(x, y, z), yaw_quat(yaw))
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        self.orientation.to_rotation_matrix()
    }

    pub fn transform_point(&self, local: &Vec3) -> Vec3 {
        self.orientation * local + self.position
    }

    pub fn inverse_transform_point(&self, world: &Vec3) -> Vec3 {
        self.orientation.inverse() * (world - self.position)
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.position.x, self.position.y)
    }

    /// Heading about world z, well defined for any face-down orientation.
    pub fn yaw(&self) -> f64 {
        let r = self.rotation();
        let m = r.matrix();
        if m[(2, 0)].abs() < 0.5 {
            m[(1, 0)].atan2(m[(0, 0)])
        } else {
            (-m[(0, 1)]).atan2(m[(1, 1)])
        }
    }

    pub fn planar(&self) -> PoseSE2 {
        PoseSE2::new(self.position.x, self.position.y, self.yaw())
    }

    /// Applies a world-frame rotation about world z through the position.
    pub fn rotated_about_z(&self, dyaw: f64) -> Self {
        Self::from_parts(self.position, yaw_quat(dyaw) * self.orientation)
    }

    /// Rotates the whole pose rigidly about a world axis through `pivot`.
    pub fn rotated_about_axis(&self, pivot: &Vec3, axis: &Unit<Vec3>, angle: f64) -> Self {
        let rot = UnitQuaternion::from_axis_angle(axis, angle);
        Self::from_parts(rot * (self.position - pivot) + pivot, rot * self.orientation)
    }
}

/// Planar pose: (x, y) in meters, yaw wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseSE2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PoseSE2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }
}

/// Wraps an angle in radians to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

pub fn yaw_quat(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)
}

pub fn quat_wxyz(w: f64, x: f64, y: f64, z: f64) -> Quaternion<f64> {
    Quaternion::new(w, x, y, z)
}

fn check_unit(q: &Quaternion<f64>) -> Result<()> {
    let n = q.norm();
    if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(alloc::format!(
            "quaternion norm {n} deviates from 1 by more than {UNIT_NORM_TOL}"
        )));
    }
    Ok(())
}

/// Geodesic angle between two rotations, in degrees within [0, 180].
///
/// Computed as `2 acos(|<a, b>|)`, so it is symmetric and insensitive to the
/// sign of either quaternion.
pub fn geodesic_angle(a: &Quaternion<f64>, b: &Quaternion<f64>) -> Result<f64> {
    check_unit(a)?;
    check_unit(b)?;
    let a = a.normalize();
    let b = b.normalize();
    let dot = a.coords.dot(&b.coords).abs().min(1.0);
    Ok((2.0 * dot.acos()).to_degrees())
}

/// Geodesic angle for already-normalized orientations.
pub fn orientation_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // atan2 form stays accurate near zero where acos of the dot product does not
    let q = a.inverse() * b;
    (2.0 * q.imag().norm().atan2(q.w.abs())).to_degrees()
}

/// Signed yaw (radians) of the best-fit world-z rotation taking `current` to `target`.
pub fn signed_yaw_error(current: &Pose6D, target: &Pose6D) -> f64 {
    let delta = target.rotation() * current.rotation().transpose();
    let m = delta.matrix();
    (m[(1, 0)] - m[(0, 1)]).atan2(m[(0, 0)] + m[(1, 1)])
}

/// Planar alignment error: (distance in meters, absolute yaw error in degrees).
pub fn se2_error(current: &Pose6D, target: &Pose6D) -> (f64, f64) {
    let d = (current.xy() - target.xy()).norm();
    (d, signed_yaw_error(current, target).abs().to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q_from(v: [f64; 4]) -> Quaternion<f64> {
        Quaternion::new(v[0], v[1], v[2], v[3]).normalize()
    }

    #[test]
    fn geodesic_identity_and_quarter_turn() {
        let id = Quaternion::identity();
        assert_eq!(geodesic_angle(&id, &id).unwrap(), 0.0);
        let z90 = *yaw_quat(PI / 2.0).quaternion();
        assert!((geodesic_angle(&id, &z90).unwrap() - 90.0).abs() < 1e-9);
    }

    #[test]
    fn geodesic_rejects_non_unit() {
        let bad = Quaternion::new(1.0, 0.1, 0.0, 0.0);
        assert!(matches!(
            geodesic_angle(&bad, &Quaternion::identity()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn se2_error_examples() {
        let a = Pose6D::from_xyz_yaw(0.0, 0.0, 0.0, 0.0);
        assert_eq!(se2_error(&a, &a), (0.0, 0.0));
        let b = Pose6D::from_xyz_yaw(0.03, 0.0, 0.0, 0.0);
        let (d, y) = se2_error(&a, &b);
        assert!((d - 0.03).abs() < 1e-12 && y.abs() < 1e-9);
    }

    #[test]
    fn se2_yaw_wraps_across_zero() {
        // enumerate +-360 shifts: min |10 - 350 + 360k| = 20
        let oracle = [-720.0f64, -360.0, 0.0, 360.0, 720.0]
            .iter()
            .map(|k| (10.0 - 350.0 + k).abs())
            .fold(f64::INFINITY, f64::min);
        let a = Pose6D::from_xyz_yaw(0.0, 0.0, 0.0, 10f64.to_radians());
        let b = Pose6D::from_xyz_yaw(0.0, 0.0, 0.0, 350f64.to_radians());
        assert!((se2_error(&a, &b).1 - oracle).abs() < 1e-9);
    }

    #[test]
    fn yaw_of_standing_box() {
        let standing = UnitQuaternion::from_axis_angle(&Vec3::y_axis(), PI / 2.0);
        let p = Pose6D::from_parts(Vec3::zeros(), yaw_quat(0.7) * standing);
        assert!((p.yaw() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn geodesic_symmetric_and_sign_invariant(
            a in prop::array::uniform4(-1.0f64..1.0),
            b in prop::array::uniform4(-1.0f64..1.0),
        ) {
            prop_assume!(a.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            prop_assume!(b.iter().map(|x| x * x).sum::<f64>() > 1e-3);
            let qa = q_from(a);
            let qb = q_from(b);
            let ab = geodesic_angle(&qa, &qb).unwrap();
            let ba = geodesic_angle(&qb, &qa).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((geodesic_angle(&qa, &(-qb)).unwrap() - ab).abs() < 1e-9);
            prop_assert!(geodesic_angle(&qa, &(-qa)).unwrap() < 1e-5);
            prop_assert!((0.0..=180.0).contains(&ab));
        }
    }
}

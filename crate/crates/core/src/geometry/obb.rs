use alloc::vec::Vec;

use nalgebra::Unit;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{convex_hull, Polygon2, Pose6D, Vec2, Vec3};
use crate::{Error, Result};

/// Oriented bounding box: pose of the center plus strictly positive half extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObbRepr", into = "ObbRepr")]
pub struct Obb {
    pub center_pose: Pose6D,
    pub half_extents: Vec3,
}

#[derive(Serialize, Deserialize)]
struct ObbRepr {
    center_pose: Pose6D,
    half_extents: [f64; 3],
}

impl TryFrom<ObbRepr> for Obb {
    type Error = Error;
    fn try_from(r: ObbRepr) -> Result<Self> {
        Obb::new(r.center_pose, Vec3::from(r.half_extents))
    }
}

impl From<Obb> for ObbRepr {
    fn from(o: Obb) -> Self {
        ObbRepr {
            center_pose: o.center_pose,
            half_extents: o.half_extents.into(),
        }
    }
}

/// One face of a box: the body axis (0, 1, 2) and the sign of its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub positive: bool,
}

impl Face {
    pub fn normal_local(&self) -> Vec3 {
        let mut n = Vec3::zeros();
        n[self.axis] = if self.positive { 1.0 } else { -1.0 };
        n
    }
}

impl Obb {
    pub fn new(center_pose: Pose6D, half_extents: Vec3) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::invalid("half extents must be strictly positive"));
        }
        Ok(Self { center_pose, half_extents })
    }

    pub fn with_pose(&self, pose: Pose6D) -> Self {
        Self { center_pose: pose, ..*self }
    }

    /// The 8 corners in world frame; corner `i` has local sign bits (x, y, z) = bits 0, 1, 2.
    pub fn corners(&self) -> [Vec3; 8] {
        let h = self.half_extents;
        core::array::from_fn(|i| {
            let local = Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            );
            self.center_pose.transform_point(&local)
        })
    }

    pub fn bottom_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::INFINITY, f64::min)
    }

    pub fn top_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Projection of the box onto the table plane.
    pub fn footprint(&self) -> Polygon2 {
        let pts: Vec<Vec2> = self.corners().iter().map(|c| Vec2::new(c.x, c.y)).collect();
        // a box always projects to a polygon with positive area
        Polygon2::new(convex_hull(&pts)).expect("box footprint is a valid polygon")
    }

    /// The face whose outward normal points most nearly along world -z.
    pub fn bottom_face(&self) -> Face {
        let down = self.center_pose.orientation.inverse() * -Vec3::z();
        let mut best = Face { axis: 0, positive: true };
        let mut best_dot = f64::NEG_INFINITY;
        for axis in 0..3 {
            for positive in [true, false] {
                let f = Face { axis, positive };
                let d = f.normal_local().dot(&down);
                if d > best_dot + 1e-12 {
                    best_dot = d;
                    best = f;
                }
            }
        }
        best
    }

    /// Cosine between the bottom face normal and world -z.
    pub fn face_down_alignment(&self) -> f64 {
        let f = self.bottom_face();
        (self.center_pose.orientation * f.normal_local()).dot(&-Vec3::z())
    }

    /// Half of the vertical extent when resting on the bottom face.
    pub fn resting_half_height(&self) -> f64 {
        self.half_extents[self.bottom_face().axis]
    }

    /// The four bottom corners (face-down boxes) in CCW order seen from above.
    pub fn bottom_corners(&self) -> [Vec3; 4] {
        let f = self.bottom_face();
        let mut pts: Vec<Vec3> = self
            .corners()
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i >> f.axis) & 1 == 1) == f.positive)
            .map(|(_, c)| *c)
            .collect();
        let c = self.center_pose.position;
        pts.sort_by(|a, b| {
            let ta = (a.y - c.y).atan2(a.x - c.x);
            let tb = (b.y - c.y).atan2(b.x - c.x);
            ta.total_cmp(&tb)
        });
        [pts[0], pts[1], pts[2], pts[3]]
    }

    /// Bottom edges as corner pairs, CCW.
    pub fn bottom_edges(&self) -> [(Vec3, Vec3); 4] {
        let b = self.bottom_corners();
        core::array::from_fn(|i| (b[i], b[(i + 1) % 4]))
    }

    /// Unsigned distance from a world point to the box surface.
    pub fn surface_distance(&self, world: &Vec3) -> f64 {
        let p = self.center_pose.inverse_transform_point(world);
        let h = self.half_extents;
        let q = Vec3::new(p.x.abs() - h.x, p.y.abs() - h.y, p.z.abs() - h.z);
        let outside = Vec3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
        let inside = q.x.max(q.y).max(q.z).min(0.0);
        (outside + inside).abs()
    }

    /// Pose after pivoting 90 degrees about bottom edge `edge` so the adjacent face lands.
    pub fn flipped_about(&self, edge: &(Vec3, Vec3)) -> Pose6D {
        let (axis, pivot) = lifting_axis(self, edge);
        self.center_pose
            .rotated_about_axis(&pivot, &axis, core::f64::consts::FRAC_PI_2)
    }
}

/// Axis along a bottom edge oriented so a positive rotation lifts the box
/// off its support (the center moves toward and over the edge).
pub fn lifting_axis(obb: &Obb, edge: &(Vec3, Vec3)) -> (Unit<Vec3>, Vec3) {
    let (a, b) = *edge;
    let c = obb.center_pose.position;
    let mid = (a + b) * 0.5;
    let mut outward = Vec3::new(mid.x - c.x, mid.y - c.y, 0.0);
    if outward.norm() < 1e-12 {
        outward = Vec3::x();
    }
    let mut u = b - a;
    // (outward x u) . z > 0 lifts the interior
    if outward.cross(&u).z < 0.0 {
        u = -u;
    }
    (Unit::new_normalize(u), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::orientation_angle;
    use core::f64::consts::FRAC_PI_2;

    fn plank() -> Obb {
        Obb::new(
            Pose6D::from_xyz_yaw(0.0, 0.0, 0.01, 0.0),
            Vec3::new(0.10, 0.05, 0.01),
        )
        .unwrap()
    }

    #[test]
    fn corners_recover_extents() {
        let o = plank();
        let c = o.corners();
        assert!((c[7] - c[0] - Vec3::new(0.2, 0.1, 0.02)).norm() < 1e-15);
        assert!((o.bottom_z() - 0.0).abs() < 1e-15);
        assert!((o.footprint().area() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_extents() {
        assert!(Obb::new(Pose6D::identity(), Vec3::new(0.1, 0.0, 0.1)).is_err());
    }

    #[test]
    fn flip_about_long_edge_stands_plank() {
        let o = plank();
        let edge = o
            .bottom_edges()
            .into_iter()
            .find(|(a, b)| ((a - b).norm() - 0.2).abs() < 1e-12 && a.y > 0.0)
            .unwrap();
        let flipped = o.with_pose(o.flipped_about(&edge));
        // standing on a 20 x 2 cm face: vertical extent 10 cm
        assert!((flipped.top_z() - flipped.bottom_z() - 0.10).abs() < 1e-12);
        assert!(flipped.bottom_z().abs() < 1e-12);
        assert!((flipped.face_down_alignment() - 1.0).abs() < 1e-12);
        assert!((flipped.footprint().area() - 0.2 * 0.02).abs() < 1e-12);
        let expected = nalgebra::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), -FRAC_PI_2);
        assert!(orientation_angle(&flipped.center_pose.orientation, &expected) < 1e-9);
    }

    #[test]
    fn surface_distance_cases() {
        let o = plank();
        assert!(o.surface_distance(&Vec3::new(0.10, 0.0, 0.01)) < 1e-15);
        assert!((o.surface_distance(&Vec3::new(0.13, 0.0, 0.01)) - 0.03).abs() < 1e-12);
        assert!((o.surface_distance(&Vec3::new(0.0, 0.0, 0.01)) - 0.01).abs() < 1e-12);
    }
}

//! SE(2)/SE(3) poses, boxes, polygons, and sampling helpers shared by all modules.

mod obb;
mod polygon;
mod pose;
mod sampling;

pub use obb::{lifting_axis, Face, Obb};
pub use polygon::{
    clip_convex, closest_on_segment, convex_hull, cross, hull_contains, nearest_hull_edge,
    overlap_area, overlap_pieces, point_in_polygon, polygons_intersect, Polygon2, BOUNDARY_TOL,
};
pub use pose::{
    geodesic_angle, orientation_angle, quat_wxyz, se2_error, signed_yaw_error, wrap_angle,
    yaw_quat, Pose6D, PoseSE2, UNIT_NORM_TOL,
};
pub use sampling::{contact_normals, farthest_point_sample, moment_arm};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

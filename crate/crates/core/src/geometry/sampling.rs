use alloc::vec::Vec;


use super::{cross, Polygon2, Vec2};
use crate::{Error, Result};

const ON_BOUNDARY_TOL: f64 = 1e-6;

/// Greedy farthest point sampling.
///
/// The first index is `start`; each next index maximizes its minimum distance
/// to the points already chosen, ties going to the lowest index.
pub fn farthest_point_sample(points: &[Vec2], k: usize, start: usize) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::invalid("farthest point sampling needs points"));
    }
    if k > points.len() {
        return Err(Error::invalid(alloc::format!(
            "requested {k} samples from {} points",
            points.len()
        )));
    }
    if start >= points.len() {
        return Err(Error::invalid("start index out of range"));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut chosen = Vec::with_capacity(k);
    chosen.push(start);
    let mut min_d: Vec<f64> = points.iter().map(|p| (p - points[start]).norm()).collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d) in min_d.iter().enumerate() {
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        chosen.push(best);
        for (i, d) in min_d.iter_mut().enumerate() {
            *d = d.min((points[i] - points[best]).norm());
        }
    }
    Ok(chosen)
}

fn inward_normal(a: &Vec2, b: &Vec2) -> Vec2 {
    let e = b - a;
    Vec2::new(-e.y, e.x) / e.norm()
}

/// Inward unit normals of the footprint at boundary samples. Samples at a
/// vertex get the bisector of the two adjacent edge normals.
pub fn contact_normals(footprint: &Polygon2, samples: &[Vec2]) -> Result<Vec<Vec2>> {
    let vs = footprint.vertices();
    let n = vs.len();
    samples
        .iter()
        .map(|s| {
            if let Some(i) = vs.iter().position(|v| (v - s).norm() < ON_BOUNDARY_TOL) {
                let prev = inward_normal(&vs[(i + n - 1) % n], &vs[i]);
                let next = inward_normal(&vs[i], &vs[(i + 1) % n]);
                let b = prev + next;
                return Ok(if b.norm() > 1e-12 { b / b.norm() } else { next });
            }
            let (d, edge) = (0..n)
                .map(|i| {
                    let (a, b) = (vs[i], vs[(i + 1) % n]);
                    (super::closest_on_segment(s, &a, &b).0, i)
                })
                .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc });
            if d >= ON_BOUNDARY_TOL {
                return Err(Error::invalid(alloc::format!(
                    "sample ({}, {}) is {d} m off the footprint boundary",
                    s.x,
                    s.y
                )));
            }
            Ok(inward_normal(&vs[edge], &vs[(edge + 1) % n]))
        })
        .collect()
}

/// Signed planar moment arm of a push at `contact` along `direction` about `com`.
pub fn moment_arm(contact: &Vec2, direction: &Vec2, com: &Vec2) -> f64 {
    cross(&(contact - com), direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn unit_square_boundary() -> Vec<Vec2> {
        Polygon2::rect(0.0, 0.0, 1.0, 1.0).unwrap().boundary_samples(0.01)
    }

    /// min pairwise distance of a point set
    fn spread(pts: &[Vec2]) -> f64 {
        let mut m = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                m = m.min((pts[i] - pts[j]).norm());
            }
        }
        m
    }

    #[test]
    fn fps_square_corners() {
        let pts = unit_square_boundary();
        assert_eq!(pts[0], Vec2::zeros());
        let idx = farthest_point_sample(&pts, 4, 0).unwrap();
        let mut got: Vec<(i64, i64)> = idx
            .iter()
            .map(|&i| ((pts[i].x * 100.0).round() as i64, (pts[i].y * 100.0).round() as i64))
            .collect();
        got.sort();
        assert_eq!(got, vec![(0, 0), (0, 100), (100, 0), (100, 100)]);
        // exhaustive check over 4-subsets containing the start on a coarser
        // 10 cm grid: no subset has a larger minimum pairwise distance
        let coarse = Polygon2::rect(0.0, 0.0, 1.0, 1.0).unwrap().boundary_samples(0.1);
        let corners: Vec<Vec2> = idx.iter().map(|&i| pts[i]).collect();
        let best = spread(&corners);
        let n = coarse.len();
        for a in 1..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let s = spread(&[coarse[0], coarse[a], coarse[b], coarse[c]]);
                    assert!(s <= best + 1e-12);
                }
            }
        }
    }

    #[test]
    fn fps_single_and_collinear() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.0), Vec2::new(1.0, 0.0)];
        assert_eq!(farthest_point_sample(&pts, 1, 1).unwrap(), vec![1]);
        assert_eq!(farthest_point_sample(&pts, 2, 0).unwrap(), vec![0, 2]);
        assert!(farthest_point_sample(&pts, 4, 0).is_err());
    }

    #[test]
    fn fps_ties_take_lowest_index() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)];
        assert_eq!(farthest_point_sample(&pts, 2, 0).unwrap(), vec![0, 1]);
    }

    #[test]
    fn fps_permutation_stable_set() {
        let pts = unit_square_boundary();
        let base: Vec<usize> = farthest_point_sample(&pts, 6, 17).unwrap();
        let mut base_pts: Vec<(i64, i64)> = base
            .iter()
            .map(|&i| ((pts[i].x * 1e6) as i64, (pts[i].y * 1e6) as i64))
            .collect();
        base_pts.sort();
        let mut perm = pts.clone();
        perm.reverse();
        let start = perm.len() - 1 - 17;
        let idx = farthest_point_sample(&perm, 6, start).unwrap();
        let mut got: Vec<(i64, i64)> = idx
            .iter()
            .map(|&i| ((perm[i].x * 1e6) as i64, (perm[i].y * 1e6) as i64))
            .collect();
        got.sort();
        assert_eq!(got, base_pts);
    }

    #[test]
    fn normals_on_square() {
        let sq = Polygon2::rect(-1.0, -1.0, 1.0, 1.0).unwrap();
        let n = contact_normals(&sq, &[Vec2::new(1.0, 0.3), Vec2::new(1.0, 1.0)]).unwrap();
        assert!((n[0] - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        assert!((n[1] - Vec2::new(-s, -s)).norm() < 1e-12);
        assert!(contact_normals(&sq, &[Vec2::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn normals_on_hexagon_midpoints() {
        let vs: Vec<Vec2> = (0..6)
            .map(|i| {
                let t = i as f64 * PI / 3.0;
                Vec2::new(t.cos(), t.sin())
            })
            .collect();
        let hex = Polygon2::new(vs.clone()).unwrap();
        for i in 0..6 {
            let (a, b) = (vs[i], vs[(i + 1) % 6]);
            let mid = (a + b) * 0.5;
            let n = contact_normals(&hex, &[mid]).unwrap()[0];
            // the analytic inward normal of a regular hexagon edge points at the center
            let expected = -mid / mid.norm();
            assert!((n - expected).norm() < 1e-12);
            assert!(n.dot(&(b - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn normals_point_inward_and_unit() {
        let sq = Polygon2::rect(0.0, 0.0, 0.1, 0.06).unwrap();
        let samples = sq.boundary_samples(0.005);
        let c = sq.centroid();
        for (s, n) in samples.iter().zip(contact_normals(&sq, &samples).unwrap()) {
            assert!((n.norm() - 1.0).abs() < 1e-9);
            assert!(n.dot(&(c - s)) > 0.0);
        }
    }

    #[test]
    fn moment_arm_signs() {
        let com = Vec2::zeros();
        assert_eq!(moment_arm(&Vec2::new(-0.05, 0.0), &Vec2::x(), &com), 0.0);
        assert!((moment_arm(&Vec2::new(-0.05, 0.05), &Vec2::x(), &com) + 0.05).abs() < 1e-15);
    }
}

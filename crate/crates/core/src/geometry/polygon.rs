use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::Vec2;
use crate::{Error, Result};

/// Boundary tolerance for containment tests, meters.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Simple counter-clockwise polygon in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonRepr", into = "PolygonRepr")]
pub struct Polygon2 {
    vertices: Vec<Vec2>,
}

#[derive(Serialize, Deserialize)]
struct PolygonRepr {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<PolygonRepr> for Polygon2 {
    type Error = Error;
    fn try_from(r: PolygonRepr) -> Result<Self> {
        Polygon2::new(r.vertices.into_iter().map(Vec2::from).collect())
    }
}

impl From<Polygon2> for PolygonRepr {
    fn from(p: Polygon2) -> Self {
        PolygonRepr {
            vertices: p.vertices.iter().map(|v| [v.x, v.y]).collect(),
        }
    }
}

pub fn cross(a: &Vec2, b: &Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn signed_area(vs: &[Vec2]) -> f64 {
    let n = vs.len();
    (0..n).map(|i| cross(&vs[i], &vs[(i + 1) % n])).sum::<f64>() * 0.5
}

fn segments_intersect(a0: &Vec2, a1: &Vec2, b0: &Vec2, b1: &Vec2) -> bool {
    let d1 = cross(&(a1 - a0), &(b0 - a0));
    let d2 = cross(&(a1 - a0), &(b1 - a0));
    let d3 = cross(&(b1 - b0), &(a0 - b0));
    let d4 = cross(&(b1 - b0), &(a1 - b0));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: &Vec2, q0: &Vec2, q1: &Vec2, d: f64| {
        d.abs() <= 1e-15
            && p.x >= q0.x.min(q1.x) - 1e-15
            && p.x <= q0.x.max(q1.x) + 1e-15
            && p.y >= q0.y.min(q1.y) - 1e-15
            && p.y <= q0.y.max(q1.y) + 1e-15
    };
    on(b0, a0, a1, d1) || on(b1, a0, a1, d2) || on(a0, b0, b1, d3) || on(a1, b0, b1, d4)
}

/// Distance from `p` to segment `a`-`b`, and the closest point.
pub fn closest_on_segment(p: &Vec2, a: &Vec2, b: &Vec2) -> (f64, Vec2) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    };
    let q = a + ab * t;
    ((p - q).norm(), q)
}

impl Polygon2 {
    /// Validates and stores the ring; clockwise input is reversed to CCW.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        if vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::invalid("polygon vertices must be finite"));
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-14 {
            return Err(Error::invalid("polygon has zero area"));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            for j in (i + 1)..n {
                // skip adjacent edges, which share a vertex
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_intersect(
                    &vertices[i],
                    &vertices[(i + 1) % n],
                    &vertices[j],
                    &vertices[(j + 1) % n],
                ) {
                    return Err(Error::invalid("polygon is self-intersecting"));
                }
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(alloc::vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len();
        let mut c = Vec2::zeros();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            c += (a + b) * cross(&a, &b);
        }
        c / (6.0 * self.area())
    }

    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(&(b - a), &(c - b)) >= -1e-15
        })
    }

    pub fn translated(&self, d: &Vec2) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + d).collect(),
        }
    }

    /// Distance from `p` to the boundary and the closest boundary point.
    pub fn closest_boundary_point(&self, p: &Vec2) -> (f64, Vec2) {
        self.edges()
            .map(|(a, b)| closest_on_segment(p, &a, &b))
            .fold((f64::INFINITY, *p), |acc, x| if x.0 < acc.0 { x } else { acc })
    }

    /// Inclusive containment: inside or within [`BOUNDARY_TOL`] of the boundary.
    pub fn contains(&self, p: &Vec2) -> bool {
        if self.closest_boundary_point(p).0 <= BOUNDARY_TOL {
            return true;
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Ear-clipping triangulation; returns the polygon itself when convex.
    pub fn convex_parts(&self) -> Vec<Polygon2> {
        if self.is_convex() {
            return alloc::vec![self.clone()];
        }
        let mut idx: Vec<usize> = (0..self.vertices.len()).collect();
        let mut out = Vec::new();
        let v = &self.vertices;
        let mut guard = 0;
        while idx.len() > 3 && guard < 10_000 {
            guard += 1;
            let m = idx.len();
            let mut clipped = false;
            for k in 0..m {
                let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
                let (a, b, c) = (v[ia], v[ib], v[ic]);
                if cross(&(b - a), &(c - b)) <= 1e-15 {
                    continue;
                }
                let blocked = idx.iter().any(|&j| {
                    j != ia && j != ib && j != ic && point_in_triangle(&v[j], &a, &b, &c)
                });
                if blocked {
                    continue;
                }
                out.push(Polygon2 { vertices: alloc::vec![a, b, c] });
                idx.remove(k);
                clipped = true;
                break;
            }
            if !clipped {
                break;
            }
        }
        if idx.len() == 3 {
            let tri: Vec<Vec2> = idx.iter().map(|&i| v[i]).collect();
            if signed_area(&tri) > 1e-15 {
                out.push(Polygon2 { vertices: tri });
            }
        }
        out
    }

    /// Sample points along the boundary with spacing at most `spacing`,
    /// starting at vertex 0; vertices are always included.
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Vec2> {
        let mut out = Vec::new();
        for (a, b) in self.edges() {
            let len = (b - a).norm();
            let n = ((len / spacing).ceil() as usize).max(1);
            for i in 0..n {
                out.push(a + (b - a) * (i as f64 / n as f64));
            }
        }
        out
    }
}

fn point_in_triangle(p: &Vec2, a: &Vec2, b: &Vec2, c: &Vec2) -> bool {
    let d1 = cross(&(b - a), &(p - a));
    let d2 = cross(&(c - b), &(p - b));
    let d3 = cross(&(a - c), &(p - c));
    d1 >= 0.0 && d2 >= 0.0 && d3 >= 0.0
}

pub fn point_in_polygon(p: &Vec2, poly: &Polygon2) -> bool {
    poly.contains(p)
}

fn project(vs: &[Vec2], axis: &Vec2) -> (f64, f64) {
    vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let d = v.dot(axis);
        (lo.min(d), hi.max(d))
    })
}

/// Separating-axis test for two convex rings; touching counts as overlap.
fn convex_intersect(a: &[Vec2], b: &[Vec2]) -> bool {
    for ring in [a, b] {
        let n = ring.len();
        for i in 0..n {
            let e = ring[(i + 1) % n] - ring[i];
            let axis = Vec2::new(-e.y, e.x);
            let len = axis.norm();
            if len == 0.0 {
                continue;
            }
            let axis = axis / len;
            let (alo, ahi) = project(a, &axis);
            let (blo, bhi) = project(b, &axis);
            if ahi < blo - BOUNDARY_TOL || bhi < alo - BOUNDARY_TOL {
                return false;
            }
        }
    }
    true
}

/// True when the polygons overlap or touch. Non-convex inputs are
/// triangulated and tested part by part.
pub fn polygons_intersect(a: &Polygon2, b: &Polygon2) -> bool {
    let pa = a.convex_parts();
    let pb = b.convex_parts();
    pa.iter()
        .any(|x| pb.iter().any(|y| convex_intersect(&x.vertices, &y.vertices)))
}

/// Sutherland-Hodgman clip of a convex subject by a convex clip ring.
/// Returns `None` when the intersection has no area.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Option<Vec<Vec2>> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            return None;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % n]);
        let edge = c1 - c0;
        let inside = |p: &Vec2| cross(&edge, &(p - c0)) >= -1e-12;
        let input = core::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let d = cur - prev;
                let denom = cross(&edge, &d);
                if denom.abs() > 1e-18 {
                    let t = cross(&edge, &(c0 - prev)) / denom;
                    out.push(prev + d * t);
                }
            }
            if ci {
                out.push(cur);
            }
        }
    }
    if out.len() < 3 || signed_area(&out).abs() < 1e-12 {
        None
    } else {
        Some(out)
    }
}

/// Area of overlap between two polygons (any convexity).
pub fn overlap_area(a: &Polygon2, b: &Polygon2) -> f64 {
    let pa = a.convex_parts();
    let pb = b.convex_parts();
    let mut total = 0.0;
    for x in &pa {
        for y in &pb {
            if let Some(p) = clip_convex(&x.vertices, &y.vertices) {
                total += signed_area(&p).abs();
            }
        }
    }
    total
}

/// Overlap pieces (convex rings) between a convex ring and any polygon.
pub fn overlap_pieces(convex: &[Vec2], other: &Polygon2) -> Vec<Vec<Vec2>> {
    other
        .convex_parts()
        .iter()
        .filter_map(|part| clip_convex(convex, &part.vertices))
        .collect()
}

/// Andrew monotone-chain convex hull, CCW, without collinear points.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Vec2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&(lower[lower.len() - 1] - lower[lower.len() - 2]), &(p - lower[lower.len() - 1]))
                <= 1e-15
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vec2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&(upper[upper.len() - 1] - upper[upper.len() - 2]), &(p - upper[upper.len() - 1]))
                <= 1e-15
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Inclusive containment in a convex hull given as a CCW ring; degenerate
/// hulls (point or segment) contain only points within tolerance of them.
pub fn hull_contains(hull: &[Vec2], p: &Vec2, tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => (hull[0] - p).norm() <= tol,
        2 => closest_on_segment(p, &hull[0], &hull[1]).0 <= tol,
        n => (0..n).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            let e = b - a;
            cross(&e, &(p - a)) / e.norm() >= -tol
        }),
    }
}

/// Nearest hull edge to `p`: (closest point on it, outward unit normal).
pub fn nearest_hull_edge(hull: &[Vec2], p: &Vec2) -> Option<(Vec2, Vec2)> {
    let n = hull.len();
    match n {
        0 => None,
        1 => {
            let d = p - hull[0];
            let dir = if d.norm() > 0.0 { d / d.norm() } else { Vec2::x() };
            Some((hull[0], dir))
        }
        _ => {
            let mut best: Option<(f64, Vec2, Vec2)> = None;
            let edges = if n == 2 { 1 } else { n };
            for i in 0..edges {
                let a = hull[i];
                let b = hull[(i + 1) % n];
                let (d, q) = closest_on_segment(p, &a, &b);
                let e = b - a;
                let mut normal = Vec2::new(e.y, -e.x) / e.norm();
                if n == 2 && normal.dot(&(p - q)) < 0.0 {
                    normal = -normal;
                }
                if best.as_ref().map_or(true, |b| d < b.0) {
                    best = Some((d, q, normal));
                }
            }
            best.map(|(_, q, nrm)| (q, nrm))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(cx: f64, cy: f64, h: f64) -> Polygon2 {
        Polygon2::rect(cx - h, cy - h, cx + h, cy + h).unwrap()
    }

    #[test]
    fn rejects_bad_rings() {
        assert!(Polygon2::new(vec![Vec2::zeros(), Vec2::x()]).is_err());
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(Polygon2::new(bowtie).is_err());
    }

    #[test]
    fn clockwise_is_reversed() {
        let p = Polygon2::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)]).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn containment_cases() {
        let tri = Polygon2::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]).unwrap();
        assert!(tri.contains(&tri.centroid()));
        // circumradius of this right triangle is sqrt(2)/2 around (0.5, 0.5)
        assert!(!tri.contains(&Vec2::new(0.5 + 2.0f64.sqrt() / 2.0 * 2.0, 0.5)));
        assert!(tri.contains(&Vec2::new(0.5, 0.0)));
    }

    #[test]
    fn intersect_cases() {
        let a = square(0.0, 0.0, 0.5);
        assert!(polygons_intersect(&a, &a.clone()));
        assert!(!polygons_intersect(&a, &square(3.0, 0.0, 0.5)));
        assert!(polygons_intersect(&a, &square(1.0, 0.0, 0.5)));
    }

    #[test]
    fn non_convex_l_shape() {
        let l = Polygon2::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(0.0, 2.0),
        ])
        .unwrap();
        assert!(!l.is_convex());
        let parts = l.convex_parts();
        let total: f64 = parts.iter().map(|p| p.area()).sum();
        assert!((total - 3.0).abs() < 1e-12);
        // the notch square does not touch the L's interior
        assert!(!polygons_intersect(&l, &square(1.6, 1.6, 0.3)));
        assert!(polygons_intersect(&l, &square(0.5, 1.5, 0.2)));
    }

    #[test]
    fn overlap_area_of_offset_squares() {
        let a = square(0.0, 0.0, 0.5);
        let b = square(0.5, 0.5, 0.5);
        assert!((overlap_area(&a, &b) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.5, 0.5),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert_eq!(convex_hull(&pts).len(), 4);
    }

    fn random_convex(rng: &mut ChaCha8Rng) -> Polygon2 {
        let c = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let pts: Vec<Vec2> = (0..8)
            .map(|_| c + Vec2::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)))
            .collect();
        Polygon2::new(convex_hull(&pts)).unwrap()
    }

    fn bbox(p: &Polygon2) -> (Vec2, Vec2) {
        let lo = p.vertices().iter().fold(Vec2::repeat(f64::INFINITY), |m, v| m.inf(v));
        let hi = p.vertices().iter().fold(Vec2::repeat(f64::NEG_INFINITY), |m, v| m.sup(v));
        (lo, hi)
    }

    #[test]
    fn sat_agrees_with_monte_carlo_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = random_convex(&mut rng);
            let b = random_convex(&mut rng);
            let ((alo, ahi), (blo, bhi)) = (bbox(&a), bbox(&b));
            let lo = alo.sup(&blo);
            let hi = ahi.inf(&bhi);
            let mc = lo.x < hi.x
                && lo.y < hi.y
                && (0..10_000).any(|_| {
                    let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
                    a.contains(&p) && b.contains(&p)
                });
            assert_eq!(mc, polygons_intersect(&a, &b));
        }
    }
}

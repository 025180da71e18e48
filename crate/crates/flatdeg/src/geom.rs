//! Exact planar predicates and small constructions on rational points.

use crate::scalar::{Rat, Vec2Q};
use num_traits::{Signed, Zero};
use std::cmp::Ordering;

/// Sign of the cross product (b - a) x (c - a): +1 left turn, -1 right turn, 0 collinear.
pub fn orient(a: &Vec2Q, b: &Vec2Q, c: &Vec2Q) -> i8 {
    let v = b.clone() - a.clone();
    let w = c.clone() - a.clone();
    sign(&v.cross(&w))
}

pub fn sign(r: &Rat) -> i8 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

/// True if p lies on the closed segment [a, b].
pub fn on_segment(a: &Vec2Q, b: &Vec2Q, p: &Vec2Q) -> bool {
    if orient(a, b, p) != 0 {
        return false;
    }
    let lo_x = a.x.clone().min(b.x.clone());
    let hi_x = a.x.clone().max(b.x.clone());
    let lo_y = a.y.clone().min(b.y.clone());
    let hi_y = a.y.clone().max(b.y.clone());
    lo_x <= p.x && p.x <= hi_x && lo_y <= p.y && p.y <= hi_y
}

/// True if the closed segments [a,b] and [c,d] share at least one point.
pub fn segments_touch(a: &Vec2Q, b: &Vec2Q, c: &Vec2Q, d: &Vec2Q) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

/// Proper crossing: the open segments (a,b) and (c,d) intersect in a single
/// interior point of both.
pub fn segments_cross(a: &Vec2Q, b: &Vec2Q, c: &Vec2Q, d: &Vec2Q) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 && o1 != o2 && o3 != o4
}

/// Intersection of the line p + t*d with the segment [a, b].
///
/// Returns (t, u) with the hit point = p + t*d = a + u*(b - a), u in [0, 1].
/// Returns None if d is parallel to b - a (including the collinear case).
pub fn line_hits_segment(p: &Vec2Q, d: &Vec2Q, a: &Vec2Q, b: &Vec2Q) -> Option<(Rat, Rat)> {
    let e = b.clone() - a.clone();
    let den = d.cross(&e);
    if den.is_zero() {
        return None;
    }
    let w = a.clone() - p.clone();
    let t = w.cross(&e) / den.clone();
    let u = w.cross(d) / den;
    if u >= Rat::zero() && u <= Rat::from_integer(1.into()) {
        Some((t, u))
    } else {
        None
    }
}

/// Where a point sits relative to a simple counterclockwise polygon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PointLoc {
    Inside,
    /// On the open edge (i, i+1), at parameter u in (0, 1).
    OnEdge(usize, Rat),
    /// Equal to vertex i.
    OnVertex(usize),
    Outside,
}

/// Locate p relative to the simple polygon with the given ccw vertices.
pub fn locate_in_polygon(verts: &[Vec2Q], p: &Vec2Q) -> PointLoc {
    let n = verts.len();
    for (i, v) in verts.iter().enumerate() {
        if v == p {
            return PointLoc::OnVertex(i);
        }
    }
    for i in 0..n {
        let a = &verts[i];
        let b = &verts[(i + 1) % n];
        if on_segment(a, b, p) {
            let e = b.clone() - a.clone();
            let u = if !e.x.is_zero() {
                (p.x.clone() - a.x.clone()) / e.x
            } else {
                (p.y.clone() - a.y.clone()) / e.y
            };
            return PointLoc::OnEdge(i, u);
        }
    }
    // Crossing number against a horizontal ray to the right.
    let mut inside = false;
    for i in 0..n {
        let a = &verts[i];
        let b = &verts[(i + 1) % n];
        let (ay, by) = (&a.y, &b.y);
        if (ay <= &p.y) != (by <= &p.y) {
            // x coordinate of the edge at height p.y
            let t = (p.y.clone() - ay.clone()) / (by.clone() - ay.clone());
            let x = a.x.clone() + t * (b.x.clone() - a.x.clone());
            if x > p.x {
                inside = !inside;
            }
        }
    }
    if inside {
        PointLoc::Inside
    } else {
        PointLoc::Outside
    }
}

/// Index of the closed half plane a direction lies in: 0 for the upper half
/// (y > 0, or y = 0 and x > 0), 1 for the lower half. Directions must be nonzero.
fn half_plane(d: &Vec2Q) -> u8 {
    match sign(&d.y) {
        1 => 0,
        -1 => 1,
        _ => {
            if sign(&d.x) == 1 {
                0
            } else {
                1
            }
        }
    }
}

/// Compare two nonzero directions by counterclockwise angle from (1, 0),
/// ignoring magnitude. Equal iff the directions are positive multiples.
pub fn cmp_ccw(a: &Vec2Q, b: &Vec2Q) -> Ordering {
    let ha = half_plane(a);
    let hb = half_plane(b);
    if ha != hb {
        return ha.cmp(&hb);
    }
    match sign(&a.cross(b)) {
        1 => Ordering::Less,
        -1 => Ordering::Greater,
        _ => Ordering::Equal,
    }
}

/// True if direction x lies strictly inside the counterclockwise sector from u to v.
/// The sector is taken to be the angle swept rotating u counterclockwise to v,
/// assumed strictly between 0 and 2*pi.
pub fn strictly_in_sector(u: &Vec2Q, v: &Vec2Q, x: &Vec2Q) -> bool {
    let su = sign(&u.cross(x));
    let sv = sign(&x.cross(v));
    let uv = sign(&u.cross(v));
    if uv == 1 {
        // sector < pi
        su == 1 && sv == 1
    } else if uv == -1 {
        // sector > pi: complement of the ccw sector from v to u
        !(sign(&v.cross(x)) >= 0 && sign(&x.cross(u)) >= 0) && !same_dir(x, v) && !same_dir(x, u)
    } else {
        // u, v collinear: sector is exactly pi (opposite) since 0 and 2*pi are excluded
        if u.dot(v) < Rat::zero() {
            su == 1
        } else {
            false
        }
    }
}

/// True if a and b are positive multiples of each other.
pub fn same_dir(a: &Vec2Q, b: &Vec2Q) -> bool {
    a.cross(b).is_zero() && a.dot(b) > Rat::zero()
}

/// True if p lies in the closed triangle (a, b, c), which must be
/// counterclockwise.
pub fn in_closed_triangle(a: &Vec2Q, b: &Vec2Q, c: &Vec2Q, p: &Vec2Q) -> bool {
    orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0
}

/// Ear-clipping triangulation of a simple counterclockwise polygon.
/// Returns vertex-index triples, each counterclockwise. Straight corners
/// are handled; the polygon must already be validated.
pub fn ear_clip(verts: &[Vec2Q]) -> Vec<(usize, usize, usize)> {
    let n = verts.len();
    assert!(n >= 3);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let a = idx[(k + m - 1) % m];
            let b = idx[k];
            let c = idx[(k + 1) % m];
            if orient(&verts[a], &verts[b], &verts[c]) <= 0 {
                continue;
            }
            // An ear needs no other remaining vertex inside or on the
            // closed triangle. Because two of the triangle sides are
            // polygon edges, no edge can invade the triangle without
            // bringing a vertex along, so this test is complete.
            let blocked = idx.iter().any(|&v| {
                v != a && v != b && v != c
                    && in_closed_triangle(&verts[a], &verts[b], &verts[c], &verts[v])
            });
            if !blocked {
                tris.push((a, b, c));
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        assert!(clipped, "ear clipping stuck on a non-simple polygon");
    }
    tris.push((idx[0], idx[1], idx[2]));
    tris
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_int;

    fn v(x: i64, y: i64) -> Vec2Q {
        Vec2Q::new(rat_int(x), rat_int(y))
    }

    #[test]
    fn orientation_and_segments() {
        assert_eq!(orient(&v(0, 0), &v(1, 0), &v(0, 1)), 1);
        assert_eq!(orient(&v(0, 0), &v(1, 0), &v(2, 0)), 0);
        assert!(segments_cross(&v(0, 0), &v(2, 2), &v(0, 2), &v(2, 0)));
        assert!(!segments_cross(&v(0, 0), &v(1, 1), &v(1, 1), &v(2, 0)));
        assert!(segments_touch(&v(0, 0), &v(1, 1), &v(1, 1), &v(2, 0)));
        assert!(on_segment(&v(0, 0), &v(4, 2), &v(2, 1)));
    }

    #[test]
    fn ray_segment() {
        let (t, u) = line_hits_segment(&v(0, 1), &v(1, 0), &v(3, 0), &v(3, 2)).unwrap();
        assert_eq!(t, rat_int(3));
        assert_eq!(u, Rat::new(1.into(), 2.into()));
        assert!(line_hits_segment(&v(0, 0), &v(1, 0), &v(1, 1), &v(4, 1)).is_none());
    }

    #[test]
    fn polygon_location() {
        let sq = vec![v(0, 0), v(2, 0), v(2, 2), v(0, 2)];
        assert_eq!(locate_in_polygon(&sq, &v(1, 1)), PointLoc::Inside);
        assert_eq!(locate_in_polygon(&sq, &v(3, 1)), PointLoc::Outside);
        assert_eq!(locate_in_polygon(&sq, &v(0, 0)), PointLoc::OnVertex(0));
        match locate_in_polygon(&sq, &v(1, 0)) {
            PointLoc::OnEdge(0, u) => assert_eq!(u, Rat::new(1.into(), 2.into())),
            other => panic!("expected edge hit, got {:?}", other),
        }
    }

    #[test]
    fn ccw_order() {
        let dirs = [v(1, 0), v(2, 1), v(0, 1), v(-1, 1), v(-1, 0), v(-1, -1), v(0, -1), v(1, -1)];
        for i in 0..dirs.len() {
            for j in 0..dirs.len() {
                assert_eq!(cmp_ccw(&dirs[i], &dirs[j]), i.cmp(&j), "{} vs {}", i, j);
            }
        }
        assert_eq!(cmp_ccw(&v(2, 3), &v(4, 6)), Ordering::Equal);
    }

    #[test]
    fn ear_clip_l_shape() {
        let l = vec![v(0, 0), v(2, 0), v(2, 1), v(1, 1), v(1, 2), v(0, 2)];
        let tris = ear_clip(&l);
        assert_eq!(tris.len(), 4);
        let mut area2 = Rat::zero();
        for (a, b, c) in &tris {
            let s1 = l[*b].clone() - l[*a].clone();
            let s2 = l[*c].clone() - l[*a].clone();
            let cr = s1.cross(&s2);
            assert!(cr > Rat::zero(), "degenerate or cw triangle");
            area2 += cr;
        }
        assert_eq!(area2, rat_int(6));
    }

    #[test]
    fn ear_clip_straight_corners() {
        let p = vec![v(0, 0), v(1, 0), v(2, 0), v(2, 2), v(0, 2)];
        let tris = ear_clip(&p);
        assert_eq!(tris.len(), 3);
        let mut area2 = Rat::zero();
        for (a, b, c) in &tris {
            let s1 = p[*b].clone() - p[*a].clone();
            let s2 = p[*c].clone() - p[*a].clone();
            area2 += s1.cross(&s2);
        }
        assert_eq!(area2, rat_int(8));
    }

    #[test]
    fn sectors() {
        // quarter turn sector from east to north
        assert!(strictly_in_sector(&v(1, 0), &v(0, 1), &v(1, 1)));
        assert!(!strictly_in_sector(&v(1, 0), &v(0, 1), &v(1, 0)));
        assert!(!strictly_in_sector(&v(1, 0), &v(0, 1), &v(1, -1)));
        // reflex sector from north to east (3/4 turn)
        assert!(strictly_in_sector(&v(0, 1), &v(1, 0), &v(-1, 0)));
        assert!(strictly_in_sector(&v(0, 1), &v(1, 0), &v(0, -1)));
        assert!(!strictly_in_sector(&v(0, 1), &v(1, 0), &v(1, 1)));
        // straight sector (pi)
        assert!(strictly_in_sector(&v(1, 0), &v(-1, 0), &v(0, 1)));
        assert!(!strictly_in_sector(&v(1, 0), &v(-1, 0), &v(0, -1)));
    }
}

//! Half-translation surfaces (quadratic differentials) and their holonomy
//! double covers.
//!
//! Gluings are z -> z + c as for translation surfaces, or z -> -z + c
//! ("flipped"). A flipped pair carries equal holonomy vectors, an unflipped
//! pair opposite ones. Cone angles are multiples of pi; order -1 poles are
//! allowed.

use crate::error::{Error, Result};
use crate::geom;
use crate::linalg::Mat;
use crate::scalar::{QQi, Vec2Q};
use crate::surface::{Corner, DEdge, Polygon, Surface};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

#[derive(Clone, Debug)]
pub struct HalfSurface {
    pub polygons: Vec<Polygon>,
    pub poly_component: Vec<usize>,
    pub component_names: Vec<String>,
    pub gluing: BTreeMap<DEdge, DEdge>,
    /// Both directions of every flipped pair.
    pub flipped: BTreeSet<DEdge>,
    pub marks: BTreeSet<usize>,
    pub warnings: Vec<String>,
    pub edge_classes: Vec<(DEdge, DEdge)>,
    pub edge_class_of: BTreeMap<DEdge, usize>,
    pub vertex_classes: Vec<Vec<Corner>>,
    pub vertex_class_of: BTreeMap<Corner, usize>,
    /// Cone angle of each vertex class divided by pi (always >= 1).
    pub half_turns: Vec<usize>,
}

/// Deck transformation of a double cover: polygon i maps to poly_map[i]
/// keeping vertex indices, with derivative -1.
#[derive(Clone, Debug)]
pub struct Involution {
    pub poly_map: Vec<usize>,
}

impl Involution {
    pub fn map_dedge(&self, d: DEdge) -> DEdge {
        DEdge::new(self.poly_map[d.poly], d.edge)
    }

    pub fn map_corner(&self, c: Corner) -> Corner {
        (self.poly_map[c.0], c.1)
    }

    /// Check that this is an involution of the complex acting by z -> -z + c
    /// on every chart and compatible with the gluings and marks.
    pub fn validate(&self, s: &Surface) -> Result<()> {
        if self.poly_map.len() != s.polygons.len() {
            return Err(Error::InvolutionMismatch(
                "polygon map has the wrong length".into(),
            ));
        }
        for p in 0..s.polygons.len() {
            let q = self.poly_map[p];
            if q >= s.polygons.len() || self.poly_map[q] != p || q == p {
                return Err(Error::InvolutionMismatch(format!(
                    "polygon map is not a fixed-point-free involution at {}",
                    p
                )));
            }
            if s.polygons[p].n() != s.polygons[q].n() {
                return Err(Error::InvolutionMismatch(format!(
                    "polygons {} and {} have different sizes",
                    p, q
                )));
            }
            for e in 0..s.polygons[p].n() {
                let d = DEdge::new(p, e);
                if s.hol(self.map_dedge(d)) + s.hol(d) != Vec2Q::zero() {
                    return Err(Error::InvolutionMismatch(format!(
                        "image of {} does not negate holonomy",
                        d
                    )));
                }
                if self.map_dedge(s.partner(d)) != s.partner(self.map_dedge(d)) {
                    return Err(Error::InvolutionMismatch(format!(
                        "gluing not respected at {}",
                        d
                    )));
                }
            }
        }
        for &m in &s.marks {
            let (p, i) = s.vertex_classes[m][0];
            let im = s.class_of(self.map_corner((p, i)));
            if !s.marks.contains(&im) {
                return Err(Error::InvolutionMismatch(
                    "marked points not preserved".into(),
                ));
            }
        }
        Ok(())
    }

    /// Pullback matrix of the involution on edge-class cocycles:
    /// (J*u)(e) = u(J(e)).
    pub fn pullback_matrix(&self, s: &Surface) -> Mat {
        let n = s.edge_classes.len();
        let mut m = Mat::zero(n, n);
        for (c, &(rep, _)) in s.edge_classes.iter().enumerate() {
            let img = self.map_dedge(rep);
            let c2 = s.edge_class_of[&img];
            let sign = if s.edge_classes[c2].0 == img {
                QQi::one()
            } else {
                -QQi::one()
            };
            m.rows[c][c2] = sign;
        }
        m
    }

    /// Classes fixed by the induced action on vertex classes.
    pub fn fixed_vertex_classes(&self, s: &Surface) -> Vec<usize> {
        (0..s.vertex_classes.len())
            .filter(|&c| {
                let corner = s.vertex_classes[c][0];
                s.class_of(self.map_corner(corner)) == c
            })
            .collect()
    }
}

impl HalfSurface {
    pub fn build(
        polygons: Vec<Polygon>,
        poly_component: Vec<usize>,
        component_names: Vec<String>,
        translation_pairs: &[(DEdge, DEdge)],
        flip_pairs: &[(DEdge, DEdge)],
        marked: &[Corner],
    ) -> Result<HalfSurface> {
        if polygons.is_empty() {
            return Err(Error::InvalidPolygon("surface has no polygons".into()));
        }
        if flip_pairs.is_empty() {
            return Err(Error::AlreadyOrientable(
                "no flipped gluings; this is a translation surface".into(),
            ));
        }
        for (i, poly) in polygons.iter().enumerate() {
            poly.validate()
                .map_err(|e| Error::InvalidPolygon(format!("polygon {}: {}", i, e)))?;
        }
        let mut gluing: BTreeMap<DEdge, DEdge> = BTreeMap::new();
        let mut flipped: BTreeSet<DEdge> = BTreeSet::new();
        for (pairs, flip) in [(translation_pairs, false), (flip_pairs, true)] {
            for &(a, b) in pairs {
                for d in [a, b] {
                    if d.poly >= polygons.len() || d.edge >= polygons[d.poly].n() {
                        return Err(Error::GluingMismatch(format!(
                            "edge {} does not exist",
                            d
                        )));
                    }
                }
                if a == b {
                    return Err(Error::GluingMismatch(format!(
                        "edge {} glued to itself",
                        a
                    )));
                }
                if gluing.insert(a, b).is_some() || gluing.insert(b, a).is_some() {
                    return Err(Error::GluingMismatch(format!(
                        "edge {} or {} glued twice",
                        a, b
                    )));
                }
                if flip {
                    flipped.insert(a);
                    flipped.insert(b);
                }
            }
        }
        for (p, poly) in polygons.iter().enumerate() {
            for e in 0..poly.n() {
                let d = DEdge::new(p, e);
                if !gluing.contains_key(&d) {
                    return Err(Error::GluingMismatch(format!("edge {} is unglued", d)));
                }
            }
        }
        for (&a, &b) in &gluing {
            let ha = polygons[a.poly].edge_vec(a.edge);
            let hb = polygons[b.poly].edge_vec(b.edge);
            let ok = if flipped.contains(&a) {
                ha == hb
            } else {
                ha + hb == Vec2Q::zero()
            };
            if !ok {
                return Err(Error::GluingMismatch(format!(
                    "edges {} and {} have incompatible holonomy for their gluing type",
                    a, b
                )));
            }
            if poly_component[a.poly] != poly_component[b.poly] {
                return Err(Error::NotConnected(format!(
                    "gluing {} ~ {} joins distinct declared components",
                    a, b
                )));
            }
        }
        let ncomp = component_names.len();
        for comp in 0..ncomp {
            let polys: Vec<usize> = (0..polygons.len())
                .filter(|&p| poly_component[p] == comp)
                .collect();
            if polys.is_empty() {
                return Err(Error::NotConnected(format!(
                    "component {:?} has no polygons",
                    component_names[comp]
                )));
            }
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            let mut queue = VecDeque::from([polys[0]]);
            seen.insert(polys[0]);
            while let Some(p) = queue.pop_front() {
                for e in 0..polygons[p].n() {
                    let q = gluing[&DEdge::new(p, e)].poly;
                    if seen.insert(q) {
                        queue.push_back(q);
                    }
                }
            }
            if seen.len() != polys.len() {
                return Err(Error::NotConnected(format!(
                    "component {:?} splits into disconnected pieces",
                    component_names[comp]
                )));
            }
        }

        let mut edge_classes: Vec<(DEdge, DEdge)> = gluing
            .iter()
            .filter(|(a, b)| *a < b)
            .map(|(&a, &b)| (a, b))
            .collect();
        edge_classes.sort_unstable();
        let mut edge_class_of = BTreeMap::new();
        for (i, &(a, b)) in edge_classes.iter().enumerate() {
            edge_class_of.insert(a, i);
            edge_class_of.insert(b, i);
        }

        // Corner walk: identical combinatorics to the translation case (the
        // end of the incoming edge is the start of its partner under both
        // gluing types). Angles are counted in half turns by tracking
        // passages over the east and west rays.
        let next_corner = |c: Corner| -> Corner {
            let (p, i) = c;
            let n = polygons[p].n();
            let e = gluing[&DEdge::new(p, (i + n - 1) % n)];
            (e.poly, e.edge)
        };
        let mut vertex_classes: Vec<Vec<Corner>> = Vec::new();
        let mut vertex_class_of: BTreeMap<Corner, usize> = BTreeMap::new();
        let mut half_turns: Vec<usize> = Vec::new();
        for p in 0..polygons.len() {
            for i in 0..polygons[p].n() {
                let start: Corner = (p, i);
                if vertex_class_of.contains_key(&start) {
                    continue;
                }
                let mut cycle = vec![start];
                let mut c = next_corner(start);
                while c != start {
                    cycle.push(c);
                    c = next_corner(c);
                    if cycle.len() > 4 * gluing.len() {
                        return Err(Error::Internal("corner walk does not close".into()));
                    }
                }
                let id = vertex_classes.len();
                let mut halves = 0usize;
                for &(cp, ci) in &cycle {
                    vertex_class_of.insert((cp, ci), id);
                    let n = polygons[cp].n();
                    let u = polygons[cp].edge_vec(ci);
                    let w = -polygons[cp].edge_vec((ci + n - 1) % n);
                    for (uu, ww) in [(u.clone(), w.clone()), (-u.clone(), -w.clone())] {
                        if geom::cmp_ccw(&ww, &uu) == Ordering::Less {
                            halves += 1;
                        }
                    }
                }
                if halves == 0 {
                    return Err(Error::AngleError(format!(
                        "vertex class through polygon {} vertex {} has cone angle 0",
                        p, i
                    )));
                }
                vertex_classes.push(cycle);
                half_turns.push(halves);
            }
        }

        let mut warnings = Vec::new();
        let mut marks: BTreeSet<usize> = BTreeSet::new();
        for &c in marked {
            let class = *vertex_class_of.get(&c).ok_or_else(|| {
                Error::Internal(format!("marked corner ({}, {}) does not exist", c.0, c.1))
            })?;
            if half_turns[class] == 2 {
                marks.insert(class);
            } else {
                warnings.push(format!(
                    "mark at polygon {} vertex {} sits on a cone point of angle {}pi; ignored",
                    c.0, c.1, half_turns[class]
                ));
            }
        }
        for class in 0..vertex_classes.len() {
            if half_turns[class] == 2 && !marks.contains(&class) {
                let (p, i) = vertex_classes[class][0];
                warnings.push(format!(
                    "regular vertex class through polygon {} vertex {} was not marked; marking it",
                    p, i
                ));
                marks.insert(class);
            }
        }

        Ok(HalfSurface {
            polygons,
            poly_component,
            component_names,
            gluing,
            flipped,
            marks,
            warnings,
            edge_classes,
            edge_class_of,
            vertex_classes,
            vertex_class_of,
            half_turns,
        })
    }

    pub fn build_connected(
        polygons: Vec<Polygon>,
        translation_pairs: &[(DEdge, DEdge)],
        flip_pairs: &[(DEdge, DEdge)],
        marked: &[Corner],
    ) -> Result<HalfSurface> {
        let n = polygons.len();
        HalfSurface::build(
            polygons,
            vec![0; n],
            vec!["c0".into()],
            translation_pairs,
            flip_pairs,
            marked,
        )
    }

    pub fn num_components(&self) -> usize {
        self.component_names.len()
    }

    pub fn component_of_class(&self, class: usize) -> usize {
        self.poly_component[self.vertex_classes[class][0].0]
    }

    /// Quadratic-differential order of a vertex class: cone angle
    /// pi*(k+2) gives order k >= -1.
    pub fn order_of_class(&self, class: usize) -> i64 {
        self.half_turns[class] as i64 - 2
    }

    pub fn genus_of_component(&self, comp: usize) -> usize {
        let f = (0..self.polygons.len())
            .filter(|&p| self.poly_component[p] == comp)
            .count() as i64;
        let e = self
            .edge_classes
            .iter()
            .filter(|(d, _)| self.poly_component[d.poly] == comp)
            .count() as i64;
        let v = (0..self.vertex_classes.len())
            .filter(|&c| self.component_of_class(c) == comp)
            .count() as i64;
        let chi = v - e + f;
        ((2 - chi) / 2) as usize
    }

    /// Stratum label like "Q(1,-1,-1,-1,-1)" per component, joined by "x".
    pub fn stratum_string(&self) -> String {
        (0..self.num_components())
            .map(|comp| {
                let mut orders: Vec<i64> = (0..self.vertex_classes.len())
                    .filter(|&c| self.component_of_class(c) == comp)
                    .map(|c| self.order_of_class(c))
                    .collect();
                orders.sort_unstable_by(|a, b| b.cmp(a));
                format!(
                    "Q({})",
                    orders
                        .iter()
                        .map(|o| o.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                )
            })
            .collect::<Vec<_>>()
            .join("x")
    }

    /// Orientation double cover: two sheets per polygon, the second with
    /// negated charts; flipped gluings connect opposite sheets. Returns the
    /// cover with its deck involution.
    pub fn holonomy_double_cover(&self) -> Result<(Surface, Involution)> {
        let n = self.polygons.len();
        let mut polygons = Vec::with_capacity(2 * n);
        let mut poly_component = Vec::with_capacity(2 * n);
        for (p, poly) in self.polygons.iter().enumerate() {
            polygons.push(poly.clone());
            polygons.push(Polygon::new(
                poly.vertices.iter().map(|v| -v.clone()).collect(),
            ));
            poly_component.push(self.poly_component[p]);
            poly_component.push(self.poly_component[p]);
        }
        let up = |d: DEdge| DEdge::new(2 * d.poly, d.edge);
        let down = |d: DEdge| DEdge::new(2 * d.poly + 1, d.edge);
        let mut pairs = Vec::new();
        for &(a, b) in &self.edge_classes {
            if self.flipped.contains(&a) {
                pairs.push((up(a), down(b)));
                pairs.push((down(a), up(b)));
            } else {
                pairs.push((up(a), up(b)));
                pairs.push((down(a), down(b)));
            }
        }
        let mut marked: Vec<Corner> = Vec::new();
        for class in 0..self.vertex_classes.len() {
            let (p, i) = self.vertex_classes[class][0];
            match self.half_turns[class] {
                1 => marked.push((2 * p, i)),
                2 if self.marks.contains(&class) => {
                    marked.push((2 * p, i));
                    marked.push((2 * p + 1, i));
                }
                _ => {}
            }
        }
        let cover = Surface::build(
            polygons,
            poly_component,
            self.component_names.clone(),
            &pairs,
            &marked,
        )
        .map_err(|e| match e {
            Error::NotConnected(_) => Error::AlreadyOrientable(
                "the double cover disconnects: holonomy is already trivial".into(),
            ),
            other => other,
        })?;
        let poly_map: Vec<usize> = (0..2 * n)
            .map(|p| if p % 2 == 0 { p + 1 } else { p - 1 })
            .collect();
        let invol = Involution { poly_map };
        invol.validate(&cover)?;
        Ok((cover, invol))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// A 2x1 rectangle with straight vertices at the edge midpoints; the two
    /// bottom halves are folded onto each other and likewise the top, the
    /// sides are glued by translation: the pillowcase Q(-1,-1,-1,-1).
    pub fn pillowcase() -> HalfSurface {
        let rect = Polygon::new(vec![
            Vec2Q::from_ints(0, 0),
            Vec2Q::from_ints(1, 0),
            Vec2Q::from_ints(2, 0),
            Vec2Q::from_ints(2, 1),
            Vec2Q::from_ints(1, 1),
            Vec2Q::from_ints(0, 1),
        ]);
        HalfSurface::build_connected(
            vec![rect],
            &[(DEdge::new(0, 2), DEdge::new(0, 5))],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 1)),
                (DEdge::new(0, 3), DEdge::new(0, 4)),
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn pillowcase_signature() {
        let q = pillowcase();
        assert_eq!(q.stratum_string(), "Q(-1,-1,-1,-1)");
        assert_eq!(q.genus_of_component(0), 0);
        assert_eq!(q.vertex_classes.len(), 4);
        assert!(q.half_turns.iter().all(|&m| m == 1));
    }

    #[test]
    fn pillowcase_cover_is_marked_torus() {
        let q = pillowcase();
        let (cover, invol) = q.holonomy_double_cover().unwrap();
        assert_eq!(cover.stratum_string(), "H(0,0,0,0)");
        assert_eq!(cover.genus_of_component(0), 1);
        assert!(cover.warnings.is_empty());
        assert_eq!(invol.fixed_vertex_classes(&cover).len(), 4);
        // Riemann-Hurwitz: chi(cover) = 2 chi(Q) - #odd, here 0 = 4 - 4.
        let odd = (0..q.vertex_classes.len())
            .filter(|&c| q.order_of_class(c) % 2 != 0)
            .count();
        assert_eq!(odd, 4);
    }

    #[test]
    fn flip_needs_equal_holonomy() {
        let err = HalfSurface::build_connected(
            vec![Polygon::unit_square(), Polygon::rect(crate::scalar::rat_int(2), crate::scalar::rat_int(1))],
            &[
                (DEdge::new(0, 1), DEdge::new(0, 3)),
                (DEdge::new(1, 1), DEdge::new(1, 3)),
            ],
            &[
                (DEdge::new(0, 0), DEdge::new(1, 2)),
                (DEdge::new(0, 2), DEdge::new(1, 0)),
            ],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::GluingMismatch(_)));
    }

    #[test]
    fn no_flips_rejected() {
        let err = HalfSurface::build_connected(
            vec![Polygon::unit_square()],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 2)),
                (DEdge::new(0, 1), DEdge::new(0, 3)),
            ],
            &[],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::AlreadyOrientable(_)));
    }

    #[test]
    fn trivial_holonomy_cover_rejected() {
        // Two squares in a vertical torus-like arrangement where the two
        // flips cancel: the monodromy is trivial and the cover splits.
        let q = HalfSurface::build_connected(
            vec![Polygon::unit_square(), Polygon::unit_square()],
            &[
                (DEdge::new(0, 1), DEdge::new(0, 3)),
                (DEdge::new(1, 1), DEdge::new(1, 3)),
            ],
            &[
                (DEdge::new(0, 2), DEdge::new(1, 2)),
                (DEdge::new(1, 0), DEdge::new(0, 0)),
            ],
            &[],
        )
        .unwrap();
        let err = q.holonomy_double_cover().unwrap_err();
        assert!(matches!(err, Error::AlreadyOrientable(_)));
    }

    #[test]
    fn involution_pullback_negates_periods() {
        let q = pillowcase();
        let (cover, invol) = q.holonomy_double_cover().unwrap();
        let hom = crate::homology::Homology::new(&cover);
        let omega = hom.period_cocycle();
        let m = invol.pullback_matrix(&cover);
        let pulled = m.apply(&omega);
        let neg: Vec<QQi> = omega.iter().map(|z| -z.clone()).collect();
        assert_eq!(pulled, neg);
        // J* is an involution on cocycles.
        assert_eq!(m.mul(&m), Mat::identity(cover.edge_classes.len()));
    }
}

//! Polygonal presentations of translation surfaces.
//!
//! A surface is a finite set of simple counterclockwise polygons together
//! with a pairing of their directed boundary edges by translations. Vertex
//! identifications, cone angles and the stratum are derived, never declared:
//! walking corners counterclockwise around an identified vertex and counting
//! full turns gives the cone angle directly. Every vertex class must carry a
//! cone point or a marked point, so the vertex set of the complex always
//! equals the set of distinguished points of the surface.

use crate::error::{Error, Result};
use crate::geom;
use crate::scalar::{fmt_rat, QQi, Rat, Vec2Q};
use num_traits::Zero;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

/// Directed edge `edge` of polygon `poly`, running from vertex `edge` to
/// vertex `edge + 1 mod n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DEdge {
    pub poly: usize,
    pub edge: usize,
}

impl DEdge {
    pub fn new(poly: usize, edge: usize) -> Self {
        DEdge { poly, edge }
    }
}

impl fmt::Display for DEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}.e{}", self.poly, self.edge)
    }
}

/// Corner `(poly, vertex index)`: the wedge at that vertex between the
/// incoming edge `vertex - 1` and the outgoing edge `vertex`.
pub type Corner = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polygon {
    pub vertices: Vec<Vec2Q>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2Q>) -> Self {
        Polygon { vertices }
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, i: usize) -> &Vec2Q {
        &self.vertices[i % self.n()]
    }

    pub fn edge_vec(&self, i: usize) -> Vec2Q {
        let n = self.n();
        self.vertices[(i + 1) % n].clone() - self.vertices[i % n].clone()
    }

    /// Twice the signed area; positive for counterclockwise boundaries.
    pub fn area2(&self) -> Rat {
        let n = self.n();
        let mut s = Rat::zero();
        for i in 0..n {
            s += self.vertices[i].cross(&self.vertices[(i + 1) % n]);
        }
        s
    }

    pub fn unit_square() -> Self {
        Polygon::new(vec![
            Vec2Q::from_ints(0, 0),
            Vec2Q::from_ints(1, 0),
            Vec2Q::from_ints(1, 1),
            Vec2Q::from_ints(0, 1),
        ])
    }

    pub fn rect(w: Rat, h: Rat) -> Self {
        Polygon::new(vec![
            Vec2Q::new(Rat::zero(), Rat::zero()),
            Vec2Q::new(w.clone(), Rat::zero()),
            Vec2Q::new(w, h.clone()),
            Vec2Q::new(Rat::zero(), h),
        ])
    }

    /// Checks that the boundary is a simple counterclockwise curve with
    /// no zero-length edges and no zero-angle corners. Straight corners
    /// (interior angle exactly pi) are allowed.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 3 {
            return Err(Error::InvalidPolygon(format!(
                "polygon needs at least 3 vertices, got {}",
                n
            )));
        }
        for i in 0..n {
            if self.edge_vec(i).is_zero() {
                return Err(Error::InvalidPolygon(format!(
                    "zero-length edge at index {}",
                    i
                )));
            }
        }
        for i in 0..n {
            let din = self.edge_vec((i + n - 1) % n);
            let dout = self.edge_vec(i);
            if din.cross(&dout).is_zero() && din.dot(&dout) < Rat::zero() {
                return Err(Error::InvalidPolygon(format!(
                    "zero-angle corner at vertex {}",
                    i
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                let (a, b) = (&self.vertices[i], &self.vertices[(i + 1) % n]);
                let (c, d) = (&self.vertices[j], &self.vertices[(j + 1) % n]);
                if geom::segments_touch(a, b, c, d) {
                    return Err(Error::InvalidPolygon(format!(
                        "boundary self-intersection between edges {} and {}",
                        i, j
                    )));
                }
            }
        }
        if self.area2() <= Rat::zero() {
            return Err(Error::InvalidPolygon(
                "boundary must be counterclockwise".into(),
            ));
        }
        Ok(())
    }
}

/// A translation surface presented as glued polygons, with all derived
/// combinatorics cached. Construct through [`Surface::build`].
#[derive(Clone, Debug)]
pub struct Surface {
    pub polygons: Vec<Polygon>,
    pub poly_component: Vec<usize>,
    pub component_names: Vec<String>,
    pub gluing: BTreeMap<DEdge, DEdge>,
    /// Marked vertex classes (all of them regular).
    pub marks: BTreeSet<usize>,
    pub warnings: Vec<String>,
    /// Unordered edge pairs, each stored as (min, max) and sorted.
    pub edge_classes: Vec<(DEdge, DEdge)>,
    pub edge_class_of: BTreeMap<DEdge, usize>,
    /// Corners of each vertex class in counterclockwise walk order,
    /// starting from the smallest corner.
    pub vertex_classes: Vec<Vec<Corner>>,
    pub vertex_class_of: BTreeMap<Corner, usize>,
    /// Cone angle of each vertex class divided by 2*pi (always >= 1).
    pub cone_turns: Vec<usize>,
}

impl Surface {
    pub fn partner(&self, d: DEdge) -> DEdge {
        self.gluing[&d]
    }

    /// Holonomy vector of a directed edge.
    pub fn hol(&self, d: DEdge) -> Vec2Q {
        self.polygons[d.poly].edge_vec(d.edge)
    }

    pub fn hol_qqi(&self, d: DEdge) -> QQi {
        self.hol(d).to_qqi()
    }

    pub fn num_components(&self) -> usize {
        self.component_names.len()
    }

    /// The corner counterclockwise-next around the same vertex class.
    pub fn next_corner(&self, c: Corner) -> Corner {
        let (p, i) = c;
        let n = self.polygons[p].n();
        let into = DEdge::new(p, (i + n - 1) % n);
        let e = self.partner(into);
        (e.poly, e.edge)
    }

    pub fn class_of(&self, c: Corner) -> usize {
        self.vertex_class_of[&c]
    }

    /// Zero order of a vertex class: cone angle 2*pi*(k+1) gives order k.
    pub fn order_of_class(&self, class: usize) -> usize {
        self.cone_turns[class] - 1
    }

    pub fn is_regular_class(&self, class: usize) -> bool {
        self.cone_turns[class] == 1
    }

    pub fn component_polys(&self, comp: usize) -> Vec<usize> {
        (0..self.polygons.len())
            .filter(|&p| self.poly_component[p] == comp)
            .collect()
    }

    pub fn component_of_class(&self, class: usize) -> usize {
        self.poly_component[self.vertex_classes[class][0].0]
    }

    pub fn area2(&self) -> Rat {
        self.polygons.iter().map(|p| p.area2()).sum()
    }

    pub fn component_area2(&self, comp: usize) -> Rat {
        self.component_polys(comp)
            .into_iter()
            .map(|p| self.polygons[p].area2())
            .sum()
    }

    /// Genus of one component from its Euler characteristic.
    pub fn genus_of_component(&self, comp: usize) -> usize {
        let f = self.component_polys(comp).len();
        let e = self
            .edge_classes
            .iter()
            .filter(|(d, _)| self.poly_component[d.poly] == comp)
            .count();
        let v = (0..self.vertex_classes.len())
            .filter(|&c| self.component_of_class(c) == comp)
            .count();
        let chi = v as i64 - e as i64 + f as i64;
        debug_assert!(chi <= 2 && chi % 2 == 0);
        ((2 - chi) / 2) as usize
    }

    /// Orders of the distinguished points of one component, singular orders
    /// descending followed by one zero per marked point.
    pub fn signature_of_component(&self, comp: usize) -> Vec<usize> {
        let mut orders: Vec<usize> = (0..self.vertex_classes.len())
            .filter(|&c| self.component_of_class(c) == comp)
            .map(|c| self.order_of_class(c))
            .collect();
        orders.sort_unstable_by(|a, b| b.cmp(a));
        orders
    }

    /// Stratum label like "H(2)", "H(1,1)" or "H(0)xH(0)" for several
    /// components.
    pub fn stratum_string(&self) -> String {
        (0..self.num_components())
            .map(|comp| {
                let sig = self.signature_of_component(comp);
                let inner = sig
                    .iter()
                    .map(|o| o.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("H({})", inner)
            })
            .collect::<Vec<_>>()
            .join("x")
    }

    pub fn singular_classes(&self) -> Vec<usize> {
        (0..self.vertex_classes.len())
            .filter(|&c| !self.is_regular_class(c))
            .collect()
    }

    /// Construct and fully validate a surface.
    ///
    /// `gluing_pairs` lists each unordered edge pair once; `marked` lists
    /// corners whose vertex classes carry marked points. Regular classes left
    /// unmarked are marked automatically with a warning, marks requested on
    /// cone points are dropped with a warning.
    pub fn build(
        polygons: Vec<Polygon>,
        poly_component: Vec<usize>,
        component_names: Vec<String>,
        gluing_pairs: &[(DEdge, DEdge)],
        marked: &[Corner],
    ) -> Result<Surface> {
        if polygons.is_empty() {
            return Err(Error::InvalidPolygon("surface has no polygons".into()));
        }
        if poly_component.len() != polygons.len() {
            return Err(Error::Internal(
                "component assignment length mismatch".into(),
            ));
        }
        let ncomp = component_names.len();
        {
            let mut seen = BTreeSet::new();
            for name in &component_names {
                if !seen.insert(name.clone()) {
                    return Err(Error::NotConnected(format!(
                        "duplicate component name {:?}",
                        name
                    )));
                }
            }
        }
        for (p, &c) in poly_component.iter().enumerate() {
            if c >= ncomp {
                return Err(Error::Internal(format!(
                    "polygon {} assigned to undeclared component {}",
                    p, c
                )));
            }
        }
        for comp in 0..ncomp {
            if !poly_component.contains(&comp) {
                return Err(Error::NotConnected(format!(
                    "component {:?} has no polygons",
                    component_names[comp]
                )));
            }
        }
        for (i, poly) in polygons.iter().enumerate() {
            poly.validate()
                .map_err(|e| Error::InvalidPolygon(format!("polygon {}: {}", i, e)))?;
        }

        let mut gluing: BTreeMap<DEdge, DEdge> = BTreeMap::new();
        for &(a, b) in gluing_pairs {
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
            if ha + hb != Vec2Q::zero() {
                return Err(Error::GluingMismatch(format!(
                    "edges {} and {} are glued but not anti-parallel translates",
                    a, b
                )));
            }
            if poly_component[a.poly] != poly_component[b.poly] {
                return Err(Error::NotConnected(format!(
                    "gluing {} ~ {} joins distinct declared components {:?} and {:?}",
                    a,
                    b,
                    component_names[poly_component[a.poly]],
                    component_names[poly_component[b.poly]]
                )));
            }
        }

        // Connectivity of each declared component through the gluing graph.
        for comp in 0..ncomp {
            let polys: Vec<usize> = (0..polygons.len())
                .filter(|&p| poly_component[p] == comp)
                .collect();
            let mut seen: BTreeSet<usize> = BTreeSet::new();
            let mut queue = VecDeque::new();
            seen.insert(polys[0]);
            queue.push_back(polys[0]);
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
                    "component {:?} splits into disconnected pieces ({} of {} polygons reachable)",
                    component_names[comp],
                    seen.len(),
                    polys.len()
                )));
            }
        }

        // Edge classes.
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

        // Vertex classes by the counterclockwise corner walk, and the number
        // of full turns (cone angle / 2pi) accumulated along each cycle.
        let next_corner = |c: Corner| -> Corner {
            let (p, i) = c;
            let n = polygons[p].n();
            let e = gluing[&DEdge::new(p, (i + n - 1) % n)];
            (e.poly, e.edge)
        };
        let mut vertex_classes: Vec<Vec<Corner>> = Vec::new();
        let mut vertex_class_of: BTreeMap<Corner, usize> = BTreeMap::new();
        let mut cone_turns: Vec<usize> = Vec::new();
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
                let mut turns = 0usize;
                for &(cp, ci) in &cycle {
                    vertex_class_of.insert((cp, ci), id);
                    let n = polygons[cp].n();
                    let u = polygons[cp].edge_vec(ci);
                    let w = -polygons[cp].edge_vec((ci + n - 1) % n);
                    // The corner sweeps counterclockwise from u to w through
                    // an angle in (0, 2pi); it passes the east ray exactly
                    // when w sits at or before u in counterclockwise order.
                    match geom::cmp_ccw(&w, &u) {
                        Ordering::Less => turns += 1,
                        Ordering::Equal => {
                            if w == u || geom::same_dir(&u, &w) {
                                return Err(Error::AngleError(format!(
                                    "degenerate corner at polygon {} vertex {}",
                                    cp, ci
                                )));
                            }
                        }
                        Ordering::Greater => {}
                    }
                }
                if turns == 0 {
                    return Err(Error::AngleError(format!(
                        "vertex class through polygon {} vertex {} has cone angle 0",
                        p, i
                    )));
                }
                vertex_classes.push(cycle);
                cone_turns.push(turns);
            }
        }

        // Gauss-Bonnet per component, as an internal consistency check.
        #[cfg(debug_assertions)]
        for comp in 0..ncomp {
            let order_sum: i64 = (0..vertex_classes.len())
                .filter(|&c| poly_component[vertex_classes[c][0].0] == comp)
                .map(|c| cone_turns[c] as i64 - 1)
                .sum();
            let f = poly_component.iter().filter(|&&c| c == comp).count() as i64;
            let e = edge_classes
                .iter()
                .filter(|(d, _)| poly_component[d.poly] == comp)
                .count() as i64;
            let v = (0..vertex_classes.len())
                .filter(|&c| poly_component[vertex_classes[c][0].0] == comp)
                .count() as i64;
            debug_assert_eq!(order_sum, e - v - f, "Gauss-Bonnet violated in component {}", comp);
        }

        let mut warnings = Vec::new();
        let mut marks: BTreeSet<usize> = BTreeSet::new();
        for &c in marked {
            let (p, i) = c;
            if p >= polygons.len() || i >= polygons[p].n() {
                return Err(Error::Internal(format!(
                    "marked corner ({}, {}) does not exist",
                    p, i
                )));
            }
            let class = vertex_class_of[&c];
            if cone_turns[class] == 1 {
                marks.insert(class);
            } else {
                warnings.push(format!(
                    "mark at polygon {} vertex {} sits on a cone point of angle {}pi; ignored",
                    p,
                    i,
                    2 * cone_turns[class]
                ));
            }
        }
        for class in 0..vertex_classes.len() {
            if cone_turns[class] == 1 && !marks.contains(&class) {
                let (p, i) = vertex_classes[class][0];
                warnings.push(format!(
                    "regular vertex class through polygon {} vertex {} was not marked; marking it",
                    p, i
                ));
                marks.insert(class);
            }
        }

        Ok(Surface {
            polygons,
            poly_component,
            component_names,
            gluing,
            marks,
            warnings,
            edge_classes,
            edge_class_of,
            vertex_classes,
            vertex_class_of,
            cone_turns,
        })
    }

    /// Single-component convenience constructor.
    pub fn build_connected(
        polygons: Vec<Polygon>,
        gluing_pairs: &[(DEdge, DEdge)],
        marked: &[Corner],
    ) -> Result<Surface> {
        let n = polygons.len();
        Surface::build(polygons, vec![0; n], vec!["c0".into()], gluing_pairs, marked)
    }

    /// Square-tiled surface from two permutations of {0, .., n-1}: the right
    /// edge of square i meets the left edge of h[i], the top of i meets the
    /// bottom of v[i]. Edges are numbered 0 bottom, 1 right, 2 top, 3 left.
    pub fn origami(h: &[usize], v: &[usize]) -> Result<Surface> {
        let n = h.len();
        if n == 0 || v.len() != n {
            return Err(Error::Internal(
                "origami permutations must be nonempty and of equal length".into(),
            ));
        }
        for perm in [h, v] {
            let mut seen = vec![false; n];
            for &x in perm {
                if x >= n || seen[x] {
                    return Err(Error::Internal(format!(
                        "not a permutation of 0..{}",
                        n
                    )));
                }
                seen[x] = true;
            }
        }
        let polygons = vec![Polygon::unit_square(); n];
        let mut pairs = Vec::new();
        for i in 0..n {
            pairs.push((DEdge::new(i, 1), DEdge::new(h[i], 3)));
            pairs.push((DEdge::new(i, 2), DEdge::new(v[i], 0)));
        }
        Surface::build_connected(polygons, &pairs, &[]).map_err(|e| match e {
            Error::NotConnected(_) => Error::NotConnected(
                "origami permutations do not act transitively".into(),
            ),
            other => other,
        })
    }

    /// Apply a nondegenerate 2x2 rational matrix [[a, b], [c, d]] to every
    /// chart. Negative determinant reverses orientation, so polygon boundaries
    /// are re-indexed to stay counterclockwise.
    pub fn apply_gl2(&self, a: &Rat, b: &Rat, c: &Rat, d: &Rat) -> Result<Surface> {
        let det = a.clone() * d.clone() - b.clone() * c.clone();
        if det.is_zero() {
            return Err(Error::DegenerateMatrix(
                "matrix has determinant zero".into(),
            ));
        }
        let tf = |v: &Vec2Q| -> Vec2Q {
            Vec2Q::new(
                a.clone() * v.x.clone() + b.clone() * v.y.clone(),
                c.clone() * v.x.clone() + d.clone() * v.y.clone(),
            )
        };
        let flip = det < Rat::zero();
        let mut polygons = Vec::with_capacity(self.polygons.len());
        for poly in &self.polygons {
            let n = poly.n();
            let verts: Vec<Vec2Q> = if flip {
                (0..n).map(|j| tf(&poly.vertices[(n - j) % n])).collect()
            } else {
                poly.vertices.iter().map(|v| tf(v)).collect()
            };
            polygons.push(Polygon::new(verts));
        }
        let remap = |d: DEdge| -> DEdge {
            if flip {
                let n = self.polygons[d.poly].n();
                DEdge::new(d.poly, n - 1 - d.edge)
            } else {
                d
            }
        };
        let pairs: Vec<(DEdge, DEdge)> = self
            .edge_classes
            .iter()
            .map(|&(x, y)| (remap(x), remap(y)))
            .collect();
        let marked: Vec<Corner> = self
            .marks
            .iter()
            .map(|&class| {
                let (p, i) = self.vertex_classes[class][0];
                if flip {
                    let n = self.polygons[p].n();
                    (p, (n - i) % n)
                } else {
                    (p, i)
                }
            })
            .collect();
        Surface::build(
            polygons,
            self.poly_component.clone(),
            self.component_names.clone(),
            &pairs,
            &marked,
        )
    }

    fn bfs_key(&self, root: DEdge) -> (Vec<String>, Vec<usize>, BTreeMap<usize, usize>) {
        let comp = self.poly_component[root.poly];
        let mut order: Vec<usize> = Vec::new();
        let mut rot: BTreeMap<usize, usize> = BTreeMap::new();
        let mut new_id: BTreeMap<usize, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        new_id.insert(root.poly, 0);
        rot.insert(root.poly, root.edge);
        order.push(root.poly);
        queue.push_back(root.poly);
        while let Some(p) = queue.pop_front() {
            let n = self.polygons[p].n();
            let r = rot[&p];
            for j in 0..n {
                let e = DEdge::new(p, (r + j) % n);
                let q = self.gluing[&e];
                if !new_id.contains_key(&q.poly) {
                    new_id.insert(q.poly, order.len());
                    rot.insert(q.poly, q.edge);
                    order.push(q.poly);
                    queue.push_back(q.poly);
                }
            }
        }
        let mut key: Vec<String> = Vec::new();
        key.push(format!("np={}", order.len()));
        for &p in &order {
            let poly = &self.polygons[p];
            let n = poly.n();
            let r = rot[&p];
            key.push(format!("p:{}", n));
            for j in 0..n {
                let v = poly.edge_vec((r + j) % n);
                key.push(fmt_rat(&v.x));
                key.push(fmt_rat(&v.y));
            }
        }
        for &p in &order {
            let n = self.polygons[p].n();
            let r = rot[&p];
            for j in 0..n {
                let e = DEdge::new(p, (r + j) % n);
                let q = self.gluing[&e];
                let qn = self.polygons[q.poly].n();
                let qj = (q.edge + qn - rot[&q.poly]) % qn;
                key.push(format!("g:{}:{}", new_id[&q.poly], qj));
            }
        }
        let mut mark_tokens: Vec<String> = Vec::new();
        for &class in &self.marks {
            if self.component_of_class(class) != comp {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &(p, i) in &self.vertex_classes[class] {
                let n = self.polygons[p].n();
                let ni = (i + n - rot[&p]) % n;
                let cand = (new_id[&p], ni);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
            let (mp, mi) = best.unwrap();
            mark_tokens.push(format!("m:{}:{}", mp, mi));
        }
        mark_tokens.sort();
        key.extend(mark_tokens);
        (key, order, rot)
    }

    /// Relabeling-minimal presentation: for each component the breadth-first
    /// serialization is minimized over all root edges, components are sorted
    /// by their serializations and renamed c0, c1, ..., and every polygon is
    /// translated to put its first vertex at the origin.
    pub fn canonical_form(&self) -> Surface {
        let mut per_comp: Vec<(Vec<String>, Vec<usize>, BTreeMap<usize, usize>)> = Vec::new();
        for comp in 0..self.num_components() {
            let mut best: Option<(Vec<String>, Vec<usize>, BTreeMap<usize, usize>)> = None;
            for p in self.component_polys(comp) {
                for e in 0..self.polygons[p].n() {
                    let cand = self.bfs_key(DEdge::new(p, e));
                    if best.as_ref().map_or(true, |b| cand.0 < b.0) {
                        best = Some(cand);
                    }
                }
            }
            per_comp.push(best.unwrap());
        }
        let mut comp_order: Vec<usize> = (0..self.num_components()).collect();
        comp_order.sort_by(|&a, &b| per_comp[a].0.cmp(&per_comp[b].0).then(a.cmp(&b)));

        let mut polygons = Vec::new();
        let mut poly_component = Vec::new();
        let mut old_to_new: BTreeMap<usize, usize> = BTreeMap::new();
        for (nc, &comp) in comp_order.iter().enumerate() {
            let (_, order, rot) = &per_comp[comp];
            for &p in order {
                let n = self.polygons[p].n();
                let r = rot[&p];
                let mut verts = vec![Vec2Q::zero()];
                for j in 0..n - 1 {
                    let prev = verts[j].clone();
                    verts.push(prev + self.polygons[p].edge_vec((r + j) % n));
                }
                old_to_new.insert(p, polygons.len());
                polygons.push(Polygon::new(verts));
                poly_component.push(nc);
            }
        }
        let remap = |d: DEdge| -> DEdge {
            let comp = self.poly_component[d.poly];
            let rot = &per_comp[comp].2;
            let n = self.polygons[d.poly].n();
            DEdge::new(old_to_new[&d.poly], (d.edge + n - rot[&d.poly]) % n)
        };
        let pairs: Vec<(DEdge, DEdge)> = self
            .edge_classes
            .iter()
            .map(|&(a, b)| (remap(a), remap(b)))
            .collect();
        let marked: Vec<Corner> = self
            .marks
            .iter()
            .map(|&class| {
                let (p, i) = self.vertex_classes[class][0];
                let comp = self.poly_component[p];
                let rot = &per_comp[comp].2;
                let n = self.polygons[p].n();
                (old_to_new[&p], (i + n - rot[&p]) % n)
            })
            .collect();
        let names: Vec<String> = (0..self.num_components())
            .map(|i| format!("c{}", i))
            .collect();
        Surface::build(polygons, poly_component, names, &pairs, &marked)
            .expect("canonical rebuild of a valid surface cannot fail")
    }

    /// Deterministic fingerprint of the canonical form; equal strings mean
    /// equal presentations up to relabeling and per-polygon translation.
    pub fn canonical_key(&self) -> String {
        let canon = self.canonical_form();
        let mut parts: Vec<String> = Vec::new();
        for comp in 0..canon.num_components() {
            let polys = canon.component_polys(comp);
            let root = DEdge::new(polys[0], 0);
            parts.push(canon.bfs_key(root).0.join(" "));
        }
        parts.join(" | ")
    }

    /// Extract the given components (sorted, deduplicated indices) as a
    /// stand-alone surface. Also returns, for each new polygon, its index in
    /// the original surface.
    pub fn subsurface(&self, comps: &[usize]) -> (Surface, Vec<usize>) {
        let mut old_of_new: Vec<usize> = Vec::new();
        let mut new_of_old: BTreeMap<usize, usize> = BTreeMap::new();
        for p in 0..self.polygons.len() {
            if comps.contains(&self.poly_component[p]) {
                new_of_old.insert(p, old_of_new.len());
                old_of_new.push(p);
            }
        }
        let polygons: Vec<Polygon> = old_of_new
            .iter()
            .map(|&p| self.polygons[p].clone())
            .collect();
        let comp_index: BTreeMap<usize, usize> =
            comps.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let poly_component: Vec<usize> = old_of_new
            .iter()
            .map(|&p| comp_index[&self.poly_component[p]])
            .collect();
        let component_names: Vec<String> = comps
            .iter()
            .map(|&c| self.component_names[c].clone())
            .collect();
        let mut pairs = Vec::new();
        for &(a, b) in &self.edge_classes {
            if let Some(&pa) = new_of_old.get(&a.poly) {
                let pb = new_of_old[&b.poly];
                pairs.push((DEdge::new(pa, a.edge), DEdge::new(pb, b.edge)));
            }
        }
        let marked: Vec<Corner> = self
            .marks
            .iter()
            .filter_map(|&m| {
                self.vertex_classes[m]
                    .iter()
                    .find_map(|&(p, i)| new_of_old.get(&p).map(|&np| (np, i)))
            })
            .collect();
        let s = Surface::build(polygons, poly_component, component_names, &pairs, &marked)
            .expect("subsurface of a valid surface is valid");
        (s, old_of_new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_int;

    pub fn square_torus() -> Surface {
        Surface::build_connected(
            vec![Polygon::unit_square()],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 2)),
                (DEdge::new(0, 1), DEdge::new(0, 3)),
            ],
            &[(0, 0)],
        )
        .unwrap()
    }

    /// Three-square L origami: squares 0, 1 side by side, square 2 on top
    /// of square 0.
    pub fn l_origami() -> Surface {
        Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap()
    }

    #[test]
    fn torus_invariants() {
        let t = square_torus();
        assert_eq!(t.vertex_classes.len(), 1);
        assert_eq!(t.cone_turns, vec![1]);
        assert_eq!(t.genus_of_component(0), 1);
        assert_eq!(t.stratum_string(), "H(0)");
        assert_eq!(t.marks.len(), 1);
        assert!(t.warnings.is_empty());
        assert_eq!(t.area2(), rat_int(2));
    }

    #[test]
    fn torus_automark_warns() {
        let t = Surface::build_connected(
            vec![Polygon::unit_square()],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 2)),
                (DEdge::new(0, 1), DEdge::new(0, 3)),
            ],
            &[],
        )
        .unwrap();
        assert_eq!(t.marks.len(), 1);
        assert_eq!(t.warnings.len(), 1);
        assert!(t.warnings[0].contains("marking it"));
    }

    #[test]
    fn l_origami_is_h2() {
        let s = l_origami();
        assert_eq!(s.stratum_string(), "H(2)");
        assert_eq!(s.genus_of_component(0), 2);
        assert_eq!(s.vertex_classes.len(), 1);
        assert_eq!(s.cone_turns, vec![3]);
        assert!(s.marks.is_empty());
    }

    #[test]
    fn origami_connectivity() {
        let err = Surface::origami(&[0, 1], &[0, 1]).unwrap_err();
        assert!(matches!(err, Error::NotConnected(_)));
    }

    #[test]
    fn gluing_validation() {
        let err = Surface::build_connected(
            vec![Polygon::unit_square()],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 1)),
                (DEdge::new(0, 2), DEdge::new(0, 3)),
            ],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::GluingMismatch(_)));

        let err = Surface::build_connected(
            vec![Polygon::unit_square()],
            &[(DEdge::new(0, 0), DEdge::new(0, 2))],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::GluingMismatch(_)));
    }

    #[test]
    fn bad_polygon_rejected() {
        let bowtie = Polygon::new(vec![
            Vec2Q::from_ints(0, 0),
            Vec2Q::from_ints(2, 2),
            Vec2Q::from_ints(2, 0),
            Vec2Q::from_ints(0, 2),
        ]);
        assert!(matches!(bowtie.validate(), Err(Error::InvalidPolygon(_))));

        let cw = Polygon::new(vec![
            Vec2Q::from_ints(0, 0),
            Vec2Q::from_ints(0, 1),
            Vec2Q::from_ints(1, 1),
            Vec2Q::from_ints(1, 0),
        ]);
        assert!(matches!(cw.validate(), Err(Error::InvalidPolygon(_))));

        let straight_ok = Polygon::new(vec![
            Vec2Q::from_ints(0, 0),
            Vec2Q::from_ints(1, 0),
            Vec2Q::from_ints(2, 0),
            Vec2Q::from_ints(2, 1),
            Vec2Q::from_ints(0, 1),
        ]);
        assert!(straight_ok.validate().is_ok());
    }

    #[test]
    fn mark_on_cone_point_ignored() {
        let s = Surface::build_connected(
            vec![
                Polygon::unit_square(),
                Polygon::unit_square(),
                Polygon::unit_square(),
            ],
            &[
                (DEdge::new(0, 1), DEdge::new(1, 3)),
                (DEdge::new(1, 1), DEdge::new(0, 3)),
                (DEdge::new(0, 2), DEdge::new(2, 0)),
                (DEdge::new(2, 2), DEdge::new(0, 0)),
                (DEdge::new(1, 2), DEdge::new(1, 0)),
                (DEdge::new(2, 1), DEdge::new(2, 3)),
            ],
            &[(0, 0)],
        )
        .unwrap();
        assert_eq!(s.stratum_string(), "H(2)");
        assert!(s.marks.is_empty());
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("ignored"));
    }

    #[test]
    fn gl2_action() {
        let s = l_origami();
        let two = rat_int(2);
        let one = rat_int(1);
        let zero = rat_int(0);
        let t = s.apply_gl2(&two, &one, &zero, &one).unwrap();
        assert_eq!(t.stratum_string(), "H(2)");
        assert_eq!(t.area2(), rat_int(2) * s.area2());

        let r = s.apply_gl2(&one, &zero, &zero, &-one.clone()).unwrap();
        assert_eq!(r.stratum_string(), "H(2)");
        assert_eq!(r.area2(), s.area2());

        let err = s.apply_gl2(&one, &one, &one, &one).unwrap_err();
        assert!(matches!(err, Error::DegenerateMatrix(_)));
    }

    #[test]
    fn canonical_form_is_label_invariant() {
        let s = Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap();
        // Same L shape with the square labels permuted by the 3-cycle 0->1->2.
        let t = Surface::origami(&[2, 1, 0], &[0, 2, 1]).unwrap();
        assert_eq!(s.canonical_key(), t.canonical_key());
        assert_eq!(
            s.canonical_form().stratum_string(),
            t.canonical_form().stratum_string()
        );
        let u = square_torus();
        assert_ne!(s.canonical_key(), u.canonical_key());
    }

    #[test]
    fn canonical_form_idempotent() {
        let s = l_origami();
        let c1 = s.canonical_form();
        let c2 = c1.canonical_form();
        assert_eq!(c1.polygons, c2.polygons);
        assert_eq!(c1.gluing, c2.gluing);
        assert_eq!(s.canonical_key(), c1.canonical_key());
    }

    #[test]
    fn two_component_stratum() {
        let s = Surface::build(
            vec![Polygon::unit_square(), Polygon::unit_square()],
            vec![0, 1],
            vec!["a".into(), "b".into()],
            &[
                (DEdge::new(0, 0), DEdge::new(0, 2)),
                (DEdge::new(0, 1), DEdge::new(0, 3)),
                (DEdge::new(1, 0), DEdge::new(1, 2)),
                (DEdge::new(1, 1), DEdge::new(1, 3)),
            ],
            &[(0, 0), (1, 0)],
        )
        .unwrap();
        assert_eq!(s.stratum_string(), "H(0)xH(0)");
        assert_eq!(s.num_components(), 2);
    }

    #[test]
    fn cross_component_gluing_rejected() {
        let err = Surface::build(
            vec![Polygon::unit_square(), Polygon::unit_square()],
            vec![0, 1],
            vec!["a".into(), "b".into()],
            &[
                (DEdge::new(0, 0), DEdge::new(1, 2)),
                (DEdge::new(0, 1), DEdge::new(1, 3)),
                (DEdge::new(1, 0), DEdge::new(0, 2)),
                (DEdge::new(1, 1), DEdge::new(0, 3)),
            ],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotConnected(_)));
    }
}

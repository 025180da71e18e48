//! Homology and cohomology of a surface relative to its distinguished
//! points, with the symplectic pairing.
//!
//! Every vertex of the complex is a distinguished point, so chains relative
//! to Sigma are literally edge chains and a relative cocycle is a functional
//! on edge classes that kills every face boundary. A cocycle is stored as
//! its value vector over the edge classes, in the order of
//! `Surface::edge_classes`, evaluated on the representative direction (the
//! smaller directed edge of each pair).

use crate::error::{Error, Result};
use crate::geom;
use crate::linalg::{self, Mat, Subspace};
use crate::scalar::{QQi, Rat, Vec2Q};
use crate::surface::{DEdge, Surface};
use num_traits::Zero;

/// One triangle of the internal triangulation, with its two independent
/// sides as geometric vectors and as signed edge-class paths.
struct Tri {
    s1: Vec2Q,
    s2: Vec2Q,
    area2: Rat,
    path1: Vec<(usize, i8)>,
    path2: Vec<(usize, i8)>,
}

/// Cached homological data of one surface.
pub struct Homology {
    pub nedges: usize,
    pub ncomponents: usize,
    pub nclasses: usize,
    /// Vertex class at the start/end of each edge-class representative.
    pub start_class: Vec<usize>,
    pub end_class: Vec<usize>,
    /// Holonomy of each edge-class representative.
    pub period: Vec<QQi>,
    /// Face boundary chains over edge classes, one per polygon.
    pub face_boundaries: Vec<Vec<QQi>>,
    /// H^1(X, Sigma): all functionals vanishing on face boundaries.
    pub cocycles: Subspace,
    /// ker(p): functionals supported on vertex-indicator differences.
    pub kerp: Subspace,
    /// The indicator basis of ker(p): one vector xi_v per vertex class,
    /// skipping one class per component.
    pub kerp_basis: Vec<Vec<QQi>>,
    triangles: Vec<Tri>,
}

fn boundary_path(s: &Surface, p: usize, from: usize, to: usize) -> Vec<(usize, i8)> {
    let n = s.polygons[p].n();
    let mut path = Vec::new();
    let mut e = from;
    while e != to {
        let d = DEdge::new(p, e);
        let class = s.edge_class_of[&d];
        let sign = if s.edge_classes[class].0 == d { 1 } else { -1 };
        path.push((class, sign));
        e = (e + 1) % n;
    }
    path
}

impl Homology {
    pub fn new(s: &Surface) -> Homology {
        let nedges = s.edge_classes.len();
        let nclasses = s.vertex_classes.len();
        let ncomponents = s.num_components();

        let mut start_class = Vec::with_capacity(nedges);
        let mut end_class = Vec::with_capacity(nedges);
        let mut period = Vec::with_capacity(nedges);
        for &(rep, _) in &s.edge_classes {
            let n = s.polygons[rep.poly].n();
            start_class.push(s.class_of((rep.poly, rep.edge)));
            end_class.push(s.class_of((rep.poly, (rep.edge + 1) % n)));
            period.push(s.hol_qqi(rep));
        }

        let mut face_boundaries = Vec::with_capacity(s.polygons.len());
        for p in 0..s.polygons.len() {
            let mut chain = vec![QQi::zero(); nedges];
            for e in 0..s.polygons[p].n() {
                let d = DEdge::new(p, e);
                let class = s.edge_class_of[&d];
                let sign = if s.edge_classes[class].0 == d {
                    QQi::one()
                } else {
                    -QQi::one()
                };
                chain[class] += &sign;
            }
            face_boundaries.push(chain);
        }

        let cocycles = Subspace::full(nedges).annihilator_in(&face_boundaries);

        // Indicator cocycles xi_v: +1 on edges ending at v, -1 on edges
        // starting at v. Their sum over a component vanishes, so one class
        // per component is skipped.
        let mut kerp_basis = Vec::new();
        for comp in 0..ncomponents {
            let classes: Vec<usize> = (0..nclasses)
                .filter(|&c| s.component_of_class(c) == comp)
                .collect();
            for &v in classes.iter().take(classes.len() - 1) {
                let mut xi = vec![QQi::zero(); nedges];
                for e in 0..nedges {
                    if end_class[e] == v {
                        xi[e] += &QQi::one();
                    }
                    if start_class[e] == v {
                        xi[e] -= &QQi::one();
                    }
                }
                kerp_basis.push(xi);
            }
        }
        let kerp = Subspace::from_span(&kerp_basis, nedges);

        let mut triangles = Vec::new();
        for (p, poly) in s.polygons.iter().enumerate() {
            for (a, b, c) in geom::ear_clip(&poly.vertices) {
                let s1 = poly.vertices[b].clone() - poly.vertices[a].clone();
                let s2 = poly.vertices[c].clone() - poly.vertices[b].clone();
                let area2 = s1.cross(&s2);
                debug_assert!(area2 > Rat::zero());
                triangles.push(Tri {
                    path1: boundary_path(s, p, a, b),
                    path2: boundary_path(s, p, b, c),
                    s1,
                    s2,
                    area2,
                });
            }
        }

        Homology {
            nedges,
            ncomponents,
            nclasses,
            start_class,
            end_class,
            period,
            face_boundaries,
            cocycles,
            kerp,
            kerp_basis,
            triangles,
        }
    }

    /// dim H^1(X, Sigma) = sum over components of 2g + |Sigma_c| - 1.
    pub fn h1_dim(&self) -> usize {
        self.cocycles.dim()
    }

    /// The period cocycle of the translation structure: edge -> holonomy.
    pub fn period_cocycle(&self) -> Vec<QQi> {
        self.period.clone()
    }

    pub fn is_cocycle(&self, u: &[QQi]) -> bool {
        u.len() == self.nedges
            && self.face_boundaries.iter().all(|f| {
                let mut acc = QQi::zero();
                for e in 0..self.nedges {
                    if !f[e].is_zero() && !u[e].is_zero() {
                        acc += &(&f[e] * &u[e]);
                    }
                }
                acc.is_zero()
            })
    }

    fn eval_path(&self, u: &[QQi], path: &[(usize, i8)]) -> QQi {
        let mut acc = QQi::zero();
        for &(class, sign) in path {
            if sign > 0 {
                acc += &u[class];
            } else {
                acc -= &u[class];
            }
        }
        acc
    }

    /// Value of a cocycle on a directed edge of the surface it was built
    /// from.
    pub fn eval_dedge(&self, s: &Surface, u: &[QQi], d: DEdge) -> QQi {
        let class = s.edge_class_of[&d];
        if s.edge_classes[class].0 == d {
            u[class].clone()
        } else {
            -u[class].clone()
        }
    }

    /// Symplectic pairing <p(u), p(w)> via the wedge integral over the
    /// triangulated surface. Antisymmetric; kills ker(p) on both sides;
    /// <Re omega, Im omega> is the area.
    pub fn pairing(&self, u: &[QQi], w: &[QQi]) -> Result<QQi> {
        if u.len() != self.nedges || w.len() != self.nedges {
            return Err(Error::DimensionMismatch(format!(
                "cocycle length {} or {} does not match edge count {}",
                u.len(),
                w.len(),
                self.nedges
            )));
        }
        let mut total = QQi::zero();
        let half = Rat::new(1.into(), 2.into());
        for t in &self.triangles {
            let u1 = self.eval_path(u, &t.path1);
            let u2 = self.eval_path(u, &t.path2);
            let w1 = self.eval_path(w, &t.path1);
            let w2 = self.eval_path(w, &t.path2);
            // Solve a*sx + b*sy = value on both sides to write each cocycle
            // as a dx + b dy on the triangle; Cramer denominators equal the
            // doubled triangle area.
            let det = &t.area2;
            let au = u1.scale(&t.s2.y) - &u2.scale(&t.s1.y);
            let bu = u2.scale(&t.s1.x) - &u1.scale(&t.s2.x);
            let aw = w1.scale(&t.s2.y) - &w2.scale(&t.s1.y);
            let bw = w2.scale(&t.s1.x) - &w1.scale(&t.s2.x);
            // (au*bw - bu*aw)/det^2 * det/2 = (au*bw - bu*aw) / (2 det)
            let contrib = (&au * &bw - &(&bu * &aw)).scale(&(half.clone() / det));
            total += &contrib;
        }
        Ok(total)
    }

    /// Gram matrix of the pairing on a list of cocycles.
    pub fn gram(&self, vecs: &[Vec<QQi>]) -> Result<Mat> {
        let n = vecs.len();
        let mut m = Mat::zero(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.pairing(&vecs[i], &vecs[j])?;
                m.rows[j][i] = -v.clone();
                m.rows[i][j] = v;
            }
        }
        Ok(m)
    }

    /// Rank of the pairing restricted to a subspace; always even.
    pub fn pairing_rank(&self, space: &Subspace) -> Result<usize> {
        Ok(linalg::rank(&self.gram(&space.basis)?))
    }

    /// Cycle space Z_1: edge chains with zero boundary.
    pub fn cycle_space(&self) -> Subspace {
        let mut d = Mat::zero(self.nclasses, self.nedges);
        for e in 0..self.nedges {
            d.rows[self.end_class[e]][e] += &QQi::one();
            d.rows[self.start_class[e]][e] -= &QQi::one();
        }
        Subspace::from_span(&linalg::kernel_basis(&d), self.nedges)
    }

    /// Span of the face boundaries inside the chain space.
    pub fn boundary_space(&self) -> Subspace {
        Subspace::from_span(&self.face_boundaries, self.nedges)
    }
}

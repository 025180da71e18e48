//! Tangent spaces of invariant subvarieties as linear subspaces of
//! H^1(X, Sigma; C), with rank, rel and prime decomposition.
//!
//! A tangent space here is a Q(i)-subspace of the relative cocycle space
//! that contains the period cocycle and its conjugate. Multiplication by i
//! is automatic for Q(i) spans; stability under coefficient conjugation is
//! what "defined over the reals" means for user input.

use crate::error::{Error, Result};
use crate::halftrans::Involution;
use crate::homology::Homology;
use crate::linalg::{self, Subspace};
use crate::scalar::QQi;
use crate::surface::{DEdge, Surface};

#[derive(Clone, Debug)]
pub struct TangentSpace {
    pub space: Subspace,
    /// Half the rank of the symplectic pairing restricted to the space.
    pub rank: usize,
    /// Dimension of the purely relative part, space ∩ ker(p).
    pub rel: usize,
}

#[derive(Clone, Debug)]
pub struct PrimeBlock {
    /// Component indices of the original surface in this block.
    pub components: Vec<usize>,
    pub surface: Surface,
    /// Original polygon index of each polygon of `surface`.
    pub poly_origin: Vec<usize>,
    pub tangent: TangentSpace,
}

#[derive(Clone, Debug)]
pub struct PrimeFactorization {
    pub blocks: Vec<PrimeBlock>,
}

impl TangentSpace {
    /// Compute rank and rel of a subspace of the cocycle space and check
    /// the dimension identity dim = 2 rank + rel.
    pub fn analyze(hom: &Homology, space: Subspace) -> Result<TangentSpace> {
        let pairing_rank = hom.pairing_rank(&space)?;
        debug_assert_eq!(pairing_rank % 2, 0, "alternating forms have even rank");
        let rank = pairing_rank / 2;
        let rel = space.intersect(&hom.kerp).dim();
        if space.dim() != 2 * rank + rel {
            return Err(Error::AssumptionFails(format!(
                "dimension {} differs from 2*rank + rel = {}; \
                 the radical of the pairing exceeds the purely relative part",
                space.dim(),
                2 * rank + rel
            )));
        }
        Ok(TangentSpace { space, rank, rel })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// rank >= g/2 + 1, in integer form. Meaningful for connected surfaces.
    pub fn is_high_rank(&self, s: &Surface) -> bool {
        let g: usize = (0..s.num_components()).map(|c| s.genus_of_component(c)).sum();
        2 * self.rank >= g + 2
    }

    /// No rel and rank > (g+s-1)/2: such spaces can only be full stratum
    /// components or quadratic doubles.
    pub fn rank_bound_classifies(&self, s: &Surface) -> bool {
        let g: usize = (0..s.num_components()).map(|c| s.genus_of_component(c)).sum();
        let pts = s.vertex_classes.len();
        self.rel == 0 && 2 * self.rank > g + pts - 1
    }
}

/// Largest genus of the base of a nontrivial translation covering by a
/// genus g surface.
pub fn riemann_hurwitz_bound(g: usize) -> usize {
    (g + 1) / 2
}

/// The tangent space of the whole stratum: every relative cocycle.
pub fn stratum_tangent(s: &Surface, hom: &Homology) -> TangentSpace {
    let _ = s;
    TangentSpace::analyze(hom, hom.cocycles.clone())
        .expect("stratum tangent satisfies the dimension identity")
}

/// Validate a user-supplied basis and package it as a tangent space.
pub fn tangent_from_basis(hom: &Homology, basis: &[Vec<QQi>]) -> Result<TangentSpace> {
    for v in basis {
        if v.len() != hom.nedges {
            return Err(Error::DimensionMismatch(format!(
                "basis vector has {} entries, expected {}",
                v.len(),
                hom.nedges
            )));
        }
        if !hom.is_cocycle(v) {
            return Err(Error::AssumptionFails(
                "basis vector does not vanish on a face boundary".into(),
            ));
        }
    }
    let space = Subspace::from_span(basis, hom.nedges);
    for v in basis {
        let conj: Vec<QQi> = v.iter().map(QQi::conj).collect();
        if !space.contains(&conj) {
            return Err(Error::AssumptionFails(
                "span is not stable under coefficient conjugation".into(),
            ));
        }
    }
    if !space.contains(&hom.period_cocycle()) {
        return Err(Error::AssumptionFails(
            "span does not contain the period cocycle".into(),
        ));
    }
    TangentSpace::analyze(hom, space)
}

/// The anti-invariant subspace {u : J*u = -u} of the cover's cocycles,
/// which is the tangent space of the locus of holonomy double covers.
pub fn quadratic_double_tangent(
    cover: &Surface,
    invol: &Involution,
    hom: &Homology,
) -> Result<TangentSpace> {
    invol.validate(cover)?;
    let mut m = invol.pullback_matrix(cover);
    for i in 0..m.nrows() {
        m.rows[i][i] += &QQi::one();
    }
    let anti = Subspace::from_span(&linalg::kernel_basis(&m), hom.nedges);
    let space = anti.intersect(&hom.cocycles);
    TangentSpace::analyze(hom, space)
}

fn class_component(s: &Surface, class: usize) -> usize {
    s.poly_component[s.edge_classes[class].0.poly]
}

/// Project a tangent space onto the edge classes of a set of components,
/// zeroing all other coordinates.
fn project_components(s: &Surface, t: &Subspace, comps: &[usize]) -> Subspace {
    let span: Vec<Vec<QQi>> = t
        .basis
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(c, z)| {
                    if comps.contains(&class_component(s, c)) {
                        z.clone()
                    } else {
                        QQi::zero()
                    }
                })
                .collect()
        })
        .collect();
    Subspace::from_span(&span, t.dim_ambient)
}

/// Transfer a cocycle of `s`, already supported on the components that form
/// `sub`, to the edge-class coordinates of `sub`.
fn restrict_cocycle(s: &Surface, sub: &Surface, poly_origin: &[usize], v: &[QQi]) -> Vec<QQi> {
    sub.edge_classes
        .iter()
        .map(|&(rep, _)| {
            let old = DEdge::new(poly_origin[rep.poly], rep.edge);
            let c = s.edge_class_of[&old];
            if s.edge_classes[c].0 == old {
                v[c].clone()
            } else {
                -v[c].clone()
            }
        })
        .collect()
}

fn split_once(s: &Surface, t: &Subspace, comps: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let m = comps.len();
    for mask in 0u32..(1 << (m - 1)) {
        let mut left = vec![comps[0]];
        let mut right = Vec::new();
        for (i, &c) in comps.iter().enumerate().skip(1) {
            if mask & (1 << (i - 1)) != 0 {
                left.push(c);
            } else {
                right.push(c);
            }
        }
        if right.is_empty() {
            continue;
        }
        let dl = project_components(s, t, &left).dim();
        let dr = project_components(s, t, &right).dim();
        if dl + dr == t.dim() {
            return Some((left, right));
        }
    }
    None
}

/// Coarsest partition of the components such that the space is the direct
/// sum of its projections to the blocks; each block is returned with its
/// sub-surface and restricted tangent space.
pub fn prime_factorization(
    s: &Surface,
    hom: &Homology,
    t: &TangentSpace,
) -> Result<PrimeFactorization> {
    if t.space.dim_ambient != hom.nedges {
        return Err(Error::NotProduct(format!(
            "tangent space lives in dimension {}, surface has {} edge classes",
            t.space.dim_ambient, hom.nedges
        )));
    }
    if !hom.cocycles.contains_subspace(&t.space) {
        return Err(Error::NotProduct(
            "space is not contained in the sum of the per-component cocycle spaces".into(),
        ));
    }
    let mut queue: Vec<Vec<usize>> = vec![(0..s.num_components()).collect()];
    let mut parts: Vec<Vec<usize>> = Vec::new();
    while let Some(comps) = queue.pop() {
        if comps.len() <= 1 {
            parts.push(comps);
            continue;
        }
        match split_once(s, &t.space, &comps) {
            Some((l, r)) => {
                queue.push(l);
                queue.push(r);
            }
            None => parts.push(comps),
        }
    }
    parts.sort();
    let mut blocks = Vec::new();
    for comps in parts {
        let block_space = project_components(s, &t.space, &comps);
        let (sub, poly_origin) = s.subsurface(&comps);
        let sub_hom = Homology::new(&sub);
        let span: Vec<Vec<QQi>> = block_space
            .basis
            .iter()
            .map(|v| restrict_cocycle(s, &sub, &poly_origin, v))
            .collect();
        let tangent =
            TangentSpace::analyze(&sub_hom, Subspace::from_span(&span, sub_hom.nedges))?;
        if comps.len() > 1 {
            let mut ranks = Vec::new();
            for &c in &comps {
                let pc = project_components(s, &t.space, &[c]);
                ranks.push(hom.pairing_rank(&pc)? / 2);
            }
            if ranks.iter().any(|&r| r != ranks[0]) {
                return Err(Error::AssumptionFails(format!(
                    "components of a prime block report unequal ranks {:?}",
                    ranks
                )));
            }
        }
        blocks.push(PrimeBlock {
            components: comps,
            surface: sub,
            poly_origin,
            tangent,
        });
    }
    debug_assert_eq!(
        blocks.iter().map(|b| b.tangent.dim()).sum::<usize>(),
        t.dim(),
        "prime blocks must reconstruct the space"
    );
    Ok(PrimeFactorization { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Vec2Q;
    use crate::surface::Polygon;

    fn torus() -> Surface {
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

    fn two_tori() -> Surface {
        Surface::build(
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
        .unwrap()
    }

    #[test]
    fn stratum_dimensions() {
        let cases: Vec<(Surface, usize, usize, usize)> = vec![
            (torus(), 2, 1, 0),
            (Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap(), 4, 2, 0),
            (Surface::origami(&[1, 2, 3, 0], &[2, 1, 0, 3]).unwrap(), 5, 2, 1),
        ];
        for (s, dim, rank, rel) in cases {
            let hom = Homology::new(&s);
            let t = stratum_tangent(&s, &hom);
            assert_eq!((t.dim(), t.rank, t.rel), (dim, rank, rel), "{}", s.stratum_string());
        }
    }

    #[test]
    fn from_basis_accepts_stratum_basis() {
        let s = Surface::origami(&[1, 2, 3, 0], &[2, 1, 0, 3]).unwrap();
        let hom = Homology::new(&s);
        let t = tangent_from_basis(&hom, &hom.cocycles.basis).unwrap();
        assert_eq!((t.dim(), t.rank, t.rel), (5, 2, 1));
    }

    #[test]
    fn from_basis_rejects_bad_input() {
        let s = torus();
        let hom = Homology::new(&s);
        // A single face relation violator.
        let mut bad = vec![QQi::zero(); hom.nedges];
        bad[0] = QQi::one();
        let err = tangent_from_basis(&hom, &[bad]).unwrap_err();
        assert!(matches!(err, Error::AssumptionFails(_)));
        // The complex line spanned by omega alone: not conjugation stable.
        let err = tangent_from_basis(&hom, &[hom.period_cocycle()]).unwrap_err();
        assert!(matches!(err, Error::AssumptionFails(_)));
        // Wrong ambient dimension.
        let err = tangent_from_basis(&hom, &[vec![QQi::one()]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn orbit_tangent_of_torus() {
        // span{omega, conj(omega)} is the complexified GL2 orbit direction:
        // dim 2, rank 1, rel 0.
        let s = torus();
        let hom = Homology::new(&s);
        let omega = hom.period_cocycle();
        let conj: Vec<QQi> = omega.iter().map(QQi::conj).collect();
        let t = tangent_from_basis(&hom, &[omega, conj]).unwrap();
        assert_eq!((t.dim(), t.rank, t.rel), (2, 1, 0));
        assert!(!t.is_high_rank(&s));
    }

    #[test]
    fn high_rank_examples() {
        let h2 = Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap();
        let hom = Homology::new(&h2);
        let t = stratum_tangent(&h2, &hom);
        assert!(t.is_high_rank(&h2));
        assert!(t.rank_bound_classifies(&h2));
        let h11 = Surface::origami(&[1, 2, 3, 0], &[2, 1, 0, 3]).unwrap();
        let hom11 = Homology::new(&h11);
        let t11 = stratum_tangent(&h11, &hom11);
        assert!(t11.is_high_rank(&h11));
        assert!(!t11.rank_bound_classifies(&h11));
        assert_eq!(riemann_hurwitz_bound(3), 2);
        assert_eq!(riemann_hurwitz_bound(2), 1);
    }

    #[test]
    fn product_stratum_splits() {
        let s = two_tori();
        let hom = Homology::new(&s);
        let t = stratum_tangent(&s, &hom);
        assert_eq!((t.dim(), t.rank, t.rel), (4, 2, 0));
        let pf = prime_factorization(&s, &hom, &t).unwrap();
        assert_eq!(pf.blocks.len(), 2);
        for b in &pf.blocks {
            assert_eq!(b.tangent.rank, 1);
            assert_eq!(b.tangent.dim(), 2);
            assert_eq!(b.surface.stratum_string(), "H(0)");
        }
        assert_eq!(pf.blocks[0].components, vec![0]);
        assert_eq!(pf.blocks[1].components, vec![1]);
    }

    #[test]
    fn diagonal_locus_is_prime() {
        let s = two_tori();
        let hom = Homology::new(&s);
        // Pair up the edge classes of the two identical tori.
        let n = hom.nedges;
        let mut basis = Vec::new();
        for c in 0..n / 2 {
            let mut v = vec![QQi::zero(); n];
            v[c] = QQi::one();
            v[c + n / 2] = QQi::one();
            basis.push(v);
        }
        let t = tangent_from_basis(&hom, &basis).unwrap();
        assert_eq!((t.dim(), t.rank, t.rel), (2, 1, 0));
        let pf = prime_factorization(&s, &hom, &t).unwrap();
        assert_eq!(pf.blocks.len(), 1);
        assert_eq!(pf.blocks[0].components, vec![0, 1]);
        assert_eq!(pf.blocks[0].tangent.rank, 1);
    }

    #[test]
    fn not_product_on_wrong_surface() {
        let s = two_tori();
        let hom = Homology::new(&s);
        let other = torus();
        let other_hom = Homology::new(&other);
        let t = stratum_tangent(&other, &other_hom);
        let err = prime_factorization(&s, &hom, &t).unwrap_err();
        assert!(matches!(err, Error::NotProduct(_)));
    }

    #[test]
    fn pillowcase_quadratic_tangent() {
        let q = crate::halftrans::tests::pillowcase();
        let (cover, invol) = q.holonomy_double_cover().unwrap();
        let hom = Homology::new(&cover);
        let t = quadratic_double_tangent(&cover, &invol, &hom).unwrap();
        assert_eq!((t.dim(), t.rank, t.rel), (2, 1, 0));
        assert!(t.space.contains(&hom.period_cocycle()));
        let bad = Involution {
            poly_map: (0..cover.polygons.len()).collect(),
        };
        let err = quadratic_double_tangent(&cover, &bad, &hom).unwrap_err();
        assert!(matches!(err, Error::InvolutionMismatch(_)));
    }

    #[test]
    fn subsurface_extraction() {
        let s = two_tori();
        let (sub, origin) = s.subsurface(&[1]);
        assert_eq!(sub.num_components(), 1);
        assert_eq!(origin, vec![1]);
        assert_eq!(sub.stratum_string(), "H(0)");
        assert_eq!(sub.component_names, vec!["b".to_string()]);
        let _ = Vec2Q::from_ints(0, 0);
    }
}

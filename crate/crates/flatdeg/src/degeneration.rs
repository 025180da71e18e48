//! Collapse of an equivalence class of parallel cylinders along a twist
//! direction: the limit surface, its cell correspondence with the source,
//! vanishing cycles, the boundary tangent space, and the directed graph of
//! collapsed connections with the rank dichotomy.
//!
//! The whole construction happens in the frame of the collapse direction d:
//! "x" is dot(d, .) and "y" is cross(d, .), matching the cylinder module.
//! Every cylinder is cut open along a straight chord between two boundary
//! vertices and unrolled into a parallelogram strip. Twisting along the
//! class moves the top sides of the member strips and shrinks their
//! heights; at the collapse time the collapsing strips are flat and their
//! two boundary circles are identified by translation. Surviving strips are
//! re-glued through the flattened ones, which is where saddle connections
//! get subdivided, merged, or disappear. The final surface is rotated back
//! into the original coordinates.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cylinders::{
    self, desc_point, eval_chain, frame_dot, frame_im, frame_x, frame_y, path_class, CylClass,
    Desc, PeriodicDecomposition, Tracer, Visit,
};
use crate::error::{Error, Result};
use crate::geom;
use crate::homology::Homology;
use crate::linalg::{kernel_basis, Mat, Subspace};
use crate::scalar::{rat_int, rat_mod, Rat, Vec2Q, QQi};
use crate::surface::{DEdge, Polygon, Surface};
use crate::tangent::TangentSpace;

// ---------------------------------------------------------------------------
// Strip presentation of a periodic direction.

/// One cylinder cut open along a chord and unrolled in frame coordinates.
///
/// The chord runs from the start vertex of the first bottom connection
/// straight up across the cylinder, then east along the connection it lands
/// on until that connection's end vertex. Cutting along it leaves a
/// parallelogram: the bottom side spans [x0, x0 + c] where x0 is the foot
/// position, the top side spans [xt, xt + c] where xt = x0 + run and run is
/// the dot(d, .) extent of the chord path.
#[derive(Clone, Debug)]
pub(crate) struct Strip {
    /// (saddle, unrolled start position) along the bottom side, ascending;
    /// first entry is the chord foot.
    pub(crate) bottom: Vec<(usize, Rat)>,
    /// Same along the top side; first entry starts at the chord head.
    pub(crate) top: Vec<(usize, Rat)>,
    /// The chord path, from the foot vertex to the head vertex.
    pub(crate) chord: Vec<Visit>,
    /// Relative class of the chord path.
    pub(crate) chord_chain: Vec<QQi>,
}

impl Strip {
    pub(crate) fn foot(&self) -> &Rat {
        &self.bottom[0].1
    }

    pub(crate) fn head(&self) -> &Rat {
        &self.top[0].1
    }
}

#[derive(Clone, Debug)]
pub(crate) struct StripModel {
    pub(crate) strips: Vec<Strip>,
}

pub(crate) fn strip_model(s: &Surface, dec: &PeriodicDecomposition) -> Result<StripModel> {
    let d = &dec.direction;
    let bound = cylinders::step_bound(s);
    let chunks = cylinders::chunk_list(s, &dec.saddles);
    let mut strips = Vec::with_capacity(dec.cylinders.len());
    for cyl in &dec.cylinders {
        let c = &cyl.circumference;
        let chord = cylinders::chord_visits(s, d, bound, &dec.saddles, &chunks, cyl.bottom[0])?;
        let chord_chain = path_class(s, &chord);
        let mut run = Rat::zero();
        let mut rise = Rat::zero();
        for v in &chord {
            let delta = v.delta(s);
            run += frame_x(d, &delta);
            rise += frame_y(d, &delta);
        }
        debug_assert_eq!(rise, cyl.height, "chord does not cross its cylinder once");
        #[cfg(debug_assertions)]
        for (j, other) in dec.cylinders.iter().enumerate() {
            let want = if std::ptr::eq(other, cyl) { QQi::one() } else { QQi::zero() };
            debug_assert_eq!(eval_chain(&other.core_dual, &chord_chain), want, "chord crossing {}", j);
        }

        let mut bottom = Vec::with_capacity(cyl.bottom.len());
        let mut x = dec.bot_x[cyl.bottom[0]].clone();
        for &i in &cyl.bottom {
            debug_assert!(rat_mod(&(&x - &dec.bot_x[i]), c).is_zero());
            bottom.push((i, x.clone()));
            x += &dec.saddles[i].length;
        }
        debug_assert_eq!(x, bottom[0].1.clone() + c);

        let xt = bottom[0].1.clone() + run;
        let mut k0 = None;
        for (k, &j) in cyl.top.iter().enumerate() {
            if rat_mod(&(&xt - &dec.top_x[j]), c).is_zero() {
                debug_assert!(k0.is_none(), "two top connections at the chord head");
                k0 = Some(k);
            }
        }
        let Some(k0) = k0 else {
            return Err(Error::Internal("chord head is not a top vertex".into()));
        };
        #[cfg(debug_assertions)]
        {
            let last = chord.last().expect("chord has visits");
            debug_assert!(last.exit.1.is_zero());
            let head_class = s.class_of((last.poly, last.exit.0));
            debug_assert_eq!(head_class, dec.saddles[cyl.top[k0]].start_class);
        }
        let m = cyl.top.len();
        let mut top = Vec::with_capacity(m);
        let mut x = xt.clone();
        for k in 0..m {
            let j = cyl.top[(k0 + k) % m];
            debug_assert!(rat_mod(&(&x - &dec.top_x[j]), c).is_zero());
            top.push((j, x.clone()));
            x += &dec.saddles[j].length;
        }
        debug_assert_eq!(x, &xt + c);

        strips.push(Strip { bottom, top, chord, chord_chain });
    }
    Ok(StripModel { strips })
}

/// Piece subdivision and polygons of the alive strips, still in frame
/// coordinates. Edge layout of a strip polygon with m bottom pieces and l
/// top pieces: edges 0..m are the bottom pieces left to right, edge m is
/// the right chord, edge m + l - r is top piece r (counted left to right),
/// edge m + l + 1 is the left chord.
struct StripParts {
    poly_of: Vec<Option<usize>>,
    cyl_of: Vec<usize>,
    polygons: Vec<Polygon>,
    /// (saddle, offset from, offset to) per bottom piece, ascending.
    bottom: Vec<Vec<(usize, Rat, Rat)>>,
    top: Vec<Vec<(usize, Rat, Rat)>>,
}

impl StripParts {
    fn right_edge(&self, p: usize) -> usize {
        self.bottom[p].len()
    }

    fn top_edge(&self, p: usize, r: usize) -> usize {
        self.bottom[p].len() + self.top[p].len() - r
    }

    fn left_edge(&self, p: usize) -> usize {
        self.bottom[p].len() + self.top[p].len() + 1
    }
}

type CutSet = BTreeMap<usize, BTreeSet<Rat>>;

fn side_points(
    word: &[(usize, Rat)],
    lengths: &dyn Fn(usize) -> Rat,
    cuts: &CutSet,
    shift: &Rat,
) -> Vec<(usize, Rat, Rat)> {
    let mut pts: Vec<(usize, Rat, Rat)> = Vec::new();
    for (i, pos) in word {
        let mut offs: Vec<Rat> = vec![Rat::zero()];
        if let Some(cs) = cuts.get(i) {
            for u in cs {
                debug_assert!(u.is_positive() && *u < lengths(*i));
                offs.push(u.clone());
            }
        }
        for u in offs {
            pts.push((*i, pos + &u + shift, u));
        }
    }
    pts
}

/// Build the alive strip polygons at the given heights and top shifts, with
/// the given cut points subdividing saddle connections. A cylinder is alive
/// when its height is positive.
fn strip_parts(
    dec: &PeriodicDecomposition,
    model: &StripModel,
    heights: &[Rat],
    shifts: &[Rat],
    cuts: &CutSet,
) -> StripParts {
    let lengths = |i: usize| dec.saddles[i].length.clone();
    let mut parts = StripParts {
        poly_of: vec![None; dec.cylinders.len()],
        cyl_of: Vec::new(),
        polygons: Vec::new(),
        bottom: Vec::new(),
        top: Vec::new(),
    };
    for (ci, strip) in model.strips.iter().enumerate() {
        if !heights[ci].is_positive() {
            continue;
        }
        let c = &dec.cylinders[ci].circumference;
        let h = &heights[ci];
        let bpts = side_points(&strip.bottom, &lengths, cuts, &Rat::zero());
        let tpts = side_points(&strip.top, &lengths, cuts, &shifts[ci]);
        let mut verts: Vec<Vec2Q> = Vec::new();
        for (_, x, _) in &bpts {
            verts.push(Vec2Q::new(x.clone(), Rat::zero()));
        }
        verts.push(Vec2Q::new(&bpts[0].1 + c, Rat::zero()));
        verts.push(Vec2Q::new(&tpts[0].1 + c, h.clone()));
        for (_, x, _) in tpts.iter().skip(1).rev() {
            verts.push(Vec2Q::new(x.clone(), h.clone()));
        }
        verts.push(Vec2Q::new(tpts[0].1.clone(), h.clone()));

        let piece_list = |pts: &[(usize, Rat, Rat)]| -> Vec<(usize, Rat, Rat)> {
            let mut out = Vec::with_capacity(pts.len());
            for (k, (i, _, u)) in pts.iter().enumerate() {
                let end = if k + 1 < pts.len() && pts[k + 1].0 == *i {
                    pts[k + 1].2.clone()
                } else {
                    lengths(*i)
                };
                debug_assert!(*u < end);
                out.push((*i, u.clone(), end));
            }
            out
        };
        parts.poly_of[ci] = Some(parts.polygons.len());
        parts.cyl_of.push(ci);
        parts.polygons.push(Polygon::new(verts));
        parts.bottom.push(piece_list(&bpts));
        parts.top.push(piece_list(&tpts));
    }
    parts
}

/// Assemble a surface from strip polygons, the per-strip chord gluings, and
/// an explicit bottom-to-top piece pairing ((poly, k), (poly, r)). The
/// result is rotated back from the frame of d into surface coordinates.
/// Components are split along gluing reachability and named in polygon
/// order.
fn build_from_parts(
    d: &Vec2Q,
    parts: &StripParts,
    pairing: &[((usize, usize), (usize, usize))],
) -> Result<Surface> {
    let npoly = parts.polygons.len();
    let mut gluings: Vec<(DEdge, DEdge)> = Vec::new();
    for p in 0..npoly {
        gluings.push((DEdge::new(p, parts.right_edge(p)), DEdge::new(p, parts.left_edge(p))));
    }
    let mut root: Vec<usize> = (0..npoly).collect();
    fn find(root: &mut Vec<usize>, mut a: usize) -> usize {
        while root[a] != a {
            root[a] = root[root[a]];
            a = root[a];
        }
        a
    }
    for ((bp, bk), (tp, tr)) in pairing {
        gluings.push((DEdge::new(*bp, *bk), DEdge::new(*tp, parts.top_edge(*tp, *tr))));
        let (ra, rb) = (find(&mut root, *bp), find(&mut root, *tp));
        root[ra] = rb;
    }
    let mut comp_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut poly_component = Vec::with_capacity(npoly);
    for p in 0..npoly {
        let r = find(&mut root, p);
        let next = comp_id.len();
        poly_component.push(*comp_id.entry(r).or_insert(next));
    }
    let names = (0..comp_id.len()).map(|k| format!("c{}", k)).collect();
    let flat = Surface::build(parts.polygons.clone(), poly_component, names, &gluings, &[])?;
    let (a, b) = (&d.x, &d.y);
    let n2 = a.clone() * a.clone() + b.clone() * b.clone();
    let rotated = flat.apply_gl2(&(a / &n2), &(-b.clone() / &n2), &(b / &n2), &(a / &n2))?;
    debug_assert_eq!(rotated.edge_classes, flat.edge_classes);
    debug_assert_eq!(rotated.vertex_classes, flat.vertex_classes);
    Ok(rotated)
}

/// Cut every cylinder open along its chord and rebuild the surface from the
/// parallelogram strips, without any deformation. The result is the same
/// translation surface in a different polygon presentation.
pub(crate) fn strip_surface(s: &Surface, dec: &PeriodicDecomposition) -> Result<Surface> {
    let model = strip_model(s, dec)?;
    let heights: Vec<Rat> = dec.cylinders.iter().map(|c| c.height.clone()).collect();
    let shifts = vec![Rat::zero(); dec.cylinders.len()];
    let parts = strip_parts(dec, &model, &heights, &shifts, &BTreeMap::new());
    let mut pairing = Vec::new();
    for (i, _) in dec.saddles.iter().enumerate() {
        let bp = parts.poly_of[dec.above[i]].expect("all strips alive");
        let tp = parts.poly_of[dec.below[i]].expect("all strips alive");
        let bk = parts.bottom[bp].iter().position(|(j, _, _)| *j == i).expect("one piece per saddle");
        let tr = parts.top[tp].iter().position(|(j, _, _)| *j == i).expect("one piece per saddle");
        pairing.push(((bp, bk), (tp, tr)));
    }
    build_from_parts(&dec.direction, &parts, &pairing)
}

// ---------------------------------------------------------------------------
// Collapse time.

/// A collapse deformation of one equivalence class: the twist rates of the
/// members, the first time a member height hits zero, and which members get
/// there. The closure of the collapsing members must not be the whole
/// surface for the collapse itself to make sense; that is checked when the
/// limit is built.
#[derive(Clone, Debug)]
pub struct CollapseSpec {
    pub class: CylClass,
    /// a_C = v(cross chain of C), per class member.
    pub rates: Vec<QQi>,
    pub t_v: Rat,
    /// Members whose height vanishes at t_v, as cylinder indices.
    pub collapsing: Vec<usize>,
    /// For each collapsing member, the direction in surface coordinates
    /// whose transversal segments contract to points at t_v.
    pub contracted: Vec<Vec2Q>,
}

/// t_v = min height / (-Im rate) over entries with negative Im rate,
/// together with the argmin set.
fn min_collapse(heights: &[Rat], im: &[Rat]) -> Option<(Rat, Vec<usize>)> {
    let mut best: Option<Rat> = None;
    for (h, r) in heights.iter().zip(im) {
        if r.is_negative() {
            let t = h / &(-r.clone());
            if best.as_ref().is_none_or(|b| t < *b) {
                best = Some(t);
            }
        }
    }
    let best = best?;
    let argmin = heights
        .iter()
        .zip(im)
        .enumerate()
        .filter(|(_, (h, r))| r.is_negative() && *h / &(-(*r).clone()) == best)
        .map(|(k, _)| k)
        .collect();
    Some((best, argmin))
}

/// Collapse time of a class along a twist vector v, which must lie in the
/// twist space of the class inside T. Member heights move at rate
/// Im(conj(z_d) a_C); the collapse time is the first zero among them.
pub fn collapse_time(
    s: &Surface,
    t: &TangentSpace,
    dec: &PeriodicDecomposition,
    class: &CylClass,
    v: &[QQi],
) -> Result<CollapseSpec> {
    let _ = s;
    let d = &dec.direction;
    let twist = cylinders::twist_space(t, dec, class);
    if !twist.contains(v) {
        return Err(Error::AssumptionFails(
            "the vector does not lie in the twist space of the class".into(),
        ));
    }
    let rates: Vec<QQi> = class
        .members
        .iter()
        .map(|&ci| eval_chain(v, &dec.cylinders[ci].cross_chain))
        .collect();
    let heights: Vec<Rat> = class
        .members
        .iter()
        .map(|&ci| dec.cylinders[ci].height.clone())
        .collect();
    let im: Vec<Rat> = rates.iter().map(|a| frame_im(d, a)).collect();
    let Some((t_v, argmin)) = min_collapse(&heights, &im) else {
        return Err(Error::NoCollapse(
            "no member height decreases along the vector".into(),
        ));
    };
    let collapsing: Vec<usize> = argmin.iter().map(|&k| class.members[k]).collect();
    let (a, b) = (&d.x, &d.y);
    let n2 = a.clone() * a.clone() + b.clone() * b.clone();
    let contracted = argmin
        .iter()
        .map(|&k| {
            let fx = -(t_v.clone() * frame_dot(d, &rates[k]));
            let fy = heights[k].clone();
            Vec2Q::new((a * &fx - b * &fy) / &n2, (b * &fx + a * &fy) / &n2)
        })
        .collect();
    Ok(CollapseSpec { class: class.clone(), rates, t_v, collapsing, contracted })
}

// ---------------------------------------------------------------------------
// Collapse results.

/// Why a collapse leaves the stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DivergenceWitness {
    /// A saddle connection across the named collapsing cylinder connects
    /// two singularities at collapse time, so its holonomy goes to zero.
    ShortSaddle { cylinder: usize },
    /// The boundary circles of the named collapsing cylinders are partly
    /// identified among themselves, pinching a loop of vanishing holonomy.
    Pinched { cylinders: Vec<usize> },
}

/// One identification of surviving boundary pieces performed through a
/// nonempty stack of collapsed cylinders.
#[derive(Clone, Debug)]
pub struct GraphEdge {
    /// Limit vertex class at the west end of the glued piece.
    pub from: usize,
    /// Limit vertex class at the east end.
    pub to: usize,
    /// Total source height of the crossed stack.
    pub weight: Rat,
    /// The limit edge class the pieces were glued into.
    pub limit_edge: usize,
    /// The crossed collapsing cylinders, ordered from the surviving side
    /// downward.
    pub stack: Vec<usize>,
}

/// Directed graph of the collapsed locus: vertices are the limit
/// singularities the collapsing cylinders land on, edges the surviving
/// connections glued through them, pointing in the +x sense of the collapse
/// direction.
#[derive(Clone, Debug, Default)]
pub struct DegenerationGraph {
    /// Limit vertex classes incident to at least one edge, ascending.
    pub nodes: Vec<usize>,
    pub edges: Vec<GraphEdge>,
}

/// Cell correspondence between the source surface and the limit.
#[derive(Clone, Debug)]
pub struct CellMap {
    /// For each limit edge class, a source chain whose deformed holonomy at
    /// collapse time equals the limit edge's holonomy.
    pub edge_chain: Vec<Vec<QQi>>,
    /// For each source vertex class, a limit vertex class it lands on, when
    /// it survives; vertices swallowed by a pinched circle map to None.
    pub vertex_image: Vec<Option<usize>>,
}

impl CellMap {
    /// Evaluate a source cochain on the edge chains, producing a limit
    /// cochain. Cocycles vanishing on every vanishing cycle push to limit
    /// cocycles.
    pub fn push_cocycle(&self, u: &[QQi]) -> Vec<QQi> {
        self.edge_chain.iter().map(|ch| eval_chain(u, ch)).collect()
    }
}

/// A collapsed class together with the limit surface and the induced
/// structure on homology.
#[derive(Clone, Debug)]
pub struct DegenerationResult {
    pub spec: CollapseSpec,
    pub limit: Surface,
    /// Whether the limit left the source stratum.
    pub divergent: bool,
    pub witness: Option<DivergenceWitness>,
    pub cell_map: CellMap,
    /// Source cycles with vanishing limit, as a subspace of the chain
    /// space; contains the polygon boundaries.
    pub vanishing: Subspace,
    /// Dimension of the vanishing space modulo boundaries.
    pub vanishing_dim: usize,
    /// The subspace of T annihilating every vanishing cycle.
    pub t_boundary: Subspace,
    pub graph: DegenerationGraph,
}

// ---------------------------------------------------------------------------
// Sewing a collapsed class: cut points, identification walks, and the limit
// complex.

/// How a cut point was discovered, for rebuilding its witness path.
#[derive(Clone, Debug)]
enum CutSource {
    /// Image of the start vertex of saddle `vertex` through collapsed
    /// cylinder `through`; `down` means the vertex sits on the top circle
    /// and maps to the bottom one.
    Seed { vertex: usize, through: usize, down: bool },
    /// Image of an earlier cut point through a collapsed cylinder.
    Step { from: (usize, Rat), through: usize, down: bool },
}

/// A glued pair of boundary pieces in the limit: a bottom piece of one
/// surviving strip identified with a top piece of another, possibly through
/// a stack of collapsed strips. Sides are (cylinder, saddle, from, to).
#[derive(Clone, Debug)]
struct Pairing {
    src: (usize, usize, Rat, Rat),
    dst: (usize, usize, Rat, Rat),
    /// Collapsed cylinders crossed, in order from the source side down.
    through: Vec<usize>,
}

#[derive(Clone, Debug)]
enum LimitEdgeInfo {
    Chord { cyl: usize },
    Piece { pairing: usize },
}

/// A path of visits assembled leg by leg. A leg opens a polygon at a
/// boundary descriptor and either closes at one or leaves the pen at an
/// interior point for the next leg; bends inside one polygon stay within a
/// single visit, which is all the relative class of the path depends on.
#[derive(Clone, Debug)]
struct PathBuilder {
    visits: Vec<Visit>,
    open: Option<(usize, Desc)>,
}

impl PathBuilder {
    fn new() -> Self {
        PathBuilder { visits: Vec::new(), open: None }
    }

    fn open(&mut self, poly: usize, desc: Desc) {
        debug_assert!(self.open.is_none(), "opening an open path");
        self.open = Some((poly, desc));
    }

    fn close(&mut self, poly: usize, desc: Desc) {
        let (p, enter) = self.open.take().expect("closing a closed path");
        debug_assert_eq!(p, poly, "closing in the wrong chart");
        self.visits.push(Visit { poly, enter, exit: desc });
    }

    fn push(&mut self, v: Visit) {
        debug_assert!(self.open.is_none(), "pushing into an open path");
        self.visits.push(v);
    }

    /// Append the reverse of another path whose start is a closed
    /// descriptor; the current pen position must be the other path's end.
    fn append_reversed(&mut self, w: &PathBuilder) {
        match (&self.open, &w.open) {
            (Some((p, _)), Some((wp, wenter))) => {
                debug_assert_eq!(p, wp, "reversed junction in the wrong chart");
                let wd = wenter.clone();
                let q = *wp;
                self.close(q, wd);
            }
            (None, None) => {}
            _ => debug_assert!(false, "junction open on one side only"),
        }
        for v in w.visits.iter().rev() {
            self.push(Visit { poly: v.poly, enter: v.exit.clone(), exit: v.enter.clone() });
        }
    }
}

/// One traversal direction of a saddle connection: visits in order with
/// cumulative dot(d, .) extents.
#[derive(Clone, Debug)]
struct ScView {
    visits: Vec<Visit>,
    prefix: Vec<Rat>,
    len: Rat,
}

fn make_views(s: &Surface, d: &Vec2Q, sc: &cylinders::SaddleConn) -> [ScView; 2] {
    let build = |visits: Vec<Visit>| -> ScView {
        let mut prefix = vec![Rat::zero()];
        for v in &visits {
            let e = frame_x(d, &v.delta(s));
            let last = prefix.last().unwrap().clone();
            prefix.push(last + e.abs());
        }
        let len = prefix.last().unwrap().clone();
        ScView { visits, prefix, len }
    };
    let fwd = build(sc.visits.clone());
    debug_assert_eq!(fwd.len, sc.length);
    let rev: Vec<Visit> = sc
        .visits
        .iter()
        .rev()
        .map(|v| Visit { poly: v.poly, enter: v.exit.clone(), exit: v.enter.clone() })
        .collect();
    let bwd = build(rev);
    [fwd, bwd]
}

/// Append the stretch of a view between offsets a < b. The builder may
/// arrive open at a mid-visit junction and is left open when b is interior
/// to a visit.
fn emit_along_view(pb: &mut PathBuilder, view: &ScView, a: &Rat, b: &Rat) {
    debug_assert!(a < b && !a.is_negative() && *b <= view.len);
    for (k, v) in view.visits.iter().enumerate() {
        let lo = (&view.prefix[k]).max(a);
        let hi = (&view.prefix[k + 1]).min(b);
        if lo >= hi {
            continue;
        }
        if *lo == view.prefix[k] {
            pb.open(v.poly, v.enter.clone());
        } else {
            debug_assert_eq!(pb.open.as_ref().map(|(p, _)| *p), Some(v.poly));
        }
        if *hi == view.prefix[k + 1] {
            pb.close(v.poly, v.exit.clone());
        }
    }
}

/// Reduce x into [word start, word start + c) and find the containing word
/// entry: (saddle, offset into it, index in the word).
fn locate(
    word: &[(usize, Rat)],
    lens: &dyn Fn(usize) -> Rat,
    c: &Rat,
    x: &Rat,
) -> (usize, Rat, usize) {
    let x = &word[0].1 + rat_mod(&(x - &word[0].1), c);
    let mut k = word.len() - 1;
    for (i, (_, pos)) in word.iter().enumerate().skip(1) {
        if *pos > x {
            k = i - 1;
            break;
        }
    }
    let (j, pos) = &word[k];
    let off = &x - pos;
    debug_assert!(!off.is_negative() && off < lens(*j));
    (*j, off, k)
}

/// (saddle, from, to) pieces aligned with the subdivision points of a side.
fn piece_ends(pts: &[(usize, Rat, Rat)], lens: &dyn Fn(usize) -> Rat) -> Vec<(usize, Rat, Rat)> {
    let mut out = Vec::with_capacity(pts.len());
    for (k, (i, _, u)) in pts.iter().enumerate() {
        let end = if k + 1 < pts.len() && pts[k + 1].0 == *i {
            pts[k + 1].2.clone()
        } else {
            lens(*i)
        };
        debug_assert!(*u < end);
        out.push((*i, u.clone(), end));
    }
    out
}

struct Collapser<'a> {
    s: &'a Surface,
    hom: &'a Homology,
    dec: &'a PeriodicDecomposition,
    spec: CollapseSpec,
    model: StripModel,
    heights: Vec<Rat>,
    shift: Vec<Rat>,
    alive: Vec<bool>,
    bound: usize,
    cap: usize,
    chunks: Vec<cylinders::Chunk>,
    views: Vec<[ScView; 2]>,
    cuts: CutSet,
    cut_order: Vec<((usize, Rat), CutSource)>,
    collisions: Vec<usize>,
    pairings: Vec<Pairing>,
    piece_walk: BTreeMap<(usize, Rat), usize>,
    covered: Vec<Rat>,
    bpieces: Vec<Vec<(usize, Rat, Rat, Rat)>>,
    parts: Option<StripParts>,
    limit: Option<Surface>,
    einfo: Vec<LimitEdgeInfo>,
    /// Limit edge class of each pairing.
    pair_class: Vec<usize>,
    /// (saddle, from offset) to (poly, piece index) on the two sides of the
    /// surviving strips.
    bidx: BTreeMap<(usize, Rat), (usize, usize)>,
    tidx: BTreeMap<(usize, Rat), (usize, usize)>,
}

impl<'a> Collapser<'a> {
    fn saddle_len(&self, i: usize) -> Rat {
        self.dec.saddles[i].length.clone()
    }

    fn strip(&self, ci: usize) -> &Strip {
        &self.model.strips[ci]
    }

    fn lim(&self) -> &Surface {
        self.limit.as_ref().expect("limit not built yet")
    }

    fn prt(&self) -> &StripParts {
        self.parts.as_ref().expect("parts not built yet")
    }

    /// Unrolled position of saddle i's start on the named side of strip ci.
    fn side_pos(&self, ci: usize, top: bool, i: usize) -> &Rat {
        let word = if top { &self.strip(ci).top } else { &self.strip(ci).bottom };
        &word.iter().find(|(j, _)| *j == i).expect("saddle not on this circle").1
    }

    /// Word entry of the named side containing unrolled coordinate x.
    fn side_locate(&self, ci: usize, top: bool, x: &Rat) -> (usize, Rat, usize) {
        let word = if top { &self.strip(ci).top } else { &self.strip(ci).bottom };
        let lens = |i: usize| self.dec.saddles[i].length.clone();
        locate(word, &lens, &self.dec.cylinders[ci].circumference, x)
    }

    /// Record the image of a boundary point pushed through collapsed
    /// cylinder `through`: a collision when it lands on a vertex, a new cut
    /// otherwise.
    fn push_point(&mut self, through: usize, down: bool, x: &Rat, src: CutSource) {
        let y = if down { x + &self.shift[through] } else { x - &self.shift[through] };
        let (j, off, _) = self.side_locate(through, !down, &y);
        if off.is_zero() {
            self.collisions.push(through);
            return;
        }
        if self.cuts.entry(j).or_default().insert(off.clone()) {
            self.cut_order.push(((j, off), src));
        }
    }

    /// Propagate boundary vertices and cut points through the collapsed
    /// strips until the subdivision is closed under the identifications.
    fn sew(&mut self) -> Result<()> {
        for ci in 0..self.dec.cylinders.len() {
            if self.alive[ci] {
                continue;
            }
            let bottom = self.strip(ci).bottom.clone();
            for (i, pos) in bottom {
                self.push_point(ci, false, &pos, CutSource::Seed { vertex: i, through: ci, down: false });
            }
            let top = self.strip(ci).top.clone();
            for (i, pos) in top {
                self.push_point(ci, true, &pos, CutSource::Seed { vertex: i, through: ci, down: true });
            }
        }
        let mut next = 0;
        while next < self.cut_order.len() {
            if self.cut_order.len() > self.cap {
                return Err(Error::Internal(format!(
                    "cut refinement exceeded the lattice bound {}",
                    self.cap
                )));
            }
            let ((j, off), _) = self.cut_order[next].clone();
            next += 1;
            let above = self.dec.above[j];
            if !self.alive[above] {
                let x = self.side_pos(above, false, j) + &off;
                let src = CutSource::Step { from: (j, off.clone()), through: above, down: false };
                self.push_point(above, false, &x, src);
            }
            let below = self.dec.below[j];
            if !self.alive[below] {
                let x = self.side_pos(below, true, j) + &off;
                let src = CutSource::Step { from: (j, off.clone()), through: below, down: true };
                self.push_point(below, true, &x, src);
            }
        }
        Ok(())
    }

    /// Pieces of one side of a strip under the final cut set, with their
    /// unrolled start positions.
    fn side_pieces(&self, ci: usize, top: bool) -> Vec<(usize, Rat, Rat, Rat)> {
        let word = if top { &self.strip(ci).top } else { &self.strip(ci).bottom };
        let lens = |i: usize| self.dec.saddles[i].length.clone();
        let pts = side_points(word, &lens, &self.cuts, &Rat::zero());
        piece_ends(&pts, &lens)
            .into_iter()
            .zip(&pts)
            .map(|((i, a, b), (_, pos, _))| (i, a, b, pos.clone()))
            .collect()
    }

    /// Walk every surviving bottom piece down through the collapsed strips
    /// to the surviving top piece it gets glued to.
    fn walk(&mut self) -> Result<()> {
        let ncyl = self.dec.cylinders.len();
        let bpieces: Vec<Vec<(usize, Rat, Rat, Rat)>> =
            (0..ncyl).map(|ci| self.side_pieces(ci, false)).collect();
        let mut claimed: BTreeSet<(usize, Rat)> = BTreeSet::new();
        for ci in 0..ncyl {
            if !self.alive[ci] {
                continue;
            }
            for (i0, a0, b0, _) in &bpieces[ci] {
                let pid = self.pairings.len();
                self.piece_walk.insert((*i0, a0.clone()), pid);
                let (mut j, mut a, mut b) = (*i0, a0.clone(), b0.clone());
                let mut through = Vec::new();
                loop {
                    if through.len() > self.cap {
                        return Err(Error::Internal(format!(
                            "identification walk exceeded the lattice bound {}",
                            self.cap
                        )));
                    }
                    let lower = self.dec.below[j];
                    if self.alive[lower] {
                        if !claimed.insert((j, a.clone())) {
                            return Err(Error::Internal(
                                "two walks reached the same surviving top piece".into(),
                            ));
                        }
                        let old = self.piece_walk.insert((j, a.clone()), pid);
                        debug_assert!(old.is_none() || old == Some(pid));
                        self.pairings.push(Pairing {
                            src: (ci, *i0, a0.clone(), b0.clone()),
                            dst: (lower, j, a.clone(), b.clone()),
                            through,
                        });
                        break;
                    }
                    let x = self.side_pos(lower, true, j) + &a + &self.shift[lower];
                    let half = (&b - &a) / Rat::from_integer(2.into());
                    let (j2, a2, _) = self.side_locate(lower, false, &(&x + &half));
                    let a2 = &a2 - &half;
                    let piece = bpieces[lower]
                        .iter()
                        .find(|(i, f, t, _)| *i == j2 && *f <= a2 && a2 < *t)
                        .expect("walk landing inside the circle");
                    debug_assert_eq!(piece.1, a2, "walk landing misaligned with the cuts");
                    debug_assert_eq!(&piece.2 - &piece.1, &b - &a, "walk landing length mismatch");
                    if self.piece_walk.insert((j2, a2.clone()), pid).is_some() {
                        return Err(Error::Internal("two walks crossed the same piece".into()));
                    }
                    self.covered[lower] += &b - &a;
                    through.push(lower);
                    j = j2;
                    b = &a2 + &(&b - &a);
                    a = a2;
                }
            }
        }
        for ci in 0..ncyl {
            if !self.alive[ci] && self.covered[ci] > self.dec.cylinders[ci].circumference {
                return Err(Error::Internal("collapsed circle covered more than once".into()));
            }
        }
        self.bpieces = bpieces;
        Ok(())
    }

    /// Collapsed cylinders whose circles are not fully swept by the walks;
    /// their uncovered arcs pinch off.
    fn pinched(&self) -> Vec<usize> {
        (0..self.dec.cylinders.len())
            .filter(|&ci| !self.alive[ci] && self.covered[ci] < self.dec.cylinders[ci].circumference)
            .collect()
    }

    /// Build the limit surface from the surviving strips and the walk
    /// pairings, and classify every limit edge.
    fn build_limit(&mut self) -> Result<()> {
        let parts = strip_parts(self.dec, &self.model, &self.heights, &self.shift, &self.cuts);
        let mut top_index: BTreeMap<(usize, Rat), (usize, usize)> = BTreeMap::new();
        for (p, pieces) in parts.top.iter().enumerate() {
            for (r, (i, a, _)) in pieces.iter().enumerate() {
                top_index.insert((*i, a.clone()), (p, r));
            }
        }
        let mut bottom_index: BTreeMap<(usize, Rat), (usize, usize)> = BTreeMap::new();
        for (p, pieces) in parts.bottom.iter().enumerate() {
            for (k, (i, a, _)) in pieces.iter().enumerate() {
                bottom_index.insert((*i, a.clone()), (p, k));
            }
        }
        let mut pairing = Vec::with_capacity(self.pairings.len());
        for pr in &self.pairings {
            let (_, i0, a0, _) = &pr.src;
            let (_, j, a, _) = &pr.dst;
            let bp = bottom_index[&(*i0, a0.clone())];
            let tp = top_index[&(*j, a.clone())];
            pairing.push((bp, tp));
        }
        let limit = build_from_parts(&self.dec.direction, &parts, &pairing)?;

        self.einfo = vec![LimitEdgeInfo::Chord { cyl: usize::MAX }; limit.edge_classes.len()];
        for (p, &ci) in parts.cyl_of.iter().enumerate() {
            let c = limit.edge_class_of[&DEdge::new(p, parts.right_edge(p))];
            self.einfo[c] = LimitEdgeInfo::Chord { cyl: ci };
        }
        for (pid, pr) in self.pairings.iter().enumerate() {
            let bp = bottom_index[&(pr.src.1, pr.src.2.clone())];
            let c = limit.edge_class_of[&DEdge::new(bp.0, bp.1)];
            self.einfo[c] = LimitEdgeInfo::Piece { pairing: pid };
            self.pair_class.push(c);
        }
        #[cfg(debug_assertions)]
        for info in &self.einfo {
            if let LimitEdgeInfo::Chord { cyl } = info {
                debug_assert_ne!(*cyl, usize::MAX, "unclassified limit edge");
            }
        }
        self.bidx = bottom_index;
        self.tidx = top_index;
        self.parts = Some(parts);
        self.limit = Some(limit);
        Ok(())
    }
}

fn dedge_coeff(l: &Surface, d: DEdge) -> (usize, i64) {
    let c = l.edge_class_of[&d];
    if l.edge_classes[c].0 == d {
        (c, 1)
    } else {
        (c, -1)
    }
}

fn component_signatures(s: &Surface) -> Vec<Vec<usize>> {
    let mut sigs: Vec<Vec<usize>> =
        (0..s.num_components()).map(|c| s.signature_of_component(c)).collect();
    sigs.sort();
    sigs
}

/// Denominator-lattice bound on the number of distinct boundary points the
/// sewing can produce: all positions live in (1/L)Z along circles of known
/// circumference.
fn lattice_cap(dec: &PeriodicDecomposition, shift: &[Rat]) -> usize {
    let mut l = num_bigint::BigInt::one();
    for sc in &dec.saddles {
        l = l.lcm(sc.length.denom());
    }
    for x in dec.bot_x.iter().chain(&dec.top_x) {
        l = l.lcm(x.denom());
    }
    for sh in shift {
        l = l.lcm(sh.denom());
    }
    let mut total = num_bigint::BigInt::zero();
    for cyl in &dec.cylinders {
        total += cyl.circumference.numer() * &l / cyl.circumference.denom();
    }
    total.to_usize().unwrap_or(usize::MAX).min(8_000_000).saturating_add(64)
}

// Witness paths: every cut point is reached from a source vertex by
// alternating vertical crossings of collapsed cylinders and drift arcs
// along their circles undoing the shear of the identifications. Boundary
// pieces get anchored relative chains out of these, which is what makes the
// limit cell structure comparable with the source.
impl<'a> Collapser<'a> {
    /// A point of connection i at interior offset off: chart, coordinates,
    /// and the boundary descriptor when it lies on a polygon edge.
    fn point_on_saddle(&self, i: usize, off: &Rat) -> (usize, Vec2Q, Option<Desc>) {
        let s = self.s;
        let conn = &self.dec.saddles[i];
        let view = &self.views[i][0];
        if conn.on_edge.is_some() {
            let v = &view.visits[0];
            let a = v.enter_point(s);
            let delta = v.exit_point(s) - a.clone();
            let t = off / &conn.length;
            let pt = a + delta.scale(&t);
            let dc = self.edge_containing(v.poly, &pt).expect("point off its edge");
            return (v.poly, pt, Some(dc));
        }
        for (k, v) in view.visits.iter().enumerate() {
            if k > 0 && *off == view.prefix[k] {
                return (v.poly, v.enter_point(s), Some(v.enter.clone()));
            }
            if *off > view.prefix[k] && *off < view.prefix[k + 1] {
                let ext = &view.prefix[k + 1] - &view.prefix[k];
                let t = (off - &view.prefix[k]) / ext;
                let a = v.enter_point(s);
                let delta = v.exit_point(s) - a.clone();
                return (v.poly, a + delta.scale(&t), None);
            }
        }
        unreachable!("offset outside the connection")
    }

    /// The edge of polygon p containing q in its interior, if any.
    fn edge_containing(&self, p: usize, q: &Vec2Q) -> Option<Desc> {
        let poly = &self.s.polygons[p];
        let n = poly.n();
        for e in 0..n {
            let a = poly.vertex(e);
            let b = poly.vertex((e + 1) % n);
            if geom::on_segment(a, b, q) {
                debug_assert!(q != a && q != b, "boundary point at a vertex");
                return Some((e, cylinders::edge_param(self.s, DEdge::new(p, e), q)));
            }
        }
        None
    }

    /// Offset along connection sc of a point q seen in chart p.
    fn saddle_offset(&self, sc: usize, p: usize, q: &Vec2Q) -> Option<Rat> {
        let s = self.s;
        let d = &self.dec.direction;
        let conn = &self.dec.saddles[sc];
        let view = &self.views[sc][0];
        for (k, v) in view.visits.iter().enumerate() {
            if v.poly != p {
                continue;
            }
            let a = v.enter_point(s);
            let b = v.exit_point(s);
            if geom::on_segment(&a, &b, q) {
                return Some(&view.prefix[k] + frame_x(d, &(q.clone() - a)));
            }
        }
        if let Some(ci) = conn.on_edge {
            for dd in [s.edge_classes[ci].0, s.edge_classes[ci].1] {
                if dd.poly != p {
                    continue;
                }
                let poly = &s.polygons[dd.poly];
                let n = poly.n();
                let a = poly.vertex(dd.edge);
                let b = poly.vertex((dd.edge + 1) % n);
                if !geom::on_segment(a, b, q) {
                    continue;
                }
                let w = frame_x(d, &(q.clone() - a.clone()));
                let fx = frame_x(d, &poly.edge_vec(dd.edge));
                return Some(if fx.is_positive() { w } else { &conn.length + &w });
            }
        }
        None
    }

    /// The corner whose flat sector sits clockwise of the east germ at the
    /// start vertex of connection i: the half-disk inside the cylinder
    /// below the connection.
    fn corner_below_start(&self, i: usize) -> Result<(usize, usize)> {
        let v0 = &self.dec.saddles[i].visits[0];
        let start = (v0.poly, v0.enter.0);
        let mut c = start;
        for _ in 0..self.bound {
            let nc = self.s.next_corner(c);
            if nc == start {
                return Ok(c);
            }
            c = nc;
        }
        Err(Error::Internal("corner walk did not close".into()))
    }

    /// Trace the vertical crossing of the collapsed cylinder adjacent to
    /// the given boundary point, extending the path. Returns the
    /// connection and offset the crossing lands on; the builder is left
    /// open at an interior landing, closed at an on-edge one.
    fn emit_vertical(
        &self,
        pb: &mut PathBuilder,
        from: (usize, &Rat),
        down: bool,
    ) -> Result<(usize, Rat)> {
        let s = self.s;
        let d = &self.dec.direction;
        let dirv = if down {
            Vec2Q::new(d.y.clone(), -d.x.clone())
        } else {
            Vec2Q::new(-d.y.clone(), d.x.clone())
        };
        let tr = Tracer { s, dir: dirv.clone(), bound: self.bound, chunks: &self.chunks };
        let (i, off) = from;
        let mut p;
        let mut x;
        if off.is_zero() {
            let v0 = &self.dec.saddles[i].visits[0];
            let corner = if down { self.corner_below_start(i)? } else { (v0.poly, v0.enter.0) };
            pb.open(corner.0, (corner.1, Rat::zero()));
            p = corner.0;
            x = s.polygons[corner.0].vertex(corner.1).clone();
        } else {
            let (pp, pt, desc) = self.point_on_saddle(i, off);
            match (&pb.open, desc) {
                (Some((op, _)), _) => {
                    debug_assert_eq!(*op, pp, "open junction in the wrong chart");
                    p = pp;
                    x = pt;
                }
                (None, Some(dc)) => {
                    let ev = s.polygons[pp].edge_vec(dc.0);
                    if !ev.cross(&dirv).is_negative() {
                        pb.open(pp, dc);
                        p = pp;
                        x = pt;
                    } else {
                        let din = s.partner(DEdge::new(pp, dc.0));
                        let nd: Desc = (din.edge, Rat::one() - dc.1);
                        pb.open(din.poly, nd.clone());
                        p = din.poly;
                        x = desc_point(s, p, &nd);
                    }
                }
                (None, None) => unreachable!("interior junction with a closed path"),
            }
        }
        for _ in 0..self.bound {
            let exit = tr
                .find_exit(p, &x)
                .ok_or_else(|| Error::Internal("vertical leg escaped its polygon".into()))?;
            let y = desc_point(s, p, &exit);
            if let Some((sc, q)) = tr.first_chunk_hit(p, &x, &y) {
                let off2 = self
                    .saddle_offset(sc, p, &q)
                    .ok_or_else(|| Error::Internal("chunk hit off its connection".into()))?;
                if let Some(dc) = self.edge_containing(p, &q) {
                    pb.close(p, dc);
                }
                return Ok((sc, off2));
            }
            if exit.1.is_zero() {
                return Err(Error::Internal("vertical leg ran into a vertex".into()));
            }
            pb.close(p, exit.clone());
            let din = s.partner(DEdge::new(p, exit.0));
            let nd: Desc = (din.edge, Rat::one() - exit.1);
            pb.open(din.poly, nd.clone());
            p = din.poly;
            x = desc_point(s, p, &nd);
        }
        Err(Error::Internal("vertical leg exceeded the step bound".into()))
    }

    /// Append the stretch of connection i between two offsets, in either
    /// order.
    fn emit_sub_arc(&self, pb: &mut PathBuilder, i: usize, of: &Rat, ot: &Rat) {
        if of == ot {
            return;
        }
        let conn = &self.dec.saddles[i];
        if conn.on_edge.is_some() {
            debug_assert!(pb.open.is_none(), "edge arc into an open path");
            let v = &conn.visits[0];
            let n = self.s.polygons[v.poly].n();
            let e = if v.exit.0 == (v.enter.0 + 1) % n { v.enter.0 } else { v.exit.0 };
            let ev = self.s.polygons[v.poly].edge_vec(e);
            let fx = frame_x(&self.dec.direction, &ev);
            let param = |off: &Rat| -> Rat {
                if fx.is_positive() {
                    off / &conn.length
                } else {
                    Rat::one() - off / &conn.length
                }
            };
            pb.open(v.poly, (e, param(of)));
            pb.close(v.poly, (e, param(ot)));
            return;
        }
        if of < ot {
            emit_along_view(pb, &self.views[i][0], of, ot);
        } else {
            let len = &conn.length;
            emit_along_view(pb, &self.views[i][1], &(len - ot), &(len - of));
        }
    }

    /// Walk along a boundary circle of a strip from a point by a signed x
    /// extent, appending the arc. Returns the landing point.
    fn emit_arc(
        &self,
        pb: &mut PathBuilder,
        ci: usize,
        top: bool,
        start: (usize, Rat),
        extent: &Rat,
    ) -> Result<(usize, Rat)> {
        let word = if top { &self.strip(ci).top } else { &self.strip(ci).bottom };
        let n = word.len();
        let mut k = word.iter().position(|(j, _)| *j == start.0).expect("start off the circle");
        let (mut j, mut u) = start;
        let mut rem = extent.clone();
        for _ in 0..self.cap {
            if rem.is_zero() {
                return Ok((j, u));
            }
            let len = self.saddle_len(j);
            if rem.is_positive() {
                let avail = &len - &u;
                if rem <= avail {
                    let tgt = &u + &rem;
                    self.emit_sub_arc(pb, j, &u, &tgt);
                    return Ok((j, tgt));
                }
                if avail.is_positive() {
                    self.emit_sub_arc(pb, j, &u, &len);
                }
                rem -= avail;
                k = (k + 1) % n;
                j = word[k].0;
                u = Rat::zero();
            } else {
                let avail = u.clone();
                if -rem.clone() <= avail {
                    let tgt = &u + &rem;
                    self.emit_sub_arc(pb, j, &u, &tgt);
                    return Ok((j, tgt));
                }
                if avail.is_positive() {
                    self.emit_sub_arc(pb, j, &u, &Rat::zero());
                }
                rem += avail;
                k = (k + n - 1) % n;
                j = word[k].0;
                u = self.saddle_len(j);
            }
        }
        Err(Error::Internal("boundary arc exceeded the lattice bound".into()))
    }

    /// Rebuild the witness path of every cut point, in discovery order. The
    /// geometric landing of each leg is checked against the bookkeeping
    /// that discovered the cut.
    fn witnesses(&self) -> Result<BTreeMap<(usize, Rat), PathBuilder>> {
        let mut wit: BTreeMap<(usize, Rat), PathBuilder> = BTreeMap::new();
        for (key, src) in &self.cut_order {
            let (start, through, down, mut pb) = match src {
                CutSource::Seed { vertex, through, down } => {
                    ((*vertex, Rat::zero()), *through, *down, PathBuilder::new())
                }
                CutSource::Step { from, through, down } => {
                    (from.clone(), *through, *down, wit[from].clone())
                }
            };
            let x = self.side_pos(through, down, start.0) + &start.1;
            let (j0, u0, _) = self.side_locate(through, !down, &x);
            let landed = self.emit_vertical(&mut pb, (start.0, &start.1), down)?;
            debug_assert_eq!(landed, (j0, u0), "vertical landed off its target");
            let ext =
                if down { self.shift[through].clone() } else { -self.shift[through].clone() };
            let fin = self.emit_arc(&mut pb, through, !down, landed, &ext)?;
            debug_assert_eq!(&fin, key, "drift arc landed off the cut");
            wit.insert(key.clone(), pb);
        }
        Ok(wit)
    }

    /// Relative class of a boundary piece: witness paths to both ends
    /// joined by the stretch of the connection between them, west to east.
    fn piece_chain(
        &self,
        wit: &BTreeMap<(usize, Rat), PathBuilder>,
        i: usize,
        a: &Rat,
        b: &Rat,
    ) -> Vec<QQi> {
        let mut pb = if a.is_zero() { PathBuilder::new() } else { wit[&(i, a.clone())].clone() };
        self.emit_sub_arc(&mut pb, i, a, b);
        if *b != self.saddle_len(i) {
            pb.append_reversed(&wit[&(i, b.clone())]);
        }
        debug_assert!(pb.open.is_none(), "piece chain left open");
        path_class(self.s, &pb.visits)
    }

    /// Source chains deforming onto each limit edge class, oriented along
    /// the class representative.
    fn edge_chains(&self, wit: &BTreeMap<(usize, Rat), PathBuilder>) -> Vec<Vec<QQi>> {
        let lim = self.lim();
        let mut out = Vec::with_capacity(self.einfo.len());
        for (c, info) in self.einfo.iter().enumerate() {
            match info {
                LimitEdgeInfo::Chord { cyl } => {
                    debug_assert!(self.alive[*cyl]);
                    let p = self.prt().poly_of[*cyl].expect("alive strip has a polygon");
                    debug_assert_eq!(
                        dedge_coeff(lim, DEdge::new(p, self.prt().right_edge(p))),
                        (c, 1)
                    );
                    out.push(self.strip(*cyl).chord_chain.clone());
                }
                LimitEdgeInfo::Piece { pairing } => {
                    let (_, i, a, b) = &self.pairings[*pairing].src;
                    let mut ch = self.piece_chain(wit, *i, a, b);
                    let bp = self.bidx[&(*i, a.clone())];
                    let (cc, sg) = dedge_coeff(lim, DEdge::new(bp.0, bp.1));
                    debug_assert_eq!(cc, c);
                    if sg < 0 {
                        for z in &mut ch {
                            *z = -z.clone();
                        }
                    }
                    out.push(ch);
                }
            }
        }
        out
    }

    /// Where each source vertex class lands in the limit: follow a
    /// connection start downward through collapsed circles until a
    /// surviving corner, or into a pinched cycle.
    fn vertex_images(&self) -> Vec<Option<usize>> {
        let lim = self.lim();
        let parts = self.prt();
        (0..self.s.vertex_classes.len())
            .map(|vc| {
                let i0 = self.dec.saddles.iter().position(|sc| sc.start_class == vc)?;
                let mut cur = (i0, Rat::zero());
                let mut seen: BTreeSet<(usize, Rat)> = BTreeSet::new();
                loop {
                    if !seen.insert(cur.clone()) {
                        return None;
                    }
                    let (i, u) = cur.clone();
                    let up = self.dec.above[i];
                    if self.alive[up] {
                        let (p, k) = self.bidx[&(i, u)];
                        return Some(lim.class_of((p, k)));
                    }
                    let dn = self.dec.below[i];
                    if self.alive[dn] {
                        let (p, r) = self.tidx[&(i, u)];
                        let m = parts.bottom[p].len();
                        let l = parts.top[p].len();
                        let vtx = if r == 0 { m + l + 1 } else { m + l - r };
                        return Some(lim.class_of((p, vtx)));
                    }
                    let x = self.side_pos(dn, true, i) + &u + &self.shift[dn];
                    let (i2, u2, _) = self.side_locate(dn, false, &x);
                    cur = (i2, u2);
                }
            })
            .collect()
    }

    /// Chain images of the source edge cells in the limit: each piece of a
    /// connection maps to the class its surviving sides are glued into,
    /// each surviving chord to its strip's chord class, each collapsed
    /// chord to the classes its winding arc sweeps on the collapsed circle.
    fn phi_columns(&self) -> Vec<Vec<QQi>> {
        let lim = self.lim();
        let ne = lim.edge_classes.len();
        let ns = self.dec.saddles.len();
        let ncyl = self.dec.cylinders.len();
        let mut piece_coeff = |col: &mut Vec<QQi>, i: usize, a: &Rat, sign: i64| {
            if let Some(&pid) = self.piece_walk.get(&(i, a.clone())) {
                let src = &self.pairings[pid].src;
                let bp = self.bidx[&(src.1, src.2.clone())];
                let (c, sg) = dedge_coeff(lim, DEdge::new(bp.0, bp.1));
                col[c] = col[c].clone() + QQi::from_rat(rat_int(sg * sign));
            }
        };
        let mut cols: Vec<Vec<QQi>> = Vec::with_capacity(ns + ncyl);
        for i in 0..ns {
            let mut col = vec![QQi::zero(); ne];
            let mut offs: Vec<Rat> = vec![Rat::zero()];
            if let Some(cs) = self.cuts.get(&i) {
                offs.extend(cs.iter().cloned());
            }
            for a in offs {
                piece_coeff(&mut col, i, &a, 1);
            }
            cols.push(col);
        }
        for ci in 0..ncyl {
            let mut col = vec![QQi::zero(); ne];
            if self.alive[ci] {
                let p = self.prt().poly_of[ci].expect("alive strip has a polygon");
                let (c, sg) = dedge_coeff(lim, DEdge::new(p, self.prt().right_edge(p)));
                col[c] = QQi::from_rat(rat_int(sg));
            } else {
                let run = self.strip(ci).head() - self.strip(ci).foot();
                let mut rem = run + &self.shift[ci];
                let pieces = &self.bpieces[ci];
                let np = pieces.len();
                let mut k = 0usize;
                for _ in 0..self.cap {
                    if rem.is_zero() {
                        break;
                    }
                    if rem.is_positive() {
                        let (i, a, b, _) = &pieces[k];
                        piece_coeff(&mut col, *i, a, 1);
                        rem -= b - a;
                        debug_assert!(!rem.is_negative(), "winding arc off the cut lattice");
                        k = (k + 1) % np;
                    } else {
                        k = (k + np - 1) % np;
                        let (i, a, b, _) = &pieces[k];
                        piece_coeff(&mut col, *i, a, -1);
                        rem += b - a;
                        debug_assert!(!rem.is_positive(), "winding arc off the cut lattice");
                    }
                }
                debug_assert!(rem.is_zero(), "winding arc did not close");
            }
            cols.push(col);
        }
        cols
    }

    /// Source cycles dying in the limit: the span of the boundaries
    /// together with combinations of edge cells whose chain image is a
    /// limit boundary.
    fn vanishing(&self, limit_hom: &Homology) -> (Subspace, usize) {
        let phi = self.phi_columns();
        let ne = self.lim().edge_classes.len();
        let ns = self.dec.saddles.len();
        let ncyl = self.dec.cylinders.len();
        let nf = limit_hom.face_boundaries.len();
        let mut rows = Vec::with_capacity(ne);
        for r in 0..ne {
            let mut row = Vec::with_capacity(ns + ncyl + nf);
            for col in &phi {
                row.push(col[r].clone());
            }
            for f in &limit_hom.face_boundaries {
                row.push(f[r].clone());
            }
            rows.push(row);
        }
        let ker = kernel_basis(&Mat::new(rows, ns + ncyl + nf));
        let nse = self.s.edge_classes.len();
        let mut span: Vec<Vec<QQi>> = Vec::new();
        for kv in &ker {
            let mut w = vec![QQi::zero(); nse];
            for i in 0..ns {
                if !kv[i].is_zero() {
                    for (t, z) in self.dec.saddles[i].chain.iter().enumerate() {
                        w[t] = w[t].clone() + kv[i].clone() * z.clone();
                    }
                }
            }
            for ci in 0..ncyl {
                if !kv[ns + ci].is_zero() {
                    for (t, z) in self.strip(ci).chord_chain.iter().enumerate() {
                        w[t] = w[t].clone() + kv[ns + ci].clone() * z.clone();
                    }
                }
            }
            span.push(w);
        }
        let nb = self.hom.boundary_space();
        span.extend(nb.basis.iter().cloned());
        let vanishing = Subspace::from_span(&span, nse);
        let vdim = vanishing.dim() - nb.dim();
        (vanishing, vdim)
    }

    /// The directed graph of identifications through collapsed material.
    fn graph(&self) -> DegenerationGraph {
        let lim = self.lim();
        let mut edges = Vec::new();
        let mut nodes: BTreeSet<usize> = BTreeSet::new();
        for pr in &self.pairings {
            if pr.through.is_empty() {
                continue;
            }
            let (_, i, a, _) = &pr.src;
            let (p, k) = self.bidx[&(*i, a.clone())];
            let from = lim.class_of((p, k));
            let to = lim.class_of((p, k + 1));
            let weight = pr
                .through
                .iter()
                .fold(Rat::zero(), |acc, &b| acc + &self.dec.cylinders[b].height);
            let limit_edge = lim.edge_class_of[&DEdge::new(p, k)];
            nodes.insert(from);
            nodes.insert(to);
            edges.push(GraphEdge { from, to, weight, limit_edge, stack: pr.through.clone() });
        }
        DegenerationGraph { nodes: nodes.into_iter().collect(), edges }
    }
}

/// Collapse the class along v at its collapse time and sew the surviving
/// strips into the limit surface, with the cell correspondence, the
/// vanishing cycles, and the boundary tangent space.
pub fn collapse(
    s: &Surface,
    hom: &Homology,
    t: &TangentSpace,
    dec: &PeriodicDecomposition,
    class: &CylClass,
    v: &[QQi],
) -> Result<DegenerationResult> {
    let spec = collapse_time(s, t, dec, class, v)?;
    let d = &dec.direction;
    let ncyl = dec.cylinders.len();
    let mut heights: Vec<Rat> = dec.cylinders.iter().map(|c| c.height.clone()).collect();
    let mut shift = vec![Rat::zero(); ncyl];
    for (k, &ci) in spec.class.members.iter().enumerate() {
        heights[ci] += &spec.t_v * &frame_im(d, &spec.rates[k]);
        shift[ci] = &spec.t_v * &frame_dot(d, &spec.rates[k]);
    }
    debug_assert!(heights.iter().all(|h| !h.is_negative()), "a height overshot the collapse");
    debug_assert!(spec.collapsing.iter().all(|&ci| heights[ci].is_zero()));
    let alive: Vec<bool> = heights.iter().map(|h| h.is_positive()).collect();
    if !alive.iter().any(|&a| a) {
        return Err(Error::WholeSurface(
            "the whole surface collapses at the same time".into(),
        ));
    }
    let model = strip_model(s, dec)?;
    let cap = lattice_cap(dec, &shift);
    let chunks = cylinders::chunk_list(s, &dec.saddles);
    let views: Vec<[ScView; 2]> = dec.saddles.iter().map(|sc| make_views(s, d, sc)).collect();
    let mut cl = Collapser {
        s,
        hom,
        dec,
        spec,
        model,
        heights,
        shift,
        alive,
        bound: cylinders::step_bound(s),
        cap,
        chunks,
        views,
        cuts: BTreeMap::new(),
        cut_order: Vec::new(),
        collisions: Vec::new(),
        pairings: Vec::new(),
        piece_walk: BTreeMap::new(),
        covered: vec![Rat::zero(); ncyl],
        bpieces: Vec::new(),
        parts: None,
        limit: None,
        einfo: Vec::new(),
        pair_class: Vec::new(),
        bidx: BTreeMap::new(),
        tidx: BTreeMap::new(),
    };
    cl.sew()?;
    cl.walk()?;
    cl.build_limit()?;
    let limit_hom = Homology::new(cl.lim());
    let wit = cl.witnesses()?;
    let edge_chain = cl.edge_chains(&wit);
    let vertex_image = cl.vertex_images();
    let (vanishing, vanishing_dim) = cl.vanishing(&limit_hom);
    let t_boundary = t.space.annihilator_in(&vanishing.basis);
    let graph = cl.graph();
    let pinched = cl.pinched();
    let witness = if let Some(&b) = cl.collisions.first() {
        Some(DivergenceWitness::ShortSaddle { cylinder: b })
    } else if !pinched.is_empty() {
        Some(DivergenceWitness::Pinched { cylinders: pinched })
    } else {
        None
    };
    let divergent = component_signatures(s) != component_signatures(cl.lim());
    debug_assert_eq!(divergent, witness.is_some(), "divergence flag and witness disagree");
    let cell_map = CellMap { edge_chain, vertex_image };

    #[cfg(debug_assertions)]
    {
        let mut pushed = hom.period_cocycle();
        for (c, z) in pushed.iter_mut().zip(v) {
            *c = c.clone() + z.clone().scale(&cl.spec.t_v);
        }
        for (c, ch) in cell_map.edge_chain.iter().enumerate() {
            let want = cl.lim().hol_qqi(cl.lim().edge_classes[c].0);
            debug_assert_eq!(
                eval_chain(&pushed, ch),
                want,
                "pushed period mismatch on limit edge {}",
                c
            );
        }
        for w in &vanishing.basis {
            debug_assert!(
                eval_chain(&pushed, w).is_zero(),
                "vanishing cycle with nonzero deformed period"
            );
        }
        debug_assert!(limit_hom.is_cocycle(&cell_map.push_cocycle(&pushed)));
    }

    let spec = cl.spec.clone();
    let limit = cl.limit.take().expect("limit built");
    Ok(DegenerationResult {
        spec,
        limit,
        divergent,
        witness,
        cell_map,
        vanishing,
        vanishing_dim,
        t_boundary,
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinders::{decompose_periodic, equivalence_classes, standard_deformation};
    use crate::homology::Homology;
    use crate::scalar::rat_int;
    use crate::tangent::stratum_tangent;

    fn vec2(x: i64, y: i64) -> Vec2Q {
        Vec2Q::new(rat_int(x), rat_int(y))
    }

    fn l_origami() -> Surface {
        Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap()
    }

    fn stratum_setup(s: &Surface) -> (Homology, TangentSpace) {
        let hom = Homology::new(s);
        let t = stratum_tangent(s, &hom);
        (hom, t)
    }

    #[test]
    fn collapse_time_formula() {
        let h = [rat_int(1), rat_int(2)];
        let (t, arg) = min_collapse(&h, &[rat_int(-1), rat_int(-1)]).unwrap();
        assert_eq!(t, rat_int(1));
        assert_eq!(arg, vec![0]);
        let (t, arg) = min_collapse(&h, &[rat_int(-1), rat_int(-2)]).unwrap();
        assert_eq!(t, rat_int(1));
        assert_eq!(arg, vec![0, 1]);
        assert!(min_collapse(&h, &[rat_int(0), rat_int(1)]).is_none());
    }

    #[test]
    fn collapse_time_on_l_origami() {
        let s = l_origami();
        let (_hom, t) = stratum_setup(&s);
        let dec = decompose_periodic(&s, &vec2(1, 0)).unwrap();
        let classes = equivalence_classes(&t, &dec).unwrap();
        assert_eq!(classes.len(), 2);
        let small = classes
            .iter()
            .find(|c| dec.cylinders[c.members[0]].circumference.is_one())
            .unwrap();
        let big = classes.iter().find(|c| *c != small).unwrap();
        let sigma = standard_deformation(&dec, small);

        let down: Vec<QQi> = sigma.iter().map(|z| -z.times_i()).collect();
        let spec = collapse_time(&s, &t, &dec, small, &down).unwrap();
        assert_eq!(spec.t_v, rat_int(1));
        assert_eq!(spec.collapsing, small.members);
        assert_eq!(spec.rates, vec![-QQi::one().times_i()]);
        assert_eq!(spec.contracted, vec![vec2(0, 1)]);

        let up: Vec<QQi> = sigma.iter().map(|z| z.times_i()).collect();
        assert!(matches!(collapse_time(&s, &t, &dec, small, &up), Err(Error::NoCollapse(_))));
        assert!(matches!(collapse_time(&s, &t, &dec, small, &sigma), Err(Error::NoCollapse(_))));

        let wrong = standard_deformation(&dec, big);
        assert!(matches!(
            collapse_time(&s, &t, &dec, small, &wrong),
            Err(Error::AssumptionFails(_))
        ));
    }

    #[test]
    fn strip_roundtrip_torus() {
        let s = Surface::origami(&[0], &[0]).unwrap();
        let dec = decompose_periodic(&s, &vec2(1, 0)).unwrap();
        let r = strip_surface(&s, &dec).unwrap();
        assert_eq!(r.area2(), s.area2());
        assert_eq!(r.stratum_string(), s.stratum_string());
        let hom_s = Homology::new(&s);
        let hom_r = Homology::new(&r);
        assert_eq!(hom_r.h1_dim(), hom_s.h1_dim());
    }

    fn roundtrip_direction(s: &Surface, d: &Vec2Q) {
        let dec = decompose_periodic(s, d).unwrap();
        let r = strip_surface(s, &dec).unwrap();
        assert_eq!(r.area2(), s.area2());
        assert_eq!(r.stratum_string(), s.stratum_string());
        assert_eq!(r.num_components(), s.num_components());
        assert_eq!(
            Homology::new(&r).h1_dim(),
            Homology::new(s).h1_dim()
        );
        let rdec = decompose_periodic(&r, d).unwrap();
        let mut orig: Vec<(Rat, Rat, usize, usize)> = dec
            .cylinders
            .iter()
            .map(|c| (c.height.clone(), c.circumference.clone(), c.bottom.len(), c.top.len()))
            .collect();
        let mut redone: Vec<(Rat, Rat, usize, usize)> = rdec
            .cylinders
            .iter()
            .map(|c| (c.height.clone(), c.circumference.clone(), c.bottom.len(), c.top.len()))
            .collect();
        orig.sort();
        redone.sort();
        assert_eq!(orig, redone);
    }

    #[test]
    fn strip_roundtrip_l_origami() {
        let s = l_origami();
        roundtrip_direction(&s, &vec2(1, 0));
        roundtrip_direction(&s, &vec2(0, 1));
        roundtrip_direction(&s, &vec2(1, 1));
        roundtrip_direction(&s, &vec2(2, 1));
    }
}

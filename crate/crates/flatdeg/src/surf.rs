//! The SURF v1 text format.
//!
//! ```text
//! surf 1
//! component c0
//! polygon 0 0/0 1/0 1/1 0/1
//! glue 0.0 0.2
//! glue 0.1 0.3
//! mark 0.0
//! ```
//!
//! Vertex tokens: `x/y` with integer coordinates, `xn/xd/yn/yd` with
//! rational ones, or the two-part form `a/b,c/d`. A `glue` line may end in
//! `flip` for a half-translation gluing (z -> -z + c). `#` starts a
//! comment. Alternatively a file may hold a single `origami h=(..) v=(..)`
//! line with 1-indexed cycle notation.

use crate::error::{Error, Result};
use crate::halftrans::HalfSurface;
use crate::scalar::{fmt_rat, parse_rat, Vec2Q};
use crate::surface::{Corner, DEdge, Polygon, Surface};
use num_traits::One;

#[derive(Clone, Debug)]
pub enum ParsedSurface {
    Translation(Surface),
    Half(HalfSurface),
}

impl ParsedSurface {
    pub fn into_translation(self) -> Result<Surface> {
        match self {
            ParsedSurface::Translation(s) => Ok(s),
            ParsedSurface::Half(_) => Err(Error::AssumptionFails(
                "this operation needs a translation surface, but the input has flipped gluings"
                    .into(),
            )),
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            ParsedSurface::Translation(s) => &s.warnings,
            ParsedSurface::Half(q) => &q.warnings,
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> Error {
    Error::SyntaxError {
        line,
        msg: msg.into(),
    }
}

fn parse_vertex(tok: &str, line: usize) -> Result<Vec2Q> {
    let fail = |msg: String| syntax(line, format!("vertex token {:?}: {}", tok, msg));
    if let Some((a, b)) = tok.split_once(',') {
        let x = parse_rat(a).map_err(|e| fail(e))?;
        let y = parse_rat(b).map_err(|e| fail(e))?;
        return Ok(Vec2Q::new(x, y));
    }
    let parts: Vec<&str> = tok.split('/').collect();
    match parts.len() {
        2 => {
            let x = parse_rat(parts[0]).map_err(|e| fail(e))?;
            let y = parse_rat(parts[1]).map_err(|e| fail(e))?;
            Ok(Vec2Q::new(x, y))
        }
        4 => {
            let x = parse_rat(&format!("{}/{}", parts[0], parts[1])).map_err(|e| fail(e))?;
            let y = parse_rat(&format!("{}/{}", parts[2], parts[3])).map_err(|e| fail(e))?;
            Ok(Vec2Q::new(x, y))
        }
        n => Err(fail(format!("expected 2 or 4 '/'-parts, found {}", n))),
    }
}

fn parse_ref(tok: &str, line: usize) -> Result<(u64, usize)> {
    let (p, e) = tok
        .split_once('.')
        .ok_or_else(|| syntax(line, format!("expected <poly>.<edge>, found {:?}", tok)))?;
    let p = p
        .parse::<u64>()
        .map_err(|_| syntax(line, format!("bad polygon id {:?}", p)))?;
    let e = e
        .parse::<usize>()
        .map_err(|_| syntax(line, format!("bad edge index {:?}", e)))?;
    Ok((p, e))
}

/// Parse one-line cycle notation like "(1 2 3)(4)"; returns the permutation
/// images, 1-indexed, for elements 1..=n.
fn parse_cycles(text: &str, n: usize, line: usize) -> Result<Vec<usize>> {
    let mut perm: Vec<usize> = (0..=n).collect();
    let mut seen = vec![false; n + 1];
    let mut rest = text.trim();
    while !rest.is_empty() {
        if !rest.starts_with('(') {
            return Err(syntax(line, format!("expected '(' in cycles, found {:?}", rest)));
        }
        let close = rest
            .find(')')
            .ok_or_else(|| syntax(line, "unclosed cycle".to_string()))?;
        let inner = &rest[1..close];
        let elems: Vec<usize> = inner
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| syntax(line, format!("bad cycle element {:?}", t)))
            })
            .collect::<Result<_>>()?;
        for &x in &elems {
            if x == 0 || x > n {
                return Err(syntax(line, format!("cycle element {} out of range 1..{}", x, n)));
            }
            if seen[x] {
                return Err(syntax(line, format!("element {} repeated in cycles", x)));
            }
            seen[x] = true;
        }
        for (i, &x) in elems.iter().enumerate() {
            perm[x] = elems[(i + 1) % elems.len()];
        }
        rest = rest[close + 1..].trim_start();
    }
    Ok(perm[1..].to_vec())
}

fn max_cycle_element(text: &str) -> usize {
    text.split(|c: char| !c.is_ascii_digit())
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse::<usize>().ok())
        .max()
        .unwrap_or(0)
}

fn parse_origami_line(rest: &str, line: usize) -> Result<Surface> {
    let h_at = rest
        .find("h=")
        .ok_or_else(|| syntax(line, "origami line needs h=(..)".to_string()))?;
    let v_at = rest
        .find("v=")
        .ok_or_else(|| syntax(line, "origami line needs v=(..)".to_string()))?;
    if v_at < h_at {
        return Err(syntax(line, "write h=(..) before v=(..)".to_string()));
    }
    let h_text = rest[h_at + 2..v_at].trim();
    let v_text = rest[v_at + 2..].trim();
    let n = max_cycle_element(h_text).max(max_cycle_element(v_text));
    if n == 0 {
        return Err(syntax(line, "origami needs at least one square".to_string()));
    }
    let h = parse_cycles(h_text, n, line)?;
    let v = parse_cycles(v_text, n, line)?;
    let h0: Vec<usize> = h.iter().map(|&x| x - 1).collect();
    let v0: Vec<usize> = v.iter().map(|&x| x - 1).collect();
    Surface::origami(&h0, &v0)
}

pub fn parse(text: &str) -> Result<ParsedSurface> {
    let mut lines = text.lines().enumerate().map(|(i, l)| {
        let body = match l.split_once('#') {
            Some((b, _)) => b,
            None => l,
        };
        (i + 1, body.trim())
    });
    let (hline, header) = lines
        .by_ref()
        .find(|(_, l)| !l.is_empty())
        .ok_or_else(|| syntax(1, "empty file".to_string()))?;
    if header != "surf 1" {
        return Err(syntax(hline, format!("expected header \"surf 1\", found {:?}", header)));
    }

    struct PolyRec {
        id: u64,
        comp: usize,
        vertices: Vec<Vec2Q>,
    }
    let mut comps: Vec<String> = Vec::new();
    let mut polys: Vec<PolyRec> = Vec::new();
    let mut trans_pairs: Vec<((u64, usize), (u64, usize), usize)> = Vec::new();
    let mut flip_pairs: Vec<((u64, usize), (u64, usize), usize)> = Vec::new();
    let mut mark_refs: Vec<((u64, usize), usize)> = Vec::new();
    let mut origami: Option<Surface> = None;
    let mut saw_polygon_form = false;

    for (no, body) in lines {
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let kw = toks.next().unwrap();
        match kw {
            "origami" => {
                if origami.is_some() || saw_polygon_form {
                    return Err(syntax(no, "origami must be the only content line".to_string()));
                }
                let rest = body["origami".len()..].trim();
                origami = Some(parse_origami_line(rest, no)?);
            }
            "component" => {
                saw_polygon_form = true;
                let name = toks
                    .next()
                    .ok_or_else(|| syntax(no, "component needs a name".to_string()))?;
                if toks.next().is_some() {
                    return Err(syntax(no, "trailing tokens after component name".to_string()));
                }
                comps.push(name.to_string());
            }
            "polygon" => {
                saw_polygon_form = true;
                let id_tok = toks
                    .next()
                    .ok_or_else(|| syntax(no, "polygon needs an id".to_string()))?;
                let id = id_tok
                    .parse::<u64>()
                    .map_err(|_| syntax(no, format!("bad polygon id {:?}", id_tok)))?;
                if polys.iter().any(|p| p.id == id) {
                    return Err(syntax(no, format!("polygon id {} repeated", id)));
                }
                let vertices: Vec<Vec2Q> = toks
                    .map(|t| parse_vertex(t, no))
                    .collect::<Result<_>>()?;
                if vertices.len() < 3 {
                    return Err(syntax(no, "polygon needs at least 3 vertices".to_string()));
                }
                if comps.is_empty() {
                    comps.push("c0".to_string());
                }
                polys.push(PolyRec {
                    id,
                    comp: comps.len() - 1,
                    vertices,
                });
            }
            "glue" => {
                saw_polygon_form = true;
                let a = parse_ref(
                    toks.next().ok_or_else(|| syntax(no, "glue needs two edges".to_string()))?,
                    no,
                )?;
                let b = parse_ref(
                    toks.next().ok_or_else(|| syntax(no, "glue needs two edges".to_string()))?,
                    no,
                )?;
                match toks.next() {
                    None => trans_pairs.push((a, b, no)),
                    Some("flip") => flip_pairs.push((a, b, no)),
                    Some(t) => {
                        return Err(syntax(no, format!("unexpected token {:?} after glue", t)))
                    }
                }
            }
            "mark" => {
                saw_polygon_form = true;
                let r = parse_ref(
                    toks.next().ok_or_else(|| syntax(no, "mark needs a vertex".to_string()))?,
                    no,
                )?;
                mark_refs.push((r, no));
            }
            other => {
                return Err(syntax(no, format!("unknown keyword {:?}", other)));
            }
        }
    }

    if let Some(s) = origami {
        return Ok(ParsedSurface::Translation(s));
    }
    if polys.is_empty() {
        return Err(syntax(1, "file defines no polygons".to_string()));
    }

    let index_of = |r: (u64, usize), no: usize| -> Result<DEdge> {
        let p = polys
            .iter()
            .position(|pr| pr.id == r.0)
            .ok_or_else(|| syntax(no, format!("unknown polygon id {}", r.0)))?;
        if r.1 >= polys[p].vertices.len() {
            return Err(syntax(
                no,
                format!("polygon {} has no edge {}", r.0, r.1),
            ));
        }
        Ok(DEdge::new(p, r.1))
    };

    let polygons: Vec<Polygon> = polys
        .iter()
        .map(|p| Polygon::new(p.vertices.clone()))
        .collect();
    let poly_component: Vec<usize> = polys.iter().map(|p| p.comp).collect();
    let mut tpairs: Vec<(DEdge, DEdge)> = Vec::new();
    for &(a, b, no) in &trans_pairs {
        tpairs.push((index_of(a, no)?, index_of(b, no)?));
    }
    let mut fpairs: Vec<(DEdge, DEdge)> = Vec::new();
    for &(a, b, no) in &flip_pairs {
        fpairs.push((index_of(a, no)?, index_of(b, no)?));
    }
    let mut marked: Vec<Corner> = Vec::new();
    for &(r, no) in &mark_refs {
        let d = index_of(r, no)?;
        marked.push((d.poly, d.edge));
    }

    if fpairs.is_empty() {
        let s = Surface::build(polygons, poly_component, comps, &tpairs, &marked)?;
        Ok(ParsedSurface::Translation(s))
    } else {
        let q = HalfSurface::build(polygons, poly_component, comps, &tpairs, &fpairs, &marked)?;
        Ok(ParsedSurface::Half(q))
    }
}

fn vertex_token(v: &Vec2Q) -> String {
    if v.x.denom().is_one() && v.y.denom().is_one() {
        format!("{}/{}", v.x.numer(), v.y.numer())
    } else {
        format!("{},{}", fmt_rat(&v.x), fmt_rat(&v.y))
    }
}

fn serialize_parts(
    npolys: usize,
    poly_component: &[usize],
    component_names: &[String],
    polygons: &[Polygon],
    glue_lines: &[String],
    mark_lines: &[String],
) -> String {
    let mut out = String::from("surf 1\n");
    for (c, name) in component_names.iter().enumerate() {
        out.push_str(&format!("component {}\n", name));
        for p in 0..npolys {
            if poly_component[p] != c {
                continue;
            }
            let toks: Vec<String> = polygons[p].vertices.iter().map(vertex_token).collect();
            out.push_str(&format!("polygon {} {}\n", p, toks.join(" ")));
        }
    }
    for l in glue_lines {
        out.push_str(l);
        out.push('\n');
    }
    for l in mark_lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}

pub fn serialize(s: &Surface) -> String {
    let glue: Vec<String> = s
        .edge_classes
        .iter()
        .map(|(a, b)| format!("glue {}.{} {}.{}", a.poly, a.edge, b.poly, b.edge))
        .collect();
    let marks: Vec<String> = s
        .marks
        .iter()
        .map(|&m| {
            let &(p, i) = s.vertex_classes[m].iter().min().unwrap();
            format!("mark {}.{}", p, i)
        })
        .collect();
    serialize_parts(
        s.polygons.len(),
        &s.poly_component,
        &s.component_names,
        &s.polygons,
        &glue,
        &marks,
    )
}

pub fn serialize_half(q: &HalfSurface) -> String {
    let glue: Vec<String> = q
        .edge_classes
        .iter()
        .map(|&(a, b)| {
            let flip = if q.flipped.contains(&a) { " flip" } else { "" };
            format!("glue {}.{} {}.{}{}", a.poly, a.edge, b.poly, b.edge, flip)
        })
        .collect();
    let marks: Vec<String> = q
        .marks
        .iter()
        .map(|&m| {
            let &(p, i) = q.vertex_classes[m].iter().min().unwrap();
            format!("mark {}.{}", p, i)
        })
        .collect();
    serialize_parts(
        q.polygons.len(),
        &q.poly_component,
        &q.component_names,
        &q.polygons,
        &glue,
        &marks,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_torus() {
        let text = "surf 1\n\
                    # a unit torus\n\
                    polygon 0 0/0 1/0 1/1 0/1\n\
                    glue 0.0 0.2\n\
                    glue 0.1 0.3\n\
                    mark 0.0\n";
        let s = parse(text).unwrap().into_translation().unwrap();
        assert_eq!(s.stratum_string(), "H(0)");
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn roundtrip_translation() {
        let s = Surface::origami(&[1, 2, 3, 0], &[2, 1, 0, 3]).unwrap();
        let text = serialize(&s);
        let back = parse(&text).unwrap().into_translation().unwrap();
        assert_eq!(serialize(&back), text);
        assert_eq!(back.canonical_key(), s.canonical_key());
    }

    #[test]
    fn roundtrip_half() {
        let q = crate::halftrans::tests::pillowcase();
        let text = serialize_half(&q);
        let parsed = parse(&text).unwrap();
        let ParsedSurface::Half(back) = parsed else {
            panic!("expected a half-translation surface");
        };
        assert_eq!(serialize_half(&back), text);
        assert_eq!(back.stratum_string(), "Q(-1,-1,-1,-1)");
    }

    #[test]
    fn rational_vertices() {
        let text = "surf 1\n\
                    polygon 0 0/0 1/2,0 1/2/1/3 0,1/3\n\
                    glue 0.0 0.2\n\
                    glue 0.1 0.3\n";
        let s = parse(text).unwrap().into_translation().unwrap();
        assert_eq!(s.polygons[0].vertex(2), &Vec2Q::new(crate::scalar::rat(1, 2), crate::scalar::rat(1, 3)));
        let text2 = serialize(&s);
        let back = parse(&text2).unwrap().into_translation().unwrap();
        assert_eq!(serialize(&back), text2);
    }

    #[test]
    fn origami_line() {
        let s = parse("surf 1\norigami h=(1 2 3) v=(1)(2)(3)\n")
            .unwrap()
            .into_translation()
            .unwrap();
        assert_eq!(s.polygons.len(), 3);
        assert_eq!(s.stratum_string(), "H(0,0,0)");
        let l = parse("surf 1\norigami h=(1 2) v=(1 3)\n")
            .unwrap()
            .into_translation()
            .unwrap();
        assert_eq!(l.stratum_string(), "H(2)");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let cases = [
            ("polygon 0 0/0 1/0 1/1\n", 1usize),
            ("surf 1\npolygon 0 0/0 1/0/1 1/1\n", 2),
            ("surf 1\npolygon 0 0/0 1/0 1/1\nglue 0.0 0.5\n", 3),
            ("surf 1\nwhat 1 2\n", 2),
            ("surf 1\norigami h=(1 2 v=(1)\n", 2),
            ("surf 1\norigami h=(1 2)(2 3) v=(1)\n", 2),
        ];
        for (text, want_line) in cases {
            match parse(text) {
                Err(Error::SyntaxError { line, .. }) => {
                    assert_eq!(line, want_line, "input {:?}", text)
                }
                other => panic!("expected syntax error for {:?}, got {:?}", text, other),
            }
        }
    }

    #[test]
    fn components_kept() {
        let text = "surf 1\n\
                    component left\n\
                    polygon 0 0/0 1/0 1/1 0/1\n\
                    component right\n\
                    polygon 1 0/0 1/0 1/1 0/1\n\
                    glue 0.0 0.2\nglue 0.1 0.3\n\
                    glue 1.0 1.2\nglue 1.1 1.3\n";
        let s = parse(text).unwrap().into_translation().unwrap();
        assert_eq!(s.component_names, vec!["left".to_string(), "right".to_string()]);
        assert_eq!(s.stratum_string(), "H(0)xH(0)");
        let back = parse(&serialize(&s)).unwrap().into_translation().unwrap();
        assert_eq!(back.component_names, s.component_names);
    }

    #[test]
    fn mark_on_cone_point_warns() {
        let s = Surface::origami(&[1, 0, 2], &[2, 1, 0]).unwrap();
        let mut text = serialize(&s);
        text.push_str("mark 0.0\n");
        let parsed = parse(&text).unwrap();
        assert!(!parsed.warnings().is_empty());
    }
}

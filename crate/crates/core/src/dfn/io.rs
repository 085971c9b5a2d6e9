//! Line-oriented text format for DFN problems.
//!
//! ```text
//! # comment
//! DFN <n_fractures>
//! FRACTURE <id> <K> <n_vertices>
//! <x> <y> <z>            (n_vertices lines)
//! BC <fracture_id> <edge_index> DIR|NEU <expression>
//! FORCING <fracture_id> <expression> | FROM_EXACT
//! EXACT <fracture_id> <expression>
//! ```
//!
//! Edges without a `BC` record are homogeneous Neumann. Fractures without a
//! `FORCING` record have zero forcing. `FROM_EXACT` sets `f = −K Δh` from the
//! `EXACT` record of the same fracture.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;

use super::{
    BcKind, BoundaryCondition, Dfn, DfnError, Expr, Forcing, Fracture, ProblemSpec, Result,
};

pub fn load_dfn(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dfn".into());
    parse_dfn(&text, &name)
}

fn perr(line: usize, msg: impl Into<String>) -> DfnError {
    DfnError::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| perr(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| perr(line, format!("invalid {what} '{tok}'")))
}

/// Remainder of `line` after the first `n` whitespace-separated tokens.
fn rest_after(line: &str, n: usize) -> &str {
    let mut s = line.trim_start();
    for _ in 0..n {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        s = s[end..].trim_start();
    }
    s.trim_end()
}

fn expr(src: &str, line: usize) -> Result<Expr> {
    if src.is_empty() {
        return Err(perr(line, "missing expression"));
    }
    Expr::parse(src).map_err(|e| perr(line, e.to_string()))
}

struct RawFracture {
    id: usize,
    k: f64,
    verts: Vec<Point3<f64>>,
    line: usize,
}

pub fn parse_dfn(text: &str, name: &str) -> Result<ProblemSpec> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut it = lines.into_iter().peekable();

    let (hline, header) = it.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("DFN") {
        return Err(perr(hline, "expected 'DFN <n_fractures>' header"));
    }
    let nfrac: usize = num(toks.next(), hline, "fracture count")?;

    let mut raw: Vec<RawFracture> = Vec::with_capacity(nfrac);
    let mut bcs: Vec<(usize, usize, usize, BoundaryCondition)> = Vec::new();
    let mut forcing: Vec<(usize, usize, Option<Expr>)> = Vec::new();
    let mut exact: Vec<(usize, usize, Expr)> = Vec::new();

    while let Some((ln, l)) = it.next() {
        let mut toks = l.split_whitespace();
        match toks.next().unwrap_or("") {
            "FRACTURE" => {
                let id: usize = num(toks.next(), ln, "fracture id")?;
                let k: f64 = num(toks.next(), ln, "transmissivity")?;
                let nv: usize = num(toks.next(), ln, "vertex count")?;
                let mut verts = Vec::with_capacity(nv);
                for _ in 0..nv {
                    let (vl, v) = it
                        .next()
                        .ok_or_else(|| perr(ln, "unexpected end of file in vertex list"))?;
                    let mut c = v.split_whitespace();
                    let x = num(c.next(), vl, "x")?;
                    let y = num(c.next(), vl, "y")?;
                    let z = num(c.next(), vl, "z")?;
                    if c.next().is_some() {
                        return Err(perr(vl, "expected exactly three coordinates"));
                    }
                    verts.push(Point3::new(x, y, z));
                }
                raw.push(RawFracture {
                    id,
                    k,
                    verts,
                    line: ln,
                });
            }
            "BC" => {
                let fid: usize = num(toks.next(), ln, "fracture id")?;
                let edge: usize = num(toks.next(), ln, "edge index")?;
                let kind = match toks.next() {
                    Some("DIR") => BcKind::Dirichlet,
                    Some("NEU") => BcKind::Neumann,
                    other => {
                        return Err(perr(ln, format!("expected DIR or NEU, got {other:?}")))
                    }
                };
                let value = expr(rest_after(l, 4), ln)?;
                bcs.push((ln, fid, edge, BoundaryCondition { kind, value }));
            }
            "FORCING" => {
                let fid: usize = num(toks.next(), ln, "fracture id")?;
                let src = rest_after(l, 2);
                let e = if src == "FROM_EXACT" {
                    None
                } else {
                    Some(expr(src, ln)?)
                };
                forcing.push((ln, fid, e));
            }
            "EXACT" => {
                let fid: usize = num(toks.next(), ln, "fracture id")?;
                exact.push((ln, fid, expr(rest_after(l, 2), ln)?));
            }
            other => return Err(perr(ln, format!("unknown record '{other}'"))),
        }
    }

    if raw.len() != nfrac {
        return Err(perr(
            hline,
            format!("header declares {nfrac} fractures, found {}", raw.len()),
        ));
    }
    let mut index = HashMap::new();
    for (i, r) in raw.iter().enumerate() {
        if index.insert(r.id, i).is_some() {
            return Err(perr(r.line, format!("duplicate fracture id {}", r.id)));
        }
    }
    let lookup = |ln: usize, fid: usize| {
        index
            .get(&fid)
            .copied()
            .ok_or_else(|| perr(ln, format!("unknown fracture id {fid}")))
    };

    let fractures = raw
        .into_iter()
        .map(|r| Fracture::new(r.id, r.verts, r.k))
        .collect::<Result<Vec<_>>>()?;

    let mut boundary: Vec<Vec<BoundaryCondition>> = fractures
        .iter()
        .map(|f| vec![BoundaryCondition::homogeneous_neumann(); f.polygon3d.len()])
        .collect();
    for (ln, fid, edge, bc) in bcs {
        let i = lookup(ln, fid)?;
        let slot = boundary[i]
            .get_mut(edge)
            .ok_or_else(|| perr(ln, format!("fracture {fid} has no edge {edge}")))?;
        *slot = bc;
    }
    let mut exact_v: Vec<Option<Expr>> = vec![None; fractures.len()];
    for (ln, fid, e) in exact {
        exact_v[lookup(ln, fid)?] = Some(e);
    }
    let mut forcing_v = vec![Forcing::Zero; fractures.len()];
    for (ln, fid, e) in forcing {
        let i = lookup(ln, fid)?;
        forcing_v[i] = match e {
            Some(e) => Forcing::Expr(e),
            None => Forcing::FromExact,
        };
    }

    let dfn = Dfn::new(fractures, boundary)?;
    ProblemSpec::new(name, dfn, forcing_v, exact_v)
}

/// Serializes a problem in the format read by [`parse_dfn`].
pub fn write_dfn(problem: &ProblemSpec) -> String {
    let dfn = &problem.dfn;
    let mut s = String::new();
    let _ = writeln!(s, "DFN {}", dfn.fractures.len());
    for f in &dfn.fractures {
        let _ = writeln!(
            s,
            "FRACTURE {} {:?} {}",
            f.id,
            f.transmissivity,
            f.polygon3d.len()
        );
        for p in &f.polygon3d {
            let _ = writeln!(s, "{:?} {:?} {:?}", p.x, p.y, p.z);
        }
    }
    for (i, f) in dfn.fractures.iter().enumerate() {
        for (e, bc) in dfn.boundary[i].iter().enumerate() {
            let kind = match bc.kind {
                BcKind::Dirichlet => "DIR",
                BcKind::Neumann => "NEU",
            };
            let _ = writeln!(s, "BC {} {} {} {}", f.id, e, kind, bc.value);
        }
    }
    for (i, f) in dfn.fractures.iter().enumerate() {
        match &problem.forcing[i] {
            Forcing::Zero => {}
            Forcing::Expr(e) => {
                let _ = writeln!(s, "FORCING {} {}", f.id, e);
            }
            Forcing::FromExact => {
                let _ = writeln!(s, "FORCING {} FROM_EXACT", f.id);
            }
        }
        if let Some(e) = &problem.exact[i] {
            let _ = writeln!(s, "EXACT {} {}", f.id, e);
        }
    }
    s
}

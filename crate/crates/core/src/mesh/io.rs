//! Plain-text mesh format:
//!
//! ```text
//! vertices N elements M
//! x y            (N lines)
//! i j k          (M lines, zero-based vertex ids)
//! i j TAG        (one line per boundary edge, until end of file)
//! ```

use std::io::{BufRead, Write};

use super::{BoundaryEdge, BoundaryTag, Mesh};
use crate::error::{Error, Result};

pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    writeln!(out, "vertices {} elements {}", mesh.num_vertices(), mesh.num_elements())?;
    for p in mesh.vertices() {
        writeln!(out, "{:?} {:?}", p[0], p[1])?;
    }
    for t in mesh.elements() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    for b in mesh.boundary_edges() {
        writeln!(out, "{} {} {}", b.vertices[0], b.vertices[1], b.tag)?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("mesh line {line}: malformed field")))
}

pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|s| (i + 1, s)))
        .filter(|r| r.as_ref().map_or(true, |(_, s)| !s.trim().is_empty()));

    let (ln, header) = lines
        .next()
        .ok_or_else(|| Error::Format("empty mesh file".into()))??;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.len() != 4 || tok[0] != "vertices" || tok[2] != "elements" {
        return Err(Error::Format(format!("mesh line {ln}: expected `vertices N elements M`")));
    }
    let nv: usize = parse(Some(tok[1]), ln)?;
    let ne: usize = parse(Some(tok[3]), ln)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, s) = lines
            .next()
            .ok_or_else(|| Error::Format("truncated vertex block".into()))??;
        let mut it = s.split_whitespace();
        vertices.push([parse(it.next(), ln)?, parse(it.next(), ln)?]);
    }
    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, s) = lines
            .next()
            .ok_or_else(|| Error::Format("truncated element block".into()))??;
        let mut it = s.split_whitespace();
        elements.push([parse(it.next(), ln)?, parse(it.next(), ln)?, parse(it.next(), ln)?]);
    }
    let mut boundary = Vec::new();
    for line in lines {
        let (ln, s) = line?;
        let mut it = s.split_whitespace();
        let a = parse(it.next(), ln)?;
        let b = parse(it.next(), ln)?;
        let tag: BoundaryTag = it
            .next()
            .ok_or_else(|| Error::Format(format!("mesh line {ln}: missing tag")))?
            .parse()?;
        boundary.push(BoundaryEdge { vertices: [a, b], tag });
    }
    Mesh::new(vertices, elements, boundary)
}

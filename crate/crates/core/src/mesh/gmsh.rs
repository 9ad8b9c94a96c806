//! Gmsh MSH 2.2 ASCII reader and writer.
//!
//! Only linear simplices are accepted: triangles (type 2) and tetrahedra
//! (type 4) as elements, with lines (type 1) or triangles acting as marked
//! boundary facets one dimension down. Point elements (type 15) are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundaryFacet, Mesh, Point};
use crate::error::{Error, Result};

struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        loop {
            match self.inner.next() {
                Some((i, l)) => {
                    self.line = i + 1;
                    let l = l.trim();
                    if !l.is_empty() {
                        return Ok(l);
                    }
                }
                None => return Err(self.err("unexpected end of file")),
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::MeshParse {
            path: self.path.to_path_buf(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: Option<&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("expected {what}")))
    }

    fn next_count(&mut self, what: &str) -> Result<usize> {
        let l = self.next_line()?;
        self.parse(l.split_whitespace().next(), what)
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let l = self.next_line()?;
        if l == tag {
            Ok(())
        } else {
            Err(self.err(format!("expected {tag}, found '{l}'")))
        }
    }
}

struct RawElement {
    kind: u32,
    physical: Option<i64>,
    nodes: Vec<usize>,
}

pub fn read_gmsh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gmsh(&text, path)
}

pub(crate) fn parse_gmsh(text: &str, path: &Path) -> Result<Mesh> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut physical_names: HashMap<i64, String> = HashMap::new();
    let mut node_index: HashMap<i64, usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    let mut raw: Vec<RawElement> = Vec::new();
    let mut saw_format = false;

    while let Some((i, l)) = lines.inner.next() {
        lines.line = i + 1;
        match l.trim() {
            "" => {}
            "$MeshFormat" => {
                let header = lines.next_line()?;
                let mut tok = header.split_whitespace();
                let version: f64 = lines.parse(tok.next(), "format version")?;
                let file_type: i32 = lines.parse(tok.next(), "file type")?;
                if !(2.0..3.0).contains(&version) {
                    return Err(lines.err(format!("MSH version {version} not supported, need 2.x")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                lines.expect("$EndMeshFormat")?;
                saw_format = true;
            }
            "$PhysicalNames" => {
                let n: usize = lines.next_count("name count")?;
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let mut tok = l.splitn(3, char::is_whitespace);
                    let _dim: i32 = lines.parse(tok.next(), "physical dimension")?;
                    let tag: i64 = lines.parse(tok.next(), "physical tag")?;
                    let name = tok.next().unwrap_or("").trim().trim_matches('"').to_string();
                    physical_names.insert(tag, name);
                }
                lines.expect("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let n: usize = lines.next_count("node count")?;
                nodes.reserve(n);
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let mut tok = l.split_whitespace();
                    let id: i64 = lines.parse(tok.next(), "node id")?;
                    let x: f64 = lines.parse(tok.next(), "x coordinate")?;
                    let y: f64 = lines.parse(tok.next(), "y coordinate")?;
                    let z: f64 = lines.parse(tok.next(), "z coordinate")?;
                    if node_index.insert(id, nodes.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    nodes.push([x, y, z]);
                }
                lines.expect("$EndNodes")?;
            }
            "$Elements" => {
                let n: usize = lines.next_count("element count")?;
                for _ in 0..n {
                    let l = lines.next_line()?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    let kind: u32 = lines.parse(tok.get(1).copied(), "element type")?;
                    let ntags: usize = lines.parse(tok.get(2).copied(), "tag count")?;
                    let physical = if ntags > 0 {
                        Some(lines.parse::<i64>(tok.get(3).copied(), "physical tag")?)
                    } else {
                        None
                    };
                    let expected = match kind {
                        1 => 2,
                        2 => 3,
                        4 => 4,
                        15 => 1,
                        other => {
                            return Err(Error::UnsupportedElement(format!(
                                "gmsh type {other} (line {})",
                                lines.line
                            )))
                        }
                    };
                    let ids = &tok[(3 + ntags).min(tok.len())..];
                    if ids.len() != expected {
                        return Err(lines.err(format!(
                            "element type {kind} needs {expected} nodes, found {}",
                            ids.len()
                        )));
                    }
                    let mut conn = Vec::with_capacity(expected);
                    for t in ids {
                        let id: i64 = lines.parse(Some(t), "node id")?;
                        let idx = *node_index
                            .get(&id)
                            .ok_or_else(|| lines.err(format!("unknown node id {id}")))?;
                        conn.push(idx);
                    }
                    raw.push(RawElement {
                        kind,
                        physical,
                        nodes: conn,
                    });
                }
                lines.expect("$EndElements")?;
            }
            other if other.starts_with('$') && !other.starts_with("$End") => {
                // Unknown section: skip to its end marker.
                let end = format!("$End{}", &other[1..]);
                while lines.next_line()? != end {}
            }
            other => return Err(lines.err(format!("unexpected content '{other}'"))),
        }
    }
    if !saw_format {
        return Err(lines.err("missing $MeshFormat section"));
    }

    let dim = if raw.iter().any(|r| r.kind == 4) { 3 } else { 2 };
    let (cell_kind, facet_kind) = if dim == 3 { (4, 2) } else { (2, 1) };
    let marker = |tag: Option<i64>| match tag {
        Some(t) => physical_names.get(&t).cloned().unwrap_or_else(|| t.to_string()),
        None => "boundary".to_string(),
    };
    let elements: Vec<Vec<usize>> = raw
        .iter()
        .filter(|r| r.kind == cell_kind)
        .map(|r| r.nodes.clone())
        .collect();
    if elements.is_empty() {
        return Err(lines.err("mesh contains no triangles or tetrahedra"));
    }
    let facets: Vec<BoundaryFacet> = raw
        .iter()
        .filter(|r| r.kind == facet_kind)
        .map(|r| BoundaryFacet {
            nodes: r.nodes.clone(),
            marker: marker(r.physical),
        })
        .collect();
    Mesh::new(dim, nodes, elements, facets)
}

/// Writes the mesh as MSH 2.2 ASCII, assigning one physical tag per marker.
pub fn write_gmsh(mesh: &Mesh, path: &Path) -> Result<()> {
    let markers: Vec<&str> = mesh.markers().into_iter().collect();
    let tag_of = |m: &str| markers.iter().position(|x| *x == m).unwrap() + 1;
    let dim = mesh.dim();
    let domain_tag = markers.len() + 1;

    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(s, "$PhysicalNames\n{}", markers.len() + 1);
    for m in &markers {
        let _ = writeln!(s, "{} {} \"{}\"", dim - 1, tag_of(m), m);
    }
    let _ = writeln!(s, "{dim} {domain_tag} \"domain\"\n$EndPhysicalNames");
    let _ = writeln!(s, "$Nodes\n{}", mesh.num_nodes());
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = writeln!(s, "{} {:e} {:e} {:e}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n");
    let _ = writeln!(s, "$Elements\n{}", mesh.facets().len() + mesh.num_elements());
    let mut id = 1;
    let facet_type = if dim == 3 { 2 } else { 1 };
    for f in mesh.facets() {
        let t = tag_of(&f.marker);
        let _ = write!(s, "{id} {facet_type} 2 {t} {t}");
        for n in &f.nodes {
            let _ = write!(s, " {}", n + 1);
        }
        s.push('\n');
        id += 1;
    }
    let cell_type = if dim == 3 { 4 } else { 2 };
    for conn in mesh.elements() {
        let _ = write!(s, "{id} {cell_type} 2 {domain_tag} {domain_tag}");
        for n in conn {
            let _ = write!(s, " {}", n + 1);
        }
        s.push('\n');
        id += 1;
    }
    s.push_str("$EndElements\n");
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

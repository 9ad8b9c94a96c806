//! Native CSV mesh format: a directory holding `nodes.csv` (`id,x,y[,z]`),
//! `elements.csv` (`id,n0,n1,n2[,n3]`) and optionally `facets.csv`
//! (`marker,n0,n1[,n2]`). Element and facet rows refer to node ids. A first
//! row whose leading field is not numeric is treated as a header.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BoundaryFacet, Mesh, Point};
use crate::error::{Error, Result};

fn rows(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(|f| f.trim().to_string()).collect();
        out.push((i + 1, fields));
    }
    Ok(out)
}

fn is_header(fields: &[String], numeric_col: usize) -> bool {
    fields
        .get(numeric_col)
        .map(|f| f.parse::<f64>().is_err())
        .unwrap_or(true)
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::MeshParse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_native_csv(dir: &Path) -> Result<Mesh> {
    let nodes_path = dir.join("nodes.csv");
    let elements_path = dir.join("elements.csv");
    let facets_path = dir.join("facets.csv");

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    let mut width = None;
    for (k, (line, f)) in rows(&nodes_path)?.into_iter().enumerate() {
        if k == 0 && is_header(&f, 1) {
            continue;
        }
        if f.len() != 3 && f.len() != 4 {
            return Err(parse_err(&nodes_path, line, "expected id,x,y[,z]"));
        }
        if *width.get_or_insert(f.len()) != f.len() {
            return Err(parse_err(&nodes_path, line, "mixed 2D and 3D node rows"));
        }
        let mut p = [0.0; 3];
        for (c, v) in f[1..].iter().enumerate() {
            p[c] = v
                .parse()
                .map_err(|_| parse_err(&nodes_path, line, format!("bad coordinate '{v}'")))?;
        }
        if ids.insert(f[0].clone(), nodes.len()).is_some() {
            return Err(parse_err(&nodes_path, line, format!("duplicate node id {}", f[0])));
        }
        nodes.push(p);
    }
    let coord_dim = width.unwrap_or(3) - 1;

    let lookup = |path: &Path, line: usize, id: &str| {
        ids.get(id)
            .copied()
            .ok_or_else(|| parse_err(path, line, format!("unknown node id {id}")))
    };

    let mut elements = Vec::new();
    let mut dim = None;
    for (k, (line, f)) in rows(&elements_path)?.into_iter().enumerate() {
        if k == 0 && is_header(&f, 1) {
            continue;
        }
        let n = f.len() - 1;
        if n != 3 && n != 4 {
            return Err(Error::UnsupportedElement(format!(
                "{n}-node element at {}:{line}",
                elements_path.display()
            )));
        }
        if *dim.get_or_insert(n - 1) != n - 1 {
            return Err(parse_err(&elements_path, line, "mixed triangles and tetrahedra"));
        }
        let conn = f[1..]
            .iter()
            .map(|id| lookup(&elements_path, line, id))
            .collect::<Result<Vec<_>>>()?;
        elements.push(conn);
    }
    let dim = dim.ok_or_else(|| parse_err(&elements_path, 0, "no elements"))?;
    if dim > coord_dim {
        return Err(parse_err(&nodes_path, 0, "tetrahedra need 3D node coordinates"));
    }

    let mut facets = Vec::new();
    if facets_path.exists() {
        for (k, (line, f)) in rows(&facets_path)?.into_iter().enumerate() {
            if k == 0 && f.first().is_some_and(|s| s == "marker") {
                continue;
            }
            if f.len() != dim + 1 {
                return Err(parse_err(&facets_path, line, format!("expected marker and {dim} nodes")));
            }
            let conn = f[1..]
                .iter()
                .map(|id| lookup(&facets_path, line, id))
                .collect::<Result<Vec<_>>>()?;
            facets.push(BoundaryFacet {
                nodes: conn,
                marker: f[0].clone(),
            });
        }
    }
    Mesh::new(dim, nodes, elements, facets)
}

pub fn write_native_csv(mesh: &Mesh, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = mesh.dim();
    let mut s = String::from(if dim == 2 { "id,x,y\n" } else { "id,x,y,z\n" });
    for (i, p) in mesh.nodes().iter().enumerate() {
        let _ = write!(s, "{i}");
        for c in &p[..dim] {
            let _ = write!(s, ",{c:e}");
        }
        s.push('\n');
    }
    let path = dir.join("nodes.csv");
    fs::write(&path, &s).map_err(|e| Error::io(&path, e))?;

    s = String::from(if dim == 2 { "id,n0,n1,n2\n" } else { "id,n0,n1,n2,n3\n" });
    for (e, conn) in mesh.elements().enumerate() {
        let _ = write!(s, "{e}");
        for n in conn {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
    }
    let path = dir.join("elements.csv");
    fs::write(&path, &s).map_err(|e| Error::io(&path, e))?;

    s = String::from(if dim == 2 { "marker,n0,n1\n" } else { "marker,n0,n1,n2\n" });
    for f in mesh.facets() {
        s.push_str(&f.marker);
        for n in &f.nodes {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
    }
    let path = dir.join("facets.csv");
    fs::write(&path, &s).map_err(|e| Error::io(&path, e))
}

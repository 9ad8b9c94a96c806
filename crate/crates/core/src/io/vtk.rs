//! Legacy ASCII VTK unstructured grids with point data. Numbers are written
//! in shortest round-trip exponent form, so reading a file back and writing
//! it again reproduces it byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

const VTK_TRIANGLE: u8 = 5;
const VTK_TETRA: u8 = 10;

#[derive(Clone, Debug, PartialEq)]
pub enum VtkField {
    Scalars(Vec<f64>),
    Vectors(Vec<[f64; 3]>),
}

impl VtkField {
    fn len(&self) -> usize {
        match self {
            VtkField::Scalars(v) => v.len(),
            VtkField::Vectors(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub point_data: Vec<(String, VtkField)>,
}

fn cell_type(n: usize) -> Result<u8> {
    match n {
        3 => Ok(VTK_TRIANGLE),
        4 => Ok(VTK_TETRA),
        _ => Err(Error::UnsupportedElement(format!("{n}-node cell"))),
    }
}

impl VtkData {
    pub fn from_mesh(mesh: &Mesh, point_data: Vec<(String, VtkField)>) -> Result<Self> {
        for (name, f) in &point_data {
            if f.len() != mesh.num_nodes() {
                return Err(Error::DimensionMismatch(format!(
                    "field '{name}' has {} values for {} nodes",
                    f.len(),
                    mesh.num_nodes()
                )));
            }
        }
        Ok(VtkData {
            title: "bt solution".into(),
            points: mesh.nodes().to_vec(),
            cells: mesh.elements().map(<[usize]>::to_vec).collect(),
            point_data,
        })
    }

    pub fn scalars(&self, name: &str) -> Option<&[f64]> {
        self.point_data.iter().find_map(|(n, f)| match f {
            VtkField::Scalars(v) if n == name => Some(&v[..]),
            _ => None,
        })
    }

    pub fn scalar_names(&self) -> Vec<String> {
        self.point_data
            .iter()
            .filter(|(_, f)| matches!(f, VtkField::Scalars(_)))
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn vectors(&self, name: &str) -> Option<&[[f64; 3]]> {
        self.point_data.iter().find_map(|(n, f)| match f {
            VtkField::Vectors(v) if n == name => Some(&v[..]),
            _ => None,
        })
    }

    /// Rebuilds a mesh (without boundary markers beyond the default).
    pub fn to_mesh(&self) -> Result<Mesh> {
        let dim = match self.cells.first().map(Vec::len) {
            Some(3) => 2,
            Some(4) => 3,
            _ => return Err(Error::InvalidMesh("no triangle or tetrahedron cells".into())),
        };
        Mesh::new(dim, self.points.clone(), self.cells.clone(), Vec::new())
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID", self.title);
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {size}", self.cells.len());
        for c in &self.cells {
            let _ = write!(s, "{}", c.len());
            for n in c {
                let _ = write!(s, " {n}");
            }
            s.push('\n');
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{}", cell_type(c.len())?);
        }
        if !self.point_data.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.points.len());
        }
        for (name, f) in &self.point_data {
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(Error::invalid("vtk", format!("field name '{name}' must be a single word")));
            }
            match f {
                VtkField::Scalars(v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in v {
                        let _ = writeln!(s, "{x:e}");
                    }
                }
                VtkField::Vectors(v) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for x in v {
                        let _ = writeln!(s, "{:e} {:e} {:e}", x[0], x[1], x[2]);
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::Format {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if !lines.next().unwrap_or("").starts_with("# vtk DataFile") {
            return Err("missing VTK header".into());
        }
        let title = lines.next().ok_or("missing title")?.to_string();
        if lines.next().map(str::trim) != Some("ASCII") {
            return Err("only ASCII files are supported".into());
        }
        let mut tok = lines.flat_map(str::split_whitespace);
        let mut next = || tok.next().ok_or_else(|| "unexpected end of file".to_string());
        fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("bad number '{s}'"))
        }
        if (next()?, next()?) != ("DATASET", "UNSTRUCTURED_GRID") {
            return Err("expected DATASET UNSTRUCTURED_GRID".into());
        }
        let mut data = VtkData {
            title,
            points: Vec::new(),
            cells: Vec::new(),
            point_data: Vec::new(),
        };
        let mut n_points = 0;
        while let Ok(kw) = next() {
            match kw {
                "POINTS" => {
                    n_points = num(next()?)?;
                    next()?;
                    for _ in 0..n_points {
                        data.points.push([num(next()?)?, num(next()?)?, num(next()?)?]);
                    }
                }
                "CELLS" => {
                    let n: usize = num(next()?)?;
                    next()?;
                    for _ in 0..n {
                        let k: usize = num(next()?)?;
                        let c = (0..k).map(|_| num(next()?)).collect::<std::result::Result<Vec<usize>, _>>()?;
                        if c.iter().any(|&i| i >= n_points) {
                            return Err("cell references a missing point".into());
                        }
                        data.cells.push(c);
                    }
                }
                "CELL_TYPES" => {
                    let n: usize = num(next()?)?;
                    if n != data.cells.len() {
                        return Err("CELL_TYPES count differs from CELLS".into());
                    }
                    for c in &data.cells {
                        let t: u8 = num(next()?)?;
                        if cell_type(c.len()).ok() != Some(t) {
                            return Err(format!("unsupported cell type {t} with {} nodes", c.len()));
                        }
                    }
                }
                "POINT_DATA" => {
                    if num::<usize>(next()?)? != n_points {
                        return Err("POINT_DATA count differs from POINTS".into());
                    }
                }
                "SCALARS" => {
                    let name = next()?.to_string();
                    next()?;
                    if num::<usize>(next()?)? != 1 {
                        return Err("only single-component scalars are supported".into());
                    }
                    if (next()?, next()?) != ("LOOKUP_TABLE", "default") {
                        return Err("expected LOOKUP_TABLE default".into());
                    }
                    let v = (0..n_points).map(|_| num(next()?)).collect::<std::result::Result<_, _>>()?;
                    data.point_data.push((name, VtkField::Scalars(v)));
                }
                "VECTORS" => {
                    let name = next()?.to_string();
                    next()?;
                    let mut v = Vec::with_capacity(n_points);
                    for _ in 0..n_points {
                        v.push([num(next()?)?, num(next()?)?, num(next()?)?]);
                    }
                    data.point_data.push((name, VtkField::Vectors(v)));
                }
                other => return Err(format!("unsupported section '{other}'")),
            }
        }
        Ok(data)
    }
}

/// Writes `mesh` with nodal fields to a legacy VTK file.
pub fn write_vtk(mesh: &Mesh, fields: Vec<(String, VtkField)>, path: &Path) -> Result<()> {
    VtkData::from_mesh(mesh, fields)?.write(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::jittered_rectangle_mesh;

    fn one_triangle() -> Mesh {
        Mesh::new(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![vec![0, 1, 2]], vec![]).unwrap()
    }

    #[test]
    fn triangle_file_layout() {
        let d = VtkData::from_mesh(&one_triangle(), vec![("c".into(), VtkField::Scalars(vec![0.0, 0.5, 1.0]))]).unwrap();
        let text = d.to_text().unwrap();
        assert!(text.contains("POINTS 3 double\n"));
        assert!(text.contains("CELLS 1 4\n3 0 1 2\n"));
        assert!(text.contains("CELL_TYPES 1\n5\n"));
        assert!(text.contains("POINT_DATA 3\nSCALARS c double 1\nLOOKUP_TABLE default\n0e0\n5e-1\n1e0\n"));
    }

    #[test]
    fn tetrahedron_cell_type() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = Mesh::new(3, nodes, vec![vec![0, 1, 2, 3]], vec![]).unwrap();
        let text = VtkData::from_mesh(&m, vec![]).unwrap().to_text().unwrap();
        assert!(text.ends_with("CELL_TYPES 1\n10\n"), "{text}");
    }

    #[test]
    fn write_read_write_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = jittered_rectangle_mesh(2.0, 0.62, 6, 5, 0.25, 3).unwrap();
        let c: Vec<f64> = m.nodes().iter().map(|p| (p[0] * 7.1).sin() / 3.0).collect();
        let u: Vec<[f64; 3]> = m.nodes().iter().map(|p| [p[1], -p[0] * 1e-7, 0.0]).collect();
        let fields = vec![("c".to_string(), VtkField::Scalars(c.clone())), ("velocity".to_string(), VtkField::Vectors(u))];
        let (a, b) = (dir.path().join("a.vtk"), dir.path().join("b.vtk"));
        write_vtk(&m, fields, &a).unwrap();
        let back = VtkData::read(&a).unwrap();
        assert_eq!(back.scalars("c").unwrap(), &c[..]);
        back.write(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let mesh = back.to_mesh().unwrap();
        assert_eq!(mesh.num_elements(), m.num_elements());
    }

    /// Independent reader: pulls the numeric blocks by counting tokens after
    /// each keyword, the way generic VTK readers do.
    #[test]
    fn reference_reader_agrees() {
        let m = jittered_rectangle_mesh(1.0, 1.0, 3, 3, 0.2, 9).unwrap();
        let c: Vec<f64> = (0..m.num_nodes()).map(|i| i as f64 * 0.37 - 1.0).collect();
        let text = VtkData::from_mesh(&m, vec![("c".into(), VtkField::Scalars(c.clone()))]).unwrap().to_text().unwrap();
        let toks: Vec<&str> = text.split_whitespace().collect();
        let at = |kw: &str| toks.iter().position(|t| *t == kw).unwrap();
        let np: usize = toks[at("POINTS") + 1].parse().unwrap();
        let pts: Vec<f64> = toks[at("POINTS") + 3..][..3 * np].iter().map(|t| t.parse().unwrap()).collect();
        for (i, p) in m.nodes().iter().enumerate() {
            assert_eq!(&pts[3 * i..3 * i + 3], &p[..]);
        }
        let vals: Vec<f64> = toks[at("default") + 1..][..np].iter().map(|t| t.parse().unwrap()).collect();
        assert_eq!(vals, c);
        let nc: usize = toks[at("CELL_TYPES") + 1].parse().unwrap();
        assert!(toks[at("CELL_TYPES") + 2..][..nc].iter().all(|t| *t == "5"));
    }

    #[test]
    fn rejects_unsupported_cells_and_mismatched_fields() {
        let bad = "# vtk DataFile Version 3.0\nx\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS 2 double\n0 0 0 1 0 0\nCELLS 1 3\n2 0 1\nCELL_TYPES 1\n3\n";
        assert!(VtkData::parse(bad).is_err());
        assert!(VtkData::from_mesh(&one_triangle(), vec![("c".into(), VtkField::Scalars(vec![1.0]))]).is_err());
        let d = VtkData::from_mesh(&one_triangle(), vec![("a b".into(), VtkField::Scalars(vec![0.0; 3]))]).unwrap();
        assert!(d.to_text().is_err());
    }
}

//! Linear simplex meshes (triangles in 2D, tetrahedra in 3D) with boundary
//! markers, reference-element geometry and nodal gradient recovery.

mod geometry;
mod gmsh;
mod native;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use nalgebra::Matrix3;

use crate::error::{Error, Result};

pub use geometry::{element_geometry, reference_vertices, ElementGeometry};
pub use gmsh::{read_gmsh, write_gmsh};
pub use native::{read_native_csv, write_native_csv};

pub type Point = [f64; 3];

/// Nodal scalar values aligned with mesh node ordering.
pub type ScalarField = Vec<f64>;

/// Nodal vectors aligned with mesh node ordering. The z component is zero
/// for planar meshes.
pub type VectorField = Vec<[f64; 3]>;

/// A marked face of one boundary element.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    pub marker: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    GmshAscii,
    NativeCsv,
}

impl MeshFormat {
    /// Directories hold the native CSV triple, anything else is read as Gmsh.
    pub fn detect(path: &Path) -> MeshFormat {
        if path.is_dir() {
            MeshFormat::NativeCsv
        } else {
            MeshFormat::GmshAscii
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<Mesh> {
    match format {
        MeshFormat::GmshAscii => read_gmsh(path),
        MeshFormat::NativeCsv => read_native_csv(path),
    }
}

#[derive(Clone, Debug)]
struct FacetOwner {
    element: usize,
    /// Local index of the element vertex opposite the facet.
    opposite: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    elements: Vec<[usize; 4]>,
    facets: Vec<BoundaryFacet>,
    owners: Vec<FacetOwner>,
}

fn sorted_key(nodes: &[usize]) -> [usize; 3] {
    let mut key = [usize::MAX; 3];
    key[..nodes.len()].copy_from_slice(nodes);
    key[..nodes.len()].sort_unstable();
    key
}

fn signed_measure(dim: usize, p: &[Point]) -> f64 {
    let d = |a: usize, i: usize| p[a][i] - p[0][i];
    if dim == 2 {
        0.5 * (d(1, 0) * d(2, 1) - d(2, 0) * d(1, 1))
    } else {
        let m = Matrix3::new(
            d(1, 0), d(2, 0), d(3, 0),
            d(1, 1), d(2, 1), d(3, 1),
            d(1, 2), d(2, 2), d(3, 2),
        );
        m.determinant() / 6.0
    }
}

impl Mesh {
    /// Builds a mesh, reorienting negatively oriented elements. When `facets`
    /// is empty every unshared element face is marked `"boundary"`.
    pub fn new(
        dim: usize,
        nodes: Vec<Point>,
        elements: Vec<Vec<usize>>,
        facets: Vec<BoundaryFacet>,
    ) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension {dim} not supported")));
        }
        let npe = dim + 1;
        let mut elems = Vec::with_capacity(elements.len());
        for (e, conn) in elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has {} nodes, expected {npe}",
                    conn.len()
                )));
            }
            let mut arr = [usize::MAX; 4];
            for (slot, &n) in arr.iter_mut().zip(conn) {
                if n >= nodes.len() {
                    return Err(Error::InvalidMesh(format!(
                        "element {e} references node {n} but the mesh has {} nodes",
                        nodes.len()
                    )));
                }
                *slot = n;
            }
            let pts: Vec<Point> = arr[..npe].iter().map(|&n| nodes[n]).collect();
            let measure = signed_measure(dim, &pts);
            let scale = pts
                .iter()
                .flat_map(|p| p.iter().zip(pts[0].iter()).map(|(a, b)| (a - b).abs()))
                .fold(0.0_f64, f64::max);
            if !(measure.abs() > 1e-14 * scale.powi(dim as i32)) {
                return Err(Error::DegenerateElement { element: e, measure });
            }
            if measure < 0.0 {
                arr.swap(npe - 2, npe - 1);
            }
            elems.push(arr);
        }

        // Every element face keyed by its sorted node triple.
        let mut faces: HashMap<[usize; 3], Vec<FacetOwner>> = HashMap::new();
        for (e, conn) in elems.iter().enumerate() {
            for opposite in 0..npe {
                let face: Vec<usize> = (0..npe).filter(|&i| i != opposite).map(|i| conn[i]).collect();
                faces
                    .entry(sorted_key(&face))
                    .or_default()
                    .push(FacetOwner { element: e, opposite });
            }
        }

        let facets = if facets.is_empty() {
            let mut auto: Vec<(usize, usize, BoundaryFacet)> = faces
                .iter()
                .filter(|(_, owners)| owners.len() == 1)
                .map(|(_, owners)| {
                    let o = &owners[0];
                    let conn = &elems[o.element];
                    let nodes = (0..npe).filter(|&i| i != o.opposite).map(|i| conn[i]).collect();
                    (
                        o.element,
                        o.opposite,
                        BoundaryFacet {
                            nodes,
                            marker: "boundary".to_string(),
                        },
                    )
                })
                .collect();
            auto.sort_by_key(|(e, o, _)| (*e, *o));
            auto.into_iter().map(|(_, _, f)| f).collect()
        } else {
            facets
        };

        let mut owners = Vec::with_capacity(facets.len());
        for (i, f) in facets.iter().enumerate() {
            if f.nodes.len() != dim {
                return Err(Error::InvalidMesh(format!(
                    "boundary facet {i} has {} nodes, expected {dim}",
                    f.nodes.len()
                )));
            }
            match faces.get(&sorted_key(&f.nodes)) {
                Some(list) if list.len() == 1 => owners.push(list[0].clone()),
                Some(list) => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary facet {i} ({}) is shared by {} elements",
                        f.marker,
                        list.len()
                    )))
                }
                None => {
                    return Err(Error::InvalidMesh(format!(
                        "boundary facet {i} ({}) is not a face of any element",
                        f.marker
                    )))
                }
            }
        }

        Ok(Mesh {
            dim,
            nodes,
            elements: elems,
            facets,
            owners,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    /// Node indices of element `e`, positively oriented.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.dim + 1]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.elements.len()).map(move |e| self.element(e))
    }

    pub fn facets(&self) -> &[BoundaryFacet] {
        &self.facets
    }

    pub fn markers(&self) -> BTreeSet<&str> {
        self.facets.iter().map(|f| f.marker.as_str()).collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        let pts: Vec<Point> = self.element(e).iter().map(|&n| self.nodes[n]).collect();
        signed_measure(self.dim, &pts)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_volume(e)).sum()
    }

    /// Outward normal of boundary facet `i` scaled to the facet measure
    /// (edge length in 2D, triangle area in 3D).
    pub fn facet_area_normal(&self, i: usize) -> [f64; 3] {
        let f = &self.facets[i].nodes;
        let p = |k: usize| self.nodes[f[k]];
        let mut n = if self.dim == 2 {
            let t = sub(&p(1), &p(0));
            [t[1], -t[0], 0.0]
        } else {
            let a = sub(&p(1), &p(0));
            let b = sub(&p(2), &p(0));
            let c = cross(&a, &b);
            [0.5 * c[0], 0.5 * c[1], 0.5 * c[2]]
        };
        let owner = &self.owners[i];
        let opp = self.nodes[self.elements[owner.element][owner.opposite]];
        if dot(&sub(&opp, &p(0)), &n) > 0.0 {
            n.iter_mut().for_each(|v| *v = -*v);
        }
        n
    }

    pub fn facet_measure(&self, i: usize) -> f64 {
        norm(&self.facet_area_normal(i))
    }

    /// Recovers nodal velocity gradients `grad[i][j] = d u_i / d x_j` by
    /// volume-weighted averaging of the piecewise-constant element gradients.
    pub fn velocity_gradients(&self, u: &[[f64; 3]]) -> Result<Vec<Matrix3<f64>>> {
        if u.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "velocity has {} entries for {} nodes",
                u.len(),
                self.num_nodes()
            )));
        }
        let mut acc = vec![Matrix3::zeros(); self.num_nodes()];
        let mut weight = vec![0.0; self.num_nodes()];
        for e in 0..self.num_elements() {
            let geo = element_geometry(self, e)?;
            let conn = self.element(e);
            let mut grad = Matrix3::zeros();
            for (a, &n) in conn.iter().enumerate() {
                for i in 0..self.dim {
                    for j in 0..self.dim {
                        grad[(i, j)] += u[n][i] * geo.shape_gradients[a][j];
                    }
                }
            }
            for &n in conn {
                acc[n] += grad * geo.volume;
                weight[n] += geo.volume;
            }
        }
        Ok(acc
            .into_iter()
            .zip(weight)
            .map(|(g, w)| if w > 0.0 { g / w } else { g })
            .collect())
    }
}

/// Nodes on boundary facets whose facet-averaged normal velocity points
/// into the domain.
pub fn inflow_nodes(mesh: &Mesh, u: &[[f64; 3]]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for (i, f) in mesh.facets().iter().enumerate() {
        let n = mesh.facet_area_normal(i);
        let un: f64 = f.nodes.iter().map(|&k| dot(&u[k], &n)).sum::<f64>() / f.nodes.len() as f64;
        if un < 0.0 {
            out.extend(f.nodes.iter().copied());
        }
    }
    out
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> Mesh {
        Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn single_triangle_gets_three_boundary_facets() {
        let m = unit_triangle();
        assert_eq!(m.num_nodes(), 3);
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.facets().len(), 3);
        assert!((m.total_volume() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clockwise_element_is_reoriented() {
        let m = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 2, 1]],
            vec![],
        )
        .unwrap();
        assert!(m.element_volume(0) > 0.0);
    }

    #[test]
    fn degenerate_element_rejected() {
        let err = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![vec![0, 1, 2]],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateElement { .. }));
    }

    #[test]
    fn out_of_range_node_rejected() {
        assert!(Mesh::new(2, vec![[0.0; 3]; 3], vec![vec![0, 1, 5]], vec![]).is_err());
    }

    #[test]
    fn interior_facet_rejected() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let err = Mesh::new(
            2,
            nodes,
            vec![vec![0, 1, 2], vec![0, 2, 3]],
            vec![BoundaryFacet {
                nodes: vec![0, 2],
                marker: "diag".into(),
            }],
        )
        .unwrap_err();
        assert!(err.to_string().contains("shared by 2"));
    }

    #[test]
    fn facet_normals_point_outward() {
        let m = unit_triangle();
        for i in 0..m.facets().len() {
            let n = m.facet_area_normal(i);
            let f = &m.facets()[i].nodes;
            let mid = [
                0.5 * (m.node(f[0])[0] + m.node(f[1])[0]),
                0.5 * (m.node(f[0])[1] + m.node(f[1])[1]),
                0.0,
            ];
            let centroid = [1.0 / 3.0, 1.0 / 3.0, 0.0];
            assert!(dot(&sub(&mid, &centroid), &n) > 0.0);
        }
    }

    #[test]
    fn uniform_flow_inflow_on_upwind_side() {
        let m = unit_triangle();
        let u = vec![[1.0, 0.0, 0.0]; 3];
        let inflow = inflow_nodes(&m, &u);
        assert_eq!(inflow, BTreeSet::from([0, 2]));
        let zero = vec![[0.0; 3]; 3];
        assert!(inflow_nodes(&m, &zero).is_empty());
    }

    #[test]
    fn linear_velocity_gradient_recovered_exactly() {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let m = Mesh::new(2, nodes.clone(), vec![vec![0, 1, 2], vec![0, 2, 3]], vec![]).unwrap();
        let u: Vec<[f64; 3]> = nodes.iter().map(|p| [2.0 * p[1] + p[0], -p[1], 0.0]).collect();
        for g in m.velocity_gradients(&u).unwrap() {
            assert!((g[(0, 0)] - 1.0).abs() < 1e-14);
            assert!((g[(0, 1)] - 2.0).abs() < 1e-14);
            assert!((g[(1, 1)] + 1.0).abs() < 1e-14);
            assert!(g[(1, 0)].abs() < 1e-14);
        }
    }
}

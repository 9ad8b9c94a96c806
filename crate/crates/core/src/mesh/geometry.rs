use nalgebra::{DMatrix, DVector};

use super::Mesh;
use crate::error::{Error, Result};

/// Geometry of one element relative to the symmetric reference simplex
/// (unit-edge equilateral triangle or regular tetrahedron).
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    /// `dx/dxi` with respect to the symmetric reference simplex.
    pub jacobian: DMatrix<f64>,
    /// `dxi/dx`.
    pub inverse_jacobian: DMatrix<f64>,
    /// Covariant metric `G = J^-T J^-1`.
    pub metric: DMatrix<f64>,
    /// Contravariant metric `G^-1 = J J^T`.
    pub metric_inverse: DMatrix<f64>,
    /// Element area (2D) or volume (3D).
    pub volume: f64,
    /// Physical gradients of the linear shape functions, one per vertex.
    pub shape_gradients: Vec<DVector<f64>>,
    /// Length of the longest edge.
    pub longest_edge: f64,
}

/// Vertices of the unit-edge symmetric reference simplex; vertex 0 is the
/// origin.
pub fn reference_vertices(dim: usize) -> Vec<DVector<f64>> {
    let s3 = 3.0_f64.sqrt();
    match dim {
        2 => vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.5, 0.5 * s3]),
        ],
        3 => vec![
            DVector::from_vec(vec![0.0, 0.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.5, 0.5 * s3, 0.0]),
            DVector::from_vec(vec![0.5, s3 / 6.0, (2.0_f64 / 3.0).sqrt()]),
        ],
        _ => panic!("reference simplex requested for dimension {dim}"),
    }
}

/// Linear map from the unit right simplex to the symmetric one.
fn unit_to_symmetric(dim: usize) -> DMatrix<f64> {
    let v = reference_vertices(dim);
    DMatrix::from_fn(dim, dim, |i, j| v[j + 1][i])
}

pub fn element_geometry(mesh: &Mesh, e: usize) -> Result<ElementGeometry> {
    let dim = mesh.dim();
    let conn = mesh.element(e);
    let p0 = mesh.node(conn[0]);
    // Unit-simplex Jacobian: columns are edge vectors from vertex 0.
    let unit_jac = DMatrix::from_fn(dim, dim, |i, j| mesh.node(conn[j + 1])[i] - p0[i]);
    let det = unit_jac.determinant();
    let scale = unit_jac.abs().max();
    if !(det.abs() > 1e-14 * scale.powi(dim as i32)) {
        return Err(Error::DegenerateElement {
            element: e,
            measure: det,
        });
    }
    let unit_inv = unit_jac
        .clone()
        .try_inverse()
        .ok_or(Error::DegenerateElement { element: e, measure: det })?;

    let sym = unit_to_symmetric(dim);
    let sym_inv = sym.clone().try_inverse().expect("reference map is invertible");
    let jacobian = &unit_jac * &sym_inv;
    let inverse_jacobian = &sym * &unit_inv;
    let metric = inverse_jacobian.transpose() * &inverse_jacobian;
    let metric_inverse = &jacobian * jacobian.transpose();

    let volume = det.abs() / if dim == 2 { 2.0 } else { 6.0 };

    // grad N_a = J_unit^-T e_{a-1} for a >= 1; N_0 closes the partition of unity.
    let unit_inv_t = unit_inv.transpose();
    let mut shape_gradients = Vec::with_capacity(dim + 1);
    let mut first = DVector::zeros(dim);
    for a in 0..dim {
        let g = unit_inv_t.column(a).into_owned();
        first -= &g;
        shape_gradients.push(g);
    }
    shape_gradients.insert(0, first);

    let mut longest_edge = 0.0_f64;
    for a in 0..=dim {
        for b in a + 1..=dim {
            let (pa, pb) = (mesh.node(conn[a]), mesh.node(conn[b]));
            let len = (0..dim).map(|i| (pa[i] - pb[i]).powi(2)).sum::<f64>().sqrt();
            longest_edge = longest_edge.max(len);
        }
    }

    Ok(ElementGeometry {
        jacobian,
        inverse_jacobian,
        metric,
        metric_inverse,
        volume,
        shape_gradients,
        longest_edge,
    })
}

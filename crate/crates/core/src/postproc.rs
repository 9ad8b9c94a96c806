//! Field statistics, line probes, flux-weighted outflow averages and the
//! conversion of an outflow hemolysis index to a plasma-free hemoglobin rise.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::femcore::QuadratureRule;
use crate::mesh::{element_geometry, Mesh};
use crate::models::ih_from_linearized;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub negative_node_count: usize,
    /// Volume share of elements with at least one negative node.
    pub negative_volume_fraction: f64,
}

pub fn field_stats(mesh: &Mesh, field: &[f64]) -> Result<FieldStats> {
    if field.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} entries, mesh has {} nodes",
            field.len(),
            mesh.num_nodes()
        )));
    }
    let min = field.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let negative_node_count = field.iter().filter(|&&c| c < 0.0).count();
    let mut neg_vol = 0.0;
    for (e, conn) in mesh.elements().enumerate() {
        if conn.iter().any(|&n| field[n] < 0.0) {
            neg_vol += mesh.element_volume(e);
        }
    }
    Ok(FieldStats {
        min,
        max,
        negative_node_count,
        negative_volume_fraction: neg_vol / mesh.total_volume(),
    })
}

/// Linear element locator: bounding boxes plus shape-function gradients.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    boxes: Vec<([f64; 3], [f64; 3])>,
    grads: Vec<Vec<DVector<f64>>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Result<Self> {
        let mut boxes = Vec::with_capacity(mesh.num_elements());
        let mut grads = Vec::with_capacity(mesh.num_elements());
        for (e, conn) in mesh.elements().enumerate() {
            let mut lo = [f64::INFINITY; 3];
            let mut hi = [f64::NEG_INFINITY; 3];
            for &n in conn {
                let p = mesh.node(n);
                for i in 0..3 {
                    lo[i] = lo[i].min(p[i]);
                    hi[i] = hi[i].max(p[i]);
                }
            }
            boxes.push((lo, hi));
            grads.push(element_geometry(mesh, e)?.shape_gradients);
        }
        Ok(PointLocator { mesh, boxes, grads })
    }

    /// Containing element and barycentric coordinates of `p`.
    pub fn locate(&self, p: &[f64; 3]) -> Option<(usize, Vec<f64>)> {
        let dim = self.mesh.dim();
        for (e, (lo, hi)) in self.boxes.iter().enumerate() {
            let pad = 1e-12 * (0..dim).map(|i| hi[i] - lo[i]).fold(0.0, f64::max);
            if (0..dim).any(|i| p[i] < lo[i] - pad || p[i] > hi[i] + pad) {
                continue;
            }
            let conn = self.mesh.element(e);
            let lam: Vec<f64> = conn
                .iter()
                .zip(&self.grads[e])
                .map(|(&n, g)| {
                    let x = self.mesh.node(n);
                    1.0 + (0..dim).map(|i| g[i] * (p[i] - x[i])).sum::<f64>()
                })
                .collect();
            if lam.iter().all(|&l| l >= -1e-10) {
                return Some((e, lam));
            }
        }
        None
    }

    pub fn interpolate(&self, field: &[f64], p: &[f64; 3]) -> Option<f64> {
        let (e, lam) = self.locate(p)?;
        Some(self.mesh.element(e).iter().zip(&lam).map(|(&n, l)| field[n] * l).sum())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSample {
    /// Arc length from the first point.
    pub s: f64,
    /// `None` where the point lies outside the mesh.
    pub value: Option<f64>,
}

/// `n` equally spaced samples of the P1 field on the segment `p0`-`p1`.
pub fn sample_line(mesh: &Mesh, field: &[f64], p0: [f64; 3], p1: [f64; 3], n: usize) -> Result<Vec<LineSample>> {
    if field.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} entries, mesh has {} nodes",
            field.len(),
            mesh.num_nodes()
        )));
    }
    let loc = PointLocator::new(mesh)?;
    let len = (0..3).map(|i| (p1[i] - p0[i]).powi(2)).sum::<f64>().sqrt();
    let samples: Vec<LineSample> = (0..n)
        .map(|k| {
            let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            let p = [0, 1, 2].map(|i| p0[i] + t * (p1[i] - p0[i]));
            LineSample {
                s: t * len,
                value: loc.interpolate(field, &p),
            }
        })
        .collect();
    if samples.iter().all(|s| s.value.is_none()) {
        return Err(Error::NoIntersection);
    }
    Ok(samples)
}

/// `int (u.n) IH dA / int (u.n) dA` over the facets carrying `marker`.
/// Facet quadrature is exact for products of two linear fields.
pub fn outflow_average(mesh: &Mesh, ih: &[f64], u: &[[f64; 3]], marker: &str) -> Result<f64> {
    let nn = mesh.num_nodes();
    if ih.len() != nn || u.len() != nn {
        return Err(Error::DimensionMismatch(format!(
            "outflow fields have {} and {} entries, mesh has {nn} nodes",
            ih.len(),
            u.len()
        )));
    }
    // Barycentric points and weights on the facet.
    let rule: Vec<(Vec<f64>, f64)> = match mesh.dim() {
        2 => {
            let a = 0.5 + 0.5 / 3.0_f64.sqrt();
            vec![(vec![a, 1.0 - a], 0.5), (vec![1.0 - a, a], 0.5)]
        }
        _ => vec![
            (vec![0.5, 0.5, 0.0], 1.0 / 3.0),
            (vec![0.0, 0.5, 0.5], 1.0 / 3.0),
            (vec![0.5, 0.0, 0.5], 1.0 / 3.0),
        ],
    };
    let (mut num, mut den, mut abs) = (0.0, 0.0, 0.0);
    let mut found = false;
    for (i, f) in mesh.facets().iter().enumerate() {
        if f.marker != marker {
            continue;
        }
        found = true;
        let an = mesh.facet_area_normal(i);
        for (lam, w) in &rule {
            let mut un = 0.0;
            let mut c = 0.0;
            for (&n, l) in f.nodes.iter().zip(lam) {
                un += l * (0..3).map(|k| u[n][k] * an[k]).sum::<f64>();
                c += l * ih[n];
            }
            num += w * un * c;
            den += w * un;
            abs += w * un.abs();
        }
    }
    if !found {
        return Err(Error::InvalidMesh(format!("no boundary facets carry marker '{marker}'")));
    }
    if den == 0.0 || den.abs() <= 1e-14 * abs {
        return Err(Error::ZeroFlux(marker.to_string()));
    }
    Ok(num / den)
}

/// `L2` norm of `field - exact` with the field interpolated linearly,
/// integrated with a collapsed Gauss rule (exact for polynomial `exact` up
/// to degree 3 in 2D and 2 in 3D after squaring).
pub fn l2_error(mesh: &Mesh, field: &[f64], exact: impl Fn(&[f64; 3]) -> f64) -> Result<f64> {
    if field.len() != mesh.num_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "field has {} entries, mesh has {} nodes",
            field.len(),
            mesh.num_nodes()
        )));
    }
    let rule = QuadratureRule::collapsed_gauss4(mesh.dim());
    let mut sum = 0.0;
    for (e, conn) in mesh.elements().enumerate() {
        let vol = mesh.element_volume(e);
        for (bary, w) in rule.points.iter().zip(&rule.weights) {
            let mut p = [0.0; 3];
            let mut v = 0.0;
            for (a, &n) in conn.iter().enumerate() {
                let x = mesh.node(n);
                for i in 0..3 {
                    p[i] += bary[a] * x[i];
                }
                v += bary[a] * field[n];
            }
            sum += w * vol * (v - exact(&p)).powi(2);
        }
    }
    Ok(sum.sqrt())
}

/// Plasma-free hemoglobin rise in a recirculating loop, mg/dL.
/// `hb` in mg/dL, `q` in L/min, `t` in min, `v_loop` in mL.
pub fn delta_phb(ih_out: f64, hb: f64, hct: f64, q: f64, t: f64, v_loop: f64) -> f64 {
    ih_out * hb / (1.0 - hct) * (q * 1000.0 * t) / v_loop
}

/// Nodal `IH` from the linearized index, clamping negatives to zero when
/// asked (fractional powers of negative values are otherwise an error).
pub fn ih_field(linearized: &[f64], beta: f64, clamp_negative: bool) -> Result<Vec<f64>> {
    linearized.iter().map(|&l| ih_from_linearized(l, beta, clamp_negative)).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_stats_csv(path: &Path, rows: &[(String, FieldStats)]) -> Result<()> {
    let mut s = String::from("field,min,max,negative_node_count,negative_volume_fraction\n");
    for (name, st) in rows {
        let _ = writeln!(
            s,
            "{name},{:e},{:e},{},{:e}",
            st.min, st.max, st.negative_node_count, st.negative_volume_fraction
        );
    }
    write_text(path, &s)
}

/// Samples as `s,value`; points outside the mesh get an empty value.
pub fn write_line_csv(path: &Path, samples: &[LineSample]) -> Result<()> {
    let mut s = String::from("s,value\n");
    for p in samples {
        match p.value {
            Some(v) => {
                let _ = writeln!(s, "{:e},{:e}", p.s, v);
            }
            None => {
                let _ = writeln!(s, "{:e},", p.s);
            }
        }
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::rectangle_mesh;
    use crate::mesh::BoundaryFacet;
    use proptest::prelude::*;

    #[test]
    fn stats_of_zero_field() {
        let m = rectangle_mesh(1.0, 1.0, 3, 3).unwrap();
        let s = field_stats(&m, &vec![0.0; m.num_nodes()]).unwrap();
        assert_eq!(s, FieldStats { min: 0.0, max: 0.0, negative_node_count: 0, negative_volume_fraction: 0.0 });
    }

    #[test]
    fn one_negative_node_in_one_element() {
        let m = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 0.0, 0.0], [2.0, 3.0, 0.0]],
            vec![vec![0, 1, 2], vec![1, 3, 4]],
            vec![],
        )
        .unwrap();
        let s = field_stats(&m, &[-1.0, 0.5, 0.5, 0.5, 2.0]).unwrap();
        assert_eq!(s.negative_node_count, 1);
        assert!((s.negative_volume_fraction - 0.5 / 2.0).abs() < 1e-15);
        assert_eq!((s.min, s.max), (-1.0, 2.0));
    }

    #[test]
    fn line_samples_reproduce_linear_fields() {
        let m = rectangle_mesh(2.0, 1.0, 7, 5).unwrap();
        let f: Vec<f64> = m.nodes().iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 1.0).collect();
        let s = sample_line(&m, &f, [0.1, 0.05, 0.0], [1.9, 0.9, 0.0], 23).unwrap();
        let len = (1.8_f64.powi(2) + 0.85_f64.powi(2)).sqrt();
        for p in &s {
            let t = p.s / len;
            let (x, y) = (0.1 + 1.8 * t, 0.05 + 0.85 * t);
            assert!((p.value.unwrap() - (2.0 * x - 3.0 * y + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn wall_line_hits_nodal_values() {
        let m = rectangle_mesh(2.0, 0.62, 8, 4).unwrap();
        let f: Vec<f64> = m.nodes().iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let s = sample_line(&m, &f, [0.0, 0.0, 0.0], [2.0, 0.0, 0.0], 9).unwrap();
        for (k, p) in s.iter().enumerate() {
            // Node (k, 0) in column-major numbering.
            assert!((p.value.unwrap() - f[k * 5]).abs() < 1e-14);
        }
    }

    #[test]
    fn outside_points_are_flagged_and_misses_error() {
        let m = rectangle_mesh(1.0, 1.0, 2, 2).unwrap();
        let f = vec![1.0; m.num_nodes()];
        let s = sample_line(&m, &f, [-1.0, 0.5, 0.0], [0.5, 0.5, 0.0], 4).unwrap();
        assert_eq!(s[0].value, None);
        assert_eq!(s[3].value, Some(1.0));
        assert!(matches!(
            sample_line(&m, &f, [3.0, 3.0, 0.0], [4.0, 4.0, 0.0], 5),
            Err(Error::NoIntersection)
        ));
    }

    #[test]
    fn outflow_average_examples() {
        let m = rectangle_mesh(1.0, 1.0, 2, 3).unwrap();
        let u = vec![[2.0, 0.0, 0.0]; m.num_nodes()];
        let q = vec![0.3; m.num_nodes()];
        assert!((outflow_average(&m, &q, &u, "outflow").unwrap() - 0.3).abs() < 1e-15);
        let zero = vec![[0.0, 1.0, 0.0]; m.num_nodes()];
        assert!(matches!(outflow_average(&m, &q, &zero, "outflow"), Err(Error::ZeroFlux(_))));
    }

    #[test]
    fn linear_ih_on_single_facet_is_mean_of_ends() {
        let m = Mesh::new(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![vec![0, 1, 2]],
            vec![BoundaryFacet { nodes: vec![0, 1], marker: "out".into() }, BoundaryFacet { nodes: vec![1, 2], marker: "x".into() }, BoundaryFacet { nodes: vec![2, 0], marker: "x".into() }],
        )
        .unwrap();
        let u = vec![[0.0, -1.0, 0.0]; 3];
        let ih = [0.2, 1.0, 7.0];
        assert!((outflow_average(&m, &ih, &u, "out").unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn outflow_average_on_tetrahedra() {
        let m = Mesh::new(
            3,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            vec![vec![0, 1, 2, 3]],
            vec![],
        )
        .unwrap();
        // Oblique face x + y + z = 1; u.n linear, IH linear: ratio is the
        // degree-2 moment over the mean, computed by hand.
        let u: Vec<[f64; 3]> = m.nodes().iter().map(|p| [1.0 + p[0], 1.0, 1.0]).collect();
        let ih: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        // Over the face, with barycentric x = l1: int (3 + x) x / int (3 + x)
        // = (3/3 + 1/6) / (3 + 1/3) using int l1 = A/3, int l1^2 = A/6.
        let expect = (1.0 + 1.0 / 6.0) / (3.0 + 1.0 / 3.0);
        let facets: Vec<BoundaryFacet> = m
            .facets()
            .iter()
            .map(|f| BoundaryFacet { nodes: f.nodes.clone(), marker: if f.nodes.contains(&0) { "wall".into() } else { "out".into() } })
            .collect();
        let m = Mesh::new(3, m.nodes().to_vec(), vec![vec![0, 1, 2, 3]], facets).unwrap();
        assert!((outflow_average(&m, &ih, &u, "out").unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn l2_error_of_quadratic() {
        // f = x^2 sampled linearly on one cell of size h: the P1 interpolation
        // error squared integrates to a closed form over the unit square.
        let m = rectangle_mesh(1.0, 1.0, 1, 1).unwrap();
        let f: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        // int_0^1 (x - x^2)^2 dx = 1/30.
        let e = l2_error(&m, &f, |p| p[0] * p[0]).unwrap();
        assert!((e - (1.0_f64 / 30.0).sqrt()).abs() < 1e-14);
        assert_eq!(l2_error(&m, &f, |p| p[0]).unwrap(), 0.0);
    }

    #[test]
    fn delta_phb_examples() {
        assert_eq!(delta_phb(0.0, 15000.0, 0.36, 6.0, 120.0, 250.0), 0.0);
        let ih = 36.11 / 6.75e7;
        assert!((delta_phb(ih, 15000.0, 0.36, 6.0, 120.0, 250.0) - 36.11).abs() < 1e-10);
    }

    #[test]
    fn ih_field_clamps() {
        assert_eq!(ih_field(&[-1e-9, 0.25], 0.5, true).unwrap(), vec![0.0, 0.5]);
        assert!(ih_field(&[-1e-9], 0.5, false).is_err());
    }

    proptest! {
        #[test]
        fn delta_phb_is_multilinear(ih in 1e-9..1e-3_f64, hb in 1e3..2e4_f64, hct in 0.1..0.6_f64, q in 0.5..10.0_f64, t in 1.0..300.0_f64, v in 50.0..1000.0_f64, s in 0.1..10.0_f64) {
            let base = delta_phb(ih, hb, hct, q, t, v);
            let tol = 1e-12 * base * s;
            prop_assert!((delta_phb(s * ih, hb, hct, q, t, v) - s * base).abs() <= tol);
            prop_assert!((delta_phb(ih, s * hb, hct, q, t, v) - s * base).abs() <= tol);
            prop_assert!((delta_phb(ih, hb, hct, s * q, t, v) - s * base).abs() <= tol);
            prop_assert!((delta_phb(ih, hb, hct, q, s * t, v) - s * base).abs() <= tol);
            prop_assert!((delta_phb(ih, hb, hct, q, t, s * v) - base / s).abs() <= 1e-12 * base / s);
        }

        #[test]
        fn outflow_average_ignores_velocity_scale(s in 1e-3..1e3_f64, a in -1.0..1.0_f64) {
            let m = rectangle_mesh(1.0, 1.0, 3, 4).unwrap();
            let u: Vec<[f64; 3]> = m.nodes().iter().map(|p| [1.0 + p[1] * p[1], a, 0.0]).collect();
            let us: Vec<[f64; 3]> = u.iter().map(|v| [s * v[0], s * v[1], 0.0]).collect();
            let ih: Vec<f64> = m.nodes().iter().map(|p| p[1].sin()).collect();
            let a0 = outflow_average(&m, &ih, &u, "outflow").unwrap();
            let a1 = outflow_average(&m, &ih, &us, "outflow").unwrap();
            prop_assert!((a0 - a1).abs() <= 1e-13 * a0.abs().max(1e-300));
        }

        #[test]
        fn line_samples_are_p1_exact(a in -3.0..3.0_f64, b in -3.0..3.0_f64, c in -3.0..3.0_f64, y0 in 0.0..1.0_f64, y1 in 0.0..1.0_f64) {
            let m = rectangle_mesh(1.0, 1.0, 5, 4).unwrap();
            let f: Vec<f64> = m.nodes().iter().map(|p| a * p[0] + b * p[1] + c).collect();
            for p in sample_line(&m, &f, [0.0, y0, 0.0], [1.0, y1, 0.0], 11).unwrap() {
                let len = (1.0 + (y1 - y0).powi(2)).sqrt();
                let t = p.s / len;
                let expect = a * t + b * (y0 + t * (y1 - y0)) + c;
                prop_assert!((p.value.unwrap() - expect).abs() < 1e-12);
            }
        }
    }
}

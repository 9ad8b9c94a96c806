/// Symmetric simplex quadrature in barycentric coordinates. Weights sum to
/// one and are scaled by the element measure at the call site.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule exact for polynomials of degree 2: three interior points on
    /// triangles, four on tetrahedra.
    pub fn degree2(dim: usize) -> Self {
        match dim {
            2 => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                QuadratureRule {
                    points: vec![[a, b, b, 0.0], [b, a, b, 0.0], [b, b, a, 0.0]],
                    weights: vec![1.0 / 3.0; 3],
                }
            }
            3 => {
                let b = (5.0 - 5.0_f64.sqrt()) / 20.0;
                let a = 1.0 - 3.0 * b;
                QuadratureRule {
                    points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
                    weights: vec![0.25; 4],
                }
            }
            _ => panic!("no quadrature for dimension {dim}"),
        }
    }

    /// Collapsed 4-point Gauss-Legendre product rule (collapsed square), exact to
    /// degree 6 on triangles and 5 on tetrahedra. Used for error norms of
    /// arbitrary reference functions.
    pub fn collapsed_gauss4(dim: usize) -> Self {
        let s = (6.0_f64 / 5.0).sqrt();
        let (x0, x1) = (((3.0 - 2.0 * s) / 7.0_f64).sqrt(), ((3.0 + 2.0 * s) / 7.0_f64).sqrt());
        let (w0, w1) = ((18.0 + 30.0_f64.sqrt()) / 36.0, (18.0 - 30.0_f64.sqrt()) / 36.0);
        // Nodes and weights mapped from [-1, 1] to [0, 1].
        let gl: Vec<(f64, f64)> = [(-x1, w1), (-x0, w0), (x0, w0), (x1, w1)]
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        let mut rule = QuadratureRule {
            points: Vec::new(),
            weights: Vec::new(),
        };
        match dim {
            2 => {
                for &(u, wu) in &gl {
                    for &(v, wv) in &gl {
                        let (x, y) = (u, v * (1.0 - u));
                        rule.points.push([1.0 - x - y, x, y, 0.0]);
                        rule.weights.push(2.0 * wu * wv * (1.0 - u));
                    }
                }
            }
            3 => {
                for &(u, wu) in &gl {
                    for &(v, wv) in &gl {
                        for &(t, wt) in &gl {
                            let (x, y, z) = (u, v * (1.0 - u), t * (1.0 - u) * (1.0 - v));
                            rule.points.push([1.0 - x - y - z, x, y, z]);
                            rule.weights.push(6.0 * wu * wv * wt * (1.0 - u).powi(2) * (1.0 - v));
                        }
                    }
                }
            }
            _ => panic!("no quadrature for dimension {dim}"),
        }
        rule
    }

    pub fn centroid(dim: usize) -> [f64; 4] {
        let w = 1.0 / (dim + 1) as f64;
        let mut p = [0.0; 4];
        p[..=dim].iter_mut().for_each(|v| *v = w);
        p
    }
}

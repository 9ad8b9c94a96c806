//! Pointwise red blood cell morphology: the shape-tensor ODE
//!
//! ```text
//! dS/dt = -a1 (S - g(S) I) + a2 (E S + S E) + a3 (W S - S W),   g = 3 III_S / II_S
//! ```
//!
//! integrated with a frozen velocity gradient, and the scalar measures
//! derived from the ellipsoid it describes (distortion, effective stress,
//! surface area strain). Eigenvalues of `S` are squared semi-axes.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorphologyParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for MorphologyParams {
    fn default() -> Self {
        MorphologyParams {
            alpha1: 5.0,
            alpha2: 4.2298e-4,
            alpha3: 4.2298e-4,
        }
    }
}

/// Symmetric positive-definite ellipsoid shape tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeTensor(pub Matrix3<f64>);

impl ShapeTensor {
    pub fn identity() -> Self {
        ShapeTensor(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Sum of the principal 2x2 minors.
    pub fn second_invariant(&self) -> f64 {
        let s = &self.0;
        let tr = s.trace();
        0.5 * (tr * tr - (s * s).trace())
    }

    pub fn third_invariant(&self) -> f64 {
        self.0.determinant()
    }

    fn check_spd(&self) -> Result<()> {
        if Cholesky::new(self.0).is_none() {
            return Err(Error::DegenerateTensor("not positive definite".into()));
        }
        Ok(())
    }

    /// Eigenvalues in ascending order.
    fn eigenvalues(&self) -> Result<[f64; 3]> {
        self.check_spd()?;
        let eig = SymmetricEigen::new(self.0).eigenvalues;
        let mut v = [eig[0], eig[1], eig[2]];
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if !(v[0] > 0.0) {
            return Err(Error::DegenerateTensor(format!("eigenvalue {}", v[0])));
        }
        Ok(v)
    }
}

pub fn morphology_rhs(
    s: &ShapeTensor,
    grad_u: &Matrix3<f64>,
    p: &MorphologyParams,
) -> Result<Matrix3<f64>> {
    let m = s.matrix();
    let ii = s.second_invariant();
    let tr = m.trace();
    if !(ii.abs() > 1e-14 * tr * tr) {
        return Err(Error::DegenerateTensor(format!("II_S = {ii:e}")));
    }
    let g = 3.0 * s.third_invariant() / ii;
    let e = (grad_u + grad_u.transpose()) * 0.5;
    let w = (grad_u - grad_u.transpose()) * 0.5;
    let relax = (m - Matrix3::identity() * g) * -p.alpha1;
    let elong = (e * m + m * e) * p.alpha2;
    let rot = (w * m - m * w) * p.alpha3;
    Ok(relax + elong + rot)
}

/// Classical RK4 with a constant velocity gradient. The step is shortened
/// uniformly so that an integer number of steps lands on `t_end`.
pub fn integrate_local(
    s0: &ShapeTensor,
    grad_u: &Matrix3<f64>,
    t_end: f64,
    dt: f64,
    p: &MorphologyParams,
) -> Result<ShapeTensor> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Model(format!("invalid integration window t_end={t_end}, dt={dt}")));
    }
    s0.check_spd()?;
    let steps = (t_end / dt).ceil() as usize;
    if steps == 0 {
        return Ok(*s0);
    }
    let h = t_end / steps as f64;
    let f = |m: &Matrix3<f64>| morphology_rhs(&ShapeTensor(*m), grad_u, p);
    let mut s = s0.0;
    for n in 0..steps {
        let k1 = f(&s)?;
        let k2 = f(&(s + k1 * (0.5 * h)))?;
        let k3 = f(&(s + k2 * (0.5 * h)))?;
        let k4 = f(&(s + k3 * h))?;
        s += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        s = (s + s.transpose()) * 0.5;
        if Cholesky::new(s).is_none() {
            return Err(Error::Instability { t: (n + 1) as f64 * h });
        }
    }
    Ok(ShapeTensor(s))
}

/// Longest and shortest semi-axis `(L, W)`.
pub fn semi_axes(s: &ShapeTensor) -> Result<(f64, f64)> {
    let v = s.eigenvalues()?;
    Ok((v[2].sqrt(), v[0].sqrt()))
}

pub fn distortion(l: f64, w: f64) -> f64 {
    (l - w) / (l + w)
}

/// Effective shear stress `2 visc a1 D / ((1 - D^2) a2)`.
pub fn effective_stress(d: f64, visc: f64, p: &MorphologyParams) -> Result<f64> {
    if !(d < 1.0 - 1e-12) {
        return Err(Error::Saturation(d));
    }
    Ok(2.0 * visc * p.alpha1 * d / ((1.0 - d * d) * p.alpha2))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AreaMethod {
    /// p-norm mean approximation (p = 1.6075), relative error below 1.1%.
    #[default]
    Thomsen,
    /// Closed form through incomplete elliptic integrals.
    Exact,
}

const THOMSEN_P: f64 = 1.6075;

pub fn ellipsoid_area_thomsen(a: f64, b: f64, c: f64) -> f64 {
    let (ap, bp, cp) = (a.powf(THOMSEN_P), b.powf(THOMSEN_P), c.powf(THOMSEN_P));
    4.0 * PI * ((ap * bp + ap * cp + bp * cp) / 3.0).powf(1.0 / THOMSEN_P)
}

/// Surface area of the ellipsoid with semi-axes `a, b, c` in any order.
pub fn ellipsoid_area_exact(a: f64, b: f64, c: f64) -> f64 {
    let mut ax = [a, b, c];
    ax.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let [a, b, c] = ax;
    if (a - c) <= 1e-15 * a {
        return 4.0 * PI * a * a;
    }
    let cos_phi = c / a;
    let sin2 = 1.0 - cos_phi * cos_phi;
    let sin_phi = sin2.sqrt();
    let m = a * a * (b * b - c * c) / (b * b * (a * a - c * c));
    let x = cos_phi * cos_phi;
    let y = 1.0 - m * sin2;
    let rf = carlson_rf(x, y, 1.0);
    let f = sin_phi * rf;
    let e = sin_phi * rf - m / 3.0 * sin2 * sin_phi * carlson_rd(x, y, 1.0);
    2.0 * PI * c * c + 2.0 * PI * a * b / sin_phi * (e * sin2 + f * cos_phi * cos_phi)
}

/// Symmetric elliptic integral R_F by duplication.
fn carlson_rf(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    const TOL: f64 = 8e-4;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let ave = (x + y + z) / 3.0;
        let (dx, dy, dz) = ((ave - x) / ave, (ave - y) / ave, (ave - z) / ave);
        if dx.abs().max(dy.abs()).max(dz.abs()) <= TOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 / 44.0 * e3) * e2 + e3 / 14.0) / ave.sqrt();
        }
    }
}

/// Symmetric elliptic integral R_D by duplication.
fn carlson_rd(mut x: f64, mut y: f64, mut z: f64) -> f64 {
    const TOL: f64 = 5e-4;
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let ave = 0.2 * (x + y + 3.0 * z);
        let (dx, dy, dz) = ((ave - x) / ave, (ave - y) / ave, (ave - z) / ave);
        if dx.abs().max(dy.abs()).max(dz.abs()) <= TOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            return 3.0 * sum
                + fac
                    * (1.0 + ed * (-C1 + C5 * ed - C6 * dz * ee)
                        + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea)))
                    / (ave * ave.sqrt());
        }
    }
}

/// Surface area strain `(A_S - A0) / A0` using the p-norm area approximation.
pub fn area_strain(s: &ShapeTensor, a0: f64) -> Result<f64> {
    area_strain_with(s, a0, AreaMethod::Thomsen)
}

pub fn area_strain_with(s: &ShapeTensor, a0: f64, method: AreaMethod) -> Result<f64> {
    if !(a0 > 0.0) {
        return Err(Error::Model(format!("reference area must be positive, got {a0}")));
    }
    let v = s.eigenvalues()?;
    let (a, b, c) = (v[2].sqrt(), v[1].sqrt(), v[0].sqrt());
    let area = match method {
        AreaMethod::Thomsen => ellipsoid_area_thomsen(a, b, c),
        AreaMethod::Exact => ellipsoid_area_exact(a, b, c),
    };
    Ok((area - a0) / a0)
}

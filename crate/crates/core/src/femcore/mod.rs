//! SUPG element kernels, discontinuity-capturing (DC) operators and global
//! assembly for
//!
//! ```text
//! R(cbar) = dcbar/dt + u . grad cbar + s cbar - f
//! ```
//!
//! where `(s, f) = (mu_r, mu_r nu_r)` for the untransformed concentration and
//! `(0, k mu_r)` under the upper-bound change of variable.
//!
//! The DC term `nu_DC grad w . M grad cbar` is linearized by evaluating
//! `nu_DC` and `M` from a lagged field. The residual-based diffusivities
//! pair with the reference-element operators (`M ~ G^-1`, units of length
//! squared); the gradient-normalized `Codina` diffusivity pairs with the
//! physical crosswind projector.

mod assembly;
mod quadrature;
mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use assembly::{assemble, AssembledSystem, AssemblyInput};
pub use quadrature::QuadratureRule;
pub use sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::mesh::ElementGeometry;
use crate::models::ReactionCoefficients;
use crate::xform::{Transform, TransformKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcOperator {
    #[default]
    None,
    /// `grad w . G^-1 grad cbar`.
    Isotropic,
    /// Crosswind projector built in the reference frame:
    /// `J (I - ubar ubar^T / |ubar|^2) J^T` with `ubar = J^-1 u`.
    CwdReference,
    /// Physical crosswind projector `I - u u^T / |u|^2`.
    CwdPhysical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcDiffusivity {
    DcLin,
    #[default]
    DcQuad,
    Codina,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DcConfig {
    pub operator: DcOperator,
    pub diffusivity: DcDiffusivity,
    #[serde(alias = "codina_C")]
    pub codina_c: f64,
    pub grad_floor: f64,
}

impl Default for DcConfig {
    fn default() -> Self {
        DcConfig {
            operator: DcOperator::None,
            diffusivity: DcDiffusivity::DcQuad,
            codina_c: 0.7,
            grad_floor: 1e-14,
        }
    }
}

impl DcConfig {
    pub fn new(operator: DcOperator, diffusivity: DcDiffusivity) -> Self {
        DcConfig {
            operator,
            diffusivity,
            ..Default::default()
        }
    }

    pub fn enabled(&self) -> bool {
        self.operator != DcOperator::None
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.codina_c > 0.0) {
            return Err(Error::invalid("dc.codina_c", "must be positive"));
        }
        if !(self.grad_floor > 0.0) {
            return Err(Error::invalid("dc.grad_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Stabilization parameter `((2/dt)^2 + u . G u)^(-1/2)`. `dt = None`
/// is the steady limit.
pub fn tau(u: &DVector<f64>, metric: &DMatrix<f64>, dt: Option<f64>) -> Result<f64> {
    let transient = dt.map_or(0.0, |dt| (2.0 / dt).powi(2));
    let denom = transient + u.dot(&(metric * u));
    if !(denom > 0.0) {
        return Err(Error::Stagnation);
    }
    Ok(denom.powf(-0.5))
}

/// `q` is a squared nodal-difference measure; it counts as zero when the
/// differences are at round-off level relative to the field magnitude.
fn below_floor(q: f64, scale: f64, cfg: &DcConfig) -> bool {
    let tol = cfg.grad_floor * scale;
    q <= tol * tol
}

/// Residual-based DC diffusivity (`DcLin` or `DcQuad`); `Codina` is handled by
/// [`codina_diffusivity`] and yields zero here. `scale` is the magnitude of
/// the lagged field, used to guard the vanishing-gradient limit.
pub fn dc_diffusivity(
    residual: f64,
    grad: &DVector<f64>,
    metric_inverse: &DMatrix<f64>,
    tau: f64,
    scale: f64,
    cfg: &DcConfig,
) -> f64 {
    let q = grad.dot(&(metric_inverse * grad));
    if below_floor(q, scale, cfg) {
        return 0.0;
    }
    match cfg.diffusivity {
        DcDiffusivity::DcLin => (residual * residual / q).sqrt(),
        DcDiffusivity::DcQuad => 2.0 * tau * residual * residual / q,
        DcDiffusivity::Codina => 0.0,
    }
}

/// Gradient-normalized crosswind diffusivity without physical diffusion (the inverse
/// element Peclet number vanishes): `h C |R| / (2 |grad cbar|)`.
pub fn codina_diffusivity(
    residual: f64,
    grad: &DVector<f64>,
    h_e: f64,
    scale: f64,
    cfg: &DcConfig,
) -> f64 {
    let g2 = grad.norm_squared();
    if below_floor(g2 * h_e * h_e, scale, cfg) {
        return 0.0;
    }
    0.5 * h_e * cfg.codina_c * residual.abs() / g2.sqrt()
}

/// Diffusion-direction tensor `M` of the DC term for element-mean velocity `u`.
pub fn dc_tensor(u: &DVector<f64>, geo: &ElementGeometry, cfg: &DcConfig) -> DMatrix<f64> {
    let dim = u.len();
    match cfg.operator {
        DcOperator::None => DMatrix::zeros(dim, dim),
        DcOperator::Isotropic => geo.metric_inverse.clone(),
        DcOperator::CwdReference => {
            let ubar = &geo.inverse_jacobian * u;
            let n2 = ubar.norm_squared();
            if !(n2 > 0.0) {
                return geo.metric_inverse.clone();
            }
            let proj = DMatrix::identity(dim, dim) - &ubar * ubar.transpose() / n2;
            &geo.jacobian * proj * geo.jacobian.transpose()
        }
        DcOperator::CwdPhysical => {
            let n2 = u.norm_squared();
            let id = DMatrix::identity(dim, dim);
            if !(n2 > 0.0) {
                return id;
            }
            id - u * u.transpose() / n2
        }
    }
}

/// Reaction and source of the residual in the solved variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualForm {
    /// Coefficient `s` of `cbar` in the residual.
    pub reaction: f64,
    /// Source `f`.
    pub source: f64,
}

impl ResidualForm {
    pub fn new(transform: &Transform, coeffs: &ReactionCoefficients) -> Result<Self> {
        Ok(match transform.kind {
            TransformKind::Identity => ResidualForm {
                reaction: coeffs.mu_r,
                source: coeffs.mu_r * coeffs.nu_r,
            },
            TransformKind::UpperBound | TransformKind::Logistic => ResidualForm {
                reaction: 0.0,
                source: transform.transformed_source(coeffs.mu_r)?,
            },
        })
    }
}

/// Galerkin and SUPG parts of one element's contribution, kept separate so
/// the stabilization can be inspected on its own.
#[derive(Clone, Debug)]
pub struct LocalSystem {
    pub galerkin_matrix: DMatrix<f64>,
    pub galerkin_rhs: DVector<f64>,
    pub supg_matrix: DMatrix<f64>,
    pub supg_rhs: DVector<f64>,
}

impl LocalSystem {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.galerkin_matrix + &self.supg_matrix
    }

    pub fn rhs(&self) -> DVector<f64> {
        &self.galerkin_rhs + &self.supg_rhs
    }
}

pub fn mean_velocity(u_nodes: &[DVector<f64>]) -> DVector<f64> {
    let mut m = DVector::zeros(u_nodes[0].len());
    for u in u_nodes {
        m += u;
    }
    m / u_nodes.len() as f64
}

/// Steady elements without mean velocity carry no streamline direction; the
/// SUPG term is dropped there instead of failing.
fn element_tau(u_mean: &DVector<f64>, geo: &ElementGeometry, dt: Option<f64>) -> Result<f64> {
    match tau(u_mean, &geo.metric, dt) {
        Err(Error::Stagnation) => Ok(0.0),
        other => other,
    }
}

/// Galerkin plus SUPG element system with backward Euler in time when `dt`
/// is given. The velocity is interpolated inside the integrals; `tau` uses
/// the element mean.
pub fn supg_element(
    geo: &ElementGeometry,
    u_nodes: &[DVector<f64>],
    form: &ResidualForm,
    dt: Option<f64>,
    cbar_old: Option<&[f64]>,
) -> Result<LocalSystem> {
    let npe = geo.shape_gradients.len();
    let dim = npe - 1;
    let u_mean = mean_velocity(u_nodes);
    let tau = element_tau(&u_mean, geo, dt)?;
    let inv_dt = dt.map_or(0.0, |dt| 1.0 / dt);
    let rule = QuadratureRule::degree2(dim);

    let mut km = DMatrix::zeros(npe, npe);
    let mut fm = DVector::zeros(npe);
    let mut ks = DMatrix::zeros(npe, npe);
    let mut fs = DVector::zeros(npe);
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let wq = w * geo.volume;
        let n = &bary[..npe];
        let mut u = DVector::zeros(dim);
        for (a, ua) in u_nodes.iter().enumerate() {
            u += ua * n[a];
        }
        let adv: Vec<f64> = geo.shape_gradients.iter().map(|g| u.dot(g)).collect();
        let old = match cbar_old {
            Some(c) if inv_dt > 0.0 => (0..npe).map(|a| n[a] * c[a]).sum::<f64>(),
            _ => 0.0,
        };
        let load = form.source + inv_dt * old;
        for a in 0..npe {
            for b in 0..npe {
                let op = adv[b] + (form.reaction + inv_dt) * n[b];
                km[(a, b)] += wq * n[a] * op;
                ks[(a, b)] += wq * tau * adv[a] * op;
            }
            fm[a] += wq * n[a] * load;
            fs[a] += wq * tau * adv[a] * load;
        }
    }
    Ok(LocalSystem {
        galerkin_matrix: km,
        galerkin_rhs: fm,
        supg_matrix: ks,
        supg_rhs: fs,
    })
}

/// `nu_dc * volume * grad N_a . M grad N_b`.
pub fn dc_element(geo: &ElementGeometry, nu_dc: f64, m: &DMatrix<f64>) -> DMatrix<f64> {
    let npe = geo.shape_gradients.len();
    DMatrix::from_fn(npe, npe, |a, b| {
        nu_dc * geo.volume * geo.shape_gradients[a].dot(&(m * &geo.shape_gradients[b]))
    })
}

/// Lagged DC data for one element: the diffusivity and direction tensor
/// evaluated from `cbar_prev` at the element centroid.
#[derive(Clone, Debug)]
pub struct ElementDc {
    pub residual: f64,
    pub nu: f64,
    pub tensor: DMatrix<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn element_dc(
    geo: &ElementGeometry,
    u_nodes: &[DVector<f64>],
    form: &ResidualForm,
    dt: Option<f64>,
    cbar_prev: &[f64],
    cbar_old: Option<&[f64]>,
    scale: f64,
    cfg: &DcConfig,
) -> Result<ElementDc> {
    let npe = geo.shape_gradients.len();
    let u_mean = mean_velocity(u_nodes);
    let mut grad = DVector::zeros(npe - 1);
    for (a, g) in geo.shape_gradients.iter().enumerate() {
        grad += g * cbar_prev[a];
    }
    let mean_prev = cbar_prev.iter().sum::<f64>() / npe as f64;
    let time = match (dt, cbar_old) {
        (Some(dt), Some(old)) => (mean_prev - old.iter().sum::<f64>() / npe as f64) / dt,
        _ => 0.0,
    };
    let residual = time + u_mean.dot(&grad) + form.reaction * mean_prev - form.source;
    let nu = match cfg.diffusivity {
        DcDiffusivity::Codina => codina_diffusivity(residual, &grad, geo.longest_edge, scale, cfg),
        _ => {
            let tau = element_tau(&u_mean, geo, dt)?;
            dc_diffusivity(residual, &grad, &geo.metric_inverse, tau, scale, cfg)
        }
    };
    Ok(ElementDc {
        residual,
        nu,
        tensor: dc_tensor(&u_mean, geo, cfg),
    })
}

//! Reaction models of the form `dc/dt + u . grad c = mu_r (nu_r - c)`:
//! the linearized power law, the pore-formation model and the (reaction
//! free) drug model, together with scalar shear measures.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionCoefficients {
    /// Reaction rate (1/s).
    pub mu_r: f64,
    /// Saturation value.
    pub nu_r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawParams {
    #[serde(rename = "A")]
    pub a: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl PowerLawParams {
    pub fn new(a: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("model.A", "must be positive"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid("model.alpha", "must be positive"));
        }
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::invalid("model.beta", "must lie in (0, 1]"));
        }
        Ok(PowerLawParams { a, alpha, beta })
    }

    pub const PRESET_NAMES: [&'static str; 5] =
        ["giersiepen", "song", "zhang", "ding_human", "ding_porcine"];

    /// Published power-law fits by name.
    pub fn preset(name: &str) -> Option<Self> {
        let (a, alpha, beta) = match name {
            "giersiepen" => (3.62e-7, 2.416, 0.785),
            "song" => (1.8e-8, 1.991, 0.765),
            "zhang" => (1.228e-7, 1.9918, 0.6606),
            "ding_human" => (3.458e-8, 2.0639, 0.2777),
            "ding_porcine" => (6.701e-6, 1.0981, 0.2778),
            _ => return None,
        };
        Some(PowerLawParams { a, alpha, beta })
    }
}

/// Total pore area as a function of the membrane area strain.
#[derive(Clone, Debug, PartialEq)]
pub enum PoreAreaModel {
    /// `A_p = c_p * max(0, eps - eps0)`.
    Linear { c_p: f64 },
    /// Piecewise-linear interpolation of `(eps, A_p)` pairs sorted by strain,
    /// held constant beyond the last point.
    Table(Vec<(f64, f64)>),
}

impl PoreAreaModel {
    fn validate(&self) -> Result<()> {
        match self {
            PoreAreaModel::Linear { c_p } if !(*c_p >= 0.0) => {
                Err(Error::invalid("model.c_p", "must be non-negative"))
            }
            PoreAreaModel::Table(points) => {
                if points.is_empty() {
                    return Err(Error::invalid("model.pore_table", "table is empty"));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid("model.pore_table", "strains must increase"));
                    }
                    if w[1].1 < w[0].1 {
                        return Err(Error::invalid("model.pore_table", "pore area must be nondecreasing"));
                    }
                }
                if points[0].1 < 0.0 {
                    return Err(Error::invalid("model.pore_table", "pore area must be non-negative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn area(&self, eps: f64, eps0: f64) -> f64 {
        if eps <= eps0 {
            return 0.0;
        }
        match self {
            PoreAreaModel::Linear { c_p } => c_p * (eps - eps0),
            PoreAreaModel::Table(points) => {
                let i = points.partition_point(|p| p.0 <= eps);
                if i == 0 {
                    points[0].1
                } else if i == points.len() {
                    points[i - 1].1
                } else {
                    let (x0, y0) = points[i - 1];
                    let (x1, y1) = points[i];
                    y0 + (y1 - y0) * (eps - x0) / (x1 - x0)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoreModelParams {
    pub h: f64,
    pub k_exp: f64,
    /// Hematocrit as a fraction.
    pub hct: f64,
    /// Total RBC volume (cm^3).
    pub v_rbc: f64,
    pub eps0: f64,
    pub pore_area: PoreAreaModel,
}

impl PoreModelParams {
    /// Porcine mass-transfer fit `(h, k) = (4.48e-8, 1.31)`.
    pub const H_PORCINE: f64 = 4.48e-8;
    pub const K_PORCINE: f64 = 1.31;
    pub const EPS0_DEFAULT: f64 = 0.0016;

    pub fn validate(&self) -> Result<()> {
        if !(self.hct > 0.0 && self.hct < 1.0) {
            return Err(Error::invalid("model.hct", "must lie in (0, 1)"));
        }
        if !(self.h >= 0.0) {
            return Err(Error::invalid("model.h", "must be non-negative"));
        }
        if !(self.v_rbc > 0.0) {
            return Err(Error::invalid("model.v_rbc", "must be positive"));
        }
        self.pore_area.validate()
    }

    pub fn pore_area(&self, eps: f64) -> f64 {
        self.pore_area.area(eps, self.eps0)
    }
}

/// Scalar shear stress `2 visc sqrt(-II_E)` from the velocity gradient.
/// Planar flows pass the gradient padded with zeros.
pub fn strain_rate_invariant_stress(grad_u: &Matrix3<f64>, visc: f64) -> f64 {
    visc * shear_rate(grad_u)
}

/// Scalar shear rate `2 sqrt(-II_E)`; equals `gamma` for simple shear.
pub fn shear_rate(grad_u: &Matrix3<f64>) -> f64 {
    let e = (grad_u + grad_u.transpose()) * 0.5;
    let tr = e.trace();
    let second = 0.5 * (tr * tr - (e * e).trace());
    2.0 * (-second).max(0.0).sqrt()
}

pub fn powerlaw_coefficients(sigma_s: f64, p: &PowerLawParams) -> ReactionCoefficients {
    let mu_r = if sigma_s > 0.0 {
        (p.a * sigma_s.powf(p.alpha)).powf(1.0 / p.beta)
    } else {
        0.0
    };
    ReactionCoefficients { mu_r, nu_r: 1.0 }
}

/// Mass transfer coefficient `kappa = h G_f^k`.
pub fn mass_transfer(g_f: f64, p: &PoreModelParams) -> f64 {
    if g_f > 0.0 {
        p.h * g_f.powf(p.k_exp)
    } else {
        0.0
    }
}

pub fn pore_coefficients(eps: f64, g_f: f64, p: &PoreModelParams) -> ReactionCoefficients {
    let kappa = mass_transfer(g_f, p);
    ReactionCoefficients {
        mu_r: kappa / (1.0 - p.hct) * p.pore_area(eps) / p.v_rbc,
        nu_r: 1.0 - p.hct,
    }
}

/// Drug release has no volumetric reaction; `c_s0` is the saturation value.
pub fn drug_coefficients(c_s0: f64) -> ReactionCoefficients {
    ReactionCoefficients {
        mu_r: 0.0,
        nu_r: c_s0,
    }
}

/// Converts the linearized index `l = IH^(1/beta)` back to `IH`.
pub fn ih_from_linearized(l: f64, beta: f64, clamp_negative: bool) -> Result<f64> {
    if l < 0.0 {
        if clamp_negative {
            return Ok(0.0);
        }
        if beta.fract() != 0.0 {
            return Err(Error::Model(format!(
                "negative linearized index {l:e} with beta = {beta} has a complex power"
            )));
        }
    }
    Ok(l.powf(beta))
}

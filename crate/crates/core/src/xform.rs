//! Change of variable between the physical concentration `c` and the solved
//! variable `cbar`.
//!
//! * `UpperBound`: `c = nu (1 - exp(-cbar / k))`, so `c < nu` for every
//!   finite `cbar`. The transformed equation has the constant source `k mu`.
//! * `Logistic`: `c = nu / (1 + exp(-cbar / k))`, so `0 < c < nu`. Only
//!   admissible without reaction, since the transformed source blows up as
//!   `c -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    #[default]
    Identity,
    #[serde(alias = "upper")]
    UpperBound,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub kind: TransformKind,
    pub nu: f64,
    pub k: f64,
}

impl Transform {
    pub fn new(kind: TransformKind, nu: f64, k: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::invalid("transform.nu", format!("must be positive, got {nu}")));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid("transform.k", format!("must be positive, got {k}")));
        }
        Ok(Transform { kind, nu, k })
    }

    pub fn identity() -> Self {
        Transform {
            kind: TransformKind::Identity,
            nu: 1.0,
            k: 1.0,
        }
    }

    pub fn upper_bound(nu: f64, k: f64) -> Result<Self> {
        Self::new(TransformKind::UpperBound, nu, k)
    }

    pub fn is_identity(&self) -> bool {
        self.kind == TransformKind::Identity
    }

    pub fn to_physical(&self, cbar: f64) -> f64 {
        match self.kind {
            TransformKind::Identity => cbar,
            // -expm1(-x) keeps full precision for small cbar and is exactly
            // representable below 1 for every finite argument.
            TransformKind::UpperBound => {
                let c = self.nu * -(-cbar / self.k).exp_m1();
                if c >= self.nu {
                    f64::from_bits(self.nu.to_bits() - 1)
                } else {
                    c
                }
            }
            TransformKind::Logistic => self.nu / (1.0 + (-cbar / self.k).exp()),
        }
    }

    pub fn to_transformed(&self, c: f64) -> Result<f64> {
        match self.kind {
            TransformKind::Identity => Ok(c),
            TransformKind::UpperBound => {
                if !(c < self.nu) || !c.is_finite() {
                    return Err(Error::TransformDomain {
                        kind: "upper_bound",
                        value: c,
                    });
                }
                Ok(-self.k * (-c / self.nu).ln_1p())
            }
            TransformKind::Logistic => {
                if !(c > 0.0 && c < self.nu) {
                    return Err(Error::TransformDomain {
                        kind: "logistic",
                        value: c,
                    });
                }
                // cbar = k ln(c / (nu - c))
                let r = c / self.nu;
                Ok(self.k * (r.ln() - (-r).ln_1p()))
            }
        }
    }

    /// Source term of the transformed equation for reaction rate `mu_r`.
    /// For the identity transform the reaction is carried by the residual
    /// itself and the constant part is `mu_r * nu_r`, supplied by the caller.
    pub fn transformed_source(&self, mu_r: f64) -> Result<f64> {
        match self.kind {
            TransformKind::Identity => Ok(0.0),
            TransformKind::UpperBound => Ok(self.k * mu_r),
            TransformKind::Logistic => {
                if mu_r != 0.0 {
                    Err(Error::UnsupportedTransform(mu_r))
                } else {
                    Ok(0.0)
                }
            }
        }
    }

    pub fn field_to_physical(&self, cbar: &[f64]) -> Vec<f64> {
        cbar.iter().map(|&v| self.to_physical(v)).collect()
    }
}

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{element_dc, supg_element, DcConfig, ResidualForm, CsrMatrix};
use crate::error::{Error, Result};
use crate::mesh::{element_geometry, Mesh};
use crate::models::ReactionCoefficients;
use crate::xform::Transform;

/// Everything one assembly needs. Fields are node-aligned with `mesh`.
#[derive(Clone, Copy)]
pub struct AssemblyInput<'a> {
    pub mesh: &'a Mesh,
    pub velocity: &'a [[f64; 3]],
    pub reaction: &'a [ReactionCoefficients],
    pub transform: &'a Transform,
    /// `None` assembles the steady operator.
    pub dt: Option<f64>,
    /// Lagged field for the DC diffusivity; DC is skipped when absent.
    pub cbar_prev: Option<&'a [f64]>,
    /// Level preceding `cbar_prev`, for the time derivative in the lagged
    /// residual of transient runs.
    pub cbar_prev_old: Option<&'a [f64]>,
    /// Previous time level for the backward Euler term.
    pub cbar_old: Option<&'a [f64]>,
    pub dirichlet: &'a BTreeMap<usize, f64>,
    pub dc: &'a DcConfig,
}

/// Global system over the free nodes with Dirichlet values eliminated.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: BTreeMap<usize, f64>,
    /// Global node id of each free unknown.
    pub free: Vec<usize>,
    num_nodes: usize,
}

impl AssembledSystem {
    /// Full nodal field from a free-node solution.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes];
        for (&n, &v) in self.free.iter().zip(x) {
            out[n] = v;
        }
        for (&n, &v) in &self.dirichlet {
            out[n] = v;
        }
        out
    }
}

struct ElementContribution {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch(format!("{what} has {got} entries, mesh has {want} nodes")));
    }
    Ok(())
}

fn gather(field: Option<&[f64]>, conn: &[usize]) -> Option<Vec<f64>> {
    field.map(|f| conn.iter().map(|&n| f[n]).collect())
}

fn element_contribution(inp: &AssemblyInput, e: usize, scale: f64) -> Result<ElementContribution> {
    let mesh = inp.mesh;
    let dim = mesh.dim();
    let conn = mesh.element(e);
    let geo = element_geometry(mesh, e)?;
    let u: Vec<DVector<f64>> = conn
        .iter()
        .map(|&n| DVector::from_column_slice(&inp.velocity[n][..dim]))
        .collect();
    let npe = conn.len() as f64;
    let coeffs = ReactionCoefficients {
        mu_r: conn.iter().map(|&n| inp.reaction[n].mu_r).sum::<f64>() / npe,
        nu_r: conn.iter().map(|&n| inp.reaction[n].nu_r).sum::<f64>() / npe,
    };
    let form = ResidualForm::new(inp.transform, &coeffs)?;
    let old = gather(inp.cbar_old, conn);
    let local = supg_element(&geo, &u, &form, inp.dt, old.as_deref())?;
    let mut matrix = local.matrix();
    let rhs = local.rhs();
    if let (true, Some(prev)) = (inp.dc.enabled(), gather(inp.cbar_prev, conn)) {
        let prev_old = gather(inp.cbar_prev_old, conn);
        let dc = element_dc(&geo, &u, &form, inp.dt, &prev, prev_old.as_deref(), scale, inp.dc)?;
        if dc.nu > 0.0 {
            matrix += super::dc_element(&geo, dc.nu, &dc.tensor);
        }
    }
    Ok(ElementContribution { matrix, rhs })
}

/// Assemble the global SUPG(+DC) system. Element kernels run in parallel;
/// the scatter is serial in element order so results are bit-reproducible.
pub fn assemble(inp: &AssemblyInput) -> Result<AssembledSystem> {
    let mesh = inp.mesh;
    let nn = mesh.num_nodes();
    check_len("velocity", inp.velocity.len(), nn)?;
    check_len("reaction coefficients", inp.reaction.len(), nn)?;
    for (name, f) in [("cbar_prev", inp.cbar_prev), ("cbar_prev_old", inp.cbar_prev_old), ("cbar_old", inp.cbar_old)] {
        if let Some(f) = f {
            check_len(name, f.len(), nn)?;
        }
    }
    if let Some((&n, _)) = inp.dirichlet.range(nn..).next() {
        return Err(Error::DimensionMismatch(format!("Dirichlet node {n} outside mesh of {nn} nodes")));
    }
    inp.dc.validate()?;

    let mut index = vec![usize::MAX; nn];
    let mut free = Vec::with_capacity(nn - inp.dirichlet.len());
    for (n, slot) in index.iter_mut().enumerate() {
        if !inp.dirichlet.contains_key(&n) {
            *slot = free.len();
            free.push(n);
        }
    }

    let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); free.len()];
    for conn in mesh.elements() {
        for &a in conn {
            if index[a] == usize::MAX {
                continue;
            }
            for &b in conn {
                if index[b] != usize::MAX {
                    pattern[index[a]].push(index[b]);
                }
            }
        }
    }
    // Free nodes outside every element still need a diagonal.
    for (i, row) in pattern.iter_mut().enumerate() {
        row.push(i);
    }
    let mut matrix = CsrMatrix::from_pattern(pattern);
    let mut rhs = vec![0.0; free.len()];

    let scale = inp
        .cbar_prev
        .map_or(0.0, |c| c.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    let locals: Vec<ElementContribution> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| element_contribution(inp, e, scale))
        .collect::<Result<_>>()?;

    for (conn, local) in mesh.elements().zip(&locals) {
        for (a, &na) in conn.iter().enumerate() {
            let ra = index[na];
            if ra == usize::MAX {
                continue;
            }
            rhs[ra] += local.rhs[a];
            for (b, &nb) in conn.iter().enumerate() {
                let k = local.matrix[(a, b)];
                match inp.dirichlet.get(&nb) {
                    Some(g) => rhs[ra] -= k * g,
                    None => matrix.add(ra, index[nb], k),
                }
            }
        }
    }
    if !matrix.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("assembled system has non-finite entries".into()));
    }
    // Lagged DC diffusivities can exceed the advective scale by many orders
    // of magnitude; equilibrated rows keep the residual bound attainable.
    matrix.equilibrate_rows(&mut rhs);
    Ok(AssembledSystem {
        matrix,
        rhs,
        dirichlet: inp.dirichlet.clone(),
        free,
        num_nodes: nn,
    })
}

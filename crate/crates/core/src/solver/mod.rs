//! Steady and transient drivers. The DC term is linearized by lagging its
//! diffusivity: steady runs do `dc_passes` successive solves (the first
//! without DC), transient runs take it from the previous time level.

mod linear;

use std::collections::BTreeMap;

use log::{debug, info};
use serde::{Deserialize, Serialize};

pub use linear::{direct_solve, linear_solve, Ilu0};

use crate::error::{Error, Result};
use crate::femcore::{assemble, AssembledSystem, AssemblyInput, DcConfig};
use crate::mesh::{inflow_nodes, Mesh};
use crate::models::ReactionCoefficients;
use crate::xform::Transform;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Steady,
    Transient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub dt: f64,
    pub n_steps: usize,
    pub dc_passes: usize,
    pub linear_tol: f64,
    pub max_linear_iters: usize,
    /// Keep every `output_stride`-th transient step (the last one always).
    pub output_stride: usize,
    /// Retry with a sparse direct LU when the preconditioned iteration
    /// stalls or the incomplete factorization breaks down.
    pub direct_fallback: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::Steady,
            dt: 2.5e-4,
            n_steps: 100,
            dc_passes: 3,
            linear_tol: 1e-10,
            max_linear_iters: 5000,
            output_stride: 1,
            direct_fallback: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dc_passes < 1 {
            return Err(Error::invalid("solver.dc_passes", "must be at least 1"));
        }
        if !(self.linear_tol > 0.0) {
            return Err(Error::invalid("solver.linear_tol", "must be positive"));
        }
        if self.max_linear_iters == 0 {
            return Err(Error::invalid("solver.max_linear_iters", "must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("solver.dt", "must be positive and finite"));
        }
        if self.output_stride == 0 {
            return Err(Error::invalid("solver.output_stride", "must be positive"));
        }
        Ok(())
    }
}

/// A transport problem in the solved (possibly transformed) variable.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub velocity: &'a [[f64; 3]],
    pub reaction: &'a [ReactionCoefficients],
    pub transform: Transform,
    pub dc: DcConfig,
    /// Prescribed values of the solved variable.
    pub dirichlet: BTreeMap<usize, f64>,
    /// Transformed inflow value, also the default initial condition.
    pub inflow_value: f64,
}

impl<'a> Problem<'a> {
    /// Prescribes the physical concentration `inflow` on every inflow node.
    pub fn new(
        mesh: &'a Mesh,
        velocity: &'a [[f64; 3]],
        reaction: &'a [ReactionCoefficients],
        transform: Transform,
        dc: DcConfig,
        inflow: f64,
    ) -> Result<Self> {
        if velocity.len() != mesh.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "velocity has {} entries, mesh has {} nodes",
                velocity.len(),
                mesh.num_nodes()
            )));
        }
        let value = transform.to_transformed(inflow)?;
        let dirichlet = inflow_nodes(mesh, velocity).into_iter().map(|n| (n, value)).collect();
        Ok(Problem {
            mesh,
            velocity,
            reaction,
            transform,
            dc,
            dirichlet,
            inflow_value: value,
        })
    }

    fn input<'b>(
        &'b self,
        dt: Option<f64>,
        cbar_prev: Option<&'b [f64]>,
        cbar_prev_old: Option<&'b [f64]>,
        cbar_old: Option<&'b [f64]>,
    ) -> AssemblyInput<'b> {
        AssemblyInput {
            mesh: self.mesh,
            velocity: self.velocity,
            reaction: self.reaction,
            transform: &self.transform,
            dt,
            cbar_prev,
            cbar_prev_old,
            cbar_old,
            dirichlet: &self.dirichlet,
            dc: &self.dc,
        }
    }
}

/// Extrema of the physical field after one pass or step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PassStats {
    pub pass: usize,
    pub min: f64,
    pub max: f64,
    pub neg_nodes: usize,
}

impl PassStats {
    fn of(pass: usize, transform: &Transform, cbar: &[f64]) -> Self {
        let phys = transform.field_to_physical(cbar);
        PassStats {
            pass,
            min: phys.iter().copied().fold(f64::INFINITY, f64::min),
            max: phys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            neg_nodes: phys.iter().filter(|&&c| c < 0.0).count(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadySolution {
    /// Final field in the solved variable.
    pub field: Vec<f64>,
    pub passes: Vec<PassStats>,
}

fn solve_system(sys: &AssembledSystem, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let x = match linear_solve(&sys.matrix, &sys.rhs, cfg.linear_tol, cfg.max_linear_iters) {
        Err(e @ (Error::NoConvergence { .. } | Error::Singular(_))) if cfg.direct_fallback => {
            debug!("iterative solve failed ({e}), falling back to sparse LU");
            direct_solve(&sys.matrix, &sys.rhs, cfg.linear_tol)?
        }
        other => other?,
    };
    Ok(sys.expand(&x))
}

pub fn solve_steady(problem: &Problem, cfg: &SolverConfig) -> Result<SteadySolution> {
    cfg.validate()?;
    let passes = if problem.dc.enabled() { cfg.dc_passes } else { 1 };
    let mut field: Option<Vec<f64>> = None;
    let mut stats = Vec::with_capacity(passes);
    for pass in 1..=passes {
        let sys = assemble(&problem.input(None, field.as_deref(), None, None))?;
        let next = solve_system(&sys, cfg)?;
        let s = PassStats::of(pass, &problem.transform, &next);
        info!("pass={} min={:e} max={:e} neg_nodes={}", s.pass, s.min, s.max, s.neg_nodes);
        stats.push(s);
        field = Some(next);
    }
    Ok(SteadySolution {
        field: field.expect("at least one pass"),
        passes: stats,
    })
}

#[derive(Clone, Debug)]
pub struct TransientSolution {
    /// `(time, field)` at the retained steps; entry 0 is the initial state.
    pub frames: Vec<(f64, Vec<f64>)>,
}

impl TransientSolution {
    pub fn last(&self) -> &[f64] {
        &self.frames.last().expect("initial frame present").1
    }
}

/// Backward Euler from `initial` (default: the inflow value everywhere).
pub fn solve_transient(problem: &Problem, cfg: &SolverConfig, initial: Option<Vec<f64>>) -> Result<TransientSolution> {
    cfg.validate()?;
    let nn = problem.mesh.num_nodes();
    let mut current = initial.unwrap_or_else(|| vec![problem.inflow_value; nn]);
    if current.len() != nn {
        return Err(Error::DimensionMismatch(format!(
            "initial condition has {} entries, mesh has {nn} nodes",
            current.len()
        )));
    }
    let mut previous: Option<Vec<f64>> = None;
    let mut frames = vec![(0.0, current.clone())];
    for step in 1..=cfg.n_steps {
        let prev = problem.dc.enabled().then_some(current.as_slice());
        let sys = assemble(&problem.input(Some(cfg.dt), prev, previous.as_deref(), Some(&current)))?;
        let next = solve_system(&sys, cfg)?;
        let s = PassStats::of(step, &problem.transform, &next);
        debug!("step={} min={:e} max={:e} neg_nodes={}", step, s.min, s.max, s.neg_nodes);
        previous = Some(std::mem::replace(&mut current, next));
        if step % cfg.output_stride == 0 || step == cfg.n_steps {
            frames.push((step as f64 * cfg.dt, current.clone()));
        }
    }
    Ok(TransientSolution { frames })
}

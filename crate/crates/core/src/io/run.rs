//! End-to-end run: mesh and velocity ingestion, reaction coefficients,
//! solve, and artifacts under the output directory.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use nalgebra::Matrix3;
use rayon::prelude::*;

use super::config::{MeshSource, ModelKind, RunConfig, StrainSource, StressSource, VelocitySource};
use super::fields::{read_scalar_field, read_table_csv, read_vector_field};
use super::vtk::{VtkData, VtkField};
use crate::cases::{build_channel, ChannelSpec};
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, Mesh, MeshFormat};
use crate::models::{
    drug_coefficients, pore_coefficients, powerlaw_coefficients, shear_rate, strain_rate_invariant_stress,
    ReactionCoefficients,
};
use crate::morphology::{area_strain, distortion, effective_stress, integrate_local, semi_axes, ShapeTensor};
use crate::postproc::{delta_phb, field_stats, ih_field, outflow_average, sample_line, write_line_csv, write_stats_csv, FieldStats};
use crate::solver::{solve_steady, solve_transient, PassStats, Problem, SolverMode};

#[derive(Clone, Debug, PartialEq)]
pub struct OutflowSummary {
    pub marker: String,
    /// Flow-averaged index of hemolysis at the outflow.
    pub ih: f64,
    pub delta_phb: f64,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    /// Statistics of the final physical field.
    pub stats: FieldStats,
    /// Steady DC passes; empty for transient runs.
    pub passes: Vec<PassStats>,
    pub outflow: Option<OutflowSummary>,
    pub artifacts: Vec<PathBuf>,
}

/// Nodal state the solve needs besides the mesh.
struct Flow {
    mesh: Mesh,
    velocity: Vec<[f64; 3]>,
    gradients: Vec<Matrix3<f64>>,
}

/// `grad[0][1] = du/dy` of the channel profile.
fn channel_gradient(spec: &ChannelSpec, y: f64) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    g[(0, 1)] = spec.shear_stress(y) / spec.viscosity;
    g
}

fn load_flow(cfg: &RunConfig) -> Result<Flow> {
    let spec = cfg.channel_spec()?;
    let mesh = match cfg.mesh.source {
        MeshSource::Channel => build_channel(&spec)?.mesh,
        MeshSource::File => {
            let p = cfg.resolve(cfg.mesh.path.as_deref().expect("validated"));
            load_mesh(&p, MeshFormat::detect(&p))?
        }
    };
    let (velocity, gradients) = match cfg.velocity.source {
        VelocitySource::Channel => mesh
            .nodes()
            .iter()
            .map(|p| ([spec.velocity(p[1]), 0.0, 0.0], channel_gradient(&spec, p[1])))
            .unzip(),
        VelocitySource::Csv => {
            let p = cfg.resolve(cfg.velocity.path.as_deref().expect("validated"));
            if !p.exists() {
                return Err(Error::invalid("velocity.path", format!("velocity source not found: {}", p.display())));
            }
            let u = read_vector_field(&p, mesh.num_nodes(), mesh.dim())?;
            let g = mesh.velocity_gradients(&u)?;
            (u, g)
        }
    };
    Ok(Flow {
        mesh,
        velocity,
        gradients,
    })
}

/// Shape tensors after the configured window, integrated once per distinct
/// velocity gradient.
fn shape_tensors(cfg: &RunConfig, grads: &[Matrix3<f64>]) -> Result<Vec<ShapeTensor>> {
    let m = &cfg.model.morphology;
    let key = |g: &Matrix3<f64>| -> [u64; 9] { std::array::from_fn(|i| g.as_slice()[i].to_bits()) };
    let mut unique: HashMap<[u64; 9], usize> = HashMap::new();
    let mut reps = Vec::new();
    let index: Vec<usize> = grads
        .iter()
        .map(|g| {
            *unique.entry(key(g)).or_insert_with(|| {
                reps.push(*g);
                reps.len() - 1
            })
        })
        .collect();
    let params = m.params();
    let solved: Vec<ShapeTensor> = reps
        .par_iter()
        .map(|g| integrate_local(&ShapeTensor::identity(), g, m.t_end, m.dt, &params))
        .collect::<Result<_>>()?;
    Ok(index.into_iter().map(|i| solved[i]).collect())
}

fn nonnegative(name: &str, v: Vec<f64>) -> Result<Vec<f64>> {
    match v.iter().position(|x| !(*x >= 0.0)) {
        Some(i) => Err(Error::Model(format!("{name} field has invalid value {} at node {i}", v[i]))),
        None => Ok(v),
    }
}

fn reaction(cfg: &RunConfig, flow: &Flow) -> Result<Vec<ReactionCoefficients>> {
    let m = &cfg.model;
    let n = flow.mesh.num_nodes();
    let visc = cfg.viscosity();
    Ok(match m.kind {
        ModelKind::PowerLaw => {
            let p = m.power_law()?;
            let sigma = match m.stress {
                StressSource::StrainRate => {
                    flow.gradients.iter().map(|g| strain_rate_invariant_stress(g, visc)).collect()
                }
                StressSource::Field => {
                    let path = cfg.resolve(m.stress_path.as_deref().expect("validated"));
                    nonnegative("stress", read_scalar_field(&path, n)?)?
                }
                StressSource::Morphology => {
                    let mp = m.morphology.params();
                    shape_tensors(cfg, &flow.gradients)?
                        .iter()
                        .map(|s| {
                            let (l, w) = semi_axes(s)?;
                            effective_stress(distortion(l, w), visc, &mp)
                        })
                        .collect::<Result<_>>()?
                }
            };
            sigma.iter().map(|&s| powerlaw_coefficients(s, &p)).collect()
        }
        ModelKind::Pore => {
            let table = match &m.pore_table {
                Some(t) => Some(read_table_csv(&cfg.resolve(t))?),
                None => None,
            };
            let p = cfg.pore_params(table)?;
            let eps: Vec<f64> = match m.strain {
                StrainSource::Field => {
                    let path = cfg.resolve(m.strain_path.as_deref().expect("validated"));
                    read_scalar_field(&path, n)?
                }
                StrainSource::Morphology => {
                    let a0 = m.morphology.reference_area();
                    shape_tensors(cfg, &flow.gradients)?
                        .iter()
                        .map(|s| area_strain(s, a0))
                        .collect::<Result<_>>()?
                }
            };
            if let Some(i) = eps.iter().position(|e| !(*e >= -1.0)) {
                return Err(Error::Model(format!("area strain {} below -1 at node {i}", eps[i])));
            }
            let g_f = match &m.gf_path {
                Some(path) => nonnegative("shear rate", read_scalar_field(&cfg.resolve(path), n)?)?,
                None => flow.gradients.iter().map(shear_rate).collect(),
            };
            eps.iter().zip(&g_f).map(|(&e, &g)| pore_coefficients(e, g, &p)).collect()
        }
        ModelKind::Drug => vec![drug_coefficients(m.c_s0); n],
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn solution_vtk(flow: &Flow, cbar: &[f64], c: &[f64], mu: &[f64], identity: bool) -> Result<VtkData> {
    let mut fields = vec![("c".to_string(), VtkField::Scalars(c.to_vec()))];
    if !identity {
        fields.push(("cbar".into(), VtkField::Scalars(cbar.to_vec())));
    }
    fields.push(("mu_r".into(), VtkField::Scalars(mu.to_vec())));
    fields.push(("velocity".into(), VtkField::Vectors(flow.velocity.clone())));
    VtkData::from_mesh(&flow.mesh, fields)
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let flow = load_flow(cfg)?;
    info!("mesh: {} nodes, {} elements", flow.mesh.num_nodes(), flow.mesh.num_elements());
    let reaction = reaction(cfg, &flow)?;
    let mu: Vec<f64> = reaction.iter().map(|r| r.mu_r).collect();
    let transform = cfg.transform()?;
    let problem = Problem::new(&flow.mesh, &flow.velocity, &reaction, transform, cfg.dc, cfg.boundary.inflow_value)?;

    let out = cfg.output_dir();
    create_dir(&out)?;
    let mut artifacts = Vec::new();
    let mut rows = Vec::new();
    let (cbar, passes) = match cfg.solver.mode {
        SolverMode::Steady => {
            let sol = solve_steady(&problem, &cfg.solver)?;
            (sol.field, sol.passes)
        }
        SolverMode::Transient => {
            let mut sol = solve_transient(&problem, &cfg.solver, None)?;
            for (i, (t, f)) in sol.frames.iter().enumerate() {
                let c = transform.field_to_physical(f);
                rows.push((format!("c@t={t:e}"), field_stats(&flow.mesh, &c)?));
                let path = out.join(format!("solution_{i:04}.vtk"));
                solution_vtk(&flow, f, &c, &mu, transform.is_identity())?.write(&path)?;
                artifacts.push(path);
            }
            (sol.frames.pop().expect("initial frame present").1, Vec::new())
        }
    };
    let c = transform.field_to_physical(&cbar);
    let stats = field_stats(&flow.mesh, &c)?;
    info!("stats: min={:e} max={:e} negative_nodes={}", stats.min, stats.max, stats.negative_node_count);
    rows.push(("c".into(), stats));
    if !transform.is_identity() {
        rows.push(("cbar".into(), field_stats(&flow.mesh, &cbar)?));
    }

    let path = out.join("solution.vtk");
    solution_vtk(&flow, &cbar, &c, &mu, transform.is_identity())?.write(&path)?;
    artifacts.push(path);
    let path = out.join("stats.csv");
    write_stats_csv(&path, &rows)?;
    artifacts.push(path);

    for probe in &cfg.probes {
        let samples = sample_line(&flow.mesh, &c, probe.start(), probe.end(), probe.n)?;
        let path = out.join(format!("line_{}.csv", probe.name));
        write_line_csv(&path, &samples)?;
        artifacts.push(path);
    }

    let o = &cfg.outflow;
    let outflow = if flow.mesh.markers().contains(o.marker.as_str()) {
        let ih = match cfg.model.kind {
            ModelKind::PowerLaw => ih_field(&c, cfg.model.power_law()?.beta, o.clamp_negative)?,
            _ => c.clone(),
        };
        let avg = outflow_average(&flow.mesh, &ih, &flow.velocity, &o.marker)?;
        let summary = OutflowSummary {
            marker: o.marker.clone(),
            ih: avg,
            delta_phb: delta_phb(avg, o.hb, o.hct, o.q, o.t, o.v_loop),
        };
        info!("outflow '{}': IH={:e} dPHb={:e} mg/dL", summary.marker, summary.ih, summary.delta_phb);
        let mut s = String::from("marker,ih,delta_phb\n");
        let _ = writeln!(s, "{},{:e},{:e}", summary.marker, summary.ih, summary.delta_phb);
        let path = out.join("outflow.csv");
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
        artifacts.push(path);
        Some(summary)
    } else {
        info!("no boundary marked '{}', skipping the outflow average", o.marker);
        None
    };

    Ok(RunSummary {
        stats,
        passes,
        outflow,
        artifacts,
    })
}

//! TOML run configuration. Every table rejects unknown keys; errors name the
//! full dotted key so a typo such as `transfrom.kind` is reported verbatim.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cases::ChannelSpec;
use crate::error::{Error, Result};
use crate::femcore::DcConfig;
use crate::models::{PoreModelParams, PowerLawParams};
use crate::morphology::MorphologyParams;
use crate::solver::{SolverConfig, SolverMode};
use crate::xform::{Transform, TransformKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshSource {
    /// Structured channel generated from the `mesh` table.
    #[default]
    Channel,
    /// Gmsh file or native CSV directory at `mesh.path`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub source: MeshSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub length: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let c = ChannelSpec::default();
        MeshConfig {
            source: MeshSource::Channel,
            path: None,
            length: c.length,
            height: c.height,
            nx: c.nx,
            ny: c.ny,
            jitter: c.jitter,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocitySource {
    /// Analytic channel profile evaluated at the nodes.
    #[default]
    Channel,
    /// Nodal CSV `node_id,u,v[,w]` at `velocity.path`.
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityConfig {
    pub source: VelocitySource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub u_max: f64,
    pub profile_coefficient: f64,
}

impl Default for VelocityConfig {
    fn default() -> Self {
        let c = ChannelSpec::default();
        VelocityConfig {
            source: VelocitySource::Channel,
            path: None,
            u_max: c.u_max,
            profile_coefficient: c.profile_coefficient,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    PowerLaw,
    Pore,
    Drug,
}

/// Where the power-law stress comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressSource {
    /// `2 visc sqrt(-II_E)` from the nodal velocity gradient.
    #[default]
    StrainRate,
    /// Nodal CSV at `model.stress_path`.
    Field,
    /// Effective stress of the locally integrated shape tensor.
    Morphology,
}

/// Where the pore-model area strain comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrainSource {
    #[default]
    Morphology,
    Field,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MorphologyConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    /// Integration window of the frozen-gradient ODE, starting from a sphere.
    pub t_end: f64,
    pub dt: f64,
    /// Reference surface area; defaults to the unit sphere of the initial state.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
}

impl Default for MorphologyConfig {
    fn default() -> Self {
        let p = MorphologyParams::default();
        MorphologyConfig {
            alpha1: p.alpha1,
            alpha2: p.alpha2,
            alpha3: p.alpha3,
            t_end: 1.0,
            dt: 1e-5,
            a0: None,
        }
    }
}

impl MorphologyConfig {
    pub fn params(&self) -> MorphologyParams {
        MorphologyParams {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
        }
    }

    pub fn reference_area(&self) -> f64 {
        self.a0.unwrap_or(4.0 * std::f64::consts::PI)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub stress: StressSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress_path: Option<PathBuf>,
    /// Dynamic viscosity; 0.35 for the analytic channel, 0.035 otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<f64>,
    pub h: f64,
    pub k: f64,
    pub hct: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_rbc: Option<f64>,
    pub eps0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pore_table: Option<PathBuf>,
    pub strain: StrainSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strain_path: Option<PathBuf>,
    /// Nodal fluid shear rate; computed from the velocity when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gf_path: Option<PathBuf>,
    pub c_s0: f64,
    pub morphology: MorphologyConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::PowerLaw,
            preset: None,
            a: None,
            alpha: None,
            beta: None,
            stress: StressSource::StrainRate,
            stress_path: None,
            viscosity: None,
            h: PoreModelParams::H_PORCINE,
            k: PoreModelParams::K_PORCINE,
            hct: 0.36,
            v_rbc: None,
            eps0: PoreModelParams::EPS0_DEFAULT,
            c_p: None,
            pore_table: None,
            strain: StrainSource::Morphology,
            strain_path: None,
            gf_path: None,
            c_s0: 1.0,
            morphology: MorphologyConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Preset or explicit coefficients; missing explicit values fall back to
    /// the channel benchmark `A = 1, alpha = 2, beta = 1`.
    pub fn power_law(&self) -> Result<PowerLawParams> {
        if let Some(name) = &self.preset {
            if self.a.is_some() || self.alpha.is_some() || self.beta.is_some() {
                return Err(Error::invalid("model.preset", "give either a preset or explicit A/alpha/beta, not both"));
            }
            return PowerLawParams::preset(name).ok_or_else(|| {
                Error::invalid(
                    "model.preset",
                    format!("unknown preset '{name}', expected one of {}", PowerLawParams::PRESET_NAMES.join(", ")),
                )
            });
        }
        let d = ChannelSpec::default().power_law;
        PowerLawParams::new(self.a.unwrap_or(d.a), self.alpha.unwrap_or(d.alpha), self.beta.unwrap_or(d.beta))
    }

    /// Saturation value of the selected model, the default transform bound.
    pub fn saturation(&self) -> f64 {
        match self.kind {
            ModelKind::PowerLaw => 1.0,
            ModelKind::Pore => 1.0 - self.hct,
            ModelKind::Drug => self.c_s0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformConfig {
    pub kind: TransformKind,
    /// Upper bound; defaults to the model saturation value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    pub k: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            kind: TransformKind::Identity,
            nu: None,
            k: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Physical concentration prescribed on inflow nodes.
    pub inflow_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub name: String,
    pub p0: Vec<f64>,
    pub p1: Vec<f64>,
    #[serde(default = "default_probe_samples")]
    pub n: usize,
}

fn default_probe_samples() -> usize {
    101
}

fn point3(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v.get(2).copied().unwrap_or(0.0)]
}

impl ProbeConfig {
    pub fn start(&self) -> [f64; 3] {
        point3(&self.p0)
    }

    pub fn end(&self) -> [f64; 3] {
        point3(&self.p1)
    }
}

/// Flow-averaged outflow damage and the loop hemoglobin rise it implies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutflowConfig {
    pub marker: String,
    /// Total hemoglobin, mg/dL.
    pub hb: f64,
    pub hct: f64,
    /// Flow rate, L/min.
    pub q: f64,
    /// Duration, min.
    pub t: f64,
    /// Loop volume, mL.
    pub v_loop: f64,
    pub clamp_negative: bool,
}

impl Default for OutflowConfig {
    fn default() -> Self {
        OutflowConfig {
            marker: "outflow".into(),
            hb: 15000.0,
            hct: 0.36,
            q: 6.0,
            t: 120.0,
            v_loop: 250.0,
            clamp_negative: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub velocity: VelocityConfig,
    pub model: ModelConfig,
    pub transform: TransformConfig,
    pub dc: DcConfig,
    pub solver: SolverConfig,
    pub boundary: BoundaryConfig,
    pub output: OutputConfig,
    pub outflow: OutflowConfig,
    #[serde(rename = "probe", skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeConfig>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// 1-based line of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Extends a dotted key with the first key of any nested table below it.
fn leaf_key(root: &toml::Value, key: &str) -> String {
    let mut v = root;
    for part in key.split('.') {
        let part = part.split('[').next().unwrap_or(part);
        let idx = key.contains('[');
        match v.get(part) {
            Some(next) if !idx => v = next,
            _ => return key.to_string(),
        }
    }
    let mut out = key.to_string();
    while let Some((k, next)) = v.as_table().and_then(|t| t.iter().next()) {
        out.push('.');
        out.push_str(k);
        v = next;
    }
    out
}

fn unknown_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

impl RunConfig {
    /// Parses and validates a config file; relative paths resolve against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_in(&text, &base)
    }

    pub fn from_str_in(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        let root = toml::Value::Table(table);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(root.clone()).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            match unknown_field(&msg) {
                Some(field) => {
                    // The tracked path may or may not already end in the field.
                    let key = if path == "." {
                        field.to_string()
                    } else if path.rsplit('.').next() == Some(field) {
                        path
                    } else {
                        format!("{path}.{field}")
                    };
                    Error::invalid(leaf_key(&root, &key), "unknown key")
                }
                None => Error::invalid(path, msg),
            }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::invalid("config", e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    /// Viscosity used for stresses: the configured value, else the channel
    /// benchmark value for the analytic channel and whole blood otherwise.
    pub fn viscosity(&self) -> f64 {
        self.model.viscosity.unwrap_or(match self.velocity.source {
            VelocitySource::Channel => ChannelSpec::default().viscosity,
            VelocitySource::Csv => 0.035,
        })
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec> {
        Ok(ChannelSpec {
            length: self.mesh.length,
            height: self.mesh.height,
            u_max: self.velocity.u_max,
            profile_coefficient: self.velocity.profile_coefficient,
            viscosity: self.viscosity(),
            power_law: self.model.power_law()?,
            inflow: self.boundary.inflow_value,
            nx: self.mesh.nx,
            ny: self.mesh.ny,
            jitter: self.mesh.jitter,
            seed: self.mesh.seed,
        })
    }

    pub fn transform(&self) -> Result<Transform> {
        Transform::new(
            self.transform.kind,
            self.transform.nu.unwrap_or_else(|| self.model.saturation()),
            self.transform.k,
        )
    }

    pub fn pore_params(&self, table: Option<Vec<(f64, f64)>>) -> Result<PoreModelParams> {
        use crate::models::PoreAreaModel;
        let m = &self.model;
        let pore_area = match (m.c_p, table) {
            (Some(c_p), None) => PoreAreaModel::Linear { c_p },
            (None, Some(t)) => PoreAreaModel::Table(t),
            _ => return Err(Error::invalid("model.c_p", "the pore model needs exactly one of c_p or pore_table")),
        };
        let p = PoreModelParams {
            h: m.h,
            k_exp: m.k,
            hct: m.hct,
            v_rbc: m.v_rbc.ok_or_else(|| Error::invalid("model.v_rbc", "required for the pore model"))?,
            eps0: m.eps0,
            pore_area,
        };
        p.validate()?;
        Ok(p)
    }

    fn require_file(&self, key: &str, p: &Option<PathBuf>, what: &str) -> Result<()> {
        match p {
            None => Err(Error::invalid(key, format!("{what} not given"))),
            Some(p) if !self.resolve(p).exists() => {
                Err(Error::invalid(key, format!("{what} not found: {}", self.resolve(p).display())))
            }
            Some(_) => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mesh.source {
            MeshSource::Channel => {
                if self.velocity.source != VelocitySource::Channel {
                    return Err(Error::invalid("velocity.source", "the generated channel mesh needs the channel velocity"));
                }
                self.channel_spec()?.validate()?;
            }
            MeshSource::File => self.require_file("mesh.path", &self.mesh.path, "mesh file")?,
        }
        if self.velocity.source == VelocitySource::Csv {
            self.require_file("velocity.path", &self.velocity.path, "velocity source")?;
        }

        let m = &self.model;
        if let Some(v) = m.viscosity {
            if !(v > 0.0) {
                return Err(Error::invalid("model.viscosity", "must be positive"));
            }
        }
        let mc = &m.morphology;
        if !(mc.alpha1 > 0.0) {
            return Err(Error::invalid("model.morphology.alpha1", "must be positive"));
        }
        if !(mc.dt > 0.0) || !(mc.t_end >= 0.0) {
            return Err(Error::invalid("model.morphology.dt", "need dt > 0 and t_end >= 0"));
        }
        if !(mc.reference_area() > 0.0) {
            return Err(Error::invalid("model.morphology.a0", "must be positive"));
        }
        match m.kind {
            ModelKind::PowerLaw => {
                m.power_law()?;
                if m.stress == StressSource::Field {
                    self.require_file("model.stress_path", &m.stress_path, "stress field")?;
                }
            }
            ModelKind::Pore => {
                // Table contents are checked when the run loads them.
                let table = match &m.pore_table {
                    Some(_) => {
                        self.require_file("model.pore_table", &m.pore_table, "pore table")?;
                        Some(vec![(0.0, 0.0)])
                    }
                    None => None,
                };
                self.pore_params(table)?;
                if m.strain == StrainSource::Field {
                    self.require_file("model.strain_path", &m.strain_path, "strain field")?;
                }
                if m.gf_path.is_some() {
                    self.require_file("model.gf_path", &m.gf_path, "shear rate field")?;
                }
            }
            ModelKind::Drug => {
                if !(m.c_s0 > 0.0) {
                    return Err(Error::invalid("model.c_s0", "must be positive"));
                }
            }
        }

        self.transform()?;
        if self.transform.kind == TransformKind::Logistic && m.kind != ModelKind::Drug {
            return Err(Error::invalid("transform.kind", "the logistic transform needs a reaction-free model (drug)"));
        }
        self.dc.validate()?;
        self.solver.validate()?;
        if self.solver.mode == SolverMode::Transient && self.solver.n_steps == 0 {
            return Err(Error::invalid("solver.n_steps", "must be positive for transient runs"));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::invalid("output.dir", "must not be empty"));
        }

        let o = &self.outflow;
        if o.marker.is_empty() {
            return Err(Error::invalid("outflow.marker", "must not be empty"));
        }
        if !(0.0..1.0).contains(&o.hct) {
            return Err(Error::invalid("outflow.hct", "must lie in [0, 1)"));
        }
        if !(o.v_loop > 0.0) {
            return Err(Error::invalid("outflow.v_loop", "must be positive"));
        }

        let mut names = std::collections::BTreeSet::new();
        for (i, p) in self.probes.iter().enumerate() {
            let key = |f: &str| format!("probe[{i}].{f}");
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(Error::invalid(key("name"), "use letters, digits, '_' or '-'"));
            }
            if !names.insert(&p.name) {
                return Err(Error::invalid(key("name"), format!("duplicate probe '{}'", p.name)));
            }
            for (f, v) in [("p0", &p.p0), ("p1", &p.p1)] {
                if !(2..=3).contains(&v.len()) {
                    return Err(Error::invalid(key(f), "expected 2 or 3 coordinates"));
                }
            }
            if p.n < 2 {
                return Err(Error::invalid(key("n"), "need at least 2 samples"));
            }
        }
        Ok(())
    }
}

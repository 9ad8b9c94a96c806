//! Built-in verification problems: a straight channel with a sheared lower
//! half and a plug-flow upper half, and a synthetic vortex used to exercise
//! the CSV ingestion path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryFacet, Mesh};
use crate::models::{powerlaw_coefficients, PowerLawParams, ReactionCoefficients};

/// Structured channel. Lengths in cm, velocities in cm/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSpec {
    pub length: f64,
    pub height: f64,
    pub u_max: f64,
    /// Curvature of the parabolic part of the profile (1/(cm s)).
    pub profile_coefficient: f64,
    /// Dynamic viscosity (g/(cm s)).
    pub viscosity: f64,
    pub power_law: PowerLawParams,
    /// Physical concentration at the inflow.
    pub inflow: f64,
    pub nx: usize,
    pub ny: usize,
    /// Random displacement of interior nodes as a fraction of the cell size.
    /// Exactly streamline-aligned grids are a degenerate case for crosswind
    /// oscillations; a small perturbation makes the mesh behave like an
    /// unstructured one while keeping the structured connectivity.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            length: 2.0,
            height: 0.62,
            u_max: 300.0,
            profile_coefficient: 1000.0,
            viscosity: 0.35,
            power_law: PowerLawParams { a: 1.0, alpha: 2.0, beta: 1.0 },
            inflow: 0.0,
            // dy = 0.01 puts a node row on the kink at y = 0.5.
            nx: 80,
            ny: 62,
            jitter: 0.25,
            seed: 1,
        }
    }
}

/// Height where the parabolic profile meets the plug.
const KINK: f64 = 0.5;

impl ChannelSpec {
    /// Default channel at another resolution.
    pub fn with_resolution(nx: usize, ny: usize) -> Self {
        ChannelSpec { nx, ny, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::invalid("mesh.nx", "channel resolution must be at least 2x2"));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::invalid("mesh.jitter", "must lie in [0, 0.5)"));
        }
        if !(self.length > 0.0 && self.height > KINK) {
            return Err(Error::invalid("mesh", "channel must be longer than 0 and taller than 0.5"));
        }
        if !(self.u_max > self.profile_coefficient * KINK * KINK) {
            return Err(Error::invalid("velocity", "channel profile must stay positive at the wall"));
        }
        PowerLawParams::new(self.power_law.a, self.power_law.alpha, self.power_law.beta)?;
        Ok(())
    }

    pub fn velocity(&self, y: f64) -> f64 {
        if y < KINK {
            self.u_max - self.profile_coefficient * (KINK - y).powi(2)
        } else {
            self.u_max
        }
    }

    /// Scalar shear stress `mu |du/dy|`.
    pub fn shear_stress(&self, y: f64) -> f64 {
        if y < KINK {
            self.viscosity * 2.0 * self.profile_coefficient * (KINK - y)
        } else {
            0.0
        }
    }

    /// Linearized damage along the streamline through `y` after distance `x`.
    pub fn analytic(&self, x: f64, y: f64) -> f64 {
        let r = powerlaw_coefficients(self.shear_stress(y), &self.power_law).mu_r;
        if r == 0.0 {
            return 0.0;
        }
        -(-r * x / self.velocity(y)).exp_m1()
    }
}

/// `u_x(y)` of the default channel.
pub fn channel_velocity(y: f64) -> f64 {
    ChannelSpec::default().velocity(y)
}

/// Analytic solution of the default channel.
pub fn channel_analytic(x: f64, y: f64) -> f64 {
    ChannelSpec::default().analytic(x, y)
}

#[derive(Clone, Debug)]
pub struct ChannelCase {
    pub spec: ChannelSpec,
    pub mesh: Mesh,
    pub velocity: Vec<[f64; 3]>,
    pub reaction: Vec<ReactionCoefficients>,
}

/// Structured rectangle split into triangles along the rising diagonal.
/// Nodes are numbered column by column (x outer), which keeps the
/// streamwise coupling close to the diagonal for incomplete factorizations.
/// Facet markers: `inflow`, `outflow`, `bottom`, `top`.
pub fn rectangle_mesh(length: f64, height: f64, nx: usize, ny: usize) -> Result<Mesh> {
    jittered_rectangle_mesh(length, height, nx, ny, 0.0, 0)
}

/// [`rectangle_mesh`] with interior nodes displaced uniformly by up to
/// `jitter / 2` cells in each direction, reproducibly from `seed`.
pub fn jittered_rectangle_mesh(length: f64, height: f64, nx: usize, ny: usize, jitter: f64, seed: u64) -> Result<Mesh> {
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let (dx, dy) = (length / nx as f64, height / ny as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for i in 0..=nx {
        for j in 0..=ny {
            let mut p = [dx * i as f64, dy * j as f64, 0.0];
            if jitter > 0.0 && i > 0 && i < nx && j > 0 && j < ny {
                p[0] += jitter * dx * rng.gen_range(-0.5..0.5);
                p[1] += jitter * dy * rng.gen_range(-0.5..0.5);
            }
            nodes.push(p);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            elements.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let facet = |a, b, m: &str| BoundaryFacet {
        nodes: vec![a, b],
        marker: m.to_string(),
    };
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        facets.push(facet(id(0, j), id(0, j + 1), "inflow"));
        facets.push(facet(id(nx, j), id(nx, j + 1), "outflow"));
    }
    for i in 0..nx {
        facets.push(facet(id(i, 0), id(i + 1, 0), "bottom"));
        facets.push(facet(id(i, ny), id(i + 1, ny), "top"));
    }
    Mesh::new(2, nodes, elements, facets)
}

pub fn build_channel(spec: &ChannelSpec) -> Result<ChannelCase> {
    spec.validate()?;
    let mesh = jittered_rectangle_mesh(spec.length, spec.height, spec.nx, spec.ny, spec.jitter, spec.seed)?;
    let velocity = mesh.nodes().iter().map(|p| [spec.velocity(p[1]), 0.0, 0.0]).collect();
    let reaction = mesh
        .nodes()
        .iter()
        .map(|p| powerlaw_coefficients(spec.shear_stress(p[1]), &spec.power_law))
        .collect();
    Ok(ChannelCase {
        spec: spec.clone(),
        mesh,
        velocity,
        reaction,
    })
}

/// Solid-body vortex on `[0, 1]^2` centred at `(0.5, 0.5)` superposed on a
/// uniform drift `(u0, 0)`, so the left edge is an inflow and the right an
/// outflow while the interior has closed-ish streamlines and strong shear.
pub fn vortex_velocity(p: &[f64; 3], u0: f64, omega: f64) -> [f64; 3] {
    let (dx, dy) = (p[0] - 0.5, p[1] - 0.5);
    let r2 = dx * dx + dy * dy;
    // Gaussian-damped rotation keeps the boundary velocity close to u0.
    let w = omega * (-r2 / 0.04).exp();
    [u0 - w * dy, w * dx, 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn velocity_profile_examples() {
        assert_eq!(channel_velocity(0.5), 300.0);
        assert_eq!(channel_velocity(0.0), 50.0);
        assert_eq!(channel_velocity(0.6), 300.0);
    }

    #[test]
    fn analytic_examples() {
        assert_eq!(channel_analytic(1.3, 0.5), 0.0);
        assert_eq!(channel_analytic(1.3, 0.61), 0.0);
        assert_eq!(channel_analytic(0.0, 0.2), 0.0);
        let expect = 1.0 - (-350.0_f64 * 350.0 * 2.0 / 50.0).exp();
        assert_eq!(channel_analytic(2.0, 0.0), expect);
    }

    #[test]
    fn analytic_matches_streamline_ode() {
        // dc/dx = r (1 - c) / u along y = const, integrated with RK4.
        let spec = ChannelSpec::default();
        for &y in &[0.3, 0.45, 0.49] {
            let r = powerlaw_coefficients(spec.shear_stress(y), &spec.power_law).mu_r;
            let u = spec.velocity(y);
            let f = |c: f64| r * (1.0 - c) / u;
            let n = 20000;
            let h = 2.0 / n as f64;
            let mut c = 0.0;
            for _ in 0..n {
                let k1 = f(c);
                let k2 = f(c + 0.5 * h * k1);
                let k3 = f(c + 0.5 * h * k2);
                let k4 = f(c + h * k3);
                c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            assert!((c - spec.analytic(2.0, y)).abs() < 1e-10, "y={y}");
        }
    }

    #[test]
    fn analytic_stays_in_unit_interval() {
        let spec = ChannelSpec::default();
        for i in 0..=40 {
            for j in 0..=62 {
                let (x, y) = (0.05 * i as f64, 0.01 * j as f64);
                let c = spec.analytic(x, y);
                assert!((0.0..=1.0).contains(&c), "{c} at {x},{y}");
                if c == 1.0 {
                    // Only where exp(-r x / u) is below half an ulp of one.
                    let r = powerlaw_coefficients(spec.shear_stress(y), &spec.power_law).mu_r;
                    assert!(r * x / spec.velocity(y) > 36.0, "{x},{y}");
                }
                if x == 0.0 || y >= 0.5 {
                    assert_eq!(c, 0.0);
                }
            }
        }
    }

    #[test]
    fn small_channel_counts_and_velocity() {
        let case = build_channel(&ChannelSpec::with_resolution(2, 2)).unwrap();
        assert_eq!(case.mesh.num_nodes(), 9);
        assert_eq!(case.mesh.num_elements(), 8);
        for (p, u) in case.mesh.nodes().iter().zip(&case.velocity) {
            assert_eq!(u[0], channel_velocity(p[1]));
            assert_eq!(u[1], 0.0);
        }
        let markers: Vec<&str> = case.mesh.markers().into_iter().collect();
        assert_eq!(markers, vec!["bottom", "inflow", "outflow", "top"]);
    }

    #[test]
    fn resolution_is_validated() {
        assert!(build_channel(&ChannelSpec::with_resolution(1, 4)).is_err());
    }

    #[test]
    fn default_channel_is_ten_thousand_triangles() {
        let s = ChannelSpec::default();
        assert_eq!(2 * s.nx * s.ny, 9920);
        assert!((s.height / s.ny as f64 * 50.0 - 0.5).abs() < 1e-12 * 50.0);
    }

    #[test]
    fn jitter_is_reproducible_and_keeps_the_boundary() {
        let spec = ChannelSpec { nx: 10, ny: 6, ..Default::default() };
        let a = build_channel(&spec).unwrap();
        let b = build_channel(&spec).unwrap();
        assert_eq!(a.mesh.nodes(), b.mesh.nodes());
        let plain = rectangle_mesh(spec.length, spec.height, 10, 6).unwrap();
        let mut moved = 0;
        for (p, q) in a.mesh.nodes().iter().zip(plain.nodes()) {
            let on_boundary = q[0] == 0.0 || q[0] == spec.length || q[1] == 0.0 || q[1] == spec.height;
            if on_boundary {
                assert_eq!(p, q);
            } else {
                assert!((p[0] - q[0]).abs() <= 0.125 * 0.2 && (p[1] - q[1]).abs() <= 0.125 * 0.62 / 6.0);
                moved += (p != q) as usize;
            }
        }
        assert_eq!(moved, 9 * 5);
        assert!(build_channel(&ChannelSpec { jitter: 0.5, ..spec }).is_err());
    }
}

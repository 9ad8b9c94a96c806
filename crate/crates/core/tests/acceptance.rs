//! Acceptance suite. Every check prints one `PASS`/`FAIL` line with the
//! measured value and the pinned tolerance, then the test asserts.

use std::io::Write;
use std::time::Instant;

use bt_core::cases::{build_channel, jittered_rectangle_mesh, vortex_velocity, ChannelCase, ChannelSpec};
use bt_core::femcore::{
    codina_diffusivity, dc_diffusivity, dc_element, dc_tensor, element_dc, supg_element, DcConfig, DcDiffusivity,
    DcOperator, ResidualForm,
};
use bt_core::io::fields::write_vector_field;
use bt_core::io::{run, RunConfig};
use bt_core::mesh::{element_geometry, write_native_csv, Mesh};
use bt_core::models::{
    mass_transfer, pore_coefficients, powerlaw_coefficients, PoreAreaModel, PoreModelParams, PowerLawParams,
};
use bt_core::morphology::{
    area_strain_with, effective_stress, integrate_local, AreaMethod, MorphologyParams, ShapeTensor,
};
use bt_core::postproc::{delta_phb, l2_error};
use bt_core::solver::{solve_steady, Problem, SolverConfig};
use bt_core::xform::Transform;
use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes past the harness capture so the lines land in the test log.
fn line(msg: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{msg}");
    let _ = out.flush();
}

/// Records one criterion and returns whether it held.
fn check(id: &str, ok: bool, detail: String) -> bool {
    line(format!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" }));
    ok
}

fn info(id: &str, detail: String) {
    line(format!("INFO {id}: {detail}"));
}

/// `|min_ref| / |min|`, reported as unbounded when `min` has no negative part.
fn reduction(min_ref: f64, min: f64) -> (bool, String) {
    if min >= 0.0 {
        return (true, "no negative values left".into());
    }
    let f = min_ref.abs() / min.abs();
    (f >= 100.0, format!("|min| reduced {f:.0}x"))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

enum Variable {
    Identity,
    Upper,
}

/// Steady channel solve returning the physical concentration.
fn solve_channel(case: &ChannelCase, var: Variable, dc: DcConfig) -> Vec<f64> {
    let transform = match var {
        Variable::Identity => Transform::identity(),
        Variable::Upper => Transform::upper_bound(1.0, 1.0).unwrap(),
    };
    let problem = Problem::new(&case.mesh, &case.velocity, &case.reaction, transform, dc, case.spec.inflow).unwrap();
    let sol = solve_steady(&problem, &SolverConfig::default()).unwrap();
    transform.field_to_physical(&sol.field)
}

fn cwd(d: DcDiffusivity) -> DcConfig {
    DcConfig::new(DcOperator::CwdReference, d)
}

fn dc_off() -> DcConfig {
    DcConfig::new(DcOperator::None, DcDiffusivity::DcQuad)
}

/// Outflow nodes above the kink, sorted by height: `(y, c)`.
fn upper_outflow(mesh: &Mesh, c: &[f64], length: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = mesh
        .nodes()
        .iter()
        .zip(c)
        .filter(|(p, _)| (p[0] - length).abs() < 1e-12 && p[1] > 0.5 - 1e-12)
        .map(|(p, &v)| (p[1], v))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts
}

fn line_inf(pts: &[(f64, f64)]) -> f64 {
    pts.iter().filter(|p| p.0 > 0.5 + 1e-12).map(|p| p.1.abs()).fold(0.0, f64::max)
}

/// Trapezoidal `int |c| dy` along the line.
fn line_l1(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.abs() + w[1].1.abs())).sum()
}

#[test]
fn criterion_1_channel_bounds() {
    let start = Instant::now();
    let case = build_channel(&ChannelSpec::default()).unwrap();
    info("1", format!("channel {}x{}: {} triangles", case.spec.nx, case.spec.ny, case.mesh.num_elements()));

    let (min_a, max_a) = min_max(&solve_channel(&case, Variable::Identity, dc_off()));
    let upper_off = solve_channel(&case, Variable::Upper, dc_off());
    let quad = solve_channel(&case, Variable::Upper, cwd(DcDiffusivity::DcQuad));
    let lin = solve_channel(&case, Variable::Upper, cwd(DcDiffusivity::DcLin));
    let elapsed = start.elapsed().as_secs_f64();

    let mut ok = check(
        "1(a)",
        min_a < 0.0 && max_a > 1.0 && (1e-4..=1e-1).contains(&min_a.abs()),
        format!("identity DC-off min={min_a:.3e} max={max_a:.4} (need min<0, max>1, |min| in [1e-4, 1e-1])"),
    );
    let max_b = [&upper_off, &quad, &lin].iter().map(|c| min_max(c).1).fold(f64::NEG_INFINITY, f64::max);
    ok &= check(
        "1(b)",
        max_b < 1.0,
        format!("upper transform max over DC-off/quad/lin = {max_b:e} (need < 1 at every node)"),
    );
    let min_quad = min_max(&quad).0;
    let (pass, what) = reduction(min_a, min_quad);
    ok &= check("1(c)", pass, format!("CWD DC-quad min={min_quad:.3e}, {what} (need >= 100x)"));
    let min_lin = min_max(&lin).0;
    ok &= check("1(d)", min_lin >= -1e-12, format!("CWD DC-lin min={min_lin:.3e} (need >= -1e-12)"));
    ok &= check("1(runtime)", elapsed < 60.0, format!("four 80x62 solves in {elapsed:.1} s (need < 60 s)"));

    // Exactly streamline-aligned grid, for reference only.
    let aligned = build_channel(&ChannelSpec { jitter: 0.0, ..Default::default() }).unwrap();
    let a = min_max(&solve_channel(&aligned, Variable::Identity, dc_off())).0;
    let q = min_max(&solve_channel(&aligned, Variable::Upper, cwd(DcDiffusivity::DcQuad))).0;
    let l = min_max(&solve_channel(&aligned, Variable::Upper, cwd(DcDiffusivity::DcLin))).0;
    info("1", format!("aligned grid: DC-off min={a:.3e}, DC-quad min={q:.3e} ({:.1}x), DC-lin min={l:.3e}", a / q));
    assert!(ok);
}

const LEVELS: [(usize, usize); 4] = [(40, 31), (80, 62), (160, 124), (320, 248)];

#[test]
fn criterion_2a_l2_convergence() {
    let mut errors = Vec::new();
    for (nx, ny) in LEVELS {
        let case = build_channel(&ChannelSpec::with_resolution(nx, ny)).unwrap();
        let c = solve_channel(&case, Variable::Upper, dc_off());
        let spec = &case.spec;
        errors.push(l2_error(&case.mesh, &c, |p| spec.analytic(p[0], p[1])).unwrap());
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = check(
        "2(a)",
        ratios.iter().all(|&r| r < 1.0),
        format!(
            "L2 errors {} with ratios {} (need every ratio < 1)",
            errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2b_upper_outflow_line() {
    let (nx, ny) = LEVELS[LEVELS.len() - 1];
    let case = build_channel(&ChannelSpec::with_resolution(nx, ny)).unwrap();
    let c = solve_channel(&case, Variable::Upper, cwd(DcDiffusivity::DcQuad));
    let worst = line_inf(&upper_outflow(&case.mesh, &c, case.spec.length));
    let ok = check(
        "2(b)",
        worst <= 1e-3,
        format!("{nx}x{ny} DC-quad max |c| on x=2, y>0.5 is {worst:.3e} (need <= 1e-3)"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_dc_diffusion_ordering() {
    let case = build_channel(&ChannelSpec::default()).unwrap();
    let l1 = |d| line_l1(&upper_outflow(&case.mesh, &solve_channel(&case, Variable::Upper, cwd(d)), case.spec.length));
    let (lin, quad) = (l1(DcDiffusivity::DcLin), l1(DcDiffusivity::DcQuad));
    let ok = check(
        "3",
        lin > quad,
        format!("upper outflow line L1: DC-lin {lin:.3e} vs DC-quad {quad:.3e} (need lin > quad)"),
    );
    assert!(ok);
}

fn random_element(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<[f64; 3]>, bt_core::mesh::ElementGeometry) {
    loop {
        let mut pts: Vec<[f64; 3]> = (0..=dim)
            .map(|_| {
                let mut p = [0.0; 3];
                for x in p.iter_mut().take(dim) {
                    *x = rng.gen_range(-1.0..1.0);
                }
                p
            })
            .collect();
        let jac = DMatrix::from_fn(dim, dim, |i, j| pts[j + 1][i] - pts[0][i]);
        let det = jac.determinant();
        if det.abs() < 0.05 {
            continue;
        }
        if det < 0.0 {
            pts.swap(1, 2);
        }
        let conn = vec![(0..=dim).collect()];
        let mesh = Mesh::new(dim, pts.clone(), conn, vec![]).unwrap();
        return (pts, element_geometry(&mesh, 0).unwrap());
    }
}

fn random_vec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.gen_range(-r..r))
}

#[test]
fn criterion_4_operator_invariants() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let tol = 1e-12;
    let (mut proj, mut annihil, mut psd, mut nonneg, mut zero_res) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut min_nu = f64::INFINITY;
    for trial in 0..1000 {
        let dim = 2 + trial % 2;
        let (pts, g) = random_element(&mut rng, dim);
        let u = random_vec(&mut rng, dim, 5.0);
        if u.norm() < 1e-3 {
            continue;
        }
        // Reference-frame projector recovered from M = J P J^T.
        let m = dc_tensor(&u, &g, &cwd(DcDiffusivity::DcQuad));
        let p = &g.inverse_jacobian * &m * g.inverse_jacobian.transpose();
        proj = proj.max((&p * &p - &p).abs().max());
        let gu = &g.metric * &u;
        annihil = annihil.max((&m * &gu).norm() / (m.norm() * gu.norm()));
        for op in [DcOperator::Isotropic, DcOperator::CwdReference, DcOperator::CwdPhysical] {
            let t = dc_tensor(&u, &g, &DcConfig::new(op, DcDiffusivity::DcQuad));
            let sym = (&t - t.transpose()).abs().max();
            let lo = t.clone().symmetric_eigen().eigenvalues.min();
            psd = psd.max(sym.max(-lo) / t.norm());
        }

        let grad = random_vec(&mut rng, dim, 3.0);
        let r = rng.gen_range(-10.0..10.0);
        let tau = rng.gen_range(0.0..2.0);
        for d in [DcDiffusivity::DcLin, DcDiffusivity::DcQuad, DcDiffusivity::Codina] {
            let cfg = cwd(d);
            min_nu = min_nu
                .min(dc_diffusivity(r, &grad, &g.metric_inverse, tau, 1.0, &cfg))
                .min(codina_diffusivity(r, &grad, g.longest_edge, 1.0, &cfg));
        }
        nonneg = nonneg.max((-min_nu).max(0.0));

        // Linear field solving u . grad c = f exactly: no stabilization.
        let u_nodes = vec![u.clone(); dim + 1];
        let form = ResidualForm { reaction: 0.0, source: u.dot(&grad) };
        let c: Vec<f64> = pts.iter().map(|x| (0..dim).map(|i| grad[i] * x[i]).sum::<f64>() + 0.3).collect();
        let cv = DVector::from_column_slice(&c);
        let sys = supg_element(&g, &u_nodes, &form, None, None).unwrap();
        let scale = u.norm() * grad.norm().max(1.0) * g.volume / g.longest_edge;
        zero_res = zero_res.max((&sys.supg_matrix * &cv - &sys.supg_rhs).abs().max() / scale);
        for d in [DcDiffusivity::DcLin, DcDiffusivity::DcQuad, DcDiffusivity::Codina] {
            for op in [DcOperator::Isotropic, DcOperator::CwdReference, DcOperator::CwdPhysical] {
                let cfg = DcConfig::new(op, d);
                let e = element_dc(&g, &u_nodes, &form, None, &c, None, 1.0, &cfg).unwrap();
                let contrib = dc_element(&g, e.nu, &e.tensor) * &cv;
                zero_res = zero_res.max(contrib.abs().max() / scale);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let mut ok = check("4(P^2=P)", proj <= tol, format!("max |P^2 - P| = {proj:.2e} (need <= {tol:e})"));
    ok &= check("4(M Gu=0)", annihil <= tol, format!("max |M G u| / (|M| |G u|) = {annihil:.2e} (need <= {tol:e})"));
    ok &= check("4(PSD)", psd <= tol, format!("max asymmetry or negative eigenvalue / |M| = {psd:.2e} (need <= {tol:e})"));
    ok &= check("4(nu>=0)", nonneg == 0.0, format!("min DC diffusivity {min_nu:.3e} (need >= 0)"));
    ok &= check(
        "4(zero residual)",
        zero_res <= tol,
        format!("max SUPG/DC contribution for an exact linear field, scaled = {zero_res:.2e} (need <= {tol:e})"),
    );
    ok &= check("4(runtime)", elapsed < 5.0, format!("1000 elements in {elapsed:.2} s (need < 5 s)"));
    assert!(ok);
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    *Rotation3::new(axis.normalize() * rng.gen_range(0.0..std::f64::consts::PI)).matrix()
}

#[test]
fn criterion_5_morphology() {
    let p = MorphologyParams::default();
    let mut shear = Matrix3::zeros();
    shear[(0, 1)] = 1000.0;
    let dt = 1e-5;
    // 10^4 steps in ten windows; drift tracked at each window end.
    let mut s = ShapeTensor::identity();
    let mut drift = 0.0_f64;
    for _ in 0..10 {
        s = integrate_local(&s, &shear, 1000.0 * dt, dt, &p).unwrap();
        drift = drift.max((s.third_invariant() - 1.0).abs());
    }
    let mut ok = check(
        "5(det)",
        drift < 1e-6,
        format!("max |det S - 1| over 1e4 RK4 steps at 1000/s = {drift:.2e} (need < 1e-6)"),
    );

    let mut sphere = 0.0_f64;
    for r in [1.0, 0.37, 2.5] {
        let s0 = ShapeTensor(Matrix3::identity() * r);
        let s = integrate_local(&s0, &Matrix3::zeros(), 0.1, 1e-4, &p).unwrap();
        sphere = sphere.max((s.matrix() - s0.matrix()).abs().max() / r);
    }
    ok &= check("5(sphere)", sphere <= 1e-14, format!("rest-state deviation {sphere:.2e} (need <= 1e-14)"));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut equi = 0.0_f64;
    for _ in 0..20 {
        let r = random_rotation(&mut rng);
        let mut g = Matrix3::from_fn(|_, _| rng.gen_range(-300.0..300.0));
        let tr = g.trace() / 3.0;
        g -= Matrix3::identity() * tr;
        let q = random_rotation(&mut rng);
        let s0 = ShapeTensor(q * Matrix3::from_diagonal(&Vector3::new(1.3, 1.0, 0.8)) * q.transpose());
        let a = integrate_local(&s0, &g, 0.01, 1e-5, &p).unwrap();
        let b = integrate_local(&ShapeTensor(r * s0.matrix() * r.transpose()), &(r * g * r.transpose()), 0.01, 1e-5, &p)
            .unwrap();
        let diff = (r * a.matrix() * r.transpose() - b.matrix()).abs().max() / a.matrix().abs().max();
        equi = equi.max(diff);
    }
    ok &= check("5(equivariance)", equi <= 1e-12, format!("max relative |R S R^T - S(R)| = {equi:.2e} (need <= 1e-12)"));
    assert!(ok);
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let k = k as f64;
                        (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                    }
                    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    return (x, 2.0 / ((1.0 - x * x) * dp * dp));
                }
            }
        })
        .collect()
}

/// Ellipsoid surface area by direct quadrature of the parametrized surface
/// `(a sin t cos p, b sin t sin p, c cos t)`: Gauss-Legendre in `t` (the
/// integrand is analytic on [0, pi]) and the spectrally accurate trapezoid
/// rule in the periodic `p`.
fn ellipsoid_area_quadrature(a: f64, b: f64, c: f64, gl: &[(f64, f64)], n_phi: usize) -> f64 {
    let half_pi = 0.5 * std::f64::consts::PI;
    let mut sum = 0.0;
    for &(x, w) in gl {
        let t = half_pi * (x + 1.0);
        let (st, ct) = t.sin_cos();
        for k in 0..n_phi {
            let (sp, cp) = (2.0 * std::f64::consts::PI * k as f64 / n_phi as f64).sin_cos();
            let (nx, ny, nz) = (b * c * st * cp, a * c * st * sp, a * b * ct);
            sum += w * half_pi * st * (nx * nx + ny * ny + nz * nz).sqrt();
        }
    }
    sum * 2.0 * std::f64::consts::PI / n_phi as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_6_model_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let tol = 1e-10;
    let (mut pl, mut mt, mut se, mut eps, mut phb) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let gl = gauss_legendre(160);
    let morph = MorphologyParams::default();
    for _ in 0..100 {
        // Power law against the log-space form.
        let (a, alpha, beta) = (10f64.powf(rng.gen_range(-9.0..-5.0)), rng.gen_range(1.0..2.5), rng.gen_range(0.2..1.0));
        let sigma = 10f64.powf(rng.gen_range(-1.0..3.0));
        let got = powerlaw_coefficients(sigma, &PowerLawParams::new(a, alpha, beta).unwrap()).mu_r;
        pl = pl.max(rel(got, ((a.ln() + alpha * sigma.ln()) / beta).exp()));

        let (h, k) = (10f64.powf(rng.gen_range(-9.0..-6.0)), rng.gen_range(0.5..2.0));
        let g_f = 10f64.powf(rng.gen_range(0.0..5.0));
        let params = PoreModelParams {
            h,
            k_exp: k,
            hct: 0.36,
            v_rbc: 2.3,
            eps0: PoreModelParams::EPS0_DEFAULT,
            pore_area: PoreAreaModel::Linear { c_p: 1.0 },
        };
        mt = mt.max(rel(mass_transfer(g_f, &params), (h.ln() + k * g_f.ln()).exp()));

        // Effective stress through the semi-axes: 1 - D^2 = 4 L W / (L + W)^2.
        let (l, w) = (rng.gen_range(1.0..3.0), rng.gen_range(0.3..1.0));
        let visc = rng.gen_range(0.01..0.1);
        let d = (l - w) / (l + w);
        let oracle = visc * morph.alpha1 * (l * l - w * w) / (2.0 * l * w * morph.alpha2);
        se = se.max(rel(effective_stress(d, visc, &morph).unwrap(), oracle));

        // Area strain of a rotated ellipsoid against direct quadrature, with
        // the equal-volume sphere as reference so that eps stays O(0.1).
        let axes = [rng.gen_range(1.5..3.0), rng.gen_range(0.8..1.5), rng.gen_range(0.3..0.8)];
        let q = random_rotation(&mut rng);
        let s = ShapeTensor(q * Matrix3::from_diagonal(&Vector3::new(axes[0] * axes[0], axes[1] * axes[1], axes[2] * axes[2])) * q.transpose());
        let a0 = 4.0 * std::f64::consts::PI * (axes[0] * axes[1] * axes[2]).powf(2.0 / 3.0);
        let area = ellipsoid_area_quadrature(axes[0], axes[1], axes[2], &gl, 256);
        eps = eps.max(rel(area_strain_with(&s, a0, AreaMethod::Exact).unwrap(), area / a0 - 1.0));

        // Hemoglobin release with the loop constants, in separated units.
        let ih = 10f64.powf(rng.gen_range(-8.0..-3.0));
        let plasma_fraction = 1.0 - 0.36;
        let volume_pumped_ml = 6.0 * 120.0 * 1000.0;
        phb = phb.max(rel(delta_phb(ih, 15000.0, 0.36, 6.0, 120.0, 250.0), ih * 15000.0 / plasma_fraction * (volume_pumped_ml / 250.0)));
    }
    let mut ok = check("6(power law)", pl <= tol, format!("max relative error {pl:.2e} (need <= {tol:e})"));
    ok &= check("6(mass transfer)", mt <= tol, format!("max relative error {mt:.2e} (need <= {tol:e})"));
    ok &= check("6(effective stress)", se <= tol, format!("max relative error {se:.2e} (need <= {tol:e})"));
    ok &= check("6(area strain)", eps <= tol, format!("max relative error {eps:.2e} (need <= {tol:e})"));
    ok &= check("6(delta PHb)", phb <= tol, format!("max relative error {phb:.2e} (need <= {tol:e})"));

    // Pore model below threshold: zero rate, and a solve stays at zero.
    let params = PoreModelParams {
        h: PoreModelParams::H_PORCINE,
        k_exp: PoreModelParams::K_PORCINE,
        hct: 0.36,
        v_rbc: 2.3,
        eps0: PoreModelParams::EPS0_DEFAULT,
        pore_area: PoreAreaModel::Linear { c_p: 1.7e-3 },
    };
    let mut case = build_channel(&ChannelSpec::with_resolution(40, 31)).unwrap();
    case.reaction = case
        .mesh
        .nodes()
        .iter()
        .map(|_| pore_coefficients(rng.gen_range(-0.5..=params.eps0), rng.gen_range(0.0..1e4), &params))
        .collect();
    let transform = Transform::upper_bound(1.0 - params.hct, 1.0).unwrap();
    let problem = Problem::new(&case.mesh, &case.velocity, &case.reaction, transform, cwd(DcDiffusivity::DcQuad), 0.0).unwrap();
    let c = transform.field_to_physical(&solve_steady(&problem, &SolverConfig::default()).unwrap().field);
    let peak = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ok &= check("6(pore threshold)", peak == 0.0, format!("max |c| with eps <= eps0 everywhere = {peak:e} (need exactly 0)"));
    assert!(ok);
}

#[test]
fn criterion_7_vortex_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = jittered_rectangle_mesh(1.0, 1.0, 60, 60, 0.25, 7).unwrap();
    write_native_csv(&mesh, &dir.path().join("mesh")).unwrap();
    let u: Vec<[f64; 3]> = mesh.nodes().iter().map(|p| vortex_velocity(p, 1.0, 40.0)).collect();
    write_vector_field(&dir.path().join("u.csv"), &u, 2).unwrap();

    let solve = |transform: &str, dc: &str, out: &str| {
        let text = format!(
            "[mesh]\nsource = \"file\"\npath = \"mesh\"\n[velocity]\nsource = \"csv\"\npath = \"u.csv\"\n\
             [transform]\nkind = \"{transform}\"\n[dc]\n{dc}\n[output]\ndir = \"{out}\"\n"
        );
        run(&RunConfig::from_str_in(&text, dir.path()).unwrap()).unwrap()
    };
    let off = solve("identity", "operator = \"none\"", "off");
    let upper_off = solve("upper", "operator = \"none\"", "upper");
    let quad = solve("upper", "operator = \"cwd_reference\"\ndiffusivity = \"dc_quad\"", "quad");
    let lin = solve("upper", "operator = \"cwd_reference\"\ndiffusivity = \"dc_lin\"", "lin");
    info("7", format!("vortex identity DC-off min={:.3e} max={:.4}", off.stats.min, off.stats.max));

    let max_b = [&upper_off, &quad, &lin].iter().map(|r| r.stats.max).fold(f64::NEG_INFINITY, f64::max);
    let mut ok = check("7(1b)", max_b < 1.0, format!("vortex upper transform max = {max_b:e} (need < 1)"));
    let (pass, what) = reduction(off.stats.min, quad.stats.min);
    ok &= check("7(1c)", pass, format!("vortex CWD DC-quad min={:.3e}, {what} (need >= 100x)", quad.stats.min));
    ok &= check("7(1d)", lin.stats.min >= -1e-12, format!("vortex CWD DC-lin min={:.3e} (need >= -1e-12)", lin.stats.min));

    let o = quad.outflow.as_ref().expect("outflow boundary present");
    let expected = delta_phb(o.ih, 15000.0, 0.36, 6.0, 120.0, 250.0);
    ok &= check(
        "7(outflow)",
        o.ih.is_finite() && o.ih >= 0.0 && o.delta_phb == expected,
        format!("IH_out={:.4e}, dPHb={:.4e} mg/dL at Hct 0.36, T 120 min, V 250 mL, Hb 15000 mg/dL, Q 6 L/min", o.ih, o.delta_phb),
    );
    assert!(ok);
}

//! Suite runner: turns an [`ExperimentConfig`] into report rows and field dumps.
//!
//! Nothing is written until every row of the requested suite has been
//! computed, so a failing run leaves no partial output behind.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use rayon::prelude::*;

use crate::chart::ChartGrid;
use crate::closed_form::{
    fluctuating_sphere, fluctuating_sphere_residual, position_wave_residual, radial_divergence_numeric, radial_velocity, rotor_pair_residual,
    AxisWaves, FluctuatingSphereParams, PlaneWaveL, PlaneWaveR, SampledField, SpaceTimeField, StandingWave, WaveProfile,
    WaveSpec,
};
use crate::config::{ExperimentConfig, Suite};
use crate::dynamics::{
    evolve_compressible, evolve_wave, radial_reference, wave_reversibility, wave_step_limit, CompressibleParams,
    DynamicState, MaterialFields, WaveParams,
};
use crate::error::{Error, Result};
use crate::geometry::{integrate_enclosed_volume, integrate_surface, laplace_beltrami, write_geometry_csv, CurvatureSign, GeometryState};
use crate::laws::{
    boundedness_certificate, random_ensemble, solve_curvature_law, static_closure, write_solution_csv, EnsembleSpec,
    EnvironmentFields, LawInput, LawKind, LawSource, StaticFields,
};
use crate::ns::{
    analytic_ns_residual, continuity_residual, energy_flux_divergence, residual_error, viscous_stress, AnalyticFlow,
    BoxGrid, FlowCase,
};
use crate::report::{emit_report, observed_order, ReportRow};
use crate::shape::{reference, ShapeSpec};
use crate::transport::{
    check_space_transport, check_surface_transport, incompressibility_residual, mean_curvature_rate_check, volume_at,
    Motion, MovingSurface,
};

/// Rows plus auxiliary CSV files `(file name, contents)`.
#[derive(Debug, Clone, Default)]
pub struct SuiteOutput {
    pub rows: Vec<ReportRow>,
    pub fields: Vec<(String, String)>,
}

impl SuiteOutput {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    fn extend(&mut self, other: SuiteOutput) {
        self.rows.extend(other.rows);
        self.fields.extend(other.fields);
    }
}

/// Runs the configured suite. `all` runs every suite, concurrently, and
/// concatenates them in a fixed order.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    cfg.validate()?;
    let suites: Vec<Suite> = match cfg.suite {
        Suite::All => vec![Suite::Geometry, Suite::Transport, Suite::Evolve, Suite::Verify, Suite::Laws, Suite::Ns],
        s => vec![s],
    };
    let parts: Vec<Result<SuiteOutput>> = suites
        .par_iter()
        .map(|s| match s {
            Suite::Geometry => geometry_suite(cfg),
            Suite::Transport => transport_suite(cfg),
            Suite::Evolve => evolve_suite(cfg),
            Suite::Verify => verify_suite(cfg),
            Suite::Laws => laws_suite(cfg),
            Suite::Ns => ns_suite(cfg),
            Suite::All => unreachable!(),
        })
        .collect();
    let mut out = SuiteOutput::default();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Writes the report, then any field dumps, after the suite has completed.
pub fn write_outputs(cfg: &ExperimentConfig, out: &SuiteOutput, report: &Path) -> Result<()> {
    if let Some(dir) = &cfg.fields_dir {
        std::fs::create_dir_all(dir)?;
    }
    emit_report(&out.rows, cfg.format, report)?;
    write_fields(cfg, out)
}

/// Field dumps into `fields_dir`; a no-op when it is unset.
pub fn write_fields(cfg: &ExperimentConfig, out: &SuiteOutput) -> Result<()> {
    if let Some(dir) = &cfg.fields_dir {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &out.fields {
            std::fs::write(dir.join(name), body)?;
        }
    }
    Ok(())
}

fn res(n: (usize, usize)) -> String {
    format!("{}x{}", n.0, n.1)
}

/// Label without commas so it can sit in a CSV cell.
pub fn shape_label(s: &ShapeSpec) -> String {
    match *s {
        ShapeSpec::Sphere { radius } => format!("sphere({radius})"),
        ShapeSpec::Torus { major, minor } => format!("torus({major};{minor})"),
        ShapeSpec::Ellipsoid { a, b, c } => format!("ellipsoid({a};{b};{c})"),
        ShapeSpec::Graph { .. } => "graph".into(),
        ShapeSpec::RadialGraph { .. } => "radial_graph".into(),
    }
}

fn motion_label(m: &Motion) -> &'static str {
    match m {
        Motion::Static(_) => "static",
        Motion::ExpandingSphere { .. } => "expanding_sphere",
        Motion::OscillatingEllipsoid { .. } => "oscillating_ellipsoid",
        Motion::RigidRotation { .. } => "rigid_rotation",
        Motion::TangentialSlide { .. } => "torus_slide",
        Motion::BreathingRadial { .. } => "breathing_sphere",
        Motion::TravellingGraph { .. } => "travelling_graph",
    }
}

fn flow_label(f: &FlowCase) -> &'static str {
    match f {
        FlowCase::Rest { .. } => "rest",
        FlowCase::RigidMotion { .. } => "rigid_motion",
        FlowCase::RigidRotation { .. } => "rotation",
        FlowCase::Shear { .. } => "shear",
        FlowCase::Dilation { .. } => "dilation",
        FlowCase::Vortex { .. } => "vortex",
    }
}

/// Row asserting an observed order of at least `min_order`.
fn order_row(suite: &str, case: &str, resolution: String, order: Option<f64>, min_order: f64) -> ReportRow {
    let measured = order.unwrap_or(f64::NAN);
    let error = match order {
        Some(o) => (min_order - o).max(0.0),
        None => f64::INFINITY,
    };
    ReportRow::new(suite, case, resolution, measured, min_order, error, 0.0).with_order(order)
}

fn relative(measured: f64, reference: f64) -> f64 {
    let scale = reference.abs();
    if scale > 0.0 {
        (measured - reference).abs() / scale
    } else {
        (measured - reference).abs()
    }
}

fn geometry_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "geometry";
    let tol = &cfg.tolerances;
    let per_shape: Vec<Result<SuiteOutput>> = cfg
        .shapes
        .par_iter()
        .map(|shape| {
            let label = shape_label(shape);
            let mut out = SuiteOutput::default();
            let mut prev: Option<(f64, f64)> = None;
            for (idx, &n) in cfg.resolutions.iter().enumerate() {
                let chart = shape.default_chart(n.0, n.1)?;
                let g = GeometryState::from_shape(&chart, shape)?;
                let (mut eh, mut ek, mut hmax, mut kmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
                for k in g.valid_nodes() {
                    let (u, v) = chart.coords(k);
                    let r = reference::at(shape, u, v)
                        .ok_or_else(|| Error::Config(format!("no closed-form oracle for {label}")))?;
                    eh = eh.max((g.mean[k] - r.mean).abs());
                    ek = ek.max((g.gauss[k] - r.gauss).abs());
                    hmax = hmax.max(r.mean.abs());
                    kmax = kmax.max(r.gauss.abs());
                }
                let (oh, ok) = match prev {
                    Some((ph, pk)) => (observed_order(ph, eh), observed_order(pk, ek)),
                    None => (None, None),
                };
                out.rows.push(ReportRow::new(SUITE, &format!("{label}/H"), res(n), eh, hmax, eh, tol.geometry).with_order(oh));
                out.rows.push(ReportRow::new(SUITE, &format!("{label}/K"), res(n), ek, kmax, ek, tol.geometry).with_order(ok));
                if idx > 0 {
                    out.rows.push(order_row(SUITE, &format!("{label}/H/order"), res(n), oh, tol.min_order));
                    out.rows.push(order_row(SUITE, &format!("{label}/K/order"), res(n), ok, tol.min_order));
                }
                if let Some(area) = reference::area(shape) {
                    let a = integrate_surface(&vec![1.0; g.len()], &g)?;
                    out.rows.push(ReportRow::new(SUITE, &format!("{label}/area"), res(n), a, area, relative(a, area), tol.geometry));
                }
                if let Some(vol) = reference::volume(shape) {
                    let v = integrate_enclosed_volume(&g)?;
                    out.rows.push(ReportRow::new(SUITE, &format!("{label}/volume"), res(n), v, vol, relative(v, vol), tol.geometry));
                }
                if idx + 1 == cfg.resolutions.len() {
                    let mut buf = Vec::new();
                    write_geometry_csv(&g, &mut buf)?;
                    let name = format!("geometry_{}_{}.csv", shape.name(), res(n));
                    out.fields.push((name, String::from_utf8(buf).expect("ascii csv")));
                }
                prev = Some((eh, ek));
            }
            Ok(out)
        })
        .collect();
    let mut out = SuiteOutput::default();
    for p in per_shape {
        out.extend(p?);
    }
    Ok(out)
}

fn motion_chart(motion: &Motion, n: (usize, usize)) -> Result<ChartGrid> {
    motion.reference_shape().default_chart(n.0, n.1)
}

fn transport_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "transport";
    let tol = cfg.tolerances.transport;
    let motion = cfg.motion;
    let t = cfg.t_probe;
    let label = motion_label(&motion);
    let mut out = SuiteOutput::default();
    let mut prev: Option<[f64; 4]> = None;
    for &n in &cfg.transport_resolutions {
        let surface = MovingSurface::new(motion, motion_chart(&motion, n)?, cfg.dt_probe)?;
        let one = |g: &GeometryState, _t: f64| vec![1.0; g.len()];
        let poly = |g: &GeometryState, t: f64| g.position.iter().map(|p| p.x * p.x + t * p.z).collect::<Vec<_>>();
        let unit = |_x: &Vector3<f64>, _t: f64| 1.0;
        let field = |x: &Vector3<f64>, t: f64| 1.0 + x.x * x.x + t * x.z * x.z;
        let checks = [
            ("surface/unit", check_surface_transport(&one, &surface, t, false)?),
            ("surface/poly", check_surface_transport(&poly, &surface, t, false)?),
            ("volume/unit", check_space_transport(&unit, &surface, t)?),
            ("volume/poly", check_space_transport(&field, &surface, t)?),
        ];
        let mut errs = [0.0; 4];
        for (i, (case, c)) in checks.iter().enumerate() {
            let order = prev.and_then(|p| observed_order(p[i], c.relative));
            out.rows.push(
                ReportRow::new(SUITE, &format!("{label}/{case}"), res(n), c.lhs, c.rhs, c.relative, tol).with_order(order),
            );
            errs[i] = c.relative;
        }
        prev = Some(errs);

        let snap = surface.snapshot(t)?;
        let flux = incompressibility_residual(&snap.velocity, &snap.geometry)?;
        let (area_rate, flux_ref) = match motion {
            Motion::ExpandingSphere { r0, rate } => {
                let r = r0 + rate * t;
                (Some(8.0 * PI * r * rate), 4.0 * PI * r * r * rate)
            }
            _ => (None, surface.rate_of(t, |tau| volume_at(&surface, tau))?),
        };
        out.rows.push(ReportRow::new(SUITE, &format!("{label}/normal_flux"), res(n), flux, flux_ref, relative(flux, flux_ref), tol));
        if let Some(exact) = area_rate {
            let lhs = checks[0].1.lhs;
            out.rows.push(ReportRow::new(SUITE, &format!("{label}/area_rate_exact"), res(n), lhs, exact, relative(lhs, exact), tol));
        }
    }

    // pointwise mean-curvature rate
    let n = cfg.hrate_resolution;
    let surface = MovingSurface::new(motion, motion_chart(&motion, (n, 2 * n))?, cfg.dt_probe)?;
    let (predicted, observed, g) = mean_curvature_rate_check(&surface, t)?;
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for k in g.valid_nodes() {
        err = err.max((predicted[k] - observed[k]).abs());
        scale = scale.max(observed[k].abs());
    }
    let rel = if scale > 0.0 { err / scale } else { err };
    out.rows.push(ReportRow::new(SUITE, &format!("{label}/mean_curvature_rate"), res((n, 2 * n)), err, scale, rel, cfg.tolerances.hrate));

    // C = cos θ on the unit sphere is annihilated by Δ + B_ijB^ij
    let n = cfg.harmonic_resolution;
    let chart = ChartGrid::lat_long(n, 2 * n)?;
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Sphere { radius: 1.0 })?;
    let c = chart.sample(|theta, _| theta.cos());
    let lap = laplace_beltrami(&c, &g)?;
    let err = g.valid_nodes().map(|k| (lap[k] + c[k] * g.curvature_squared(k)).abs()).fold(0.0, f64::max);
    out.rows.push(ReportRow::new(SUITE, "sphere/l1_harmonic", res((n, 2 * n)), err, 0.0, err, cfg.tolerances.harmonic));
    Ok(out)
}

fn radial_period(cfg: &ExperimentConfig) -> f64 {
    let r0 = match cfg.shape {
        ShapeSpec::Sphere { radius } => radius,
        _ => 1.0,
    };
    TAU * (cfg.rho0 * r0 * r0 / (2.0 * cfg.lambda0)).sqrt()
}

fn evolve_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let r0 = match cfg.shape {
        ShapeSpec::Sphere { radius } => radius,
        _ => return Err(Error::Config("evolve needs a sphere".into())),
    };
    let (compressible, wave) = rayon::join(|| compressible_rows(cfg, r0), || wave_rows(cfg));
    let mut out = compressible?;
    out.extend(wave?);
    Ok(out)
}

fn compressible_rows(cfg: &ExperimentConfig, r0: f64) -> Result<SuiteOutput> {
    const SUITE: &str = "evolve";
    const ORACLE_REFINE: usize = 8;
    let tol = &cfg.tolerances;
    let n = cfg.evolve_resolution;
    let chart = ChartGrid::lat_long(n, 2 * n)?;
    let shape = cfg.shape;
    let g = GeometryState::from_shape(&chart, &shape)?;
    let vel = crate::transport::decompose_velocity(&vec![Vector3::zeros(); g.len()], &g)?;
    let material = MaterialFields::uniform(g.len(), cfg.rho0, cfg.lambda0, 0.0);
    let state = DynamicState::new(g, vel, material, 0.0)?;
    let period = radial_period(cfg);
    let dt = cfg.dt.unwrap_or(period / cfg.steps as f64);
    let params = CompressibleParams { dt, steps: cfg.steps, curvature_sign: cfg.curvature_sign, node_motion: cfg.node_motion };
    let run = evolve_compressible(&chart, &state, &params, false)?;
    let oracle = radial_reference(r0, 0.0, cfg.rho0, cfg.lambda0, cfg.curvature_sign, dt / ORACLE_REFINE as f64, cfg.steps * ORACLE_REFINE);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for (i, p) in run.trajectory.iter().enumerate() {
        let r = oracle[i * ORACLE_REFINE];
        err = err.max((p.r_mean - r).abs());
        scale = scale.max(r.abs());
    }
    let last = run.trajectory.last().map(|p| p.r_mean).unwrap_or(f64::NAN);
    let resolution = res((n, 2 * n));
    let mut out = SuiteOutput::default();
    out.rows.push(ReportRow::new(SUITE, "compressible/radius", resolution.clone(), last, oracle[cfg.steps * ORACLE_REFINE], err / scale, tol.evolve));
    let drift = run.mass_drift();
    out.rows.push(ReportRow::new(SUITE, "compressible/mass_drift", resolution.clone(), drift, 0.0, drift, tol.mass));
    if cfg.curvature_sign == CurvatureSign::ConvexPositive {
        let measured = run.measured_period().unwrap_or(f64::NAN);
        let e = if measured.is_nan() { f64::INFINITY } else { relative(measured, period) };
        out.rows.push(ReportRow::new(SUITE, "compressible/period", resolution, measured, period, e, tol.frequency));
    }
    let mut buf = Vec::new();
    run.write_csv(&mut buf)?;
    out.fields.push(("evolve_trajectory.csv".into(), String::from_utf8(buf).expect("ascii csv")));
    Ok(out)
}

fn wave_rows(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "evolve";
    let tol = &cfg.tolerances;
    let l = cfg.wave_length;
    let n = cfg.wave_resolution;
    let chart = ChartGrid::periodic_patch(n, 8, 2.0 * l, 2.0 * l)?;
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Graph { height: crate::shape::GraphHeight::Flat })?;
    let m = cfg.wave_mode as f64;
    let c0: Vec<f64> = (0..g.len()).map(|k| (m * PI * chart.coords(k).0 / l).sin()).collect();
    let zero = vec![0.0; g.len()];
    let omega = cfg.wave_gamma.sqrt() * m * PI / l;
    let period = TAU / omega;
    let per = (period / (0.5 * wave_step_limit(&g, cfg.wave_gamma))).ceil() as usize;
    let params = WaveParams { gamma: cfg.wave_gamma, dt: period / per as f64, steps: cfg.wave_periods * per, sign: cfg.wave_sign };
    let resolution = res((n, 8));
    let mut out = SuiteOutput::default();
    match evolve_wave(&g, &c0, &zero, &params, false) {
        Ok(run) => {
            let w = run.angular_frequency().unwrap_or(f64::NAN);
            let e = if w.is_nan() { f64::INFINITY } else { relative(w, omega) };
            out.rows.push(ReportRow::new(SUITE, "wave/frequency", resolution.clone(), w, omega, e, tol.frequency));
            let drift = run.energy_drift();
            out.rows.push(ReportRow::new(SUITE, "wave/energy_drift", resolution.clone(), drift, 0.0, drift, tol.energy));
            let rev = wave_reversibility(&g, &c0, &zero, &params)?;
            out.rows.push(ReportRow::new(SUITE, "wave/reversibility", resolution.clone(), rev, 0.0, rev, tol.reversibility));
        }
        Err(Error::WaveInstability { step, max_abs }) => {
            out.rows.push(ReportRow::new(SUITE, "wave/frequency", resolution.clone(), step as f64, omega, max_abs, tol.frequency));
        }
        Err(e) => return Err(e),
    }
    // the opposite sign has no bounded modes and must be caught
    let flipped = WaveParams { sign: -cfg.wave_sign, ..params };
    let caught = matches!(evolve_wave(&g, &c0, &zero, &flipped, false), Err(Error::WaveInstability { .. }));
    if cfg.wave_sign == 1.0 {
        out.rows.push(ReportRow::check(SUITE, "wave/opposite_sign_unstable", resolution, flipped.sign, caught));
    }
    Ok(out)
}

fn verify_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "verify";
    let tol = &cfg.tolerances;
    let mut out = SuiteOutput::default();
    let mut row = |case: &str, measured: f64, reference: f64, error: f64, tolerance: f64| {
        out.rows.push(ReportRow::new(SUITE, case, "-", measured, reference, error, tolerance));
    };

    // radial field V = k R / |R|³
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let points: Vec<Vector3<f64>> = (0..64)
        .map(|_| {
            let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            d.normalize() * rng.random_range(0.5..2.0)
        })
        .collect();
    let field = radial_velocity(1.0, &points, 1e-3)?;
    let div = field.divergence.iter().map(|d| d.abs()).fold(0.0, f64::max);
    row("radial/divergence", div, 0.0, div, tol.radial);
    let num = points.iter().map(|p| radial_divergence_numeric(1.0, p, 1e-3).abs()).fold(0.0, f64::max);
    row("radial/divergence_fd", num, 0.0, num, tol.standing_wave);
    let singular = matches!(radial_velocity(1.0, &[Vector3::new(1e-4, 0.0, 0.0)], 1e-3), Err(Error::Singularity { .. }));
    out.rows.push(ReportRow::check(SUITE, "radial/singularity_rejected", "-", 1e-4, singular));

    // standing wave with a localized initial profile
    let spec = WaveSpec { profile: WaveProfile::Gaussian { amplitude: 1.0, center: 0.5, width: 0.08 }, l: 1.0, v0: 1.5, m_max: 64 };
    let wave = StandingWave::new(spec)?;
    let recon = wave.reconstruction_error(1000);
    let mut row = |case: &str, measured: f64, reference: f64, error: f64, tolerance: f64| {
        out.rows.push(ReportRow::new(SUITE, case, "-", measured, reference, error, tolerance));
    };
    row("standing_wave/reconstruction", recon, 0.0, recon, tol.standing_wave);
    let mut pde = 0.0f64;
    for i in 1..20 {
        for j in 0..10 {
            pde = pde.max(wave.residual_fd(i as f64 / 20.0, j as f64 * 0.1, 1e-3).abs());
        }
    }
    row("standing_wave/pde", pde, 0.0, pde, tol.standing_wave);
    let sine = StandingWave::new(WaveSpec { profile: WaveProfile::Sine { mode: 2 }, ..spec })?;
    let c2 = sine.coefficients[1];
    let leak = sine.coefficients.iter().enumerate().filter(|(i, _)| *i != 1).map(|(_, c)| c.abs()).fold(0.0, f64::max);
    row("standing_wave/sine_coefficient", c2, 1.0, (c2 - 1.0).abs().max(leak), tol.standing_wave);

    // fluctuating sphere: the exponential branch solves the ODE for all t,
    // the linear branch only at t = 0
    let sphere = |a: f64, b: f64, wave: Option<StandingWave>| FluctuatingSphereParams {
        r0: Vector3::new(0.4, 0.7, 0.2),
        omega: Vector3::new(0.3, -0.2, 0.5),
        a,
        b,
        theta: 0.7,
        phi: 1.1,
        wave,
    };
    let exp_branch = sphere(0.0, 1.0, None);
    let r = (0..8)
        .map(|i| fluctuating_sphere_residual(&exp_branch, 0.25 * i as f64).map(|v| v.amax()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    row("fluctuating_sphere/exponential", r, 0.0, r, tol.sphere_ode);
    let r = fluctuating_sphere_residual(&sphere(1.0, 0.0, None), 0.0)?.amax();
    row("fluctuating_sphere/linear_t0", r, 0.0, r, tol.sphere_ode);
    // returned velocity against a central difference of the position
    let mixed = sphere(0.4, 0.7, Some(wave.clone()));
    let mut r = 0.0f64;
    for i in 0..8 {
        let t = 0.1 + 0.2 * i as f64;
        let (_, v) = fluctuating_sphere(&mixed, t)?;
        for a in 0..3 {
            let pos = |tau: f64| fluctuating_sphere(&mixed, tau).map(|(x, _)| x[a]).unwrap_or(f64::NAN);
            r = r.max((v[a] - crate::stencil::central_first(pos, t, 2.5e-4)).abs());
        }
    }
    row("fluctuating_sphere/velocity", r, 0.0, r, tol.standing_wave);

    // rotor pair of circularly polarized plane waves
    let x = Vector3::new(0.3, 0.1, 0.2);
    let (a, b) = rotor_pair_residual(&PlaneWaveR { v0: 1.5 }, &PlaneWaveL { v0: 1.5 }, 1.5, &x, 0.7);
    let r = a.amax().max(b.amax());
    row("rotor_pair/analytic", r, 0.0, r, tol.rotor);
    struct Sampled<T>(T);
    impl<T: SpaceTimeField> SpaceTimeField for Sampled<T> {
        fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
            self.0.value(x, t)
        }
    }
    let (a, b) = rotor_pair_residual(&Sampled(PlaneWaveR { v0: 1.5 }), &Sampled(PlaneWaveL { v0: 1.5 }), 1.5, &x, 0.7);
    let r = a.amax().max(b.amax());
    row("rotor_pair/finite_difference", r, 0.0, r, tol.rotor);

    // position field built from standing waves along fixed axes
    let axis = AxisWaves { r0: Vector3::new(0.3, 0.4, 0.5), s: Vector3::new(0.2, 0.5, 0.8), wave: wave.clone(), step: 1e-3 };
    let r = position_wave_residual(&axis, 1.5, &Vector3::new(0.4, 0.45, 0.5), 0.2).amax();
    row("axis_waves/closure", r, 0.0, r, tol.standing_wave);
    let h = 2e-3;
    let sampled = SampledField::sample([7, 9, 9, 9], [0.1, 0.3, 0.3, 0.3], [h / 1.5, h, h, h], &axis);
    let r = sampled.wave_residual(1.5)?;
    row("axis_waves/sampled", r, 0.0, r, tol.standing_wave);
    Ok(out)
}

fn laws_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "laws";
    let tol = &cfg.tolerances;
    let n = cfg.laws_resolution;
    let chart = ChartGrid::lat_long(n, 2 * n)?;
    let resolution = res((n, 2 * n));
    let g = GeometryState::from_shape(&chart, &ShapeSpec::Sphere { radius: 1.0 })?;
    let mut out = SuiteOutput::default();

    let spec = EnsembleSpec {
        members: cfg.members,
        v_min: cfg.v_min,
        rho: cfg.laws_rho,
        q_max: cfg.q_max,
        lambda_max: cfg.lambda_max,
        modes: cfg.modes,
    };
    let mut ensemble = random_ensemble(&spec, &chart, cfg.seed)?;
    for m in &mut ensemble {
        m.reading = cfg.inverse_reading;
    }
    let report = boundedness_certificate(&ensemble, &g)?;
    out.rows.push(ReportRow::new(SUITE, "ensemble/back_substitution", resolution.clone(), report.max_residual, 0.0, report.max_residual, tol.laws));
    out.rows.push(ReportRow::new(
        SUITE,
        "ensemble/boundedness",
        resolution.clone(),
        report.max_curvature,
        report.bound,
        (report.max_curvature - report.bound).max(0.0),
        0.0,
    ));
    let first = solve_curvature_law(&ensemble[0], &g)?;
    let mut buf = Vec::new();
    write_solution_csv(&first, &chart, &mut buf)?;
    out.fields.push(("laws_member0.csv".into(), String::from_utf8(buf).expect("ascii csv")));

    // static Kelvin closure on spheres of increasing radius
    let fields = StaticFields { lambda: cfg.lambda_static, force_divergence: 0.0, v_m: cfg.v_m, kt: cfg.kt, h_fus: cfg.h_fus };
    let mut table = String::from("R,ln_pv_ps,reference\n");
    let mean_at = |radius: f64| -> Result<(Vec<f64>, f64)> {
        let g = GeometryState::from_shape(&chart, &ShapeSpec::Sphere { radius })?;
        let c = static_closure(LawKind::Kelvin, &fields, &g, CurvatureSign::ConvexPositive)?;
        let valid: Vec<f64> = g.valid_nodes().map(|k| c[k]).collect();
        let mean = valid.iter().sum::<f64>() / valid.len() as f64;
        Ok((valid, mean))
    };
    for &r in &cfg.static_radii {
        let (_, mean) = mean_at(r)?;
        let exact = 2.0 * cfg.lambda_static * cfg.v_m / (cfg.kt * r);
        table.push_str(&format!("{},{},{}\n", crate::report::fmt_f64(r), crate::report::fmt_f64(mean), crate::report::fmt_f64(exact)));
        out.rows.push(ReportRow::new(SUITE, &format!("kelvin/R={r:e}"), resolution.clone(), mean, exact, relative(mean, exact), tol.geometry));
    }
    if let Some(&r) = cfg.static_radii.first() {
        let (small, _) = mean_at(r)?;
        let (large, _) = mean_at(2.0 * r)?;
        let err = small.iter().zip(&large).map(|(a, b)| relative(2.0 * b, *a)).fold(0.0, f64::max);
        out.rows.push(ReportRow::new(SUITE, "kelvin/halving", resolution.clone(), small[0] / large[0], 2.0, err, 0.0));
    }
    out.fields.push(("kelvin_static.csv".into(), table));

    if let Some(path) = &cfg.environment {
        let file = std::fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let env = EnvironmentFields::read_table(std::io::BufReader::new(file), cfg.t0, cfg.v_m, cfg.h_fus, cfg.kt)?;
        let len = g.len();
        let input = LawInput {
            source: LawSource::Kelvin(env),
            force_divergence: vec![0.0; len],
            lambda: vec![cfg.lambda_static; len],
            rho: vec![cfg.laws_rho; len],
            velocity: vec![Vector2::new(cfg.v_min, cfg.v_min); len],
            v_min: cfg.v_min,
            reading: cfg.inverse_reading,
        };
        let sol = solve_curvature_law(&input, &g)?;
        out.rows.push(ReportRow::new(SUITE, "environment/back_substitution", resolution, sol.residual, 0.0, sol.residual, tol.laws));
        let mut buf = Vec::new();
        write_solution_csv(&sol, &chart, &mut buf)?;
        out.fields.push(("laws_environment.csv".into(), String::from_utf8(buf).expect("ascii csv")));
    }
    Ok(out)
}

fn flow_grid(case: &FlowCase, n: usize) -> Result<BoxGrid> {
    match case {
        FlowCase::Shear { .. } => BoxGrid::periodic_cube(n, TAU),
        _ => BoxGrid::open_cube(n, 1.0),
    }
}

fn ns_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    const SUITE: &str = "ns";
    let tol = &cfg.tolerances;
    let (mu, xi) = (cfg.mu, cfg.xi);
    let mut out = SuiteOutput::default();

    for case in &cfg.flows {
        let label = flow_label(case);
        let rho = match *case {
            FlowCase::RigidRotation { rho, .. } | FlowCase::Vortex { rho, .. } => rho,
            _ => 1.0,
        };
        // the vortex balances inertia with pressure alone, so it is run inviscid
        let (mu, xi) = if matches!(case, FlowCase::Vortex { .. }) { (0.0, 0.0) } else { (mu, xi) };
        let mut prev: Option<f64> = None;
        for &n in &cfg.ns_resolutions {
            let grid = flow_grid(case, n)?;
            let h = grid.spacing();
            let (err, scale) = residual_error(case, &grid, rho, mu, xi)?;
            let order = prev.and_then(|p| observed_order(p, err));
            let resolution = format!("{n}x{n}x{n}");
            let tolerance = if matches!(case, FlowCase::Rest { .. }) { 0.0 } else { h * h };
            out.rows.push(ReportRow::new(SUITE, &format!("{label}/residual"), resolution.clone(), err, scale, err, tolerance).with_order(order));
            if prev.is_some() && matches!(case, FlowCase::Shear { .. } | FlowCase::Vortex { .. }) {
                out.rows.push(order_row(SUITE, &format!("{label}/residual/order"), resolution.clone(), order, tol.min_order));
            }
            prev = Some(err);

            let flow = case.flow(&grid, rho, mu, xi);
            let sigma = viscous_stress(&flow)?;
            let asym = sigma.iter().map(|s| (s - s.transpose()).amax()).fold(0.0, f64::max);
            out.rows.push(ReportRow::new(SUITE, &format!("{label}/stress_symmetry"), resolution.clone(), asym, 0.0, asym, 0.0));
            let div = grid.divergence(&flow.velocity);
            let trace = sigma.iter().zip(&div).map(|(s, d)| (s.trace() - 3.0 * xi * d).abs()).fold(0.0, f64::max);
            out.rows.push(ReportRow::new(SUITE, &format!("{label}/stress_trace"), resolution, trace, 0.0, trace, tol.rigid));
        }
        if let FlowCase::Shear { amplitude, .. } = *case {
            // the analytic route against the hand-evaluated −μΔV
            let grid = flow_grid(case, cfg.ns_resolutions[0])?;
            let err = (0..grid.len())
                .map(|k| {
                    let x = grid.point(k);
                    let r = analytic_ns_residual(case, rho, mu, xi, &x, 0.0);
                    (r - Vector3::new(mu * amplitude * x.y.sin(), 0.0, 0.0)).amax()
                })
                .fold(0.0, f64::max);
            out.rows.push(ReportRow::new(SUITE, "shear/analytic", "-", err, 0.0, err, tol.shear));
        }
        if let FlowCase::Dilation { alpha, .. } = *case {
            let grid = flow_grid(case, cfg.ns_resolutions[0])?;
            let sigma = viscous_stress(&case.flow(&grid, rho, mu, xi))?;
            let expect = Matrix3::identity() * (3.0 * xi * alpha);
            let err = sigma.iter().map(|s| (s - expect).amax()).fold(0.0, f64::max);
            out.rows.push(ReportRow::new(SUITE, "dilation/stress", "-", sigma[0][(0, 0)], expect[(0, 0)], err, tol.rigid));
        }
    }

    // random rigid motions carry no viscous stress
    let n0 = cfg.ns_resolutions[0];
    let grid = BoxGrid::open_cube(n0, 1.0)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    for _ in 0..cfg.rigid_samples {
        let mut draw = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let case = FlowCase::RigidMotion { a: draw(), omega: draw(), p0: 0.0 };
        let sigma = viscous_stress(&case.flow(&grid, 1.0, mu, xi))?;
        worst = sigma.iter().map(|s| s.amax()).fold(worst, f64::max);
    }
    out.rows.push(ReportRow::new(SUITE, "rigid_motion/stress", format!("{n0}x{n0}x{n0}"), worst, 0.0, worst, tol.rigid));

    // a constant shift leaves the stress untouched; dyadic data keeps the shift exact
    let dyadic = BoxGrid::new([17; 3], [0.125; 3], [-1.0; 3], [false; 3])?;
    let base = FlowCase::RigidMotion { a: [0.0; 3], omega: [0.5, -0.25, 0.75], p0: 0.0 }.flow(&dyadic, 1.0, mu, xi);
    let mut shifted = base.clone();
    for v in &mut shifted.velocity {
        *v += Vector3::new(0.25, -1.5, 3.0);
    }
    let (s0, s1) = (viscous_stress(&base)?, viscous_stress(&shifted)?);
    let diff = s0.iter().zip(&s1).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    let same = s0.iter().zip(&s1).all(|(a, b)| a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    out.rows.push(ReportRow::check(SUITE, "galilean_shift/bitwise", "17x17x17", diff, same));

    // flux bookkeeping on the inviscid vortex
    let vortex = FlowCase::Vortex { omega: 1.0, width: 0.5, rho: 1.0 };
    let mut prev: Option<f64> = None;
    for &n in &cfg.ns_resolutions {
        let grid = BoxGrid::open_cube(n, 1.0)?;
        let h = grid.spacing();
        let resolution = format!("{n}x{n}x{n}");
        let mut flow = vortex.flow(&grid, 1.0, 0.0, 0.0);
        flow.pressure = vec![0.0; grid.len()];
        let m: Vec<Matrix3<f64>> = flow.velocity.iter().map(|v| v * v.transpose()).collect();
        let div_m = grid.tensor_divergence(&m);
        let err = (0..grid.len())
            .map(|k| {
                let x = grid.point(k);
                (div_m[k] - vortex.jacobian(&x, 0.0) * vortex.velocity(&x, 0.0)).amax()
            })
            .fold(0.0, f64::max);
        let order = prev.and_then(|p| observed_order(p, err));
        out.rows.push(ReportRow::new(SUITE, "momentum_flux/advection", resolution.clone(), err, 0.0, err, h * h).with_order(order));
        if prev.is_some() {
            out.rows.push(order_row(SUITE, "momentum_flux/advection/order", resolution.clone(), order, tol.min_order));
        }
        prev = Some(err);
        let e = energy_flux_divergence(&vec![1.5; grid.len()], &flow)?;
        let e = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
        out.rows.push(ReportRow::new(SUITE, "energy_flux/divergence_free", resolution.clone(), e, 0.0, e, h * h));
        let c = continuity_residual(&flow, &flow.rho, &flow.rho, 1.0)?;
        let c = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
        out.rows.push(ReportRow::new(SUITE, "continuity/divergence_free", resolution, c, 0.0, c, h * h));
    }
    Ok(out)
}

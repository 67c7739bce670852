//! Residuals of the surface dynamics system and time integration of its
//! compressible and near-planar wave reductions.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::chart::ChartGrid;
use crate::error::{check_len, Error, Result};
use crate::filter::PolarFilter;
use crate::geometry::{
    divergence, integrate_enclosed_volume, integrate_surface, laplace_beltrami, surface_covariant_derivative,
    CovariantGradient, CurvatureSign, GeometryState, TensorField,
};
use crate::report::fmt_f64;
use crate::transport::{
    covariant_time_derivative, decompose_velocity, time_christoffel, MovingSurface, SurfaceVelocity, TemporalSamples,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialFields {
    /// Surface mass density.
    pub rho: Vec<f64>,
    /// Surface energy density.
    pub lambda: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Ambient force components.
    pub force: Vec<Vector3<f64>>,
}

impl MaterialFields {
    pub fn uniform(n: usize, rho: f64, lambda: f64, pressure: f64) -> Self {
        MaterialFields { rho: vec![rho; n], lambda: vec![lambda; n], pressure: vec![pressure; n], force: vec![Vector3::zeros(); n] }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_len(&self.rho, n)?;
        check_len(&self.lambda, n)?;
        check_len(&self.pressure, n)?;
        check_len(&self.force, n)?;
        if let Some(k) = self.rho.iter().position(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("surface density must be positive, node {k} has {}", self.rho[k])));
        }
        let finite = self.lambda.iter().chain(&self.pressure).all(|x| x.is_finite())
            && self.force.iter().all(|f| f.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidParameter("material fields must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DynamicState {
    pub geometry: GeometryState,
    pub velocity: SurfaceVelocity,
    pub material: MaterialFields,
    pub t: f64,
}

impl DynamicState {
    pub fn new(geometry: GeometryState, velocity: SurfaceVelocity, material: MaterialFields, t: f64) -> Result<Self> {
        check_len(&velocity.normal_speed, geometry.len())?;
        material.validate(geometry.len())?;
        Ok(DynamicState { geometry, velocity, material, t })
    }

    /// State of a prescribed motion at `t` with material fields given as a
    /// function of geometry and time.
    pub fn from_motion(
        surface: &MovingSurface,
        t: f64,
        material: &dyn Fn(&GeometryState, f64) -> MaterialFields,
    ) -> Result<Self> {
        let snap = surface.snapshot(t)?;
        let m = material(&snap.geometry, t);
        DynamicState::new(snap.geometry, snap.velocity, m, t)
    }
}

/// Time derivatives entering the dynamics residuals.
#[derive(Debug, Clone)]
pub struct DynamicRates {
    /// `∇̇ρ`
    pub rho: Vec<f64>,
    /// `∇̇C`
    pub normal_speed: Vec<f64>,
    /// `∇̇V^i`
    pub tangent: Vec<Vector2<f64>>,
    /// `∂_t P`
    pub pressure: Vec<f64>,
    /// `∂_t F^α`
    pub force: Vec<Vector3<f64>>,
}

impl DynamicRates {
    /// Rates at the middle state from its neighbours `dt` before and after.
    pub fn from_samples(prev: &DynamicState, state: &DynamicState, next: &DynamicState, dt: f64) -> Result<Self> {
        let g = &state.geometry;
        let n = g.len();
        for s in [prev, next] {
            check_len(&s.material.rho, n)?;
        }
        let vel = &state.velocity;
        let gdot = time_christoffel(vel, g)?;
        let scalar = |f: fn(&DynamicState) -> Vec<f64>| -> Result<Vec<f64>> {
            let samples =
                TemporalSamples { prev: Some(TensorField::Scalar(f(prev))), next: Some(TensorField::Scalar(f(next))), dt };
            match covariant_time_derivative(&TensorField::Scalar(f(state)), &samples, vel, &gdot, g)? {
                TensorField::Scalar(v) => Ok(v),
                _ => unreachable!("scalar input"),
            }
        };
        let rho = scalar(|s| s.material.rho.clone())?;
        let normal_speed = scalar(|s| s.velocity.normal_speed.clone())?;
        let tangent_field = |s: &DynamicState| TensorField::Vector(s.velocity.tangent.clone());
        let samples = TemporalSamples { prev: Some(tangent_field(prev)), next: Some(tangent_field(next)), dt };
        let tangent = match covariant_time_derivative(&tangent_field(state), &samples, vel, &gdot, g)? {
            TensorField::Vector(v) => v,
            _ => unreachable!("vector input"),
        };
        let inv = 0.5 / dt;
        let pressure = (0..n).map(|k| (next.material.pressure[k] - prev.material.pressure[k]) * inv).collect();
        let force = (0..n).map(|k| (next.material.force[k] - prev.material.force[k]) * inv).collect();
        Ok(DynamicRates { rho, normal_speed, tangent, pressure, force })
    }

    /// Rates of a prescribed motion by probing `t ± dt_probe`.
    pub fn from_motion(
        surface: &MovingSurface,
        t: f64,
        material: &dyn Fn(&GeometryState, f64) -> MaterialFields,
    ) -> Result<(DynamicState, Self)> {
        let d = surface.dt_probe;
        let prev = DynamicState::from_motion(surface, t - d, material)?;
        let state = DynamicState::from_motion(surface, t, material)?;
        let next = DynamicState::from_motion(surface, t + d, material)?;
        let rates = DynamicRates::from_samples(&prev, &state, &next, d)?;
        Ok((state, rates))
    }
}

fn masked(g: &GeometryState, f: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..g.len()).map(|k| if g.degenerate[k] { 0.0 } else { f(k) }).collect()
}

/// `∇̇ρ + ∇_i(ρV^i) − ρ C B_i^i`.
pub fn mass_conservation_residual(state: &DynamicState, rates: &DynamicRates) -> Result<Vec<f64>> {
    let g = &state.geometry;
    check_len(&rates.rho, g.len())?;
    let rho = &state.material.rho;
    let vel = &state.velocity;
    let flux: Vec<Vector2<f64>> = (0..g.len()).map(|k| vel.tangent[k] * rho[k]).collect();
    let div = divergence(&flux, g)?;
    Ok(masked(g, |k| rates.rho[k] + div[k] - rho[k] * vel.normal_speed[k] * g.mean[k]))
}

/// Ambient divergence of a field `W` known only on the surface.
///
/// With `W = W_N N + W^i S_i` and no normal variation of the data,
/// `∂_α W^α = ∇_i W^i − W_N B_i^i` (outward curvature).
pub fn restricted_divergence(field: &[Vector3<f64>], g: &GeometryState) -> Result<Vec<f64>> {
    check_len(field, g.len())?;
    let vel = decompose_velocity(field, g)?;
    let tangent: Vec<Vector2<f64>> =
        vel.tangent.iter().map(|t| if t.iter().all(|x| x.is_finite()) { *t } else { Vector2::zeros() }).collect();
    let div = divergence(&tangent, g)?;
    Ok(masked(g, |k| div[k] - vel.normal_speed[k] * g.mean[k]))
}

/// `ρ(∇̇C + 2V^i∇_iC + V^aV^bB_ab) − P + Λ B_i^i`, the flux density of
/// the normal equation.
pub fn normal_flux_density(state: &DynamicState, rates: &DynamicRates, sign: CurvatureSign) -> Result<Vec<f64>> {
    let g = &state.geometry;
    check_len(&rates.normal_speed, g.len())?;
    let vel = &state.velocity;
    let m = &state.material;
    let grad_c = g.gradient(&vel.normal_speed);
    Ok(masked(g, |k| {
        let v = vel.tangent[k];
        let inertia = rates.normal_speed[k] + 2.0 * v.dot(&grad_c[k]) + v.dot(&(g.curvature[k] * v));
        m.rho[k] * inertia - m.pressure[k] + m.lambda[k] * sign.factor() * g.mean[k]
    }))
}

/// `∂_α[V^α Φ] − ∂_t P − ∂_α ∂_t F^α` with both ambient divergences
/// restricted to the surface.
pub fn normal_momentum_residual(state: &DynamicState, rates: &DynamicRates, sign: CurvatureSign) -> Result<Vec<f64>> {
    let g = &state.geometry;
    let phi = normal_flux_density(state, rates, sign)?;
    let carried: Vec<Vector3<f64>> = (0..g.len()).map(|k| state.velocity.ambient[k] * phi[k]).collect();
    let div = restricted_divergence(&carried, g)?;
    let div_f = restricted_divergence(&rates.force, g)?;
    Ok(masked(g, |k| div[k] - rates.pressure[k] - div_f[k]))
}

/// `ρ(∇̇V^i + V^k∇_kV^i − C∇^iC − CV^kB_k^i) + ∇^iΛ`.
pub fn tangent_momentum_residual(state: &DynamicState, rates: &DynamicRates) -> Result<Vec<Vector2<f64>>> {
    let g = &state.geometry;
    check_len(&rates.tangent, g.len())?;
    let vel = &state.velocity;
    let m = &state.material;
    let grad_v = match surface_covariant_derivative(&TensorField::Vector(vel.tangent.clone()), g)? {
        CovariantGradient::Rank1(d) => d,
        _ => unreachable!("vector input"),
    };
    let grad_c = g.gradient(&vel.normal_speed);
    let grad_l = g.gradient(&m.lambda);
    Ok((0..g.len())
        .map(|k| {
            if g.degenerate[k] {
                return Vector2::zeros();
            }
            let v = vel.tangent[k];
            let c = vel.normal_speed[k];
            let advect = grad_v[k].transpose() * v;
            let up_c = g.raise(k, &grad_c[k]);
            let bend = g.mixed_curvature(k).transpose() * v * c;
            (rates.tangent[k] + advect - up_c * c - bend) * m.rho[k] + g.raise(k, &grad_l[k])
        })
        .collect())
}

/// Normal and tangential residuals for constant `P`, `Λ`, `F`:
/// `ρ(∇̇C + 2V^i∇_iC + V^aV^bB_ab) + ΛB_i^i` and the force-free
/// tangential balance.
pub fn thin_film_residuals(
    state: &DynamicState,
    rates: &DynamicRates,
    sign: CurvatureSign,
) -> Result<(Vec<f64>, Vec<Vector2<f64>>)> {
    let g = &state.geometry;
    let m = &state.material;
    let phi = normal_flux_density(state, rates, sign)?;
    let normal = masked(g, |k| phi[k] + m.pressure[k]);
    let tangent = tangent_momentum_residual(state, rates)?;
    Ok((normal, tangent))
}

/// Parameters of the compressible reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressibleParams {
    pub dt: f64,
    pub steps: usize,
    pub curvature_sign: CurvatureSign,
    pub node_motion: NodeMotion,
}

/// How chart nodes follow the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NodeMotion {
    /// `∂_t R = C N`.
    #[default]
    Normal,
    /// Nodes slide along their initial normals `D` with `∂_t R = C D / (N·D)`.
    /// The normal speed is still `C`; only the parametrisation differs.
    /// Needed when the surface passes through a focal point, where the
    /// tilt of the current normal feeds a drift growing like `C / r`.
    FixedRays,
}

/// One row of a compressible trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    /// Mean of `R·N` over unmasked nodes.
    pub r_mean: f64,
    pub rho_mean: f64,
    /// Largest `|C|`.
    pub c_max: f64,
    pub h_mean: f64,
    pub area: f64,
    pub volume: f64,
    pub mass: f64,
}

/// Node-wise state of the compressible system.
#[derive(Debug, Clone)]
pub struct CompressibleState {
    pub position: Vec<Vector3<f64>>,
    pub normal_speed: Vec<f64>,
    /// `ρ √S`, constant in time when `V^i = 0`.
    pub areal_mass: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone)]
pub struct CompressibleRun {
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_state: CompressibleState,
    /// Every step, when requested.
    pub states: Vec<CompressibleState>,
}

impl CompressibleRun {
    /// Period from successive crossings of `R_mean` through its mid-range.
    pub fn measured_period(&self) -> Option<f64> {
        let traj = &self.trajectory;
        let hi = traj.iter().map(|p| p.r_mean).fold(f64::MIN, f64::max);
        let lo = traj.iter().map(|p| p.r_mean).fold(f64::MAX, f64::min);
        let avg = 0.5 * (hi + lo);
        let mut crossings = Vec::new();
        for w in traj.windows(2) {
            let (a, b) = (w[0].r_mean - avg, w[1].r_mean - avg);
            if a == 0.0 || a.signum() != b.signum() && b != 0.0 {
                crossings.push(w[0].t + (w[1].t - w[0].t) * a / (a - b));
            }
        }
        if crossings.len() < 2 {
            return None;
        }
        let span = crossings[crossings.len() - 1] - crossings[0];
        Some(2.0 * span / (crossings.len() - 1) as f64)
    }

    pub fn mass_drift(&self) -> f64 {
        let m0 = self.trajectory[0].mass;
        self.trajectory.iter().map(|p| ((p.mass - m0) / m0).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "t,R_mean,C_max,H_mean,area,volume,mass")?;
        for p in &self.trajectory {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                fmt_f64(p.t),
                fmt_f64(p.r_mean),
                fmt_f64(p.c_max),
                fmt_f64(p.h_mean),
                fmt_f64(p.area),
                fmt_f64(p.volume),
                fmt_f64(p.mass)
            )?;
        }
        Ok(())
    }
}

/// Grid spacing in length units: smallest chart step times the mean
/// stretch `√(area / chart area)`.
pub fn effective_spacing(g: &GeometryState) -> Result<f64> {
    let area = integrate_surface(&vec![1.0; g.len()], g)?;
    let chart_area: f64 = g.chart.weights().iter().sum();
    Ok(g.chart.min_spacing() * (area / chart_area).sqrt())
}

fn observe(chart: &ChartGrid, s: &CompressibleState) -> Result<(TrajectoryPoint, GeometryState)> {
    let g = GeometryState::from_positions(chart, s.position.clone())?;
    let valid: Vec<usize> = g.valid_nodes().collect();
    let count = valid.len() as f64;
    let r_mean = valid.iter().map(|&k| g.position[k].dot(&g.normal[k])).sum::<f64>() / count;
    let h_mean = valid.iter().map(|&k| g.mean[k]).sum::<f64>() / count;
    let rho: Vec<f64> = masked(&g, |k| s.areal_mass[k] / g.sqrt_det[k]);
    let rho_mean = valid.iter().map(|&k| rho[k]).sum::<f64>() / count;
    let c_max = valid.iter().map(|&k| s.normal_speed[k].abs()).fold(0.0, f64::max);
    let area = integrate_surface(&vec![1.0; g.len()], &g)?;
    let volume = if chart.is_closed() { integrate_enclosed_volume(&g)? } else { f64::NAN };
    let mass = integrate_surface(&rho, &g)?;
    Ok((TrajectoryPoint { t: s.t, r_mean, rho_mean, c_max, h_mean, area, volume, mass }, g))
}

struct StageRate {
    position: Vec<Vector3<f64>>,
    normal_speed: Vec<f64>,
}

struct StageInputs<'a> {
    filter: Option<&'a PolarFilter>,
    rays: Option<&'a [Vector3<f64>]>,
    areal_mass: &'a [f64],
    lambda: &'a [f64],
    s: f64,
}

fn stage_rate(g: &GeometryState, c: &[f64], inputs: &StageInputs<'_>) -> StageRate {
    let StageInputs { filter, rays, areal_mass, lambda, s } = *inputs;
    let mut dr = Vec::with_capacity(g.len());
    let mut dc = Vec::with_capacity(g.len());
    for k in 0..g.len() {
        if g.degenerate[k] {
            // held fixed
            dr.push(Vector3::zeros());
            dc.push(0.0);
            continue;
        }
        match rays {
            Some(d) => dr.push(d[k] * (c[k] / g.normal[k].dot(&d[k]))),
            None => dr.push(g.normal[k] * c[k]),
        }
        // ρ ∂_t C = −s Λ B_i^i with ρ = m / √S
        dc.push(-s * lambda[k] * g.mean[k] * g.sqrt_det[k] / areal_mass[k]);
    }
    if let Some(f) = filter {
        f.apply_vectors(&mut dr);
        f.apply(&mut dc);
    }
    StageRate { position: dr, normal_speed: dc }
}

/// RK4 integration of `∂_tρ = ρCB_i^i`, `ρ∂_tC = −ΛB_i^i`, `∂_tR = CN`
/// with `V^i = 0`.
///
/// Stage rates on colatitude charts pass through [`PolarFilter`].
///
/// The density is carried as the areal mass `ρ√S`, whose rate vanishes
/// identically for normal motion, so the state stays regular when the
/// surface passes through a focal point.
pub fn evolve_compressible(
    chart: &ChartGrid,
    initial: &DynamicState,
    params: &CompressibleParams,
    keep_states: bool,
) -> Result<CompressibleRun> {
    let g0 = &initial.geometry;
    let n = g0.len();
    initial.material.validate(n)?;
    if !(params.dt > 0.0) || !params.dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", params.dt)));
    }
    let lambda = &initial.material.lambda;
    let lam0 = lambda.iter().copied().fold(f64::NAN, f64::max);
    let lam1 = lambda.iter().copied().fold(f64::NAN, f64::min);
    if (lam0 - lam1).abs() > 1e-12 * lam0.abs().max(1.0) {
        return Err(Error::InvalidParameter("surface energy density must be homogeneous".into()));
    }
    let vt = initial.velocity.tangent.iter().enumerate().filter(|(k, _)| !g0.degenerate[*k]);
    let tangent_max = vt.map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let c_scale = initial.velocity.normal_speed.iter().map(|c| c.abs()).fold(0.0, f64::max).max(1.0);
    if tangent_max > 1e-10 * c_scale {
        return Err(Error::InvalidParameter("tangential velocity must vanish initially".into()));
    }
    let h = effective_spacing(g0)?;
    let filter = PolarFilter::for_chart(chart);
    let rays = match params.node_motion {
        NodeMotion::Normal => None,
        NodeMotion::FixedRays => Some(g0.normal.clone()),
    };
    let s = params.curvature_sign.factor();
    let mut state = CompressibleState {
        position: g0.position.clone(),
        normal_speed: masked(g0, |k| initial.velocity.normal_speed[k]),
        areal_mass: (0..n).map(|k| initial.material.rho[k] * g0.sqrt_det[k]).collect(),
        t: initial.t,
    };
    let mut trajectory = Vec::with_capacity(params.steps + 1);
    let mut states = Vec::new();
    let dt = params.dt;
    for step in 0..=params.steps {
        let (point, g) = observe(chart, &state)?;
        trajectory.push(point);
        if keep_states {
            states.push(state.clone());
        }
        if step == params.steps {
            break;
        }
        let c_max = point.c_max;
        if dt * c_max > 0.25 * h {
            return Err(Error::StepInstability(format!(
                "step {step}: dt = {dt} exceeds 0.25 h / max|C| = {}",
                0.25 * h / c_max
            )));
        }
        let inputs = StageInputs {
            filter: filter.as_ref(),
            rays: rays.as_deref(),
            areal_mass: &state.areal_mass,
            lambda,
            s,
        };
        let rate = |pos: &[Vector3<f64>], c: &[f64]| -> Result<StageRate> {
            Ok(stage_rate(&GeometryState::from_positions(chart, pos.to_vec())?, c, &inputs))
        };
        let axpy = |a: &[Vector3<f64>], b: &[Vector3<f64>], w: f64| -> Vec<Vector3<f64>> {
            a.iter().zip(b).map(|(x, y)| x + y * w).collect()
        };
        let axpy1 = |a: &[f64], b: &[f64], w: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y * w).collect() };
        let k1 = stage_rate(&g, &state.normal_speed, &inputs);
        let k2 = rate(
            &axpy(&state.position, &k1.position, 0.5 * dt),
            &axpy1(&state.normal_speed, &k1.normal_speed, 0.5 * dt),
        )?;
        let k3 = rate(
            &axpy(&state.position, &k2.position, 0.5 * dt),
            &axpy1(&state.normal_speed, &k2.normal_speed, 0.5 * dt),
        )?;
        let k4 = rate(&axpy(&state.position, &k3.position, dt), &axpy1(&state.normal_speed, &k3.normal_speed, dt))?;
        for k in 0..n {
            state.position[k] +=
                (k1.position[k] + k2.position[k] * 2.0 + k3.position[k] * 2.0 + k4.position[k]) * (dt / 6.0);
            state.normal_speed[k] += (k1.normal_speed[k]
                + 2.0 * k2.normal_speed[k]
                + 2.0 * k3.normal_speed[k]
                + k4.normal_speed[k])
                * (dt / 6.0);
        }
        state.t = initial.t + (step + 1) as f64 * dt;
    }
    Ok(CompressibleRun { trajectory, final_state: state, states })
}

/// Independent radial oscillator for a spherically symmetric run:
/// `ṙ = c`, `ρ ċ = 2 s Λ / r` with `ρ = ρ0 r0² / r²`.
pub fn radial_reference(r0: f64, c0: f64, rho0: f64, lambda: f64, sign: CurvatureSign, dt: f64, steps: usize) -> Vec<f64> {
    let s = sign.factor();
    let f = |r: f64, c: f64| (c, 2.0 * s * lambda * r / (rho0 * r0 * r0));
    let (mut r, mut c) = (r0, c0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(r);
    for _ in 0..steps {
        let (a1, b1) = f(r, c);
        let (a2, b2) = f(r + 0.5 * dt * a1, c + 0.5 * dt * b1);
        let (a3, b3) = f(r + 0.5 * dt * a2, c + 0.5 * dt * b2);
        let (a4, b4) = f(r + dt * a3, c + dt * b3);
        r += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        c += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
        out.push(r);
    }
    out
}

/// Parameters of the near-planar wave reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    /// `Λ0 / ρ0`.
    pub gamma: f64,
    pub dt: f64,
    pub steps: usize,
    /// Sign in front of the spatial operator; `+1` gives waves.
    pub sign: f64,
}

const WAVE_BLOWUP: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct WaveRun {
    pub times: Vec<f64>,
    /// Energy at each interior step (centred velocity).
    pub energy: Vec<f64>,
    /// Projection of `C` onto the initial profile.
    pub projection: Vec<f64>,
    pub prev: Vec<f64>,
    pub last: Vec<f64>,
}

impl WaveRun {
    /// Angular frequency from zero crossings of the modal projection.
    pub fn angular_frequency(&self) -> Option<f64> {
        let mut crossings = Vec::new();
        for (w, t) in self.projection.windows(2).zip(self.times.windows(2)) {
            let (a, b) = (w[0], w[1]);
            if a != 0.0 && a.signum() != b.signum() {
                crossings.push(t[0] + (t[1] - t[0]) * a / (a - b));
            }
        }
        if crossings.len() < 2 {
            return None;
        }
        let half = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        Some(std::f64::consts::PI / half)
    }

    pub fn energy_drift(&self) -> f64 {
        let e0 = self.energy[0];
        self.energy.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max)
    }
}

fn wave_operator(c: &[f64], g: &GeometryState, p: &WaveParams) -> Result<Vec<f64>> {
    let lap = laplace_beltrami(c, g)?;
    // B_ij B^ij = H² − 2K
    Ok(masked(g, |k| p.sign * p.gamma * (lap[k] + g.curvature_squared(k) * c[k])))
}

fn wave_energy(c: &[f64], cdot: &[f64], g: &GeometryState, gamma: f64) -> Result<f64> {
    let grad = g.gradient(c);
    let density = masked(g, |k| {
        let gg = grad[k].dot(&g.raise(k, &grad[k]));
        cdot[k] * cdot[k] + gamma * (gg - g.curvature_squared(k) * c[k] * c[k])
    });
    integrate_surface(&density, g)
}

/// Largest stable leapfrog step for the fourth-order Laplacian.
pub fn wave_step_limit(g: &GeometryState, gamma: f64) -> f64 {
    let (hu, hv) = (g.chart.u.h, g.chart.v.h);
    let mut worst: f64 = 0.0;
    for k in g.valid_nodes() {
        let inv = g.inv_metric[k];
        // (16/3) per axis bounds the symbol of the centred second difference
        let lam = 16.0 / 3.0 * (inv[(0, 0)] / (hu * hu) + inv[(1, 1)] / (hv * hv));
        worst = worst.max(lam);
    }
    2.0 / (gamma.abs() * worst).sqrt()
}

/// Leapfrog integration of `∂²_t C = σ γ (ΔC + C B_ijB^ij)` on a static
/// surface. `start` is either `(C0, Ċ0)` or, with `from_pair`, two
/// consecutive levels `(C_{-1}, C_0)`.
pub fn evolve_wave(
    g: &GeometryState,
    first: &[f64],
    second: &[f64],
    params: &WaveParams,
    from_pair: bool,
) -> Result<WaveRun> {
    check_len(first, g.len())?;
    check_len(second, g.len())?;
    if !(params.gamma > 0.0) {
        return Err(Error::InvalidParameter("gamma must be positive".into()));
    }
    if params.sign.abs() != 1.0 {
        return Err(Error::InvalidParameter("wave sign must be +1 or -1".into()));
    }
    let dt = params.dt;
    let limit = wave_step_limit(g, params.gamma);
    if !(dt > 0.0) || dt > limit {
        return Err(Error::StepInstability(format!("dt = {dt} outside (0, {limit}]")));
    }
    let (mut prev, mut cur) = if from_pair {
        (first.to_vec(), second.to_vec())
    } else {
        // C_1 from a Taylor start, then relabel so that (prev, cur) = (C_0, C_1)
        let a = wave_operator(first, g, params)?;
        let c1: Vec<f64> = (0..g.len()).map(|k| first[k] + dt * second[k] + 0.5 * dt * dt * a[k]).collect();
        (first.to_vec(), c1)
    };
    let profile = prev.clone();
    let w: Vec<f64> = {
        let weights = g.chart.weights();
        (0..g.len()).map(|k| if g.degenerate[k] { 0.0 } else { weights[k] * g.sqrt_det[k] }).collect()
    };
    let norm2: f64 = (0..g.len()).map(|k| w[k] * profile[k] * profile[k]).sum();
    let project = |c: &[f64]| -> f64 {
        if norm2 > 0.0 {
            (0..c.len()).map(|k| w[k] * c[k] * profile[k]).sum::<f64>() / norm2
        } else {
            0.0
        }
    };
    let scale0 = prev.iter().chain(&cur).map(|x| x.abs()).fold(0.0, f64::max);
    let mut times = vec![0.0];
    let mut projection = vec![project(&prev)];
    let mut energy = Vec::with_capacity(params.steps);
    let mut step = 1;
    while step <= params.steps {
        times.push(step as f64 * dt);
        projection.push(project(&cur));
        let a = wave_operator(&cur, g, params)?;
        let next: Vec<f64> = (0..g.len()).map(|k| 2.0 * cur[k] - prev[k] + dt * dt * a[k]).collect();
        let cdot: Vec<f64> = (0..g.len()).map(|k| (next[k] - prev[k]) / (2.0 * dt)).collect();
        energy.push(wave_energy(&cur, &cdot, g, params.gamma)?);
        let max_abs = next.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if !max_abs.is_finite() || (scale0 > 0.0 && max_abs > WAVE_BLOWUP * scale0) {
            return Err(Error::WaveInstability { step, max_abs });
        }
        prev = cur;
        cur = next;
        step += 1;
    }
    Ok(WaveRun { times, energy, projection, prev, last: cur })
}

/// Runs `steps` leapfrog steps forward, swaps the last two levels, runs
/// the same number back and returns the largest deviation from `C0`
/// relative to `max|C0|`.
pub fn wave_reversibility(g: &GeometryState, c0: &[f64], cdot0: &[f64], params: &WaveParams) -> Result<f64> {
    let fwd = evolve_wave(g, c0, cdot0, params, false)?;
    let back = evolve_wave(g, &fwd.last, &fwd.prev, params, true)?;
    let scale = c0.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // after `steps` backward steps the pair is (C_1, C_0)
    Ok((0..c0.len()).filter(|&k| !g.degenerate[k]).map(|k| (back.last[k] - c0[k]).abs() / scale).fold(0.0, f64::max))
}

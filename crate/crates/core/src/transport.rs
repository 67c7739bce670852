//! Time-dependent operators on moving surfaces and the transport theorems.

use nalgebra::{Matrix2, Rotation3, Unit, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::chart::ChartGrid;
use crate::error::{check_len, Error, Result};
use crate::geometry::{
    integrate_enclosed_volume, integrate_surface, laplace_beltrami, surface_covariant_derivative, CovariantGradient,
    GeometryState, TensorField,
};
use crate::quadrature::{gauss_legendre, integrate_gl};
use crate::shape::{direction, GraphHeight, RadialHarmonic, ShapeSpec};

/// Surface velocity split into normal and tangential parts.
#[derive(Debug, Clone)]
pub struct SurfaceVelocity {
    /// `V^α`
    pub ambient: Vec<Vector3<f64>>,
    /// `C = N·V`
    pub normal_speed: Vec<f64>,
    /// `V^i`
    pub tangent: Vec<Vector2<f64>>,
    /// `V_i`
    pub tangent_lower: Vec<Vector2<f64>>,
}

impl SurfaceVelocity {
    pub fn len(&self) -> usize {
        self.ambient.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ambient.is_empty()
    }

    /// Largest `|C N + V^i S_i − V| / |V|` over non-degenerate nodes.
    pub fn reconstruction_residual(&self, g: &GeometryState) -> f64 {
        let scale = self.ambient.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        (0..self.len())
            .filter(|&k| !g.degenerate[k])
            .map(|k| {
                let s = &g.basis[k];
                let rebuilt = g.normal[k] * self.normal_speed[k] + s[0] * self.tangent[k][0] + s[1] * self.tangent[k][1];
                (rebuilt - self.ambient[k]).norm() / scale
            })
            .fold(0.0, f64::max)
    }
}

/// `C = N·V`, `V^i = S^ij (S_j·V)`.
pub fn decompose_velocity(ambient: &[Vector3<f64>], g: &GeometryState) -> Result<SurfaceVelocity> {
    check_len(ambient, g.len())?;
    let mut c = Vec::with_capacity(ambient.len());
    let mut up = Vec::with_capacity(ambient.len());
    let mut down = Vec::with_capacity(ambient.len());
    for (k, v) in ambient.iter().enumerate() {
        if g.degenerate[k] {
            c.push(f64::NAN);
            up.push(Vector2::from_element(f64::NAN));
            down.push(Vector2::from_element(f64::NAN));
            continue;
        }
        let s = &g.basis[k];
        let lower = Vector2::new(s[0].dot(v), s[1].dot(v));
        c.push(g.normal[k].dot(v));
        up.push(g.inv_metric[k] * lower);
        down.push(lower);
    }
    Ok(SurfaceVelocity { ambient: ambient.to_vec(), normal_speed: c, tangent: up, tangent_lower: down })
}

/// `Γ̇^b_a = ∇_a V^b − C B_a^b`, stored with row `a`, column `b`.
#[derive(Debug, Clone)]
pub struct TimeChristoffel {
    pub rate: Vec<Matrix2<f64>>,
}

fn velocity_gradient(vel: &SurfaceVelocity, g: &GeometryState) -> Result<Vec<Matrix2<f64>>> {
    match surface_covariant_derivative(&TensorField::Vector(vel.tangent.clone()), g)? {
        CovariantGradient::Rank1(d) => Ok(d),
        _ => unreachable!("rank-1 input"),
    }
}

pub fn time_christoffel(vel: &SurfaceVelocity, g: &GeometryState) -> Result<TimeChristoffel> {
    let grad = velocity_gradient(vel, g)?;
    Ok(TimeChristoffel {
        rate: (0..g.len()).map(|k| grad[k] - g.mixed_curvature(k) * vel.normal_speed[k]).collect(),
    })
}

/// A field sampled one probe step before and after the current time.
#[derive(Debug, Clone)]
pub struct TemporalSamples {
    pub prev: Option<TensorField>,
    pub next: Option<TensorField>,
    pub dt: f64,
}

fn time_partial(s: &TemporalSamples) -> Result<TensorField> {
    let prev = s.prev.as_ref().ok_or(Error::MissingTemporalSamples("no sample before t"))?;
    let next = s.next.as_ref().ok_or(Error::MissingTemporalSamples("no sample after t"))?;
    if !(s.dt > 0.0) {
        return Err(Error::InvalidParameter("probe step must be positive".into()));
    }
    let inv = 0.5 / s.dt;
    Ok(match (prev, next) {
        (TensorField::Scalar(a), TensorField::Scalar(b)) => {
            TensorField::Scalar(a.iter().zip(b).map(|(x, y)| (y - x) * inv).collect())
        }
        (TensorField::Vector(a), TensorField::Vector(b)) => {
            TensorField::Vector(a.iter().zip(b).map(|(x, y)| (y - x) * inv).collect())
        }
        (TensorField::Covector(a), TensorField::Covector(b)) => {
            TensorField::Covector(a.iter().zip(b).map(|(x, y)| (y - x) * inv).collect())
        }
        (TensorField::Lower(a), TensorField::Lower(b)) => {
            TensorField::Lower(a.iter().zip(b).map(|(x, y)| (y - x) * inv).collect())
        }
        (TensorField::Mixed(a), TensorField::Mixed(b)) => {
            TensorField::Mixed(a.iter().zip(b).map(|(x, y)| (y - x) * inv).collect())
        }
        _ => return Err(Error::InvalidParameter("temporal samples have different tensor kinds".into())),
    })
}

/// `∇̇T = ∂_t T − V^k ∇_k T + Γ̇` terms, one per index.
pub fn covariant_time_derivative(
    current: &TensorField,
    samples: &TemporalSamples,
    vel: &SurfaceVelocity,
    gdot: &TimeChristoffel,
    g: &GeometryState,
) -> Result<TensorField> {
    let dt = time_partial(samples)?;
    if dt.len() != g.len() || current.len() != g.len() {
        return Err(Error::LengthMismatch { expected: g.len(), got: dt.len().min(current.len()) });
    }
    let grad = surface_covariant_derivative(current, g)?;
    let v = &vel.tangent;
    let r = &gdot.rate;
    Ok(match (current, dt, grad) {
        (TensorField::Scalar(_), TensorField::Scalar(ft), CovariantGradient::Scalar(d)) => {
            TensorField::Scalar((0..g.len()).map(|k| ft[k] - v[k].dot(&d[k])).collect())
        }
        (TensorField::Vector(t), TensorField::Vector(ft), CovariantGradient::Rank1(d)) => TensorField::Vector(
            (0..g.len())
                .map(|k| {
                    // (V^k ∇_k T)^b = Σ_k V^k d[(k, b)];  Γ̇^b_k T^k = Σ_k r[(k, b)] T^k
                    ft[k] - d[k].transpose() * v[k] + r[k].transpose() * t[k]
                })
                .collect(),
        ),
        (TensorField::Covector(t), TensorField::Covector(ft), CovariantGradient::Rank1(d)) => TensorField::Covector(
            (0..g.len()).map(|k| ft[k] - d[k].transpose() * v[k] - r[k] * t[k]).collect(),
        ),
        (TensorField::Lower(t), TensorField::Lower(ft), CovariantGradient::Rank2(d)) => TensorField::Lower(
            (0..g.len())
                .map(|k| {
                    let adv = d[k][0] * v[k][0] + d[k][1] * v[k][1];
                    // Γ̇^m_a T_mb + Γ̇^m_b T_am
                    ft[k] - adv - r[k] * t[k] - t[k] * r[k].transpose()
                })
                .collect(),
        ),
        (TensorField::Mixed(t), TensorField::Mixed(ft), CovariantGradient::Rank2(d)) => TensorField::Mixed(
            (0..g.len())
                .map(|k| {
                    let adv = d[k][0] * v[k][0] + d[k][1] * v[k][1];
                    // + Γ̇^b_m T_a^m − Γ̇^m_a T_m^b
                    ft[k] - adv + t[k] * r[k] - r[k] * t[k]
                })
                .collect(),
        ),
        _ => return Err(Error::InvalidParameter("temporal samples do not match the current field".into())),
    })
}

/// `∂_t S_ij = ∇_i V_j + ∇_j V_i − 2 C B_ij`.
pub fn metric_rate(vel: &SurfaceVelocity, g: &GeometryState) -> Result<Vec<Matrix2<f64>>> {
    let grad = velocity_gradient(vel, g)?;
    Ok((0..g.len())
        .map(|k| {
            let lowered = grad[k] * g.metric[k];
            lowered + lowered.transpose() - g.curvature[k] * (2.0 * vel.normal_speed[k])
        })
        .collect())
}

/// `∂_t √S = √S (∇_i V^i − C B_i^i)`.
pub fn area_element_rate(vel: &SurfaceVelocity, g: &GeometryState) -> Result<Vec<f64>> {
    let grad = velocity_gradient(vel, g)?;
    Ok((0..g.len())
        .map(|k| g.sqrt_det[k] * (grad[k].trace() - vel.normal_speed[k] * g.mean[k]))
        .collect())
}

/// `∇̇B_i^i = ∇_i∇^i C + C B_ij B^ij`.
pub fn mean_curvature_rate(vel: &SurfaceVelocity, g: &GeometryState) -> Result<Vec<f64>> {
    let lap = laplace_beltrami(&vel.normal_speed, g)?;
    Ok((0..g.len()).map(|k| lap[k] + vel.normal_speed[k] * g.curvature_squared(k)).collect())
}

/// Catalogue of prescribed surface motions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    Static(ShapeSpec),
    /// Sphere of radius `r0 + rate·t`.
    ExpandingSphere { r0: f64, rate: f64 },
    /// Semi-axes scaled by `s = 1 + amplitude·sin(ωt)`; with `isochoric` the
    /// z axis scales by `1/s²` so the volume is constant.
    OscillatingEllipsoid { a: f64, b: f64, c: f64, amplitude: f64, omega: f64, isochoric: bool },
    /// Rigid rotation of a shape about an axis through the origin.
    RigidRotation { shape: ShapeSpec, axis: [f64; 3], omega: f64 },
    /// Static shape whose material points slide along the chart.
    TangentialSlide { shape: ShapeSpec, rate_u: f64, rate_v: f64 },
    /// `r(n, t) = radius · (1 + amplitude · sin(ωt) · Y(n))`.
    BreathingRadial { radius: f64, amplitude: f64, omega: f64, harmonic: RadialHarmonic },
    /// Graph patch `z = height(x − cx·t, y − cy·t)` sampled at fixed `(x, y)`.
    TravellingGraph { height: GraphHeight, cx: f64, cy: f64 },
}

impl Motion {
    /// Shape at `t = 0`, which fixes the chart topology.
    pub fn reference_shape(&self) -> ShapeSpec {
        match *self {
            Motion::Static(s) => s,
            Motion::ExpandingSphere { r0, .. } => ShapeSpec::Sphere { radius: r0 },
            Motion::OscillatingEllipsoid { a, b, c, .. } => ShapeSpec::Ellipsoid { a, b, c },
            Motion::RigidRotation { shape, .. } | Motion::TangentialSlide { shape, .. } => shape,
            Motion::BreathingRadial { radius, harmonic, .. } => {
                ShapeSpec::RadialGraph { radius, amplitude: 0.0, harmonic }
            }
            Motion::TravellingGraph { height, .. } => ShapeSpec::Graph { height },
        }
    }

    /// Characteristic time of the motion.
    pub fn time_scale(&self) -> f64 {
        match *self {
            Motion::OscillatingEllipsoid { omega, .. }
            | Motion::RigidRotation { omega, .. }
            | Motion::BreathingRadial { omega, .. }
                if omega != 0.0 =>
            {
                1.0 / omega.abs()
            }
            _ => 1.0,
        }
    }

    pub fn point(&self, u: f64, v: f64, t: f64) -> Vector3<f64> {
        match *self {
            Motion::Static(s) => s.point(u, v),
            Motion::ExpandingSphere { r0, rate } => direction(u, v) * (r0 + rate * t),
            Motion::OscillatingEllipsoid { a, b, c, amplitude, omega, isochoric } => {
                let s = 1.0 + amplitude * (omega * t).sin();
                let cz = if isochoric { c / (s * s) } else { c * s };
                ShapeSpec::Ellipsoid { a: a * s, b: b * s, c: cz }.point(u, v)
            }
            Motion::RigidRotation { shape, axis, omega } => {
                let axis = Unit::new_normalize(Vector3::from(axis));
                Rotation3::from_axis_angle(&axis, omega * t) * shape.point(u, v)
            }
            Motion::TangentialSlide { shape, rate_u, rate_v } => shape.point(u + rate_u * t, v + rate_v * t),
            Motion::BreathingRadial { radius, amplitude, omega, harmonic } => {
                let d = direction(u, v);
                d * (radius * (1.0 + amplitude * (omega * t).sin() * harmonic.eval(&d)))
            }
            Motion::TravellingGraph { height, cx, cy } => Vector3::new(u, v, height.eval(u - cx * t, v - cy * t)),
        }
    }
}

/// A prescribed motion sampled on a chart, with the probe step used for
/// temporal derivatives.
#[derive(Debug, Clone)]
pub struct MovingSurface {
    pub motion: Motion,
    pub chart: ChartGrid,
    pub dt_probe: f64,
}

/// Geometry and velocity at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub geometry: GeometryState,
    pub velocity: SurfaceVelocity,
}

impl MovingSurface {
    pub fn new(motion: Motion, chart: ChartGrid, dt_probe: f64) -> Result<Self> {
        if !(dt_probe > 0.0) || !dt_probe.is_finite() {
            return Err(Error::InvalidParameter(format!("dt_probe must be positive, got {dt_probe}")));
        }
        let shape = motion.reference_shape();
        shape.check_topology(&chart)?;
        Ok(MovingSurface { motion, chart, dt_probe })
    }

    /// Probe step of `1e-4` motion time scales.
    pub fn with_default_probe(motion: Motion, chart: ChartGrid) -> Result<Self> {
        let dt = 1e-4 * motion.time_scale();
        MovingSurface::new(motion, chart, dt)
    }

    pub fn positions(&self, t: f64) -> Vec<Vector3<f64>> {
        self.chart.sample(|u, v| self.motion.point(u, v, t))
    }

    pub fn geometry(&self, t: f64) -> Result<GeometryState> {
        GeometryState::from_positions(&self.chart, self.positions(t))
    }

    /// `∂_t R` at fixed chart coordinates by a centred difference.
    pub fn ambient_velocity(&self, t: f64) -> Vec<Vector3<f64>> {
        let dt = self.dt_probe;
        let inv = 0.5 / dt;
        self.chart.sample(|u, v| (self.motion.point(u, v, t + dt) - self.motion.point(u, v, t - dt)) * inv)
    }

    pub fn snapshot(&self, t: f64) -> Result<Snapshot> {
        let geometry = self.geometry(t)?;
        let velocity = decompose_velocity(&self.ambient_velocity(t), &geometry)?;
        Ok(Snapshot { t, geometry, velocity })
    }

    /// Four-point centred derivative of a time series `q(t)`.
    pub fn rate_of(&self, t: f64, mut q: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
        let d = self.dt_probe;
        let (m2, m1, p1, p2) = (q(t - 2.0 * d)?, q(t - d)?, q(t + d)?, q(t + 2.0 * d)?);
        Ok((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * d))
    }
}

/// Outcome of a transport-theorem check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportCheck {
    /// Rate of the integral, by differencing the integral itself.
    pub lhs: f64,
    /// Integral of the pointwise rates, including any contour term.
    pub rhs: f64,
    pub contour: f64,
    pub residual: f64,
    /// `|residual|` over the magnitude of the contributing terms.
    pub relative: f64,
}

impl TransportCheck {
    fn new(lhs: f64, rhs: f64, contour: f64, scale: f64) -> Self {
        let residual = lhs - rhs;
        let scale = scale.max(lhs.abs()).max(rhs.abs());
        let relative = if scale > 0.0 { residual.abs() / scale } else { residual.abs() };
        TransportCheck { lhs, rhs, contour, residual, relative }
    }
}

/// A scalar surface field as a function of the current geometry and time.
pub type SurfaceScalar<'a> = dyn Fn(&GeometryState, f64) -> Vec<f64> + 'a;

/// `∮ v f dγ` over the edges of an open chart, `v = n_i V^i`.
///
/// On an edge of constant `u` the outward conormal flux reduces to
/// `± f V^u √S dv`, and likewise on constant-`v` edges.
pub fn contour_flux(f: &[f64], vel: &SurfaceVelocity, g: &GeometryState) -> f64 {
    use crate::chart::AxisKind;
    let c = &g.chart;
    let mut total = 0.0;
    if c.u.kind == AxisKind::Open {
        let wv = c.v.weights();
        for (i, sign) in [(0usize, -1.0), (c.u.n - 1, 1.0)] {
            for (j, w) in wv.iter().enumerate() {
                let k = c.index(i, j);
                total += sign * w * f[k] * vel.tangent[k][0] * g.sqrt_det[k];
            }
        }
    }
    if c.v.kind == AxisKind::Open {
        let wu = c.u.weights();
        for (j, sign) in [(0usize, -1.0), (c.v.n - 1, 1.0)] {
            for (i, w) in wu.iter().enumerate() {
                let k = c.index(i, j);
                total += sign * w * f[k] * vel.tangent[k][1] * g.sqrt_det[k];
            }
        }
    }
    total
}

/// `d/dt ∫ f dS` against `∫ (∇̇f − f C B_i^i) dS (+ ∮ v f dγ)`.
pub fn check_surface_transport(
    f: &SurfaceScalar<'_>,
    surface: &MovingSurface,
    t: f64,
    include_contour: bool,
) -> Result<TransportCheck> {
    let closed = surface.chart.is_closed();
    if include_contour && closed {
        return Err(Error::ContourOnClosedSurface);
    }
    let lhs = surface.rate_of(t, |tau| {
        let g = surface.geometry(tau)?;
        integrate_surface(&f(&g, tau), &g)
    })?;
    let snap = surface.snapshot(t)?;
    let g = &snap.geometry;
    let vel = &snap.velocity;
    let d = surface.dt_probe;
    let f_prev = f(&surface.geometry(t - d)?, t - d);
    let f_next = f(&surface.geometry(t + d)?, t + d);
    let f_now = f(g, t);
    let grad = g.gradient(&f_now);
    let n = g.len();
    let mut integrand = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    for k in 0..n {
        if g.degenerate[k] {
            continue;
        }
        let ft = (f_next[k] - f_prev[k]) / (2.0 * d);
        let dot = ft - vel.tangent[k].dot(&grad[k]);
        let sink = f_now[k] * vel.normal_speed[k] * g.mean[k];
        integrand[k] = dot - sink;
        magnitude[k] = dot.abs() + sink.abs();
    }
    let contour = if include_contour { contour_flux(&f_now, vel, g) } else { 0.0 };
    let rhs = integrate_surface(&integrand, g)? + contour;
    let scale = integrate_surface(&magnitude, g)? + contour.abs();
    Ok(TransportCheck::new(lhs, rhs, contour, scale))
}

/// An ambient scalar field `F(x, t)`.
pub type AmbientScalar<'a> = dyn Fn(&Vector3<f64>, f64) -> f64 + 'a;

const VOLUME_RULE_POINTS: usize = 16;

/// `∫_Ω F dΩ` as `∮ G·N dS` with `G = (∫_0^x F(s, y, z) ds, 0, 0)`.
pub fn integrate_volume(field: &dyn Fn(&Vector3<f64>) -> f64, g: &GeometryState) -> Result<f64> {
    if !g.chart.is_closed() {
        return Err(Error::OpenSurface);
    }
    let rule = gauss_legendre(VOLUME_RULE_POINTS);
    let flux: Vec<f64> = (0..g.len())
        .map(|k| {
            if g.degenerate[k] {
                return 0.0;
            }
            let p = g.position[k];
            let gx = integrate_gl(&rule, 0.0, p.x, |s| field(&Vector3::new(s, p.y, p.z)));
            gx * g.normal[k].x
        })
        .collect();
    integrate_surface(&flux, g)
}

/// `d/dt ∫_Ω F dΩ` against `∫_Ω ∂_t F dΩ + ∫_S F C dS`.
pub fn check_space_transport(field: &AmbientScalar<'_>, surface: &MovingSurface, t: f64) -> Result<TransportCheck> {
    if !surface.chart.is_closed() {
        return Err(Error::OpenSurface);
    }
    let lhs = surface.rate_of(t, |tau| {
        let g = surface.geometry(tau)?;
        integrate_volume(&|x| field(x, tau), &g)
    })?;
    let snap = surface.snapshot(t)?;
    let g = &snap.geometry;
    let d = surface.dt_probe;
    let interior = integrate_volume(&|x| (field(x, t + d) - field(x, t - d)) / (2.0 * d), g)?;
    let flux: Vec<f64> = (0..g.len())
        .map(|k| if g.degenerate[k] { 0.0 } else { field(&g.position[k], t) * snap.velocity.normal_speed[k] })
        .collect();
    let boundary = integrate_surface(&flux, g)?;
    let abs_flux: Vec<f64> = flux.iter().map(|x| x.abs()).collect();
    let scale = interior.abs() + integrate_surface(&abs_flux, g)?;
    Ok(TransportCheck::new(lhs, interior + boundary, 0.0, scale))
}

/// `∫ C dS`, the rate of enclosed volume.
pub fn incompressibility_residual(vel: &SurfaceVelocity, g: &GeometryState) -> Result<f64> {
    if !g.chart.is_closed() {
        return Err(Error::OpenSurface);
    }
    let c: Vec<f64> = vel.normal_speed.iter().enumerate().map(|(k, c)| if g.degenerate[k] { 0.0 } else { *c }).collect();
    integrate_surface(&c, g)
}

/// Pointwise comparison of the predicted mean-curvature rate with the
/// observed rate `∂_t B_i^i − V^i ∇_i B_i^i` along the motion.
pub fn mean_curvature_rate_check(surface: &MovingSurface, t: f64) -> Result<(Vec<f64>, Vec<f64>, GeometryState)> {
    let snap = surface.snapshot(t)?;
    let g = snap.geometry;
    let predicted = mean_curvature_rate(&snap.velocity, &g)?;
    let d = surface.dt_probe;
    let hp = surface.geometry(t + d)?.mean;
    let hm = surface.geometry(t - d)?.mean;
    let grad = g.gradient(&g.mean);
    let observed = (0..g.len())
        .map(|k| (hp[k] - hm[k]) / (2.0 * d) - snap.velocity.tangent[k].dot(&grad[k]))
        .collect();
    Ok((predicted, observed, g))
}

/// Enclosed volume of the surface at time `t`.
pub fn volume_at(surface: &MovingSurface, t: f64) -> Result<f64> {
    integrate_enclosed_volume(&surface.geometry(t)?)
}

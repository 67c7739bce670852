//! Analytic solution families of the compressible reduction and their
//! substitution checks.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::stencil::{central_first, central_second};

/// Radial field `V = k R / |R|³` and its analytic divergence at each point.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub velocity: Vec<Vector3<f64>>,
    pub divergence: Vec<f64>,
}

pub fn radial_velocity(k: f64, points: &[Vector3<f64>], r_min: f64) -> Result<RadialField> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::InvalidParameter(format!("coupling constant must be nonzero and finite, got {k}")));
    }
    let mut velocity = Vec::with_capacity(points.len());
    let mut divergence = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let r = p.norm();
        if !(r > r_min) {
            return Err(Error::Singularity { index, r_min });
        }
        let r3 = r * r * r;
        velocity.push(p * (k / r3));
        // ∂_α(R^α / r³) = 3/r³ − 3 R·R / r⁵
        divergence.push(k * (3.0 / r3 - 3.0 * p.norm_squared() / (r3 * r * r)));
    }
    Ok(RadialField { velocity, divergence })
}

/// Divergence of `k R / |R|³` at `p` by fourth-order central differences.
pub fn radial_divergence_numeric(k: f64, p: &Vector3<f64>, h: f64) -> f64 {
    (0..3)
        .map(|a| {
            central_first(
                |s| {
                    let mut q = *p;
                    q[a] = s;
                    k * q[a] / q.norm().powi(3)
                },
                p[a],
                h,
            )
        })
        .sum()
}

/// Initial profile of the standing wave on `[0, l]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WaveProfile {
    /// `sin(m π ξ / l)`.
    Sine { mode: u32 },
    /// `amplitude · exp(−(ξ − center)² / (2 width²))`.
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `4 ξ (l − ξ) / l²`.
    Parabola,
}

impl WaveProfile {
    pub fn eval(&self, xi: f64, l: f64) -> f64 {
        match *self {
            WaveProfile::Sine { mode } => (mode as f64 * PI * xi / l).sin(),
            WaveProfile::Gaussian { amplitude, center, width } => {
                amplitude * (-(xi - center).powi(2) / (2.0 * width * width)).exp()
            }
            WaveProfile::Parabola => 4.0 * xi * (l - xi) / (l * l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub profile: WaveProfile,
    pub l: f64,
    pub v0: f64,
    pub m_max: usize,
}

impl WaveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) || !self.l.is_finite() {
            return Err(Error::InvalidParameter(format!("domain length must be positive, got {}", self.l)));
        }
        if !(self.v0 > 0.0) || !self.v0.is_finite() {
            return Err(Error::InvalidParameter(format!("wave speed must be positive, got {}", self.v0)));
        }
        if self.m_max < 1 {
            return Err(Error::InvalidParameter("mode cutoff must be at least 1".into()));
        }
        if let WaveProfile::Gaussian { width, .. } = self.profile {
            if !(width > 0.0) {
                return Err(Error::InvalidParameter(format!("profile width must be positive, got {width}")));
            }
        }
        Ok(())
    }
}

/// Truncated sine series `Σ c_m sin(mπξ/l) cos(v0 mπ t/l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandingWave {
    pub spec: WaveSpec,
    /// `c_1 … c_{m_max}`.
    pub coefficients: Vec<f64>,
    /// `Σ |c_m|` over `m_max < m ≤ 2 m_max`, a bound on the dropped modes.
    pub tail: f64,
}

const COEFFICIENT_TOLERANCE: f64 = 1e-7;

impl StandingWave {
    /// Coefficients `(2/l) ∫_0^l ψ(ξ, 0) sin(mπξ/l) dξ` by composite Simpson
    /// with `4 m_max` panels, checked against a doubled panel count.
    pub fn new(spec: WaveSpec) -> Result<Self> {
        spec.validate()?;
        let l = spec.l;
        let coefficient = |m: usize, panels: usize| {
            2.0 / l * simpson(0.0, l, panels, |xi| spec.profile.eval(xi, l) * (m as f64 * PI * xi / l).sin())
        };
        let scale = simpson(0.0, l, 8 * spec.m_max, |xi| spec.profile.eval(xi, l).abs()) / l;
        let panels = 4 * spec.m_max;
        let mut coefficients = Vec::with_capacity(spec.m_max);
        for m in 1..=spec.m_max {
            let c = coefficient(m, panels);
            let check = coefficient(m, 2 * panels);
            if (c - check).abs() > COEFFICIENT_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::QuadratureNotConverged(format!(
                    "mode {m}: {c} with {panels} panels, {check} with {}",
                    2 * panels
                )));
            }
            coefficients.push(c);
        }
        // tail modes use the finer rule so that they are resolved
        let tail = (spec.m_max + 1..=2 * spec.m_max).map(|m| coefficient(m, 2 * panels).abs()).sum();
        Ok(StandingWave { spec, coefficients, tail })
    }

    fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.coefficients.iter().enumerate().map(|(i, c)| ((i + 1) as f64 * PI / self.spec.l, *c))
    }

    pub fn eval(&self, xi: f64, t: f64) -> f64 {
        let v0 = self.spec.v0;
        self.modes().map(|(k, c)| c * (k * xi).sin() * (v0 * k * t).cos()).sum()
    }

    pub fn dt(&self, xi: f64, t: f64) -> f64 {
        let v0 = self.spec.v0;
        self.modes().map(|(k, c)| -c * v0 * k * (k * xi).sin() * (v0 * k * t).sin()).sum()
    }

    pub fn dtt(&self, xi: f64, t: f64) -> f64 {
        let v0 = self.spec.v0;
        self.modes().map(|(k, c)| -c * (v0 * k).powi(2) * (k * xi).sin() * (v0 * k * t).cos()).sum()
    }

    pub fn dxx(&self, xi: f64, t: f64) -> f64 {
        let v0 = self.spec.v0;
        self.modes().map(|(k, c)| -c * k * k * (k * xi).sin() * (v0 * k * t).cos()).sum()
    }

    /// `∂²_t ψ − v0² ∂²_ξ ψ` by fourth-order finite differences with step
    /// `h` in `ξ` and `h / v0` in `t`.
    pub fn residual_fd(&self, xi: f64, t: f64, h: f64) -> f64 {
        let v0 = self.spec.v0;
        let tt = central_second(|s| self.eval(xi, s), t, h / v0);
        let xx = central_second(|s| self.eval(s, t), xi, h);
        tt - v0 * v0 * xx
    }

    /// Largest `|ψ(ξ, 0) − profile(ξ)|` over `samples + 1` equispaced points.
    pub fn reconstruction_error(&self, samples: usize) -> f64 {
        let l = self.spec.l;
        (0..=samples)
            .map(|i| {
                let xi = l * i as f64 / samples as f64;
                (self.eval(xi, 0.0) - self.spec.profile.eval(xi, l)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Parameters of `R = A(R0 + ω_α R_0α S^α t) + B R_0α e^{ω_α S^α t} + ψ_α S^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuatingSphereParams {
    pub r0: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub a: f64,
    pub b: f64,
    /// Angles fixing `S = (sin φ sin θ, sin φ cos θ, cos θ)`, frozen in time.
    pub theta: f64,
    pub phi: f64,
    pub wave: Option<StandingWave>,
}

impl FluctuatingSphereParams {
    pub fn validate(&self) -> Result<()> {
        let finite = self.r0.iter().chain(self.omega.iter()).all(|x| x.is_finite())
            && [self.a, self.b, self.theta, self.phi].iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("fluctuating sphere parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn unit(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let sp = self.phi.sin();
        Vector3::new(sp * st, sp * ct, ct)
    }
}

/// Position and velocity of the fluctuating-sphere solution.
///
/// The wave part evaluates `ψ` at `ξ = R_0α` for component `α`.
pub fn fluctuating_sphere(p: &FluctuatingSphereParams, t: f64) -> Result<(Vector3<f64>, Vector3<f64>)> {
    p.validate()?;
    let s = p.unit();
    let mut r = Vector3::zeros();
    let mut v = Vector3::zeros();
    for a in 0..3 {
        let rate = p.omega[a] * s[a];
        let e = (rate * t).exp();
        r[a] = p.a * (p.r0[a] + rate * p.r0[a] * t) + p.b * p.r0[a] * e;
        v[a] = p.a * rate * p.r0[a] + p.b * p.r0[a] * rate * e;
        if let Some(w) = &p.wave {
            r[a] += w.eval(p.r0[a], t) * s[a];
            v[a] += w.dt(p.r0[a], t) * s[a];
        }
    }
    Ok((r, v))
}

/// `∂_t R − ω_α R_α S^α` (componentwise) along the solution.
pub fn fluctuating_sphere_residual(p: &FluctuatingSphereParams, t: f64) -> Result<Vector3<f64>> {
    let (r, v) = fluctuating_sphere(p, t)?;
    let s = p.unit();
    Ok(v - p.omega.component_mul(&s).component_mul(&r))
}

/// A vector field over space and time with derivatives, by default from
/// fourth-order central differences with step `fd_step`.
pub trait SpaceTimeField {
    fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;

    fn fd_step(&self) -> f64 {
        1e-3
    }

    fn dt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let h = self.fd_step();
        (self.value(x, t - 2.0 * h) - self.value(x, t - h) * 8.0 + self.value(x, t + h) * 8.0
            - self.value(x, t + 2.0 * h))
            / (12.0 * h)
    }

    fn dtt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let h = self.fd_step();
        (self.value(x, t - 2.0 * h) * -1.0 + self.value(x, t - h) * 16.0 - self.value(x, t) * 30.0
            + self.value(x, t + h) * 16.0
            - self.value(x, t + 2.0 * h))
            / (12.0 * h * h)
    }

    /// `J[(a, b)] = ∂_b V_a`.
    fn jacobian(&self, x: &Vector3<f64>, t: f64) -> Matrix3<f64> {
        let h = self.fd_step();
        let mut j = Matrix3::zeros();
        for b in 0..3 {
            let at = |s: f64| {
                let mut q = *x;
                q[b] += s;
                self.value(&q, t)
            };
            let d = (at(-2.0 * h) - at(-h) * 8.0 + at(h) * 8.0 - at(2.0 * h)) / (12.0 * h);
            j.set_column(b, &d);
        }
        j
    }

    fn laplacian(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        let h = self.fd_step();
        let mut out = Vector3::zeros();
        for b in 0..3 {
            let at = |s: f64| {
                let mut q = *x;
                q[b] += s;
                self.value(&q, t)
            };
            out += (at(-2.0 * h) * -1.0 + at(-h) * 16.0 - at(0.0) * 30.0 + at(h) * 16.0 - at(2.0 * h)) / (12.0 * h * h);
        }
        out
    }
}

pub fn curl(j: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(j[(2, 1)] - j[(1, 2)], j[(0, 2)] - j[(2, 0)], j[(1, 0)] - j[(0, 1)])
}

/// `(1/v0²) ∂²_t R − ∇²R`.
pub fn position_wave_residual(r: &dyn SpaceTimeField, v0: f64, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
    r.dtt(x, t) / (v0 * v0) - r.laplacian(x, t)
}

/// `(∂_t R + ∇×L, (1/v0²) ∂_t L − ∇×R)`.
pub fn rotor_pair_residual(
    r: &dyn SpaceTimeField,
    l: &dyn SpaceTimeField,
    v0: f64,
    x: &Vector3<f64>,
    t: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let first = r.dt(x, t) + curl(&l.jacobian(x, t));
    let second = l.dt(x, t) / (v0 * v0) - curl(&r.jacobian(x, t));
    (first, second)
}

/// `R = (0, 0, sin(x − v0 t))` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWaveR {
    pub v0: f64,
}

/// `L = (0, v0 sin(x − v0 t), 0)` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWaveL {
    pub v0: f64,
}

impl SpaceTimeField for PlaneWaveR {
    fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, (x.x - self.v0 * t).sin())
    }
    fn dt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.v0 * (x.x - self.v0 * t).cos())
    }
    fn dtt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.v0 * self.v0 * (x.x - self.v0 * t).sin())
    }
    fn jacobian(&self, x: &Vector3<f64>, t: f64) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        j[(2, 0)] = (x.x - self.v0 * t).cos();
        j
    }
    fn laplacian(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -(x.x - self.v0 * t).sin())
    }
}

impl SpaceTimeField for PlaneWaveL {
    fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, self.v0 * (x.x - self.v0 * t).sin(), 0.0)
    }
    fn dt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::new(0.0, -self.v0 * self.v0 * (x.x - self.v0 * t).cos(), 0.0)
    }
    fn jacobian(&self, x: &Vector3<f64>, t: f64) -> Matrix3<f64> {
        let mut j = Matrix3::zeros();
        j[(1, 0)] = self.v0 * (x.x - self.v0 * t).cos();
        j
    }
}

/// `R_α = R_0α + ψ(x_α, t) S^α`, a superposition of one-dimensional
/// standing waves along each axis.
#[derive(Debug, Clone)]
pub struct AxisWaves {
    pub r0: Vector3<f64>,
    pub s: Vector3<f64>,
    pub wave: StandingWave,
    pub step: f64,
}

impl SpaceTimeField for AxisWaves {
    fn value(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64> {
        Vector3::from_fn(|a, _| self.r0[a] + self.wave.eval(x[a], t) * self.s[a])
    }
    fn fd_step(&self) -> f64 {
        self.step
    }
}

/// Samples of a vector field on a uniform `(t, x, y, z)` lattice, stored
/// with `z` fastest.
#[derive(Debug, Clone)]
pub struct SampledField {
    pub shape: [usize; 4],
    pub origin: [f64; 4],
    pub step: [f64; 4],
    pub values: Vec<Vector3<f64>>,
}

impl SampledField {
    pub fn sample(shape: [usize; 4], origin: [f64; 4], step: [f64; 4], f: &dyn SpaceTimeField) -> Self {
        let mut values = Vec::with_capacity(shape.iter().product());
        for it in 0..shape[0] {
            for ix in 0..shape[1] {
                for iy in 0..shape[2] {
                    for iz in 0..shape[3] {
                        let c = |a: usize, i: usize| origin[a] + step[a] * i as f64;
                        values.push(f.value(&Vector3::new(c(1, ix), c(2, iy), c(3, iz)), c(0, it)));
                    }
                }
            }
        }
        SampledField { shape, origin, step, values }
    }

    fn at(&self, i: [usize; 4]) -> Vector3<f64> {
        let [_, nx, ny, nz] = self.shape;
        self.values[((i[0] * nx + i[1]) * ny + i[2]) * nz + i[3]]
    }

    fn second(&self, i: [usize; 4], axis: usize) -> Vector3<f64> {
        let h = self.step[axis];
        let at = |o: isize| {
            let mut j = i;
            j[axis] = (i[axis] as isize + o) as usize;
            self.at(j)
        };
        (at(-2) * -1.0 + at(-1) * 16.0 - at(0) * 30.0 + at(1) * 16.0 - at(2)) / (12.0 * h * h)
    }

    /// Largest `|(1/v0²) ∂²_t R − ∇²R|` over lattice points two or more
    /// samples away from every edge.
    pub fn wave_residual(&self, v0: f64) -> Result<f64> {
        const AXES: [&str; 4] = ["t", "x", "y", "z"];
        for (a, n) in self.shape.iter().enumerate() {
            if *n < 5 {
                return Err(Error::InsufficientStencil { axis: AXES[a], need: 5, have: *n });
            }
        }
        if self.values.len() != self.shape.iter().product::<usize>() {
            return Err(Error::LengthMismatch { expected: self.shape.iter().product(), got: self.values.len() });
        }
        let mut worst: f64 = 0.0;
        let inner = |n: usize| 2..n - 2;
        for it in inner(self.shape[0]) {
            for ix in inner(self.shape[1]) {
                for iy in inner(self.shape[2]) {
                    for iz in inner(self.shape[3]) {
                        let i = [it, ix, iy, iz];
                        let lap = self.second(i, 1) + self.second(i, 2) + self.second(i, 3);
                        let res = self.second(i, 0) / (v0 * v0) - lap;
                        worst = worst.max(res.amax());
                    }
                }
            }
        }
        Ok(worst)
    }
}

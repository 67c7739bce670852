//! Navier-Stokes residual, viscous stress and momentum flux on a 3-D box.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::stencil::{derivative_at, FieldValue, Order, MIN_OPEN_NODES};


/// Uniform box grid; node `(i, j, k)` sits at `origin + (i h_x, j h_y, k h_z)`
/// and is stored at `(i n_y + j) n_z + k`. Periodic axes wrap after `n`
/// nodes, open axes use one-sided stencils at the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub n: [usize; 3],
    pub h: [f64; 3],
    pub origin: [f64; 3],
    pub periodic: [bool; 3],
}

impl BoxGrid {
    pub fn new(n: [usize; 3], h: [f64; 3], origin: [f64; 3], periodic: [bool; 3]) -> Result<Self> {
        const AXES: [&str; 3] = ["x", "y", "z"];
        for a in 0..3 {
            let need = if periodic[a] { 5 } else { MIN_OPEN_NODES };
            if n[a] < need {
                return Err(Error::InsufficientStencil { axis: AXES[a], need, have: n[a] });
            }
            if !(h[a] > 0.0) || !h[a].is_finite() {
                return Err(Error::InvalidChart(format!("box spacing along {} must be positive", AXES[a])));
            }
        }
        Ok(BoxGrid { n, h, origin, periodic })
    }

    /// Periodic cube `[0, length)³`.
    pub fn periodic_cube(n: usize, length: f64) -> Result<Self> {
        let h = length / n as f64;
        BoxGrid::new([n; 3], [h; 3], [0.0; 3], [true; 3])
    }

    /// Open cube `[-half, half]³` including both faces.
    pub fn open_cube(n: usize, half: f64) -> Result<Self> {
        let h = 2.0 * half / n.saturating_sub(1).max(1) as f64;
        BoxGrid::new([n; 3], [h; 3], [-half; 3], [false; 3])
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ijk(&self, node: usize) -> [usize; 3] {
        let [_, ny, nz] = self.n;
        [node / (ny * nz), (node / nz) % ny, node % nz]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        (ijk[0] * self.n[1] + ijk[1]) * self.n[2] + ijk[2]
    }

    pub fn point(&self, node: usize) -> Vector3<f64> {
        let ijk = self.ijk(node);
        Vector3::from_fn(|a, _| self.origin[a] + self.h[a] * ijk[a] as f64)
    }

    pub fn sample<T: Send>(&self, f: impl Fn(&Vector3<f64>) -> T + Sync) -> Vec<T> {
        (0..self.len()).into_par_iter().map(|k| f(&self.point(k))).collect()
    }

    /// Smallest spacing.
    pub fn spacing(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// First derivatives are taken on differences against the evaluation
    /// node, so adding a constant that the data can absorb exactly leaves
    /// the result unchanged to the bit.
    pub fn diff<T: FieldValue>(&self, field: &[T], axis: usize, order: Order) -> Vec<T> {
        debug_assert_eq!(field.len(), self.len());
        let n = self.n[axis] as isize;
        (0..self.len())
            .into_par_iter()
            .map(|node| {
                let ijk = self.ijk(node);
                let at = |o: isize| {
                    let mut at = ijk;
                    at[axis] = o.rem_euclid(n) as usize;
                    field[self.index(at)]
                };
                let open = !self.periodic[axis];
                match order {
                    Order::First => derivative_at(open, self.n[axis], ijk[axis], order, self.h[axis], |o| at(o) - field[node]),
                    Order::Second => derivative_at(open, self.n[axis], ijk[axis], order, self.h[axis], at),
                }
            })
            .collect()
    }

    pub fn gradient(&self, f: &[f64]) -> Vec<Vector3<f64>> {
        let d: Vec<Vec<f64>> = (0..3).map(|a| self.diff(f, a, Order::First)).collect();
        (0..f.len()).map(|k| Vector3::new(d[0][k], d[1][k], d[2][k])).collect()
    }

    /// `J[(a, b)] = ∂_b V_a`.
    pub fn jacobian(&self, v: &[Vector3<f64>]) -> Vec<Matrix3<f64>> {
        let d: Vec<Vec<Vector3<f64>>> = (0..3).map(|a| self.diff(v, a, Order::First)).collect();
        (0..v.len()).map(|k| Matrix3::from_columns(&[d[0][k], d[1][k], d[2][k]])).collect()
    }

    pub fn divergence(&self, v: &[Vector3<f64>]) -> Vec<f64> {
        (0..3)
            .map(|a| {
                let comp: Vec<f64> = v.iter().map(|x| x[a]).collect();
                self.diff(&comp, a, Order::First)
            })
            .fold(vec![0.0; v.len()], |acc, d| acc.iter().zip(&d).map(|(x, y)| x + y).collect())
    }

    pub fn laplacian<T: FieldValue>(&self, f: &[T]) -> Vec<T> {
        let d: Vec<Vec<T>> = (0..3).map(|a| self.diff(f, a, Order::Second)).collect();
        (0..f.len()).map(|k| d[0][k] + d[1][k] + d[2][k]).collect()
    }

    /// Row divergence `∂_β T[(α, β)]` of a tensor field.
    pub fn tensor_divergence(&self, t: &[Matrix3<f64>]) -> Vec<Vector3<f64>> {
        let d: Vec<Vec<Matrix3<f64>>> = (0..3).map(|a| self.diff(t, a, Order::First)).collect();
        (0..t.len()).map(|k| d[0][k].column(0) + d[1][k].column(1) + d[2][k].column(2)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbientFlow {
    pub grid: BoxGrid,
    pub velocity: Vec<Vector3<f64>>,
    pub pressure: Vec<f64>,
    pub rho: Vec<f64>,
    /// First viscosity.
    pub mu: f64,
    /// Second viscosity.
    pub xi: f64,
    pub energy: Vec<f64>,
}

impl AmbientFlow {
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        check_len(&self.velocity, n)?;
        check_len(&self.pressure, n)?;
        check_len(&self.rho, n)?;
        check_len(&self.energy, n)?;
        if let Some(k) = self.rho.iter().position(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter(format!("density must be positive at node {k}")));
        }
        if !(self.mu >= 0.0) || !(self.xi >= 0.0) {
            return Err(Error::InvalidParameter("viscosities must be non-negative".into()));
        }
        Ok(())
    }
}

/// `σ'` and `M` per node.
#[derive(Debug, Clone, PartialEq)]
pub struct StressState {
    pub viscous: Vec<Matrix3<f64>>,
    /// `M[(α, β)] = M_α^β`.
    pub momentum_flux: Vec<Matrix3<f64>>,
}

/// `σ'_αβ = μ(∂_αV_β + ∂_βV_α − (2/3)δ_αβ ∂_γV^γ) + ξ δ_αβ ∂_γV^γ`.
pub fn viscous_stress_from_jacobian(j: &Matrix3<f64>, mu: f64, xi: f64) -> Matrix3<f64> {
    let div = j.trace();
    let iso = (xi - 2.0 / 3.0 * mu) * div;
    Matrix3::from_fn(|a, b| {
        // j[(a,b)] + j[(b,a)] is symmetric in floating point as written
        let s = mu * (j[(a, b)] + j[(b, a)]);
        if a == b {
            s + iso
        } else {
            s
        }
    })
}

pub fn viscous_stress(flow: &AmbientFlow) -> Result<Vec<Matrix3<f64>>> {
    flow.validate()?;
    Ok(flow.grid.jacobian(&flow.velocity).iter().map(|j| viscous_stress_from_jacobian(j, flow.mu, flow.xi)).collect())
}

/// `M_α^β = p δ_α^β + ρ V_α V^β − σ'_α^β`.
pub fn momentum_flux(flow: &AmbientFlow, viscous: &[Matrix3<f64>]) -> Result<Vec<Matrix3<f64>>> {
    flow.validate()?;
    check_len(viscous, flow.grid.len())?;
    Ok((0..flow.grid.len())
        .map(|k| {
            let v = flow.velocity[k];
            Matrix3::identity() * flow.pressure[k] + v * v.transpose() * flow.rho[k] - viscous[k]
        })
        .collect())
}

pub fn stress_state(flow: &AmbientFlow) -> Result<StressState> {
    let viscous = viscous_stress(flow)?;
    let momentum_flux = momentum_flux(flow, &viscous)?;
    Ok(StressState { viscous, momentum_flux })
}

/// Velocity one step before and after the evaluated instant.
#[derive(Debug, Clone, Default)]
pub struct FlowSamples {
    pub prev: Option<Vec<Vector3<f64>>>,
    pub next: Option<Vec<Vector3<f64>>>,
    pub dt: f64,
}

impl FlowSamples {
    /// Samples of a steady flow.
    pub fn steady(v: &[Vector3<f64>]) -> Self {
        FlowSamples { prev: Some(v.to_vec()), next: Some(v.to_vec()), dt: 1.0 }
    }
}

/// `ρ(∂_tV + V^α∂_αV) + ∇p − μΔV − (ξ + μ/3)∇(∂_αV^α)`.
pub fn ns_residual(flow: &AmbientFlow, samples: &FlowSamples) -> Result<Vec<Vector3<f64>>> {
    flow.validate()?;
    let prev = samples.prev.as_ref().ok_or(Error::MissingTemporalSamples("no velocity before t"))?;
    let next = samples.next.as_ref().ok_or(Error::MissingTemporalSamples("no velocity after t"))?;
    let n = flow.grid.len();
    check_len(prev, n)?;
    check_len(next, n)?;
    if !(samples.dt > 0.0) {
        return Err(Error::InvalidParameter("sample step must be positive".into()));
    }
    let g = &flow.grid;
    let jac = g.jacobian(&flow.velocity);
    let grad_p = g.gradient(&flow.pressure);
    let lap = g.laplacian(&flow.velocity);
    let grad_div = g.gradient(&g.divergence(&flow.velocity));
    let bulk = flow.xi + flow.mu / 3.0;
    Ok((0..n)
        .map(|k| {
            let dvdt = (next[k] - prev[k]) / (2.0 * samples.dt);
            let advect = jac[k] * flow.velocity[k];
            (dvdt + advect) * flow.rho[k] + grad_p[k] - lap[k] * flow.mu - grad_div[k] * bulk
        })
        .collect())
}

/// `∂_α(E V^α)`.
pub fn energy_flux_divergence(energy: &[f64], flow: &AmbientFlow) -> Result<Vec<f64>> {
    check_len(energy, flow.grid.len())?;
    let flux: Vec<Vector3<f64>> = energy.iter().zip(&flow.velocity).map(|(e, v)| v * *e).collect();
    Ok(flow.grid.divergence(&flux))
}

/// `∂_tρ + ∂_α(ρV^α)` with `∂_tρ` from samples one step apart on each side.
pub fn continuity_residual(flow: &AmbientFlow, rho_prev: &[f64], rho_next: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = flow.grid.len();
    check_len(rho_prev, n)?;
    check_len(rho_next, n)?;
    let flux: Vec<Vector3<f64>> = flow.rho.iter().zip(&flow.velocity).map(|(r, v)| v * *r).collect();
    let div = flow.grid.divergence(&flux);
    Ok((0..n).map(|k| (rho_next[k] - rho_prev[k]) / (2.0 * dt) + div[k]).collect())
}

/// A flow given in closed form with exact derivatives.
pub trait AnalyticFlow: Sync {
    fn velocity(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;
    fn velocity_dt(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;
    /// `J[(a, b)] = ∂_b V_a`.
    fn jacobian(&self, x: &Vector3<f64>, t: f64) -> Matrix3<f64>;
    fn laplacian(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;
    fn grad_divergence(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;
    fn pressure(&self, x: &Vector3<f64>, t: f64) -> f64;
    fn pressure_gradient(&self, x: &Vector3<f64>, t: f64) -> Vector3<f64>;
}

/// The residual of [`ns_residual`] with every derivative taken exactly.
pub fn analytic_ns_residual(
    f: &dyn AnalyticFlow,
    rho: f64,
    mu: f64,
    xi: f64,
    x: &Vector3<f64>,
    t: f64,
) -> Vector3<f64> {
    let v = f.velocity(x, t);
    (f.velocity_dt(x, t) + f.jacobian(x, t) * v) * rho + f.pressure_gradient(x, t)
        - f.laplacian(x, t) * mu
        - f.grad_divergence(x, t) * (xi + mu / 3.0)
}

/// Catalogue of analytic flows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FlowCase {
    /// `V = 0`, `p = p0`.
    Rest { p0: f64 },
    /// `V = a + ω × r`, `p = p0`.
    RigidMotion { a: [f64; 3], omega: [f64; 3], p0: f64 },
    /// `V = ω ẑ × r`, `p = ρ ω² (x² + y²) / 2`.
    RigidRotation { omega: f64, rho: f64 },
    /// `V = (A sin y, 0, 0)`, `p = p0`.
    Shear { amplitude: f64, p0: f64 },
    /// `V = α r`, `p = p0`.
    Dilation { alpha: f64, p0: f64 },
    /// `V = φ(s) ẑ × r` with `φ = ω e^{-s/w²}`, `s = x² + y²`, and the pressure
    /// of radial balance `p = −ρ ω² w² e^{-2s/w²} / 4`.
    Vortex { omega: f64, width: f64, rho: f64 },
}

impl FlowCase {
    /// `(φ, φ', φ'')` in `s` for the vortex profile.
    fn profile(omega: f64, width: f64, s: f64) -> (f64, f64, f64) {
        let w2 = width * width;
        let phi = omega * (-s / w2).exp();
        (phi, -phi / w2, phi / (w2 * w2))
    }
}

impl AnalyticFlow for FlowCase {
    fn velocity(&self, x: &Vector3<f64>, _t: f64) -> Vector3<f64> {
        match *self {
            FlowCase::Rest { .. } => Vector3::zeros(),
            FlowCase::RigidMotion { a, omega, .. } => Vector3::from(a) + Vector3::from(omega).cross(x),
            FlowCase::RigidRotation { omega, .. } => Vector3::new(-omega * x.y, omega * x.x, 0.0),
            FlowCase::Shear { amplitude, .. } => Vector3::new(amplitude * x.y.sin(), 0.0, 0.0),
            FlowCase::Dilation { alpha, .. } => x * alpha,
            FlowCase::Vortex { omega, width, .. } => {
                let (phi, _, _) = FlowCase::profile(omega, width, x.x * x.x + x.y * x.y);
                Vector3::new(-x.y, x.x, 0.0) * phi
            }
        }
    }

    fn velocity_dt(&self, _x: &Vector3<f64>, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn jacobian(&self, x: &Vector3<f64>, _t: f64) -> Matrix3<f64> {
        match *self {
            FlowCase::Rest { .. } => Matrix3::zeros(),
            FlowCase::RigidMotion { omega, .. } => Vector3::from(omega).cross_matrix(),
            FlowCase::RigidRotation { omega, .. } => {
                Matrix3::new(0.0, -omega, 0.0, omega, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
            FlowCase::Shear { amplitude, .. } => {
                let mut j = Matrix3::zeros();
                j[(0, 1)] = amplitude * x.y.cos();
                j
            }
            FlowCase::Dilation { alpha, .. } => Matrix3::identity() * alpha,
            FlowCase::Vortex { omega, width, .. } => {
                let (phi, d1, _) = FlowCase::profile(omega, width, x.x * x.x + x.y * x.y);
                let e = Vector3::new(-x.y, x.x, 0.0);
                let ds = Vector3::new(2.0 * x.x, 2.0 * x.y, 0.0);
                e * ds.transpose() * d1 + Matrix3::new(0.0, -phi, 0.0, phi, 0.0, 0.0, 0.0, 0.0, 0.0)
            }
        }
    }

    fn laplacian(&self, x: &Vector3<f64>, _t: f64) -> Vector3<f64> {
        match *self {
            FlowCase::Shear { amplitude, .. } => Vector3::new(-amplitude * x.y.sin(), 0.0, 0.0),
            FlowCase::Vortex { omega, width, .. } => {
                let s = x.x * x.x + x.y * x.y;
                let (_, d1, d2) = FlowCase::profile(omega, width, s);
                Vector3::new(-x.y, x.x, 0.0) * (8.0 * d1 + 4.0 * s * d2)
            }
            _ => Vector3::zeros(),
        }
    }

    fn grad_divergence(&self, _x: &Vector3<f64>, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn pressure(&self, x: &Vector3<f64>, _t: f64) -> f64 {
        match *self {
            FlowCase::Rest { p0 }
            | FlowCase::RigidMotion { p0, .. }
            | FlowCase::Shear { p0, .. }
            | FlowCase::Dilation { p0, .. } => p0,
            FlowCase::RigidRotation { omega, rho } => 0.5 * rho * omega * omega * (x.x * x.x + x.y * x.y),
            FlowCase::Vortex { omega, width, rho } => {
                let s = x.x * x.x + x.y * x.y;
                -0.25 * rho * omega * omega * width * width * (-2.0 * s / (width * width)).exp()
            }
        }
    }

    fn pressure_gradient(&self, x: &Vector3<f64>, _t: f64) -> Vector3<f64> {
        match *self {
            FlowCase::RigidRotation { omega, rho } => Vector3::new(x.x, x.y, 0.0) * (rho * omega * omega),
            FlowCase::Vortex { omega, width, rho } => {
                let (phi, _, _) = FlowCase::profile(omega, width, x.x * x.x + x.y * x.y);
                Vector3::new(x.x, x.y, 0.0) * (rho * phi * phi)
            }
            _ => Vector3::zeros(),
        }
    }
}

impl FlowCase {
    /// Samples the case on a grid.
    pub fn flow(&self, grid: &BoxGrid, rho: f64, mu: f64, xi: f64) -> AmbientFlow {
        AmbientFlow {
            grid: grid.clone(),
            velocity: grid.sample(|x| self.velocity(x, 0.0)),
            pressure: grid.sample(|x| self.pressure(x, 0.0)),
            rho: vec![rho; grid.len()],
            mu,
            xi,
            energy: vec![0.0; grid.len()],
        }
    }
}

/// Max-norm distance between the grid residual and the exact one.
pub fn residual_error(case: &FlowCase, grid: &BoxGrid, rho: f64, mu: f64, xi: f64) -> Result<(f64, f64)> {
    let flow = case.flow(grid, rho, mu, xi);
    let r = ns_residual(&flow, &FlowSamples::steady(&flow.velocity))?;
    let exact: Vec<Vector3<f64>> = grid.sample(|x| analytic_ns_residual(case, rho, mu, xi, x, 0.0));
    let err = r.iter().zip(&exact).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    Ok((err, max_norm(&exact)))
}

/// Largest component magnitude over a vector field.
pub fn max_norm(v: &[Vector3<f64>]) -> f64 {
    v.iter().map(|x| x.amax()).fold(0.0, f64::max)
}

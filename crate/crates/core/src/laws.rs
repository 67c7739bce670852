//! Curvature-tensor laws of the tangent-dominated regime: generalised
//! Young-Laplace, Kelvin and Gibbs-Thomson forms.
//!
//! Each law reads `B_ab = (a − b B_i^i) / (d V_a V_b)` per node. The chart
//! components are divided one by one; the trace coupling is closed with
//! `τ = S^ab / (d V_a V_b)` so that `Q = a / (1 + b τ)`.

use std::io::BufRead;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::chart::ChartGrid;
use crate::error::{check_len, Error, Result};
use crate::geometry::{CurvatureSign, GeometryState};
use crate::report::fmt_f64;

/// Thermodynamic inputs of the Kelvin and Gibbs-Thomson forms.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentFields {
    pub p_v: Vec<f64>,
    pub p_s: Vec<f64>,
    /// Surface temperature.
    pub temperature: Vec<f64>,
    /// Bulk temperature.
    pub t0: f64,
    /// Molar volume.
    pub v_m: f64,
    /// Fusion enthalpy per mole.
    pub h_fus: f64,
    /// `k_B T`.
    pub kt: f64,
}

impl EnvironmentFields {
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(n: usize, p_v: f64, p_s: f64, temperature: f64, t0: f64, v_m: f64, h_fus: f64, kt: f64) -> Self {
        EnvironmentFields {
            p_v: vec![p_v; n],
            p_s: vec![p_s; n],
            temperature: vec![temperature; n],
            t0,
            v_m,
            h_fus,
            kt,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        check_len(&self.p_v, n)?;
        check_len(&self.p_s, n)?;
        check_len(&self.temperature, n)?;
        let positive = |x: &f64| *x > 0.0 && x.is_finite();
        if !self.p_v.iter().chain(&self.p_s).all(positive) {
            return Err(Error::InvalidParameter("vapour and saturation pressures must be positive".into()));
        }
        if !self.temperature.iter().all(positive) || !positive(&self.t0) {
            return Err(Error::InvalidParameter("temperatures must be positive".into()));
        }
        if !positive(&self.v_m) || !positive(&self.kt) {
            return Err(Error::InvalidParameter("molar volume and thermal energy must be positive".into()));
        }
        Ok(())
    }

    /// `γ_T = 1 − T / T0` per node.
    pub fn undercooling(&self) -> Vec<f64> {
        self.temperature.iter().map(|t| 1.0 - t / self.t0).collect()
    }

    /// Reads `node,p_v,p_s,T` rows; nodes must be `0..n` in order.
    pub fn read_table(
        reader: impl BufRead,
        t0: f64,
        v_m: f64,
        h_fus: f64,
        kt: f64,
    ) -> Result<Self> {
        let mut env = EnvironmentFields { p_v: vec![], p_s: vec![], temperature: vec![], t0, v_m, h_fus, kt };
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (line_no == 0 && line.starts_with("node")) {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Config(format!("environment line {}: expected 4 columns", line_no + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Config(format!("environment line {}: {e}", line_no + 1)))
            };
            let node: usize =
                cols[0].parse().map_err(|e| Error::Config(format!("environment line {}: {e}", line_no + 1)))?;
            if node != env.p_v.len() {
                return Err(Error::Config(format!("environment line {}: node {node} out of order", line_no + 1)));
            }
            env.p_v.push(num(cols[1])?);
            env.p_s.push(num(cols[2])?);
            env.temperature.push(num(cols[3])?);
        }
        Ok(env)
    }
}

/// Which law supplies the numerator.
#[derive(Debug, Clone, PartialEq)]
pub enum LawSource {
    /// `a = 2 P + ∂_α F^α`, `b = Λ`, `d = ρ`.
    Pressure { pressure: Vec<f64> },
    /// `a = (k_B T / v_m) ln(p_v / p_s) + ∂_α F^α`, `b = Λ`, `d = ρ`.
    Kelvin(EnvironmentFields),
    /// `a = γ_T H_fus + v_m ∂_α F^α`, `b = v_m Λ`, `d = ρ v_m`.
    GibbsThomson(EnvironmentFields),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawKind {
    Pressure,
    Kelvin,
    GibbsThomson,
}

impl std::str::FromStr for LawKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pressure" => Ok(LawKind::Pressure),
            "kelvin" => Ok(LawKind::Kelvin),
            "gibbs-thomson" | "gibbs_thomson" => Ok(LawKind::GibbsThomson),
            other => Err(Error::Config(format!("unknown law '{other}'"))),
        }
    }
}

impl LawSource {
    pub fn kind(&self) -> LawKind {
        match self {
            LawSource::Pressure { .. } => LawKind::Pressure,
            LawSource::Kelvin(_) => LawKind::Kelvin,
            LawSource::GibbsThomson(_) => LawKind::GibbsThomson,
        }
    }
}

/// How `(d V_a V_b)^{-1}` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InverseReading {
    /// Divide each chart component by `d V_a V_b`.
    #[default]
    Componentwise,
    /// Moore-Penrose inverse of the rank-one matrix `d V V^T`.
    PseudoInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawInput {
    pub source: LawSource,
    /// `∂_α F^α` sampled on the surface.
    pub force_divergence: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    /// Covariant tangent velocity `V_a`.
    pub velocity: Vec<Vector2<f64>>,
    pub v_min: f64,
    pub reading: InverseReading,
}

/// Per-node `(a, b, d)` of the law.
#[derive(Debug, Clone, PartialEq)]
pub struct LawCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<f64>,
}

impl LawInput {
    pub fn validate(&self, n: usize) -> Result<()> {
        check_len(&self.force_divergence, n)?;
        check_len(&self.lambda, n)?;
        check_len(&self.rho, n)?;
        check_len(&self.velocity, n)?;
        match &self.source {
            LawSource::Pressure { pressure } => check_len(pressure, n)?,
            LawSource::Kelvin(env) | LawSource::GibbsThomson(env) => env.validate(n)?,
        }
        if !(self.v_min > 0.0) {
            return Err(Error::InvalidParameter(format!("v_min must be positive, got {}", self.v_min)));
        }
        if let Some(k) = self.rho.iter().position(|r| !(*r > 0.0)) {
            return Err(Error::InvalidParameter(format!("surface density must be positive at node {k}")));
        }
        if let Some(k) = self.lambda.iter().position(|l| !(*l >= 0.0)) {
            return Err(Error::InvalidParameter(format!("surface energy density must be non-negative at node {k}")));
        }
        for (node, v) in self.velocity.iter().enumerate() {
            let speed = match self.reading {
                InverseReading::Componentwise => v[0].abs().min(v[1].abs()),
                InverseReading::PseudoInverse => v.norm(),
            };
            if !(speed >= self.v_min) {
                return Err(Error::SpeedBelowMinimum { node, speed, v_min: self.v_min });
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> LawCoefficients {
        let n = self.rho.len();
        let f = &self.force_divergence;
        match &self.source {
            LawSource::Pressure { pressure } => LawCoefficients {
                a: (0..n).map(|k| 2.0 * pressure[k] + f[k]).collect(),
                b: self.lambda.clone(),
                d: self.rho.clone(),
            },
            LawSource::Kelvin(env) => LawCoefficients {
                a: (0..n).map(|k| env.kt / env.v_m * (env.p_v[k] / env.p_s[k]).ln() + f[k]).collect(),
                b: self.lambda.clone(),
                d: self.rho.clone(),
            },
            LawSource::GibbsThomson(env) => {
                let gamma = env.undercooling();
                LawCoefficients {
                    a: (0..n).map(|k| gamma[k] * env.h_fus + env.v_m * f[k]).collect(),
                    b: self.lambda.iter().map(|l| env.v_m * l).collect(),
                    d: self.rho.iter().map(|r| env.v_m * r).collect(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawSolution {
    /// `B_ab` per node.
    pub curvature: Vec<Matrix2<f64>>,
    /// Closed numerator `Q = a / (1 + b τ)`.
    pub q: Vec<f64>,
    pub tau: Vec<f64>,
    /// `B_i^i = Q τ`.
    pub trace: Vec<f64>,
    /// Largest back-substitution error relative to `|Q|`.
    pub residual: f64,
}

const SINGULAR_CLOSURE: f64 = 1e-12;

/// `(d V V^T)^{-1}` under the chosen reading, per unit numerator.
fn unit_response(v: &Vector2<f64>, d: f64, reading: InverseReading) -> Matrix2<f64> {
    match reading {
        InverseReading::Componentwise => Matrix2::from_fn(|a, b| 1.0 / (d * v[a] * v[b])),
        InverseReading::PseudoInverse => {
            let n2 = v.norm_squared();
            (v * v.transpose()) / (d * n2 * n2)
        }
    }
}

pub fn solve_curvature_law(input: &LawInput, g: &GeometryState) -> Result<LawSolution> {
    let n = g.len();
    input.validate(n)?;
    let LawCoefficients { a, b, d } = input.coefficients();
    let mut curvature = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut residual: f64 = 0.0;
    for k in 0..n {
        let v = input.velocity[k];
        let unit = unit_response(&v, d[k], input.reading);
        let t = g.inv_metric[k].component_mul(&unit).sum();
        let denom = 1.0 + b[k] * t;
        if denom.abs() <= SINGULAR_CLOSURE * (1.0 + (b[k] * t).abs()) {
            return Err(Error::ClosureSingularity(k));
        }
        let qk = a[k] / denom;
        let bk = unit * qk;
        let tr = qk * t;
        // back-substitution into the defining relation
        let defining = a[k] - b[k] * g.inv_metric[k].component_mul(&bk).sum();
        let err = match input.reading {
            InverseReading::Componentwise => {
                let mut worst: f64 = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        worst = worst.max((bk[(i, j)] * d[k] * v[i] * v[j] - defining).abs());
                    }
                }
                worst
            }
            InverseReading::PseudoInverse => {
                let m = v * v.transpose() * d[k];
                (m * bk * m - m * defining).amax() / (d[k] * v.norm_squared()).powi(2).max(f64::MIN_POSITIVE)
            }
        };
        let scale = qk.abs().max(f64::MIN_POSITIVE);
        if qk != 0.0 || err != 0.0 {
            residual = residual.max(err / scale);
        }
        curvature.push(bk);
        q.push(qk);
        tau.push(t);
        trace.push(tr);
    }
    Ok(LawSolution { curvature, q, tau, trace, residual })
}

/// Writes `node,u,v,B11,B12,B22,Q,trace`.
pub fn write_solution_csv(sol: &LawSolution, chart: &ChartGrid, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "node,u,v,B11,B12,B22,Q,trace")?;
    for (k, b) in sol.curvature.iter().enumerate() {
        let (u, v) = chart.coords(k);
        writeln!(
            w,
            "{k},{},{},{},{},{},{},{}",
            fmt_f64(u),
            fmt_f64(v),
            fmt_f64(b[(0, 0)]),
            fmt_f64(b[(0, 1)]),
            fmt_f64(b[(1, 1)]),
            fmt_f64(sol.q[k]),
            fmt_f64(sol.trace[k])
        )?;
    }
    Ok(())
}

/// Inputs of the static branch, where the numerator vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticFields {
    pub lambda: f64,
    pub force_divergence: f64,
    pub v_m: f64,
    pub kt: f64,
    pub h_fus: f64,
}

/// Solves `a = b B_i^i` for the free scalar of the law at every node:
/// `ln(p_v / p_s)`, `P` or `γ_T`. The trace is `sign · B_i^i` of the
/// geometry.
pub fn static_closure(law: LawKind, f: &StaticFields, g: &GeometryState, sign: CurvatureSign) -> Result<Vec<f64>> {
    if law == LawKind::GibbsThomson && f.h_fus == 0.0 {
        return Err(Error::ZeroFusionEnthalpy);
    }
    if law == LawKind::Kelvin && !(f.kt > 0.0 && f.v_m > 0.0) {
        return Err(Error::InvalidParameter("Kelvin branch needs positive k_B T and v_m".into()));
    }
    Ok(g
        .mean
        .iter()
        .map(|h| {
            let excess = f.lambda * (sign.factor() * h) - f.force_divergence;
            match law {
                LawKind::Kelvin => f.v_m / f.kt * excess,
                LawKind::Pressure => excess / 2.0,
                LawKind::GibbsThomson => f.v_m * excess / f.h_fus,
            }
        })
        .collect())
}

/// Outcome of the boundedness certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub members: usize,
    /// Largest `‖B‖∞` over the ensemble.
    pub max_curvature: f64,
    /// `max|Q| / (d_min v_min²)`.
    pub bound: f64,
    /// `max_curvature / bound`.
    pub ratio: f64,
    pub max_residual: f64,
    pub holds: bool,
}

/// Checks `‖B_ab‖∞ ≤ max|Q| / (d_min v_min²)` over every member.
pub fn boundedness_certificate(ensemble: &[LawInput], g: &GeometryState) -> Result<BoundReport> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut max_b: f64 = 0.0;
    let mut max_q: f64 = 0.0;
    let mut d_min = f64::INFINITY;
    let mut v_min = f64::INFINITY;
    let mut max_residual: f64 = 0.0;
    for input in ensemble {
        let sol = solve_curvature_law(input, g)?;
        let c = input.coefficients();
        max_b = sol.curvature.iter().map(|b| b.amax()).fold(max_b, f64::max);
        max_q = sol.q.iter().map(|q| q.abs()).fold(max_q, f64::max);
        d_min = c.d.iter().copied().fold(d_min, f64::min);
        v_min = v_min.min(input.v_min);
        max_residual = max_residual.max(sol.residual);
    }
    let bound = max_q / (d_min * v_min * v_min);
    let ratio = if bound > 0.0 { max_b / bound } else { 0.0 };
    Ok(BoundReport { members: ensemble.len(), max_curvature: max_b, bound, ratio, max_residual, holds: max_b <= bound })
}

/// Settings of a random ensemble of smooth tangent fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub members: usize,
    pub v_min: f64,
    pub rho: f64,
    /// Bound on `|a|`.
    pub q_max: f64,
    /// Largest `Λ`; each member draws `Λ` uniformly from `[0, lambda_max]`.
    pub lambda_max: f64,
    /// Highest Fourier wavenumber of the random fields.
    pub modes: u32,
}

struct TrigField {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl TrigField {
    fn random(rng: &mut Xoshiro256StarStar, modes: u32) -> Self {
        let mut terms = Vec::new();
        for p in 0..=modes as i32 {
            for q in -(modes as i32)..=modes as i32 {
                if p == 0 && q <= 0 {
                    continue;
                }
                let amp = rng.random_range(-1.0..1.0) / (1.0 + (p * p + q * q) as f64);
                terms.push((p as f64, q as f64, amp, rng.random_range(0.0..std::f64::consts::TAU)));
            }
        }
        TrigField { terms }
    }

    /// Values rescaled to `[-1, 1]`.
    fn sample(&self, chart: &ChartGrid) -> Vec<f64> {
        let total: f64 = self.terms.iter().map(|t| t.2.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        chart.sample(|u, v| self.terms.iter().map(|(p, q, a, ph)| a * (p * u + q * v + ph).cos()).sum::<f64>() / total)
    }
}

/// Pressure-law inputs with random smooth `V_a`, `P` and `Λ`, each
/// velocity component at least `v_min` in magnitude.
pub fn random_ensemble(spec: &EnsembleSpec, chart: &ChartGrid, seed: u64) -> Result<Vec<LawInput>> {
    if spec.members == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if !(spec.v_min > 0.0 && spec.rho > 0.0 && spec.q_max >= 0.0 && spec.lambda_max >= 0.0) {
        return Err(Error::InvalidParameter("ensemble parameters out of range".into()));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let n = chart.len();
    let mut out = Vec::with_capacity(spec.members);
    for _ in 0..spec.members {
        let mut comps = Vec::new();
        for _ in 0..2 {
            let f = TrigField::random(&mut rng, spec.modes).sample(chart);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let scale = rng.random_range(0.0..2.0);
            comps.push(f.iter().map(|x| sign * spec.v_min * (1.0 + scale * x * x)).collect::<Vec<f64>>());
        }
        let q = TrigField::random(&mut rng, spec.modes).sample(chart);
        let lambda = rng.random_range(0.0..=spec.lambda_max);
        out.push(LawInput {
            source: LawSource::Pressure { pressure: q.iter().map(|x| 0.5 * spec.q_max * x).collect() },
            force_divergence: vec![0.0; n],
            lambda: vec![lambda; n],
            rho: vec![spec.rho; n],
            velocity: (0..n).map(|k| Vector2::new(comps[0][k], comps[1][k])).collect(),
            v_min: spec.v_min,
            reading: InverseReading::Componentwise,
        });
    }
    Ok(out)
}

//! Plain-text `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every key
//! is optional; `suite` defaults to `all`. Unknown keys are rejected.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::NodeMotion;
use crate::error::{Error, Result};
use crate::geometry::CurvatureSign;
use crate::laws::InverseReading;
use crate::ns::FlowCase;
use crate::report::Format;
use crate::shape::ShapeSpec;
use crate::transport::Motion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Suite {
    Geometry,
    Transport,
    Evolve,
    Verify,
    Laws,
    Ns,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Transport => "transport",
            Suite::Evolve => "evolve",
            Suite::Verify => "verify",
            Suite::Laws => "laws",
            Suite::Ns => "ns",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "geometry" => Suite::Geometry,
            "transport" => Suite::Transport,
            "evolve" => Suite::Evolve,
            "verify" => Suite::Verify,
            "laws" => Suite::Laws,
            "ns" => Suite::Ns,
            "all" => Suite::All,
            other => return Err(Error::Config(format!("unknown suite `{other}`"))),
        })
    }
}

/// Pass thresholds. Errors are compared with `≤`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Max-norm error of H and K at the finest resolution.
    pub geometry: f64,
    /// Smallest acceptable observed order between successive resolutions.
    pub min_order: f64,
    pub transport: f64,
    pub hrate: f64,
    pub harmonic: f64,
    pub evolve: f64,
    pub mass: f64,
    pub frequency: f64,
    pub energy: f64,
    pub reversibility: f64,
    pub radial: f64,
    pub sphere_ode: f64,
    pub standing_wave: f64,
    pub rotor: f64,
    pub laws: f64,
    pub rigid: f64,
    pub shear: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            geometry: 1e-3,
            min_order: 2.0,
            transport: 1e-6,
            hrate: 1e-6,
            harmonic: 1e-8,
            evolve: 1e-6,
            mass: 1e-3,
            frequency: 1e-2,
            energy: 1e-3,
            reversibility: 1e-8,
            radial: 1e-12,
            sphere_ode: 1e-10,
            standing_wave: 1e-6,
            rotor: 1e-10,
            laws: 1e-10,
            rigid: 1e-12,
            shear: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    /// Directory for field dumps (geometry, trajectories, law fields).
    pub fields_dir: Option<PathBuf>,
    pub tolerances: Tolerances,

    // geometry
    pub shapes: Vec<ShapeSpec>,
    pub resolutions: Vec<(usize, usize)>,

    // transport
    pub motion: Motion,
    pub transport_resolutions: Vec<(usize, usize)>,
    pub dt_probe: f64,
    pub t_probe: f64,
    pub hrate_resolution: usize,
    pub harmonic_resolution: usize,

    // evolve
    pub shape: ShapeSpec,
    pub rho0: f64,
    pub lambda0: f64,
    /// `None` spreads `steps` over one period of the radial oscillation.
    pub dt: Option<f64>,
    pub steps: usize,
    pub curvature_sign: CurvatureSign,
    pub node_motion: NodeMotion,
    pub evolve_resolution: usize,
    pub wave_sign: f64,
    pub wave_resolution: usize,
    pub wave_mode: u32,
    pub wave_gamma: f64,
    pub wave_length: f64,
    pub wave_periods: usize,

    // laws
    pub members: usize,
    pub laws_resolution: usize,
    pub v_min: f64,
    pub laws_rho: f64,
    pub q_max: f64,
    pub lambda_max: f64,
    pub modes: u32,
    pub inverse_reading: InverseReading,
    pub environment: Option<PathBuf>,
    /// Surface tension of the static closures.
    pub lambda_static: f64,
    pub static_radii: Vec<f64>,
    pub kt: f64,
    pub v_m: f64,
    pub h_fus: f64,
    pub t0: f64,

    // ns
    pub flows: Vec<FlowCase>,
    pub ns_resolutions: Vec<usize>,
    pub rigid_samples: usize,
    pub mu: f64,
    pub xi: f64,
}

impl ExperimentConfig {
    pub fn new(suite: Suite) -> Self {
        ExperimentConfig {
            suite,
            seed: 42,
            out: None,
            format: Format::Csv,
            fields_dir: None,
            tolerances: Tolerances::default(),
            shapes: vec![
                ShapeSpec::Sphere { radius: 1.0 },
                ShapeSpec::Torus { major: 2.0, minor: 0.5 },
                ShapeSpec::Ellipsoid { a: 1.0, b: 1.2, c: 0.8 },
            ],
            resolutions: vec![(64, 64), (128, 128)],
            motion: Motion::ExpandingSphere { r0: 1.0, rate: 0.1 },
            transport_resolutions: vec![(64, 128), (128, 256)],
            dt_probe: 1e-4,
            t_probe: 0.5,
            hrate_resolution: 256,
            harmonic_resolution: 512,
            shape: ShapeSpec::Sphere { radius: 1.0 },
            rho0: 1.0,
            lambda0: 0.5,
            dt: None,
            steps: 641,
            curvature_sign: CurvatureSign::ConvexPositive,
            node_motion: NodeMotion::FixedRays,
            evolve_resolution: 64,
            wave_sign: 1.0,
            wave_resolution: 256,
            wave_mode: 3,
            wave_gamma: 2.0,
            wave_length: 1.0,
            wave_periods: 10,
            members: 100,
            laws_resolution: 32,
            v_min: 0.5,
            laws_rho: 1.0,
            q_max: 1.0,
            lambda_max: 1.0,
            modes: 3,
            inverse_reading: InverseReading::Componentwise,
            environment: None,
            lambda_static: 0.072,
            static_radii: vec![1e-9, 2e-9, 4e-9, 8e-9],
            kt: 4.1e-21,
            v_m: 3.0e-29,
            h_fus: 1.0e-20,
            t0: 273.15,
            flows: vec![
                FlowCase::Rest { p0: 1.0 },
                FlowCase::RigidRotation { omega: 1.3, rho: 1.1 },
                FlowCase::Shear { amplitude: 1.0, p0: 2.0 },
                FlowCase::Dilation { alpha: 0.7, p0: 0.0 },
                FlowCase::Vortex { omega: 1.0, width: 0.5, rho: 1.0 },
            ],
            ns_resolutions: vec![16, 32],
            rigid_samples: 20,
            mu: 0.3,
            xi: 0.1,
        }
    }

    /// Parses without validating; see [`ExperimentConfig::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((lineno + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let suite = match pairs.iter().find(|(_, k, _)| k == "suite") {
            Some((_, _, v)) => v.parse::<Suite>()?,
            None => Suite::All,
        };
        let mut cfg = ExperimentConfig::new(suite);
        let mut seen = std::collections::HashSet::new();
        for (lineno, key, value) in &pairs {
            if !seen.insert(key.clone()) {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {lineno}: {m}")),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    /// Reads a config file. Validation is left to [`ExperimentConfig::validate`]
    /// so callers can override the suite first.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tolerances;
        match key {
            "suite" => {}
            "seed" => self.seed = num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "fields_dir" => self.fields_dir = Some(PathBuf::from(value)),

            "tol_geometry" => t.geometry = num(key, value)?,
            "min_order" => t.min_order = num(key, value)?,
            "tol_transport" => t.transport = num(key, value)?,
            "tol_hrate" => t.hrate = num(key, value)?,
            "tol_harmonic" => t.harmonic = num(key, value)?,
            "tol_evolve" => t.evolve = num(key, value)?,
            "tol_mass" => t.mass = num(key, value)?,
            "tol_frequency" => t.frequency = num(key, value)?,
            "tol_energy" => t.energy = num(key, value)?,
            "tol_reversibility" => t.reversibility = num(key, value)?,
            "tol_radial" => t.radial = num(key, value)?,
            "tol_sphere_ode" => t.sphere_ode = num(key, value)?,
            "tol_standing_wave" => t.standing_wave = num(key, value)?,
            "tol_rotor" => t.rotor = num(key, value)?,
            "tol_laws" => t.laws = num(key, value)?,
            "tol_rigid" => t.rigid = num(key, value)?,
            "tol_shear" => t.shear = num(key, value)?,

            "shapes" => self.shapes = list(value, ';').map(|s| parse_shape(&s)).collect::<Result<_>>()?,
            "resolutions" => self.resolutions = list(value, ',').map(|s| parse_resolution(&s)).collect::<Result<_>>()?,

            "motion" => self.motion = parse_motion(value)?,
            "transport_resolutions" => {
                self.transport_resolutions = list(value, ',').map(|s| parse_resolution(&s)).collect::<Result<_>>()?
            }
            "dt_probe" => self.dt_probe = num(key, value)?,
            "t_probe" => self.t_probe = num(key, value)?,
            "hrate_resolution" => self.hrate_resolution = num(key, value)?,
            "harmonic_resolution" => self.harmonic_resolution = num(key, value)?,

            "shape" => self.shape = parse_shape(value)?,
            "rho0" => self.rho0 = num(key, value)?,
            "lambda0" => self.lambda0 = num(key, value)?,
            "dt" => self.dt = Some(num(key, value)?),
            "steps" => self.steps = num(key, value)?,
            "curvature_sign" => self.curvature_sign = CurvatureSign::from_factor(num(key, value)?)?,
            "node_motion" => {
                self.node_motion = match value {
                    "normal" => NodeMotion::Normal,
                    "fixed_rays" => NodeMotion::FixedRays,
                    other => return Err(Error::Config(format!("unknown node_motion `{other}`"))),
                }
            }
            "evolve_resolution" => self.evolve_resolution = num(key, value)?,
            "wave_sign" => self.wave_sign = num(key, value)?,
            "wave_resolution" => self.wave_resolution = num(key, value)?,
            "wave_mode" => self.wave_mode = num(key, value)?,
            "wave_gamma" => self.wave_gamma = num(key, value)?,
            "wave_length" => self.wave_length = num(key, value)?,
            "wave_periods" => self.wave_periods = num(key, value)?,

            "members" => self.members = num(key, value)?,
            "laws_resolution" => self.laws_resolution = num(key, value)?,
            "v_min" => self.v_min = num(key, value)?,
            "laws_rho" => self.laws_rho = num(key, value)?,
            "q_max" => self.q_max = num(key, value)?,
            "lambda_max" => self.lambda_max = num(key, value)?,
            "modes" => self.modes = num(key, value)?,
            "inverse_reading" => {
                self.inverse_reading = match value {
                    "componentwise" => InverseReading::Componentwise,
                    "pseudo_inverse" => InverseReading::PseudoInverse,
                    other => return Err(Error::Config(format!("unknown inverse_reading `{other}`"))),
                }
            }
            "lambda_static" => self.lambda_static = num(key, value)?,
            "environment" => self.environment = Some(PathBuf::from(value)),
            "static_radii" => self.static_radii = list(value, ',').map(|s| num("static_radii", &s)).collect::<Result<_>>()?,
            "kt" => self.kt = num(key, value)?,
            "v_m" => self.v_m = num(key, value)?,
            "h_fus" => self.h_fus = num(key, value)?,
            "t0" => self.t0 = num(key, value)?,

            "flows" => self.flows = list(value, ';').map(|s| parse_flow(&s)).collect::<Result<_>>()?,
            "ns_resolutions" => self.ns_resolutions = list(value, ',').map(|s| num("ns_resolutions", &s)).collect::<Result<_>>()?,
            "rigid_samples" => self.rigid_samples = num(key, value)?,
            "mu" => self.mu = num(key, value)?,
            "xi" => self.xi = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let runs = |s: Suite| self.suite == s || self.suite == Suite::All;
        if runs(Suite::Geometry) {
            if self.resolutions.len() < 2 {
                return Err(Error::Config("geometry needs at least two resolutions".into()));
            }
            if self.shapes.is_empty() {
                return Err(Error::Config("no shapes selected".into()));
            }
            for s in &self.shapes {
                s.validate()?;
            }
        }
        if runs(Suite::Transport) && self.transport_resolutions.is_empty() {
            return Err(Error::Config("transport needs at least one resolution".into()));
        }
        if runs(Suite::Ns) && self.ns_resolutions.len() < 2 {
            return Err(Error::Config("ns needs at least two resolutions".into()));
        }
        if runs(Suite::Evolve) {
            if !matches!(self.shape, ShapeSpec::Sphere { .. }) {
                return Err(Error::Config("evolve compares against the radial oscillation and needs a sphere".into()));
            }
            self.shape.validate()?;
            if self.wave_sign != 1.0 && self.wave_sign != -1.0 {
                return Err(Error::Config("wave_sign must be +1 or -1".into()));
            }
            if self.steps == 0 || self.wave_periods == 0 {
                return Err(Error::Config("steps and wave_periods must be positive".into()));
            }
            if !(self.rho0 > 0.0 && self.lambda0 > 0.0) {
                return Err(Error::Config("rho0 and lambda0 must be positive".into()));
            }
        }
        if runs(Suite::Laws) && self.members == 0 {
            return Err(Error::Config("members must be positive".into()));
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list(value: &str, sep: char) -> impl Iterator<Item = String> + '_ {
    value.split(sep).map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

/// `64` or `64x128`.
pub fn parse_resolution(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once('x').unwrap_or((s, s));
    Ok((num("resolution", a)?, num("resolution", b)?))
}

/// `name(a, b, ...)` or a bare `name`.
fn call(s: &str) -> Result<(String, Vec<f64>)> {
    let s = s.trim();
    match s.split_once('(') {
        None => Ok((s.to_string(), Vec::new())),
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{s}`")))?;
            let args = list(inner, ',').map(|a| num(name, &a)).collect::<Result<_>>()?;
            Ok((name.trim().to_string(), args))
        }
    }
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<()> {
    if args.len() == n {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` takes {n} arguments, got {}", args.len())))
    }
}

/// `sphere(r)`, `torus(a, b)`, `ellipsoid(a, b, c)`, `plane`.
pub fn parse_shape(s: &str) -> Result<ShapeSpec> {
    let (name, a) = call(s)?;
    let shape = match name.as_str() {
        "sphere" => {
            arity(&name, &a, 1)?;
            ShapeSpec::Sphere { radius: a[0] }
        }
        "torus" => {
            arity(&name, &a, 2)?;
            ShapeSpec::Torus { major: a[0], minor: a[1] }
        }
        "ellipsoid" => {
            arity(&name, &a, 3)?;
            ShapeSpec::Ellipsoid { a: a[0], b: a[1], c: a[2] }
        }
        "plane" => {
            arity(&name, &a, 0)?;
            ShapeSpec::Graph { height: crate::shape::GraphHeight::Flat }
        }
        _ => return Err(Error::UnknownShape(name)),
    };
    shape.validate()?;
    Ok(shape)
}

/// `expanding_sphere(r0, rate)`, `oscillating_ellipsoid(a, b, c, amplitude, omega)`,
/// `breathing_sphere(r, amplitude, omega)`, `torus_slide(a, b, rate_u, rate_v)`.
pub fn parse_motion(s: &str) -> Result<Motion> {
    let (name, a) = call(s)?;
    Ok(match name.as_str() {
        "expanding_sphere" => {
            arity(&name, &a, 2)?;
            Motion::ExpandingSphere { r0: a[0], rate: a[1] }
        }
        "oscillating_ellipsoid" => {
            arity(&name, &a, 5)?;
            Motion::OscillatingEllipsoid { a: a[0], b: a[1], c: a[2], amplitude: a[3], omega: a[4], isochoric: false }
        }
        "breathing_sphere" => {
            arity(&name, &a, 3)?;
            Motion::BreathingRadial {
                radius: a[0],
                amplitude: a[1],
                omega: a[2],
                harmonic: crate::shape::RadialHarmonic::Zonal2,
            }
        }
        "torus_slide" => {
            arity(&name, &a, 4)?;
            Motion::TangentialSlide {
                shape: ShapeSpec::Torus { major: a[0], minor: a[1] },
                rate_u: a[2],
                rate_v: a[3],
            }
        }
        _ => return Err(Error::Config(format!("unknown motion `{name}`"))),
    })
}

/// `rest(p0)`, `rotation(omega, rho)`, `shear(amplitude, p0)`, `dilation(alpha, p0)`,
/// `vortex(omega, width, rho)`.
pub fn parse_flow(s: &str) -> Result<FlowCase> {
    let (name, a) = call(s)?;
    Ok(match name.as_str() {
        "rest" => {
            arity(&name, &a, 1)?;
            FlowCase::Rest { p0: a[0] }
        }
        "rotation" => {
            arity(&name, &a, 2)?;
            FlowCase::RigidRotation { omega: a[0], rho: a[1] }
        }
        "shear" => {
            arity(&name, &a, 2)?;
            FlowCase::Shear { amplitude: a[0], p0: a[1] }
        }
        "dilation" => {
            arity(&name, &a, 2)?;
            FlowCase::Dilation { alpha: a[0], p0: a[1] }
        }
        "vortex" => {
            arity(&name, &a, 3)?;
            FlowCase::Vortex { omega: a[0], width: a[1], rho: a[2] }
        }
        _ => return Err(Error::Config(format!("unknown flow `{name}`"))),
    })
}

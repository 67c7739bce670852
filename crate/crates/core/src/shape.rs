//! Analytic surface catalogue and the embedding of chart grids.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::chart::{AxisKind, ChartGrid};
use crate::error::{Error, Result};

/// Height function of a graph patch `z = f(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphHeight {
    Flat,
    /// `z = amplitude · cos(kx x) · cos(ky y)`
    Waves { amplitude: f64, kx: f64, ky: f64 },
}

impl GraphHeight {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            GraphHeight::Flat => 0.0,
            GraphHeight::Waves { amplitude, kx, ky } => amplitude * (kx * x).cos() * (ky * y).cos(),
        }
    }
}

/// Angular profile of a radial graph, as a function of the unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadialHarmonic {
    /// `z² − 1/3`
    Zonal2,
    /// `x · y`
    Sectoral2,
}

impl RadialHarmonic {
    pub fn eval(&self, dir: &Vector3<f64>) -> f64 {
        match self {
            RadialHarmonic::Zonal2 => dir.z * dir.z - 1.0 / 3.0,
            RadialHarmonic::Sectoral2 => dir.x * dir.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeSpec {
    /// `u` colatitude, `v` longitude.
    Sphere { radius: f64 },
    /// `u` angle around the symmetry axis, `v` angle on the tube.
    Torus { major: f64, minor: f64 },
    /// Latitude-longitude chart, semi-axes along x, y, z.
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// `(u, v, f(u, v))`.
    Graph { height: GraphHeight },
    /// `r(n) = radius · (1 + amplitude · Y(n))` over the unit direction `n`.
    RadialGraph { radius: f64, amplitude: f64, harmonic: RadialHarmonic },
}

/// Unit direction of a latitude-longitude chart point.
pub fn direction(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

impl ShapeSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeSpec::Sphere { .. } => "sphere",
            ShapeSpec::Torus { .. } => "torus",
            ShapeSpec::Ellipsoid { .. } => "ellipsoid",
            ShapeSpec::Graph { .. } => "graph",
            ShapeSpec::RadialGraph { .. } => "radial",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidShape(format!("{name} must be positive, got {x}")))
            }
        };
        match *self {
            ShapeSpec::Sphere { radius } => positive("radius", radius),
            ShapeSpec::Torus { major, minor } => {
                positive("major", major)?;
                positive("minor", minor)?;
                if minor >= major {
                    return Err(Error::InvalidShape(format!("torus minor {minor} must be below major {major}")));
                }
                Ok(())
            }
            ShapeSpec::Ellipsoid { a, b, c } => {
                positive("a", a)?;
                positive("b", b)?;
                positive("c", c)
            }
            ShapeSpec::Graph { height } => match height {
                GraphHeight::Flat => Ok(()),
                GraphHeight::Waves { amplitude, kx, ky } => {
                    if amplitude.is_finite() && kx.is_finite() && ky.is_finite() {
                        Ok(())
                    } else {
                        Err(Error::InvalidShape("graph wave parameters must be finite".into()))
                    }
                }
            },
            ShapeSpec::RadialGraph { radius, amplitude, .. } => {
                positive("radius", radius)?;
                // keeps r(n) > 0 for both harmonics, whose magnitude is at most 2/3
                if amplitude.abs() >= 1.5 {
                    return Err(Error::InvalidShape(format!("radial amplitude {amplitude} too large")));
                }
                Ok(())
            }
        }
    }

    /// Whether the shape uses a latitude-longitude chart.
    pub fn is_lat_long(&self) -> bool {
        matches!(self, ShapeSpec::Sphere { .. } | ShapeSpec::Ellipsoid { .. } | ShapeSpec::RadialGraph { .. })
    }

    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        match *self {
            ShapeSpec::Sphere { radius } => direction(u, v) * radius,
            ShapeSpec::Torus { major, minor } => {
                let ring = major + minor * v.cos();
                Vector3::new(ring * u.cos(), ring * u.sin(), minor * v.sin())
            }
            ShapeSpec::Ellipsoid { a, b, c } => {
                let d = direction(u, v);
                Vector3::new(a * d.x, b * d.y, c * d.z)
            }
            ShapeSpec::Graph { height } => Vector3::new(u, v, height.eval(u, v)),
            ShapeSpec::RadialGraph { radius, amplitude, harmonic } => {
                let d = direction(u, v);
                d * (radius * (1.0 + amplitude * harmonic.eval(&d)))
            }
        }
    }

    /// A chart of the natural kind for this shape with `n_u × n_v` nodes.
    pub fn default_chart(&self, n_u: usize, n_v: usize) -> Result<ChartGrid> {
        use crate::chart::Axis;
        match self {
            ShapeSpec::Sphere { .. } | ShapeSpec::Ellipsoid { .. } | ShapeSpec::RadialGraph { .. } => {
                ChartGrid::lat_long(n_u, n_v)
            }
            ShapeSpec::Torus { .. } => ChartGrid::doubly_periodic(n_u, n_v),
            ShapeSpec::Graph { .. } => ChartGrid::new(Axis::open(n_u, -1.0, 1.0), Axis::open(n_v, -1.0, 1.0)),
        }
    }

    pub fn check_topology(&self, chart: &ChartGrid) -> Result<()> {
        let full_turn = |axis: &crate::chart::Axis| {
            axis.kind == AxisKind::Periodic && (axis.n as f64 * axis.h - TAU).abs() < 1e-12
        };
        if self.is_lat_long() {
            if !full_turn(&chart.v) {
                return Err(Error::TopologyMismatch(format!("{} needs a periodic 2π longitude axis", self.name())));
            }
            match chart.u.kind {
                AxisKind::PoleReflect => Ok(()),
                AxisKind::Open if chart.u.start >= -1e-14 && chart.u.end() <= PI + 1e-14 => Ok(()),
                _ => Err(Error::TopologyMismatch(format!("{} needs a colatitude axis inside [0, π]", self.name()))),
            }
        } else if let ShapeSpec::Torus { .. } = self {
            if full_turn(&chart.u) && full_turn(&chart.v) {
                Ok(())
            } else {
                Err(Error::TopologyMismatch("torus needs both axes periodic over 2π".into()))
            }
        } else {
            let t = chart.translation();
            for (name, axis, shift) in [("u", &chart.u, t[0]), ("v", &chart.v, t[1])] {
                if axis.kind == AxisKind::Periodic && shift == Vector3::zeros() {
                    return Err(Error::TopologyMismatch(format!(
                        "{} on a periodic {name} axis needs a translation",
                        self.name()
                    )));
                }
            }
            Ok(())
        }
    }
}

/// Position of every chart node on the shape.
pub fn embed(chart: &ChartGrid, shape: &ShapeSpec) -> Result<Vec<Vector3<f64>>> {
    shape.validate()?;
    shape.check_topology(chart)?;
    let r = chart.sample(|u, v| shape.point(u, v));
    for (k, p) in r.iter().enumerate() {
        if chart.is_valid(k) && !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
            return Err(Error::InvalidShape(format!("non-finite position at node {k}")));
        }
    }
    Ok(r)
}

/// Closed-form geometry of the catalogue shapes, used as oracles.
pub mod reference {
    use nalgebra::{Matrix2, Vector3};

    use super::{direction, ShapeSpec};

    #[derive(Debug, Clone, Copy)]
    pub struct PointGeometry {
        pub metric: Matrix2<f64>,
        pub sqrt_det: f64,
        /// `christoffel[k][(i, j)] = Γ^k_ij`; absent when only curvature is known in closed form.
        pub christoffel: Option<[Matrix2<f64>; 2]>,
        /// Mean curvature with the outward normal (sphere: −2/R).
        pub mean: f64,
        pub gauss: f64,
    }

    pub fn at(shape: &ShapeSpec, u: f64, v: f64) -> Option<PointGeometry> {
        match *shape {
            ShapeSpec::Sphere { radius: r } => {
                let (s, c) = u.sin_cos();
                Some(PointGeometry {
                    metric: Matrix2::new(r * r, 0.0, 0.0, r * r * s * s),
                    sqrt_det: r * r * s,
                    christoffel: Some([
                        Matrix2::new(0.0, 0.0, 0.0, -s * c),
                        Matrix2::new(0.0, c / s, c / s, 0.0),
                    ]),
                    mean: -2.0 / r,
                    gauss: 1.0 / (r * r),
                })
            }
            ShapeSpec::Torus { major: a, minor: b } => {
                let (s, c) = v.sin_cos();
                let ring = a + b * c;
                Some(PointGeometry {
                    metric: Matrix2::new(ring * ring, 0.0, 0.0, b * b),
                    sqrt_det: ring * b,
                    christoffel: Some([
                        Matrix2::new(0.0, -b * s / ring, -b * s / ring, 0.0),
                        Matrix2::new(ring * s / b, 0.0, 0.0, 0.0),
                    ]),
                    mean: -c / ring - 1.0 / b,
                    gauss: c / (b * ring),
                })
            }
            ShapeSpec::Ellipsoid { a, b, c } => {
                let d = direction(u, v);
                let p = Vector3::new(a * d.x, b * d.y, c * d.z);
                let inv2 = Vector3::new(1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c));
                let g = p.component_mul(&inv2);
                let gn = g.norm();
                let div = inv2.sum() / gn - g.dot(&g.component_mul(&inv2)) / gn.powi(3);
                let q = (p.x * p.x) / a.powi(4) + (p.y * p.y) / b.powi(4) + (p.z * p.z) / c.powi(4);
                // metric from the analytic tangent vectors
                let (st, ct) = u.sin_cos();
                let (sp, cp) = v.sin_cos();
                let su = Vector3::new(a * ct * cp, b * ct * sp, -c * st);
                let sv = Vector3::new(-a * st * sp, b * st * cp, 0.0);
                let metric = Matrix2::new(su.dot(&su), su.dot(&sv), su.dot(&sv), sv.dot(&sv));
                Some(PointGeometry {
                    metric,
                    sqrt_det: metric.determinant().sqrt(),
                    christoffel: None,
                    mean: -div,
                    gauss: 1.0 / ((a * b * c).powi(2) * q * q),
                })
            }
            ShapeSpec::Graph { height: super::GraphHeight::Flat } => Some(PointGeometry {
                metric: Matrix2::identity(),
                sqrt_det: 1.0,
                christoffel: Some([Matrix2::zeros(), Matrix2::zeros()]),
                mean: 0.0,
                gauss: 0.0,
            }),
            _ => None,
        }
    }

    pub fn area(shape: &ShapeSpec) -> Option<f64> {
        use std::f64::consts::PI;
        match *shape {
            ShapeSpec::Sphere { radius } => Some(4.0 * PI * radius * radius),
            ShapeSpec::Torus { major, minor } => Some(4.0 * PI * PI * major * minor),
            _ => None,
        }
    }

    pub fn volume(shape: &ShapeSpec) -> Option<f64> {
        use std::f64::consts::PI;
        match *shape {
            ShapeSpec::Sphere { radius } => Some(4.0 / 3.0 * PI * radius.powi(3)),
            ShapeSpec::Ellipsoid { a, b, c } => Some(4.0 / 3.0 * PI * a * b * c),
            ShapeSpec::Torus { major, minor } => Some(2.0 * PI * PI * major * minor * minor),
            _ => None,
        }
    }
}

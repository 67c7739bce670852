//! Static differential geometry of a sampled surface.
//!
//! Index conventions used throughout the crate:
//! - `christoffel[k][(i, j)] = Γ^k_ij`
//! - a mixed tensor `T_a^b` is stored as a `Matrix2` with row `a` (lower) and
//!   column `b` (upper)
//! - rank-1 fields are `Vector2` holding either contravariant or covariant
//!   components, as named by the surrounding API.

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::chart::{ChartGrid, Dir};
use crate::error::{check_len, Error, Result};
use crate::shape::{embed, ShapeSpec};
use crate::stencil::Order;

/// Relative metric determinant below which a node counts as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Normal orientation used when curvature enters a material law.
///
/// Geometry is always computed with the outward normal, so a sphere of radius
/// `R` has mean curvature `−2/R`. `ConvexPositive` flips the sign so convex
/// shapes carry positive curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CurvatureSign {
    #[default]
    Outward,
    ConvexPositive,
}

impl CurvatureSign {
    pub fn factor(self) -> f64 {
        match self {
            CurvatureSign::Outward => 1.0,
            CurvatureSign::ConvexPositive => -1.0,
        }
    }

    pub fn from_factor(f: f64) -> Result<Self> {
        if f == 1.0 {
            Ok(CurvatureSign::Outward)
        } else if f == -1.0 {
            Ok(CurvatureSign::ConvexPositive)
        } else {
            Err(Error::InvalidParameter(format!("curvature sign must be +1 or -1, got {f}")))
        }
    }
}

/// Output of the first fundamental form.
#[derive(Debug, Clone)]
pub struct MetricFields {
    pub metric: Vec<Matrix2<f64>>,
    pub inverse: Vec<Matrix2<f64>>,
    pub sqrt_det: Vec<f64>,
    /// Nodes whose metric is degenerate (only ever masked nodes).
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct GeometryState {
    pub chart: ChartGrid,
    pub position: Vec<Vector3<f64>>,
    pub basis: Vec<[Vector3<f64>; 2]>,
    /// Second partials `[R_uu, R_uv, R_vv]`.
    pub second: Vec<[Vector3<f64>; 3]>,
    pub metric: Vec<Matrix2<f64>>,
    pub inv_metric: Vec<Matrix2<f64>>,
    pub sqrt_det: Vec<f64>,
    pub normal: Vec<Vector3<f64>>,
    pub christoffel: Vec<[Matrix2<f64>; 2]>,
    /// `B_ij`
    pub curvature: Vec<Matrix2<f64>>,
    /// `B_i^i`
    pub mean: Vec<f64>,
    /// `det(B_i^j)`
    pub gauss: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// `S_i = ∂_i R`.
pub fn covariant_basis(r: &[Vector3<f64>], chart: &ChartGrid) -> Result<Vec<[Vector3<f64>; 2]>> {
    check_len(r, chart.len())?;
    chart.ensure_stencil_width()?;
    let p = chart.periodic_part(r);
    let [su, sv] = chart.drift();
    let du = chart.diff(&p, Dir::U, Order::First);
    let dv = chart.diff(&p, Dir::V, Order::First);
    Ok(du.into_iter().zip(dv).map(|(a, b)| [a + su, b + sv]).collect())
}

/// `[∂_uu R, ∂_uv R, ∂_vv R]`, the mixed partial taken once so it is symmetric.
pub fn second_partials(r: &[Vector3<f64>], chart: &ChartGrid) -> Result<Vec<[Vector3<f64>; 3]>> {
    check_len(r, chart.len())?;
    chart.ensure_stencil_width()?;
    let p = chart.periodic_part(r);
    let uu = chart.diff(&p, Dir::U, Order::Second);
    let vv = chart.diff(&p, Dir::V, Order::Second);
    let dv = chart.diff(&p, Dir::V, Order::First);
    let uv = chart.diff(&dv, Dir::U, Order::First);
    Ok((0..p.len()).map(|k| [uu[k], uv[k], vv[k]]).collect())
}

/// `S_ij = S_i·S_j`, its inverse and `√S`.
///
/// A node whose determinant falls below `DEGENERACY_TOLERANCE × mean` is an
/// error unless the chart masks it; masked degenerate nodes get NaN inverses.
pub fn first_fundamental(basis: &[[Vector3<f64>; 2]], chart: &ChartGrid) -> Result<MetricFields> {
    check_len(basis, chart.len())?;
    let metric: Vec<Matrix2<f64>> = basis
        .iter()
        .map(|[a, b]| {
            let off = a.dot(b);
            Matrix2::new(a.dot(a), off, off, b.dot(b))
        })
        .collect();
    let dets: Vec<f64> = metric.iter().map(|m| m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).collect();
    let mean_det = dets.iter().sum::<f64>() / dets.len() as f64;
    let threshold = DEGENERACY_TOLERANCE * mean_det.abs();
    let mut inverse = Vec::with_capacity(metric.len());
    let mut sqrt_det = Vec::with_capacity(metric.len());
    let mut degenerate = Vec::with_capacity(metric.len());
    for (k, (m, &det)) in metric.iter().zip(&dets).enumerate() {
        let bad = !(det > threshold) || !det.is_finite();
        if bad && chart.is_valid(k) {
            let (i, j) = chart.ij(k);
            return Err(Error::DegenerateChart { i, j, det });
        }
        degenerate.push(bad);
        if bad {
            inverse.push(Matrix2::from_element(f64::NAN));
            sqrt_det.push(0.0);
        } else {
            inverse.push(Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det);
            sqrt_det.push(det.sqrt());
        }
    }
    Ok(MetricFields { metric, inverse, sqrt_det, degenerate })
}

/// `N = S_1 × S_2 / |S_1 × S_2|`.
pub fn unit_normal(basis: &[[Vector3<f64>; 2]], chart: &ChartGrid) -> Result<Vec<Vector3<f64>>> {
    check_len(basis, chart.len())?;
    let norms: Vec<f64> = basis.iter().map(|[a, b]| a.cross(b).norm()).collect();
    let scale = norms.iter().sum::<f64>() / norms.len() as f64;
    basis
        .iter()
        .zip(&norms)
        .enumerate()
        .map(|(k, ([a, b], &n))| {
            if n > DEGENERACY_TOLERANCE.sqrt() * scale {
                Ok(a.cross(b) / n)
            } else if chart.is_valid(k) {
                let (i, j) = chart.ij(k);
                Err(Error::DegenerateChart { i, j, det: n * n })
            } else {
                Ok(Vector3::from_element(f64::NAN))
            }
        })
        .collect()
}

/// `Γ^k_ij = ½ S^km (∂_i S_mj + ∂_j S_mi − ∂_m S_ij)` from differentiated metric samples.
pub fn christoffel(metric: &MetricFields, chart: &ChartGrid) -> Result<Vec<[Matrix2<f64>; 2]>> {
    check_len(&metric.metric, chart.len())?;
    let du = chart.diff(&metric.metric, Dir::U, Order::First);
    let dv = chart.diff(&metric.metric, Dir::V, Order::First);
    Ok((0..chart.len())
        .map(|k| {
            let d = [du[k], dv[k]];
            // first kind: Γ_mij = ½(∂_i S_mj + ∂_j S_mi − ∂_m S_ij)
            let first = |m: usize, i: usize, j: usize| 0.5 * (d[i][(m, j)] + d[j][(m, i)] - d[m][(i, j)]);
            let inv = &metric.inverse[k];
            let mut out = [Matrix2::zeros(); 2];
            for (kk, g) in out.iter_mut().enumerate() {
                for i in 0..2 {
                    for j in i..2 {
                        let val = inv[(kk, 0)] * first(0, i, j) + inv[(kk, 1)] * first(1, i, j);
                        g[(i, j)] = val;
                        g[(j, i)] = val;
                    }
                }
            }
            out
        })
        .collect())
}

/// `Γ^k_ij = S^k · ∂_i S_j` from the embedding (Gauss formula route).
pub fn christoffel_from_embedding(
    basis: &[[Vector3<f64>; 2]],
    second: &[[Vector3<f64>; 3]],
    inv_metric: &[Matrix2<f64>],
) -> Vec<[Matrix2<f64>; 2]> {
    basis
        .iter()
        .zip(second)
        .zip(inv_metric)
        .map(|((s, r2), inv)| {
            let contra = [s[0] * inv[(0, 0)] + s[1] * inv[(0, 1)], s[0] * inv[(1, 0)] + s[1] * inv[(1, 1)]];
            let mut out = [Matrix2::zeros(); 2];
            for (kk, g) in out.iter_mut().enumerate() {
                let uu = contra[kk].dot(&r2[0]);
                let uv = contra[kk].dot(&r2[1]);
                let vv = contra[kk].dot(&r2[2]);
                *g = Matrix2::new(uu, uv, uv, vv);
            }
            out
        })
        .collect()
}

/// Mixed form `B_i^j = B_ik S^kj`, row `i`, column `j`.
pub fn mixed(lower: &Matrix2<f64>, inv_metric: &Matrix2<f64>) -> Matrix2<f64> {
    lower * inv_metric
}

/// `B_ij = N·(∂_i S_j − Γ^k_ij S_k)`, `H = S^ij B_ij`, `K = det(B_i^j)`.
#[allow(clippy::type_complexity)]
pub fn curvature(
    basis: &[[Vector3<f64>; 2]],
    second: &[[Vector3<f64>; 3]],
    normal: &[Vector3<f64>],
    gamma: &[[Matrix2<f64>; 2]],
    inv_metric: &[Matrix2<f64>],
) -> (Vec<Matrix2<f64>>, Vec<f64>, Vec<f64>) {
    let n = basis.len();
    let mut b = Vec::with_capacity(n);
    let mut h = Vec::with_capacity(n);
    let mut kg = Vec::with_capacity(n);
    for k in 0..n {
        let s = &basis[k];
        let r2 = &second[k];
        let g = &gamma[k];
        let comp = |i: usize, j: usize, rij: &Vector3<f64>| {
            let cov = rij - s[0] * g[0][(i, j)] - s[1] * g[1][(i, j)];
            normal[k].dot(&cov)
        };
        let b00 = comp(0, 0, &r2[0]);
        let b01 = comp(0, 1, &r2[1]);
        let b11 = comp(1, 1, &r2[2]);
        let bij = Matrix2::new(b00, b01, b01, b11);
        let m = mixed(&bij, &inv_metric[k]);
        h.push(m.trace());
        kg.push(m.determinant());
        b.push(bij);
    }
    (b, h, kg)
}

impl GeometryState {
    pub fn from_positions(chart: &ChartGrid, position: Vec<Vector3<f64>>) -> Result<Self> {
        let basis = covariant_basis(&position, chart)?;
        let second = second_partials(&position, chart)?;
        let metric = first_fundamental(&basis, chart)?;
        let normal = unit_normal(&basis, chart)?;
        let gamma = christoffel(&metric, chart)?;
        let (b, h, k) = curvature(&basis, &second, &normal, &gamma, &metric.inverse);
        Ok(GeometryState {
            chart: chart.clone(),
            position,
            basis,
            second,
            metric: metric.metric,
            inv_metric: metric.inverse,
            sqrt_det: metric.sqrt_det,
            normal,
            christoffel: gamma,
            curvature: b,
            mean: h,
            gauss: k,
            degenerate: metric.degenerate,
        })
    }

    pub fn from_shape(chart: &ChartGrid, shape: &ShapeSpec) -> Result<Self> {
        GeometryState::from_positions(chart, embed(chart, shape)?)
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    /// Nodes that take part in error norms.
    pub fn valid_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.chart.is_valid(k) && !self.degenerate[k])
    }

    /// Contravariant base vectors `S^i = S^ij S_j`.
    pub fn contravariant_basis(&self, k: usize) -> [Vector3<f64>; 2] {
        let s = &self.basis[k];
        let inv = &self.inv_metric[k];
        [s[0] * inv[(0, 0)] + s[1] * inv[(0, 1)], s[0] * inv[(1, 0)] + s[1] * inv[(1, 1)]]
    }

    /// `B_i^j`, row `i`, column `j`.
    pub fn mixed_curvature(&self, k: usize) -> Matrix2<f64> {
        mixed(&self.curvature[k], &self.inv_metric[k])
    }

    /// `B_ij B^ij`.
    pub fn curvature_squared(&self, k: usize) -> f64 {
        let m = self.mixed_curvature(k);
        (m * m).trace()
    }

    pub fn lower(&self, k: usize, up: &Vector2<f64>) -> Vector2<f64> {
        self.metric[k] * up
    }

    pub fn raise(&self, k: usize, down: &Vector2<f64>) -> Vector2<f64> {
        self.inv_metric[k] * down
    }

    /// Chart gradient `[∂_u f, ∂_v f]` (equal to the covariant gradient).
    pub fn gradient(&self, f: &[f64]) -> Vec<Vector2<f64>> {
        let du = self.chart.diff(f, Dir::U, Order::First);
        let dv = self.chart.diff(f, Dir::V, Order::First);
        du.into_iter().zip(dv).map(|(a, b)| Vector2::new(a, b)).collect()
    }

    /// Hessian of chart partials `∂_i∂_j f`.
    pub fn partial_hessian(&self, f: &[f64]) -> Vec<Matrix2<f64>> {
        let uu = self.chart.diff(f, Dir::U, Order::Second);
        let vv = self.chart.diff(f, Dir::V, Order::Second);
        let dv = self.chart.diff(f, Dir::V, Order::First);
        let uv = self.chart.diff(&dv, Dir::U, Order::First);
        (0..f.len()).map(|k| Matrix2::new(uu[k], uv[k], uv[k], vv[k])).collect()
    }
}

/// Tensor fields of rank ≤ 2 on the chart.
#[derive(Debug, Clone)]
pub enum TensorField {
    Scalar(Vec<f64>),
    /// `T^i`
    Vector(Vec<Vector2<f64>>),
    /// `T_i`
    Covector(Vec<Vector2<f64>>),
    /// `T_ij`
    Lower(Vec<Matrix2<f64>>),
    /// `T_a^b`, row `a`, column `b`
    Mixed(Vec<Matrix2<f64>>),
}

impl TensorField {
    pub fn len(&self) -> usize {
        match self {
            TensorField::Scalar(v) => v.len(),
            TensorField::Vector(v) | TensorField::Covector(v) => v.len(),
            TensorField::Lower(v) | TensorField::Mixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rank(&self) -> usize {
        match self {
            TensorField::Scalar(_) => 0,
            TensorField::Vector(_) | TensorField::Covector(_) => 1,
            TensorField::Lower(_) | TensorField::Mixed(_) => 2,
        }
    }
}

/// `∇_k T` indexed by the derivative slot first.
#[derive(Debug, Clone)]
pub enum CovariantGradient {
    /// `∇_k f`
    Scalar(Vec<Vector2<f64>>),
    /// `out[(k, i)] = ∇_k T^i` or `∇_k T_i`
    Rank1(Vec<Matrix2<f64>>),
    /// `out[k]` holds the rank-2 tensor `∇_k T` in the layout of the input
    Rank2(Vec<[Matrix2<f64>; 2]>),
}

/// Surface covariant derivative of a rank ≤ 2 field.
pub fn surface_covariant_derivative(field: &TensorField, g: &GeometryState) -> Result<CovariantGradient> {
    if field.len() != g.len() {
        return Err(Error::LengthMismatch { expected: g.len(), got: field.len() });
    }
    let c = &g.chart;
    let gm = &g.christoffel;
    Ok(match field {
        TensorField::Scalar(f) => CovariantGradient::Scalar(g.gradient(f)),
        TensorField::Vector(t) | TensorField::Covector(t) => {
            let upper = matches!(field, TensorField::Vector(_));
            let du = c.diff(t, Dir::U, Order::First);
            let dv = c.diff(t, Dir::V, Order::First);
            CovariantGradient::Rank1(
                (0..t.len())
                    .map(|n| {
                        let d = [du[n], dv[n]];
                        let mut out = Matrix2::zeros();
                        for k in 0..2 {
                            for i in 0..2 {
                                let mut val = d[k][i];
                                for m in 0..2 {
                                    if upper {
                                        val += gm[n][i][(k, m)] * t[n][m];
                                    } else {
                                        val -= gm[n][m][(k, i)] * t[n][m];
                                    }
                                }
                                out[(k, i)] = val;
                            }
                        }
                        out
                    })
                    .collect(),
            )
        }
        TensorField::Lower(t) | TensorField::Mixed(t) => {
            let second_upper = matches!(field, TensorField::Mixed(_));
            let du = c.diff(t, Dir::U, Order::First);
            let dv = c.diff(t, Dir::V, Order::First);
            CovariantGradient::Rank2(
                (0..t.len())
                    .map(|n| {
                        let d = [du[n], dv[n]];
                        let mut out = [Matrix2::zeros(); 2];
                        for (k, o) in out.iter_mut().enumerate() {
                            for a in 0..2 {
                                for b in 0..2 {
                                    let mut val = d[k][(a, b)];
                                    for m in 0..2 {
                                        val -= gm[n][m][(k, a)] * t[n][(m, b)];
                                        if second_upper {
                                            val += gm[n][b][(m, k)] * t[n][(a, m)];
                                        } else {
                                            val -= gm[n][m][(k, b)] * t[n][(a, m)];
                                        }
                                    }
                                    o[(a, b)] = val;
                                }
                            }
                        }
                        out
                    })
                    .collect(),
            )
        }
    })
}

/// `∇_i ∇^i f = S^ij (∂_i∂_j f − Γ^k_ij ∂_k f)`.
pub fn laplace_beltrami(f: &[f64], g: &GeometryState) -> Result<Vec<f64>> {
    check_len(f, g.len())?;
    let grad = g.gradient(f);
    let hess = g.partial_hessian(f);
    Ok((0..f.len())
        .map(|k| {
            let cov = hess[k] - g.christoffel[k][0] * grad[k][0] - g.christoffel[k][1] * grad[k][1];
            g.inv_metric[k].component_mul(&cov).sum()
        })
        .collect())
}

/// Surface divergence `∇_i T^i` of a contravariant field.
pub fn divergence(t: &[Vector2<f64>], g: &GeometryState) -> Result<Vec<f64>> {
    match surface_covariant_derivative(&TensorField::Vector(t.to_vec()), g)? {
        CovariantGradient::Rank1(d) => Ok(d.iter().map(|m| m.trace()).collect()),
        _ => unreachable!("rank-1 input"),
    }
}

/// `∫ f dS` with the per-axis weights of the chart.
pub fn integrate_surface(f: &[f64], g: &GeometryState) -> Result<f64> {
    check_len(f, g.len())?;
    let w = g.chart.weights();
    Ok((0..f.len())
        .filter(|&k| !g.degenerate[k])
        .map(|k| f[k] * g.sqrt_det[k] * w[k])
        .sum())
}

/// Enclosed volume `(1/3) ∮ R·N dS`.
pub fn integrate_enclosed_volume(g: &GeometryState) -> Result<f64> {
    if !g.chart.is_closed() {
        return Err(Error::OpenSurface);
    }
    let support: Vec<f64> = (0..g.len())
        .map(|k| if g.degenerate[k] { 0.0 } else { g.position[k].dot(&g.normal[k]) })
        .collect();
    Ok(integrate_surface(&support, g)? / 3.0)
}

/// CSV dump: node index, u, v, position, H, K.
pub fn write_geometry_csv(g: &GeometryState, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "node,u,v,x,y,z,H,K")?;
    for k in 0..g.len() {
        let (u, v) = g.chart.coords(k);
        let p = g.position[k];
        writeln!(
            w,
            "{k},{},{},{},{},{},{},{}",
            crate::report::fmt_f64(u),
            crate::report::fmt_f64(v),
            crate::report::fmt_f64(p.x),
            crate::report::fmt_f64(p.y),
            crate::report::fmt_f64(p.z),
            crate::report::fmt_f64(g.mean[k]),
            crate::report::fmt_f64(g.gauss[k])
        )?;
    }
    Ok(())
}

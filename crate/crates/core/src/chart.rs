//! Structured two-parameter sample grids.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use rayon::prelude::*;
use crate::error::{check_len, Error, Result};
use crate::stencil::{derivative_at, FieldValue, Order, MIN_OPEN_NODES};

/// How an axis behaves beyond its last node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AxisKind {
    /// Nodes wrap; `n * h` is the period.
    Periodic,
    /// Bounded axis, differentiated with biased stencils at the ends.
    Open,
    /// Colatitude axis of a latitude-longitude chart. Nodes sit at cell
    /// centres of `(0, π)`; values beyond a pole are read across it from the
    /// antipodal meridian.
    PoleReflect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub start: f64,
    pub h: f64,
    pub kind: AxisKind,
}

impl Axis {
    pub fn periodic(n: usize, start: f64, period: f64) -> Self {
        Axis { n, start, h: period / n as f64, kind: AxisKind::Periodic }
    }

    /// `n` nodes covering `[a, b]` including both ends.
    pub fn open(n: usize, a: f64, b: f64) -> Self {
        Axis { n, start: a, h: (b - a) / (n as f64 - 1.0), kind: AxisKind::Open }
    }

    pub fn colatitude(n: usize) -> Self {
        let h = PI / n as f64;
        Axis { n, start: 0.5 * h, h, kind: AxisKind::PoleReflect }
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + i as f64 * self.h
    }

    pub fn end(&self) -> f64 {
        self.coord(self.n - 1)
    }

    /// Quadrature weights of the nodes along this axis.
    ///
    /// Periodic axes use equal weights and open axes an end-corrected
    /// trapezoid rule exact for cubics. A
    /// colatitude axis uses Fejér's first rule in `cos θ` divided by `sin θ`,
    /// which integrates `f(θ) dθ` spectrally whenever `f / sin θ` is smooth on
    /// the sphere (the case for every `F √S` with `F` smooth).
    pub fn weights(&self) -> Vec<f64> {
        match self.kind {
            AxisKind::Periodic => vec![self.h; self.n],
            AxisKind::Open => {
                // end-corrected trapezoid, fourth order
                const END: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];
                (0..self.n)
                    .map(|i| {
                        let e = i.min(self.n - 1 - i);
                        self.h * END.get(e).copied().unwrap_or(1.0)
                    })
                    .collect()
            }
            AxisKind::PoleReflect => {
                let n = self.n;
                (0..n)
                    .map(|i| {
                        let theta = self.coord(i);
                        let series: f64 = (1..=n / 2)
                            .map(|k| {
                                let k = k as f64;
                                (2.0 * k * theta).cos() / (4.0 * k * k - 1.0)
                            })
                            .sum();
                        (2.0 / n as f64) * (1.0 - 2.0 * series) / theta.sin()
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    U,
    V,
}

/// Sample grid over chart coordinates `(u, v)`; node `(i, j)` is stored at
/// `i * n_v + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGrid {
    pub u: Axis,
    pub v: Axis,
    valid: Vec<bool>,
    /// Shift of the embedding over one period of each axis,
    /// `R(u + P_u, v) = R(u, v) + translation[0]`.
    translation: [Vector3<f64>; 2],
}

impl ChartGrid {
    pub fn new(u: Axis, v: Axis) -> Result<Self> {
        for (name, axis) in [("u", &u), ("v", &v)] {
            if axis.n < 8 {
                return Err(Error::InvalidChart(format!("axis {name} needs at least 8 nodes, got {}", axis.n)));
            }
            if !(axis.h > 0.0) || !axis.h.is_finite() {
                return Err(Error::InvalidChart(format!("axis {name} spacing must be positive, got {}", axis.h)));
            }
        }
        if v.kind == AxisKind::PoleReflect {
            return Err(Error::InvalidChart("pole reflection is only supported on the u axis".into()));
        }
        if u.kind == AxisKind::PoleReflect {
            if v.kind != AxisKind::Periodic || !v.n.is_multiple_of(2) {
                return Err(Error::InvalidChart(
                    "pole reflection needs a periodic v axis with an even node count".into(),
                ));
            }
            if ((v.n as f64 * v.h) - TAU).abs() > 1e-12 || ((u.n as f64 * u.h) - PI).abs() > 1e-12 {
                return Err(Error::InvalidChart("pole reflection needs u over (0, π) and v over 2π".into()));
            }
            if (u.start - 0.5 * u.h).abs() > 1e-14 {
                return Err(Error::InvalidChart("pole-reflected axis must be cell-centred".into()));
            }
        }
        let valid = vec![true; u.n * v.n];
        Ok(ChartGrid { u, v, valid, translation: [Vector3::zeros(); 2] })
    }

    /// Latitude-longitude chart on `(0, π) × [0, 2π)` with the two node rows
    /// nearest each pole masked.
    pub fn lat_long(n_theta: usize, n_phi: usize) -> Result<Self> {
        let mut chart = ChartGrid::new(Axis::colatitude(n_theta), Axis::periodic(n_phi, 0.0, TAU))?;
        for i in [0, 1, n_theta - 2, n_theta - 1] {
            for j in 0..n_phi {
                let k = chart.index(i, j);
                chart.valid[k] = false;
            }
        }
        Ok(chart)
    }

    /// Doubly periodic chart on `[0, 2π)²`.
    pub fn doubly_periodic(n_u: usize, n_v: usize) -> Result<Self> {
        ChartGrid::new(Axis::periodic(n_u, 0.0, TAU), Axis::periodic(n_v, 0.0, TAU))
    }

    /// Flat periodic patch `[0, l_u) × [0, l_v)` whose embedding repeats
    /// with shifts `(l_u, 0, 0)` and `(0, l_v, 0)`.
    pub fn periodic_patch(n_u: usize, n_v: usize, l_u: f64, l_v: f64) -> Result<Self> {
        ChartGrid::new(Axis::periodic(n_u, 0.0, l_u), Axis::periodic(n_v, 0.0, l_v))?
            .with_translation([Vector3::new(l_u, 0.0, 0.0), Vector3::new(0.0, l_v, 0.0)])
    }

    pub fn with_translation(mut self, translation: [Vector3<f64>; 2]) -> Result<Self> {
        for (axis, t) in [(&self.u, translation[0]), (&self.v, translation[1])] {
            if axis.kind != AxisKind::Periodic && t != Vector3::zeros() {
                return Err(Error::InvalidChart("only periodic axes can carry a translation".into()));
            }
        }
        self.translation = translation;
        Ok(self)
    }

    pub fn translation(&self) -> [Vector3<f64>; 2] {
        self.translation
    }

    /// `∂R/∂u` and `∂R/∂v` of the linear part carried by the translations.
    pub fn drift(&self) -> [Vector3<f64>; 2] {
        let per = |a: &Axis| a.n as f64 * a.h;
        [self.translation[0] / per(&self.u), self.translation[1] / per(&self.v)]
    }

    /// Embedding with the linear drift removed, periodic on every periodic axis.
    pub fn periodic_part(&self, r: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let [du, dv] = self.drift();
        (0..r.len())
            .map(|k| {
                let (u, v) = self.coords(k);
                r[k] - du * u - dv * v
            })
            .collect()
    }

    pub fn with_mask(mut self, valid: Vec<bool>) -> Result<Self> {
        check_len(&valid, self.len())?;
        self.valid = valid;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.u.n * self.v.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.v.n + j
    }

    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k / self.v.n, k % self.v.n)
    }

    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.ij(k);
        (self.u.coord(i), self.v.coord(j))
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid[k]
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    /// True when neither axis has an edge, i.e. the chart covers a closed surface.
    pub fn is_closed(&self) -> bool {
        self.u.kind != AxisKind::Open && self.v.kind != AxisKind::Open
    }

    /// Smallest chart spacing.
    pub fn min_spacing(&self) -> f64 {
        self.u.h.min(self.v.h)
    }

    /// Per-node quadrature weights for `∫ f du dv`.
    pub fn weights(&self) -> Vec<f64> {
        let wu = self.u.weights();
        let wv = self.v.weights();
        (0..self.len())
            .map(|k| {
                let (i, j) = self.ij(k);
                wu[i] * wv[j]
            })
            .collect()
    }

    pub fn ensure_stencil_width(&self) -> Result<()> {
        for (axis, a) in [("u", &self.u), ("v", &self.v)] {
            let need = if a.kind == AxisKind::Open { MIN_OPEN_NODES } else { 5 };
            if a.n < need {
                return Err(Error::InsufficientStencil { axis, need, have: a.n });
            }
        }
        Ok(())
    }

    fn fetch<T: FieldValue>(&self, field: &[T], dir: Dir, i: usize, j: usize, k: isize) -> T {
        let (nu, nv) = (self.u.n as isize, self.v.n as isize);
        match dir {
            Dir::U => match self.u.kind {
                AxisKind::Periodic | AxisKind::Open => field[self.index(k.rem_euclid(nu) as usize, j)],
                AxisKind::PoleReflect => {
                    let jj = (j + self.v.n / 2) % self.v.n;
                    if k < 0 {
                        field[self.index((-1 - k) as usize, jj)].pole_reflect()
                    } else if k >= nu {
                        field[self.index((2 * nu - 1 - k) as usize, jj)].pole_reflect()
                    } else {
                        field[self.index(k as usize, j)]
                    }
                }
            },
            Dir::V => field[self.index(i, k.rem_euclid(nv) as usize)],
        }
    }

    /// Partial derivative of a node field along one chart direction.
    pub fn diff<T: FieldValue>(&self, field: &[T], dir: Dir, order: Order) -> Vec<T> {
        debug_assert_eq!(field.len(), self.len());
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = self.ij(k);
                // differences against the node keep the stencil sums small
                let here = field[k];
                let get = |kk: isize| self.fetch(field, dir, i, j, kk) - here;
                match dir {
                    Dir::U => derivative_at(self.u.kind == AxisKind::Open, self.u.n, i, order, self.u.h, get),
                    Dir::V => derivative_at(self.v.kind == AxisKind::Open, self.v.n, j, order, self.v.h, get),
                }
            })
            .collect()
    }

    /// Sample a function of the chart coordinates at every node.
    pub fn sample<T>(&self, f: impl Fn(f64, f64) -> T) -> Vec<T> {
        (0..self.len())
            .map(|k| {
                let (u, v) = self.coords(k);
                f(u, v)
            })
            .collect()
    }
}

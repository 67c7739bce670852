//! Zonal Fourier filter for colatitude charts.
//!
//! On a latitude-longitude grid the longitudinal spacing shrinks like
//! `sin θ` towards the poles. Truncating each row to longitudinal
//! wavenumbers `m ≤ (n_φ / 2) sin θ` restores a uniform resolvable scale,
//! so explicit time steps are limited by the colatitude spacing only.

use std::sync::Arc;

use nalgebra::Vector3;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::chart::{AxisKind, ChartGrid};

pub struct PolarFilter {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Highest kept wavenumber per row, `None` when the row is untouched.
    cutoff: Vec<Option<usize>>,
    n_u: usize,
    n_v: usize,
}

impl std::fmt::Debug for PolarFilter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolarFilter").field("cutoff", &self.cutoff).finish()
    }
}

impl PolarFilter {
    /// `None` unless the chart has a colatitude axis.
    pub fn for_chart(chart: &ChartGrid) -> Option<Self> {
        if chart.u.kind != AxisKind::PoleReflect {
            return None;
        }
        let n_v = chart.v.n;
        let half = n_v / 2;
        let cutoff = (0..chart.u.n)
            .map(|i| {
                let m = (half as f64 * chart.u.coord(i).sin()).floor() as usize;
                (m < half).then_some(m.max(1))
            })
            .collect();
        let mut planner = FftPlanner::new();
        Some(PolarFilter {
            forward: planner.plan_fft_forward(n_v),
            inverse: planner.plan_fft_inverse(n_v),
            cutoff,
            n_u: chart.u.n,
            n_v,
        })
    }

    fn filter_row(&self, row: &mut [Complex<f64>], m: usize) {
        self.forward.process(row);
        let n = self.n_v;
        for (k, c) in row.iter_mut().enumerate() {
            let wave = k.min(n - k);
            if wave > m {
                *c = Complex::new(0.0, 0.0);
            }
        }
        self.inverse.process(row);
        let scale = 1.0 / n as f64;
        for c in row.iter_mut() {
            *c *= scale;
        }
    }

    pub fn apply(&self, field: &mut [f64]) {
        debug_assert_eq!(field.len(), self.n_u * self.n_v);
        let mut buf = vec![Complex::new(0.0, 0.0); self.n_v];
        for (i, m) in self.cutoff.iter().enumerate() {
            let Some(m) = *m else { continue };
            let row = &mut field[i * self.n_v..(i + 1) * self.n_v];
            for (b, x) in buf.iter_mut().zip(row.iter()) {
                *b = Complex::new(*x, 0.0);
            }
            self.filter_row(&mut buf, m);
            for (x, b) in row.iter_mut().zip(&buf) {
                *x = b.re;
            }
        }
    }

    pub fn apply_vectors(&self, field: &mut [Vector3<f64>]) {
        let mut comp = vec![0.0; field.len()];
        for c in 0..3 {
            for (x, v) in comp.iter_mut().zip(field.iter()) {
                *x = v[c];
            }
            self.apply(&mut comp);
            for (x, v) in comp.iter().zip(field.iter_mut()) {
                v[c] = *x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_zonal_and_low_modes() {
        let chart = ChartGrid::lat_long(32, 64).unwrap();
        let f = PolarFilter::for_chart(&chart).unwrap();
        let mut field = chart.sample(|t, p| t.cos() + t.sin() * p.cos());
        let orig = field.clone();
        f.apply(&mut field);
        let err = field.iter().zip(&orig).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn removes_grid_scale_noise_near_poles() {
        let chart = ChartGrid::lat_long(32, 64).unwrap();
        let f = PolarFilter::for_chart(&chart).unwrap();
        let mut field: Vec<f64> = (0..chart.len()).map(|k| if chart.ij(k).1.is_multiple_of(2) { 1.0 } else { -1.0 }).collect();
        f.apply(&mut field);
        assert!(field[..64].iter().all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn absent_without_colatitude_axis() {
        assert!(PolarFilter::for_chart(&ChartGrid::doubly_periodic(16, 16).unwrap()).is_none());
    }
}

//! Fourth-order finite-difference stencils on uniform lines.
//!
//! Interior nodes use centered five-point stencils. Open ends switch to
//! biased stencils of the same order, so every node of a line differentiates
//! at fourth order.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// A value that can be combined linearly by a stencil.
pub trait FieldValue: Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    /// The value as seen through a pole of a latitude-longitude chart, where
    /// the first chart coordinate flips sign. Components carrying an odd
    /// number of first-coordinate indices change sign.
    fn pole_reflect(self) -> Self {
        self
    }
}

impl FieldValue for f64 {}
impl FieldValue for Vector3<f64> {}
impl FieldValue for Matrix3<f64> {}

impl FieldValue for Vector2<f64> {
    fn pole_reflect(self) -> Self {
        Vector2::new(-self.x, self.y)
    }
}

impl FieldValue for Matrix2<f64> {
    fn pole_reflect(self) -> Self {
        Matrix2::new(self[(0, 0)], -self[(0, 1)], -self[(1, 0)], self[(1, 1)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    First,
    Second,
}

const FIRST_CENTERED: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
const SECOND_CENTERED: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
// offsets 0..=4
const FIRST_EDGE0: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0];
// offsets -1..=3
const FIRST_EDGE1: [f64; 5] = [-1.0 / 4.0, -5.0 / 6.0, 3.0 / 2.0, -1.0 / 2.0, 1.0 / 12.0];
// offsets 0..=5
const SECOND_EDGE0: [f64; 6] = [15.0 / 4.0, -77.0 / 6.0, 107.0 / 6.0, -13.0, 61.0 / 12.0, -5.0 / 6.0];
// offsets -1..=4
const SECOND_EDGE1: [f64; 6] = [5.0 / 6.0, -5.0 / 4.0, -1.0 / 3.0, 7.0 / 6.0, -1.0 / 2.0, 1.0 / 12.0];

/// Minimum number of nodes an open line needs for the biased stencils.
pub const MIN_OPEN_NODES: usize = 6;

fn combine<T: FieldValue>(weights: &[f64], first: isize, step: isize, get: &impl Fn(isize) -> T) -> T {
    let mut acc = get(first) * weights[0];
    for (k, w) in weights.iter().enumerate().skip(1) {
        if *w != 0.0 {
            acc = acc + get(first + step * k as isize) * *w;
        }
    }
    acc
}

/// Derivative at node `i` of a line of `n` nodes with spacing `h`.
///
/// When `open` is false, `get` must accept indices up to two nodes outside
/// `0..n` (periodic wrap or pole reflection is the caller's business).
pub fn derivative_at<T: FieldValue>(
    open: bool,
    n: usize,
    i: usize,
    order: Order,
    h: f64,
    get: impl Fn(isize) -> T,
) -> T {
    let i = i as isize;
    let n = n as isize;
    match order {
        Order::First => {
            let inv = 1.0 / h;
            if !open || (i >= 2 && i <= n - 3) {
                combine(&FIRST_CENTERED, i - 2, 1, &get) * inv
            } else if i == 0 {
                combine(&FIRST_EDGE0, 0, 1, &get) * inv
            } else if i == 1 {
                combine(&FIRST_EDGE1, 0, 1, &get) * inv
            } else if i == n - 1 {
                // mirrored stencil: reversed direction flips the sign
                combine(&FIRST_EDGE0, n - 1, -1, &get) * (-inv)
            } else {
                combine(&FIRST_EDGE1, n - 1, -1, &get) * (-inv)
            }
        }
        Order::Second => {
            let inv = 1.0 / (h * h);
            if !open || (i >= 2 && i <= n - 3) {
                combine(&SECOND_CENTERED, i - 2, 1, &get) * inv
            } else if i == 0 {
                combine(&SECOND_EDGE0, 0, 1, &get) * inv
            } else if i == 1 {
                combine(&SECOND_EDGE1, 0, 1, &get) * inv
            } else if i == n - 1 {
                combine(&SECOND_EDGE0, n - 1, -1, &get) * inv
            } else {
                combine(&SECOND_EDGE1, n - 1, -1, &get) * inv
            }
        }
    }
}

/// Centered fourth-order derivative of a scalar function at `x` with step `h`.
pub fn central_first(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Centered fourth-order second derivative of a scalar function.
pub fn central_second(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

//! Uniform periodic grids and point-sampled fields.
//!
//! A [`Grid`] of `n` points covers `[a, d)`; index `n` is identified with
//! index `0`. Difference operators wrap indices modulo `n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    a: f64,
    d: f64,
    n: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(a: f64, d: f64, n: usize) -> Result<Self> {
        if !a.is_finite() || !d.is_finite() {
            return Err(Error::Grid("endpoints must be finite".into()));
        }
        if d <= a {
            return Err(Error::Grid(format!("empty domain: d = {d} <= a = {a}")));
        }
        if n < Self::MIN_POINTS {
            return Err(Error::Grid(format!(
                "n = {n} is below the minimum of {}",
                Self::MIN_POINTS
            )));
        }
        if !n.is_multiple_of(2) {
            return Err(Error::Grid(format!("n = {n} must be even")));
        }
        Ok(Self { a, d, n })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn d(&self) -> f64 {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Period `L = d - a`.
    #[inline]
    pub fn length(&self) -> f64 {
        self.d - self.a
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length() / self.n as f64
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.a + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Distance between two sample points measured around the period.
    #[inline]
    pub fn periodic_distance(&self, i: usize, j: usize) -> f64 {
        let m = i.abs_diff(j);
        m.min(self.n - m) as f64 * self.dx()
    }

    #[inline]
    pub(crate) fn next(&self, j: usize) -> usize {
        if j + 1 == self.n {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub(crate) fn prev(&self, j: usize) -> usize {
        if j == 0 {
            self.n - 1
        } else {
            j - 1
        }
    }
}

/// Convenience wrapper matching the grid constructor.
pub fn make_grid(a: f64, d: f64, n: usize) -> Result<Grid> {
    Grid::new(a, d, n)
}

/// Point samples of a periodic function on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Field(format!(
                "expected {} samples, got {}",
                grid.n(),
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Field(format!("non-finite sample at index {j}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check. Used by steppers that
    /// inspect finiteness themselves.
    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n());
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.points().into_iter().map(f).collect())
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        Self::new(grid, vec![c; grid.n()])
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![0.0; grid.n()])
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.ensure_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        ))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// Rectangle (= periodic trapezoid) rule `sum_j f_j dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn ensure_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.values[j]
    }
}

/// Centered periodic difference `(f[j+1] - f[j-1]) / (2 dx)`.
pub fn derivative_x(f: &Field) -> Field {
    let g = *f.grid();
    let inv = 0.5 / g.dx();
    let v = f.values();
    Field::from_raw(
        g,
        (0..g.n())
            .map(|j| (v[g.next(j)] - v[g.prev(j)]) * inv)
            .collect(),
    )
}

/// Forward difference `(f[j+1] - f[j]) / dx`, the gradient at face `j + 1/2`.
pub fn forward_difference(f: &Field) -> Field {
    let g = *f.grid();
    let inv = 1.0 / g.dx();
    let v = f.values();
    Field::from_raw(g, (0..g.n()).map(|j| (v[g.next(j)] - v[j]) * inv).collect())
}

/// Backward difference `(f[j] - f[j-1]) / dx`.
pub fn backward_difference(f: &Field) -> Field {
    let g = *f.grid();
    let inv = 1.0 / g.dx();
    let v = f.values();
    Field::from_raw(g, (0..g.n()).map(|j| (v[j] - v[g.prev(j)]) * inv).collect())
}

/// Periodic second difference `(f[j+1] - 2 f[j] + f[j-1]) / dx^2`.
pub fn second_derivative_x(f: &Field) -> Field {
    let g = *f.grid();
    let inv = 1.0 / (g.dx() * g.dx());
    let v = f.values();
    Field::from_raw(
        g,
        (0..g.n())
            .map(|j| (v[g.next(j)] - 2.0 * v[j] + v[g.prev(j)]) * inv)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(n: usize) -> (Grid, Field) {
        let g = Grid::new(0.0, 2.0 * PI, n).unwrap();
        let f = Field::from_fn(g, f64::sin).unwrap();
        (g, f)
    }

    #[test]
    fn grid_spacing() {
        let g = make_grid(0.0, 2.0 * PI, 16).unwrap();
        assert!((g.dx() - PI / 8.0).abs() < 1e-15);
        assert_eq!(g.points().len(), 16);
        assert_eq!(g.x(0), 0.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(0.0, 1.0, 7).is_err());
        assert!(make_grid(1.0, 1.0, 16).is_err());
        assert!(make_grid(2.0, 1.0, 16).is_err());
        assert!(make_grid(0.0, 1.0, 6).is_err());
    }

    #[test]
    fn periodic_distance_wraps() {
        let g = make_grid(0.0, 8.0, 8).unwrap();
        assert_eq!(g.periodic_distance(0, 7), 1.0);
        assert_eq!(g.periodic_distance(1, 5), 4.0);
        assert_eq!(g.periodic_distance(3, 3), 0.0);
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = make_grid(0.0, 1.0, 8).unwrap();
        assert!(Field::new(g, vec![0.0; 7]).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn derivative_of_constant_is_exactly_zero() {
        let g = make_grid(0.0, 3.0, 32).unwrap();
        let f = Field::constant(g, 1.0).unwrap();
        assert!(derivative_x(&f).values().iter().all(|&v| v == 0.0));
        let f5 = Field::constant(g, 5.0).unwrap();
        assert!(second_derivative_x(&f5).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_of_sine() {
        let (_, f) = sine(256);
        let df = derivative_x(&f);
        let err = f
            .grid()
            .points()
            .iter()
            .zip(df.values())
            .fold(0.0_f64, |m, (x, d)| m.max((d - x.cos()).abs()));
        assert!(err < 1e-3, "err = {err}");
    }

    #[test]
    fn second_derivative_of_sine() {
        let (_, f) = sine(256);
        let d2 = second_derivative_x(&f);
        let err = f
            .grid()
            .points()
            .iter()
            .zip(d2.values())
            .fold(0.0_f64, |m, (x, d)| m.max((d + x.sin()).abs()));
        assert!(err < 1e-3, "err = {err}");
    }

    #[test]
    fn derivative_converges_at_second_order() {
        let err = |n| {
            let (g, f) = sine(n);
            let df = derivative_x(&f);
            g.points()
                .iter()
                .zip(df.values())
                .fold(0.0_f64, |m, (x, d)| m.max((d - x.cos()).abs()))
        };
        for n in [32, 64, 128] {
            let ratio = err(n) / err(2 * n);
            assert!((ratio - 4.0).abs() <= 0.4, "n = {n}, ratio = {ratio}");
        }
    }

    #[test]
    fn nyquist_mode_is_annihilated() {
        let g = make_grid(0.0, 1.0, 16).unwrap();
        let f = Field::new(
            g,
            (0..16)
                .map(|j| if j % 2 == 0 { 1.0 } else { -1.0 })
                .collect(),
        )
        .unwrap();
        assert!(derivative_x(&f).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hat_kink_gives_large_but_finite_curvature() {
        let g = make_grid(0.0, 2.0 * PI, 64).unwrap();
        let hat = Field::from_fn(g, |x| PI - (x - PI).abs()).unwrap();
        let d2 = second_derivative_x(&hat);
        assert!(d2.is_finite());
        assert!((d2[32] + 2.0 / g.dx()).abs() < 1e-9);
        assert!(d2[10].abs() < 1e-9);
    }

    #[test]
    fn centered_difference_telescopes() {
        let g = make_grid(-1.0, 2.0, 64).unwrap();
        let f = Field::from_fn(g, |x| (3.0 * x).exp().sin() + x * x).unwrap();
        let s: f64 = derivative_x(&f).integral();
        assert!(s.abs() < 1e-12, "sum = {s}");
    }
}

//! Uniform periodic spatial grids.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::PERIOD;

/// Uniform periodic grid `x_i = x_min + i * dx`, `i = 0..n_points`.
///
/// The right end `x_max = x_min + n_points * dx` is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    dx: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() || x_max <= x_min {
            return Err(Error::InvalidParameter(format!(
                "grid bounds [{x_min}, {x_max}) are not an increasing finite interval"
            )));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size {n_points} is not a power of two"
            )));
        }
        Ok(Self {
            x_min,
            dx: (x_max - x_min) / n_points as f64,
            n_points,
        })
    }

    /// Grid of `n_periods` lattice periods centred on `x = 0` with
    /// `points_per_period` samples each. Lattice sites fall on grid points.
    pub fn lattice(n_periods: usize, points_per_period: usize) -> Result<Self> {
        if n_periods == 0 || n_periods % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "period count {n_periods} must be even and positive"
            )));
        }
        let half = (n_periods / 2) as f64 * PERIOD;
        Self::new(-half, half, n_periods * points_per_period)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.length()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn length(&self) -> f64 {
        self.dx * self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / self.length();
        (0..n)
            .map(|i| {
                let m = if i < n.div_ceil(2) { i as isize } else { i as isize - n as isize };
                m as f64 * dk
            })
            .collect()
    }

    /// Number of samples per lattice period, if the spacing divides the period.
    pub fn points_per_period(&self) -> Option<usize> {
        let ppp = PERIOD / self.dx;
        let r = ppp.round();
        ((ppp - r).abs() < 1e-9 * r.max(1.0) && r >= 1.0).then_some(r as usize)
    }

    /// Number of whole periods spanned, if the box is commensurate with the lattice.
    pub fn periods(&self) -> Option<usize> {
        let p = self.length() / PERIOD;
        let r = p.round();
        ((p - r).abs() < 1e-9 * r.max(1.0) && r >= 1.0).then_some(r as usize)
    }

    /// Index offset of `x_min` in units of `dx`, if the grid is aligned with
    /// the lattice (grid points sit at integer multiples of `dx` from `x = 0`).
    pub(crate) fn aligned_origin(&self) -> Option<i64> {
        self.points_per_period()?;
        let o = self.x_min / self.dx;
        let r = o.round();
        ((o - r).abs() < 1e-7).then_some(r as i64)
    }

    pub fn same_as(&self, other: &SpatialGrid) -> bool {
        self.n_points == other.n_points
            && (self.x_min - other.x_min).abs() <= 1e-12 * self.length()
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
    }

    /// Index of the grid point closest to `x`, if inside the box.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = ((x - self.x_min) / self.dx).round();
        (i >= 0.0 && (i as usize) < self.n_points).then_some(i as usize)
    }
}

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::lattice::{LatticeParams, PlaneWaveBasis, PERIOD};

use super::packet::band_populations;

/// Slowly varying external potential added to the lattice.
#[derive(Debug, Clone, PartialEq)]
pub enum SlowPotential {
    Zero,
    /// `-v0 exp(-2 x^2 / w0^2) - f x`
    DipoleTilt { v0: f64, w0: f64, f: f64 },
    /// `-f x`
    Linear { f: f64 },
    /// Values on the propagation grid.
    Samples(Vec<f64>),
}

impl SlowPotential {
    /// Value at `x` for the analytic kinds; `None` for sampled potentials.
    pub fn value(&self, x: f64) -> Option<f64> {
        match *self {
            SlowPotential::Zero => Some(0.0),
            SlowPotential::DipoleTilt { v0, w0, f } => {
                Some(-v0 * (-2.0 * x * x / (w0 * w0)).exp() - f * x)
            }
            SlowPotential::Linear { f } => Some(-f * x),
            SlowPotential::Samples(_) => None,
        }
    }

    pub fn sample(&self, grid: &SpatialGrid) -> Result<Vec<f64>> {
        match self {
            SlowPotential::Samples(v) if v.len() != grid.len() => Err(Error::GridMismatch(format!(
                "potential has {} samples, grid has {}",
                v.len(),
                grid.len()
            ))),
            SlowPotential::Samples(v) => Ok(v.clone()),
            _ => Ok((0..grid.len()).map(|i| self.value(grid.x(i)).unwrap_or(0.0)).collect()),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            SlowPotential::Zero => "zero".into(),
            SlowPotential::DipoleTilt { v0, w0, f } => format!("dipole_tilt v0={v0} w0={w0} f={f}"),
            SlowPotential::Linear { f } => format!("linear f={f}"),
            SlowPotential::Samples(_) => "samples".into(),
        }
    }
}

/// Scalar wave function or two-component spinor sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub grid: SpatialGrid,
    /// One array for a scalar state, two for a spinor.
    pub components: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl WaveState {
    pub fn scalar(grid: SpatialGrid, psi: Vec<Complex64>) -> Result<Self> {
        Self::with_components(grid, vec![psi])
    }

    pub fn spinor(grid: SpatialGrid, upper: Vec<Complex64>, lower: Vec<Complex64>) -> Result<Self> {
        Self::with_components(grid, vec![upper, lower])
    }

    fn with_components(grid: SpatialGrid, components: Vec<Vec<Complex64>>) -> Result<Self> {
        if components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("component length differs from grid size".into()));
        }
        Ok(Self { grid, components, time: 0.0 })
    }

    pub fn is_spinor(&self) -> bool {
        self.components.len() == 2
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.components
                .iter_mut()
                .flat_map(|c| c.iter_mut())
                .for_each(|z| *z /= n);
        }
    }

    /// `sum_components |psi|^2` per grid point.
    pub fn density(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (acc, z) in d.iter_mut().zip(c) {
                *acc += z.norm_sqr();
            }
        }
        d
    }

    /// `|psi_1| + |psi_2|` per grid point (the modulus plotted for spinors).
    pub fn modulus_sum(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        for c in &self.components {
            for (acc, z) in d.iter_mut().zip(c) {
                *acc += z.norm();
            }
        }
        d
    }

    fn moment(&self, f: impl Fn(f64) -> f64) -> f64 {
        let d = self.density();
        let total: f64 = d.iter().sum();
        d.iter().enumerate().map(|(i, p)| f(self.grid.x(i)) * p).sum::<f64>() / total
    }

    pub fn center(&self) -> f64 {
        self.moment(|x| x)
    }

    pub fn width(&self) -> f64 {
        let m = self.center();
        self.moment(|x| (x - m) * (x - m)).sqrt()
    }

    /// Fraction of the norm at `x > x_cut`.
    pub fn transmitted_fraction(&self, x_cut: f64) -> f64 {
        self.moment(|x| if x > x_cut { 1.0 } else { 0.0 })
    }

    /// Largest density within `periods` lattice periods of either box edge,
    /// relative to the peak density.
    pub fn edge_ratio(&self, periods: f64) -> f64 {
        let d = self.density();
        let peak = d.iter().copied().fold(0.0, f64::max);
        let band = periods * PERIOD;
        let (lo, hi) = (self.grid.x_min() + band, self.grid.x_max() - band);
        let edge = d
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = self.grid.x(*i);
                x < lo || x >= hi
            })
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        if peak > 0.0 {
            edge / peak
        } else {
            0.0
        }
    }

    /// Mean density over consecutive bins of `points` samples; returns bin centres and values.
    pub fn binned_density(&self, points: usize) -> (Vec<f64>, Vec<f64>) {
        let d = self.density();
        let points = points.max(1);
        d.chunks(points)
            .enumerate()
            .map(|(b, chunk)| {
                let first = b * points;
                let mid = self.grid.x(first) + 0.5 * (chunk.len() - 1) as f64 * self.grid.dx();
                (mid, chunk.iter().sum::<f64>() / chunk.len() as f64)
            })
            .unzip()
    }

    /// `max |a - b|` over all components.
    pub fn sup_distance(&self, other: &WaveState) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Summary of a state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub time: f64,
    pub norm: f64,
    pub center: f64,
    pub width: f64,
    pub band_populations: Option<Vec<f64>>,
    pub transmitted_fraction: f64,
    pub density: Vec<f64>,
}

impl Observables {
    /// Band populations need a scalar state on a lattice-aligned grid and
    /// are computed only when `lattice` is given.
    pub fn of(
        state: &WaveState,
        x_cut: f64,
        lattice: Option<(&LatticeParams, &PlaneWaveBasis, usize)>,
    ) -> Result<Self> {
        let band_populations = match lattice {
            Some((p, b, n)) => Some(band_populations(state, p, b, n)?),
            None => None,
        };
        Ok(Self {
            time: state.time,
            norm: state.norm(),
            center: state.center(),
            width: state.width(),
            band_populations,
            transmitted_fraction: state.transmitted_fraction(x_cut),
            density: state.density(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(grid: &SpatialGrid, x0: f64, s: f64) -> Vec<Complex64> {
        grid.points()
            .iter()
            .map(|x| Complex64::new((-(x - x0).powi(2) / (4.0 * s * s)).exp(), 0.0))
            .collect()
    }

    #[test]
    fn symmetric_packet_is_centred() {
        let grid = SpatialGrid::lattice(64, 16).unwrap();
        let s = WaveState::scalar(grid, gaussian(&grid, 0.0, 5.0)).unwrap();
        assert!(s.center().abs() < 1e-8);
        assert!((s.width() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn transmitted_fraction_limits() {
        let grid = SpatialGrid::lattice(64, 16).unwrap();
        let s = WaveState::scalar(grid, gaussian(&grid, 60.0, 3.0)).unwrap();
        assert!((s.transmitted_fraction(20.0) - 1.0).abs() < 1e-12);
        assert!(s.transmitted_fraction(150.0) < 1e-12);
    }

    #[test]
    fn dipole_tilt_values() {
        let v = SlowPotential::DipoleTilt { v0: 2.0, w0: 1.0, f: 0.5 };
        assert_eq!(v.value(0.0), Some(-2.0));
        let x: f64 = 1.0;
        assert!((v.value(x).unwrap() - (-2.0 * (-2.0f64).exp() - 0.5)).abs() < 1e-15);
        let grid = SpatialGrid::lattice(2, 4).unwrap();
        assert!(SlowPotential::Samples(vec![0.0; 3]).sample(&grid).is_err());
    }

    #[test]
    fn binned_density_preserves_mass() {
        let grid = SpatialGrid::lattice(16, 8).unwrap();
        let s = WaveState::scalar(grid, gaussian(&grid, 3.0, 4.0)).unwrap();
        let (x, d) = s.binned_density(8);
        assert_eq!(x.len(), 16);
        let total: f64 = d.iter().sum::<f64>() * 8.0 * grid.dx();
        assert!((total - s.norm_sqr()).abs() < 1e-12);
    }
}

//! Bichromatic lattice Hamiltonian in a plane-wave basis and its Bloch spectrum.
//!
//! Scaled units throughout: positions in `1/k0`, energies in recoil units
//! `E_R`, `hbar = 1`, `M = 1/2`. The lattice period is `d = pi` and the first
//! Brillouin zone is `kappa in [-1, 1]`.
//!
//! ```text
//! H0 = -d^2/dx^2 + (V1/2) cos(2x) + (V2/2) cos(4x + phi)
//! ```

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

/// Lattice period in scaled units.
pub const PERIOD: f64 = PI;

/// Tolerance used when checking that a quasimomentum lies in the first zone.
const ZONE_SLACK: f64 = 1e-12;

/// Bichromatic lattice depths (in `E_R`) and relative phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    v1: f64,
    v2: f64,
    phi: f64,
}

impl LatticeParams {
    /// Builds the parameter set; `phi` is reduced to `[0, 2 pi)`.
    pub fn new(v1: f64, v2: f64, phi: f64) -> Result<Self> {
        if !(v1.is_finite() && v2.is_finite() && phi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite lattice parameters V1 = {v1}, V2 = {v2}, phi = {phi}"
            )));
        }
        if v1 < 0.0 || v2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lattice depths must be non-negative (V1 = {v1}, V2 = {v2})"
            )));
        }
        let mut phi = phi.rem_euclid(TAU);
        if phi >= TAU {
            phi = 0.0;
        }
        Ok(Self { v1, v2, phi })
    }

    /// Free particle.
    pub fn free() -> Self {
        Self { v1: 0.0, v2: 0.0, phi: 0.0 }
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Real-space lattice potential at `x`.
    pub fn potential(&self, x: f64) -> f64 {
        0.5 * self.v1 * (2.0 * x).cos() + 0.5 * self.v2 * (4.0 * x + self.phi).cos()
    }
}

/// Plane waves `exp(i (kappa + 2n) x)` for `n = -cutoff..=cutoff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneWaveBasis {
    cutoff: usize,
}

impl Default for PlaneWaveBasis {
    fn default() -> Self {
        Self { cutoff: 16 }
    }
}

impl PlaneWaveBasis {
    pub const MIN_CUTOFF: usize = 4;

    pub fn new(cutoff: usize) -> Result<Self> {
        if cutoff < Self::MIN_CUTOFF {
            return Err(Error::InvalidParameter(format!(
                "plane-wave cutoff {cutoff} is below the minimum of {}",
                Self::MIN_CUTOFF
            )));
        }
        Ok(Self { cutoff })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn size(&self) -> usize {
        2 * self.cutoff + 1
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    /// Reciprocal-lattice index `n` of basis slot `i`.
    pub fn index(&self, i: usize) -> i64 {
        i as i64 - self.cutoff as i64
    }
}

/// Bloch eigenstate `u_{alpha,kappa}` expanded in plane waves.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochState {
    pub band: usize,
    pub kappa: f64,
    pub energy: f64,
    /// Plane-wave coefficients for `n = -cutoff..=cutoff`, unit 2-norm.
    pub coeffs: Vec<Complex64>,
}

impl BlochState {
    pub fn cutoff(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.coeffs)
    }

    /// Evaluates `sum_n c_n exp(i (kappa + 2n) x)` at `x`.
    pub fn value_at(&self, x: f64) -> Complex64 {
        evaluate_plane_waves(&self.coeffs, self.kappa, x)
    }
}

pub(crate) fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Horner evaluation of a plane-wave sum; `coeffs[i]` multiplies `exp(i (kappa + 2(i - cutoff)) x)`.
pub(crate) fn evaluate_plane_waves(coeffs: &[Complex64], kappa: f64, x: f64) -> Complex64 {
    let cutoff = (coeffs.len() - 1) / 2;
    let z = Complex64::from_polar(1.0, 2.0 * x);
    let mut acc = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc * Complex64::from_polar(1.0, (kappa - 2.0 * cutoff as f64) * x)
}

fn check_zone(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa.abs() > 1.0 + ZONE_SLACK {
        return Err(Error::OutOfZone { kappa });
    }
    Ok(())
}

/// Hermitian Bloch Hamiltonian at quasimomentum `kappa`.
///
/// Diagonal `(kappa + 2n)^2`; `V1/4` couples `n <-> n +- 1`; the second
/// harmonic couples `n -> n + 2` with `(V2/4) e^{+i phi}` and `n -> n - 2`
/// with its conjugate.
pub fn build_hamiltonian(
    params: &LatticeParams,
    kappa: f64,
    basis: &PlaneWaveBasis,
) -> Result<DMatrix<Complex64>> {
    check_zone(kappa)?;
    let size = basis.size();
    let mut h = DMatrix::<Complex64>::zeros(size, size);
    let first = Complex64::new(0.25 * params.v1, 0.0);
    let second = Complex64::from_polar(0.25 * params.v2, params.phi);
    for i in 0..size {
        let k = kappa + 2.0 * basis.index(i) as f64;
        h[(i, i)] = Complex64::new(k * k, 0.0);
        if i + 1 < size {
            h[(i + 1, i)] = first;
            h[(i, i + 1)] = first;
        }
        if i + 2 < size {
            h[(i + 2, i)] = second;
            h[(i, i + 2)] = second.conj();
        }
    }
    Ok(h)
}

/// Lowest `n_bands` Bloch states at `kappa`, sorted by energy.
///
/// The phase of each eigenvector is whatever the eigensolver returns; gauge
/// fixing happens in [`crate::wannier`].
pub fn solve_bloch(
    params: &LatticeParams,
    kappa: f64,
    basis: &PlaneWaveBasis,
    n_bands: usize,
) -> Result<Vec<BlochState>> {
    if n_bands == 0 || n_bands > basis.size() {
        return Err(Error::InvalidParameter(format!(
            "requested {n_bands} bands from a basis of size {}",
            basis.size()
        )));
    }
    let h = build_hamiltonian(params, kappa, basis)?;
    let fail = || Error::Eigensolver {
        kappa,
        v1: params.v1,
        v2: params.v2,
        phi: params.phi,
    };
    let eig = SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or_else(fail)?;
    let mut order: Vec<usize> = (0..basis.size()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(n_bands)
        .enumerate()
        .map(|(band, j)| {
            let energy = eig.eigenvalues[j];
            let mut coeffs: Vec<Complex64> = eig.eigenvectors.column(j).iter().copied().collect();
            let n = norm2(&coeffs);
            if !energy.is_finite() || !n.is_finite() || n == 0.0 {
                return Err(fail());
            }
            coeffs.iter_mut().for_each(|c| *c /= n);
            Ok(BlochState { band, kappa, energy, coeffs })
        })
        .collect()
}

/// Bloch spectrum on a uniform quasimomentum grid spanning the full zone.
#[derive(Debug, Clone)]
pub struct BandStructure {
    params: LatticeParams,
    basis: PlaneWaveBasis,
    kappas: Vec<f64>,
    /// `states[k][alpha]`
    states: Vec<Vec<BlochState>>,
    n_bands: usize,
}

/// Uniform grid of `n` (odd) points on `[-1, 1]` containing `0` exactly.
pub fn zone_grid(n: usize) -> Vec<f64> {
    let half = (n - 1) / 2;
    (0..n).map(|j| (j as f64 - half as f64) / half as f64).collect()
}

/// Diagonalizes the lattice Hamiltonian on `n_kappas` points over the zone.
pub fn compute_band_structure(
    params: &LatticeParams,
    n_kappas: usize,
    n_bands: usize,
    basis: &PlaneWaveBasis,
) -> Result<BandStructure> {
    if n_kappas % 2 == 0 || n_kappas < 33 {
        return Err(Error::InvalidParameter(format!(
            "quasimomentum grid needs an odd count >= 33, got {n_kappas}"
        )));
    }
    let kappas = zone_grid(n_kappas);
    let states = kappas
        .par_iter()
        .map(|&k| solve_bloch(params, k, basis, n_bands))
        .collect::<Result<Vec<_>>>()?;
    Ok(BandStructure {
        params: *params,
        basis: *basis,
        kappas,
        states,
        n_bands,
    })
}

impl BandStructure {
    pub fn params(&self) -> &LatticeParams {
        &self.params
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn n_kappas(&self) -> usize {
        self.kappas.len()
    }

    /// Index of `kappa = 0`.
    pub fn center_index(&self) -> usize {
        self.kappas.len() / 2
    }

    pub fn state(&self, band: usize, k_index: usize) -> &BlochState {
        &self.states[k_index][band]
    }

    pub fn energy(&self, band: usize, k_index: usize) -> f64 {
        self.states[k_index][band].energy
    }

    pub fn band_energies(&self, band: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[band].energy).collect()
    }

    /// `E_{band+1}(kappa) - E_band(kappa)` over the grid.
    pub fn gaps(&self, band: usize) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s[band + 1].energy - s[band].energy)
            .collect()
    }

    /// Applies a global phase to every stored eigenvector (gauge change).
    pub fn with_phases(&self, phase: impl Fn(usize, usize) -> f64) -> Self {
        let mut out = self.clone();
        for (k, row) in out.states.iter_mut().enumerate() {
            for (a, st) in row.iter_mut().enumerate() {
                let p = Complex64::from_polar(1.0, phase(a, k));
                st.coeffs.iter_mut().for_each(|c| *c *= p);
            }
        }
        out
    }

    /// CSV with header `kappa,E0,...,E{n-1}`, one row per quasimomentum.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.n_bands).map(|a| format!("E{a}")).collect();
        writeln!(w, "kappa,{}", header.join(","))?;
        for (k, row) in self.kappas.iter().zip(&self.states) {
            let cells: Vec<String> = row.iter().map(|s| fmt_sig(s.energy)).collect();
            writeln!(w, "{},{}", fmt_sig(*k), cells.join(","))?;
        }
        Ok(())
    }

    /// One block per `(band, kappa)`: a `# band kappa energy` line followed by
    /// `n re im` lines.
    pub fn write_eigenvectors<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for band in 0..self.n_bands {
            for (k, row) in self.states.iter().enumerate() {
                let s = &row[band];
                writeln!(
                    w,
                    "# band {band} kappa {} energy {}",
                    fmt_sig(self.kappas[k]),
                    fmt_sig(s.energy)
                )?;
                for (i, c) in s.coeffs.iter().enumerate() {
                    writeln!(w, "{} {} {}", self.basis.index(i), fmt_sig(c.re), fmt_sig(c.im))?;
                }
            }
        }
        Ok(())
    }
}

/// Fifteen significant digits in scientific notation.
pub fn fmt_sig(x: f64) -> String {
    format!("{x:.14e}")
}

/// `|(V1/4)^2 + V2 e^{i phi}|`, the textbook estimate of the gap between the
/// first and second excited bands at the zone centre. It degrades away from
/// `phi = pi`; exact diagonalization is the reference.
pub fn approximate_gap(params: &LatticeParams) -> f64 {
    let a = 0.25 * params.v1;
    (Complex64::new(a * a, 0.0) + Complex64::from_polar(params.v2, params.phi)).norm()
}

/// Samples the Bloch function of `state` on `grid`.
pub fn bloch_to_grid(state: &BlochState, grid: &SpatialGrid) -> Result<Vec<Complex64>> {
    let required = PI / (2.0 * state.cutoff() as f64);
    if grid.dx() >= required {
        return Err(Error::GridTooCoarse { dx: grid.dx(), required });
    }
    Ok((0..grid.len())
        .map(|i| state.value_at(grid.x(i)))
        .collect())
}

//! Operators diagonal in quasimomentum acting on coarse-grained envelopes.
//!
//! The left side applies the operator exactly: the site coefficients are
//! Fourier transformed over the lattice, multiplied by the operator evaluated
//! from the diagonalized lattice at each allowed quasimomentum, and
//! transformed back. For a Wannier basis this is the same as acting on
//! `Psi = sum_n psi_n w_n` in the Bloch representation. The right side
//! replaces `kappa` by `-i d/dx` in an effective operator and applies it to
//! the continuous envelope spectrally, then samples at the sites.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dirac::{h0_matrix, mixing_angle, DiracParams};
use crate::error::{Error, Result};
use crate::lattice::{compute_band_structure, solve_bloch, LatticeParams, PlaneWaveBasis, PERIOD};

/// Samples per period of the continuous envelope grid.
const FINE_POINTS: usize = 8;

/// Spectral weight beyond the first zone that counts as aliasing.
const ALIASING_LIMIT: f64 = 1e-12;

/// Finite-difference step for the band Taylor coefficients.
const TAYLOR_STEP: f64 = 0.02;

/// `amplitude * exp(-(x - center)^2 / (4 sigma^2)) * exp(i kappa x)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub sigma: f64,
    pub center: f64,
    pub kappa: f64,
    pub amplitude: Complex64,
}

impl Envelope {
    pub fn gaussian(sigma: f64, center: f64, kappa: f64) -> Self {
        Self { sigma, center, kappa, amplitude: Complex64::new(1.0, 0.0) }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let g = (-(x - self.center).powi(2) / (4.0 * self.sigma * self.sigma)).exp();
        self.amplitude * Complex64::from_polar(g, self.kappa * x)
    }
}

/// Band-diagonal operator `O_{beta alpha}(kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandOperator {
    Identity,
    /// Band energy `E_alpha(kappa)`; the effective form is its second-order
    /// Taylor polynomial about `kappa = 0`.
    BandEnergy { band: usize },
    /// Lattice Hamiltonian in the rotated basis of bands 1 and 2; the
    /// effective form is the Dirac matrix with zone-centre parameters.
    RotatedPair,
}

impl BandOperator {
    pub fn components(&self) -> Option<usize> {
        match self {
            BandOperator::Identity => None,
            BandOperator::BandEnergy { .. } => Some(1),
            BandOperator::RotatedPair => Some(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlaterReport {
    /// `max |lhs - rhs| / max |lhs|` over sites and components.
    pub discrepancy: f64,
    /// Largest fraction of envelope weight outside `|k| <= 1`.
    pub aliasing: f64,
    pub n_sites: usize,
}

/// Compares exact and effective application of `op` to the envelopes on `n_sites` sites.
pub fn slater_oracle(
    op: &BandOperator,
    envelopes: &[Envelope],
    params: &LatticeParams,
    basis: &PlaneWaveBasis,
    n_sites: usize,
) -> Result<SlaterReport> {
    if n_sites < 16 || !n_sites.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("site count {n_sites} must be a power of two >= 16")));
    }
    if envelopes.is_empty() || envelopes.len() > 2 || op.components().is_some_and(|c| c != envelopes.len()) {
        return Err(Error::InvalidParameter(format!(
            "operator needs {:?} envelope components, got {}",
            op.components(),
            envelopes.len()
        )));
    }
    let n = n_sites;
    let half = (n / 2) as i64;
    let kappas: Vec<f64> = (0..n)
        .map(|j| {
            let m = if (j as i64) < half { j as i64 } else { j as i64 - n as i64 };
            2.0 * m as f64 / n as f64
        })
        .collect();
    let sites: Vec<f64> = (-half..half).map(|s| s as f64 * PERIOD).collect();

    // Exact and effective 2x2 (or 1x1) operator at each wavenumber.
    let (exact, effective): (Vec<Matrix2<f64>>, Box<dyn Fn(f64) -> Matrix2<f64> + Sync>) = match *op {
        BandOperator::Identity => (vec![Matrix2::identity(); n], Box::new(|_| Matrix2::identity())),
        BandOperator::BandEnergy { band } => {
            let energy = |k: f64| -> Result<f64> { Ok(solve_bloch(params, k, basis, band + 1)?[band].energy) };
            let exact = kappas
                .par_iter()
                .map(|&k| energy(k).map(|e| Matrix2::new(e, 0.0, 0.0, 0.0)))
                .collect::<Result<Vec<_>>>()?;
            let (e0, e1, e2) = taylor(&energy)?;
            (exact, Box::new(move |k| Matrix2::new(e0 + e1 * k + 0.5 * e2 * k * k, 0.0, 0.0, 0.0)))
        }
        BandOperator::RotatedPair => {
            let bands = compute_band_structure(params, 129, 3, basis)?;
            let dirac = DiracParams::from_zone_center(&bands)?;
            let exact = kappas
                .par_iter()
                .map(|&k| pair_operator(params, basis, &dirac, k))
                .collect::<Result<Vec<_>>>()?;
            (exact, Box::new(move |k| h0_matrix(&dirac, k)))
        }
    };

    let mut planner = FftPlanner::<f64>::new();
    let site_fwd = planner.plan_fft_forward(n);
    let site_inv = planner.plan_fft_inverse(n);
    let fine_n = n * FINE_POINTS;
    let fine_fwd = planner.plan_fft_forward(fine_n);
    let fine_inv = planner.plan_fft_inverse(fine_n);
    let x_min = -(half as f64) * PERIOD;
    let fine_dx = PERIOD / FINE_POINTS as f64;
    let fine_k: Vec<f64> = (0..fine_n)
        .map(|j| {
            let m = if j < fine_n / 2 { j as f64 } else { j as f64 - fine_n as f64 };
            2.0 * PI * m / (fine_n as f64 * fine_dx)
        })
        .collect();

    let mut aliasing = 0.0f64;
    let mut lhs_hat = Vec::with_capacity(envelopes.len());
    let mut rhs_hat = Vec::with_capacity(envelopes.len());
    for env in envelopes {
        // the first site sits at x_min; the resulting phase per mode cancels
        // between the forward and inverse transforms
        let mut a: Vec<Complex64> = sites.iter().map(|&x| env.value(x)).collect();
        site_fwd.process(&mut a);
        lhs_hat.push(a);

        let mut f: Vec<Complex64> = (0..fine_n).map(|i| env.value(x_min + i as f64 * fine_dx)).collect();
        fine_fwd.process(&mut f);
        let total: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        let outside: f64 = f
            .iter()
            .zip(&fine_k)
            .filter(|(_, k)| k.abs() > 1.0 + 1e-12)
            .map(|(z, _)| z.norm_sqr())
            .sum();
        aliasing = aliasing.max(outside / total);
        rhs_hat.push(f);
    }
    if aliasing > ALIASING_LIMIT {
        return Err(Error::Aliasing { fraction: aliasing });
    }

    let comps = envelopes.len();
    let apply = |hat: &[Vec<Complex64>], mats: &dyn Fn(usize) -> Matrix2<f64>, len: usize| {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); len]; comps];
        for j in 0..len {
            let m = mats(j);
            for (r, row) in out.iter_mut().enumerate() {
                row[j] = (0..comps).map(|c| hat[c][j] * m[(r, c)]).sum();
            }
        }
        out
    };
    let mut lhs = apply(&lhs_hat, &|j| exact[j], n);
    let mut rhs = apply(&rhs_hat, &|j| effective(fine_k[j]), fine_n);

    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for c in 0..comps {
        site_inv.process(&mut lhs[c]);
        fine_inv.process(&mut rhs[c]);
        for s in 0..n {
            let l = lhs[c][s] / n as f64;
            let r = rhs[c][s * FINE_POINTS] / fine_n as f64;
            worst = worst.max((l - r).norm());
            scale = scale.max(l.norm());
        }
    }
    Ok(SlaterReport { discrepancy: worst / scale, aliasing, n_sites: n })
}

/// `E(0)`, `E'(0)`, `E''(0)` by Richardson-extrapolated central differences.
fn taylor(energy: &dyn Fn(f64) -> Result<f64>) -> Result<(f64, f64, f64)> {
    let h = TAYLOR_STEP;
    let e0 = energy(0.0)?;
    let d = |h: f64| -> Result<(f64, f64)> {
        let (p, m) = (energy(h)?, energy(-h)?);
        Ok(((p - m) / (2.0 * h), (p - 2.0 * e0 + m) / (h * h)))
    };
    let (d1h, d2h) = d(h)?;
    let (d1q, d2q) = d(0.5 * h)?;
    Ok((e0, (4.0 * d1q - d1h) / 3.0, (4.0 * d2q - d2h) / 3.0))
}

/// `E_2 v+ v+^T + E_1 v- v-^T` with the branch vectors of the Dirac matrix at `kappa`.
fn pair_operator(params: &LatticeParams, basis: &PlaneWaveBasis, dirac: &DiracParams, kappa: f64) -> Result<Matrix2<f64>> {
    let states = solve_bloch(params, kappa, basis, 3)?;
    let theta = mixing_angle(dirac, kappa)?;
    let (s, c) = theta.sin_cos();
    let up = nalgebra::Vector2::new(c, s);
    let down = nalgebra::Vector2::new(-s, c);
    Ok(up * up.transpose() * states[2].energy + down * down.transpose() * states[1].energy)
}

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::dirac::{mixing_angle, DiracParams};
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::lattice::{evaluate_plane_waves, solve_bloch, BandStructure, LatticeParams, PlaneWaveBasis, PERIOD};

use super::state::WaveState;

/// Packets are refused if less than this fraction lies in the requested band.
pub const MIN_BAND_PURITY: f64 = 0.95;

/// The lattice must be resolved by at least this many grid points per period.
pub const MIN_POINTS_PER_PERIOD: usize = 16;

/// Edge amplitude of the envelope above which the packet does not fit the box.
const EDGE_TAIL: f64 = 1e-8;

/// Gaussian envelope times a Bloch function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacketSpec {
    pub band: usize,
    pub kappa0: f64,
    pub sigma: f64,
    pub x0: f64,
}

impl WavePacketSpec {
    pub fn new(band: usize, kappa0: f64, sigma: f64, x0: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) || !x0.is_finite() {
            return Err(Error::InvalidParameter(format!("bad envelope sigma = {sigma}, x0 = {x0}")));
        }
        if !kappa0.is_finite() || kappa0.abs() > 1.0 {
            return Err(Error::OutOfZone { kappa: kappa0 });
        }
        Ok(Self { band, kappa0, sigma, x0 })
    }

    /// The envelope is not slow on the lattice scale.
    pub fn is_narrow(&self) -> bool {
        self.sigma < 3.0 * PERIOD
    }

    /// `exp(-(x - x0)^2 / (4 sigma^2))`
    pub fn envelope(&self, x: f64) -> f64 {
        (-(x - self.x0).powi(2) / (4.0 * self.sigma * self.sigma)).exp()
    }

    fn check_fits(&self, grid: &SpatialGrid) -> Result<()> {
        let tail = self.envelope(grid.x_min()).max(self.envelope(grid.x_max()));
        if tail >= EDGE_TAIL {
            return Err(Error::PacketAtEdge { tail });
        }
        Ok(())
    }
}

fn check_resolution(grid: &SpatialGrid) -> Result<()> {
    let required = PERIOD / MIN_POINTS_PER_PERIOD as f64;
    if grid.dx() > required * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse { dx: grid.dx(), required });
    }
    Ok(())
}

/// Normalized packet without the band-purity gate.
pub fn bloch_packet(
    spec: &WavePacketSpec,
    params: &LatticeParams,
    basis: &PlaneWaveBasis,
    grid: &SpatialGrid,
) -> Result<WaveState> {
    check_resolution(grid)?;
    spec.check_fits(grid)?;
    let states = solve_bloch(params, spec.kappa0, basis, spec.band + 1)?;
    let u = &states[spec.band];
    let psi = grid
        .points()
        .iter()
        .map(|&x| evaluate_plane_waves(&u.coeffs, u.kappa, x) * spec.envelope(x))
        .collect();
    let mut state = WaveState::scalar(*grid, psi)?;
    state.normalize();
    Ok(state)
}

/// Band-resolved packet; fails if less than [`MIN_BAND_PURITY`] of the norm is in the band.
pub fn prepare_bloch_packet(spec: &WavePacketSpec, bands: &BandStructure, grid: &SpatialGrid) -> Result<WaveState> {
    let state = bloch_packet(spec, bands.params(), bands.basis(), grid)?;
    let purity = band_populations(&state, bands.params(), bands.basis(), spec.band + 1)?[spec.band];
    if purity < MIN_BAND_PURITY {
        return Err(Error::LowBandPurity { purity });
    }
    Ok(state)
}

/// Norm fraction in each of the lowest `n_bands` bands.
///
/// The grid must hold a whole, even number of periods aligned with the
/// lattice; each allowed quasimomentum of the box is projected separately.
pub fn band_populations(
    state: &WaveState,
    params: &LatticeParams,
    basis: &PlaneWaveBasis,
    n_bands: usize,
) -> Result<Vec<f64>> {
    if state.is_spinor() {
        return Err(Error::InvalidParameter("band populations need a scalar state".into()));
    }
    let grid = &state.grid;
    let (periods, _) = match (grid.periods(), grid.points_per_period()) {
        (Some(n), Some(p)) if n % 2 == 0 => (n, p),
        _ => {
            return Err(Error::GridMismatch(
                "band projection needs an even number of whole lattice periods".into(),
            ))
        }
    };
    let n = grid.len();
    let mut spec = state.components[0].clone();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut spec);
    let x0 = grid.x_min();
    let k_of = |m: usize| {
        let s = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        2.0 * PI * s / grid.length()
    };
    for (m, a) in spec.iter_mut().enumerate() {
        *a *= Complex64::from_polar(1.0, -k_of(m) * x0);
    }
    let total: f64 = spec.iter().map(|a| a.norm_sqr()).sum();
    let mut pops = vec![0.0; n_bands];
    let half = (periods / 2) as i64;
    let cutoff = basis.cutoff() as i64;
    for j in -half..half {
        let kappa = 2.0 * j as f64 / periods as f64;
        let amps: Vec<Complex64> = (-cutoff..=cutoff)
            .map(|q| {
                let m = j + q * periods as i64;
                if m < -(n as i64) / 2 || m >= (n as i64) / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    spec[m.rem_euclid(n as i64) as usize]
                }
            })
            .collect();
        let weight: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if weight <= 1e-20 * total {
            continue;
        }
        for s in solve_bloch(params, kappa, basis, n_bands)? {
            let o: Complex64 = s.coeffs.iter().zip(&amps).map(|(v, a)| v.conj() * a).sum();
            pops[s.band] += o.norm_sqr();
        }
    }
    Ok(pops.into_iter().map(|p| p / total).collect())
}

/// Dirac spinor for a packet in band 2 (upper branch) or band 1 (lower branch):
/// the envelope times `exp(i kappa0 x)` times the branch eigenvector at `kappa0`.
pub fn prepare_dirac_packet(spec: &WavePacketSpec, dirac: &DiracParams, grid: &SpatialGrid) -> Result<WaveState> {
    spec.check_fits(grid)?;
    let theta = mixing_angle(dirac, spec.kappa0)?;
    let (s, c) = theta.sin_cos();
    let (a, b) = match spec.band {
        2 => (c, s),
        1 => (-s, c),
        other => {
            return Err(Error::InvalidParameter(format!(
                "the Dirac pair covers bands 1 and 2, not {other}"
            )))
        }
    };
    let carrier: Vec<Complex64> = grid
        .points()
        .iter()
        .map(|&x| Complex64::from_polar(spec.envelope(x), spec.kappa0 * x))
        .collect();
    let upper = carrier.iter().map(|z| z * a).collect();
    let lower = carrier.iter().map(|z| z * b).collect();
    let mut state = WaveState::spinor(*grid, upper, lower)?;
    state.normalize();
    Ok(state)
}
